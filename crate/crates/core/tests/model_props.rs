use babenko_core::model::{
    bifurcation_g, exact_solution, laminar, laminar_flow, BabenkoOperator, JacobianMethod, Params,
};
use babenko_core::spectral::{Depth, HoloTrace};
use babenko_core::WaveError;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Residual at one point by direct trigonometric sums.
fn direct_residual(b: &[f64], p: &Params, alpha: f64) -> f64 {
    let d = p.depth();
    let flow = p.flow();
    let n = b.len() - 1;
    let (mut y, mut ya, mut hya) = (b[0], 0.0, 0.0);
    for k in 1..=n {
        let kf = k as f64;
        y += b[k] * (kf * alpha).cos();
        ya -= kf * b[k] * (kf * alpha).sin();
        hya += kf * d.coth(k) * b[k] * (kf * alpha).cos();
    }
    // y·y_α = Σ b_j b_k (−k) cos jα sin kα, and H sin mα = −coth(md) cos mα.
    let mut h_prod = 0.0;
    for j in 0..=n {
        for k in 1..=n {
            let w = -0.5 * k as f64 * b[j] * b[k];
            let sum = j + k;
            h_prod -= w * d.coth(sum) * (sum as f64 * alpha).cos();
            let (diff, sgn) = if k >= j { (k - j, 1.0) } else { (j - k, -1.0) };
            if diff > 0 {
                h_prod -= sgn * w * d.coth(diff) * (diff as f64 * alpha).cos();
            }
        }
    }
    let q = y + y * hya - h_prod;
    let pp = 1.0 + flow.omega * q;
    let jm = (1.0 + hya).powi(2) + ya * ya;
    0.5 * pp * pp - (flow.bernoulli - flow.gravity * y) * jm
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn small_trace(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.05f64..0.05, n + 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grid_residual_matches_direct_sums(b in small_trace(5), g in -0.1f64..0.1, a in 0.0f64..0.3, l in prop_oneof![Just(0.0), Just(0.2), Just(0.3)]) {
        let p = Params::new(g, a, l).unwrap();
        let op = BabenkoOperator::new(5, p.flow()).unwrap();
        let r = op.residual(&HoloTrace::new(b.clone()).unwrap()).unwrap();
        let nodes = op.fourier().nodes();
        for (j, alpha) in nodes.iter().enumerate() {
            prop_assert!((r.values[j] - direct_residual(&b, &p, *alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn rational_and_polynomial_forms_share_zeros(b in small_trace(6), g in -0.1f64..0.1, a in 0.0f64..0.3) {
        let p = Params::new(g, a, 0.0).unwrap();
        let op = BabenkoOperator::new(6, p.flow()).unwrap();
        let t = HoloTrace::new(b).unwrap();
        let e = op.evaluate(&t).unwrap();
        let rat = op.rational_residual(&t).unwrap();
        for j in 0..e.residual.len() {
            prop_assert!(e.modulus[j] > 0.0);
            prop_assert!((rat.values[j] * e.modulus[j] - e.residual[j]).abs() < 1e-13 * (1.0 + e.residual[j].abs()));
        }
    }

    #[test]
    fn laminar_traces_solve_the_operator(g in -0.1f64..0.1, a in 0.0f64..0.3, l in prop_oneof![Just(0.0), Just(0.2), Just(0.3)]) {
        let p = Params::new(g, a, l).unwrap();
        let c = laminar_flow(&p.flow()).unwrap();
        let op = BabenkoOperator::new(8, p.flow()).unwrap();
        prop_assert!(op.residual_norm(&HoloTrace::constant(8, c)).unwrap() < 1e-13);
    }

    #[test]
    fn exact_family_is_a_zero_gravity_solution(a in 0.0f64..0.3) {
        let t = exact_solution(a).unwrap();
        let p = Params::new(0.0, a, 0.0).unwrap();
        let op = BabenkoOperator::new(t.order(), p.flow()).unwrap();
        prop_assert!(op.residual_norm(&t).unwrap() < 1e-10);
    }

    #[test]
    fn difference_jacobian_converges_to_tangent_at_second_order(b in small_trace(8), a in 0.0f64..0.3) {
        let p = Params::new(0.02, a, 0.2).unwrap();
        let op = BabenkoOperator::new(8, p.flow()).unwrap();
        let t = HoloTrace::new(b).unwrap();
        let jt = op.jacobian(&t, JacobianMethod::Tangent).unwrap();
        let e1 = max_abs(&(op.jacobian_fd(&t, 1e-2).unwrap() - &jt));
        let e2 = max_abs(&(op.jacobian_fd(&t, 5e-3).unwrap() - &jt));
        prop_assert!(e1 < 1e-2 * (1.0 + max_abs(&jt)));
        if e1 > 1e-10 {
            let ratio = e1 / e2;
            prop_assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
        }
    }

    #[test]
    fn parameter_derivative_matches_differences(b in small_trace(6), a in 0.01f64..0.25) {
        let t = HoloTrace::new(b).unwrap();
        let p = Params::new(0.03, a, 0.0).unwrap();
        let op = BabenkoOperator::new(6, p.flow()).unwrap();
        let dr = op.param_derivative(&t, a).unwrap();
        let h = 1e-5;
        let rp = op.with_flow(p.with_a(a + h).unwrap().flow()).residual_coeffs(&t).unwrap();
        let rm = op.with_flow(p.with_a(a - h).unwrap().flow()).residual_coeffs(&t).unwrap();
        for i in 0..dr.len() {
            let fd = (rp[i] - rm[i]) / (2.0 * h);
            prop_assert!((fd - dr[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn kernel_at_bifurcation_is_cos_alpha(a in 0.0f64..0.08, l in prop_oneof![Just(0.0), Just(0.2)]) {
        let g = bifurcation_g(a, l).unwrap();
        let p = Params::new(g, a, l).unwrap();
        let c = laminar_flow(&p.flow()).unwrap();
        let op = BabenkoOperator::new(12, p.flow()).unwrap();
        let jac = op.jacobian(&HoloTrace::constant(12, c), JacobianMethod::Tangent).unwrap();
        let svd = jac.svd(false, true);
        let (i, smin) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |m, (i, v)| if *v < m.1 { (i, *v) } else { m });
        prop_assert!(smin < 1e-6);
        let vt = svd.v_t.unwrap();
        prop_assert!(vt[(i, 1)].abs() > 0.999);
    }
}

#[test]
fn bifurcation_gravity_matches_a_dense_singular_value_scan() {
    // Smallest singular value of the difference Jacobian along a G grid.
    let a = 0.01;
    let smin = |g: f64| {
        let p = Params::new(g, a, 0.0).unwrap();
        let c = laminar(g, a).unwrap();
        let op = BabenkoOperator::new(6, p.flow()).unwrap();
        let jac = op.jacobian_fd(&HoloTrace::constant(6, c), 1e-6).unwrap();
        jac.singular_values().min()
    };
    let step = 1e-4;
    let (best, _) = (0..=2000)
        .map(|i| -0.1 + step * i as f64)
        .map(|g| (g, smin(g)))
        .fold((0.0, f64::INFINITY), |m, (g, s)| if s < m.1 { (g, s) } else { m });
    let g = bifurcation_g(a, 0.0).unwrap();
    assert!((g - best).abs() <= step, "{g} vs scan {best}");
    assert!((g - 0.02).abs() < 2e-3);
}

#[test]
fn deep_limit_of_finite_depth_operator() {
    let b: Vec<f64> = vec![0.01, -0.05, 0.01, -0.002, 0.0004];
    let t = HoloTrace::new(b).unwrap();
    let deep = BabenkoOperator::new(4, Params::new(0.02, 0.1, 0.0).unwrap().flow()).unwrap();
    let shallow = BabenkoOperator::new(4, Params::new(0.02, 0.1, 0.05).unwrap().flow()).unwrap();
    // d = 400: coth(nd) − 1 underflows.
    let (r1, r2) = (deep.residual(&t).unwrap(), shallow.residual(&t).unwrap());
    for (x, y) in r1.values.iter().zip(&r2.values) {
        assert!((x - y).abs() < 1e-14);
    }
    assert!((Depth::from_l(0.05).value() - 400.0).abs() < 1e-9);
}

#[test]
fn leaving_the_admissible_set_is_reported() {
    // y = cos α gives |z_α|² = 2 + 2 cos α, which vanishes at the node α = π.
    let t = HoloTrace::new(vec![0.0, 1.0]).unwrap();
    let op = BabenkoOperator::new(1, Params::new(0.0, 0.1, 0.0).unwrap().flow()).unwrap();
    match op.residual(&t) {
        Err(WaveError::OutsideU { min_modulus, alpha }) => {
            assert!(min_modulus < 1e-10);
            assert!((alpha - std::f64::consts::PI).abs() < 1e-12);
        }
        other => panic!("expected outside-U fault, got {other:?}"),
    }
    assert!(matches!(Params::new(0.0, 1.0 / 3.0, 0.0), Err(WaveError::SingularParameter(_))));
}
