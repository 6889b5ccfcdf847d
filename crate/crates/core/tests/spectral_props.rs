use std::f64::consts::PI;

use babenko_core::spectral::{self, dealias_size, Depth, Fourier, HoloTrace, SampleGrid, TracePart};
use proptest::prelude::*;

fn depth_strategy() -> impl Strategy<Value = Depth> {
    prop_oneof![Just(Depth::Infinite), (0.3f64..4.0).prop_map(Depth::Finite)]
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n + 1)
}

/// Random real samples with no Nyquist content.
fn samples(m: usize) -> impl Strategy<Value = Vec<f64>> {
    (coeffs(m / 2 - 1), prop::collection::vec(-1.0f64..1.0, m / 2 - 1)).prop_map(move |(c, s)| {
        (0..m)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / m as f64;
                let mut v = c[0];
                for k in 1..m / 2 {
                    v += c[k] * (k as f64 * a).cos() + s[k - 1] * (k as f64 * a).sin();
                }
                v
            })
            .collect()
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn series(b: &[f64], alpha: f64, f: impl Fn(usize) -> f64) -> f64 {
    b.iter()
        .enumerate()
        .map(|(n, v)| v * f(n) * (n as f64 * alpha).cos())
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hilbert_is_skew_adjoint(f in samples(32), g in samples(32), d in depth_strategy()) {
        let fr = Fourier::new(32).unwrap();
        let hf = fr.hilbert_samples(&f, d).unwrap();
        let hg = fr.hilbert_samples(&g, d).unwrap();
        let scale = 1.0 + dot(&f, &f).sqrt() * dot(&g, &g).sqrt() * d.coth(1);
        prop_assert!((dot(&hf, &g) + dot(&f, &hg)).abs() < 1e-12 * scale);
    }

    #[test]
    fn deep_hilbert_squares_to_minus_identity_on_mean_free(f in samples(64)) {
        let fr = Fourier::new(64).unwrap();
        let mean = f.iter().sum::<f64>() / 64.0;
        let hh = fr.hilbert_samples(&fr.hilbert_samples(&f, Depth::Infinite).unwrap(), Depth::Infinite).unwrap();
        for (a, b) in hh.iter().zip(&f) {
            prop_assert!((a + (b - mean)).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_depth_hilbert_squares_to_minus_coth_squared(k in 1usize..15, d in 0.2f64..3.0) {
        let fr = Fourier::new(32).unwrap();
        let f: Vec<f64> = fr.nodes().iter().map(|a| (k as f64 * a).cos()).collect();
        let depth = Depth::Finite(d);
        let hh = fr.hilbert_samples(&fr.hilbert_samples(&f, depth).unwrap(), depth).unwrap();
        let c = 1.0 / (k as f64 * d).tanh();
        for (a, b) in hh.iter().zip(&f) {
            prop_assert!((a + c * c * b).abs() < 1e-12 * c * c);
        }
    }

    #[test]
    fn sample_round_trip(b in coeffs(24)) {
        let t = HoloTrace::new(b).unwrap();
        let m = dealias_size(24);
        let s = spectral::to_samples(&t, m, TracePart::Elevation).unwrap();
        let back = spectral::from_samples(&s, 24).unwrap();
        for (x, y) in back.coeffs().iter().zip(t.coeffs()) {
            prop_assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn extension_at_surface_is_trace_and_its_conjugate(b in coeffs(12), d in depth_strategy()) {
        let t = HoloTrace::new(b).unwrap();
        let fr = Fourier::new(64).unwrap();
        let (im, re) = fr.extend(&t, d, 0.0).unwrap();
        let y = fr.to_samples(&t, TracePart::Elevation).unwrap();
        let hy = fr.hilbert_samples(&y.values, d).unwrap();
        for j in 0..64 {
            prop_assert!((im.values[j] - y.values[j]).abs() < 1e-12);
            prop_assert!((re.values[j] - hy[j]).abs() < 1e-11);
        }
    }

    #[test]
    fn extension_is_harmonic(b in coeffs(6), d in depth_strategy(), beta in -0.25f64..-0.05, alpha in 0.0f64..6.3) {
        // Independent point evaluation of the extension by direct summation.
        let u = |a: f64, be: f64| series(&b, a, |n| d.im_multiplier(n, be));
        let h = 1e-3;
        let lap = (u(alpha + h, beta) + u(alpha - h, beta) + u(alpha, beta + h) + u(alpha, beta - h) - 4.0 * u(alpha, beta)) / (h * h);
        let bound: f64 = b.iter().enumerate().map(|(n, v)| v.abs() * (n as f64).powi(4)).sum::<f64>() * h * h;
        prop_assert!(lap.abs() < 1e-4 + bound, "{lap}");
        let fr = Fourier::new(16).unwrap();
        let (im, _) = fr.extend(&HoloTrace::new(b.clone()).unwrap(), d, beta).unwrap();
        for (j, a) in fr.nodes().iter().enumerate() {
            prop_assert!((im.values[j] - u(*a, beta)).abs() < 1e-12);
        }
    }

    #[test]
    fn dealiased_products_match_coefficient_convolution(f in coeffs(10), g in coeffs(10)) {
        let fr = Fourier::new(dealias_size(10)).unwrap();
        let fs = SampleGrid::new(fr.synthesize_cos(&f).unwrap());
        let gs = SampleGrid::new(fr.synthesize_cos(&g).unwrap());
        let p = spectral::dealiased_product(&fs, &gs).unwrap();
        let got = fr.project_cos(&p.values, 20).unwrap();
        // cos nα cos mα = (cos(n+m)α + cos(n−m)α)/2
        let mut want = vec![0.0; 21];
        for (n, a) in f.iter().enumerate() {
            for (m, b) in g.iter().enumerate() {
                let w = if n == 0 || m == 0 { 1.0 } else { 0.5 };
                want[n + m] += w * a * b;
                if n != 0 && m != 0 {
                    want[n.abs_diff(m)] += 0.5 * a * b;
                }
            }
        }
        for (x, y) in got.iter().zip(&want) {
            prop_assert!((x - y).abs() < 1e-13, "{x} {y}");
        }
    }
}

#[test]
fn quartic_products_stay_alias_free_on_the_operator_grid() {
    let n = 16;
    let b: Vec<f64> = (0..=n).map(|k| 1.0 / (1.0 + k as f64)).collect();
    let fr = Fourier::new(dealias_size(n)).unwrap();
    let s = fr.synthesize_cos(&b).unwrap();
    let fourth: Vec<f64> = s.iter().map(|v| v.powi(4)).collect();
    let got = fr.project_cos(&fourth, n).unwrap();
    // Reference on a grid large enough for degree 4n.
    let big = Fourier::new(8 * 16 * 2).unwrap();
    let s2 = big.synthesize_cos(&b).unwrap();
    let fourth2: Vec<f64> = s2.iter().map(|v| v.powi(4)).collect();
    let want = big.project_cos(&fourth2, n).unwrap();
    for (x, y) in got.iter().zip(&want) {
        assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()));
    }
}

#[test]
fn mismatched_grids_are_rejected() {
    let a = SampleGrid::new(vec![0.0; 8]);
    let b = SampleGrid::new(vec![0.0; 16]);
    assert!(spectral::dealiased_product(&a, &b).is_err());
}
