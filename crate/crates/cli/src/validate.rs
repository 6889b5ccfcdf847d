//! The `validate` suite: fast numerical checks with stable names, each
//! reported as a measured value against a tolerance.
//!
//! Test hook: `--inject NAME` shifts the measured value of check `NAME` by
//! ten times its tolerance before comparison, so the check fails.

use std::f64::consts::PI;
use std::time::Instant;

use babenko_core::critlayer::{find_vertical_tangent, stream_extension, trace_and_classify, trace_zero_set, CritOptions, Side};
use babenko_core::model::{
    bifurcation_a, bifurcation_coefficients, bifurcation_g, exact_solution, exact_solution_n, laminar_flow,
    BabenkoOperator, JacobianMethod, Params,
};
use babenko_core::solver::{
    branch_switch, continue_branch, continue_from_bifurcation, locate_event, newton_solve, AEnd, EventKind, PathSpec,
};
use babenko_core::spectral::{Depth, Fourier};
use babenko_core::{HoloTrace, Solution, SolverOptions};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::Value;

use crate::config::Resolved;
use crate::files::{self, SolutionRecord, FORMAT_VERSION};
use crate::CliError;

pub const CHECKS: [&str; 11] = [
    "hilbert",
    "roundtrip",
    "serialization",
    "exact_residual",
    "laminar_residual",
    "jacobian",
    "kernel",
    "transversality",
    "sqrt_law",
    "breaking",
    "critlayer",
];

/// Measured quantity of one check; it passes when `value < tolerance`.
struct Measure {
    value: f64,
    tolerance: f64,
    detail: String,
}

#[derive(Serialize)]
struct CheckRecord {
    name: String,
    pass: bool,
    value: f64,
    tolerance: f64,
    injected: bool,
    seconds: f64,
    detail: String,
}

#[derive(Serialize)]
struct Report {
    version: u32,
    config: Option<Value>,
    seed: u64,
    n: usize,
    passed: usize,
    failed: Vec<String>,
    checks: Vec<CheckRecord>,
}

struct Ctx {
    n: usize,
    rng: StdRng,
    opts: SolverOptions,
}

type CheckResult = Result<Measure, CliError>;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn hilbert(c: &mut Ctx) -> CheckResult {
    let m = (4 * c.n).next_power_of_two();
    let fr = Fourier::new(m)?;
    let mut worst = 0.0f64;
    for d in [0.5, 1.0, 2.0, f64::INFINITY] {
        let depth = Depth::new(d)?;
        for k in 1..=c.n {
            let coth = depth.coth(k);
            let phase = |j: usize| 2.0 * PI * ((k * j) % m) as f64 / m as f64;
            let cs: Vec<f64> = (0..m).map(|j| phase(j).cos()).collect();
            let sn: Vec<f64> = (0..m).map(|j| phase(j).sin()).collect();
            let hc = fr.hilbert_samples(&cs, depth)?;
            let hs = fr.hilbert_samples(&sn, depth)?;
            for j in 0..m {
                worst = worst.max((hc[j] - coth * sn[j]).abs() / coth);
                worst = worst.max((hs[j] + coth * cs[j]).abs() / coth);
            }
        }
    }
    Ok(Measure {
        value: worst,
        tolerance: 1e-13,
        detail: format!("relative multiplier error for 1 <= n <= {}, d in {{0.5, 1, 2, inf}}", c.n),
    })
}

fn random_trace(rng: &mut StdRng, n: usize, scale: f64) -> Vec<f64> {
    (0..=n).map(|k| scale * rng.random_range(-1.0..1.0) * 0.8f64.powi(k as i32)).collect()
}

fn roundtrip(c: &mut Ctx) -> CheckResult {
    let fr = Fourier::new(babenko_core::spectral::dealias_size(c.n))?;
    let mut worst = 0.0f64;
    for _ in 0..16 {
        let b = random_trace(&mut c.rng, c.n, 1.0);
        let back = fr.project_cos(&fr.synthesize_cos(&b)?, c.n)?;
        worst = worst.max(max_abs_diff(&b, &back));
    }
    Ok(Measure {
        value: worst,
        tolerance: 1e-13,
        detail: "coefficients -> samples -> coefficients, 16 random traces".into(),
    })
}

fn serialization(c: &mut Ctx) -> CheckResult {
    let tols = c.opts.geometry;
    let mut mismatches = 0usize;
    for _ in 0..8 {
        let a = c.rng.random_range(0.0..0.3);
        let mut b = exact_solution_n(a, c.n)?.into_coeffs();
        for (k, v) in b.iter_mut().enumerate() {
            *v += 1e-3 * c.rng.random_range(-1.0..1.0) * 0.5f64.powi(k as i32);
        }
        let sol = Solution::new(HoloTrace::new(b)?, Params::new(0.0, a, 0.0)?.into(), &tols)?;
        let rec = SolutionRecord::from_solution(&sol, None);
        let text = serde_json::to_string(&rec).map_err(|e| CliError::Io(e.to_string()))?;
        let back: SolutionRecord = serde_json::from_str(&text).map_err(|e| CliError::Io(e.to_string()))?;
        let same = back
            .coeffs
            .iter()
            .zip(sol.trace.coeffs())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        if !same || back.to_solution(&tols)?.trace.coeffs().len() != sol.trace.coeffs().len() {
            mismatches += 1;
        }
    }
    Ok(Measure {
        value: mismatches as f64,
        tolerance: 0.5,
        detail: "bit-exact JSON round trips of 8 perturbed solutions (value = mismatches)".into(),
    })
}

fn exact_residual(_: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for a in [0.05, 0.1, 0.2, 0.3, 0.4] {
        let t = exact_solution(a)?;
        let op = BabenkoOperator::new(t.order(), Params::new(0.0, a, 0.0)?.flow())?;
        worst = worst.max(op.residual_norm(&t)?);
    }
    Ok(Measure {
        value: worst,
        tolerance: 1e-10,
        detail: "zero-gravity explicit family, a in {0.05, 0.1, 0.2, 0.3, 0.4}".into(),
    })
}

fn laminar_residual(_: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    for i in 0..5 {
        for j in 0..5 {
            for l in [0.0, 0.2, 0.3] {
                let p = Params::new(-0.1 + 0.05 * i as f64, 0.075 * j as f64, l)?;
                let cst = laminar_flow(&p.flow())?;
                let op = BabenkoOperator::new(16, p.flow())?;
                worst = worst.max(op.residual_norm(&HoloTrace::constant(16, cst))?);
            }
        }
    }
    Ok(Measure {
        value: worst,
        tolerance: 1e-13,
        detail: "laminar flows on a 5x5x3 (G, a, l) grid".into(),
    })
}

fn jacobian(c: &mut Ctx) -> CheckResult {
    let n = c.n.min(16);
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let t = HoloTrace::new(random_trace(&mut c.rng, n, 0.05))?;
        let p = Params::new(c.rng.random_range(-0.1..0.1), c.rng.random_range(0.0..0.3), 0.2)?;
        let op = BabenkoOperator::new(n, p.flow())?;
        let jt = op.jacobian(&t, JacobianMethod::Tangent)?;
        let jf = op.jacobian_fd(&t, 1e-5)?;
        let scale = 1.0 + jt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max((jf - &jt).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale);
    }
    Ok(Measure {
        value: worst,
        tolerance: 1e-7,
        detail: format!("tangent vs central-difference Jacobian, N = {n}, 4 random traces"),
    })
}

fn kernel(_: &mut Ctx) -> CheckResult {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for a in [0.0, 0.05] {
        for l in [0.0, 0.2] {
            let g = bifurcation_g(a, l)?;
            let p = Params::new(g, a, l)?;
            let cst = laminar_flow(&p.flow())?;
            let op = BabenkoOperator::new(16, p.flow())?;
            let svd = op.jacobian(&HoloTrace::constant(16, cst), JacobianMethod::default())?.svd(false, true);
            let (i, smin) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |m, (i, v)| if *v < m.1 { (i, *v) } else { m });
            let comp = svd.v_t.map(|v| v[(i, 1)].abs()).unwrap_or(0.0);
            // Both conditions folded into one margin against 1e-6.
            worst = worst.max(smin).max((0.999 - comp).max(0.0) * 1e6);
            detail.push(format!("(a={a}, l={l}): sigma_min {smin:.1e}, cos component {comp:.6}"));
        }
    }
    let g00 = bifurcation_g(0.0, 0.0)?;
    worst = worst.max(g00.abs() * 1e4);
    detail.push(format!("G(0,0) = {g00:.1e}"));
    Ok(Measure {
        value: worst,
        tolerance: 1e-6,
        detail: detail.join("; "),
    })
}

fn transversality(_: &mut Ctx) -> CheckResult {
    let bc = bifurcation_coefficients(0.0, 0.0)?;
    Ok(Measure {
        value: ((bc.transversality + 2.0) / 2.0).abs(),
        tolerance: 0.05,
        detail: format!("transversality {:.6} vs -2 (relative)", bc.transversality),
    })
}

fn sqrt_law(c: &mut Ctx) -> CheckResult {
    let (g, l) = (0.01, 0.0);
    let o = SolverOptions {
        order: c.n.min(32),
        ..c.opts
    };
    let a_bif = bifurcation_a(g, l)?;
    let mut data = Vec::new();
    for i in 0..9 {
        let s = -2e-3 * 10f64.powf(0.5 * i as f64 / 8.0);
        let sol = branch_switch(a_bif, g, l, s, &o)?;
        data.push(((sol.a().unwrap_or(f64::NAN) - a_bif).ln(), sol.trace.coeffs()[1].abs().ln()));
    }
    let n = data.len() as f64;
    let (mx, my) = data.iter().fold((0.0, 0.0), |m, p| (m.0 + p.0 / n, m.1 + p.1 / n));
    let (num, den) = data
        .iter()
        .fold((0.0, 0.0), |m, p| (m.0 + (p.0 - mx) * (p.1 - my), m.1 + (p.0 - mx).powi(2)));
    let slope = num / den;
    Ok(Measure {
        value: (slope - 0.5).abs(),
        tolerance: 0.05,
        detail: format!("log-log slope {slope:.5} of b1 against a - a_bif (G = 0.01)"),
    })
}

fn breaking(c: &mut Ctx) -> CheckResult {
    let o = SolverOptions { order: c.n, ..c.opts };
    let a0 = 0.01;
    let start = newton_solve(&exact_solution_n(a0, o.order)?, Params::new(0.0, a0, 0.0)?, &o)?;
    let path = PathSpec {
        gravity: 0.0,
        l: 0.0,
        a_start: a0,
        a_end: AEnd::Value(0.19),
    };
    let b = continue_branch(&start, path, &o)?;
    let (a, sol) = locate_event(&b, EventKind::Breaking, &o)?;
    let target = (2f64.sqrt() - 1.0).powi(2);
    Ok(Measure {
        value: (a - target).abs(),
        tolerance: 1e-6,
        detail: format!("zero-gravity breaking a* = {a:.12} (min x_alpha {:.1e})", sol.min_x_slope()),
    })
}

fn critlayer(c: &mut Ctx) -> CheckResult {
    let o = SolverOptions { order: c.n, ..c.opts };
    // Laminar: the zero set is the line y = -1/omega.
    let p = Params::new(0.02, 0.1, 0.0)?;
    let lam = Solution::new(HoloTrace::constant(16, laminar_flow(&p.flow())?), p.into(), &o.geometry)?;
    let e = stream_extension(&lam)?;
    let y_layer = -1.0 / e.flow().omega;
    let b0 = lam.trace.coeffs()[0];
    let reach = (y_layer - b0).abs() + 1.0;
    let pts = trace_zero_set(&e, (0.0, 2.0 * PI), (-reach, e.beta_max().min(reach)), 16, 200)?;
    let mut lam_err: f64 = if pts.is_empty() { 1.0 } else { 0.0 };
    for (a, b) in pts {
        lam_err = lam_err.max((e.point(a, b)?.y - y_layer).abs());
    }
    // Breaking wave on the G = 0.01 branch: layer above the surface.
    let b = continue_from_bifurcation(0.01, 0.0, AEnd::Value(0.19), &o)?;
    let (_, sol) = locate_event(&b, EventKind::Breaking, &o)?;
    let e = stream_extension(&sol)?;
    let ac = find_vertical_tangent(&sol, 1e-6)?;
    let rep = trace_and_classify(&e, ac, &CritOptions::default())?;
    let rel = ((rep.fitted_coefficient - rep.predicted_coefficient) / rep.fitted_coefficient).abs();
    let side_ok = rep.side == Side::AboveSurface;
    // Side and coefficient are scaled onto the 1e-6 laminar tolerance.
    let value = lam_err.max(if side_ok { 0.0 } else { 1.0 }).max(rel * 1e-5);
    Ok(Measure {
        value,
        tolerance: 1e-6,
        detail: format!(
            "laminar layer error {lam_err:.1e}; G=0.01 breaking side {} (k={}), coefficient rel error {rel:.1e}",
            rep.side.as_str(),
            rep.k
        ),
    })
}

fn dispatch(name: &str, c: &mut Ctx) -> CheckResult {
    match name {
        "hilbert" => hilbert(c),
        "roundtrip" => roundtrip(c),
        "serialization" => serialization(c),
        "exact_residual" => exact_residual(c),
        "laminar_residual" => laminar_residual(c),
        "jacobian" => jacobian(c),
        "kernel" => kernel(c),
        "transversality" => transversality(c),
        "sqrt_law" => sqrt_law(c),
        "breaking" => breaking(c),
        "critlayer" => critlayer(c),
        other => Err(CliError::Config(format!("unknown check `{other}`"))),
    }
}

pub fn run(r: &Resolved) -> Result<(), CliError> {
    let selected: Vec<String> = match &r.only {
        Some(v) => v.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => CHECKS.iter().map(|s| s.to_string()).collect(),
    };
    for s in selected.iter().chain(r.inject.iter()) {
        if !CHECKS.contains(&s.as_str()) {
            return Err(CliError::Config(format!("unknown check `{s}`; known: {}", CHECKS.join(", "))));
        }
    }
    let opts = r.solver_options()?;
    let mut ctx = Ctx {
        n: r.n.unwrap_or(64),
        rng: StdRng::seed_from_u64(r.seed),
        opts,
    };
    let mut checks = Vec::new();
    for name in &selected {
        let t0 = Instant::now();
        let injected = r.inject.as_deref() == Some(name.as_str());
        let rec = match dispatch(name, &mut ctx) {
            Ok(mut m) => {
                if injected {
                    m.value += 10.0 * m.tolerance;
                }
                CheckRecord {
                    name: name.clone(),
                    pass: m.value < m.tolerance,
                    value: m.value,
                    tolerance: m.tolerance,
                    injected,
                    seconds: 0.0,
                    detail: m.detail,
                }
            }
            Err(e) => CheckRecord {
                name: name.clone(),
                pass: false,
                value: f64::NAN,
                tolerance: f64::NAN,
                injected,
                seconds: 0.0,
                detail: format!("error [{}]: {e}", e.reason()),
            },
        };
        let rec = CheckRecord {
            seconds: t0.elapsed().as_secs_f64(),
            ..rec
        };
        println!(
            "{} {:<16} {:.3e} < {:.1e}  {}",
            if rec.pass { "PASS" } else { "FAIL" },
            rec.name,
            rec.value,
            rec.tolerance,
            rec.detail
        );
        checks.push(rec);
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    let report = Report {
        version: FORMAT_VERSION,
        config: serde_json::to_value(r).ok(),
        seed: r.seed,
        n: ctx.n,
        passed: checks.len() - failed.len(),
        failed: failed.clone(),
        checks,
    };
    files::write_json(&r.out.join("validate.json"), &report)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::ValidationFailed(failed))
    }
}
