use super::branch::{params_of, with_a, Branch, EventKind};
use super::{newton_solve, Solution, SolverOptions};
use crate::error::{Result, WaveError};
use crate::geometry::WaveClass;
use crate::spectral::HoloTrace;

/// Bisection stops once the bracket in `a` is narrower than this.
const BREAKING_TOL: f64 = 1e-8;

fn blend(lo: &Solution, hi: &Solution, w: f64) -> HoloTrace {
    let n = lo.trace.order().max(hi.trace.order());
    let (x, y) = (lo.trace.resized(n), hi.trace.resized(n));
    let coeffs = x
        .coeffs()
        .iter()
        .zip(y.coeffs())
        .map(|(a, b)| a + w * (b - a))
        .collect();
    HoloTrace::new(coeffs).unwrap_or(x)
}

fn probe(lo: &Solution, hi: &Solution, a: f64, opts: &SolverOptions) -> Result<Solution> {
    let (alo, ahi) = (lo.a().unwrap_or(0.0), hi.a().unwrap_or(0.0));
    let w = if ahi != alo { (a - alo) / (ahi - alo) } else { 0.5 };
    newton_solve(&blend(lo, hi, w), with_a(lo, a)?, opts)
}

fn is_touching(s: &Solution, opts: &SolverOptions) -> bool {
    s.class == WaveClass::Touching || (s.class != WaveClass::Invalid && s.self_gap() < opts.geometry.gap_tol)
}

/// Refines an event bracketed by consecutive branch points.
///
/// Breaking returns the solution on the regular side of the vertical
/// tangent, overhang onset the one on the overhanging side; touching returns
/// the first injective solution whose self-gap is below `gap_tol`.
pub fn locate_event(branch: &Branch, kind: EventKind, opts: &SolverOptions) -> Result<(f64, Solution)> {
    let pts = &branch.points;
    match kind {
        EventKind::Breaking | EventKind::OverhangOnset => {
            let i = (1..pts.len())
                .find(|&i| pts[i - 1].min_x_slope() > 0.0 && pts[i].min_x_slope() <= 0.0)
                .ok_or_else(|| WaveError::EventNotFound(format!("{}: min x_alpha never changes sign", kind.as_str())))?;
            let (mut lo, mut hi) = (pts[i - 1].clone(), pts[i].clone());
            params_of(&lo)?;
            while (hi.a().unwrap_or(0.0) - lo.a().unwrap_or(0.0)).abs() >= BREAKING_TOL {
                let (alo, ahi) = (lo.a().unwrap_or(0.0), hi.a().unwrap_or(0.0));
                // Secant on the indicator, kept inside the middle of the bracket.
                let (flo, fhi) = (lo.min_x_slope(), hi.min_x_slope());
                let mut w = if flo != fhi { flo / (flo - fhi) } else { 0.5 };
                w = w.clamp(0.1, 0.9);
                let mid = probe(&lo, &hi, alo + w * (ahi - alo), opts)?;
                if mid.min_x_slope() > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let out = if kind == EventKind::Breaking { lo } else { hi };
            Ok((out.a().unwrap_or(0.0), out))
        }
        EventKind::Touching => {
            if let Some(last) = pts.last() {
                if is_touching(last, opts) {
                    return Ok((last.a().unwrap_or(0.0), last.clone()));
                }
            }
            if let Some(e) = branch.event(EventKind::Touching) {
                if is_touching(&e.solution, opts) {
                    return Ok((e.a, e.solution.clone()));
                }
            }
            let i = (1..pts.len())
                .find(|&i| {
                    let prev_open = pts[i - 1].class != WaveClass::Invalid && pts[i - 1].self_gap() >= opts.geometry.gap_tol;
                    prev_open && (pts[i].class == WaveClass::Invalid || pts[i].self_gap() < opts.geometry.gap_tol)
                })
                .ok_or_else(|| WaveError::EventNotFound("touching: self-gap never closes".into()))?;
            let (mut lo, mut hi) = (pts[i - 1].clone(), pts[i].clone());
            for _ in 0..80 {
                if is_touching(&hi, opts) {
                    return Ok((hi.a().unwrap_or(0.0), hi));
                }
                let a = 0.5 * (lo.a().unwrap_or(0.0) + hi.a().unwrap_or(0.0));
                let mid = probe(&lo, &hi, a, opts)?;
                if mid.class == WaveClass::Invalid || mid.self_gap() < opts.geometry.gap_tol {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Err(WaveError::EventNotFound("touching: bisection did not isolate an injective near-touching profile".into()))
        }
        EventKind::Bifurcation => branch
            .event(EventKind::Bifurcation)
            .map(|e| (e.a, e.solution.clone()))
            .ok_or_else(|| WaveError::EventNotFound("bifurcation: branch has no laminar origin".into())),
    }
}
