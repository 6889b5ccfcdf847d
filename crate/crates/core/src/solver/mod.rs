//! Newton solves, branch switching, continuation in `a` and event location.

mod branch;
mod events;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

pub use branch::{branch_switch, continue_branch, continue_from_bifurcation, AEnd, Branch, BranchEvent, EventKind, PathSpec, Termination};
pub use events::locate_event;

use crate::error::{Result, WaveError};
use crate::geometry::{default_samples, profile_report, surface_curve, GeometryTolerances, ProfileReport, WaveClass};
use crate::model::{BabenkoOperator, JacobianMethod, ModelParams};
use crate::spectral::HoloTrace;

/// Tolerances and step control for all solver operations.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm target for the residual samples.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Line-search contraction factor.
    pub backtrack: f64,
    pub max_halvings: usize,
    /// Truncation order used when a solve has to pick one.
    pub order: usize,
    /// Largest order reachable by tail-driven escalation.
    pub max_order: usize,
    /// Tail-energy ratio that triggers doubling the order.
    pub escalate_tail: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub grow: f64,
    pub shrink: f64,
    /// Steps taking at most this many Newton iterations grow the next step.
    pub grow_below_iters: usize,
    /// Accept a corrected point only if it lies within this fraction of the
    /// predictor increment from the predictor; keeps the corrector on the
    /// branch it was aimed at.
    pub jump_guard: f64,
    /// cos α amplitude used when switching off the laminar family.
    pub switch_amplitude: f64,
    pub jacobian: JacobianMethod,
    pub geometry: GeometryTolerances,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            newton_tol: 1e-11,
            max_newton_iters: 25,
            backtrack: 0.5,
            max_halvings: 10,
            order: 256,
            max_order: 1024,
            escalate_tail: 1e-8,
            initial_step: 1e-3,
            min_step: 1e-7,
            max_step: 1e-2,
            grow: 1.3,
            shrink: 0.5,
            grow_below_iters: 3,
            jump_guard: 0.3,
            switch_amplitude: -1e-2,
            jacobian: JacobianMethod::Tangent,
            geometry: GeometryTolerances::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("newton_tol", self.newton_tol),
            ("initial_step", self.initial_step),
            ("min_step", self.min_step),
            ("max_step", self.max_step),
            ("slope_tol", self.geometry.slope_tol),
            ("gap_tol", self.geometry.gap_tol),
            ("guard", self.geometry.guard),
            ("escalate_tail", self.escalate_tail),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WaveError::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) || !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(WaveError::Parameter("backtrack and shrink must lie in (0, 1)".into()));
        }
        if self.grow < 1.0 || self.min_step > self.max_step || self.order == 0 {
            return Err(WaveError::Parameter("inconsistent step control".into()));
        }
        Ok(())
    }
}

/// A converged trace with its parameters and geometric record.
#[derive(Clone, Debug)]
pub struct Solution {
    pub trace: HoloTrace,
    pub params: ModelParams,
    /// Sup-norm of the residual samples, evaluated when the value was built.
    pub residual_norm: f64,
    pub class: WaveClass,
    pub diagnostics: BTreeMap<String, f64>,
}

impl Solution {
    /// Evaluates the residual and the geometry of `trace` from scratch.
    pub fn new(trace: HoloTrace, params: ModelParams, tols: &GeometryTolerances) -> Result<Self> {
        let flow = params.flow();
        let op = BabenkoOperator::new(trace.order(), flow)?;
        let residual_norm = op.residual_norm(&trace)?;
        let report = Self::report_for(&trace, &params, tols)?;
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("min_x_alpha".to_string(), report.min_x_slope);
        diagnostics.insert("alpha_crit".to_string(), report.alpha_crit);
        diagnostics.insert("min_self_gap".to_string(), report.self_gap);
        diagnostics.insert("min_z_alpha".to_string(), report.min_z_slope_modulus);
        diagnostics.insert("tail_ratio".to_string(), trace.tail_energy_ratio());
        if report.depth_h.is_finite() {
            diagnostics.insert("depth_h".to_string(), report.depth_h);
        }
        if let Some(area) = report.bubble_area {
            diagnostics.insert("bubble_area".to_string(), area);
        }
        Ok(Solution {
            trace,
            params,
            residual_norm,
            class: report.class,
            diagnostics,
        })
    }

    fn report_for(trace: &HoloTrace, params: &ModelParams, tols: &GeometryTolerances) -> Result<ProfileReport> {
        let c = surface_curve(trace, params.flow().depth, default_samples(trace.order()))?;
        Ok(profile_report(&c, tols))
    }

    /// Full geometric report of the stored trace.
    pub fn profile(&self, tols: &GeometryTolerances) -> Result<ProfileReport> {
        Self::report_for(&self.trace, &self.params, tols)
    }

    pub fn a(&self) -> Option<f64> {
        self.params.family().map(|p| p.a)
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    pub fn min_x_slope(&self) -> f64 {
        self.diagnostic("min_x_alpha").unwrap_or(f64::NAN)
    }

    pub fn self_gap(&self) -> f64 {
        self.diagnostic("min_self_gap").unwrap_or(f64::NAN)
    }
}

pub(crate) struct NewtonOutcome {
    pub trace: HoloTrace,
    pub iterations: usize,
}

fn solve_linear(jac: DMatrix<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let lu = jac.lu();
    let x = lu.solve(&DVector::from_column_slice(rhs))?;
    if x.iter().all(|v| v.is_finite()) && x.len() == n {
        Some(x.iter().copied().collect())
    } else {
        None
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton on the projected residual. Converged when the sup-norm of
/// the residual samples drops below `newton_tol`.
pub(crate) fn newton_core(op: &BabenkoOperator, t0: &HoloTrace, opts: &SolverOptions) -> Result<NewtonOutcome> {
    let n = op.order();
    let mut t = t0.resized(n);
    let mut eval = op.evaluate(&t)?;
    for it in 0..=opts.max_newton_iters {
        let sup = eval.residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup < opts.newton_tol {
            return Ok(NewtonOutcome { trace: t, iterations: it });
        }
        if it == opts.max_newton_iters {
            return Err(WaveError::NoConvergence { iterations: it, residual: sup });
        }
        let r = op.fourier().project_cos(&eval.residual, n)?;
        let merit = l2(&r);
        if merit < 1e-3 * opts.newton_tol {
            // Projected equations are solved; what remains lives beyond the
            // truncation and no Newton step can remove it.
            return Err(WaveError::NoConvergence { iterations: it, residual: sup });
        }
        let jac = op.jacobian(&t, opts.jacobian)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solve_linear(jac, &rhs).ok_or(WaveError::NoConvergence { iterations: it, residual: sup })?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial = t.clone();
            for (c, d) in trial.coeffs_mut().iter_mut().zip(&step) {
                *c += lambda * d;
            }
            if let Ok(e) = op.evaluate(&trial) {
                let rt = op.fourier().project_cos(&e.residual, n)?;
                if l2(&rt) < merit {
                    accepted = Some((trial, e));
                    break;
                }
            }
            lambda *= opts.backtrack;
        }
        match accepted {
            Some((trial, e)) => {
                t = trial;
                eval = e;
            }
            None => return Err(WaveError::NoConvergence { iterations: it, residual: sup }),
        }
    }
    unreachable!()
}

/// Newton solve from `t0`; the returned residual norm is recomputed from the
/// converged trace.
pub fn newton_solve(t0: &HoloTrace, params: impl Into<ModelParams>, opts: &SolverOptions) -> Result<Solution> {
    let params = params.into();
    let op = BabenkoOperator::new(t0.order(), params.flow())?;
    newton_with(&op, t0, params, opts).map(|(s, _)| s)
}

pub(crate) fn newton_with(
    op: &BabenkoOperator,
    t0: &HoloTrace,
    params: ModelParams,
    opts: &SolverOptions,
) -> Result<(Solution, usize)> {
    let out = newton_core(op, t0, opts)?;
    let sol = Solution::new(out.trace, params, &opts.geometry)?;
    if !(sol.residual_norm < opts.newton_tol) {
        return Err(WaveError::NoConvergence {
            iterations: out.iterations,
            residual: sol.residual_norm,
        });
    }
    Ok((sol, out.iterations))
}
