use nalgebra::DMatrix;

use super::{l2, newton_with, solve_linear, Solution, SolverOptions};
use crate::error::{Result, WaveError};
use crate::geometry::WaveClass;
use crate::model::{bifurcation_a, laminar_flow, BabenkoOperator, ModelParams, Params};
use crate::spectral::HoloTrace;

/// End of a continuation path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AEnd {
    Value(f64),
    /// Continue until the profile touches itself.
    Touch,
}

/// Path in `a` at fixed `(G, l)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSpec {
    pub gravity: f64,
    pub l: f64,
    pub a_start: f64,
    pub a_end: AEnd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Bifurcation,
    Breaking,
    OverhangOnset,
    Touching,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Bifurcation => "bifurcation",
            EventKind::Breaking => "breaking",
            EventKind::OverhangOnset => "overhang_onset",
            EventKind::Touching => "touching",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "bifurcation" => EventKind::Bifurcation,
            "breaking" => EventKind::Breaking,
            "overhang_onset" | "overhang-onset" => EventKind::OverhangOnset,
            "touching" => EventKind::Touching,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BranchEvent {
    pub kind: EventKind,
    pub a: f64,
    /// Whether `a` was refined by bisection or only bracketed by two points.
    pub refined: bool,
    pub solution: Solution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ReachedEnd,
    Touching,
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub points: Vec<Solution>,
    pub path: PathSpec,
    pub events: Vec<BranchEvent>,
    pub termination: Option<Termination>,
}

impl Branch {
    pub fn a_values(&self) -> Vec<f64> {
        self.points.iter().filter_map(|s| s.a()).collect()
    }

    pub fn last(&self) -> Option<&Solution> {
        self.points.last()
    }

    pub fn event(&self, kind: EventKind) -> Option<&BranchEvent> {
        self.events.iter().find(|e| e.kind == kind)
    }

    fn sort_events(&mut self) {
        self.events.sort_by(|x, y| x.a.total_cmp(&y.a));
    }
}

fn family(s: &Solution) -> Result<Params> {
    s.params
        .family()
        .ok_or_else(|| WaveError::Parameter("continuation needs derived (G, a, l) parameters".into()))
}

/// Newton on the amplitude-pinned system: the cos α coefficient is fixed to
/// `s` and `a` takes its place among the unknowns.
fn pinned_newton(op0: &BabenkoOperator, params: Params, t0: &HoloTrace, s: f64, opts: &SolverOptions) -> Result<(HoloTrace, f64)> {
    let n = op0.order();
    let mut t = t0.resized(n);
    t.coeffs_mut()[1] = s;
    let mut a = params.a;
    let residual = |t: &HoloTrace, a: f64| -> Result<(Vec<f64>, f64, BabenkoOperator)> {
        let op = op0.with_flow(params.with_a(a)?.flow());
        let e = op.evaluate(t)?;
        let sup = e.residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok((op.fourier().project_cos(&e.residual, n)?, sup, op))
    };
    let (mut r, mut sup, mut op) = residual(&t, a)?;
    for it in 0..=opts.max_newton_iters {
        if sup < opts.newton_tol {
            return Ok((t, a));
        }
        if it == opts.max_newton_iters {
            break;
        }
        let merit = l2(&r);
        let mut jac: DMatrix<f64> = op.jacobian(&t, opts.jacobian)?;
        let da = op.param_derivative(&t, a)?;
        for (i, v) in da.into_iter().enumerate() {
            jac[(i, 1)] = v;
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solve_linear(jac, &rhs)
            .ok_or_else(|| WaveError::BranchSwitch("singular pinned Jacobian".into()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = t.clone();
            for (k, (c, d)) in trial.coeffs_mut().iter_mut().zip(&step).enumerate() {
                if k != 1 {
                    *c += lambda * d;
                }
            }
            let trial_a = a + lambda * step[1];
            if let Ok((rt, st, ot)) = residual(&trial, trial_a) {
                if l2(&rt) < merit {
                    t = trial;
                    a = trial_a;
                    r = rt;
                    sup = st;
                    op = ot;
                    accepted = true;
                    break;
                }
            }
            lambda *= opts.backtrack;
        }
        if !accepted {
            break;
        }
    }
    Err(WaveError::BranchSwitch(format!(
        "pinned corrector stalled with residual {sup:e} at a = {a}"
    )))
}

/// Nontrivial solution with cos α amplitude `s` on the branch bifurcating
/// from the laminar family at `a_bif` (gravity `G`, depth parameter `l`).
pub fn branch_switch(a_bif: f64, gravity: f64, l: f64, s: f64, opts: &SolverOptions) -> Result<Solution> {
    let params = Params::new(gravity, a_bif, l)?;
    let c = laminar_flow(&params.flow())?;
    let n = opts.order;
    if s == 0.0 {
        return Solution::new(HoloTrace::constant(n, c), params.into(), &opts.geometry);
    }
    let op = BabenkoOperator::new(n, params.flow())?;
    let mut t0 = HoloTrace::constant(n, c);
    t0.coeffs_mut()[1] = s;
    let (t, a) = pinned_newton(&op, params, &t0, s, opts)?;
    let sol = Solution::new(t, params.with_a(a)?.into(), &opts.geometry)?;
    if !(sol.residual_norm < opts.newton_tol) {
        return Err(WaveError::BranchSwitch(format!(
            "independent residual check failed: {:e}",
            sol.residual_norm
        )));
    }
    Ok(sol)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n).fold(0.0f64, |m, i| {
        let x = a.get(i).copied().unwrap_or(0.0);
        let y = b.get(i).copied().unwrap_or(0.0);
        m.max((x - y).abs())
    })
}

enum StepOutcome {
    Accepted(Solution, usize),
    Rejected,
}

struct Marcher<'a> {
    opts: &'a SolverOptions,
    op: BabenkoOperator,
    base: Params,
}

impl Marcher<'_> {
    fn order(&self) -> usize {
        self.op.order()
    }

    fn escalate(&mut self) -> Result<()> {
        let n = (2 * self.order()).min(self.opts.max_order);
        self.op = BabenkoOperator::new(n, self.base.flow())?;
        Ok(())
    }

    fn solve(&mut self, guess: &HoloTrace, a: f64) -> Result<(Solution, usize)> {
        let p = self.base.with_a(a)?;
        let op = self.op.with_flow(p.flow());
        let (mut sol, mut its) = newton_with(&op, guess, p.into(), self.opts)?;
        while sol.trace.tail_energy_ratio() > self.opts.escalate_tail && self.order() < self.opts.max_order {
            self.escalate()?;
            let op = self.op.with_flow(p.flow());
            let (s, i) = newton_with(&op, &sol.trace, p.into(), self.opts)?;
            sol = s;
            its += i;
        }
        Ok((sol, its))
    }
}

fn predictor(points: &[Solution], a_next: f64, n: usize) -> HoloTrace {
    let last = &points[points.len() - 1];
    if points.len() < 2 {
        return last.trace.resized(n);
    }
    let prev = &points[points.len() - 2];
    let (a1, a0) = (last.a().unwrap_or(0.0), prev.a().unwrap_or(0.0));
    if a1 == a0 {
        return last.trace.resized(n);
    }
    let w = (a_next - a1) / (a1 - a0);
    let b1 = last.trace.resized(n);
    let b0 = prev.trace.resized(n);
    let coeffs = b1
        .coeffs()
        .iter()
        .zip(b0.coeffs())
        .map(|(x, y)| x + w * (x - y))
        .collect();
    HoloTrace::new(coeffs).unwrap_or(b1)
}

fn record_crossings(branch: &mut Branch) {
    let k = branch.points.len();
    if k < 2 {
        return;
    }
    let (prev, cur) = (&branch.points[k - 2], &branch.points[k - 1]);
    let (mp, mc) = (prev.min_x_slope(), cur.min_x_slope());
    let have = |kind| branch.events.iter().any(|e: &BranchEvent| e.kind == kind);
    if mp > 0.0 && mc <= 0.0 && !have(EventKind::Breaking) {
        let (ap, ac) = (prev.a().unwrap_or(0.0), cur.a().unwrap_or(0.0));
        let a = ap + (ac - ap) * mp / (mp - mc);
        let sol = prev.clone();
        branch.events.push(BranchEvent {
            kind: EventKind::Breaking,
            a,
            refined: false,
            solution: sol,
        });
        branch.events.push(BranchEvent {
            kind: EventKind::OverhangOnset,
            a,
            refined: false,
            solution: cur.clone(),
        });
    }
}

/// Marches `a` from the last point of `seeds` along `target`, with secant
/// prediction, adaptive steps and touching detection.
fn march(seeds: Vec<Solution>, target: PathSpec, opts: &SolverOptions, events: Vec<BranchEvent>) -> Result<Branch> {
    opts.validate()?;
    let start = seeds.last().ok_or_else(|| WaveError::Parameter("empty seed list".into()))?;
    let base = family(start)?;
    let mut branch = Branch {
        points: seeds.clone(),
        path: target,
        events,
        termination: None,
    };
    let a_cur0 = base.a;
    let a_end = match target.a_end {
        AEnd::Value(v) => v,
        AEnd::Touch => 1.0 - 1e-9,
    };
    if a_end == a_cur0 {
        branch.termination = Some(Termination::ReachedEnd);
        return Ok(branch);
    }
    let dir = (a_end - a_cur0).signum();
    let n0 = start.trace.order();
    let mut m = Marcher {
        opts,
        op: BabenkoOperator::new(n0, base.flow())?,
        base,
    };
    if branch.points.len() == 1 && start.trace.coeffs()[1] != 0.0 {
        // A constant predictor from one nontrivial point can fall back onto
        // the laminar family; take the first step along the curve tangent.
        let seed = tangent_seed(start, &m, dir, opts)?;
        branch.points.push(seed);
        record_crossings(&mut branch);
    }
    let mut step = opts.initial_step.clamp(opts.min_step, opts.max_step);
    let mut failures_at_min = 0usize;
    loop {
        let last = branch.points.last().unwrap();
        let a_cur = last.a().unwrap_or(a_cur0);
        if (a_end - a_cur) * dir <= 0.0 {
            branch.termination = Some(Termination::ReachedEnd);
            break;
        }
        let mut a_next = a_cur + dir * step;
        if (a_end - a_next) * dir < 0.0 {
            a_next = a_end;
        }
        let pred = predictor(&branch.points, a_next, m.order());
        let outcome = match m.solve(&pred, a_next) {
            Ok((sol, its)) => {
                let guard_ok = if branch.points.len() >= 2 {
                    let prev = &branch.points[branch.points.len() - 1];
                    let inc = sup_diff(pred.coeffs(), prev.trace.coeffs());
                    sup_diff(sol.trace.coeffs(), pred.coeffs()) <= opts.jump_guard * inc + 1e-9
                } else {
                    true
                };
                if guard_ok && sol.class != WaveClass::Invalid {
                    StepOutcome::Accepted(sol, its)
                } else {
                    StepOutcome::Rejected
                }
            }
            Err(WaveError::OutsideU { .. }) | Err(WaveError::NoConvergence { .. }) => StepOutcome::Rejected,
            Err(e) => return Err(e),
        };
        match outcome {
            StepOutcome::Accepted(sol, its) => {
                failures_at_min = 0;
                let touching = sol.class == WaveClass::Touching;
                branch.points.push(sol);
                record_crossings(&mut branch);
                if touching {
                    let last = branch.points.last().unwrap().clone();
                    branch.events.push(BranchEvent {
                        kind: EventKind::Touching,
                        a: last.a().unwrap_or(a_next),
                        refined: false,
                        solution: last,
                    });
                    branch.termination = Some(Termination::Touching);
                    break;
                }
                if its <= opts.grow_below_iters {
                    step = (step * opts.grow).min(opts.max_step);
                }
            }
            StepOutcome::Rejected => {
                if step <= opts.min_step {
                    failures_at_min += 1;
                    if failures_at_min >= 2 {
                        match arclength_step(&branch, &m, opts) {
                            Ok(sol) if sol.class != WaveClass::Invalid => {
                                failures_at_min = 0;
                                branch.points.push(sol);
                                record_crossings(&mut branch);
                                continue;
                            }
                            _ => {
                                let at = a_cur;
                                branch.sort_events();
                                return Err(WaveError::StalledBranch {
                                    at,
                                    reason: "step underflow".into(),
                                    partial: Box::new(branch),
                                });
                            }
                        }
                    }
                }
                step = (step * opts.shrink).max(opts.min_step);
            }
        }
    }
    branch.sort_events();
    Ok(branch)
}

/// One pseudo-arclength corrector step along the secant of the last two
/// points, used when stepping in `a` has stalled at the minimum step.
fn arclength_step(branch: &Branch, m: &Marcher<'_>, opts: &SolverOptions) -> Result<Solution> {
    let k = branch.points.len();
    if k < 2 {
        return Err(WaveError::NoConvergence { iterations: 0, residual: f64::NAN });
    }
    let n = m.order();
    let p1 = &branch.points[k - 1];
    let p0 = &branch.points[k - 2];
    let (b1, b0) = (p1.trace.resized(n), p0.trace.resized(n));
    let (a1, a0) = (p1.a().unwrap_or(0.0), p0.a().unwrap_or(0.0));
    let mut tan: Vec<f64> = b1.coeffs().iter().zip(b0.coeffs()).map(|(x, y)| x - y).collect();
    tan.push(a1 - a0);
    let norm = l2(&tan);
    if norm == 0.0 {
        return Err(WaveError::NoConvergence { iterations: 0, residual: f64::NAN });
    }
    tan.iter_mut().for_each(|v| *v /= norm);
    let ds = opts.min_step.max(1e-3 * norm);
    arclength_correct(p1, &tan, ds, m, opts)
}

/// Unit tangent of the solution curve in `(b, a)` at `sol`: the null vector
/// of `[D_b R | ∂_a R]`, oriented so that `a` moves along `dir` (or, when
/// `a` is stationary, so that `|b₁|` grows).
fn curve_tangent(sol: &Solution, m: &Marcher<'_>, dir: f64, opts: &SolverOptions) -> Result<Vec<f64>> {
    let n = m.order();
    let a = sol.a().unwrap_or(0.0);
    let t = sol.trace.resized(n);
    let op = m.op.with_flow(m.base.with_a(a)?.flow());
    let jac = op.jacobian(&t, opts.jacobian)?;
    let da = op.param_derivative(&t, a)?;
    // Square up with a zero row so the full right singular basis is returned.
    let mut big = DMatrix::zeros(n + 2, n + 2);
    big.view_mut((0, 0), (n + 1, n + 1)).copy_from(&jac);
    for i in 0..=n {
        big[(i, n + 1)] = da[i];
    }
    let svd = big.svd(false, true);
    let vt = svd.v_t.ok_or(WaveError::Differentiation(n + 1))?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    let mut tan: Vec<f64> = vt.row(imin).iter().copied().collect();
    let ta = tan[n + 1];
    let flip = if ta.abs() > 1e-8 {
        ta * dir < 0.0
    } else {
        tan[1] * t.coeffs()[1] < 0.0
    };
    if flip {
        tan.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(tan)
}

/// Second point for a continuation started from a single solution.
fn tangent_seed(start: &Solution, m: &Marcher<'_>, dir: f64, opts: &SolverOptions) -> Result<Solution> {
    let tan = curve_tangent(start, m, dir, opts)?;
    let n = m.order();
    let amp = start.trace.coeffs()[1].abs();
    let ta = tan[n + 1].abs().max(1e-12);
    let ds = (0.25 * amp).max(1e-4).min(opts.initial_step / ta);
    let mut ds = ds;
    for _ in 0..=opts.max_halvings {
        match arclength_correct(start, &tan, ds, m, opts) {
            Ok(sol) if sol.class != WaveClass::Invalid => return Ok(sol),
            _ => ds *= opts.shrink,
        }
    }
    Err(WaveError::NoConvergence { iterations: opts.max_newton_iters, residual: f64::NAN })
}

/// Pseudo-arclength corrector from `p1` along the unit tangent `tan`.
fn arclength_correct(p1: &Solution, tan: &[f64], ds: f64, m: &Marcher<'_>, opts: &SolverOptions) -> Result<Solution> {
    let n = m.order();
    let b1 = p1.trace.resized(n);
    let a1 = p1.a().unwrap_or(0.0);
    let mut u: Vec<f64> = b1.coeffs().to_vec();
    u.push(a1);
    let anchor = u.clone();
    for (x, t) in u.iter_mut().zip(tan) {
        *x += ds * t;
    }
    for _ in 0..opts.max_newton_iters {
        let a = u[n + 1];
        let p = m.base.with_a(a)?;
        let op = m.op.with_flow(p.flow());
        let t = HoloTrace::new(u[..=n].to_vec())?;
        let e = op.evaluate(&t)?;
        let sup = e.residual.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if sup < opts.newton_tol {
            let sol = Solution::new(t.clone(), p.into(), &opts.geometry)?;
            if sol.residual_norm < opts.newton_tol {
                return Ok(sol);
            }
        }
        let mut r = op.fourier().project_cos(&e.residual, n)?;
        let arc: f64 = u.iter().zip(&anchor).zip(tan).map(|((x, y), t)| (x - y) * t).sum::<f64>() - ds;
        r.push(arc);
        let jac = op.jacobian(&t, opts.jacobian)?;
        let da = op.param_derivative(&t, a)?;
        let mut big = DMatrix::zeros(n + 2, n + 2);
        big.view_mut((0, 0), (n + 1, n + 1)).copy_from(&jac);
        for i in 0..=n {
            big[(i, n + 1)] = da[i];
        }
        for j in 0..n + 2 {
            big[(n + 1, j)] = tan[j];
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solve_linear(big, &rhs).ok_or(WaveError::NoConvergence { iterations: 0, residual: sup })?;
        for (x, d) in u.iter_mut().zip(&step) {
            *x += d;
        }
    }
    Err(WaveError::NoConvergence { iterations: opts.max_newton_iters, residual: f64::NAN })
}

/// Continues from a converged solution along `target`.
pub fn continue_branch(start: &Solution, target: PathSpec, opts: &SolverOptions) -> Result<Branch> {
    let p = family(start)?;
    if p.gravity != target.gravity || p.l != target.l {
        return Err(WaveError::Parameter("start solution does not lie on the requested path".into()));
    }
    if !(start.residual_norm < opts.newton_tol) {
        return Err(WaveError::Parameter(format!(
            "start solution is not converged (residual {:e})",
            start.residual_norm
        )));
    }
    march(vec![start.clone()], target, opts, Vec::new())
}

/// Branch from the laminar bifurcation at gravity `G` to `a_end`: two
/// amplitude-pinned seeds at `s` and `2s` start a secant continuation.
pub fn continue_from_bifurcation(gravity: f64, l: f64, a_end: AEnd, opts: &SolverOptions) -> Result<Branch> {
    let a_bif = bifurcation_a(gravity, l)?;
    let s = opts.switch_amplitude;
    let laminar = branch_switch(a_bif, gravity, l, 0.0, opts)?;
    let first = branch_switch(a_bif, gravity, l, s, opts)?;
    let second = branch_switch(a_bif, gravity, l, 2.0 * s, opts)?;
    let events = vec![BranchEvent {
        kind: EventKind::Bifurcation,
        a: a_bif,
        refined: true,
        solution: laminar,
    }];
    let target = PathSpec {
        gravity,
        l,
        a_start: a_bif,
        a_end,
    };
    march(vec![first, second], target, opts, events)
}

pub(crate) fn params_of(sol: &Solution) -> Result<Params> {
    family(sol)
}

pub(crate) fn with_a(sol: &Solution, a: f64) -> Result<ModelParams> {
    Ok(family(sol)?.with_a(a)?.into())
}
