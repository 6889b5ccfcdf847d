//! Stream function in conformal variables and critical layers near
//! vertical tangents of the surface.
//!
//! `Ψ(α, β) = −(Ω/2) y² − y + Im χ`, where `y(α, β)` is the extended
//! elevation and `χ` is holomorphic with boundary imaginary part
//! `(Ω/2) y² + y`. Then `Ψ = 0` on the surface and `ΔΨ = −Ω |z_α|²`.
//! The critical-layer indicator is `F = Ψ_α y_α + Ψ_β x_α`, which is
//! `|z_α|²` times the horizontal velocity.

use crate::error::{Result, WaveError};
use crate::model::GeneralParams;
use crate::solver::Solution;
use crate::spectral::{Depth, Fourier, HoloTrace};

/// Relative tail amplification tolerated when extending above the surface.
pub const TAIL_AMPLIFICATION: f64 = 1e6;

/// Immutable evaluator of the stream function and its derivatives.
#[derive(Clone, Debug)]
pub struct StreamEvaluator {
    b: Vec<f64>,
    chi: Vec<f64>,
    flow: GeneralParams,
    beta_max: f64,
}

/// Values at one point of the conformal strip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamPoint {
    pub psi: f64,
    pub psi_alpha: f64,
    pub psi_beta: f64,
    pub psi_alpha_alpha: f64,
    pub psi_beta_beta: f64,
    pub x: f64,
    pub y: f64,
    pub x_alpha: f64,
    pub y_alpha: f64,
}

impl StreamPoint {
    /// Critical-layer indicator `Ψ_α y_α + Ψ_β x_α`.
    pub fn indicator(&self) -> f64 {
        self.psi_alpha * self.y_alpha + self.psi_beta * self.x_alpha
    }

    pub fn z_alpha_sq(&self) -> f64 {
        self.x_alpha * self.x_alpha + self.y_alpha * self.y_alpha
    }

    /// Physical velocity components `(ψ_x, ψ_y)`.
    pub fn velocity(&self) -> (f64, f64) {
        let j = self.z_alpha_sq();
        (
            (self.psi_alpha * self.x_alpha - self.psi_beta * self.y_alpha) / j,
            self.indicator() / j,
        )
    }
}

fn effective_order(c: &[f64]) -> usize {
    let head = c.iter().skip(1).fold(0.0f64, |m, v| m.max(v.abs()));
    if head == 0.0 {
        return 0;
    }
    c.iter()
        .enumerate()
        .skip(1)
        .filter(|(_, v)| v.abs() > 1e-15 * head)
        .map(|(n, _)| n)
        .max()
        .unwrap_or(0)
}

/// Builds the stream-function evaluator for a solution.
pub fn stream_extension(sol: &Solution) -> Result<StreamEvaluator> {
    StreamEvaluator::new(&sol.trace, sol.params.flow())
}

impl StreamEvaluator {
    pub fn new(trace: &HoloTrace, flow: GeneralParams) -> Result<Self> {
        let n = trace.order();
        let m = (4 * n + 4).next_power_of_two().max(8);
        let f = Fourier::new(m)?;
        let y = f.synthesize_cos(trace.coeffs())?;
        let worst = y
            .iter()
            .map(|v| flow.bernoulli - flow.gravity * v)
            .fold(f64::INFINITY, f64::min);
        if !(worst > 0.0) {
            return Err(WaveError::BernoulliBranch(worst));
        }
        let surf: Vec<f64> = y.iter().map(|v| 0.5 * flow.omega * v * v + v).collect();
        let mut chi = f.project_cos(&surf, 2 * n)?;
        let mut b = trace.coeffs().to_vec();
        // Coefficients below roundoff would be amplified above the surface.
        let nb = effective_order(&b);
        let nc = effective_order(&chi);
        b.truncate(nb + 1);
        chi.truncate(nc + 1);
        let band = nb.max(nc).max(1) as f64;
        Ok(StreamEvaluator {
            b,
            chi,
            flow,
            beta_max: TAIL_AMPLIFICATION.ln() / band,
        })
    }

    /// Largest admissible `β > 0`.
    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    pub fn flow(&self) -> &GeneralParams {
        &self.flow
    }

    fn check(&self, beta: f64) -> Result<()> {
        let lo = -self.flow.depth.value();
        if !(beta >= lo && beta <= self.beta_max) {
            return Err(WaveError::Extension {
                beta,
                lo,
                hi: self.beta_max,
            });
        }
        Ok(())
    }

    pub fn point(&self, alpha: f64, beta: f64) -> Result<StreamPoint> {
        self.check(beta)?;
        let d: Depth = self.flow.depth;
        let om = self.flow.omega;
        let (mut y, mut x) = (beta + self.b.first().copied().unwrap_or(0.0), alpha);
        let (mut ya, mut xa, mut yaa) = (0.0, 1.0, 0.0);
        for (n, &bn) in self.b.iter().enumerate().skip(1) {
            let nf = n as f64;
            let (im, re) = (d.im_multiplier(n, beta), d.re_multiplier(n, beta));
            let (s, c) = (nf * alpha).sin_cos();
            y += bn * im * c;
            x += bn * re * s;
            ya -= nf * bn * im * s;
            xa += nf * bn * re * c;
            yaa -= nf * nf * bn * im * c;
        }
        let (mut ch, mut cha, mut chb, mut chaa) = (self.chi.first().copied().unwrap_or(0.0), 0.0, 0.0, 0.0);
        for (n, &cn) in self.chi.iter().enumerate().skip(1) {
            let nf = n as f64;
            let (im, re) = (d.im_multiplier(n, beta), d.re_multiplier(n, beta));
            let (s, c) = (nf * alpha).sin_cos();
            ch += cn * im * c;
            cha -= nf * cn * im * s;
            chb += nf * cn * re * c;
            chaa -= nf * nf * cn * im * c;
        }
        // Cauchy–Riemann: y_β = x_α, and Im χ, y are harmonic.
        let yb = xa;
        let s = om * y + 1.0;
        Ok(StreamPoint {
            psi: -0.5 * om * y * y - y + ch,
            psi_alpha: -s * ya + cha,
            psi_beta: -s * yb + chb,
            psi_alpha_alpha: -om * ya * ya - s * yaa + chaa,
            psi_beta_beta: -om * yb * yb + s * yaa - chaa,
            x,
            y,
            x_alpha: xa,
            y_alpha: ya,
        })
    }

    pub fn psi(&self, alpha: f64, beta: f64) -> Result<f64> {
        Ok(self.point(alpha, beta)?.psi)
    }

    pub fn indicator(&self, alpha: f64, beta: f64) -> Result<f64> {
        Ok(self.point(alpha, beta)?.indicator())
    }

    /// `Ψ_αα + Ψ_ββ + Ω |z_α|²` from the series derivatives.
    pub fn poisson_residual(&self, alpha: f64, beta: f64) -> Result<f64> {
        let p = self.point(alpha, beta)?;
        Ok(p.psi_alpha_alpha + p.psi_beta_beta + self.flow.omega * p.z_alpha_sq())
    }

    /// Same identity with a five-point finite-difference Laplacian of `Ψ`.
    pub fn poisson_residual_fd(&self, alpha: f64, beta: f64, h: f64) -> Result<f64> {
        let c = self.point(alpha, beta)?;
        let lap = (self.psi(alpha + h, beta)? + self.psi(alpha - h, beta)? + self.psi(alpha, beta + h)?
            + self.psi(alpha, beta - h)?
            - 4.0 * c.psi)
            / (h * h);
        Ok(lap + self.flow.omega * c.z_alpha_sq())
    }
}

/// Rectangular `(α, β)` samples of a scalar field; `values[i * alphas.len() + j]`
/// holds the value at `(alphas[j], betas[i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub values: Vec<f64>,
}

impl FieldGrid {
    pub fn at(&self, i_beta: usize, j_alpha: usize) -> f64 {
        self.values[i_beta * self.alphas.len() + j_alpha]
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Samples the critical-layer indicator on a window.
pub fn f_field(e: &StreamEvaluator, alpha: (f64, f64), beta: (f64, f64), resolution: (usize, usize)) -> Result<FieldGrid> {
    field(e, alpha, beta, resolution, |p| p.indicator())
}

/// Samples the stream function on a window.
pub fn psi_field(e: &StreamEvaluator, alpha: (f64, f64), beta: (f64, f64), resolution: (usize, usize)) -> Result<FieldGrid> {
    field(e, alpha, beta, resolution, |p| p.psi)
}

fn field(
    e: &StreamEvaluator,
    alpha: (f64, f64),
    beta: (f64, f64),
    resolution: (usize, usize),
    f: impl Fn(&StreamPoint) -> f64,
) -> Result<FieldGrid> {
    e.check(beta.0)?;
    e.check(beta.1)?;
    let alphas = linspace(alpha.0, alpha.1, resolution.0);
    let betas = linspace(beta.0, beta.1, resolution.1);
    let mut values = Vec::with_capacity(alphas.len() * betas.len());
    for &b in &betas {
        for &a in &alphas {
            values.push(f(&e.point(a, b)?));
        }
    }
    Ok(FieldGrid { alphas, betas, values })
}

/// Location in `[0, π]` of the vertical tangent of a surface, if
/// `|min x_α| <= slope_tol`.
pub fn find_vertical_tangent(sol: &Solution, slope_tol: f64) -> Result<f64> {
    let c = crate::geometry::surface_curve(
        &sol.trace,
        sol.params.flow().depth,
        crate::geometry::default_samples(sol.trace.order()),
    )?;
    let (m, alpha) = c.min_x_slope();
    if m.abs() <= slope_tol {
        Ok(alpha)
    } else {
        Err(WaveError::NoVerticalTangent(m))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    AboveSurface,
    BelowSurface,
    Crossing,
    None,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::AboveSurface => "above_surface",
            Side::BelowSurface => "below_surface",
            Side::Crossing => "crossing",
            Side::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CritOptions {
    pub half_width: f64,
    pub columns: usize,
    /// Allow classification on finite-depth solutions.
    pub experimental_finite_depth: bool,
    pub slope_tol: f64,
}

impl Default for CritOptions {
    fn default() -> Self {
        CritOptions {
            half_width: 0.05,
            columns: 400,
            experimental_finite_depth: false,
            slope_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CritReport {
    pub alpha_crit: f64,
    /// Order of the first nonvanishing α-derivative of `x` at `alpha_crit`.
    pub k: u32,
    pub side: Side,
    pub fitted_exponent: f64,
    pub fitted_coefficient: f64,
    /// `C₂ / (C₁ G)` from surface data, factorial included.
    pub predicted_coefficient: f64,
    pub c1: f64,
    pub c2: f64,
    /// Half-width of the window in which the fitted coefficient settled.
    pub fit_half_width: f64,
    /// Traced `(α, β)` points of `F = 0` in the requested window.
    pub contour: Vec<(f64, f64)>,
}

/// Root of `F(α, ·)` nearest to `β = 0`, searched within `[lo, hi]`.
fn column_root(e: &StreamEvaluator, alpha: f64, lo: f64, hi: f64) -> Option<f64> {
    let f = |b: f64| e.indicator(alpha, b).ok();
    let f0 = f(0.0)?;
    if f0 == 0.0 {
        return Some(0.0);
    }
    let mut delta = 1e-14;
    let limit = hi.max(-lo);
    while delta <= limit * 2.0 {
        for sgn in [1.0, -1.0] {
            let b = (sgn * delta).clamp(lo, hi);
            if b == 0.0 {
                continue;
            }
            let fb = f(b)?;
            if fb.signum() != f0.signum() {
                let (mut x0, mut x1, mut g0) = (0.0, b, f0);
                for _ in 0..200 {
                    let mid = 0.5 * (x0 + x1);
                    if mid == x0 || mid == x1 {
                        break;
                    }
                    let gm = f(mid)?;
                    if gm.signum() == g0.signum() {
                        x0 = mid;
                        g0 = gm;
                    } else {
                        x1 = mid;
                    }
                }
                return Some(0.5 * (x0 + x1));
            }
        }
        delta *= 2.0;
    }
    None
}

fn trace_contour(e: &StreamEvaluator, alpha_crit: f64, half_width: f64, columns: usize, below: f64) -> Vec<(f64, f64)> {
    linspace(alpha_crit - half_width, alpha_crit + half_width, columns)
        .into_iter()
        .filter_map(|a| column_root(e, a, -below, e.beta_max()).map(|b| (a, b)))
        .collect()
}

/// All zeros of `F(α, ·)` in `[beta.0, beta.1]` for `columns` values of `α`,
/// located by a sign scan over `rows` levels and bisection.
pub fn trace_zero_set(
    e: &StreamEvaluator,
    alpha: (f64, f64),
    beta: (f64, f64),
    columns: usize,
    rows: usize,
) -> Result<Vec<(f64, f64)>> {
    e.check(beta.0)?;
    e.check(beta.1)?;
    let levels = linspace(beta.0, beta.1, rows.max(2));
    let mut out = Vec::new();
    for a in linspace(alpha.0, alpha.1, columns) {
        let vals = levels.iter().map(|&b| e.indicator(a, b)).collect::<Result<Vec<_>>>()?;
        for i in 0..levels.len() - 1 {
            let (f0, f1) = (vals[i], vals[i + 1]);
            if f0 == 0.0 {
                out.push((a, levels[i]));
                continue;
            }
            if f0.signum() == f1.signum() || f1 == 0.0 {
                continue;
            }
            let (mut lo, mut hi, mut flo) = (levels[i], levels[i + 1], f0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                let fm = e.indicator(a, mid)?;
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push((a, 0.5 * (lo + hi)));
        }
        if vals[levels.len() - 1] == 0.0 {
            out.push((a, levels[levels.len() - 1]));
        }
    }
    Ok(out)
}

/// Least-squares fit of `β = β₀ + κ u^{k−1} + c₁ u^k + c₂ u^{k+1}`.
fn fit_model(points: &[(f64, f64)], alpha_crit: f64, k: u32) -> Option<(f64, f64)> {
    use nalgebra::{DMatrix, DVector};
    if points.len() < 6 {
        return None;
    }
    let w = points.iter().fold(0.0f64, |m, p| m.max((p.0 - alpha_crit).abs()));
    let rows = points.len();
    let mut a = DMatrix::zeros(rows, 4);
    let mut rhs = DVector::zeros(rows);
    for (i, &(al, be)) in points.iter().enumerate() {
        let u = (al - alpha_crit) / w;
        a[(i, 0)] = 1.0;
        a[(i, 1)] = u.powi(k as i32 - 1);
        a[(i, 2)] = u.powi(k as i32);
        a[(i, 3)] = u.powi(k as i32 + 1);
        rhs[i] = be;
    }
    let sol = a.svd(true, true).solve(&rhs, 1e-14).ok()?;
    Some((sol[0], sol[1] / w.powi(k as i32 - 1)))
}

/// Slope of `log|β − β₀|` against `log|u|` over the outer decade.
fn fit_exponent(points: &[(f64, f64)], alpha_crit: f64, beta0: f64) -> f64 {
    let w = points.iter().fold(0.0f64, |m, p| m.max((p.0 - alpha_crit).abs()));
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| {
            let u = (p.0 - alpha_crit).abs();
            u >= 0.1 * w && (p.1 - beta0).abs() > 0.0
        })
        .map(|p| ((p.0 - alpha_crit).abs().ln(), (p.1 - beta0).abs().ln()))
        .collect();
    let n = data.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let (sx, sy) = data.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = data
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + (p.0 - mx) * (p.1 - my), acc.1 + (p.0 - mx).powi(2)));
    num / den
}

/// Traces `F = 0` near a vertical tangent and compares its local shape with
/// the surface-data prediction.
pub fn trace_and_classify(e: &StreamEvaluator, alpha_crit: f64, opts: &CritOptions) -> Result<CritReport> {
    let flow = *e.flow();
    let g = flow.gravity;
    if g == 0.0 {
        return Err(WaveError::Parameter("critical-layer classification needs G != 0".into()));
    }
    if flow.depth.is_finite() && !opts.experimental_finite_depth {
        return Err(WaveError::FiniteDepthUnsupported);
    }
    let surf = e.point(alpha_crit, 0.0)?;
    if surf.x_alpha.abs() > opts.slope_tol {
        return Err(WaveError::NoVerticalTangent(surf.x_alpha));
    }
    let zmod = surf.z_alpha_sq().sqrt();
    if zmod <= 1e-6 {
        return Err(WaveError::Stagnation(zmod));
    }
    let trace = HoloTrace::new(if e.b.len() >= 2 { e.b.clone() } else { vec![e.b[0], 0.0] })?;
    let mut k = 2u32;
    let mut xk = trace.derivative_at(alpha_crit, k, true, flow.depth);
    while xk.abs() <= 1e-6 && k < 12 {
        k += 1;
        xk = trace.derivative_at(alpha_crit, k, true, flow.depth);
    }
    let fact: f64 = (1..k).map(|i| i as f64).product();
    let bern = flow.bernoulli - g * surf.y;
    let ya = surf.y_alpha.abs();
    let c1 = ya.powi(3) / (2.0 * bern).sqrt();
    let c2 = (2.0 * bern).sqrt() * ya * xk / fact;
    let predicted = c2 / (c1 * g);

    let below = 0.5f64.min(flow.depth.value());
    let contour = trace_contour(e, alpha_crit, opts.half_width, opts.columns, below);

    // Shrink the window until the fitted leading coefficient settles.
    let mut w = opts.half_width;
    let mut prev: Option<f64> = None;
    let mut fitted = (f64::NAN, f64::NAN);
    let mut fit_points = Vec::new();
    while w > 1e-7 {
        let pts = trace_contour(e, alpha_crit, w, 41, below);
        if pts.len() >= 35 {
            if let Some((b0, kappa)) = fit_model(&pts, alpha_crit, k) {
                fitted = (b0, kappa);
                fit_points = pts;
                if let Some(p) = prev {
                    if ((kappa - p) / kappa).abs() < 1e-4 {
                        break;
                    }
                }
                prev = Some(kappa);
            }
        }
        w *= 0.5;
    }
    let (beta0, kappa) = fitted;
    let exponent = if fit_points.is_empty() {
        f64::NAN
    } else {
        fit_exponent(&fit_points, alpha_crit, beta0)
    };
    let side = if fit_points.is_empty() && contour.is_empty() {
        Side::None
    } else if k % 2 == 0 {
        Side::Crossing
    } else {
        let pts = if fit_points.is_empty() { &contour } else { &fit_points };
        let above = pts.iter().filter(|p| p.1 - beta0 > 0.0).count();
        let below_n = pts.iter().filter(|p| p.1 - beta0 < 0.0).count();
        if above > below_n {
            Side::AboveSurface
        } else {
            Side::BelowSurface
        }
    };
    Ok(CritReport {
        alpha_crit,
        k,
        side,
        fitted_exponent: exponent,
        fitted_coefficient: kappa,
        predicted_coefficient: predicted,
        c1,
        c2,
        fit_half_width: 2.0 * w,
        contour,
    })
}
