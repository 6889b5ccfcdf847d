//! Parameters, the laminar and zero-gravity families, and the surface
//! operator with its derivatives.
//!
//! The operator is evaluated in polynomial form
//!
//! ```text
//! R = ½ P² − (B − G y) J,   P = 1 + Ω (y + y H y_α − H(y y_α)),
//!                           J = (1 + H y_α)² + y_α²,
//! ```
//!
//! where `H` is the depth-`d` periodic Hilbert transform. The rational form
//! `R / J` is kept for cross-checks. With this sign, the Jacobian at the
//! flat stream (`Ω = 1`, `B = ½`, `G = 0`) is `diag(1, 0, -1, -2, ...)`, i.e.
//! `-(k-1)` on mode `k`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, WaveError};
use crate::numeric::brent;
use crate::spectral::{dealias_size, Depth, Fourier, HoloTrace, SampleGrid};

/// Smallest admissible `|1 − iζ∂_ζE|²` on the boundary grid.
pub const MIN_MODULUS: f64 = 1e-10;

/// Continuation parameters `(G, a, l)`; `Ω`, `B` and `d` are derived.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    pub gravity: f64,
    pub a: f64,
    pub l: f64,
}

impl Params {
    pub fn new(gravity: f64, a: f64, l: f64) -> Result<Self> {
        if !gravity.is_finite() || !a.is_finite() || !l.is_finite() {
            return Err(WaveError::Parameter("parameters must be finite".into()));
        }
        if l < 0.0 {
            return Err(WaveError::Parameter(format!("l must be non-negative, got {l}")));
        }
        derive_parameters(a)?;
        Ok(Params { gravity, a, l })
    }

    pub fn omega(&self) -> f64 {
        (1.0 - self.a) / (1.0 - 3.0 * self.a)
    }

    pub fn bernoulli(&self) -> f64 {
        let u = (1.0 + self.a) / (1.0 - 3.0 * self.a);
        0.5 * u * u
    }

    pub fn depth(&self) -> Depth {
        Depth::from_l(self.l)
    }

    pub fn flow(&self) -> GeneralParams {
        GeneralParams {
            omega: self.omega(),
            bernoulli: self.bernoulli(),
            gravity: self.gravity,
            depth: self.depth(),
        }
    }

    pub fn with_a(&self, a: f64) -> Result<Self> {
        Params::new(self.gravity, a, self.l)
    }
}

/// Independent `(Ω, B, G, d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralParams {
    pub omega: f64,
    pub bernoulli: f64,
    pub gravity: f64,
    pub depth: Depth,
}

/// Either parameterization, as stored on a [`crate::solver::Solution`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelParams {
    Family(Params),
    General(GeneralParams),
}

impl ModelParams {
    pub fn flow(&self) -> GeneralParams {
        match self {
            ModelParams::Family(p) => p.flow(),
            ModelParams::General(g) => *g,
        }
    }

    pub fn family(&self) -> Option<Params> {
        match self {
            ModelParams::Family(p) => Some(*p),
            ModelParams::General(_) => None,
        }
    }
}

impl From<Params> for ModelParams {
    fn from(p: Params) -> Self {
        ModelParams::Family(p)
    }
}

impl From<GeneralParams> for ModelParams {
    fn from(p: GeneralParams) -> Self {
        ModelParams::General(p)
    }
}

/// `(Ω(a), B(a))`. Only `a = 1/3` is singular; values above `1/3` are
/// admitted because the zero-gravity family stays a solution there.
pub fn derive_parameters(a: f64) -> Result<(f64, f64)> {
    let den = 1.0 - 3.0 * a;
    if den.abs() < 1e-12 || !a.is_finite() {
        return Err(WaveError::SingularParameter(a));
    }
    let u = (1.0 + a) / den;
    Ok(((1.0 - a) / den, 0.5 * u * u))
}

/// `dΩ/da` and `dB/da`.
pub fn parameter_slopes(a: f64) -> Result<(f64, f64)> {
    derive_parameters(a)?;
    let den = 1.0 - 3.0 * a;
    let u = (1.0 + a) / den;
    Ok((2.0 / (den * den), u * 4.0 / (den * den)))
}

/// Height `c` of the flat surface solving the operator for `(Ω, B, G)`.
pub fn laminar_flow(p: &GeneralParams) -> Result<f64> {
    let (om, b, g) = (p.omega, p.bernoulli, p.gravity);
    let disc = g * g + 2.0 * om * g + 2.0 * b * om * om;
    if disc < 0.0 {
        return Err(WaveError::NoLaminar(disc));
    }
    if om == 0.0 {
        if g == 0.0 {
            return Err(WaveError::Parameter("laminar height undetermined for Ω = G = 0".into()));
        }
        return Ok((b - 0.5) / g);
    }
    // Rationalized form of (−(Ω+G) + √disc)/Ω², free of cancellation when Ω
    // dominates.
    let s = disc.sqrt();
    let num = 2.0 * b - 1.0;
    let den = (om + g) + s;
    if den.abs() > 1e-300 && (om + g) >= 0.0 {
        Ok(num / den)
    } else {
        Ok((-(om + g) + s) / (om * om))
    }
}

/// Laminar height for the derived parameters at gravity `G`.
pub fn laminar(gravity: f64, a: f64) -> Result<f64> {
    laminar_flow(&Params::new(gravity, a, 0.0)?.flow())
}

/// Zero-gravity family truncated where `a^{n/2}` drops below `1e-14` of the
/// leading coefficient.
pub fn exact_solution(a: f64) -> Result<HoloTrace> {
    check_exact_range(a)?;
    let r = a.sqrt();
    let n = if r == 0.0 {
        1
    } else {
        let needed = 1.0 + (1e-18f64).ln() / r.ln();
        (needed.ceil() as usize).max(1)
    };
    exact_solution_n(a, n)
}

/// Zero-gravity family truncated at order `n`.
pub fn exact_solution_n(a: f64, n: usize) -> Result<HoloTrace> {
    check_exact_range(a)?;
    let r = a.sqrt();
    let mut coeffs = vec![0.0; n.max(1) + 1];
    let mut pow = 1.0;
    for (k, c) in coeffs.iter_mut().enumerate().skip(1) {
        pow *= r;
        *c = if k % 2 == 1 { -4.0 * pow } else { 4.0 * pow };
    }
    HoloTrace::new(coeffs)
}

fn check_exact_range(a: f64) -> Result<()> {
    if a >= 1.0 || a.is_nan() {
        return Err(WaveError::DivergentSeries(a));
    }
    if a < 0.0 {
        return Err(WaveError::Parameter(format!("exact family needs a >= 0, got {a}")));
    }
    Ok(())
}

/// Jacobian construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JacobianMethod {
    /// Central differences with step `h·(1 + ‖t‖₂)`.
    CentralDifference { h: f64 },
    /// Exact linearization of the discrete residual.
    Tangent,
}

impl Default for JacobianMethod {
    fn default() -> Self {
        JacobianMethod::CentralDifference { h: 1e-6 }
    }
}

/// Pointwise quantities of one residual evaluation, reused by the tangent.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub y: Vec<f64>,
    pub y_alpha: Vec<f64>,
    pub h_y_alpha: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub modulus: Vec<f64>,
    pub bernoulli: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Discrete surface operator for traces of order `n` at fixed parameters.
#[derive(Clone, Debug)]
pub struct BabenkoOperator {
    n: usize,
    fourier: Fourier,
    flow: GeneralParams,
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
    coth: Vec<f64>,
}

impl BabenkoOperator {
    pub fn new(n: usize, flow: GeneralParams) -> Result<Self> {
        Self::with_grid(n, dealias_size(n), flow)
    }

    pub fn with_grid(n: usize, m: usize, flow: GeneralParams) -> Result<Self> {
        if n == 0 {
            return Err(WaveError::Parameter("truncation order must be positive".into()));
        }
        if m < 2 * n + 2 {
            return Err(WaveError::Truncation { n, m, required: 2 * n + 2 });
        }
        let fourier = Fourier::new(m)?;
        let nodes = fourier.nodes();
        Ok(BabenkoOperator {
            n,
            cos_table: nodes.iter().map(|a| a.cos()).collect(),
            sin_table: nodes.iter().map(|a| a.sin()).collect(),
            coth: (0..=n).map(|k| flow.depth.coth(k)).collect(),
            fourier,
            flow,
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn grid_size(&self) -> usize {
        self.fourier.len()
    }

    pub fn flow(&self) -> &GeneralParams {
        &self.flow
    }

    pub fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    /// Same grid and order, different parameters.
    pub fn with_flow(&self, flow: GeneralParams) -> Self {
        let mut op = self.clone();
        op.coth = (0..=self.n).map(|k| flow.depth.coth(k)).collect();
        op.flow = flow;
        op
    }

    fn coeffs_of<'a>(&self, t: &'a HoloTrace) -> Result<std::borrow::Cow<'a, [f64]>> {
        let order = t.order();
        if order == self.n {
            Ok(std::borrow::Cow::Borrowed(t.coeffs()))
        } else if order < self.n {
            Ok(std::borrow::Cow::Owned(t.resized(self.n).into_coeffs()))
        } else {
            Err(WaveError::Truncation {
                n: order,
                m: self.fourier.len(),
                required: 2 * order + 2,
            })
        }
    }

    pub fn evaluate(&self, t: &HoloTrace) -> Result<Evaluation> {
        let b = self.coeffs_of(t)?;
        self.evaluate_coeffs(&b)
    }

    fn evaluate_coeffs(&self, b: &[f64]) -> Result<Evaluation> {
        let f = &self.fourier;
        let m = f.len();
        let nb: Vec<f64> = b.iter().enumerate().map(|(k, v)| -(k as f64) * v).collect();
        let hb: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(k, v)| k as f64 * self.coth[k] * v)
            .collect();
        let y = f.synthesize_cos(b)?;
        let ya = f.synthesize_sin(&nb)?;
        let hya = f.synthesize_cos(&hb)?;
        let yya: Vec<f64> = y.iter().zip(&ya).map(|(a, b)| a * b).collect();
        let h_yya = f.hilbert_samples(&yya, self.flow.depth)?;

        let (om, bern0, g) = (self.flow.omega, self.flow.bernoulli, self.flow.gravity);
        let mut q = vec![0.0; m];
        let mut p = vec![0.0; m];
        let mut modulus = vec![0.0; m];
        let mut bernoulli = vec![0.0; m];
        let mut residual = vec![0.0; m];
        let mut worst = (f64::INFINITY, 0usize);
        for j in 0..m {
            q[j] = y[j] + y[j] * hya[j] - h_yya[j];
            p[j] = 1.0 + om * q[j];
            let s = 1.0 + hya[j];
            modulus[j] = s * s + ya[j] * ya[j];
            bernoulli[j] = bern0 - g * y[j];
            residual[j] = 0.5 * p[j] * p[j] - bernoulli[j] * modulus[j];
            if modulus[j] < worst.0 {
                worst = (modulus[j], j);
            }
        }
        if !(worst.0 >= MIN_MODULUS) {
            return Err(WaveError::OutsideU {
                min_modulus: worst.0,
                alpha: 2.0 * std::f64::consts::PI * worst.1 as f64 / m as f64,
            });
        }
        Ok(Evaluation {
            y,
            y_alpha: ya,
            h_y_alpha: hya,
            p,
            q,
            modulus,
            bernoulli,
            residual,
        })
    }

    /// Polynomial-form residual samples on the dealiased grid.
    pub fn residual(&self, t: &HoloTrace) -> Result<SampleGrid> {
        Ok(SampleGrid::new(self.evaluate(t)?.residual))
    }

    /// Rational form `½P²/J − (B − G y)`.
    pub fn rational_residual(&self, t: &HoloTrace) -> Result<SampleGrid> {
        let e = self.evaluate(t)?;
        Ok(SampleGrid::new(
            e.residual.iter().zip(&e.modulus).map(|(r, j)| r / j).collect(),
        ))
    }

    /// Galerkin projection of the residual onto `cos 0α..cos Nα`.
    pub fn residual_coeffs(&self, t: &HoloTrace) -> Result<Vec<f64>> {
        let e = self.evaluate(t)?;
        self.fourier.project_cos(&e.residual, self.n)
    }

    pub fn residual_norm(&self, t: &HoloTrace) -> Result<f64> {
        Ok(self.residual(t)?.sup_norm())
    }

    /// Derivative of the residual samples at `t` in the direction with
    /// cosine coefficients `dir`.
    pub fn tangent(&self, t: &HoloTrace, dir: &[f64]) -> Result<SampleGrid> {
        let e = self.evaluate(t)?;
        let mut d = dir.to_vec();
        d.resize(self.n + 1, 0.0);
        let f = &self.fourier;
        let dy = f.synthesize_cos(&d)?;
        let nd: Vec<f64> = d.iter().enumerate().map(|(k, v)| -(k as f64) * v).collect();
        let hd: Vec<f64> = d
            .iter()
            .enumerate()
            .map(|(k, v)| k as f64 * self.coth[k] * v)
            .collect();
        let dya = f.synthesize_sin(&nd)?;
        let dhya = f.synthesize_cos(&hd)?;
        Ok(SampleGrid::new(self.tangent_samples(&e, &dy, &dya, &dhya)?))
    }

    fn tangent_samples(&self, e: &Evaluation, dy: &[f64], dya: &[f64], dhya: &[f64]) -> Result<Vec<f64>> {
        let m = self.fourier.len();
        let (om, g) = (self.flow.omega, self.flow.gravity);
        let prod: Vec<f64> = (0..m).map(|j| dy[j] * e.y_alpha[j] + e.y[j] * dya[j]).collect();
        let h_prod = self.fourier.hilbert_samples(&prod, self.flow.depth)?;
        Ok((0..m)
            .map(|j| {
                let dq = dy[j] + dy[j] * e.h_y_alpha[j] + e.y[j] * dhya[j] - h_prod[j];
                let dj = 2.0 * (1.0 + e.h_y_alpha[j]) * dhya[j] + 2.0 * e.y_alpha[j] * dya[j];
                e.p[j] * om * dq + g * dy[j] * e.modulus[j] - e.bernoulli[j] * dj
            })
            .collect())
    }

    /// Exact Jacobian of [`BabenkoOperator::residual_coeffs`].
    pub fn jacobian_tangent(&self, t: &HoloTrace) -> Result<DMatrix<f64>> {
        let e = self.evaluate(t)?;
        let n = self.n;
        let m = self.fourier.len();
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        let mut dy = vec![0.0; m];
        let mut dya = vec![0.0; m];
        let mut dhya = vec![0.0; m];
        for k in 0..=n {
            let kf = k as f64;
            for j in 0..m {
                let idx = (k * j) % m;
                dy[j] = self.cos_table[idx];
                dya[j] = -kf * self.sin_table[idx];
                dhya[j] = kf * self.coth[k] * self.cos_table[idx];
            }
            let col = self.tangent_samples(&e, &dy, &dya, &dhya)?;
            let proj = self.fourier.project_cos(&col, n)?;
            for (i, v) in proj.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(WaveError::Differentiation(k));
                }
                jac[(i, k)] = v;
            }
        }
        Ok(jac)
    }

    /// Central-difference Jacobian with step `h·(1 + ‖t‖₂)`.
    pub fn jacobian_fd(&self, t: &HoloTrace, h: f64) -> Result<DMatrix<f64>> {
        let base = self.coeffs_of(t)?.into_owned();
        let n = self.n;
        let step = h * (1.0 + t.l2_norm());
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        let mut work = base.clone();
        for k in 0..=n {
            work[k] = base[k] + step;
            let plus = self.fourier.project_cos(&self.evaluate_coeffs(&work)?.residual, n)?;
            work[k] = base[k] - step;
            let minus = self.fourier.project_cos(&self.evaluate_coeffs(&work)?.residual, n)?;
            work[k] = base[k];
            for i in 0..=n {
                let v = (plus[i] - minus[i]) / (2.0 * step);
                if !v.is_finite() {
                    return Err(WaveError::Differentiation(k));
                }
                jac[(i, k)] = v;
            }
        }
        Ok(jac)
    }

    pub fn jacobian(&self, t: &HoloTrace, method: JacobianMethod) -> Result<DMatrix<f64>> {
        match method {
            JacobianMethod::CentralDifference { h } => self.jacobian_fd(t, h),
            JacobianMethod::Tangent => self.jacobian_tangent(t),
        }
    }

    /// Projected `∂R/∂a` at fixed `G` and trace, for derived parameters at `a`.
    pub fn param_derivative(&self, t: &HoloTrace, a: f64) -> Result<Vec<f64>> {
        let (d_om, d_b) = parameter_slopes(a)?;
        let e = self.evaluate(t)?;
        let col: Vec<f64> = (0..self.fourier.len())
            .map(|j| e.p[j] * e.q[j] * d_om - e.modulus[j] * d_b)
            .collect();
        self.fourier.project_cos(&col, self.n)
    }
}

/// Diagonal Jacobian at the laminar trace `{b₀ = c}`:
/// `λ_k = (1+Ωc)Ω + G − k coth(kd) (1+Ωc)²`.
pub fn laminar_eigenvalue(flow: &GeneralParams, c: f64, k: usize) -> f64 {
    let s = 1.0 + flow.omega * c;
    s * flow.omega + flow.gravity - k as f64 * flow.depth.coth(k) * s * s
}

pub fn laminar_jacobian(flow: &GeneralParams, c: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        n + 1,
        (0..=n).map(|k| laminar_eigenvalue(flow, c, k)),
    ))
}

/// Mode-one entry of the Jacobian at the laminar trace, computed from the
/// discrete linearization.
pub fn mode_one_eigenvalue(gravity: f64, a: f64, l: f64) -> Result<f64> {
    let flow = Params::new(gravity, a, l)?.flow();
    let c = laminar_flow(&flow)?;
    let op = BabenkoOperator::new(4, flow)?;
    let col = op.tangent(&HoloTrace::constant(4, c), &[0.0, 1.0])?;
    Ok(op.fourier.project_cos(&col.values, 4)?[1])
}

/// Default search bracket for the bifurcation gravity.
pub const DEFAULT_G_BRACKET: (f64, f64) = (-1.0, 1.0);

/// `G̃(a, l)`: the root in `G` of the mode-one eigenvalue.
pub fn bifurcation_g(a: f64, l: f64) -> Result<f64> {
    bifurcation_g_in(a, l, DEFAULT_G_BRACKET)
}

pub fn bifurcation_g_in(a: f64, l: f64, bracket: (f64, f64)) -> Result<f64> {
    let (lo, hi) = bracket;
    let mut fault = None;
    let root = brent(
        |g| match mode_one_eigenvalue(g, a, l) {
            Ok(v) => Some(v),
            Err(e) => {
                fault = Some(e);
                None
            }
        },
        lo,
        hi,
        1e-15,
        200,
    );
    match (root, fault) {
        (Some(g), _) => Ok(g),
        (None, Some(e)) => Err(e),
        (None, None) => Err(WaveError::BifurcationNotFound { lo, hi }),
    }
}

/// The parameter `a` at which the laminar family at gravity `G` bifurcates.
pub fn bifurcation_a(gravity: f64, l: f64) -> Result<f64> {
    let f = |a: f64| mode_one_eigenvalue(gravity, a, l).ok();
    let centre = 0.5 * gravity;
    let mut width = 0.01;
    while width < 0.3 {
        let lo = centre - width;
        let hi = (centre + width).min(0.33);
        if let (Some(flo), Some(fhi)) = (f(lo), f(hi)) {
            if flo.signum() != fhi.signum() {
                return brent(f, lo, hi, 1e-15, 200).ok_or(WaveError::BifurcationNotFound { lo, hi });
            }
        }
        width *= 2.0;
    }
    Err(WaveError::BifurcationNotFound {
        lo: centre - width,
        hi: centre + width,
    })
}

/// Local data of the bifurcation from the laminar family at `(G̃(a, l), a, l)`.
#[derive(Clone, Debug)]
pub struct BifurcationCoefficients {
    pub gravity: f64,
    pub a: f64,
    pub l: f64,
    /// `d/da` of the mode-one eigenvalue along the laminar family at fixed `G`.
    pub transversality: f64,
    /// `∂²a/∂s²` on the bifurcating curve, `s` the cos α amplitude.
    pub curvature: f64,
    /// `D²𝒢[cos α, cos α]` of the rational form on the operator grid.
    pub second_derivative: SampleGrid,
    /// cos α coefficient of `D³R[cos α, cos α, cos α]`.
    pub third_projection: f64,
}

const BIF_ORDER: usize = 16;

pub fn bifurcation_coefficients(a: f64, l: f64) -> Result<BifurcationCoefficients> {
    let gravity = bifurcation_g(a, l)?;
    bifurcation_coefficients_at(gravity, a, l)
}

/// Bifurcation data at an explicit `(G, a, l)` on the critical set.
pub fn bifurcation_coefficients_at(gravity: f64, a: f64, l: f64) -> Result<BifurcationCoefficients> {
    let n = BIF_ORDER;
    let params = Params::new(gravity, a, l)?;
    let op = BabenkoOperator::new(n, params.flow())?;
    let c = laminar_flow(&params.flow())?;
    let base = HoloTrace::constant(n, c);
    let mut v = vec![0.0; n + 1];
    v[1] = 1.0;

    let shifted = |t: &HoloTrace, dirs: &[(&[f64], f64)]| -> HoloTrace {
        let mut out = t.clone();
        for (d, s) in dirs {
            for (o, x) in out.coeffs_mut().iter_mut().zip(d.iter()) {
                *o += s * x;
            }
        }
        out
    };

    // Mixed difference in (cos α) × a along the laminar family.
    let h = 1e-4;
    let delta = 1e-4;
    let mode_one = |aa: f64, sign: f64| -> Result<f64> {
        let p = params.with_a(aa)?;
        let opa = op.with_flow(p.flow());
        let ca = laminar_flow(&p.flow())?;
        let t = shifted(&HoloTrace::constant(n, ca), &[(&v, sign * h)]);
        Ok(opa.residual_coeffs(&t)?[1])
    };
    let transversality = (mode_one(a + delta, 1.0)? - mode_one(a + delta, -1.0)?
        - mode_one(a - delta, 1.0)?
        + mode_one(a - delta, -1.0)?)
        / (4.0 * h * delta);
    if transversality.abs() < 1e-3 {
        return Err(WaveError::DegenerateBifurcation(transversality));
    }

    // Second derivative field of the rational form.
    let hs = 1e-4;
    let gp = op.rational_residual(&shifted(&base, &[(&v, hs)]))?;
    let g0 = op.rational_residual(&base)?;
    let gm = op.rational_residual(&shifted(&base, &[(&v, -hs)]))?;
    let second_derivative = SampleGrid::new(
        (0..gp.len())
            .map(|j| (gp.values[j] - 2.0 * g0.values[j] + gm.values[j]) / (hs * hs))
            .collect(),
    );

    // Lyapunov–Schmidt reduction on the projected polynomial form.
    let hc = 1e-3;
    let r = |t: &HoloTrace| op.residual_coeffs(t);
    let rp = r(&shifted(&base, &[(&v, hc)]))?;
    let r0 = r(&base)?;
    let rm = r(&shifted(&base, &[(&v, -hc)]))?;
    let d2vv: Vec<f64> = (0..=n).map(|i| (rp[i] - 2.0 * r0[i] + rm[i]) / (hc * hc)).collect();
    let flow = params.flow();
    let mut psi = vec![0.0; n + 1];
    for k in 0..=n {
        if k != 1 {
            psi[k] = -d2vv[k] / laminar_eigenvalue(&flow, c, k);
        }
    }
    let pp = r(&shifted(&base, &[(&v, hc), (&psi, hc)]))?;
    let pm = r(&shifted(&base, &[(&v, hc), (&psi, -hc)]))?;
    let mp = r(&shifted(&base, &[(&v, -hc), (&psi, hc)]))?;
    let mm = r(&shifted(&base, &[(&v, -hc), (&psi, -hc)]))?;
    let d2_v_psi = (pp[1] - pm[1] - mp[1] + mm[1]) / (4.0 * hc * hc);
    let r2p = r(&shifted(&base, &[(&v, 2.0 * hc)]))?;
    let r2m = r(&shifted(&base, &[(&v, -2.0 * hc)]))?;
    let third_projection = (r2p[1] - 2.0 * rp[1] + 2.0 * rm[1] - r2m[1]) / (2.0 * hc * hc * hc);
    let curvature = -(d2_v_psi + third_projection / 3.0) / transversality;

    Ok(BifurcationCoefficients {
        gravity,
        a,
        l,
        transversality,
        curvature,
        second_derivative,
        third_projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_gravity(a: f64) -> GeneralParams {
        Params::new(0.0, a, 0.0).unwrap().flow()
    }

    #[test]
    fn derived_parameter_examples() {
        assert_eq!(derive_parameters(0.0).unwrap(), (1.0, 0.5));
        let (o, b) = derive_parameters(0.2).unwrap();
        assert!((o - 2.0).abs() < 1e-14 && (b - 4.5).abs() < 1e-13);
        let (o, b) = derive_parameters(0.25).unwrap();
        assert!((o - 3.0).abs() < 1e-14 && (b - 12.5).abs() < 1e-13);
        assert!(matches!(derive_parameters(1.0 / 3.0), Err(WaveError::SingularParameter(_))));
    }

    #[test]
    fn laminar_examples() {
        assert_eq!(laminar(0.0, 0.0).unwrap(), 0.0);
        assert!((laminar(0.0, 0.2).unwrap() - 1.0).abs() < 1e-14);
        let a = 1e-3;
        let ratio = laminar(0.0, a).unwrap() / (4.0 * a);
        assert!((0.95..=1.05).contains(&ratio));
        let flow = GeneralParams {
            omega: 1.0,
            bernoulli: -10.0,
            gravity: 0.0,
            depth: Depth::Infinite,
        };
        assert!(matches!(laminar_flow(&flow), Err(WaveError::NoLaminar(_))));
    }

    #[test]
    fn exact_family_coefficients() {
        let t = exact_solution(0.01).unwrap();
        let b = t.coeffs();
        assert_eq!(b[0], 0.0);
        assert!((b[1] + 0.4).abs() < 1e-15);
        assert!((b[2] - 0.04).abs() < 1e-16);
        assert!((b[3] + 0.004).abs() < 1e-17);
        let last = *b.last().unwrap();
        assert!(last.abs() < 1e-14 * 0.4);
        assert!(exact_solution(0.0).unwrap().is_constant(0.0));
        assert!(matches!(exact_solution(1.0), Err(WaveError::DivergentSeries(_))));
    }

    #[test]
    fn flat_stream_residual_vanishes() {
        let flow = GeneralParams {
            omega: 1.0,
            bernoulli: 0.5,
            gravity: 0.0,
            depth: Depth::Infinite,
        };
        let op = BabenkoOperator::new(8, flow).unwrap();
        assert_eq!(op.residual_norm(&HoloTrace::zeros(8)).unwrap(), 0.0);
    }

    #[test]
    fn exact_family_residual() {
        for a in [0.05, 0.1, 0.2] {
            let t = exact_solution_n(a, 64).unwrap();
            let op = BabenkoOperator::new(64, zero_gravity(a)).unwrap();
            assert!(op.residual_norm(&t).unwrap() < 1e-10, "a = {a}");
        }
    }

    #[test]
    fn origin_jacobian_is_shifted_identity() {
        let op = BabenkoOperator::new(8, zero_gravity(0.0)).unwrap();
        let t = HoloTrace::zeros(8);
        for method in [JacobianMethod::Tangent, JacobianMethod::default()] {
            let j = op.jacobian(&t, method).unwrap();
            for r in 0..=8 {
                for c in 0..=8 {
                    let expected = if r == c { -(c as f64 - 1.0) } else { 0.0 };
                    assert!((j[(r, c)] - expected).abs() < 1e-8, "({r},{c}) = {}", j[(r, c)]);
                }
            }
        }
    }

    #[test]
    fn laminar_diagonal_matches_discrete_jacobian() {
        for (g, a, l) in [(0.05, 0.1, 0.0), (-0.03, 0.2, 0.3), (0.0, 0.15, 0.5)] {
            let p = Params::new(g, a, l).unwrap();
            let c = laminar_flow(&p.flow()).unwrap();
            let op = BabenkoOperator::new(12, p.flow()).unwrap();
            let t = HoloTrace::constant(12, c);
            let fd = op.jacobian(&t, JacobianMethod::default()).unwrap();
            let exact = laminar_jacobian(&p.flow(), c, 12);
            let scale = exact.amax();
            assert!((&fd - &exact).amax() / scale < 1e-6);
            let tan = op.jacobian_tangent(&t).unwrap();
            assert!((&tan - &exact).amax() / scale < 1e-12);
        }
    }

    #[test]
    fn bifurcation_at_origin() {
        assert!(bifurcation_g(0.0, 0.0).unwrap().abs() < 1e-12);
        assert!(mode_one_eigenvalue(0.0, 0.0, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn bifurcation_a_inverts_bifurcation_g() {
        let a = bifurcation_a(0.01, 0.0).unwrap();
        assert!((a - 0.004_925_166_609_4).abs() < 1e-9);
        assert!((bifurcation_g(a, 0.0).unwrap() - 0.01).abs() < 1e-10);
    }
}
