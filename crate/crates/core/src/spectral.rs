//! Periodic spectral primitives on the conformal strip.
//!
//! A surface trace is stored as the cosine coefficients `b_0..b_N` of the
//! elevation `y(α) = Σ b_n cos nα`. The holomorphic perturbation `w` has
//! `w_n = i b_n` on `|ζ| = 1`, so its real part (the horizontal
//! displacement) is the sine series `Σ b_n sin nα` at infinite depth and
//! `Σ coth(nd) b_n sin nα` on a strip of depth `d`.
//!
//! All nonlinear algebra happens on an equispaced grid of `M` nodes
//! `α_j = 2πj/M`, with `M` at least `4N` so that products up to quartic
//! degree are resolved before the final projection back to `N` modes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, WaveError};

/// Relative odd-part energy above which samples are rejected as non-even.
pub const SYMMETRY_TOL: f64 = 1e-20;

/// Boundary trace of the holomorphic perturbation, as cosine coefficients of
/// the surface elevation.
#[derive(Clone, Debug, PartialEq)]
pub struct HoloTrace {
    coeffs: Vec<f64>,
}

impl HoloTrace {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(WaveError::Parameter(
                "a trace needs at least the modes b_0 and b_1".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(WaveError::Parameter("non-finite trace coefficient".into()));
        }
        Ok(HoloTrace { coeffs })
    }

    pub fn zeros(n: usize) -> Self {
        HoloTrace {
            coeffs: vec![0.0; n.max(1) + 1],
        }
    }

    /// Flat surface at height `c`.
    pub fn constant(n: usize, c: f64) -> Self {
        let mut t = Self::zeros(n);
        t.coeffs[0] = c;
        t
    }

    /// Truncation order `N`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    /// Zero-padded or truncated copy of order `n`.
    pub fn resized(&self, n: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n.max(1) + 1, 0.0);
        HoloTrace { coeffs }
    }

    /// Largest `|b_n|` over `n >= 1`.
    pub fn amplitude(&self) -> f64 {
        self.coeffs[1..].iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_constant(&self, tol: f64) -> bool {
        self.amplitude() <= tol
    }

    /// Energy in the top 10% of modes relative to the energy of all modes
    /// `n >= 1`. Zero for a flat trace.
    pub fn tail_energy_ratio(&self) -> f64 {
        let n = self.order();
        let start = n - n / 10;
        let total: f64 = self.coeffs[1..].iter().map(|c| c * c).sum();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = self.coeffs[start.max(1)..].iter().map(|c| c * c).sum();
        tail / total
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `Σ b_n n^p cos(nα)` or the matching sine sum, for the `p`-th
    /// α-derivative of the elevation (`horizontal = false`) or of the
    /// horizontal displacement (`horizontal = true`), evaluated directly.
    pub fn derivative_at(&self, alpha: f64, order: u32, horizontal: bool, depth: Depth) -> f64 {
        let mut acc = 0.0;
        for (n, &b) in self.coeffs.iter().enumerate().skip(1) {
            let nf = n as f64;
            let scale = if horizontal { depth.coth(n) } else { 1.0 };
            let phase = nf * alpha;
            // d^p/dα^p of cos(nα) for the elevation, sin(nα) for x.
            let shift = if horizontal { order + 3 } else { order };
            let trig = match shift % 4 {
                0 => phase.cos(),
                1 => -phase.sin(),
                2 => -phase.cos(),
                _ => phase.sin(),
            };
            acc += b * scale * nf.powi(order as i32) * trig;
        }
        if order == 0 && !horizontal {
            acc += self.coeffs[0];
        }
        acc
    }
}

/// Conformal depth of the strip: finite `d > 0` or the half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Depth {
    Finite(f64),
    Infinite,
}

impl Depth {
    pub fn new(d: f64) -> Result<Self> {
        if d.is_nan() || d <= 0.0 {
            return Err(WaveError::Parameter(format!("depth must be positive, got {d}")));
        }
        if d.is_infinite() {
            Ok(Depth::Infinite)
        } else {
            Ok(Depth::Finite(d))
        }
    }

    /// `d = 1/l²`, the half-plane when `l = 0`.
    pub fn from_l(l: f64) -> Self {
        if l == 0.0 {
            Depth::Infinite
        } else {
            Depth::Finite(1.0 / (l * l))
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Depth::Finite(d) => d,
            Depth::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Depth::Finite(_))
    }

    /// `coth(nd)` for `n >= 1`, written as `1 + 2q/(1-q)` with `q = e^{-2nd}`
    /// so that large `nd` never overflows. Zero for `n = 0`.
    pub fn coth(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match *self {
            Depth::Infinite => 1.0,
            Depth::Finite(d) => {
                let x = 2.0 * n as f64 * d;
                let q = (-x).exp();
                1.0 + 2.0 * q / (-(-x).exp_m1())
            }
        }
    }

    /// Factor on `b_n cos nα` in the imaginary part of the extension at
    /// level `β`: `sinh(n(β+d))/sinh(nd)`, or `e^{nβ}` on the half-plane.
    pub fn im_multiplier(&self, n: usize, beta: f64) -> f64 {
        if n == 0 {
            return 1.0;
        }
        let nf = n as f64;
        match *self {
            Depth::Infinite => (nf * beta).exp(),
            Depth::Finite(d) => {
                let num = -(-2.0 * nf * (beta + d)).exp_m1();
                let den = -(-2.0 * nf * d).exp_m1();
                (nf * beta).exp() * num / den
            }
        }
    }

    /// Factor on `b_n sin nα` in the real part of the extension at level
    /// `β`: `cosh(n(β+d))/sinh(nd)`, or `e^{nβ}` on the half-plane.
    pub fn re_multiplier(&self, n: usize, beta: f64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let nf = n as f64;
        match *self {
            Depth::Infinite => (nf * beta).exp(),
            Depth::Finite(d) => {
                let num = 1.0 + (-2.0 * nf * (beta + d)).exp();
                let den = -(-2.0 * nf * d).exp_m1();
                (nf * beta).exp() * num / den
            }
        }
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Finite(d) => write!(f, "{d}"),
            Depth::Infinite => write!(f, "inf"),
        }
    }
}

/// Samples of a real 2π-periodic function at `α_j = 2πj/M`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid {
    pub values: Vec<f64>,
}

impl SampleGrid {
    pub fn new(values: Vec<f64>) -> Self {
        SampleGrid { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Which series of a trace to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TracePart {
    /// `y = Σ b_n cos nα`
    Elevation,
    /// `Re w = Σ b_n sin nα`
    Horizontal,
    /// `y_α = Σ -n b_n sin nα`
    ElevationSlope,
    /// `(Re w)_α = Σ n b_n cos nα`
    HorizontalSlope,
}

/// Grid size used for dealiased nonlinear algebra on a trace of order `n`:
/// the smallest power of two above `5n`, which resolves quartic products
/// without folding into the retained modes.
pub fn dealias_size(n: usize) -> usize {
    (5 * n + 1).next_power_of_two().max(8)
}

/// FFT plans for one grid size. Plans are immutable after construction, so
/// a `Fourier` can be shared across threads.
#[derive(Clone)]
pub struct Fourier {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier").field("m", &self.m).finish()
    }
}

impl Fourier {
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || m % 2 != 0 {
            return Err(WaveError::Parameter(format!(
                "grid size must be even and at least 4, got {m}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Fourier {
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m)
            .map(|j| 2.0 * PI * j as f64 / self.m as f64)
            .collect()
    }

    fn check_order(&self, n: usize) -> Result<()> {
        if self.m < 2 * n + 2 {
            return Err(WaveError::Truncation {
                n,
                m: self.m,
                required: 2 * n + 2,
            });
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.m {
            return Err(WaveError::GridMismatch {
                left: self.m,
                right: len,
            });
        }
        Ok(())
    }

    fn spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.m as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    fn synthesize(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// `Σ b_n cos nα_j`.
    pub fn synthesize_cos(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = b.len().saturating_sub(1);
        self.check_order(n)?;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
        if let Some(&b0) = b.first() {
            buf[0] = Complex64::new(b0, 0.0);
        }
        for (k, &bk) in b.iter().enumerate().skip(1) {
            buf[k] = Complex64::new(0.5 * bk, 0.0);
            buf[self.m - k] = Complex64::new(0.5 * bk, 0.0);
        }
        Ok(self.synthesize(buf))
    }

    /// `Σ s_n sin nα_j` (the `n = 0` entry is ignored).
    pub fn synthesize_sin(&self, s: &[f64]) -> Result<Vec<f64>> {
        let n = s.len().saturating_sub(1);
        self.check_order(n)?;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
        for (k, &sk) in s.iter().enumerate().skip(1) {
            buf[k] = Complex64::new(0.0, -0.5 * sk);
            buf[self.m - k] = Complex64::new(0.0, 0.5 * sk);
        }
        Ok(self.synthesize(buf))
    }

    /// Cosine and sine coefficients `0..=n` of arbitrary real samples.
    pub fn analyze(&self, values: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_len(values.len())?;
        self.check_order(n)?;
        let c = self.spectrum(values);
        let mut cos = vec![0.0; n + 1];
        let mut sin = vec![0.0; n + 1];
        cos[0] = c[0].re;
        for k in 1..=n {
            cos[k] = 2.0 * c[k].re;
            sin[k] = -2.0 * c[k].im;
        }
        Ok((cos, sin))
    }

    /// Galerkin projection onto `cos 0α..cos nα`, discarding everything else.
    pub fn project_cos(&self, values: &[f64], n: usize) -> Result<Vec<f64>> {
        Ok(self.analyze(values, n)?.0)
    }

    /// Periodic Hilbert transform of arbitrary real samples on a strip of
    /// depth `d`: multiplier `-i sgn(k) coth(|k| d)`, zero on the mean and the
    /// Nyquist mode.
    pub fn hilbert_samples(&self, values: &[f64], depth: Depth) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        let mut c = self.spectrum(values);
        let half = self.m / 2;
        c[0] = Complex64::new(0.0, 0.0);
        c[half] = Complex64::new(0.0, 0.0);
        for k in 1..half {
            let factor = depth.coth(k);
            c[k] *= Complex64::new(0.0, -factor);
            c[self.m - k] *= Complex64::new(0.0, factor);
        }
        Ok(self.synthesize(c))
    }

    pub fn to_samples(&self, t: &HoloTrace, part: TracePart) -> Result<SampleGrid> {
        let b = t.coeffs();
        let weighted: Vec<f64> = b.iter().enumerate().map(|(n, &v)| n as f64 * v).collect();
        let values = match part {
            TracePart::Elevation => self.synthesize_cos(b)?,
            TracePart::Horizontal => self.synthesize_sin(b)?,
            TracePart::ElevationSlope => {
                let neg: Vec<f64> = weighted.iter().map(|v| -v).collect();
                self.synthesize_sin(&neg)?
            }
            TracePart::HorizontalSlope => {
                let mut w = weighted;
                w[0] = 0.0;
                self.synthesize_cos(&w)?
            }
        };
        Ok(SampleGrid::new(values))
    }

    /// Even projection of the samples, rejecting inputs whose odd part
    /// carries more than [`SYMMETRY_TOL`] of the energy.
    pub fn from_samples(&self, s: &SampleGrid, n: usize) -> Result<HoloTrace> {
        let (cos, sin) = self.analyze(&s.values, n)?;
        let energy: f64 = s.values.iter().map(|v| v * v).sum::<f64>() / self.m as f64;
        let odd: f64 = sin.iter().map(|v| 0.5 * v * v).sum();
        if odd > SYMMETRY_TOL * energy.max(f64::MIN_POSITIVE) && odd > 1e-30 {
            return Err(WaveError::SymmetryViolation {
                ratio: odd / energy,
            });
        }
        HoloTrace::new(cos)
    }

    /// Imaginary and real parts of the holomorphic extension `E(w, d)` at
    /// level `β`, sampled at the grid nodes. `β` must lie in `[-d, band]`.
    pub fn extend_within(
        &self,
        t: &HoloTrace,
        depth: Depth,
        beta: f64,
        band: f64,
    ) -> Result<(SampleGrid, SampleGrid)> {
        let lo = -depth.value();
        if !(beta >= lo && beta <= band) {
            return Err(WaveError::Extension { beta, lo, hi: band });
        }
        let b = t.coeffs();
        let im: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(n, &v)| v * depth.im_multiplier(n, beta))
            .collect();
        let re: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(n, &v)| v * depth.re_multiplier(n, beta))
            .collect();
        Ok((
            SampleGrid::new(self.synthesize_cos(&im)?),
            SampleGrid::new(self.synthesize_sin(&re)?),
        ))
    }

    /// [`Fourier::extend_within`] restricted to the fluid side `β <= 0`.
    pub fn extend(&self, t: &HoloTrace, depth: Depth, beta: f64) -> Result<(SampleGrid, SampleGrid)> {
        self.extend_within(t, depth, beta, 0.0)
    }

    /// Boundary α-derivatives of `Im E` and `Re E`, i.e. the imaginary and
    /// real parts of `-iζ ∂_ζ E(w, d)` on `|ζ| = 1`.
    pub fn zeta_derivative_trace(&self, t: &HoloTrace, depth: Depth) -> Result<(SampleGrid, SampleGrid)> {
        let b = t.coeffs();
        let im: Vec<f64> = b.iter().enumerate().map(|(n, &v)| -(n as f64) * v).collect();
        let re: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(n, &v)| n as f64 * depth.coth(n) * v)
            .collect();
        Ok((
            SampleGrid::new(self.synthesize_sin(&im)?),
            SampleGrid::new(self.synthesize_cos(&re)?),
        ))
    }
}

/// Free-standing convenience over [`Fourier::to_samples`].
pub fn to_samples(t: &HoloTrace, m: usize, part: TracePart) -> Result<SampleGrid> {
    Fourier::new(m)?.to_samples(t, part)
}

pub fn from_samples(s: &SampleGrid, n: usize) -> Result<HoloTrace> {
    Fourier::new(s.len())?.from_samples(s, n)
}

/// Hilbert transform of cosine coefficients: returns the sine coefficients
/// `coth(nd) b_n` (mode 0 maps to zero).
pub fn hilbert_cos(b: &[f64], depth: Depth) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(n, &v)| depth.coth(n) * v)
        .collect()
}

/// Hilbert transform of sine coefficients: `sin nα ↦ -coth(nd) cos nα`.
pub fn hilbert_sin(s: &[f64], depth: Depth) -> Vec<f64> {
    s.iter()
        .enumerate()
        .map(|(n, &v)| -depth.coth(n) * v)
        .collect()
}

/// Hilbert transform of samples for a depth given as a plain number
/// (`f64::INFINITY` for the half-plane).
pub fn hilbert(f: &SampleGrid, d: f64) -> Result<SampleGrid> {
    let depth = Depth::new(d)?;
    Ok(SampleGrid::new(
        Fourier::new(f.len())?.hilbert_samples(&f.values, depth)?,
    ))
}

pub fn extend(t: &HoloTrace, depth: Depth, beta: f64, m: usize) -> Result<(SampleGrid, SampleGrid)> {
    Fourier::new(m)?.extend(t, depth, beta)
}

pub fn zeta_derivative_trace(t: &HoloTrace, depth: Depth, m: usize) -> Result<(SampleGrid, SampleGrid)> {
    Fourier::new(m)?.zeta_derivative_trace(t, depth)
}

/// Pointwise product on a common grid. Callers project once at the end.
pub fn dealiased_product(f: &SampleGrid, g: &SampleGrid) -> Result<SampleGrid> {
    if f.len() != g.len() {
        return Err(WaveError::GridMismatch {
            left: f.len(),
            right: g.len(),
        });
    }
    Ok(SampleGrid::new(
        f.values.iter().zip(&g.values).map(|(a, b)| a * b).collect(),
    ))
}
