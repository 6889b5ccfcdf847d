//! Physical profile reconstruction and classification.
//!
//! The surface is `z(α) = α + Re w + i (Im w)`, with `Re w = H_d y`. All
//! refinements use exact trigonometric sums of the trace, so the sampled
//! curve only seeds the searches.

use std::f64::consts::PI;

use crate::error::Result;
use crate::spectral::{Depth, Fourier, HoloTrace};

/// Thresholds that make the geometric classification decidable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryTolerances {
    /// `|min x_α|` below which a vertical tangent is declared.
    pub slope_tol: f64,
    /// Self-gap below which an injective overhanging profile is touching.
    pub gap_tol: f64,
    /// Minimum arclength separation of point pairs in the gap search.
    pub guard: f64,
}

impl Default for GeometryTolerances {
    fn default() -> Self {
        GeometryTolerances {
            slope_tol: 1e-6,
            gap_tol: 1e-3,
            guard: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WaveClass {
    Laminar,
    Regular,
    Breaking,
    Overhanging,
    Touching,
    Invalid,
}

impl WaveClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            WaveClass::Laminar => "laminar",
            WaveClass::Regular => "regular",
            WaveClass::Breaking => "breaking",
            WaveClass::Overhanging => "overhanging",
            WaveClass::Touching => "touching",
            WaveClass::Invalid => "invalid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "laminar" => WaveClass::Laminar,
            "regular" => WaveClass::Regular,
            "breaking" => WaveClass::Breaking,
            "overhanging" => WaveClass::Overhanging,
            "touching" => WaveClass::Touching,
            "invalid" => WaveClass::Invalid,
            _ => return None,
        })
    }
}

/// Sampled surface profile together with the trace that generated it.
#[derive(Clone, Debug)]
pub struct SurfaceCurve {
    pub alphas: Vec<f64>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub x_slopes: Vec<f64>,
    pub z_slope_moduli: Vec<f64>,
    trace: HoloTrace,
    depth: Depth,
}

/// Default sampling density for a trace of order `n`.
pub fn default_samples(n: usize) -> usize {
    (8 * n).max(64).next_power_of_two()
}

pub fn surface_curve(trace: &HoloTrace, depth: Depth, m: usize) -> Result<SurfaceCurve> {
    let f = Fourier::new(m)?;
    let b = trace.coeffs();
    let xs_coeffs: Vec<f64> = b.iter().enumerate().map(|(n, v)| depth.coth(n) * v).collect();
    let xa_coeffs: Vec<f64> = xs_coeffs.iter().enumerate().map(|(n, v)| n as f64 * v).collect();
    let ya_coeffs: Vec<f64> = b.iter().enumerate().map(|(n, v)| -(n as f64) * v).collect();
    let alphas = f.nodes();
    let disp = f.synthesize_sin(&xs_coeffs)?;
    let ys = f.synthesize_cos(b)?;
    let xa = f.synthesize_cos(&xa_coeffs)?;
    let ya = f.synthesize_sin(&ya_coeffs)?;
    let xs = alphas.iter().zip(&disp).map(|(a, d)| a + d).collect();
    let x_slopes: Vec<f64> = xa.iter().map(|v| 1.0 + v).collect();
    let z_slope_moduli = x_slopes.iter().zip(&ya).map(|(x, y)| x.hypot(*y)).collect();
    Ok(SurfaceCurve {
        alphas,
        xs,
        ys,
        x_slopes,
        z_slope_moduli,
        trace: trace.clone(),
        depth,
    })
}

impl SurfaceCurve {
    pub fn trace(&self) -> &HoloTrace {
        &self.trace
    }

    pub fn depth(&self) -> Depth {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// `z(α)` and its first two α-derivatives from exact sums.
    pub fn point(&self, alpha: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let mut z = [alpha, self.trace.mean()];
        let mut z1 = [1.0, 0.0];
        let mut z2 = [0.0, 0.0];
        for (n, &b) in self.trace.coeffs().iter().enumerate().skip(1) {
            let nf = n as f64;
            let bx = b * self.depth.coth(n);
            let (s, c) = (nf * alpha).sin_cos();
            z[0] += bx * s;
            z[1] += b * c;
            z1[0] += nf * bx * c;
            z1[1] -= nf * b * s;
            z2[0] -= nf * nf * bx * s;
            z2[1] -= nf * nf * b * c;
        }
        (z, z1, z2)
    }

    /// α-derivative of order `k >= 1` of `x`.
    pub fn x_derivative(&self, alpha: f64, k: u32) -> f64 {
        let d = self.trace.derivative_at(alpha, k, true, self.depth);
        if k == 1 {
            1.0 + d
        } else {
            d
        }
    }

    /// Refined minimum of `x_α` and its location in `[0, π]`.
    pub fn min_x_slope(&self) -> (f64, f64) {
        let m = self.len();
        let (j, _) = self
            .x_slopes
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bj, bv), (j, &v)| if v < bv { (j, v) } else { (bj, bv) });
        let h = 2.0 * PI / m as f64;
        let mut best_alpha = self.alphas[j];
        let mut best = self.x_slopes[j];
        let mut alpha = best_alpha;
        for _ in 0..30 {
            let g = self.x_derivative(alpha, 2);
            let gp = self.x_derivative(alpha, 3);
            if gp <= 0.0 {
                break;
            }
            let next = (alpha - g / gp).clamp(self.alphas[j] - 2.0 * h, self.alphas[j] + 2.0 * h);
            let v = self.x_derivative(next, 1);
            if v < best {
                best = v;
                best_alpha = next;
            }
            if (next - alpha).abs() < 1e-15 {
                break;
            }
            alpha = next;
        }
        let mut a = best_alpha.rem_euclid(2.0 * PI);
        if a > PI {
            a = 2.0 * PI - a;
        }
        (best, a)
    }
}

/// Result of the self-gap search.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    /// Minimum distance between surface points at least `guard` apart in
    /// arclength; zero when the curve crosses itself.
    pub gap: f64,
    /// Parameters of the closest pair (or of the crossing segments).
    pub args: (f64, f64),
    /// Area enclosed between the closest pair (or the crossing) and the
    /// chord joining them, for loops that close around an air region.
    pub bubble_area: Option<f64>,
    pub intersecting: bool,
}

struct Seg {
    lo_x: f64,
    hi_x: f64,
    lo_y: f64,
    hi_y: f64,
    /// Unwrapped sample index of the first endpoint.
    k: i64,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn shoelace(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s.abs()
}

impl SurfaceCurve {
    /// Point with unwrapped index `k` (any integer).
    fn sample(&self, k: i64) -> [f64; 2] {
        let m = self.len() as i64;
        let shift = k.div_euclid(m);
        let j = k.rem_euclid(m) as usize;
        [self.xs[j] + 2.0 * PI * shift as f64, self.ys[j]]
    }

    fn loop_area(&self, k0: i64, k1: i64, start: [f64; 2], end: [f64; 2]) -> f64 {
        let mut pts = vec![start];
        for k in (k0 + 1)..=k1 {
            pts.push(self.sample(k));
        }
        pts.push(end);
        shoelace(&pts)
    }

    /// Minimum distance between points more than `guard` apart in
    /// arclength, with crossing detection and bubble area.
    pub fn self_gap(&self, guard: f64) -> GapReport {
        let m = self.len() as i64;
        let h = 2.0 * PI / m as f64;
        // Arclength along the sampled polygon, unwrapped over periods.
        let mut arc = vec![0.0; m as usize + 1];
        for k in 0..m {
            let (p, q) = (self.sample(k), self.sample(k + 1));
            arc[k as usize + 1] = arc[k as usize] + (q[0] - p[0]).hypot(q[1] - p[1]);
        }
        let period = arc[m as usize];
        let arc_at = |k: i64| arc[k.rem_euclid(m) as usize] + period * k.div_euclid(m) as f64;

        // Segment crossing test over three periods.
        let mut segs: Vec<Seg> = (-m..2 * m)
            .map(|k| {
                let (p, q) = (self.sample(k), self.sample(k + 1));
                Seg {
                    lo_x: p[0].min(q[0]),
                    hi_x: p[0].max(q[0]),
                    lo_y: p[1].min(q[1]),
                    hi_y: p[1].max(q[1]),
                    k,
                }
            })
            .collect();
        segs.sort_by(|a, b| a.lo_x.total_cmp(&b.lo_x));
        let widest = segs.iter().fold(0.0f64, |w, s| w.max(s.hi_x - s.lo_x));
        let crosses = |s: &Seg, t: &Seg| {
            if t.hi_x < s.lo_x || t.lo_x > s.hi_x || t.hi_y < s.lo_y || t.lo_y > s.hi_y {
                return false;
            }
            if (t.k - s.k).abs() < 2 {
                return false;
            }
            let (p1, p2) = (self.sample(s.k), self.sample(s.k + 1));
            let (q1, q2) = (self.sample(t.k), self.sample(t.k + 1));
            segments_cross(p1, p2, q1, q2)
        };
        let mut crossing: Option<(i64, i64)> = None;
        'outer: for (i, s) in segs.iter().enumerate() {
            if s.k < 0 || s.k >= m {
                continue;
            }
            for t in &segs[i + 1..] {
                if t.lo_x > s.hi_x {
                    break;
                }
                if crosses(s, t) {
                    crossing = Some((s.k.min(t.k), s.k.max(t.k)));
                    break 'outer;
                }
            }
            for t in segs[..i].iter().rev() {
                if t.lo_x < s.lo_x - widest {
                    break;
                }
                if crosses(s, t) {
                    crossing = Some((s.k.min(t.k), s.k.max(t.k)));
                    break 'outer;
                }
            }
        }
        if let Some((k0, k1)) = crossing {
            let (p1, p2) = (self.sample(k0), self.sample(k0 + 1));
            let (q1, q2) = (self.sample(k1), self.sample(k1 + 1));
            let d = cross(q1, q2, p1) / (cross(q1, q2, p1) - cross(q1, q2, p2));
            let x = [p1[0] + d * (p2[0] - p1[0]), p1[1] + d * (p2[1] - p1[1])];
            let area = self.loop_area(k0, k1, x, x);
            return GapReport {
                gap: 0.0,
                args: (k0 as f64 * h, k1 as f64 * h),
                bubble_area: Some(area),
                intersecting: true,
            };
        }

        // Closest pair by an x-sorted sweep over three periods.
        let mut pts: Vec<(f64, f64, i64)> = (-m..2 * m)
            .map(|k| {
                let p = self.sample(k);
                (p[0], p[1], k)
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = (f64::INFINITY, 0i64, 0i64);
        for i in 0..pts.len() {
            let (x, y, k) = pts[i];
            if k < 0 || k >= m {
                continue;
            }
            for dir in [1isize, -1] {
                let mut j = i as isize + dir;
                while j >= 0 && (j as usize) < pts.len() {
                    let (xj, yj, kj) = pts[j as usize];
                    if (xj - x).abs() >= best.0 {
                        break;
                    }
                    if (arc_at(kj) - arc_at(k)).abs() > guard {
                        let d = (xj - x).hypot(yj - y);
                        if d < best.0 {
                            best = (d, k.min(kj), k.max(kj));
                        }
                    }
                    j += dir;
                }
            }
        }
        let (mut s, mut t) = (best.1 as f64 * h, best.2 as f64 * h);
        let mut gap = best.0;
        // Newton refinement of |z(s) − z(t)|².
        for _ in 0..20 {
            let (zs, zs1, zs2) = self.unwrapped_point(s);
            let (zt, zt1, zt2) = self.unwrapped_point(t);
            let dz = [zs[0] - zt[0], zs[1] - zt[1]];
            let g = [2.0 * (dz[0] * zs1[0] + dz[1] * zs1[1]), -2.0 * (dz[0] * zt1[0] + dz[1] * zt1[1])];
            let hss = 2.0 * (zs1[0] * zs1[0] + zs1[1] * zs1[1] + dz[0] * zs2[0] + dz[1] * zs2[1]);
            let htt = 2.0 * (zt1[0] * zt1[0] + zt1[1] * zt1[1] - dz[0] * zt2[0] - dz[1] * zt2[1]);
            let hst = -2.0 * (zs1[0] * zt1[0] + zs1[1] * zt1[1]);
            let det = hss * htt - hst * hst;
            if !(det > 0.0 && hss > 0.0) {
                break;
            }
            let ds = -(htt * g[0] - hst * g[1]) / det;
            let dt = -(hss * g[1] - hst * g[0]) / det;
            if ds.abs() > 2.0 * h || dt.abs() > 2.0 * h {
                break;
            }
            let (ns, nt) = (s + ds, t + dt);
            let (a, _, _) = self.unwrapped_point(ns);
            let (b, _, _) = self.unwrapped_point(nt);
            let d = (a[0] - b[0]).hypot(a[1] - b[1]);
            if d > gap {
                break;
            }
            gap = d;
            s = ns;
            t = nt;
            if ds.abs().max(dt.abs()) < 1e-14 {
                break;
            }
        }
        let bubble_area = if self.x_slopes.iter().any(|&v| v < 0.0) {
            let (zs, _, _) = self.unwrapped_point(s);
            let (zt, _, _) = self.unwrapped_point(t);
            let k0 = (s / h).ceil() as i64 - 1;
            let k1 = (t / h).floor() as i64;
            let mut pts = vec![zs];
            for k in (k0 + 1)..=k1 {
                pts.push(self.sample(k));
            }
            pts.push(zt);
            Some(shoelace(&pts))
        } else {
            None
        };
        GapReport {
            gap,
            args: (s, t),
            bubble_area,
            intersecting: false,
        }
    }

    fn unwrapped_point(&self, alpha: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        // x(α) already carries the +α term, so exact sums are periodic-aware.
        self.point(alpha)
    }
}

/// Geometric summary of a surface.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileReport {
    pub class: WaveClass,
    pub min_x_slope: f64,
    pub alpha_crit: f64,
    pub self_gap: f64,
    pub gap_args: (f64, f64),
    pub bubble_area: Option<f64>,
    /// `d − b₀`, infinite on the half-plane.
    pub depth_h: f64,
    pub injective: bool,
    pub min_z_slope_modulus: f64,
}

/// Classification only; see [`profile_report`] for the full record.
pub fn classify(c: &SurfaceCurve, tols: &GeometryTolerances) -> WaveClass {
    profile_report(c, tols).class
}

pub fn profile_report(c: &SurfaceCurve, tols: &GeometryTolerances) -> ProfileReport {
    let (min_x_slope, alpha_crit) = c.min_x_slope();
    let gap = c.self_gap(tols.guard);
    let min_z = c.z_slope_moduli.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let class = if c.trace.is_constant(1e-14 * (1.0 + c.trace.mean().abs())) {
        WaveClass::Laminar
    } else if gap.intersecting {
        WaveClass::Invalid
    } else if min_x_slope > tols.slope_tol {
        WaveClass::Regular
    } else if min_x_slope >= -tols.slope_tol {
        WaveClass::Breaking
    } else if gap.gap < tols.gap_tol {
        WaveClass::Touching
    } else {
        WaveClass::Overhanging
    };
    ProfileReport {
        class,
        min_x_slope,
        alpha_crit,
        self_gap: gap.gap,
        gap_args: gap.args,
        bubble_area: gap.bubble_area,
        depth_h: c.depth.value() - c.trace.mean(),
        injective: !gap.intersecting,
        min_z_slope_modulus: min_z,
    }
}

/// Depth, injectivity and the smallest `|z_α|` of a surface.
#[derive(Clone, Debug, PartialEq)]
pub struct Validity {
    pub depth_h: f64,
    pub injective: bool,
    pub min_z_slope_modulus: f64,
    /// `min |z_α| < 1e-8`: the surface carries a stagnation point.
    pub stagnation: bool,
}

pub fn depth_and_validity(trace: &HoloTrace, depth: Depth, guard: f64) -> Result<Validity> {
    let c = surface_curve(trace, depth, default_samples(trace.order()))?;
    let gap = c.self_gap(guard);
    let min_z = c.z_slope_moduli.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    Ok(Validity {
        depth_h: depth.value() - trace.mean(),
        injective: !gap.intersecting,
        min_z_slope_modulus: min_z,
        stagnation: min_z < 1e-8,
    })
}

/// `(x_αα, x_ααα)` at `alpha`, the data of the breaking dichotomy.
pub fn breaking_derivatives(trace: &HoloTrace, depth: Depth, alpha: f64) -> (f64, f64) {
    (
        trace.derivative_at(alpha, 2, true, depth),
        trace.derivative_at(alpha, 3, true, depth),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::exact_solution_n;

    fn curve(a: f64) -> SurfaceCurve {
        let t = exact_solution_n(a, 64).unwrap();
        surface_curve(&t, Depth::Infinite, 512).unwrap()
    }

    #[test]
    fn flat_curves() {
        let c = surface_curve(&HoloTrace::zeros(8), Depth::Infinite, 64).unwrap();
        for j in 0..64 {
            assert!((c.xs[j] - c.alphas[j]).abs() < 1e-15 && c.ys[j].abs() < 1e-15);
        }
        let g = c.self_gap(0.5);
        assert!(g.gap >= 0.49 && !g.intersecting);
        let c = surface_curve(&HoloTrace::constant(8, 0.3), Depth::Infinite, 64).unwrap();
        assert!(c.ys.iter().all(|y| (y - 0.3).abs() < 1e-15));
        let v = depth_and_validity(&HoloTrace::constant(8, 0.3), Depth::Finite(2.0), 0.5).unwrap();
        assert!((v.depth_h - 1.7).abs() < 1e-15);
        let v = depth_and_validity(&HoloTrace::zeros(8), Depth::Infinite, 0.5).unwrap();
        assert!(v.depth_h.is_infinite() && v.injective && (v.min_z_slope_modulus - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_trough_height() {
        let c = curve(0.01);
        assert!((c.ys[0] + 0.4 / 1.1).abs() < 1e-14);
    }

    #[test]
    fn exact_family_classes() {
        let tols = GeometryTolerances::default();
        assert_eq!(classify(&curve(0.05), &tols), WaveClass::Regular);
        assert_eq!(classify(&curve(0.19), &tols), WaveClass::Overhanging);
        // Past the touching value the explicit profile crosses itself.
        assert_eq!(classify(&curve(0.30), &tols), WaveClass::Invalid);
        assert!(curve(0.05).self_gap(0.5).gap > 0.4);
        assert!(curve(0.45).self_gap(0.5).gap < 0.05);
        let t = exact_solution_n(0.46, 64).unwrap();
        assert!(!depth_and_validity(&t, Depth::Infinite, 0.5).unwrap().injective);
    }

    #[test]
    fn vertical_tangent_at_critical_parameter() {
        let a_crit = (2f64.sqrt() - 1.0).powi(2);
        let c = curve(a_crit);
        let (m, alpha) = c.min_x_slope();
        assert!(m.abs() < 1e-12, "{m}");
        assert!(alpha > 0.0 && alpha < PI);
        assert_eq!(classify(&c, &GeometryTolerances::default()), WaveClass::Breaking);
    }

    #[test]
    fn reflection_invariance() {
        let t = exact_solution_n(0.19, 64).unwrap();
        let c = surface_curve(&t, Depth::Infinite, 512).unwrap();
        let r1 = profile_report(&c, &GeometryTolerances::default());
        // α ↦ −α reverses the samples; rebuild from the reflected grid.
        let mut refl = c.clone();
        let m = c.len();
        for j in 0..m {
            let k = (m - j) % m;
            refl.xs[j] = -c.xs[k] + if k == 0 { 0.0 } else { 2.0 * PI };
            refl.ys[j] = c.ys[k];
            refl.x_slopes[j] = c.x_slopes[k];
            refl.z_slope_moduli[j] = c.z_slope_moduli[k];
        }
        let r2 = profile_report(&refl, &GeometryTolerances::default());
        assert_eq!(r1.class, r2.class);
        assert!((r1.self_gap - r2.self_gap).abs() < 1e-12);
        assert!((r1.min_x_slope - r2.min_x_slope).abs() < 1e-15);
    }
}
