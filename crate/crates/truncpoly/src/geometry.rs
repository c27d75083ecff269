//! Level curves of the phase function, their real-axis crossings, and
//! classification of query points into the asymptotic regions.
//!
//! For `x > 0` the level set `Re phi(z) = ell(r)` with `0 < r < z0` consists
//! of two closed Jordan curves: an inner one enclosing `[0, r)` and passing
//! through `r`, and an outer one crossing the real axis at `r_+ in (z0, x^-2)`
//! and `r_++ > x^-2`. Both are traced here by radial solves from a real
//! anchor. At `x = 0` the phase degenerates to `log z` and the inner curve is
//! exactly the circle `|z| = r`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ModelParams, SaddlePoint};

/// Default number of trace angles. Doubled automatically (up to
/// [`MAX_NPOINTS`]) whenever the sampled polyline is locally under-resolved.
pub const DEFAULT_NPOINTS: usize = 720;

/// Hard cap on trace refinement.
pub const MAX_NPOINTS: usize = 16_384;

/// Default half-width `delta` of the critical disc `|z - 1| < delta / n`.
pub const DEFAULT_DELTA: f64 = 5.0;

/// Default width of the transition band around the unit-level curve, in
/// units of `Re phi`. The band must shrink with `n` so that both asymptotic
/// terms stay comparable inside it.
pub fn default_u_width(n: usize) -> f64 {
    5.0 / n as f64
}

/// Which of the two Jordan components of the level set is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// Encloses `[0, r)` and passes through `r`.
    Inner,
    /// Crosses the real axis at `r_+ in (z0, x^-2)` and `r_++ > x^-2`.
    Outer,
}

/// Real-axis crossings of the full level set at level `ell(r)`.
#[derive(Debug, Clone, Copy)]
pub struct RealCrossings {
    /// Negative crossing of the inner component.
    pub r_minus: f64,
    /// Positive crossing of the inner component (the defining radius).
    pub r: f64,
    /// Crossings `(r_plus, r_plus_plus)` of the outer component; absent in
    /// the `x = 0` limit, where the level set is a single circle.
    pub outer: Option<(f64, f64)>,
}

/// A traced Jordan component of the level set `Re phi = ell(r)`.
///
/// Points are ordered counterclockwise by the angle `theta` around a real
/// anchor (`0` for the inner component, the midpoint of the outer real
/// crossings for the outer one); the polyline is closed implicitly
/// (`points[last]` connects back to `points[0]`).
#[derive(Debug, Clone)]
pub struct LevelCurve {
    /// Defining radius: the curve belongs to the level `ell(r)`.
    pub r: f64,
    /// The level value `ell(r)`.
    pub level: f64,
    pub component: Component,
    /// Real anchor the radial solves are centered on.
    pub anchor: f64,
    /// Trace angles, uniform on `[0, 2 pi)`.
    pub theta: Vec<f64>,
    pub points: Vec<Complex64>,
    /// Tangent `dz/dtheta` at each point, from implicit differentiation of
    /// the level condition.
    pub dz_dtheta: Vec<Complex64>,
    /// `|Re phi(point) - level|` per point.
    pub residuals: Vec<f64>,
    /// Real-axis crossings of the full level set this curve belongs to.
    pub crossings: RealCrossings,
}

impl LevelCurve {
    /// Largest level residual over the trace.
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Winding-number test: is `z` strictly inside the traced polyline?
    pub fn contains(&self, z: Complex64) -> bool {
        let m = self.points.len();
        let mut total = 0.0;
        for k in 0..m {
            let a = self.points[k] - z;
            let b = self.points[(k + 1) % m] - z;
            let cross = a.re * b.im - a.im * b.re;
            let dot = a.re * b.re + a.im * b.im;
            total += cross.atan2(dot);
        }
        total / (2.0 * PI) > 0.5
    }

    /// Distance from `z` to the traced polyline (minimum over segments).
    pub fn distance_to(&self, z: Complex64) -> f64 {
        let m = self.points.len();
        let mut best = f64::INFINITY;
        for k in 0..m {
            let a = self.points[k];
            let b = self.points[(k + 1) % m];
            best = best.min(dist_point_segment(z, a, b));
        }
        best
    }
}

fn dist_point_segment(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let az = z - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return az.norm();
    }
    let t = ((az.re * ab.re + az.im * ab.im) / len2).clamp(0.0, 1.0);
    (az - ab * t).norm()
}

// --------------------------------------------------------------------
// Scalar root finding
// --------------------------------------------------------------------

/// Brent's method on a sign-changing bracket `[a, b]`.
fn brent_root(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fb: f64) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracketing(format!(
            "no sign change on [{a}, {b}]: f = ({fa:.3e}, {fb:.3e})"
        )));
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.abs() > fc.abs() {
            // Keep b the best estimate, c on the other side.
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 1e-15;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Attempt inverse quadratic (or secant) interpolation.
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = f(b);
        if fb.signum() != fc.signum() && fb != 0.0 {
            // b and c still bracket; nothing to do.
        } else {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Err(Error::Convergence("root refinement stalled".into()))
}

/// Expands a bracket geometrically from `seed` until `f` changes sign, then
/// refines with Brent. `f(seed * grow^k)` must eventually change sign in
/// the direction indicated by the sign of `f(seed)` being negative inside.
fn solve_radial(f: &dyn Fn(f64) -> f64, seed: f64, grow: f64) -> Result<f64> {
    let fseed = f(seed);
    if fseed == 0.0 {
        return Ok(seed);
    }
    let (mut lo, mut hi, mut flo, mut fhi);
    if fseed < 0.0 {
        lo = seed;
        flo = fseed;
        hi = seed * grow;
        fhi = f(hi);
        let mut steps = 0;
        while fhi < 0.0 {
            lo = hi;
            flo = fhi;
            hi *= grow;
            fhi = f(hi);
            steps += 1;
            if steps > 2000 || !hi.is_finite() {
                return Err(Error::Bracketing(format!(
                    "no outward sign change from seed {seed:.6e}"
                )));
            }
        }
    } else {
        hi = seed;
        fhi = fseed;
        lo = seed / grow;
        flo = f(lo);
        let mut steps = 0;
        while flo > 0.0 {
            hi = lo;
            fhi = flo;
            lo /= grow;
            flo = f(lo);
            steps += 1;
            if steps > 2000 || lo < 1e-300 {
                return Err(Error::Bracketing(format!(
                    "no inward sign change from seed {seed:.6e}"
                )));
            }
        }
    }
    brent_root(f, lo, hi, flo, fhi)
}

// --------------------------------------------------------------------
// Real crossings
// --------------------------------------------------------------------

/// Locates the real-axis crossings of the level set `Re phi = ell(r)`.
///
/// Requires `0 < r < z0` strictly when `x > 0` (at `r = z0` the two
/// components touch and the level set is not a pair of Jordan curves).
pub fn real_crossings(p: &ModelParams, r: f64) -> Result<RealCrossings> {
    if p.x() == 0.0 {
        if r <= 0.0 {
            return Err(Error::Domain(format!("level radius must be positive, got {r}")));
        }
        return Ok(RealCrossings {
            r_minus: -r,
            r,
            outer: None,
        });
    }
    let z0 = p.saddle_z0()?;
    check_radius(r, z0)?;
    let level = p.ell(r)?;
    let x2 = p.x() * p.x();
    let c = p.c();
    // Extended Re phi on the real line, per branch.
    let f_neg = move |u: f64| u.ln() + c * (1.0 + x2 * u).ln() - level; // at t = -u, u > 0
    let f_mid = move |t: f64| t.ln() + c * (1.0 - x2 * t).ln() - level; // 0 < t < x^-2
    let f_far = move |t: f64| t.ln() + c * (x2 * t - 1.0).ln() - level; // t > x^-2

    // r_minus: |t| (1 + x^2 |t|)^c increases in |t|, so the crossing sits in
    // (0, e^level]; expand downward from u = e^level where f_neg >= 0.
    let u_seed = level.exp();
    let r_minus = -solve_radial(&f_neg, u_seed, 1.5)?;

    // r_plus in (z0, x^-2): Re phi decreases from ell(z0) > level to -inf.
    let hi = 1.0 / x2;
    let r_plus = {
        let g = move |s: f64| f_mid(z0 + s); // s in (0, hi - z0)
        let width = hi - z0;
        // Bisection-safe bracket: g(0+) > 0, g(width-) = -inf.
        let mut lo = width * 1e-12;
        let mut glo = g(lo);
        if glo < 0.0 {
            return Err(Error::Bracketing(
                "level too close to the saddle value for the outer crossing".into(),
            ));
        }
        let mut s_hi = width * (1.0 - 1e-12);
        let mut ghi = g(s_hi);
        let mut steps = 0;
        while ghi > 0.0 {
            // Should not happen (g -> -inf at the cut), but guard anyway.
            s_hi = 0.5 * (s_hi + width);
            ghi = g(s_hi);
            steps += 1;
            if steps > 200 {
                return Err(Error::Bracketing("outer crossing bracket failed".into()));
            }
        }
        // Shrink lo upward geometrically to tighten the bracket.
        loop {
            let mid = lo * 4.0;
            if mid >= s_hi {
                break;
            }
            let gmid = g(mid);
            if gmid > 0.0 {
                lo = mid;
                glo = gmid;
            } else {
                s_hi = mid;
                ghi = gmid;
                break;
            }
        }
        z0 + brent_root(&g, lo, s_hi, glo, ghi)?
    };

    // r_plus_plus > x^-2: increasing from -inf to +inf.
    let r_plus_plus = {
        let g = move |s: f64| f_far(hi + s); // s > 0
        // Seed where the leading log term alone would hit the level.
        let seed = (level.exp() / hi.powf(1.0)).powf(1.0 / c).max(hi * 1e-9);
        let seed = seed.min(hi * 1e3);
        hi + solve_radial(&g, seed, 2.0)?
    };

    Ok(RealCrossings {
        r_minus,
        r,
        outer: Some((r_plus, r_plus_plus)),
    })
}

fn check_radius(r: f64, z0: f64) -> Result<()> {
    if r <= 0.0 {
        return Err(Error::Domain(format!("level radius must be positive, got {r}")));
    }
    if r >= z0 * (1.0 - 1e-9) {
        return Err(Error::Domain(format!(
            "level radius {r} too close to the saddle {z0}: the two components merge"
        )));
    }
    Ok(())
}

// --------------------------------------------------------------------
// Curve tracing
// --------------------------------------------------------------------

/// Traces one Jordan component of `Re phi = ell(r)` with `npoints` angles
/// around the component's natural anchor, refining the angle count (up to
/// [`MAX_NPOINTS`]) until the polyline is locally resolved.
///
/// At `x = 0` the inner component is returned as the exact circle `|z| = r`;
/// the outer component does not exist there.
pub fn trace_gamma(
    p: &ModelParams,
    r: f64,
    npoints: usize,
    component: Component,
) -> Result<LevelCurve> {
    if npoints < 16 {
        return Err(Error::Domain(format!(
            "need at least 16 trace angles, got {npoints}"
        )));
    }
    if p.x() == 0.0 {
        return match component {
            Component::Inner => Ok(circle_curve(r, npoints)?),
            Component::Outer => Err(Error::Domain(
                "the level set has no outer component at x = 0".into(),
            )),
        };
    }
    let crossings = real_crossings(p, r)?;
    let level = p.ell(r)?;
    let mut m = npoints;
    loop {
        let curve = trace_at_resolution(p, r, level, m, component, crossings)?;
        let spacings: Vec<f64> = (0..curve.points.len())
            .map(|k| {
                (curve.points[(k + 1) % curve.points.len()] - curve.points[k]).norm()
            })
            .collect();
        let mut sorted = spacings.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let max = sorted[sorted.len() - 1];
        if max <= 2.0 * median || m >= MAX_NPOINTS {
            return Ok(curve);
        }
        m = (2 * m).min(MAX_NPOINTS);
    }
}

fn circle_curve(r: f64, npoints: usize) -> Result<LevelCurve> {
    if r <= 0.0 {
        return Err(Error::Domain(format!("level radius must be positive, got {r}")));
    }
    let mut theta = Vec::with_capacity(npoints);
    let mut points = Vec::with_capacity(npoints);
    let mut dz = Vec::with_capacity(npoints);
    for k in 0..npoints {
        let t = 2.0 * PI * k as f64 / npoints as f64;
        let z = Complex64::from_polar(r, t);
        theta.push(t);
        points.push(z);
        dz.push(Complex64::new(0.0, 1.0) * z);
    }
    Ok(LevelCurve {
        r,
        level: r.ln(),
        component: Component::Inner,
        anchor: 0.0,
        theta,
        points,
        dz_dtheta: dz,
        residuals: vec![0.0; npoints],
        crossings: RealCrossings {
            r_minus: -r,
            r,
            outer: None,
        },
    })
}

fn trace_at_resolution(
    p: &ModelParams,
    r: f64,
    level: f64,
    npoints: usize,
    component: Component,
    crossings: RealCrossings,
) -> Result<LevelCurve> {
    let (anchor, rho0) = match component {
        Component::Inner => (0.0, r),
        Component::Outer => {
            let (rp, rpp) = crossings.outer.expect("outer crossings exist for x > 0");
            (0.5 * (rp + rpp), 0.5 * (rpp - rp))
        }
    };
    // The two components approach each other as r -> z0, leaving only a thin
    // window where Re phi exceeds the level between them (width r_+ - r on
    // the real axis). Bracket growth must stay below that window or the
    // expansion can step across both curves at once.
    let grow = match crossings.outer {
        Some((rp, _)) => (1.0 + 0.4 * (rp - r) / rho0).min(1.12),
        None => 1.12,
    };
    let f = |rho: f64, theta: f64| {
        let z = Complex64::new(anchor + rho * theta.cos(), rho * theta.sin());
        p.re_phi(z) - level
    };
    let mut theta = Vec::with_capacity(npoints);
    let mut points = Vec::with_capacity(npoints);
    let mut dz = Vec::with_capacity(npoints);
    let mut residuals = Vec::with_capacity(npoints);
    let mut rho_prev = rho0;
    for k in 0..npoints {
        let t = 2.0 * PI * k as f64 / npoints as f64;
        let ft = |rho: f64| f(rho, t);
        let rho = solve_radial(&ft, rho_prev, grow)?;
        if k > 0 && (rho / rho_prev > 1.5 || rho_prev / rho > 1.5) {
            return Err(Error::Bracketing(format!(
                "radial jump at angle {t:.4}: {rho_prev:.6e} -> {rho:.6e}; \
                 the component is not star-shaped around its anchor here"
            )));
        }
        let z = Complex64::new(anchor + rho * t.cos(), rho * t.sin());
        let eit = Complex64::from_polar(1.0, t);
        let w = p.phi_prime(z) * eit;
        if w.re.abs() < 1e-12 * w.norm() {
            return Err(Error::Bracketing(format!(
                "level curve tangent to the trace ray at angle {t:.4}"
            )));
        }
        let rho_dot = rho * w.im / w.re;
        theta.push(t);
        points.push(z);
        dz.push(eit * Complex64::new(rho_dot, rho));
        residuals.push((p.re_phi(z) - level).abs());
        rho_prev = rho;
    }
    Ok(LevelCurve {
        r,
        level,
        component,
        anchor,
        theta,
        points,
        dz_dtheta: dz,
        residuals,
        crossings,
    })
}

// --------------------------------------------------------------------
// Saddle report
// --------------------------------------------------------------------

/// Saddle data `(z0, phi(z0), phi''(z0))`, restricted to the strong regime
/// `z0 > 1` and verified against `|phi'(z0)| <= 1e-12`.
pub fn saddle_report(p: &ModelParams) -> Result<SaddlePoint> {
    let s = p.saddle()?;
    if s.z0 <= 1.0 {
        return Err(Error::Domain(format!(
            "saddle z0 = {} <= 1: outside the strong regime (x^2 >= n'/(n + alpha))",
            s.z0
        )));
    }
    let grad = p.phi_prime(Complex64::new(s.z0, 0.0)).norm();
    if grad > 1e-12 {
        return Err(Error::Accuracy(format!(
            "phi'(z0) = {grad:.3e} fails the stationarity check"
        )));
    }
    Ok(s)
}

// --------------------------------------------------------------------
// Region classification
// --------------------------------------------------------------------

/// Region labels for the pointwise asymptotic regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Exterior of the unit-level curve, away from the transition band.
    ExtGamma1,
    /// Interior of the unit-level curve, away from the transition band.
    IntGamma1,
    /// Transition band `|Re phi(z) - ell(1)| < u_width`.
    NbhdU,
    /// Critical disc `|z - 1| < delta / n`.
    Disc1,
}

/// A label plus the distances used to decide it.
#[derive(Debug, Clone, Copy)]
pub struct RegionLabel {
    pub region: Region,
    /// Distance from the query point to the traced unit-level curve.
    pub dist_to_gamma1: f64,
    /// `n |z - 1|`, the disc-scale distance to the critical point.
    pub n_dist_to_one: f64,
}

/// Classifier for the four asymptotic regions, holding a traced unit-level
/// curve so repeated queries stay cheap.
#[derive(Debug, Clone)]
pub struct Classifier {
    params: ModelParams,
    gamma1: LevelCurve,
    u_width: f64,
    delta: f64,
}

impl Classifier {
    /// Traces the unit-level inner curve with the default resolution.
    pub fn new(p: &ModelParams, u_width: f64, delta: f64) -> Result<Self> {
        let gamma1 = trace_gamma(p, 1.0, DEFAULT_NPOINTS, Component::Inner)?;
        Ok(Self {
            params: *p,
            gamma1,
            u_width,
            delta,
        })
    }

    /// The traced unit-level curve backing this classifier.
    pub fn gamma1(&self) -> &LevelCurve {
        &self.gamma1
    }

    /// Labels a point. Precedence: the critical disc wins over the
    /// transition band, which wins over the interior/exterior split.
    pub fn classify(&self, z: Complex64) -> RegionLabel {
        let n = self.params.n() as f64;
        let n_dist_to_one = n * (z - Complex64::new(1.0, 0.0)).norm();
        let dist_to_gamma1 = self.gamma1.distance_to(z);
        let region = if n_dist_to_one < self.delta {
            Region::Disc1
        } else if (self.params.re_phi(z) - self.gamma1.level).abs() < self.u_width {
            Region::NbhdU
        } else if self.gamma1.contains(z) {
            Region::IntGamma1
        } else {
            Region::ExtGamma1
        };
        RegionLabel {
            region,
            dist_to_gamma1,
            n_dist_to_one,
        }
    }
}

/// One-shot classification; traces the unit-level curve on every call, so
/// prefer [`Classifier`] for batches.
pub fn classify(z: Complex64, p: &ModelParams, u_width: f64, delta: f64) -> Result<RegionLabel> {
    Ok(Classifier::new(p, u_width, delta)?.classify(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(n: usize, big_n: usize, gamma: f64, x: f64) -> ModelParams {
        ModelParams::new_real(n, big_n, gamma, x).unwrap()
    }

    // ----------------------------------------------------------------
    // Saddle
    // ----------------------------------------------------------------

    #[test]
    fn saddle_matches_rational_closed_form() {
        // c = 1, x = 7/12: z0 = 1/(x^2 (1 + c)) = 144/(49 * 2) = 72/49.
        let p = params(37, 74, 0.5, 7.0 / 12.0);
        let s = saddle_report(&p).unwrap();
        assert!((s.z0 - 72.0 / 49.0).abs() < 1e-14);
        assert!(s.phi_pp_at_z0 < 0.0);
        // Curvature closed form vs. the model's second derivative.
        let direct = p.phi_double_prime(Complex64::new(s.z0, 0.0));
        assert!((direct.re - s.phi_pp_at_z0).abs() < 1e-12 * s.phi_pp_at_z0.abs());
        assert!(direct.im.abs() < 1e-14);
    }

    #[test]
    fn saddle_curvature_matches_finite_differences() {
        let p = params(20, 50, 1.0, 0.45);
        let s = saddle_report(&p).unwrap();
        // h ~ eps^(1/4): second differences are roundoff-dominated below that.
        let h = 3e-4;
        let f = |t: f64| p.re_phi(Complex64::new(t, 0.0));
        let fd = (f(s.z0 + h) - 2.0 * f(s.z0) + f(s.z0 - h)) / (h * h);
        assert!(
            (fd - s.phi_pp_at_z0).abs() < 1e-7 * s.phi_pp_at_z0.abs().max(1.0),
            "fd = {fd}, closed = {}",
            s.phi_pp_at_z0
        );
        // First derivative vanishes at the saddle.
        assert!(p.phi_prime(Complex64::new(s.z0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn saddle_rejects_weak_regime() {
        // c = 1, x = 0.8: z0 = 1/(0.64 * 2) < 1.
        let p = params(10, 20, 0.0, 0.8);
        assert!(matches!(saddle_report(&p), Err(Error::Domain(_))));
    }

    // ----------------------------------------------------------------
    // Real crossings
    // ----------------------------------------------------------------

    #[test]
    fn crossings_sit_on_the_level_set() {
        let p = params(25, 50, 0.7, 0.5); // z0 = 2
        let r = 1.0;
        let cr = real_crossings(&p, r).unwrap();
        let level = p.ell(r).unwrap();
        let x2 = p.x() * p.x();
        let c = p.c();
        let re_phi_ext = |t: f64| t.abs().ln() + c * (1.0 - x2 * t).abs().ln();
        assert!(cr.r_minus < 0.0);
        let (rp, rpp) = cr.outer.unwrap();
        let z0 = p.saddle_z0().unwrap();
        assert!(z0 < rp && rp < 1.0 / x2 && 1.0 / x2 < rpp);
        for t in [cr.r_minus, rp, rpp] {
            assert!(
                (re_phi_ext(t) - level).abs() < 1e-10,
                "crossing {t} misses the level"
            );
        }
    }

    #[test]
    fn crossings_reject_degenerate_radii() {
        let p = params(25, 50, 0.7, 0.5); // z0 = 2
        assert!(real_crossings(&p, 2.0).is_err()); // at the saddle
        assert!(real_crossings(&p, 2.5).is_err()); // beyond it
        assert!(real_crossings(&p, -1.0).is_err());
        assert!(real_crossings(&p, 0.0).is_err());
    }

    // ----------------------------------------------------------------
    // Tracing
    // ----------------------------------------------------------------

    #[test]
    fn inner_trace_passes_through_real_crossings() {
        let p = params(25, 50, 0.7, 0.5);
        let curve = trace_gamma(&p, 1.0, 720, Component::Inner).unwrap();
        // theta = 0 lands exactly on r.
        assert!((curve.points[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // theta = pi lands on r_minus.
        let mid = curve.points[curve.points.len() / 2];
        assert!((mid - Complex64::new(curve.crossings.r_minus, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn outer_trace_passes_through_real_crossings() {
        let p = params(25, 50, 0.7, 0.5);
        let curve = trace_gamma(&p, 1.0, 720, Component::Outer).unwrap();
        let (rp, rpp) = curve.crossings.outer.unwrap();
        assert!((curve.points[0] - Complex64::new(rpp, 0.0)).norm() < 1e-10);
        let mid = curve.points[curve.points.len() / 2];
        assert!((mid - Complex64::new(rp, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn unit_level_curve_satisfies_modulus_equation() {
        // On the r = 1 curve: |z| |1 - x^2 z|^c = (1 - x^2)^c.
        let p = params(25, 50, 0.7, 0.5);
        let c = p.c();
        let x2 = p.x() * p.x();
        let target = (1.0 - x2).powf(c);
        let curve = trace_gamma(&p, 1.0, 720, Component::Inner).unwrap();
        for &z in &curve.points {
            let lhs = z.norm() * (Complex64::new(1.0, 0.0) - z * x2).norm().powf(c);
            assert!((lhs - target).abs() < 1e-10 * target);
        }
        assert!(curve.max_residual() < 1e-10);
    }

    #[test]
    fn traces_are_conjugation_symmetric() {
        let p = params(25, 50, 0.7, 0.5);
        for comp in [Component::Inner, Component::Outer] {
            let curve = trace_gamma(&p, 1.3, 360, comp).unwrap();
            let m = curve.points.len();
            for k in 1..m {
                let a = curve.points[k];
                let b = curve.points[m - k].conj();
                assert!((a - b).norm() < 1e-11, "asymmetry at index {k}");
            }
        }
    }

    #[test]
    fn traces_cross_the_real_axis_exactly_twice() {
        let p = params(25, 50, 0.7, 0.5);
        for comp in [Component::Inner, Component::Outer] {
            let curve = trace_gamma(&p, 1.3, 720, comp).unwrap();
            let m = curve.points.len();
            let mut changes = 0;
            for k in 0..m {
                let a = curve.points[k].im;
                let b = curve.points[(k + 1) % m].im;
                // The trace starts exactly on the axis; count transitions
                // through or from zero once.
                if (a == 0.0 && b != 0.0 && k != 0) || (a != 0.0 && b != 0.0 && a.signum() != b.signum())
                {
                    changes += 1;
                }
                if a == 0.0 && k == 0 {
                    changes += 1;
                }
            }
            assert_eq!(changes, 2, "{comp:?}");
        }
    }

    #[test]
    fn inner_trace_is_simple_polyline() {
        // Segment-intersection sweep: no two non-adjacent segments cross.
        let p = params(30, 45, 0.7, 0.55); // c = 0.5, z0 = 2.20...
        let curve = trace_gamma(&p, 1.2, 360, Component::Inner).unwrap();
        let pts = &curve.points;
        let m = pts.len();
        let orient = |a: Complex64, b: Complex64, c: Complex64| -> f64 {
            (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
        };
        let proper_cross = |a: Complex64, b: Complex64, c: Complex64, d: Complex64| -> bool {
            let o1 = orient(a, b, c);
            let o2 = orient(a, b, d);
            let o3 = orient(c, d, a);
            let o4 = orient(c, d, b);
            o1 * o2 < 0.0 && o3 * o4 < 0.0
        };
        for i in 0..m {
            for j in (i + 2)..m {
                if i == 0 && j == m - 1 {
                    continue; // adjacent through the wrap-around
                }
                assert!(
                    !proper_cross(pts[i], pts[(i + 1) % m], pts[j], pts[(j + 1) % m]),
                    "segments {i} and {j} intersect"
                );
            }
        }
    }

    #[test]
    fn smaller_radii_nest_strictly_inside() {
        let p = params(25, 50, 0.7, 0.5); // z0 = 2
        let radii = [1.0, 1.3, 1.6, 1.9];
        let curves: Vec<LevelCurve> = radii
            .iter()
            .map(|&r| trace_gamma(&p, r, 360, Component::Inner).unwrap())
            .collect();
        for w in curves.windows(2) {
            let (small, big) = (&w[0], &w[1]);
            for &z in &small.points {
                assert!(big.contains(z), "point {z} of the smaller curve escapes");
            }
        }
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let p = params(25, 50, 0.7, 0.5);
        let curve = trace_gamma(&p, 1.0, 1440, Component::Inner).unwrap();
        let m = curve.points.len();
        let dt = 2.0 * PI / m as f64;
        for k in (0..m).step_by(37) {
            // Fourth-order central difference on the periodic samples.
            let zm2 = curve.points[(k + m - 2) % m];
            let zm1 = curve.points[(k + m - 1) % m];
            let zp1 = curve.points[(k + 1) % m];
            let zp2 = curve.points[(k + 2) % m];
            let fd = (zm2 - zp2 + (zp1 - zm1) * 8.0) / (12.0 * dt);
            let got = curve.dz_dtheta[k];
            assert!(
                (fd - got).norm() < 1e-6 * got.norm().max(1e-6),
                "tangent mismatch at index {k}: fd = {fd}, implicit = {got}"
            );
        }
    }

    #[test]
    fn cauchy_integral_counts_enclosed_origin() {
        // (1/2 pi i) \oint dz / z = winding around 0: 1 for the inner
        // component, 0 for the outer one. The trapezoid rule on a smooth
        // periodic integrand converges spectrally.
        let p = params(25, 50, 0.7, 0.5);
        for (comp, want) in [(Component::Inner, 1.0), (Component::Outer, 0.0)] {
            let curve = trace_gamma(&p, 1.0, 720, comp).unwrap();
            let m = curve.points.len();
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..m {
                acc += curve.dz_dtheta[k] / curve.points[k];
            }
            let integral = acc * Complex64::new(0.0, -1.0) / m as f64; // / (2 pi i) * dtheta
            assert!(
                (integral - Complex64::new(want, 0.0)).norm() < 1e-10,
                "{comp:?}: got {integral}"
            );
        }
    }

    #[test]
    fn zero_x_short_circuits_to_circles() {
        let p = params(12, 30, 1.0, 0.0);
        let curve = trace_gamma(&p, 0.8, 256, Component::Inner).unwrap();
        for &z in &curve.points {
            assert!((z.norm() - 0.8).abs() < 1e-15);
        }
        assert_eq!(curve.max_residual(), 0.0);
        assert!(curve.crossings.outer.is_none());
        assert!(trace_gamma(&p, 0.8, 256, Component::Outer).is_err());
    }

    #[test]
    fn trace_rejects_bad_radii() {
        let p = params(25, 50, 0.7, 0.5); // z0 = 2
        assert!(trace_gamma(&p, 2.0, 64, Component::Inner).is_err());
        assert!(trace_gamma(&p, -0.5, 64, Component::Inner).is_err());
        assert!(trace_gamma(&p, 1.0, 4, Component::Inner).is_err());
    }

    // ----------------------------------------------------------------
    // Classification
    // ----------------------------------------------------------------

    #[test]
    fn classification_covers_all_regions() {
        // x = 0.5 keeps z = 10 clear of the band around the outer component
        // (at x = 0.3 that point happens to sit near the outer level curve).
        let n = 40;
        let p = params(n, 80, 1.0, 0.5);
        let cls = Classifier::new(&p, default_u_width(n), DEFAULT_DELTA).unwrap();
        // Deep interior.
        assert_eq!(cls.classify(Complex64::new(0.0, 0.0)).region, Region::IntGamma1);
        assert_eq!(cls.classify(Complex64::new(0.2, 0.1)).region, Region::IntGamma1);
        // Far exterior.
        let far = cls.classify(Complex64::new(10.0, 0.0));
        assert_eq!(far.region, Region::ExtGamma1);
        assert!(far.dist_to_gamma1 > 5.0);
        // Inside the critical disc.
        let nf = n as f64;
        let d = cls.classify(Complex64::new(1.0 + 0.1 * DEFAULT_DELTA / nf, 0.0));
        assert_eq!(d.region, Region::Disc1);
        assert!(d.n_dist_to_one < DEFAULT_DELTA);
        // On the curve but outside the disc: the transition band.
        let curve = cls.gamma1();
        let quarter = curve.points[curve.points.len() / 4];
        let lab = cls.classify(quarter);
        assert_eq!(lab.region, Region::NbhdU);
        assert!(lab.dist_to_gamma1 < 1e-8);
    }

    #[test]
    fn disc_takes_precedence_over_band() {
        // z = 1 sits on the unit-level curve, hence inside the band; the
        // disc label must win there.
        let n = 40;
        let p = params(n, 80, 1.0, 0.3);
        let cls = Classifier::new(&p, default_u_width(n), DEFAULT_DELTA).unwrap();
        let z = Complex64::new(1.0 + 0.5 / n as f64, 0.0);
        assert_eq!(cls.classify(z).region, Region::Disc1);
        let one_shot = classify(z, &p, default_u_width(n), DEFAULT_DELTA).unwrap();
        assert_eq!(one_shot.region, Region::Disc1);
    }

    // ----------------------------------------------------------------
    // Property tests
    // ----------------------------------------------------------------

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn traced_curves_stay_on_level_and_close_up(
            n in 5usize..40,
            extra in 1usize..40,
            x in 0.05f64..0.7,
            rfrac in 0.3f64..0.9,
        ) {
            let p = ModelParams::new_real(n, n + extra, 0.9, x).unwrap();
            let z0 = p.saddle_z0().unwrap();
            prop_assume!(z0 > 1.05);
            let r = rfrac * z0.min(2.5);
            prop_assume!(r > 0.05);
            let curve = trace_gamma(&p, r, 180, Component::Inner).unwrap();
            prop_assert!(curve.max_residual() < 1e-10);
            // Conjugation symmetry.
            let m = curve.points.len();
            for k in 1..m {
                prop_assert!((curve.points[k] - curve.points[m - k].conj()).norm() < 1e-10);
            }
            // The anchor is enclosed.
            prop_assert!(curve.contains(Complex64::new(0.0, 0.0)));
        }
    }
}
