//! Model parameters, weight functions, and phase functions.
//!
//! The model is the eigenvalue measure of the top-left `n x n` corner of an
//! `N x N` Haar unitary, deformed by a point charge of strength `gamma` at a
//! real point `x` in the unit disc:
//!
//! ```text
//!   d mu(z) = (1 - |z|^2)^(alpha - 1) * |z - x|^gamma dA(z),   alpha = N - n.
//! ```
//!
//! The same polynomial system is generated by a contour weight on a loop
//! around the segment `[0, 1]`:
//!
//! ```text
//!   w(z) = (1 - x^2 z)^(alpha + gamma/2) * h(z),
//!   h(z) = ((z - 1)/z)^(gamma/2),
//! ```
//!
//! where both powers are principal: `h` is cut along `[0, 1]` and normalized
//! to `1` at infinity, and `(1 - x^2 z)^p` is cut along `[x^{-2}, infinity)`.
//!
//! Large-degree behavior is controlled by the phase function
//! `phi(z) = log z + c log(1 - x^2 z)` with `c = alpha / n`, and its tilted
//! variant `phi~` in which `c` is replaced by `c + gamma / (2n)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// How close an evaluation point may come to a branch cut (relative to the
/// local scale) before weight evaluation refuses to proceed.
pub const CUT_GUARD: f64 = 1e-12;

/// Parameters of the truncated-unitary point-charge model.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    /// Truncation (corner) size; also the polynomial degree scale.
    n: usize,
    /// Size of the ambient Haar unitary. Must exceed `n`.
    big_n: usize,
    /// Charge strength at `x`. Real part must exceed `-2`.
    gamma: Complex64,
    /// Location of the charge on `[0, 1)`.
    x: f64,
}

impl ModelParams {
    /// Validates and builds a parameter set.
    pub fn new(n: usize, big_n: usize, gamma: Complex64, x: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("truncation size n must be positive".into()));
        }
        if big_n <= n {
            return Err(Error::Domain(format!(
                "ambient size N = {big_n} must exceed truncation size n = {n}"
            )));
        }
        if !(gamma.re > -2.0) || !gamma.re.is_finite() || !gamma.im.is_finite() {
            return Err(Error::Domain(format!(
                "charge strength gamma = {gamma} must have real part > -2"
            )));
        }
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Domain(format!(
                "charge location x = {x} must lie in [0, 1)"
            )));
        }
        Ok(Self { n, big_n, gamma, x })
    }

    /// Real-gamma convenience constructor.
    pub fn new_real(n: usize, big_n: usize, gamma: f64, x: f64) -> Result<Self> {
        Self::new(n, big_n, Complex64::new(gamma, 0.0), x)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn big_n(&self) -> usize {
        self.big_n
    }

    pub fn gamma(&self) -> Complex64 {
        self.gamma
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    /// `alpha = N - n`, the boundary exponent of the planar weight.
    pub fn alpha(&self) -> f64 {
        (self.big_n - self.n) as f64
    }

    /// Truncation ratio `mu = n / N`.
    pub fn mu(&self) -> f64 {
        self.n as f64 / self.big_n as f64
    }

    /// `c = alpha / n`, the exponent ratio in the phase function.
    pub fn c(&self) -> f64 {
        self.alpha() / self.n as f64
    }

    /// Combined contour exponent `alpha + gamma / 2`.
    pub fn contour_exponent(&self) -> Complex64 {
        Complex64::new(self.alpha(), 0.0) + 0.5 * self.gamma
    }

    /// Returns a copy with a different charge strength.
    pub fn with_gamma(&self, gamma: Complex64) -> Result<Self> {
        Self::new(self.n, self.big_n, gamma, self.x)
    }

    /// Returns a copy with a different charge location.
    pub fn with_x(&self, x: f64) -> Result<Self> {
        Self::new(self.n, self.big_n, self.gamma, x)
    }

    /// Returns a copy with a different truncation size (same `N`, `gamma`, `x`).
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(n, self.big_n, self.gamma, self.x)
    }

    // ----------------------------------------------------------------
    // Weights
    // ----------------------------------------------------------------

    /// The factor `h(z) = ((z - 1)/z)^(gamma/2)`, principal branch, cut along
    /// `[0, 1]`, normalized so `h(infinity) = 1`.
    pub fn h_factor(&self, z: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        (0.5 * self.gamma * (one - one / z).ln()).exp()
    }

    /// Contour weight `w(z) = (1 - x^2 z)^(alpha + gamma/2) h(z)`.
    ///
    /// Errors if `z` is within [`CUT_GUARD`] (relative) of either branch cut
    /// (`[0, 1]` for `h`, `[x^{-2}, infinity)` for the power factor).
    pub fn contour_weight(&self, z: Complex64) -> Result<Complex64> {
        let scale = z.norm().max(1.0);
        let d_seg = dist_to_real_segment(z, 0.0, 1.0);
        if d_seg < CUT_GUARD * scale {
            return Err(Error::CutProximity(format!(
                "z = {z} is within {d_seg:.3e} of the cut [0, 1]"
            )));
        }
        if self.x > 0.0 {
            let u = self.x.powi(-2);
            let d_ray = dist_to_real_ray(z, u);
            if d_ray < CUT_GUARD * scale.max(u) {
                return Err(Error::CutProximity(format!(
                    "z = {z} is within {d_ray:.3e} of the cut [{u}, inf)"
                )));
            }
        }
        Ok(self.power_factor(z) * self.h_factor(z))
    }

    /// The factor `(1 - x^2 z)^(alpha + gamma/2)`, principal branch.
    pub fn power_factor(&self, z: Complex64) -> Complex64 {
        let w = Complex64::new(1.0, 0.0) - self.x * self.x * z;
        (self.contour_exponent() * w.ln()).exp()
    }

    /// Planar weight `(1 - |z|^2)^(alpha - 1) * |z - x|^gamma` on the open
    /// unit disc. Complex-valued only through `gamma`; positive for real
    /// `gamma` (away from the charge).
    pub fn planar_weight(&self, z: Complex64) -> Result<Complex64> {
        let r2 = z.norm_sqr();
        if r2 >= 1.0 {
            return Err(Error::Domain(format!(
                "planar weight evaluated outside the open unit disc: |z| = {}",
                r2.sqrt()
            )));
        }
        let radial = (1.0 - r2).powf(self.alpha() - 1.0);
        let d = (z - Complex64::new(self.x, 0.0)).norm();
        if d == 0.0 {
            // The charge point itself: the weight is 0 for Re gamma > 0 and
            // divergent for Re gamma < 0; both are useless as node values.
            return Err(Error::Domain(
                "planar weight evaluated exactly at the charge point".into(),
            ));
        }
        Ok(radial * (self.gamma * d.ln()).exp())
    }

    // ----------------------------------------------------------------
    // Phase functions
    // ----------------------------------------------------------------

    /// Phase function `phi(z) = log z + c log(1 - x^2 z)` (principal logs).
    pub fn phi(&self, z: Complex64) -> Complex64 {
        z.ln() + self.c() * (Complex64::new(1.0, 0.0) - self.x * self.x * z).ln()
    }

    /// `phi'(z) = 1/z - c x^2 / (1 - x^2 z)`. Meromorphic: no branch cuts.
    pub fn phi_prime(&self, z: Complex64) -> Complex64 {
        let x2 = self.x * self.x;
        1.0 / z - self.c() * x2 / (Complex64::new(1.0, 0.0) - x2 * z)
    }

    /// `phi''(z) = -1/z^2 - c x^4 / (1 - x^2 z)^2`.
    pub fn phi_double_prime(&self, z: Complex64) -> Complex64 {
        let x2 = self.x * self.x;
        let w = Complex64::new(1.0, 0.0) - x2 * z;
        -1.0 / (z * z) - self.c() * x2 * x2 / (w * w)
    }

    /// Real part of the phase, `ln|z| + c ln|1 - x^2 z|`. Continuous off the
    /// two singular points, unlike `phi` itself which jumps across the
    /// negative real axis.
    pub fn re_phi(&self, z: Complex64) -> f64 {
        let x2 = self.x * self.x;
        z.norm().ln() + self.c() * (Complex64::new(1.0, 0.0) - x2 * z).norm().ln()
    }

    /// Tilted exponent ratio `c + gamma / (2n)` entering `phi~`.
    pub fn c_tilde(&self) -> Complex64 {
        Complex64::new(self.c(), 0.0) + self.gamma / (2.0 * self.n as f64)
    }

    /// Tilted phase `phi~(z) = log z + (c + gamma/(2n)) log(1 - x^2 z)`.
    pub fn phi_tilde(&self, z: Complex64) -> Complex64 {
        z.ln() + self.c_tilde() * (Complex64::new(1.0, 0.0) - self.x * self.x * z).ln()
    }

    /// `phi~'(z) = 1/z - (c + gamma/(2n)) x^2 / (1 - x^2 z)`.
    pub fn phi_tilde_prime(&self, z: Complex64) -> Complex64 {
        let x2 = self.x * self.x;
        1.0 / z - self.c_tilde() * x2 / (Complex64::new(1.0, 0.0) - x2 * z)
    }

    /// `exp(n phi~(z)) = z^n (1 - x^2 z)^(alpha + gamma/2)`.
    ///
    /// Single-valued across the negative real axis (the `log z` jump is an
    /// integer multiple of `2 pi i` there); the only genuine cut is
    /// `[x^{-2}, infinity)`.
    pub fn exp_n_phi_tilde(&self, z: Complex64) -> Complex64 {
        let nf = self.n as f64;
        let w = Complex64::new(1.0, 0.0) - self.x * self.x * z;
        (nf * z.ln() + self.contour_exponent() * w.ln()).exp()
    }

    /// Complex log of `exp(n phi~(z))`, i.e. `n phi~(z)` up to an integer
    /// multiple of `2 pi i`; convenient for log-scale asymptotics.
    pub fn log_exp_n_phi_tilde(&self, z: Complex64) -> Complex64 {
        let nf = self.n as f64;
        let w = Complex64::new(1.0, 0.0) - self.x * self.x * z;
        nf * z.ln() + self.contour_exponent() * w.ln()
    }

    // ----------------------------------------------------------------
    // Saddle data
    // ----------------------------------------------------------------

    /// Critical point `z0 = 1 / (x^2 (1 + c))` of `phi`. Requires `x > 0`.
    pub fn saddle_z0(&self) -> Result<f64> {
        if self.x == 0.0 {
            return Err(Error::Domain(
                "the phase function has no finite critical point at x = 0".into(),
            ));
        }
        Ok(1.0 / (self.x * self.x * (1.0 + self.c())))
    }

    /// Exponential rate `ell(r) = log r + c log(1 - x^2 r)` along the real
    /// axis; requires `0 < r < x^{-2}` (or just `r > 0` when `x = 0`).
    pub fn ell(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(Error::Domain(format!("ell requires r > 0, got {r}")));
        }
        let x2 = self.x * self.x;
        let w = 1.0 - x2 * r;
        if w <= 0.0 {
            return Err(Error::Domain(format!(
                "ell requires r < x^(-2) = {}, got {r}",
                1.0 / x2
            )));
        }
        Ok(r.ln() + self.c() * w.ln())
    }

    /// Saddle report: `z0`, `phi(z0)`, `phi''(z0)`.
    ///
    /// `phi''(z0)` is negative real, so steepest descent through `z0` runs
    /// parallel to the imaginary axis.
    pub fn saddle(&self) -> Result<SaddlePoint> {
        let z0 = self.saddle_z0()?;
        let z0c = Complex64::new(z0, 0.0);
        let c = self.c();
        // Closed form: phi''(z0) = -(1 + c)^3 x^4 / c.
        let x2 = self.x * self.x;
        let closed = -(1.0 + c).powi(3) * x2 * x2 / c;
        Ok(SaddlePoint {
            z0,
            phi_at_z0: self.phi(z0c),
            phi_pp_at_z0: closed,
        })
    }
}

/// Critical-point data of the phase function on `(0, x^{-2})`.
#[derive(Debug, Clone, Copy)]
pub struct SaddlePoint {
    /// Location of the critical point on the positive real axis.
    pub z0: f64,
    /// Value `phi(z0)` (real, since `0 < z0 < x^{-2}`).
    pub phi_at_z0: Complex64,
    /// Second derivative `phi''(z0) = -(1 + c)^3 x^4 / c` (negative real).
    pub phi_pp_at_z0: f64,
}

/// Distance from `z` to the real segment `[a, b]`.
pub fn dist_to_real_segment(z: Complex64, a: f64, b: f64) -> f64 {
    let t = z.re.clamp(a, b);
    (z - Complex64::new(t, 0.0)).norm()
}

/// Distance from `z` to the real ray `[a, infinity)`.
pub fn dist_to_real_ray(z: Complex64, a: f64) -> f64 {
    let t = z.re.max(a);
    (z - Complex64::new(t, 0.0)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constructor_validates_inputs() {
        assert!(ModelParams::new_real(0, 5, 1.0, 0.3).is_err());
        assert!(ModelParams::new_real(5, 5, 1.0, 0.3).is_err());
        assert!(ModelParams::new_real(5, 4, 1.0, 0.3).is_err());
        assert!(ModelParams::new_real(5, 9, -2.0, 0.3).is_err());
        assert!(ModelParams::new_real(5, 9, -2.5, 0.3).is_err());
        assert!(ModelParams::new_real(5, 9, 1.0, 1.0).is_err());
        assert!(ModelParams::new_real(5, 9, 1.0, -0.1).is_err());
        assert!(ModelParams::new_real(5, 9, f64::NAN, 0.3).is_err());
        let p = ModelParams::new_real(5, 9, -1.9, 0.0).unwrap();
        assert_eq!(p.alpha(), 4.0);
        assert_eq!(p.mu(), 5.0 / 9.0);
    }

    #[test]
    fn phase_derivatives_match_finite_differences() {
        let p = ModelParams::new_real(10, 25, 1.3, 0.4).unwrap();
        let pts = [c64(0.7, 0.9), c64(-1.2, 0.5), c64(2.0, -1.0), c64(0.2, 3.0)];
        let h = 1e-5;
        for &z in &pts {
            // Central differences in two directions, compared against the
            // closed-form derivatives.
            let fd1 = (p.phi(z + c64(h, 0.0)) - p.phi(z - c64(h, 0.0))) / (2.0 * h);
            assert!((fd1 - p.phi_prime(z)).norm() < 1e-8 * p.phi_prime(z).norm().max(1.0));
            let fd1i = (p.phi(z + c64(0.0, h)) - p.phi(z - c64(0.0, h))) / c64(0.0, 2.0 * h);
            assert!((fd1i - p.phi_prime(z)).norm() < 1e-8 * p.phi_prime(z).norm().max(1.0));
            let fd2 = (p.phi_prime(z + c64(h, 0.0)) - p.phi_prime(z - c64(h, 0.0))) / (2.0 * h);
            assert!((fd2 - p.phi_double_prime(z)).norm() < 1e-7 * p.phi_double_prime(z).norm().max(1.0));

            let fdt = (p.phi_tilde(z + c64(h, 0.0)) - p.phi_tilde(z - c64(h, 0.0))) / (2.0 * h);
            assert!((fdt - p.phi_tilde_prime(z)).norm() < 1e-8 * p.phi_tilde_prime(z).norm().max(1.0));
        }
    }

    #[test]
    fn saddle_is_a_critical_point_with_known_curvature() {
        for (n, big_n, x) in [(10usize, 25usize, 0.4f64), (7, 9, 0.77), (40, 80, 0.3)] {
            let p = ModelParams::new_real(n, big_n, 0.9, x).unwrap();
            let s = p.saddle().unwrap();
            let z0 = c64(s.z0, 0.0);
            assert!(p.phi_prime(z0).norm() < 1e-13, "phi'(z0) = {}", p.phi_prime(z0));
            // Closed-form curvature against the generic second derivative.
            assert_abs_diff_eq!(
                s.phi_pp_at_z0,
                p.phi_double_prime(z0).re,
                epsilon = 1e-12 * s.phi_pp_at_z0.abs()
            );
            assert!(p.phi_double_prime(z0).im.abs() < 1e-14 * s.phi_pp_at_z0.abs());
            assert!(s.phi_pp_at_z0 < 0.0);
            // ell has its maximum at z0: finite-difference gradient vanishes.
            let h = 1e-6 * s.z0;
            let dl = (p.ell(s.z0 + h).unwrap() - p.ell(s.z0 - h).unwrap()) / (2.0 * h);
            assert!(dl.abs() < 1e-8);
        }
        assert!(ModelParams::new_real(5, 9, 1.0, 0.0).unwrap().saddle().is_err());
    }

    #[test]
    fn h_factor_normalization_and_jump() {
        let p = ModelParams::new_real(6, 11, 1.0, 0.3).unwrap();
        // h -> 1 at infinity.
        assert!((p.h_factor(c64(1e9, 1e9)) - c64(1.0, 0.0)).norm() < 1e-8);
        // Jump across the cut (0, 1): the two one-sided limits differ by the
        // phase exp(i pi gamma); for gamma = 1 the ratio is -1.
        let t = 0.37;
        let eps = 1e-9;
        let above = p.h_factor(c64(t, eps));
        let below = p.h_factor(c64(t, -eps));
        let ratio = above / below;
        assert!((ratio - c64(-1.0, 0.0)).norm() < 1e-6, "ratio = {ratio}");
        // Continuous across (1, inf) and (-inf, 0).
        let a = p.h_factor(c64(1.5, 1e-12));
        let b = p.h_factor(c64(1.5, -1e-12));
        assert!((a - b).norm() < 1e-9);
        let a = p.h_factor(c64(-0.8, 1e-12));
        let b = p.h_factor(c64(-0.8, -1e-12));
        assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn contour_weight_guards_both_cuts() {
        let p = ModelParams::new_real(6, 11, 1.5, 0.5).unwrap();
        assert!(matches!(
            p.contour_weight(c64(0.5, 0.0)),
            Err(Error::CutProximity(_))
        ));
        // x^{-2} = 4: anything on [4, inf) is on the power-factor cut.
        assert!(matches!(
            p.contour_weight(c64(5.0, 0.0)),
            Err(Error::CutProximity(_))
        ));
        // Off-cut points evaluate fine.
        assert!(p.contour_weight(c64(0.5, 0.5)).is_ok());
        assert!(p.contour_weight(c64(-3.0, 0.0)).is_ok());
        assert!(p.contour_weight(c64(2.0, 0.0)).is_ok());
    }

    #[test]
    fn exp_n_phi_tilde_is_single_valued_off_the_power_cut() {
        let p = ModelParams::new_real(9, 14, 0.7, 0.45).unwrap();
        // Across the negative real axis the principal log of z jumps, but
        // the exponentiated phase must not (integer n).
        let above = p.exp_n_phi_tilde(c64(-1.7, 1e-12));
        let below = p.exp_n_phi_tilde(c64(-1.7, -1e-12));
        assert!((above - below).norm() < 1e-9 * above.norm());
        // And it agrees with the direct product z^n (1 - x^2 z)^(a + g/2).
        let z = c64(-2.3, 0.8);
        let direct = z.powi(9)
            * ((Complex64::new(1.0, 0.0) - p.x() * p.x() * z).ln() * p.contour_exponent()).exp();
        let got = p.exp_n_phi_tilde(z);
        assert!((got - direct).norm() < 1e-13 * direct.norm());
        // At z = 1 it collapses to (1 - x^2)^(alpha + gamma/2).
        let at1 = p.exp_n_phi_tilde(c64(1.0, 0.0));
        let want = (1.0 - p.x() * p.x()).powf(p.alpha() + 0.35);
        assert!((at1 - c64(want, 0.0)).norm() < 1e-14 * want);
    }

    #[test]
    fn planar_weight_positive_and_guarded() {
        let p = ModelParams::new_real(6, 11, 2.0, 0.3).unwrap();
        let w = p.planar_weight(c64(0.2, 0.4)).unwrap();
        assert!(w.im.abs() < 1e-300 && w.re > 0.0);
        assert!(p.planar_weight(c64(1.0, 0.0)).is_err());
        assert!(p.planar_weight(c64(0.3, 0.0)).is_err());
    }

    #[test]
    fn segment_and_ray_distances() {
        assert_abs_diff_eq!(dist_to_real_segment(c64(0.5, 0.3), 0.0, 1.0), 0.3);
        assert_abs_diff_eq!(dist_to_real_segment(c64(-3.0, 4.0), 0.0, 1.0), 5.0);
        assert_abs_diff_eq!(dist_to_real_segment(c64(2.0, 0.0), 0.0, 1.0), 1.0);
        assert_abs_diff_eq!(dist_to_real_ray(c64(3.0, 1.0), 4.0), 2.0f64.sqrt());
        assert_abs_diff_eq!(dist_to_real_ray(c64(7.0, -2.0), 4.0), 2.0);
    }

    proptest! {
        // Schwarz symmetry: for real gamma the contour weight satisfies
        // w(conj z) = conj(w(z)), and Re phi is symmetric about the real axis.
        #[test]
        fn weight_schwarz_symmetry(
            re in -3.0f64..3.0,
            im in 0.01f64..3.0,
            x in 0.05f64..0.9,
            gamma in -1.9f64..4.0,
            n in 2usize..30,
            extra in 1usize..20,
        ) {
            let p = ModelParams::new_real(n, n + extra, gamma, x).unwrap();
            let z = c64(re, im);
            if let (Ok(w_up), Ok(w_dn)) = (p.contour_weight(z), p.contour_weight(z.conj())) {
                let scale = w_up.norm().max(1e-300);
                prop_assert!((w_dn - w_up.conj()).norm() <= 1e-12 * scale);
            }
            prop_assert!((p.re_phi(z) - p.re_phi(z.conj())).abs() <= 1e-12 * p.re_phi(z).abs().max(1.0));
        }

        // Off both cuts, re_phi agrees with the real part of phi.
        #[test]
        fn re_phi_matches_phi(
            re in -3.0f64..3.0,
            im in 0.05f64..3.0,
            x in 0.05f64..0.9,
            n in 2usize..30,
            extra in 1usize..20,
        ) {
            let p = ModelParams::new_real(n, n + extra, 1.0, x).unwrap();
            let z = c64(re, im);
            prop_assert!((p.re_phi(z) - p.phi(z).re).abs() <= 1e-12 * p.phi(z).re.abs().max(1.0));
        }
    }
}
