//! Closed-form large-`n` approximations and the machinery to check them.
//!
//! Four families live here:
//!
//! * **Region formulas** for the rescaled monic polynomials
//!   ([`pn_asymptotic`]), keyed by the [`Region`] labels produced in
//!   [`crate::geometry`]: a pure power–type formula outside the unit-level
//!   curve, an endpoint formula inside it, their sum on the transition
//!   band, and an entire critical-disc formula near `z = 1`.
//! * **Regime formulas** for the auxiliary Cauchy-type contour integral
//!   the polynomials reduce to ([`integral_asymptotic`]), together with a
//!   plain quadrature evaluation of the same integral
//!   ([`integral_direct`]) so every formula can be checked against the
//!   object it approximates.
//! * The **moment prefactor expansion** [`rgamma_asymptotic`] for the
//!   absolute moment of the characteristic polynomial, and the matching
//!   centering/scaling map [`clt_standardize`].
//! * Batch **comparison helpers** ([`comparison_rows`]) that evaluate
//!   exact and asymptotic values side by side for table export.
//!
//! Everything is carried in log scale (`log_value.re` is the
//! log-modulus, `log_value.im` the accumulated phase) because `z^n` and
//! `exp(n Re phi)` leave the double range near `n ~ 200`. All logarithms
//! are principal. The critical-disc and critical-regime formulas are
//! assembled from the entire series
//!
//! ```text
//! K(s, xi) = sum_{k >= 0} xi^k / Gamma(s + k + 1),
//! ```
//!
//! ([`kummer_ratio`]) rather than from incomplete-gamma factors with
//! their `xi^{-s}` companions: the two branch cuts of those factors
//! cancel identically, and using the combined entire function keeps the
//! formula single-valued across `z < 1`, matching the entire function it
//! approximates. An alternative convention that replaces the lower
//! incomplete gamma with an upper one (see [`GammaConvention`]) is kept
//! behind a switch purely so it can be compared against the direct
//! integral; the lower form is the one consistent with quadrature on
//! both sides of the critical point.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{trace_gamma, Classifier, Component, Region, RegionLabel};
use crate::linalg::horner;
use crate::model::ModelParams;
use crate::num::{log_add_exp, CompensatedC};
use crate::orthopoly::PolyPair;
use crate::quadrature::{contour_integral, ContourGrid, QuadResult};
use crate::specfun;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Left edge of the direct-series window for [`kummer_ratio`]: further
/// left the alternating series cancels catastrophically, so the routine
/// switches to the regularized incomplete-gamma route.
const KUMMER_SERIES_RE_MIN: f64 = -8.0;

/// Modulus edge of the direct-series window for [`kummer_ratio`].
const KUMMER_SERIES_NORM_MAX: f64 = 40.0;

/// Term cap for the direct series in [`kummer_ratio`].
const KUMMER_MAX_TERMS: usize = 4000;

// --------------------------------------------------------------------
// Prediction types
// --------------------------------------------------------------------

/// Error order attached to a prediction: the relative error of the
/// formula on its region, as a power of `1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorOrder {
    /// Relative error `O(1/n)`.
    InverseN,
    /// Relative error smaller than any power of `1/n`.
    SuperPolynomial,
}

/// Which formula produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionKind {
    /// Polynomial, exterior of the unit-level curve.
    PolyExterior,
    /// Polynomial, interior of the unit-level curve.
    PolyInterior,
    /// Polynomial, transition band around the curve (sum of the two).
    PolyTransition,
    /// Polynomial, critical disc `|z - 1| = O(1/n)`.
    PolyCritical,
    /// Contour integral, evaluation point inside the contour.
    IntegralInterior,
    /// Contour integral, critical scaling `z = 1 - a / (n phi'(1))`.
    IntegralCritical,
    /// Contour integral, evaluation point outside the contour.
    IntegralExterior,
}

/// A log-scale asymptotic value plus everything needed to audit it.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticPrediction {
    /// Complex log of the predicted value; `re = -inf` encodes zero.
    pub log_value: Complex64,
    pub kind: PredictionKind,
    pub error_order: ErrorOrder,
    /// Evaluation point the prediction was made at.
    pub z: Complex64,
    pub n: usize,
    pub big_n: usize,
    pub gamma: Complex64,
    pub x: f64,
    /// Set when a `Gamma(gamma/2)` pole turned a constituent term into
    /// its analytic continuation, i.e. zero. For the interior formula
    /// the whole prediction is then zero; on the transition band only
    /// the endpoint term drops out.
    pub gamma_pole: bool,
}

impl AsymptoticPrediction {
    /// The predicted value on the linear scale (`0` when the log-scale
    /// value encodes a continued zero).
    pub fn value(&self) -> Complex64 {
        self.log_value.exp()
    }

    /// `|prediction / reference - 1|`, computed in log scale so that
    /// values far outside the double range still compare cleanly.
    pub fn relative_gap(&self, reference: Complex64) -> f64 {
        if reference == Complex64::new(0.0, 0.0) {
            return if self.log_value.re == f64::NEG_INFINITY {
                0.0
            } else {
                f64::INFINITY
            };
        }
        ((self.log_value - reference.ln()).exp() - ONE).norm()
    }
}

/// Incomplete-gamma convention for the critical regime of the contour
/// integral. The two are *not* equal: only the lower form agrees with
/// direct quadrature of the integral on both sides of the critical
/// point, which is why it is the default everywhere. The upper form is
/// retained so the disagreement itself can be measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaConvention {
    /// Entire lower-incomplete-gamma form, via [`kummer_ratio`].
    #[default]
    LowerConsistent,
    /// Upper-incomplete-gamma form `e^{i pi gamma/2} a^{-gamma/2} e^{-a}
    /// Gamma(gamma/2, a) / Gamma(gamma/2)`, evaluated literally.
    PrintedUpper,
}

/// Regime selector for [`integral_asymptotic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Evaluation point strictly inside the contour, away from `z = 1`.
    Interior,
    /// Critical scaling `z = 1 - a / (n phi'(1))` with `a` off the
    /// nonnegative real ray.
    Critical { a: Complex64 },
    /// Evaluation point strictly outside the contour.
    Exterior,
}

// --------------------------------------------------------------------
// Shared scalar helpers
// --------------------------------------------------------------------

/// `phi'(1) = (1 - (1 + c) x^2) / (1 - x^2)` as a real number, with the
/// strong-regime check `phi'(1) > 0` (equivalently `x^2 < n/N`, i.e. the
/// critical point `z0` of `phi` lies beyond `1`). All asymptotics in
/// this module require it.
pub fn phi_prime_one(p: &ModelParams) -> Result<f64> {
    let x2 = p.x() * p.x();
    let v = (1.0 - (1.0 + p.c()) * x2) / (1.0 - x2);
    if !(v > 0.0) {
        return Err(Error::Domain(format!(
            "asymptotics require the strong regime phi'(1) > 0, i.e. x^2 < n/N; \
             got phi'(1) = {v:.3e} at x = {}, n/N = {:.6}",
            p.x(),
            p.mu()
        )));
    }
    Ok(v)
}

fn gamma_half(p: &ModelParams) -> Complex64 {
    p.gamma() / 2.0
}

/// True when `Gamma(s)` has a pole, i.e. `s` is a nonpositive integer on
/// the real axis. With the parameter domain `Re gamma > -2` only
/// `gamma = 0` can trigger this.
fn is_gamma_pole(s: Complex64) -> bool {
    s.im == 0.0 && s.re <= 0.0 && s.re == s.re.round()
}

/// Real `ln(1 - x^2)`.
fn ln_one_minus_x2(p: &ModelParams) -> f64 {
    (1.0 - p.x() * p.x()).ln()
}

/// Complex log of the weight prefactor `(1 - x^2 z)^{alpha + gamma/2}`
/// dividing the contour integral to give the polynomial.
fn log_weight_prefactor(p: &ModelParams, z: Complex64) -> Complex64 {
    p.contour_exponent() * (ONE - p.x() * p.x() * z).ln()
}

// --------------------------------------------------------------------
// The entire critical kernel
// --------------------------------------------------------------------

/// The entire function `K(s, xi) = sum_{k>=0} xi^k / Gamma(s + k + 1)`.
///
/// Equivalently `e^xi xi^{-s} gamma(s, xi) / Gamma(s)` with the branch
/// cuts of the two factors cancelled; unlike that product it is entire
/// in both variables, reduces to `e^xi` at `s = 0`, and needs no cut
/// bookkeeping on `xi < 0`. Evaluation: direct series on a window
/// around the origin where cancellation is bounded; elsewhere via the
/// regularized lower incomplete gamma, whose left-half-plane series
/// carries the exponential growth without cancellation.
pub fn kummer_ratio(s: Complex64, xi: Complex64) -> Result<Complex64> {
    if !(s.is_finite() && xi.is_finite()) {
        return Err(Error::Domain(
            "kummer_ratio requires finite arguments".into(),
        ));
    }
    if xi.re < KUMMER_SERIES_RE_MIN || xi.norm() > KUMMER_SERIES_NORM_MAX {
        if xi.re < -700.0 {
            return Err(Error::Convergence(
                "kummer_ratio: left-plane exponential scale exceeds the double range".into(),
            ));
        }
        // K = exp(xi - s Log xi) P(s, xi); the principal powers in P and
        // in the prefactor cancel exactly, entire result included on the
        // negative axis where both sides use the limit from above.
        let reg = specfun::reg_lower(s, xi)?;
        return Ok((xi - s * xi.ln() + reg.ln()).exp());
    }
    let mut term = specfun::recip_gamma(s + ONE);
    let mut acc = CompensatedC::new();
    acc.add(term);
    let mut peak = acc.value().norm();
    for k in 0..KUMMER_MAX_TERMS {
        term = term * xi / (s + k as f64 + 1.0);
        acc.add(term);
        peak = peak.max(acc.value().norm());
        if k as f64 > xi.norm() && term.norm() <= 1e-18 * peak.max(1e-300) {
            return Ok(acc.value());
        }
    }
    Err(Error::Convergence(
        "kummer_ratio series did not converge".into(),
    ))
}

// --------------------------------------------------------------------
// Core log-scale terms (contour-integral normalization)
// --------------------------------------------------------------------

/// Log of the residue term `exp(n phi~(z)) (z/(z-1))^{gamma/2}`: the
/// contribution of the evaluation-point pole of the integrand.
fn log_residue_core(p: &ModelParams, z: Complex64) -> Complex64 {
    p.log_exp_n_phi_tilde(z) - gamma_half(p) * (ONE - 1.0 / z).ln()
}

/// Log of the endpoint term
/// `(n phi'(1))^{gamma/2 - 1} (1 - x^2)^{alpha + gamma/2}
///  / ((1 - z) Gamma(gamma/2))`:
/// the contribution of the integrand's cut endpoint at `1`, by Watson's
/// lemma on the collapsed cut. Returns the flag for the continued zero
/// at the `Gamma(gamma/2)` poles.
fn log_endpoint_core(
    p: &ModelParams,
    z: Complex64,
    phi1: f64,
) -> Result<(Complex64, bool)> {
    let s = gamma_half(p);
    if is_gamma_pole(s) {
        return Ok((Complex64::new(f64::NEG_INFINITY, 0.0), true));
    }
    let nf = p.n() as f64;
    let l = (s - ONE) * (nf * phi1).ln() + p.contour_exponent() * ln_one_minus_x2(p)
        - (ONE - z).ln()
        - specfun::ln_gamma(s)?;
    Ok((l, false))
}

/// Log of the critical kernel
/// `(1 - x^2)^{alpha + gamma/2} (n phi'(1))^{gamma/2} K(gamma/2, xi)`
/// with `xi = n phi'(1) (z - 1)`; entire in `xi`, no flag needed (at
/// `gamma = 0` it degenerates smoothly to `e^xi` times the prefactor).
fn log_critical_core(p: &ModelParams, xi: Complex64, phi1: f64) -> Result<Complex64> {
    let s = gamma_half(p);
    let nf = p.n() as f64;
    let k = kummer_ratio(s, xi)?;
    Ok(s * (nf * phi1).ln() + p.contour_exponent() * ln_one_minus_x2(p) + k.ln())
}

// --------------------------------------------------------------------
// Polynomial asymptotics
// --------------------------------------------------------------------

/// Asymptotic value of the monic planar polynomial `P_n` at `z`, using
/// the formula selected by `label.region`.
///
/// Preconditions: the strong regime `phi'(1) > 0`, and `z` away from the
/// points where the selected formula is singular (`z = 0, 1` for the
/// exterior formula's logs; the region labels produced by
/// [`Classifier::classify`] guarantee this).
///
/// A pole of `Gamma(gamma/2)` (only `gamma = 0` in the domain) is not an
/// error: the affected term continues analytically to zero and the
/// prediction is flagged via `gamma_pole`.
pub fn pn_asymptotic(
    z: Complex64,
    p: &ModelParams,
    label: RegionLabel,
) -> Result<AsymptoticPrediction> {
    let phi1 = phi_prime_one(p)?;
    let nf = p.n() as f64;
    let wlog = log_weight_prefactor(p, z);
    let (core, kind, order, pole) = match label.region {
        Region::ExtGamma1 => (
            log_residue_core(p, z),
            PredictionKind::PolyExterior,
            ErrorOrder::SuperPolynomial,
            false,
        ),
        Region::IntGamma1 => {
            let (e, flag) = log_endpoint_core(p, z, phi1)?;
            (e, PredictionKind::PolyInterior, ErrorOrder::InverseN, flag)
        }
        Region::NbhdU => {
            let t1 = log_residue_core(p, z);
            let (e, flag) = log_endpoint_core(p, z, phi1)?;
            let l = if flag { t1 } else { log_add_exp(t1, e) };
            (l, PredictionKind::PolyTransition, ErrorOrder::InverseN, flag)
        }
        Region::Disc1 => {
            let xi = nf * phi1 * (z - ONE);
            (
                log_critical_core(p, xi, phi1)?,
                PredictionKind::PolyCritical,
                ErrorOrder::InverseN,
                false,
            )
        }
    };
    Ok(AsymptoticPrediction {
        log_value: core - wlog,
        kind,
        error_order: order,
        z,
        n: p.n(),
        big_n: p.big_n(),
        gamma: p.gamma(),
        x: p.x(),
        gamma_pole: pole,
    })
}

// --------------------------------------------------------------------
// Contour-integral asymptotics
// --------------------------------------------------------------------

/// Asymptotics of the auxiliary integral
/// `J(z) = (1/2 pi i) oint exp(n phi~(s)) h_{-gamma}(s) / (s - z) ds`
/// over a closed level curve between the cut `[0, 1]` and the critical
/// point of `phi`, in the requested regime, using the default
/// (quadrature-consistent) incomplete-gamma convention.
pub fn integral_asymptotic(
    z: Complex64,
    p: &ModelParams,
    regime: Regime,
) -> Result<AsymptoticPrediction> {
    integral_asymptotic_with(z, p, regime, GammaConvention::LowerConsistent)
}

/// [`integral_asymptotic`] with an explicit incomplete-gamma convention
/// for the critical regime (the convention is irrelevant elsewhere).
///
/// In the critical regime the caller supplies both `z` and the scaled
/// parameter `a`; they must satisfy `z = 1 - a / (n phi'(1))` to within
/// `1e-8`, and `a` must avoid the nonnegative real ray (on it the
/// integral itself is fine but the scaling parametrization degenerates;
/// approach it from either half-plane instead, or use the entire lower
/// form which extends continuously onto the ray).
pub fn integral_asymptotic_with(
    z: Complex64,
    p: &ModelParams,
    regime: Regime,
    convention: GammaConvention,
) -> Result<AsymptoticPrediction> {
    let phi1 = phi_prime_one(p)?;
    let nf = p.n() as f64;
    let (log_value, kind, order, pole) = match regime {
        Regime::Interior => {
            let t1 = log_residue_core(p, z);
            let (e, flag) = log_endpoint_core(p, z, phi1)?;
            let l = if flag { t1 } else { log_add_exp(t1, e) };
            (l, PredictionKind::IntegralInterior, ErrorOrder::InverseN, flag)
        }
        Regime::Critical { a } => {
            if a.im == 0.0 && a.re >= 0.0 {
                return Err(Error::Domain(
                    "critical regime: the scaled parameter a must avoid [0, inf)".into(),
                ));
            }
            let implied = ONE - a / (nf * phi1);
            if (z - implied).norm() > 1e-8 * (1.0 + z.norm()) {
                return Err(Error::Domain(format!(
                    "critical regime: z = {z} is not 1 - a/(n phi'(1)) = {implied} \
                     for a = {a}"
                )));
            }
            let l = match convention {
                GammaConvention::LowerConsistent => log_critical_core(p, -a, phi1)?,
                GammaConvention::PrintedUpper => {
                    let s = gamma_half(p);
                    if is_gamma_pole(s) {
                        return Err(Error::Pole(
                            "the upper-incomplete convention is undefined at the \
                             Gamma(gamma/2) poles (gamma = 0)"
                                .into(),
                        ));
                    }
                    Complex64::new(0.0, PI) * s + s * (nf * phi1).ln() - s * a.ln() - a
                        + specfun::upper_gamma(s, a)?.ln()
                        - specfun::ln_gamma(s)?
                        + p.contour_exponent() * ln_one_minus_x2(p)
                }
            };
            (l, PredictionKind::IntegralCritical, ErrorOrder::InverseN, false)
        }
        Regime::Exterior => {
            let (e, flag) = log_endpoint_core(p, z, phi1)?;
            (e, PredictionKind::IntegralExterior, ErrorOrder::InverseN, flag)
        }
    };
    Ok(AsymptoticPrediction {
        log_value,
        kind,
        error_order: order,
        z,
        n: p.n(),
        big_n: p.big_n(),
        gamma: p.gamma(),
        x: p.x(),
        gamma_pole: pole,
    })
}

/// A radius strictly between `1` and the critical point of `phi`,
/// suitable as the `t` of [`integral_direct`]: the geometric mean
/// `sqrt(z0)` for `x > 0`, and `3/2` for `x = 0` where there is no
/// upper constraint.
pub fn default_contour_radius(p: &ModelParams) -> Result<f64> {
    if p.x() == 0.0 {
        return Ok(1.5);
    }
    phi_prime_one(p)?;
    Ok(p.saddle_z0()?.sqrt())
}

/// Direct trapezoid evaluation of the auxiliary integral `J(z)` over the
/// traced level curve through `t` (required: `1 < t <` the critical
/// point of `phi` for `x > 0`, `t > 1` for `x = 0`), with `node_count`
/// starting nodes. The result is the integral divided by `2 pi i`; its
/// `error_estimate` is scaled the same way.
pub fn integral_direct(
    z: Complex64,
    p: &ModelParams,
    t: f64,
    node_count: usize,
) -> Result<QuadResult> {
    if !(t > 1.0) {
        return Err(Error::Domain(format!(
            "contour radius t = {t} must exceed 1"
        )));
    }
    if p.x() > 0.0 {
        let z0 = p.saddle_z0()?;
        if t >= z0 {
            return Err(Error::Domain(format!(
                "contour radius t = {t} must stay below the critical point z0 = {z0:.6}"
            )));
        }
    }
    let curve = trace_gamma(p, t, node_count, Component::Inner)?;
    if curve.distance_to(z) < 1e-7 {
        return Err(Error::Domain(
            "evaluation point sits on the integration contour".into(),
        ));
    }
    let grid = ContourGrid::from_level_curve(&curve);
    let raw = contour_integral(
        |s| p.exp_n_phi_tilde(s) / p.h_factor(s) / (s - z),
        &grid,
    );
    Ok(QuadResult {
        value: raw.value / Complex64::new(0.0, 2.0 * PI),
        error_estimate: raw.error_estimate / (2.0 * PI),
        nodes: raw.nodes,
    })
}

// --------------------------------------------------------------------
// Moment asymptotics and CLT standardization
// --------------------------------------------------------------------

/// Centering constant `kappa_1 = n ln(mu) + alpha ln((1 - mu)/(1 - x^2))`
/// of the log-modulus of the characteristic polynomial (`mu = n/N`).
pub fn kappa1(p: &ModelParams) -> f64 {
    let nf = p.n() as f64;
    nf * p.mu().ln() + p.alpha() * ((1.0 - p.mu()).ln() - (1.0 - p.x() * p.x()).ln())
}

/// Leading large-`n` expansion of the log of the absolute moment
/// `R_gamma(x)`:
///
/// ```text
/// log R = (gamma^2/8) ln n + (gamma/2) kappa_1
///       + (gamma/4) ln 2 pi - ln G(1 + gamma/2)
///       + (gamma^2/4) ( (1/2) ln(1 - mu) - ln(1 - x^2) ) + O(1/n),
/// ```
///
/// with `G` the Barnes function. Requires real `gamma` and the strong
/// regime `x^2 < mu`.
pub fn rgamma_asymptotic(p: &ModelParams) -> Result<f64> {
    if p.gamma().im != 0.0 {
        return Err(Error::Domain(
            "the moment expansion is defined for real gamma".into(),
        ));
    }
    phi_prime_one(p)?;
    let g = p.gamma().re;
    let nf = p.n() as f64;
    let log_c = 0.25 * g * (2.0 * PI).ln()
        - specfun::log_barnes_g(Complex64::new(1.0 + 0.5 * g, 0.0))?.re
        + 0.25 * g * g * (0.5 * (1.0 - p.mu()).ln() - ln_one_minus_x2(p));
    Ok(0.125 * g * g * nf.ln() + 0.5 * g * kappa1(p) + log_c)
}

/// Standardize a log-modulus of the characteristic polynomial to the
/// CLT scale: `(log|det| - kappa_1/2) / ((1/2) sqrt(ln n))`.
/// Precondition: `n >= 2` (the scale degenerates at `n = 1`).
pub fn clt_standardize(log_abs_det: f64, p: &ModelParams) -> f64 {
    let nf = p.n() as f64;
    (log_abs_det - 0.5 * kappa1(p)) / (0.5 * nf.ln().sqrt())
}

// --------------------------------------------------------------------
// Side-by-side comparison rows
// --------------------------------------------------------------------

/// One exact-versus-asymptotic comparison at a point.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonRow {
    pub z: Complex64,
    pub region: Region,
    /// Complex log of the exact monic polynomial value.
    pub exact_log: Complex64,
    /// Complex log of the asymptotic prediction.
    pub asy_log: Complex64,
    /// `|asy / exact - 1|`.
    pub rel_err: f64,
}

/// Stable lower-case name for a region, for table export.
pub fn region_name(region: Region) -> &'static str {
    match region {
        Region::ExtGamma1 => "ext",
        Region::IntGamma1 => "int",
        Region::NbhdU => "nbhd_u",
        Region::Disc1 => "disc1",
    }
}

/// Evaluate the exact monic polynomial (from `pair`) and the region
/// formula side by side at each point, classifying with `classifier`.
/// `pair` must have degree `p.n()`.
pub fn comparison_rows(
    p: &ModelParams,
    pair: &PolyPair,
    classifier: &Classifier,
    zs: &[Complex64],
) -> Result<Vec<ComparisonRow>> {
    if pair.degree() != p.n() {
        return Err(Error::Domain(format!(
            "polynomial degree {} does not match n = {}",
            pair.degree(),
            p.n()
        )));
    }
    zs.par_iter()
        .map(|&z| {
            let label = classifier.classify(z);
            let exact = horner(&pair.p, z);
            let pred = pn_asymptotic(z, p, label)?;
            Ok(ComparisonRow {
                z,
                region: label.region,
                exact_log: exact.ln(),
                asy_log: pred.log_value,
                rel_err: pred.relative_gap(exact),
            })
        })
        .collect()
}

// --------------------------------------------------------------------
