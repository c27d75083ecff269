//! Barnes G-function (double gamma) on the complex plane.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::num::CompensatedC;
use crate::specfun::ln_gamma;

/// `ln A` where `A` is the Glaisher-Kinkelin constant
/// (`ln A = 1/12 - zeta'(-1)`).
pub const LOG_GLAISHER: f64 = 0.248754477033784262552;

/// `log G(z)` for the Barnes G-function, normalized by `G(1) = G(2) = 1`
/// and the recursion `G(z + 1) = Gamma(z) G(z)`.
///
/// Computed from the large-argument expansion after shifting `z` to the
/// right with the recursion; like [`ln_gamma`], the imaginary part is only
/// defined up to the branch choices made by the shift, and
/// `exp(log_barnes_g(z))` is always the function value. Errors at the zeros
/// of `G` (nonpositive integers).
pub fn log_barnes_g(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(Error::Domain(format!("Barnes G vanishes at z = {}", z.re)));
    }
    let m = if z.re >= 31.0 {
        0
    } else {
        (31.0 - z.re).ceil() as usize
    };
    // G(z) = G(z + m) / prod_{j=0}^{m-1} Gamma(z + j).
    let mut shift = CompensatedC::new();
    for j in 0..m {
        shift.add(ln_gamma(z + j as f64)?);
    }
    Ok(asymptotic_log_g(z + m as f64) - shift.value())
}

/// Large-argument expansion of `log G(Z)` written in `w = Z - 1`:
///
/// ```text
/// log G(1 + w) = w^2/2 log w - 3 w^2/4 + w/2 log(2 pi) - 1/12 log w
///               + zeta'(-1) + sum_k B_{2k+2} / (4 k (k+1) w^{2k}).
/// ```
fn asymptotic_log_g(z: Complex64) -> Complex64 {
    // B_{2k+2} / (4 k (k+1)) for k = 1..=9 (B_4 through B_20).
    let coef: [f64; 9] = [
        -1.0 / 240.0,
        1.0 / 1008.0,
        -1.0 / 1440.0,
        1.0 / 1056.0,
        -691.0 / 327_600.0,
        1.0 / 144.0,
        -3617.0 / 114_240.0,
        43_867.0 / 229_824.0,
        -174_611.0 / 118_800.0,
    ];
    let w = z - 1.0;
    let lw = w.ln();
    let zeta_prime_m1 = 1.0 / 12.0 - LOG_GLAISHER;
    let mut s = 0.5 * w * w * lw - 0.75 * w * w + 0.5 * w * (2.0 * std::f64::consts::PI).ln()
        - lw / 12.0
        + zeta_prime_m1;
    let w2 = 1.0 / (w * w);
    let mut p = w2;
    for c in coef {
        s += c * p;
        p *= w2;
    }
    s
}
