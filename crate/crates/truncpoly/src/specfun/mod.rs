//! Special functions on the complex plane: log-gamma, incomplete gamma,
//! Barnes G, and the few real-argument conveniences built on them.

mod barnes;
mod incgamma;
mod loggamma;

pub use barnes::{log_barnes_g, LOG_GLAISHER};
pub use incgamma::{lower_gamma, reg_lower, reg_lower_real, upper_gamma};
pub use loggamma::{gamma, ln_gamma, recip_gamma};

use num_complex::Complex64;

use crate::error::Result;

/// `log Beta(a, b) = ln Gamma(a) + ln Gamma(b) - ln Gamma(a + b)`.
pub fn ln_beta(a: Complex64, b: Complex64) -> Result<Complex64> {
    Ok(ln_gamma(a)? + ln_gamma(b)? - ln_gamma(a + b)?)
}

/// Standard normal CDF via the regularized lower incomplete gamma.
pub fn normal_cdf(x: f64) -> f64 {
    let p = reg_lower_real(0.5, 0.5 * x * x);
    if x >= 0.0 {
        0.5 * (1.0 + p)
    } else {
        0.5 * (1.0 - p)
    }
}

/// Chi-square CDF with `k` degrees of freedom.
pub fn chi_square_cdf(x: f64, k: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    reg_lower_real(0.5 * k, 0.5 * x)
}
