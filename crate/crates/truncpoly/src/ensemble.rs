//! Monte Carlo side of the model: sampling the `n x n` corner block of
//! an `N x N` Haar unitary, log-determinants of its shifted
//! characteristic polynomial, moment estimates with standard errors,
//! and the empirical CLT of the standardized log-modulus.
//!
//! Sampling is reproducible and order-independent: sample `i` of a run
//! with seed `s` is a pure function of `(s, i)` (one ChaCha stream per
//! index), so results are bitwise stable under different thread counts
//! and a shorter run is a prefix of a longer one.

use ndarray::{s, Array2};
use ndarray_linalg::QR;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::asymptotics::clt_standardize;
use crate::error::{Error, Result};
use crate::linalg::lu_logdet;
use crate::model::ModelParams;
use crate::num::Compensated;
use crate::specfun;

/// Draw the top-left `n x n` block of an `N x N` Haar-distributed
/// unitary matrix.
///
/// The first `n` columns of a Haar unitary form a Haar isometry, which
/// is the Q factor of an `N x n` complex Gaussian matrix once the QR
/// decomposition is normalized to a positive-real R diagonal (without
/// that phase fix the columns carry LAPACK's arbitrary phases and the
/// block is not Haar). The returned block is the first `n` rows of
/// that isometry.
pub fn sample_truncation(
    n: usize,
    big_n: usize,
    rng: &mut impl Rng,
) -> Result<Array2<Complex64>> {
    if n == 0 || big_n < n {
        return Err(Error::Domain(format!(
            "truncation block needs 1 <= n <= N, got n = {n}, N = {big_n}"
        )));
    }
    let mut g = Array2::<Complex64>::zeros((big_n, n));
    for v in g.iter_mut() {
        *v = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    }
    let (mut q, r) = g
        .qr()
        .map_err(|e| Error::Backend(format!("thin QR failed: {e}")))?;
    for j in 0..n {
        let d = r[(j, j)];
        let m = d.norm();
        let phase = if m > 0.0 {
            d / m
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..big_n {
            q[(i, j)] *= phase;
        }
    }
    Ok(q.slice(s![0..n, 0..n]).to_owned())
}

/// `ln |det(B - x I)|` of a square block.
pub fn log_abs_det_shift(b: &Array2<Complex64>, x: f64) -> Result<f64> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(Error::Domain(format!(
            "square block required, got {} x {}",
            n,
            b.ncols()
        )));
    }
    let mut a = b.clone();
    for i in 0..n {
        a[(i, i)] -= x;
    }
    Ok(lu_logdet(a)?.log_abs)
}

/// Draw `count` independent blocks for the parameters of `p` and return
/// `ln |det(B - x I)|` for each, in sample order.
pub fn sample_logdets(p: &ModelParams, count: usize, seed: u64) -> Result<Vec<f64>> {
    (0..count)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let b = sample_truncation(p.n(), p.big_n(), &mut rng)?;
            log_abs_det_shift(&b, p.x())
        })
        .collect()
}

/// A Monte Carlo moment estimate in log scale.
#[derive(Debug, Clone, Copy)]
pub struct McMoment {
    /// `ln` of the sample mean of `|det(B - x)|^gamma`.
    pub log_value: f64,
    /// Standard error of the mean, relative to the mean.
    pub rel_se: f64,
    pub count: usize,
}

/// Estimate the absolute moment from precomputed log-determinants.
/// The average is taken after shifting by the largest exponent, so
/// moments far outside the double range still come out finite.
pub fn mc_rgamma_from(p: &ModelParams, logdets: &[f64]) -> Result<McMoment> {
    if p.gamma().im != 0.0 {
        return Err(Error::Domain(
            "Monte Carlo moments are defined for real gamma".into(),
        ));
    }
    if logdets.len() < 2 {
        return Err(Error::Domain(
            "at least two samples are needed for a standard error".into(),
        ));
    }
    let g = p.gamma().re;
    let shift = logdets
        .iter()
        .map(|&t| g * t)
        .fold(f64::NEG_INFINITY, f64::max);
    let nf = logdets.len() as f64;
    let mut acc = Compensated::new();
    for &t in logdets {
        acc.add((g * t - shift).exp());
    }
    let mean_w = acc.value() / nf;
    let mut var = Compensated::new();
    for &t in logdets {
        let d = (g * t - shift).exp() - mean_w;
        var.add(d * d);
    }
    let se_mean = (var.value() / (nf * (nf - 1.0))).sqrt();
    Ok(McMoment {
        log_value: shift + mean_w.ln(),
        rel_se: se_mean / mean_w,
        count: logdets.len(),
    })
}

/// Sample `count` blocks and estimate the absolute moment
/// `E |det(B - x)|^gamma`.
pub fn mc_rgamma(p: &ModelParams, count: usize, seed: u64) -> Result<McMoment> {
    let lds = sample_logdets(p, count, seed)?;
    mc_rgamma_from(p, &lds)
}

/// Kolmogorov-Smirnov distance of a sample from the standard normal.
#[derive(Debug, Clone, Copy)]
pub struct KsReport {
    /// `sup_x |F_emp(x) - Phi(x)|`.
    pub statistic: f64,
    pub count: usize,
}

/// KS distance of `values` from the standard normal law.
pub fn ks_normal(values: &[f64]) -> Result<KsReport> {
    if values.is_empty() {
        return Err(Error::Domain("KS statistic of an empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-comparable sample value"));
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = specfun::normal_cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsReport {
        statistic: d,
        count: v.len(),
    })
}

/// An empirical CLT check: standardized log-moduli and their KS
/// distance from the standard normal.
#[derive(Debug, Clone)]
pub struct CltSample {
    /// `(ln|det| - kappa_1/2) / ((1/2) sqrt(ln n))`, in sample order.
    pub standardized: Vec<f64>,
    pub ks: KsReport,
}

/// Sample `count` blocks and standardize their log-moduli to the CLT
/// scale.
pub fn clt_empirical(p: &ModelParams, count: usize, seed: u64) -> Result<CltSample> {
    let lds = sample_logdets(p, count, seed)?;
    let standardized: Vec<f64> = lds.iter().map(|&t| clt_standardize(t, p)).collect();
    let ks = ks_normal(&standardized)?;
    Ok(CltSample { standardized, ks })
}

// --------------------------------------------------------------------
