//! Finite-n machinery for the deformed-circle weight: moment tables,
//! Toeplitz determinant chains, the monic biorthogonal polynomial pair with
//! its norming constants, exact moments of the characteristic polynomial,
//! and the logarithmic x-derivative identity.

use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{horner, lu_logdet, lu_solve, poly_roots};
use crate::model::ModelParams;
use crate::num::{Compensated, CompensatedC};
use crate::quadrature::{circle_moment_batch, DiscRule, QuadOptions};
use crate::specfun::{ln_gamma, log_barnes_g};

/// Hard degree cap for the Toeplitz path. Double precision supports the
/// solves comfortably to here; conditioning of the moment systems grows
/// with the degree, and above ~40 the norming constants start shedding
/// digits, so treat results there as 1e-6-grade rather than 1e-10-grade.
pub const MAX_DEGREE: usize = 60;

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `log [Gamma(gamma/2 + j + 1) Gamma(alpha) / Gamma(gamma/2 + j + alpha + 1)]`,
/// the ratio tying the two norming constants together at degree `j`.
pub fn log_norm_ratio(params: &ModelParams, j: usize) -> Result<Complex64> {
    let hg = 0.5 * params.gamma();
    let alpha = params.alpha();
    let jf = j as f64;
    Ok(ln_gamma(hg + c64(jf + 1.0, 0.0))? + ln_gamma(c64(alpha, 0.0))?
        - ln_gamma(hg + c64(jf + alpha + 1.0, 0.0))?)
}

// --------------------------------------------------------------------
// Moment table
// --------------------------------------------------------------------

/// Table of contour moments `m[j] = oint z^{-j} w(z) dz / (2iz)`, i.e. `pi`
/// times the Laurent coefficient of `z^j` of the weight on its annulus of
/// analyticity `1 < |z| < x^{-2}`.
///
/// Two circles are used. Nonnegative `j` integrate on the geometric-mean
/// radius `x^{-1}`, where the kernel `z^{-j}` only shrinks. Negative `j`
/// carry the growing kernel `z^{|j|}`, whose size `rho^{|j|}` on the contour
/// is pure cancellation against an O(1) result; they are taken on a circle
/// hugging the unit circle so the loss stays at a couple of digits even for
/// deep indices.
#[derive(Debug, Clone)]
pub struct MomentTable {
    params: ModelParams,
    n_pos: usize,
    n_neg: usize,
    pos_radius: f64,
    neg_radius: f64,
    m_pos: Vec<Complex64>,
    m_neg: Vec<Complex64>,
    max_error: f64,
}

impl MomentTable {
    /// Symmetric table covering `j` in `[-n_max, n_max]`.
    pub fn new(params: &ModelParams, n_max: usize) -> Result<Self> {
        Self::with_depth(params, n_max, n_max)
    }

    /// Table covering `j` in `[-n_neg, n_pos]`.
    pub fn with_depth(params: &ModelParams, n_pos: usize, n_neg: usize) -> Result<Self> {
        let x = params.x();
        let (pos_radius, neg_radius) = if x == 0.0 {
            // Weight analytic on |z| > 1; only the cut [0, 1] matters.
            (2.0, 1.1)
        } else {
            let outer = 1.0 / (x * x);
            (1.0 / x, (1.0 + 0.5 * (outer - 1.0)).min(1.1))
        };
        let weight = |z: Complex64| {
            params
                .contour_weight(z)
                .expect("moment circle stays clear of the weight's cuts")
        };

        let pos_js: Vec<i64> = (0..=n_pos as i64).map(|j| -j).collect();
        let pos =
            circle_moment_batch(weight, pos_radius, &pos_js, &QuadOptions::default())?;

        let neg_js: Vec<i64> = (1..=n_neg as i64).collect();
        let neg =
            circle_moment_batch(weight, neg_radius, &neg_js, &QuadOptions::default())?;

        let max_error = pos
            .iter()
            .chain(neg.iter())
            .map(|r| r.error_estimate)
            .fold(0.0, f64::max);
        Ok(Self {
            params: *params,
            n_pos,
            n_neg,
            pos_radius,
            neg_radius,
            m_pos: pos.into_iter().map(|r| r.value).collect(),
            m_neg: neg.into_iter().map(|r| r.value).collect(),
            max_error,
        })
    }

    /// `m[j]`; panics if `j` is outside the table (callers check depth).
    pub fn m(&self, j: i64) -> Complex64 {
        if j >= 0 {
            self.m_pos[usize::try_from(j).expect("index fits")]
        } else {
            self.m_neg[usize::try_from(-j - 1).expect("index fits")]
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    pub fn pos_radius(&self) -> f64 {
        self.pos_radius
    }

    pub fn neg_radius(&self) -> f64 {
        self.neg_radius
    }

    /// Worst quadrature self-consistency estimate across the table.
    pub fn max_error(&self) -> f64 {
        self.max_error
    }

    /// Largest imaginary part in the table relative to its largest entry.
    /// For real `gamma` the weight is Schwarz-symmetric, every moment is
    /// real, and this defect is pure quadrature noise.
    pub fn schwarz_defect(&self) -> f64 {
        let scale = self
            .m_pos
            .iter()
            .chain(self.m_neg.iter())
            .map(|m| m.norm())
            .fold(1e-300, f64::max);
        self.m_pos
            .iter()
            .chain(self.m_neg.iter())
            .map(|m| m.im.abs())
            .fold(0.0, f64::max)
            / scale
    }
}

/// Convenience wrapper for the symmetric table.
pub fn moments(params: &ModelParams, n_max: usize) -> Result<MomentTable> {
    MomentTable::new(params, n_max)
}

// --------------------------------------------------------------------
// Toeplitz determinant chain
// --------------------------------------------------------------------

/// `T_k = det { m[col - row] }_{row,col=0..k-1}` for `k = 1..n`, in log form.
/// `T_0 = 1` is included for ratio-taking.
#[derive(Debug, Clone)]
pub struct ToeplitzChain {
    log_abs_t: Vec<f64>,
    phase_t: Vec<f64>,
    worst_pivot_ratio: f64,
}

impl ToeplitzChain {
    pub fn n(&self) -> usize {
        self.log_abs_t.len() - 1
    }

    pub fn log_abs(&self, k: usize) -> f64 {
        self.log_abs_t[k]
    }

    pub fn phase(&self, k: usize) -> f64 {
        self.phase_t[k]
    }

    /// `log T_k` as a complex number (`log|T_k| + i arg T_k`).
    pub fn log_t(&self, k: usize) -> Complex64 {
        c64(self.log_abs_t[k], self.phase_t[k])
    }

    /// Largest determinant phase along the chain. For real `gamma` every
    /// `T_k` is real positive, so this should be at the noise level.
    pub fn max_phase_defect(&self) -> f64 {
        self.phase_t.iter().fold(0.0, |a, p| a.max(p.abs()))
    }

    /// Smallest pivot ratio seen across all the factorizations; a cheap
    /// conditioning indicator for the whole chain.
    pub fn worst_pivot_ratio(&self) -> f64 {
        self.worst_pivot_ratio
    }
}

/// Determinants of the leading principal Toeplitz minors by dense pivoted
/// factorization, accumulated in log scale.
pub fn toeplitz_chain(mt: &MomentTable, n: usize) -> Result<ToeplitzChain> {
    if n > MAX_DEGREE {
        return Err(Error::Domain(format!(
            "determinant chain capped at degree {MAX_DEGREE}, got {n}"
        )));
    }
    if n > mt.n_pos().min(mt.n_neg()) + 1 {
        return Err(Error::Domain(format!(
            "moment table depth {} too shallow for a chain of length {n}",
            mt.n_pos().min(mt.n_neg())
        )));
    }
    let mut log_abs_t = vec![0.0];
    let mut phase_t = vec![0.0];
    let mut worst = f64::INFINITY;
    for k in 1..=n {
        let a = Array2::from_shape_fn((k, k), |(row, col)| mt.m(col as i64 - row as i64));
        let ld = lu_logdet(a)?;
        if ld.log_abs < -690.0 {
            return Err(Error::IllConditioned(format!(
                "Toeplitz minor {k} is numerically singular (log|T| = {:.2})",
                ld.log_abs
            )));
        }
        worst = worst.min(ld.pivot_ratio());
        log_abs_t.push(ld.log_abs);
        phase_t.push(ld.phase);
    }
    Ok(ToeplitzChain {
        log_abs_t,
        phase_t,
        worst_pivot_ratio: worst,
    })
}

// --------------------------------------------------------------------
// Monic pair and norming constants
// --------------------------------------------------------------------

/// The degree-n monic polynomial `P` orthogonal to `z^k, k < n` against the
/// contour pairing, its monic partner `Q` in the variable `v = 1/z`, and the
/// norming constants of the normalized pair `chi P`, `chi_hat Q`.
#[derive(Debug, Clone)]
pub struct PolyPair {
    /// Monic coefficients of `P`, increasing degree, length `n + 1`.
    pub p: Vec<Complex64>,
    /// Monic coefficients of `Q(v)`, `v = 1/z`, increasing degree.
    pub q: Vec<Complex64>,
    pub chi: f64,
    pub chi_hat: f64,
    /// Worst relative residual of the two moment systems.
    pub residual: f64,
}

impl PolyPair {
    pub fn degree(&self) -> usize {
        self.p.len() - 1
    }
}

/// Solve `a x = rhs` with two passes of iterative refinement using
/// compensated residuals, so the returned residual reflects the solution
/// quality rather than the first factorization's rounding. Returns `(x,
/// max-norm of the final residual)`.
fn solve_refined(a: &Array2<Complex64>, rhs: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let n = rhs.len();
    let residual = |x: &[Complex64]| -> Vec<Complex64> {
        (0..n)
            .map(|row| {
                let mut acc = CompensatedC::new();
                acc.add(rhs[row]);
                for col in 0..n {
                    acc.add(-a[[row, col]] * x[col]);
                }
                acc.value()
            })
            .collect()
    };
    let (mut x, _) = lu_solve(a.clone(), rhs)?;
    for _ in 0..2 {
        let r = residual(&x);
        let (dx, _) = lu_solve(a.clone(), &r)?;
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
    }
    let rnorm = residual(&x).iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok((x, rnorm))
}

/// Construct the monic pair at degree `n`. Requires real `gamma` (the
/// norming constants are then real positive) and a table covering
/// `[-n, n]`.
pub fn monic_pair(params: &ModelParams, n: usize, mt: &MomentTable) -> Result<PolyPair> {
    if params.gamma().im != 0.0 {
        return Err(Error::Domain(
            "the normed pair is defined for real gamma".into(),
        ));
    }
    if n > MAX_DEGREE {
        return Err(Error::Domain(format!(
            "polynomial degree capped at {MAX_DEGREE}, got {n}"
        )));
    }
    if mt.n_pos() < n || mt.n_neg() < n {
        return Err(Error::Domain(format!(
            "moment table [-{}, {}] too shallow for degree {n}",
            mt.n_neg(),
            mt.n_pos()
        )));
    }

    // Norming constants from the determinant ratio: chi^2 = T_n / (g_n T_{n+1}).
    let chain = toeplitz_chain(mt, n + 1)?;
    let log_g = log_norm_ratio(params, n)?;
    let log_chi2 = chain.log_t(n) - chain.log_t(n + 1) - log_g;
    if log_chi2.im.abs() > 1e-6 {
        return Err(Error::Accuracy(format!(
            "norming-constant determinant ratio carries phase {:.3e} at real gamma",
            log_chi2.im
        )));
    }
    let chi = (0.5 * log_chi2.re).exp();
    let chi_hat = chi * log_g.re.exp();

    // Point charge at the origin: rotational symmetry makes the monomials
    // orthogonal, and both members of the pair collapse to pure powers. (The
    // contour moment systems do not degenerate to this limit and must not be
    // solved here.)
    if params.x() == 0.0 || n == 0 {
        let mut mono = vec![c64(0.0, 0.0); n + 1];
        mono[n] = c64(1.0, 0.0);
        return Ok(PolyPair {
            p: mono.clone(),
            q: mono,
            chi,
            chi_hat,
            residual: 0.0,
        });
    }

    // P system: sum_i p_i m[k - i] = -m[k - n], k = 0..n-1.
    let a_p = Array2::from_shape_fn((n, n), |(k, i)| mt.m(k as i64 - i as i64));
    let rhs_p: Vec<Complex64> = (0..n).map(|k| -mt.m(k as i64 - n as i64)).collect();
    let (mut p, res_p) = solve_refined(&a_p, &rhs_p)?;
    p.push(c64(1.0, 0.0));

    // Q system (transposed kernel): sum_i q_i m[i - k] = -m[n - k].
    let a_q = Array2::from_shape_fn((n, n), |(k, i)| mt.m(i as i64 - k as i64));
    let rhs_q: Vec<Complex64> = (0..n).map(|k| -mt.m(n as i64 - k as i64)).collect();
    let (mut q, res_q) = solve_refined(&a_q, &rhs_q)?;
    q.push(c64(1.0, 0.0));

    let scale_p = rhs_p.iter().map(|v| v.norm()).fold(1e-300, f64::max);
    let scale_q = rhs_q.iter().map(|v| v.norm()).fold(1e-300, f64::max);
    let residual = (res_p / scale_p).max(res_q / scale_q);
    if residual > 1e-8 {
        return Err(Error::IllConditioned(format!(
            "moment system residual {residual:.3e} exceeds 1e-8 of the right-hand side at degree {n}"
        )));
    }

    Ok(PolyPair {
        p,
        q,
        chi,
        chi_hat,
        residual,
    })
}

/// `oint P(z) z^{-k} w dz/(2iz)` assembled from the moment table.
pub fn pairing_p(pp: &PolyPair, mt: &MomentTable, k: i64) -> Complex64 {
    let mut acc = CompensatedC::new();
    for (i, &bi) in pp.p.iter().enumerate() {
        acc.add(bi * mt.m(k - i as i64));
    }
    acc.value()
}

/// `oint z^{k} Q(z^{-1}) w dz/(2iz)` assembled from the moment table.
pub fn pairing_q(pp: &PolyPair, mt: &MomentTable, k: i64) -> Complex64 {
    let mut acc = CompensatedC::new();
    for (i, &ci) in pp.q.iter().enumerate() {
        acc.add(ci * mt.m(i as i64 - k));
    }
    acc.value()
}

/// `oint P(z) Q(z^{-1}) w dz/(2iz)`: the biorthogonal pairing of the monic
/// pair, which the norming constants scale to exactly 1.
pub fn pairing_pq(pp: &PolyPair, mt: &MomentTable) -> Complex64 {
    let mut acc = CompensatedC::new();
    for (i, &bi) in pp.p.iter().enumerate() {
        for (k, &ck) in pp.q.iter().enumerate() {
            acc.add(bi * ck * mt.m(k as i64 - i as i64));
        }
    }
    acc.value()
}

/// Roots of the monic polynomial of a pair.
pub fn poly_zeros(pp: &PolyPair) -> Result<Vec<Complex64>> {
    if pp.p.len() < 2 {
        return Err(Error::Domain("degree-0 polynomial has no zeros".into()));
    }
    poly_roots(&pp.p)
}

// --------------------------------------------------------------------
// Planar (disc) cross-check path
// --------------------------------------------------------------------

/// Norming constant of the degree-n orthonormal polynomial for the planar
/// disc measure, computed from the monomial Gram matrix, together with the
/// worst orthonormality defect of the resulting family re-measured on a
/// refined rule. Real `gamma`, `n <= 12` (dense Gram path).
pub fn planar_chi(params: &ModelParams, n: usize) -> Result<(f64, f64)> {
    if params.gamma().im != 0.0 {
        return Err(Error::Domain(
            "planar norming constants are defined for real gamma".into(),
        ));
    }
    if n > 12 {
        return Err(Error::Domain(format!(
            "planar Gram path is capped at degree 12, got {n}"
        )));
    }
    let dim = n + 1;
    let gram = |rule: &DiscRule| -> (Vec<Vec<f64>>, f64) {
        let mut g = vec![vec![Compensated::new(); dim]; dim];
        let mut im_max = 0.0f64;
        let mut pow = vec![c64(0.0, 0.0); dim];
        for (z, w) in rule.nodes() {
            pow[0] = c64(1.0, 0.0);
            for j in 1..dim {
                pow[j] = pow[j - 1] * z;
            }
            for j in 0..dim {
                for k in 0..=j {
                    let v = w * pow[j] * pow[k].conj();
                    g[j][k].add(v.re);
                    im_max = im_max.max(v.im.abs());
                }
            }
        }
        let gv: Vec<Vec<f64>> = (0..dim)
            .map(|j| {
                (0..dim)
                    .map(|k| if k <= j { g[j][k].value() } else { g[k][j].value() })
                    .collect()
            })
            .collect();
        (gv, im_max)
    };

    let coarse = DiscRule::new(params, 512, 64)?;
    let (g, _) = gram(&coarse);

    // Cholesky G = L L^T; the monic degree-n norm is L[n][n], its inverse the
    // norming constant; columns of L^{-T} are the orthonormal coefficients.
    let mut l = vec![vec![0.0f64; dim]; dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = g[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::IllConditioned(format!(
                        "planar Gram matrix lost positive definiteness at row {i}"
                    )));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let chi = 1.0 / l[n][n];

    // Orthonormal coefficient columns: solve L^T a = e_j (back substitution).
    let mut coeff = vec![vec![0.0f64; dim]; dim]; // coeff[j][i]: z^i coefficient of p_j
    for j in 0..dim {
        for i in (0..=j).rev() {
            let mut s = if i == j { 1.0 } else { 0.0 };
            for k in (i + 1)..=j {
                s -= l[k][i] * coeff[j][k];
            }
            coeff[j][i] = s / l[i][i];
        }
    }

    // Re-measure orthonormality on a refined rule.
    let fine = DiscRule::new(params, 1024, 128)?;
    let (gf, _) = gram(&fine);
    let mut defect = 0.0f64;
    for j in 0..dim {
        for k in 0..=j {
            let mut s = Compensated::new();
            for a in 0..=j {
                for b in 0..=k {
                    s.add(coeff[j][a] * coeff[k][b] * gf[a][b]);
                }
            }
            let target = if j == k { 1.0 } else { 0.0 };
            defect = defect.max((s.value() - target).abs());
        }
    }
    if defect > 1e-6 {
        return Err(Error::Accuracy(format!(
            "planar orthonormality defect {defect:.3e} on the refined rule"
        )));
    }
    Ok((chi, defect))
}

// --------------------------------------------------------------------
// Exact moments of the characteristic polynomial
// --------------------------------------------------------------------

/// `log E|det(B - x)|^gamma` assembled from a precomputed determinant chain:
/// `-n log pi + sum_j [lnG(j+a+1) - lnG(j+1) + lnG(g/2+j+1) - lnG(g/2+j+a+1)]
/// + log T_n`. Real for real `gamma` up to quadrature noise in the phase.
pub fn rgamma_from_chain(params: &ModelParams, chain: &ToeplitzChain) -> Result<Complex64> {
    let n = params.n();
    if chain.n() < n {
        return Err(Error::Domain(format!(
            "chain of length {} cannot evaluate degree {n}",
            chain.n()
        )));
    }
    let alpha = params.alpha();
    let hg = 0.5 * params.gamma();
    let mut acc = CompensatedC::new();
    for j in 0..n {
        let jf = j as f64;
        acc.add(ln_gamma(c64(jf + alpha + 1.0, 0.0))?);
        acc.add(-ln_gamma(c64(jf + 1.0, 0.0))?);
        acc.add(ln_gamma(hg + c64(jf + 1.0, 0.0))?);
        acc.add(-ln_gamma(hg + c64(jf + alpha + 1.0, 0.0))?);
    }
    acc.add(c64(-(n as f64) * PI.ln(), 0.0));
    acc.add(chain.log_t(n));
    Ok(acc.value())
}

/// `log E|det(B - x)|^gamma` for the full model: builds the moment table and
/// determinant chain, then assembles the log value. Real part is the answer
/// for real `gamma`; the imaginary part is noise there.
pub fn rgamma_exact(params: &ModelParams) -> Result<Complex64> {
    let n = params.n();
    let mt = MomentTable::new(params, n)?;
    let chain = toeplitz_chain(&mt, n)?;
    rgamma_from_chain(params, &chain)
}

/// `log E|det B|^gamma` at `x = 0` as the exact Gamma product
/// `sum_j [lnG(g/2+j+1) + lnG(j+a+1) - lnG(j+1) - lnG(g/2+j+a+1)]`.
pub fn rgamma_zero(params: &ModelParams) -> Result<Complex64> {
    let n = params.n();
    let alpha = params.alpha();
    let hg = 0.5 * params.gamma();
    let mut acc = CompensatedC::new();
    for j in 0..n {
        let jf = j as f64;
        acc.add(ln_gamma(hg + c64(jf + 1.0, 0.0))?);
        acc.add(ln_gamma(c64(jf + alpha + 1.0, 0.0))?);
        acc.add(-ln_gamma(c64(jf + 1.0, 0.0))?);
        acc.add(-ln_gamma(hg + c64(jf + alpha + 1.0, 0.0))?);
    }
    Ok(acc.value())
}

/// The same `x = 0` value in closed Barnes-G form:
/// `log [G(g/2+n+1) G(a+n+1) G(g/2+a+1)] - log [G(g/2+1) G(a+1) G(n+1) G(g/2+a+n+1)]`.
pub fn rgamma_zero_barnes(params: &ModelParams) -> Result<Complex64> {
    let n = params.n() as f64;
    let a = params.alpha();
    let hg = 0.5 * params.gamma();
    Ok(log_barnes_g(hg + c64(n + 1.0, 0.0))?
        + log_barnes_g(c64(a + n + 1.0, 0.0))?
        + log_barnes_g(hg + c64(a + 1.0, 0.0))?
        - log_barnes_g(hg + c64(1.0, 0.0))?
        - log_barnes_g(c64(a + 1.0, 0.0))?
        - log_barnes_g(c64(n + 1.0, 0.0))?
        - log_barnes_g(hg + c64(a + n + 1.0, 0.0))?)
}

// --------------------------------------------------------------------
// Differential identity
// --------------------------------------------------------------------

/// Prefactor convention for the logarithmic derivative identity. The two
/// derivations in circulation disagree by exactly one unit in the constant:
/// `Main` uses `gamma/2 + alpha`, `Shifted` uses `gamma/2 + alpha - 1`. The
/// finite-difference oracle singles out `Main`; `Shifted` is kept for the
/// comparison report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffidVariant {
    Main,
    Shifted,
}

/// `d/dx log E|det(B - x)|^gamma` at the model's `x`, via the exact identity
///
/// `-2x (gamma/2 + alpha) [ -n u^{n+1} q(u^{-1}) I12 - n u
///    + u^3 p'(u) I22 - u^{n+2} (d/dz q(z^{-1}))|_u I12 ]`,
///
/// `u = x^{-2}`, where `p = chi P`, `q = chi_hat Q` are the normalized pair
/// and `I12 = oint z^{-n+1} p(z) / (u - z) w dz/(2iz)`,
/// `I22 = oint q(z^{-1}) / (u - z) w dz/(2iz)`.
///
/// The integrals are *not* evaluated by quadrature: expanding `1/(u - z)`
/// in the contour variable, the first n terms of each series vanish by
/// orthogonality, and the quadrature value of the surviving tail is smaller
/// than the integrand by `u^{-n}` — any direct rule loses those n digits.
/// Instead the tails are summed as explicit moment combinations
/// (`sum_{k >= n} u^{-k-1} t_k`), which costs a deep negative-moment table
/// and keeps every retained digit meaningful.
pub fn diffid_rhs(params: &ModelParams, variant: DiffidVariant) -> Result<f64> {
    if params.gamma().im != 0.0 {
        return Err(Error::Domain(
            "the derivative identity path requires real gamma".into(),
        ));
    }
    let x = params.x();
    if x == 0.0 {
        return Err(Error::Domain(
            "identity evaluates at u = x^{-2}; x = 0 has no finite u (the derivative vanishes by symmetry)".into(),
        ));
    }
    let n = params.n();
    let u = 1.0 / (x * x);

    // Series length: truncation error ~ u^{-kmax}, driven below 1e-20.
    let kmax = (46.0 / u.ln()).ceil() as usize;
    if kmax > 350 {
        return Err(Error::Domain(format!(
            "x = {x} puts u = {u:.4} too close to 1 for the geometric tail (needs {kmax} terms)"
        )));
    }
    let mt = MomentTable::with_depth(params, n, n + kmax + 2)?;
    // Guard: u must sit strictly outside both moment circles.
    if u - mt.pos_radius() < 1e-3 {
        return Err(Error::Domain(format!(
            "u = {u:.6} is within 1e-3 of the moment circle radius {:.6}",
            mt.pos_radius()
        )));
    }
    let pair = monic_pair(params, n, &mt)?;
    let kappa = pair.chi * pair.chi_hat;

    // Scaled tails: s12 = u^{n+1} I12 = sum_{k>=n} u^{n-k} t_k with
    // t_k = oint z^{k-n+1} P w dz/(2iz); likewise s22 for Q.
    let mut s12 = CompensatedC::new();
    let mut s22 = CompensatedC::new();
    let mut upow = 1.0f64;
    for k in n..=(n + kmax) {
        let mut tk = CompensatedC::new();
        let mut sk = CompensatedC::new();
        for (i, (&bi, &ci)) in pair.p.iter().zip(pair.q.iter()).enumerate() {
            // t_k term: z^{k-n+1} z^i / z kernel -> moment index n-1-k-i.
            tk.add(bi * mt.m(n as i64 - 1 - k as i64 - i as i64));
            sk.add(ci * mt.m(i as i64 - k as i64));
        }
        s12.add(tk.value() * upow);
        s22.add(sk.value() * upow);
        upow /= u;
    }
    let s12 = s12.value();
    let s22 = s22.value();

    let uinv = 1.0 / u;
    let qv = horner(&pair.q, c64(uinv, 0.0));
    // (d/dz Q(z^{-1}))|_{z=u} = -sum_i i q_i u^{-i-1}.
    let mut qd = CompensatedC::new();
    for (i, &ci) in pair.q.iter().enumerate().skip(1) {
        qd.add(-(i as f64) * ci * uinv.powi(i as i32 + 1));
    }
    let qd = qd.value();
    // P'(u) u^{-n} (the tail sums carry the matching u^{n+1}).
    let mut pd_scaled = CompensatedC::new();
    for (i, &bi) in pair.p.iter().enumerate().skip(1) {
        pd_scaled.add((i as f64) * bi * uinv.powi(n as i32 + 1 - i as i32));
    }
    let pd_scaled = pd_scaled.value();

    let nf = n as f64;
    let bracket = -nf * kappa * qv * s12 - c64(nf * u, 0.0)
        + kappa * u * u * pd_scaled * s22
        - u * kappa * qd * s12;

    let prefactor = match variant {
        DiffidVariant::Main => 0.5 * params.gamma().re + params.alpha(),
        DiffidVariant::Shifted => 0.5 * params.gamma().re + params.alpha() - 1.0,
    };
    let rhs = -2.0 * x * prefactor * bracket;
    let scale = rhs.norm().max(nf * u);
    if rhs.im.abs() > 1e-7 * scale {
        return Err(Error::Accuracy(format!(
            "derivative identity evaluated with imaginary defect {:.3e}",
            rhs.im
        )));
    }
    Ok(rhs.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::ln_beta;
    use proptest::prelude::*;

    fn params(n: usize, big_n: usize, gamma: f64, x: f64) -> ModelParams {
        ModelParams::new_real(n, big_n, gamma, x).unwrap()
    }

    // ----------------------------------------------------------------
    // Moment table
    // ----------------------------------------------------------------

    #[test]
    fn flat_gamma_moment_examples() {
        // gamma = 0, alpha = 2, x = 1/2: the weight is (1 - z/4)^2, a plain
        // polynomial, so every moment is a hand-readable Taylor coefficient.
        let p = params(4, 6, 0.0, 0.5);
        let mt = MomentTable::new(&p, 4).unwrap();
        assert!((mt.m(0) - c64(PI, 0.0)).norm() < 1e-12);
        assert!(mt.m(-1).norm() < 1e-12, "analytic weight, no negative powers");
        let want = -PI * 2.0 * 0.25; // pi * (z^1 coefficient) = -pi alpha x^2
        assert!((mt.m(1) - c64(want, 0.0)).norm() < 1e-12);
        // Verify the whole negative side dies.
        for j in 1..=4 {
            assert!(mt.m(-j).norm() < 1e-12);
        }
    }

    #[test]
    fn real_gamma_tables_are_real() {
        let p = params(6, 8, 1.2, 0.45);
        let mt = MomentTable::new(&p, 6).unwrap();
        assert!(mt.schwarz_defect() < 1e-11, "defect {}", mt.schwarz_defect());
        assert!(mt.max_error() < 1e-9);
    }

    #[test]
    fn deep_negative_moments_match_series_oracle() {
        // x = 0: the weight is ((z-1)/z)^(g/2) whose Laurent coefficients are
        // binomial values, an independent closed form for the deep rows:
        // m[-k] = pi (-1)^k C(g/2, k).
        let g = 0.8f64;
        let p = params(3, 5, g, 0.0);
        let mt = MomentTable::with_depth(&p, 2, 12).unwrap();
        let mut binom = 1.0f64; // C(g/2, 0)
        for k in 1..=12i64 {
            binom *= (g / 2.0 - (k - 1) as f64) / k as f64;
            let want = PI * if k % 2 == 0 { binom } else { -binom };
            let got = mt.m(-k);
            assert!(
                (got - c64(want, 0.0)).norm() < 1e-11 * want.abs().max(1e-3),
                "k = {k}: got {got}, want {want}"
            );
        }
        // Positive rows vanish: the weight has no positive Taylor part.
        assert!(mt.m(1).norm() < 1e-12);
        assert!(mt.m(2).norm() < 1e-12);
    }

    // ----------------------------------------------------------------
    // Toeplitz chain
    // ----------------------------------------------------------------

    #[test]
    fn flat_gamma_chain_is_powers_of_pi() {
        // Oracle: gamma = 0 empties the negative moment side, the matrix is
        // triangular with diagonal pi, so T_k = pi^k without any solve.
        let p = params(6, 9, 0.0, 0.4);
        let mt = MomentTable::new(&p, 6).unwrap();
        for j in 1..=6 {
            assert!(mt.m(-j).norm() < 1e-12, "triangularity premise");
        }
        let chain = toeplitz_chain(&mt, 6).unwrap();
        for k in 1..=6 {
            assert!(
                (chain.log_abs(k) - k as f64 * PI.ln()).abs() < 1e-10,
                "k = {k}"
            );
            assert!(chain.phase(k).abs() < 1e-10);
        }
    }

    #[test]
    fn one_by_one_determinant_is_the_first_moment() {
        let p = params(3, 5, 0.9, 0.3);
        let mt = MomentTable::new(&p, 3).unwrap();
        let chain = toeplitz_chain(&mt, 1).unwrap();
        let t1 = chain.log_t(1).exp();
        assert!((t1 - mt.m(0)).norm() < 1e-12 * mt.m(0).norm());
    }

    #[test]
    fn real_gamma_chain_is_positive() {
        let p = params(6, 8, 1.0, 0.3);
        let mt = MomentTable::new(&p, 6).unwrap();
        let chain = toeplitz_chain(&mt, 6).unwrap();
        assert!(
            chain.max_phase_defect() < 1e-8,
            "phase defect {}",
            chain.max_phase_defect()
        );
    }

    #[test]
    fn chain_product_closure_against_norming_constants() {
        // T_n must equal prod_{j<n} 1/(g_j chi_j^2), rebuilt from the pair
        // path degree by degree.
        let p = params(5, 7, 0.7, 0.4);
        let mt = MomentTable::new(&p, 5).unwrap();
        let chain = toeplitz_chain(&mt, 5).unwrap();
        let mut log_prod = 0.0f64;
        for j in 0..5 {
            let pair = monic_pair(&p, j, &mt).unwrap();
            let g_j = log_norm_ratio(&p, j).unwrap().re;
            log_prod += -g_j - 2.0 * pair.chi.ln();
        }
        assert!(
            (log_prod - chain.log_abs(5)).abs() < 1e-8,
            "closure gap {}",
            (log_prod - chain.log_abs(5)).abs()
        );
    }

    // ----------------------------------------------------------------
    // Monic pair
    // ----------------------------------------------------------------

    #[test]
    fn pair_is_monic_and_biorthogonal() {
        let p = params(5, 8, 1.3, 0.5);
        let mt = MomentTable::new(&p, 5).unwrap();
        let pair = monic_pair(&p, 5, &mt).unwrap();
        assert_eq!(pair.p[5], c64(1.0, 0.0));
        assert_eq!(pair.q[5], c64(1.0, 0.0));
        assert!(pair.chi > 0.0 && pair.chi_hat > 0.0);
        // Biorthogonal pairing scales to exactly one.
        let b = pairing_pq(&pair, &mt) * pair.chi * pair.chi_hat;
        assert!((b - c64(1.0, 0.0)).norm() < 1e-8, "pairing {b}");
    }

    #[test]
    fn norming_constants_satisfy_their_own_pairings() {
        // Oracle independent of the determinant-ratio path: both leading
        // pairings of the monic pair equal the determinant ratio,
        //   oint P z^{-n} w dz/(2iz) = oint z^{n} Q(z^{-1}) w dz/(2iz)
        //     = 1/(chi chi_hat).
        // (Check it at gamma = 0, where the moment matrix is triangular:
        // both pairings reduce to m[0] = pi and chi chi_hat = 1/pi.)
        let p = params(6, 9, 0.8, 0.4);
        let mt = MomentTable::new(&p, 6).unwrap();
        let pair = monic_pair(&p, 6, &mt).unwrap();
        let want = 1.0 / (pair.chi * pair.chi_hat);
        let lead_p = pairing_p(&pair, &mt, 6);
        assert!(
            (lead_p - c64(want, 0.0)).norm() < 1e-8 * want,
            "P pairing {lead_p} vs {want}"
        );
        let lead_q = pairing_q(&pair, &mt, 6);
        assert!(
            (lead_q - c64(want, 0.0)).norm() < 1e-8 * want,
            "Q pairing {lead_q} vs {want}"
        );
    }

    #[test]
    fn orthogonality_residual_stays_small_to_degree_twenty() {
        let n = 20;
        let p = params(n, n + 3, 1.2, 0.5);
        let mt = MomentTable::new(&p, n).unwrap();
        let pair = monic_pair(&p, n, &mt).unwrap();
        let bound = 1e-8 / pair.chi;
        for k in 0..n {
            let v = pairing_p(&pair, &mt, k as i64).norm();
            assert!(v <= bound, "k = {k}: residual {v:.3e} > {bound:.3e}");
        }
    }

    #[test]
    fn origin_charge_collapses_to_monomials() {
        let p = params(5, 9, 0.5, 0.0);
        let mt = MomentTable::new(&p, 5).unwrap();
        let pair = monic_pair(&p, 5, &mt).unwrap();
        for i in 0..5 {
            assert_eq!(pair.p[i], c64(0.0, 0.0));
            assert_eq!(pair.q[i], c64(0.0, 0.0));
        }
        // chi^2 = 1/(pi B(n + g/2 + 1, alpha)): the radial Beta mass of the
        // monomial against the rotation-invariant weight.
        let b = ln_beta(c64(5.0 + 0.25 + 1.0, 0.0), c64(4.0, 0.0))
            .unwrap()
            .exp()
            .re;
        let want = 1.0 / (PI * b).sqrt();
        assert!(
            (pair.chi - want).abs() < 1e-9 * want,
            "chi {} vs {}",
            pair.chi,
            want
        );
    }

    #[test]
    fn degree_zero_norming_from_first_moment() {
        // Biorthogonality at degree 0 forces chi chi_hat m[0] = 1, and the
        // ratio chi_hat/chi is the Gamma factor; together they pin both.
        let p = params(3, 5, 1.4, 0.35);
        let mt = MomentTable::new(&p, 3).unwrap();
        let pair = monic_pair(&p, 0, &mt).unwrap();
        let product = pair.chi * pair.chi_hat * mt.m(0);
        assert!((product - c64(1.0, 0.0)).norm() < 1e-10);
        let g0 = log_norm_ratio(&p, 0).unwrap().re.exp();
        assert!((pair.chi_hat / pair.chi - g0).abs() < 1e-10 * g0);
        // Spelled out: chi_hat^2 = g_0 / m[0].
        let want = (g0 / mt.m(0).re).sqrt();
        assert!((pair.chi_hat - want).abs() < 1e-10 * want);
    }

    #[test]
    fn planar_and_contour_norming_constants_agree() {
        // Green's-theorem equivalence: the disc Gram path and the contour
        // determinant path compute the same constant.
        let p = params(4, 6, 1.0, 0.5);
        let (chi_gram, defect) = planar_chi(&p, 4).unwrap();
        assert!(defect < 1e-7, "gram defect {defect:.3e}");
        let mt = MomentTable::new(&p, 4).unwrap();
        let pair = monic_pair(&p, 4, &mt).unwrap();
        assert!(
            (chi_gram / pair.chi - 1.0).abs() < 1e-6,
            "gram {} vs contour {}",
            chi_gram,
            pair.chi
        );
    }

    #[test]
    fn planar_gram_at_origin_matches_radial_masses() {
        let p = params(4, 7, 1.3, 0.0);
        let (chi, defect) = planar_chi(&p, 4).unwrap();
        assert!(defect < 1e-8);
        let b = ln_beta(c64(4.0 + 0.65 + 1.0, 0.0), c64(3.0, 0.0))
            .unwrap()
            .exp()
            .re;
        let want = 1.0 / (PI * b).sqrt();
        assert!((chi - want).abs() < 1e-8 * want);
    }

    // ----------------------------------------------------------------
    // Exact moments of |det|
    // ----------------------------------------------------------------

    #[test]
    fn zeroth_moment_is_one() {
        let p = params(7, 11, 0.0, 0.55);
        let lr = rgamma_exact(&p).unwrap();
        assert!(lr.norm() < 1e-10, "log R at gamma = 0: {lr}");
    }

    #[test]
    fn origin_value_matches_gamma_product() {
        for n in [3usize, 6, 10] {
            let p = params(n, n + 3, 1.7, 0.0);
            let via_chain = rgamma_exact(&p).unwrap();
            let product = rgamma_zero(&p).unwrap();
            assert!(
                (via_chain - product).norm() < 1e-8 * product.norm().max(1.0),
                "n = {n}: {via_chain} vs {product}"
            );
        }
    }

    #[test]
    fn origin_product_hand_value() {
        // n=1, alpha=1, gamma=2: Gamma(2)Gamma(2)/(Gamma(1)Gamma(3)) = 1/2.
        let p = params(1, 2, 2.0, 0.0);
        let lr = rgamma_zero(&p).unwrap();
        assert!((lr.re - 0.5f64.ln()).abs() < 1e-12);
        assert!(lr.im.abs() < 1e-12);
    }

    #[test]
    fn origin_product_matches_barnes_closed_form() {
        let p = params(30, 60, 1.0, 0.0);
        let prod = rgamma_zero(&p).unwrap();
        let barnes = rgamma_zero_barnes(&p).unwrap();
        assert!(
            (prod - barnes).norm() < 1e-10 * prod.norm(),
            "{prod} vs {barnes}"
        );
    }

    #[test]
    fn complex_gamma_value_is_conjugate_symmetric() {
        // R_conj(gamma) = conj(R_gamma) for the exact chain path, since the
        // weight depends analytically on gamma.
        let p1 = ModelParams::new(4, 7, c64(1.1, 0.6), 0.4).unwrap();
        let p2 = ModelParams::new(4, 7, c64(1.1, -0.6), 0.4).unwrap();
        let r1 = rgamma_exact(&p1).unwrap();
        let r2 = rgamma_exact(&p2).unwrap();
        assert!(
            (r1 - r2.conj()).norm() < 1e-8 * r1.norm().max(1.0),
            "{r1} vs conj {r2}"
        );
    }

    // ----------------------------------------------------------------
    // Differential identity
    // ----------------------------------------------------------------

    #[test]
    fn derivative_vanishes_at_flat_gamma() {
        let p = params(6, 10, 0.0, 0.4);
        let rhs = diffid_rhs(&p, DiffidVariant::Main).unwrap();
        assert!(rhs.abs() < 1e-7, "rhs {rhs:.3e}");
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = params(8, 16, 1.0, 0.3);
        let rhs = diffid_rhs(&p, DiffidVariant::Main).unwrap();
        let h = 1e-4;
        let up = rgamma_exact(&p.with_x(0.3 + h).unwrap()).unwrap().re;
        let dn = rgamma_exact(&p.with_x(0.3 - h).unwrap()).unwrap().re;
        let fd = (up - dn) / (2.0 * h);
        assert!(
            (rhs - fd).abs() < 1e-4 * fd.abs().max(1.0),
            "identity {rhs} vs finite difference {fd}"
        );
    }

    #[test]
    fn shifted_prefactor_scales_exactly() {
        let p = params(5, 9, 1.4, 0.45);
        let main = diffid_rhs(&p, DiffidVariant::Main).unwrap();
        let shifted = diffid_rhs(&p, DiffidVariant::Shifted).unwrap();
        let a = 0.5 * 1.4 + 4.0;
        assert!(
            (shifted / main - (a - 1.0) / a).abs() < 1e-10,
            "ratio {} vs {}",
            shifted / main,
            (a - 1.0) / a
        );
    }

    // ----------------------------------------------------------------
    // Zeros
    // ----------------------------------------------------------------

    #[test]
    fn zeros_of_explicit_quadratic() {
        let pair = PolyPair {
            p: vec![c64(-1.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)],
            q: vec![c64(1.0, 0.0)],
            chi: 1.0,
            chi_hat: 1.0,
            residual: 0.0,
        };
        let roots = poly_zeros(&pair).unwrap();
        assert!((roots[0] - c64(-1.0, 0.0)).norm() < 1e-12);
        assert!((roots[1] - c64(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zeros_of_origin_charge_polynomial_collapse() {
        let p = params(5, 9, 0.5, 0.0);
        let mt = MomentTable::new(&p, 5).unwrap();
        let pair = monic_pair(&p, 5, &mt).unwrap();
        for z in poly_zeros(&pair).unwrap() {
            assert!(z.norm() < 1e-8);
        }
    }

    // ----------------------------------------------------------------
    // Properties
    // ----------------------------------------------------------------

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn pair_invariants_hold_across_parameters(
            n in 1usize..=5,
            alpha_steps in 1usize..=4,
            gamma in -1.2f64..2.6,
            x in 0.05f64..0.75,
        ) {
            let p = params(n, n + alpha_steps, gamma, x);
            let mt = MomentTable::new(&p, n).unwrap();
            let pair = monic_pair(&p, n, &mt).unwrap();
            prop_assert_eq!(pair.p[n], c64(1.0, 0.0));
            prop_assert!(pair.chi > 0.0);
            prop_assert!(pair.chi_hat > 0.0);
            // Orthogonality of P against all lower powers.
            let bound = 1e-8 / pair.chi;
            for k in 0..n {
                prop_assert!(pairing_p(&pair, &mt, k as i64).norm() <= bound);
            }
            // Normalized biorthogonality.
            let b = pairing_pq(&pair, &mt) * pair.chi * pair.chi_hat;
            prop_assert!((b - c64(1.0, 0.0)).norm() < 1e-7);
        }
    }
}
