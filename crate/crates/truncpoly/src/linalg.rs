//! Small dense numerical kernels: complex LU with pivot diagnostics,
//! Gauss-Jacobi rules, and polynomial root-finding.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::num::div_robust;
use crate::specfun::ln_beta;

/// Log-space determinant of a complex matrix: `det = exp(log_abs + i phase)`.
#[derive(Debug, Clone, Copy)]
pub struct LogDet {
    pub log_abs: f64,
    pub phase: f64,
    /// Smallest and largest pivot magnitudes seen during elimination;
    /// their ratio is a cheap conditioning indicator.
    pub min_pivot: f64,
    pub max_pivot: f64,
}

impl LogDet {
    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.log_abs.exp(), self.phase)
    }

    /// `min_pivot / max_pivot`; tiny values flag near-singularity.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }
}

struct LuFactors {
    lu: Array2<Complex64>,
    perm: Vec<usize>,
    swaps: usize,
    min_pivot: f64,
    max_pivot: f64,
}

/// In-place partial-pivoting LU. Errors only on an exactly zero pivot;
/// near-singularity is reported through the pivot magnitudes so callers can
/// apply their own thresholds.
fn lu_decompose(mut a: Array2<Complex64>) -> Result<LuFactors> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Domain(format!(
            "LU needs a square matrix, got {} x {}",
            n,
            a.ncols()
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0usize;
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot = 0.0f64;
    for k in 0..n {
        // Column pivot search.
        let mut p = k;
        let mut best = a[[k, k]].norm();
        for i in (k + 1)..n {
            let v = a[[i, k]].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(Error::IllConditioned(format!(
                "exactly singular matrix at elimination step {k}"
            )));
        }
        if p != k {
            for j in 0..n {
                a.swap([k, j], [p, j]);
            }
            perm.swap(k, p);
            swaps += 1;
        }
        min_pivot = min_pivot.min(best);
        max_pivot = max_pivot.max(best);
        let pivot = a[[k, k]];
        for i in (k + 1)..n {
            // div_robust: |pivot|^2 may under/overflow even when the quotient
            // is perfectly representable.
            let factor = div_robust(a[[i, k]], pivot);
            a[[i, k]] = factor;
            if factor.norm() != 0.0 {
                for j in (k + 1)..n {
                    let akj = a[[k, j]];
                    a[[i, j]] -= factor * akj;
                }
            }
        }
    }
    Ok(LuFactors {
        lu: a,
        perm,
        swaps,
        min_pivot,
        max_pivot,
    })
}

/// Determinant of a complex matrix in log form via partial-pivoting LU.
pub fn lu_logdet(a: Array2<Complex64>) -> Result<LogDet> {
    let n = a.nrows();
    if n == 0 {
        return Ok(LogDet {
            log_abs: 0.0,
            phase: 0.0,
            min_pivot: f64::INFINITY,
            max_pivot: f64::INFINITY,
        });
    }
    let f = lu_decompose(a)?;
    let mut log_abs = 0.0;
    let mut phase = if f.swaps % 2 == 1 {
        std::f64::consts::PI
    } else {
        0.0
    };
    for k in 0..n {
        let d = f.lu[[k, k]];
        log_abs += d.norm().ln();
        phase += d.arg();
    }
    // Keep the phase in (-pi, pi] for reproducibility.
    let phase = phase.rem_euclid(2.0 * std::f64::consts::PI);
    let phase = if phase > std::f64::consts::PI {
        phase - 2.0 * std::f64::consts::PI
    } else {
        phase
    };
    Ok(LogDet {
        log_abs,
        phase,
        min_pivot: f.min_pivot,
        max_pivot: f.max_pivot,
    })
}

/// Solves `A x = b` by partial-pivoting LU. Returns the solution together
/// with the pivot ratio for conditioning checks.
pub fn lu_solve(a: Array2<Complex64>, b: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let n = a.nrows();
    if b.len() != n {
        return Err(Error::Domain(format!(
            "right-hand side length {} does not match matrix size {n}",
            b.len()
        )));
    }
    let f = lu_decompose(a)?;
    // Apply the permutation, then forward/back substitution.
    let mut y: Vec<Complex64> = f.perm.iter().map(|&p| b[p]).collect();
    for i in 1..n {
        for j in 0..i {
            let yj = y[j];
            y[i] -= f.lu[[i, j]] * yj;
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            let yj = y[j];
            y[i] -= f.lu[[i, j]] * yj;
        }
        y[i] = div_robust(y[i], f.lu[[i, i]]);
    }
    let ratio = if f.max_pivot == 0.0 {
        0.0
    } else {
        f.min_pivot / f.max_pivot
    };
    Ok((y, ratio))
}

/// Gauss-Jacobi rule on `[0, 1]` for the weight `(1 - t)^a t^b`
/// (`a, b > -1`): returns `m` nodes and weights such that
/// `int_0^1 (1-t)^a t^b f(t) dt = sum_i w_i f(t_i)` exactly for polynomials
/// of degree `< 2m`.
pub fn gauss_jacobi_01(m: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if m == 0 {
        return Err(Error::Domain("quadrature order must be positive".into()));
    }
    if a <= -1.0 || b <= -1.0 {
        return Err(Error::Domain(format!(
            "Jacobi exponents must exceed -1, got ({a}, {b})"
        )));
    }
    // Recurrence coefficients of the monic Jacobi polynomials on [-1, 1].
    let ab = a + b;
    let mut diag = vec![0.0f64; m];
    let mut off = vec![0.0f64; m.saturating_sub(1)];
    diag[0] = (b - a) / (ab + 2.0);
    for k in 1..m {
        let kf = k as f64;
        let denom = (2.0 * kf + ab) * (2.0 * kf + ab + 2.0);
        diag[k] = (b * b - a * a) / denom;
        let beta = if k == 1 {
            4.0 * (a + 1.0) * (b + 1.0) / ((ab + 2.0) * (ab + 2.0) * (ab + 3.0))
        } else {
            4.0 * kf * (kf + a) * (kf + b) * (kf + ab)
                / ((2.0 * kf + ab) * (2.0 * kf + ab) * (2.0 * kf + ab + 1.0) * (2.0 * kf + ab - 1.0))
        };
        off[k - 1] = beta.sqrt();
    }
    // After mapping s in [-1, 1] to t = (1 + s)/2, the total mass of
    // (1-t)^a t^b on [0, 1] is Beta(b + 1, a + 1).
    let mass = ln_beta(Complex64::new(b + 1.0, 0.0), Complex64::new(a + 1.0, 0.0))?
        .re
        .exp();

    let mut j = Array2::<f64>::zeros((m, m));
    for k in 0..m {
        j[[k, k]] = diag[k];
        if k + 1 < m {
            j[[k, k + 1]] = off[k];
            j[[k + 1, k]] = off[k];
        }
    }
    let (vals, vecs): (Array1<f64>, Array2<f64>) = j
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Backend(format!("symmetric eigensolve failed: {e}")))?;
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        let s = vals[i];
        nodes.push(0.5 * (1.0 + s));
        let v0 = vecs[[0, i]];
        weights.push(mass * v0 * v0);
    }
    Ok((nodes, weights))
}

/// Roots of a complex polynomial given by coefficients in increasing-degree
/// order (`c[0] + c[1] z + ...`). Uses the companion-matrix eigenvalues
/// followed by a few Newton corrections; roots are returned sorted by real
/// part, then imaginary part.
pub fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut c = coeffs.to_vec();
    while let Some(last) = c.last() {
        if last.norm() == 0.0 && c.len() > 1 {
            c.pop();
        } else {
            break;
        }
    }
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Err(Error::Domain(
            "root-finding needs a polynomial of degree at least 1".into(),
        ));
    }
    let lead = *c.last().unwrap();
    if lead.norm() == 0.0 {
        return Err(Error::Domain("zero polynomial has no roots".into()));
    }
    let monic: Vec<Complex64> = c.iter().map(|v| v / lead).collect();
    let mut comp = Array2::<Complex64>::zeros((deg, deg));
    for i in 1..deg {
        comp[[i, i - 1]] = Complex64::new(1.0, 0.0);
    }
    for i in 0..deg {
        comp[[i, deg - 1]] = -monic[i];
    }
    let (vals, _) = comp
        .eig()
        .map_err(|e| Error::Backend(format!("companion eigensolve failed: {e}")))?;
    let mut roots: Vec<Complex64> = vals.iter().copied().collect();
    // Newton polish with the original (scaled) coefficients.
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner_with_derivative(&monic, *r);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            // A multiple root makes Newton overshoot; damp long steps.
            let step = if step.norm() > 0.5 { step / step.norm() * 0.5 } else { step };
            *r -= step;
        }
    }
    roots.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(roots)
}

/// Evaluates `p(z)` and `p'(z)` by Horner's scheme (coefficients in
/// increasing-degree order).
pub fn horner_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Evaluates `p(z)` by Horner's scheme.
pub fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut p = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        p = p * z + c;
    }
    p
}
