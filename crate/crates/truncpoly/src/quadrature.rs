//! Numerical integration: spectral trapezoid rules on circles and closed
//! level curves, Laurent-coefficient (moment) extraction with node doubling,
//! and weighted quadrature on the unit disc for the planar measure
//! `(1 - |z|^2)^(alpha - 1) |z - x|^gamma dA`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::LevelCurve;
use crate::linalg::{gauss_jacobi_01, horner};
use crate::model::ModelParams;
use crate::num::CompensatedC;

/// Default initial node count for circle rules.
pub const DEFAULT_START_NODES: usize = 512;

/// Hard cap on contour/circle nodes.
pub const MAX_NODES: usize = 16_384;

/// Default angular resolution of the disc rule.
pub const DEFAULT_ANGULAR: usize = 512;

/// Default radial (Gauss-Jacobi) resolution of the disc rule.
pub const DEFAULT_RADIAL: usize = 64;

/// Convergence policy for node-doubling rules.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Initial node count (rounded up to a power of two).
    pub start_nodes: usize,
    /// Doubling stops with an error once this many nodes fail to converge.
    pub max_nodes: usize,
    /// Relative tolerance on the doubling difference.
    pub rel_tol: f64,
    /// Absolute tolerance: values whose doubling difference falls below this
    /// are accepted regardless of their magnitude (covers quantities that
    /// vanish identically).
    pub abs_tol: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            start_nodes: DEFAULT_START_NODES,
            max_nodes: MAX_NODES,
            rel_tol: 1e-11,
            abs_tol: 1e-12,
        }
    }
}

/// An integral value with its node-doubling (or half-grid) error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error_estimate: f64,
    /// Number of nodes behind `value`.
    pub nodes: usize,
}

impl QuadResult {
    fn converged(&self, opts: &QuadOptions) -> bool {
        self.error_estimate <= opts.rel_tol * self.value.norm()
            || self.error_estimate <= opts.abs_tol
    }
}

// --------------------------------------------------------------------
// Contour grids and plain contour integrals
// --------------------------------------------------------------------

/// A closed parametrized contour sampled at uniform parameter steps:
/// node `k` carries the point `z(t_k)` and the derivative `dz/dt (t_k)`,
/// with `t` running over `[0, 2 pi)`.
#[derive(Debug, Clone)]
pub struct ContourGrid {
    pub points: Vec<Complex64>,
    pub derivatives: Vec<Complex64>,
}

impl ContourGrid {
    /// Counterclockwise circle `|z| = radius`.
    pub fn circle(radius: f64, node_count: usize) -> Self {
        let mut points = Vec::with_capacity(node_count);
        let mut derivatives = Vec::with_capacity(node_count);
        for k in 0..node_count {
            let theta = theta_node(k, node_count);
            let z = Complex64::from_polar(radius, theta);
            points.push(z);
            derivatives.push(Complex64::new(0.0, 1.0) * z);
        }
        Self { points, derivatives }
    }

    /// View of a traced level curve as a contour grid.
    pub fn from_level_curve(curve: &LevelCurve) -> Self {
        Self {
            points: curve.points.clone(),
            derivatives: curve.dz_dtheta.clone(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.points.len()
    }
}

/// Uniform angle with bit-exact nesting: doubling the node count keeps the
/// shared nodes bit-identical (power-of-two scalings are exact in binary
/// floating point).
fn theta_node(k: usize, node_count: usize) -> f64 {
    (TAU * k as f64) / node_count as f64
}

/// Trapezoid value of `\oint f(z) dz` on a closed grid, with the error
/// estimated by comparing against the half grid (every other node). For
/// smooth periodic integrands the full grid is spectrally accurate, so the
/// difference is dominated by the half-grid error and over-estimates the
/// true one.
pub fn contour_integral<F: Fn(Complex64) -> Complex64>(f: F, grid: &ContourGrid) -> QuadResult {
    let m = grid.node_count();
    let mut full = CompensatedC::new();
    let mut half = CompensatedC::new();
    for k in 0..m {
        let term = f(grid.points[k]) * grid.derivatives[k];
        full.add(term);
        if k % 2 == 0 {
            half.add(term);
        }
    }
    let value = full.value() * TAU / m as f64;
    let coarse = half.value() * TAU / (m.div_ceil(2)) as f64;
    QuadResult {
        value,
        error_estimate: (value - coarse).norm(),
        nodes: m,
    }
}

// --------------------------------------------------------------------
// Circle moments (Laurent coefficients)
// --------------------------------------------------------------------

/// `\oint z^j f(z) dz / (2 i z)` on the circle `|z| = radius`, i.e. `pi`
/// times the Laurent coefficient of `z^{-j}` of `f` there. Nodes double
/// until the value stabilizes.
pub fn circle_moment<F: Fn(Complex64) -> Complex64>(
    f: F,
    radius: f64,
    j: i64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    Ok(circle_moment_batch(f, radius, &[j], opts)?.pop().expect("one result"))
}

/// Batch form of [`circle_moment`]: all requested `j` are extracted from the
/// same function samples, and the doubling continues until every one of
/// them has converged.
pub fn circle_moment_batch<F: Fn(Complex64) -> Complex64>(
    f: F,
    radius: f64,
    js: &[i64],
    opts: &QuadOptions,
) -> Result<Vec<QuadResult>> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!(
            "moment circle radius must be positive, got {radius}"
        )));
    }
    if js.is_empty() {
        return Ok(Vec::new());
    }
    let mut m = opts.start_nodes.next_power_of_two().max(16);
    // j-resolution: a K-node rule aliases z^j with z^(j +- K).
    let span = js.iter().map(|j| j.unsigned_abs() as usize).max().unwrap();
    while m < 4 * span.max(4) {
        m *= 2;
    }
    if m > opts.max_nodes {
        return Err(Error::Domain(format!(
            "j range needs {m} nodes, above the cap {}",
            opts.max_nodes
        )));
    }
    let mut samples: Vec<Complex64> = (0..m)
        .map(|k| f(Complex64::from_polar(radius, theta_node(k, m))))
        .collect();
    let mut vals = dft_moments(&samples, radius, js);
    loop {
        if 2 * m > opts.max_nodes {
            return Err(Error::Convergence(format!(
                "circle moments not converged at {m} nodes"
            )));
        }
        // Double with bit-exact sample reuse: old node k becomes node 2k.
        let mut next = Vec::with_capacity(2 * m);
        for k in 0..m {
            next.push(samples[k]);
            next.push(f(Complex64::from_polar(
                radius,
                theta_node(2 * k + 1, 2 * m),
            )));
        }
        samples = next;
        m *= 2;
        let refined = dft_moments(&samples, radius, js);
        // The trapezoid sum for moment j averages terms of size up to
        // fmax * radius^j, each already carrying relative roundoff from
        // evaluating f and z^j; successive doublings therefore plateau
        // near eps * fmax * radius^j no matter how many nodes are added,
        // and the tolerance check must not demand less than that.
        let fmax = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let results: Vec<QuadResult> = refined
            .iter()
            .zip(vals.iter())
            .map(|(&v, &prev)| QuadResult {
                value: v,
                error_estimate: (v - prev).norm(),
                nodes: m,
            })
            .collect();
        let done = results.iter().zip(js.iter()).all(|(r, &j)| {
            let floor = 32.0 * f64::EPSILON * fmax * radius.powi(j as i32);
            r.converged(opts) || r.error_estimate <= floor
        });
        if done {
            return Ok(results);
        }
        vals = refined;
    }
}

/// Trapezoid evaluation of `(pi / K) sum_k z_k^j f_k` for each `j`.
/// Parallel over `j`; within each `j` the summation order is fixed, so the
/// result is independent of the thread schedule.
fn dft_moments(samples: &[Complex64], radius: f64, js: &[i64]) -> Vec<Complex64> {
    use rayon::prelude::*;
    let m = samples.len();
    let zs: Vec<Complex64> = (0..m)
        .map(|k| Complex64::from_polar(radius, theta_node(k, m)))
        .collect();
    js.par_iter()
        .map(|&j| {
            let mut acc = CompensatedC::new();
            for (z, &fk) in zs.iter().zip(samples.iter()) {
                acc.add(z.powi(j as i32) * fk);
            }
            acc.value() * PI / m as f64
        })
        .collect()
}

// --------------------------------------------------------------------
// Disc quadrature for the planar measure
// --------------------------------------------------------------------

/// Quadrature rule for `\int_D f(z) (1 - |z|^2)^(alpha - 1) |z - x|^gamma dA`
/// over the unit disc.
///
/// The rule is polar *around the singular point* `z = x + rho e^(i psi)`:
/// on each ray the boundary sits at `rho_+(psi)` and the Jacobi factor
/// splits as `1 - |z|^2 = (rho_+ - rho)(rho - rho_-)` with `rho_- < 0`, so
/// with `rho = rho_+ t` the full integrand becomes
/// `(1 - t)^(alpha - 1) t^(gamma + 1)` (handled exactly by a Gauss-Jacobi
/// rule) times a factor analytic in `t` on `[0, 1]`. Both the `|z - x|^gamma`
/// singularity and the boundary factor are therefore folded into the nodes,
/// and no local refinement patch is needed.
#[derive(Debug, Clone)]
pub struct DiscRule {
    x: f64,
    alpha: f64,
    gamma: Complex64,
    /// Angular nodes `psi_k` (uniform) with ray data `(rho_+, rho_-)`.
    rays: Vec<(f64, f64, f64)>,
    /// Gauss-Jacobi nodes and weights for `(1 - t)^(alpha - 1) t^(Re gamma + 1)`.
    t_nodes: Vec<f64>,
    t_weights: Vec<f64>,
}

impl DiscRule {
    pub fn new(p: &ModelParams, angular: usize, radial: usize) -> Result<Self> {
        if angular < 8 || radial < 4 {
            return Err(Error::Domain(format!(
                "disc rule needs at least 8 x 4 nodes, got {angular} x {radial}"
            )));
        }
        if angular > MAX_NODES || radial > MAX_NODES {
            return Err(Error::Domain(format!(
                "disc rule capped at {MAX_NODES} nodes per direction"
            )));
        }
        let x = p.x();
        let alpha = p.alpha();
        let gamma = p.gamma();
        let (t_nodes, t_weights) = gauss_jacobi_01(radial, alpha - 1.0, gamma.re + 1.0)?;
        let rays = (0..angular)
            .map(|k| {
                let psi = theta_node(k, angular);
                let root = (1.0 - (x * psi.sin()).powi(2)).sqrt();
                let rho_plus = -x * psi.cos() + root;
                let rho_minus = -x * psi.cos() - root;
                (psi, rho_plus, rho_minus)
            })
            .collect();
        Ok(Self {
            x,
            alpha,
            gamma,
            rays,
            t_nodes,
            t_weights,
        })
    }

    pub fn angular(&self) -> usize {
        self.rays.len()
    }

    pub fn radial(&self) -> usize {
        self.t_nodes.len()
    }

    /// Flattened node list `(z_i, w_i)` with every weight factor folded in,
    /// so that `integrate(f)` equals `sum_i w_i f(z_i)` up to summation
    /// order. Lets callers that need many integrals against the same measure
    /// (e.g. Gram matrices) make a single pass; iterate in the given order
    /// for reproducible sums.
    pub fn nodes(&self) -> Vec<(Complex64, Complex64)> {
        let im_gamma = self.gamma.im;
        let outer = TAU / self.rays.len() as f64;
        let mut out = Vec::with_capacity(self.rays.len() * self.t_nodes.len());
        for &(psi, rho_plus, rho_minus) in &self.rays {
            let dir = Complex64::from_polar(1.0, psi);
            let ray_scale = ((self.alpha + 1.0 + self.gamma.re) * rho_plus.ln()).exp();
            let ray_phase = Complex64::new(0.0, im_gamma * rho_plus.ln()).exp();
            for (&t, &wt) in self.t_nodes.iter().zip(self.t_weights.iter()) {
                let z = Complex64::new(self.x, 0.0) + dir * (rho_plus * t);
                let chord = (rho_plus * t - rho_minus).powf(self.alpha - 1.0);
                let mut w = ray_phase * (chord * wt * ray_scale * outer);
                if im_gamma != 0.0 {
                    w *= Complex64::new(0.0, im_gamma * t.ln()).exp();
                }
                out.push((z, w));
            }
        }
        out
    }

    /// `\int_D f(z) dmu(z)` with the full weight folded into the rule.
    pub fn integrate<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Complex64 {
        let mut acc = CompensatedC::new();
        let im_gamma = self.gamma.im;
        for &(psi, rho_plus, rho_minus) in &self.rays {
            let dir = Complex64::from_polar(1.0, psi);
            // rho_+^(alpha + gamma + 1) collects the ray-length powers from
            // the substitution rho = rho_+ t.
            let ray_scale = ((self.alpha + 1.0 + self.gamma.re) * rho_plus.ln()).exp();
            let ray_phase = Complex64::new(0.0, im_gamma * rho_plus.ln()).exp();
            let mut ray = CompensatedC::new();
            for (&t, &wt) in self.t_nodes.iter().zip(self.t_weights.iter()) {
                let z = Complex64::new(self.x, 0.0) + dir * (rho_plus * t);
                let chord = (rho_plus * t - rho_minus).powf(self.alpha - 1.0);
                let mut term = f(z) * (chord * wt);
                if im_gamma != 0.0 {
                    // Leftover oscillatory part of t^gamma for complex gamma.
                    term *= Complex64::new(0.0, im_gamma * t.ln()).exp();
                }
                ray.add(term);
            }
            acc.add(ray.value() * (ray_scale * ray_phase));
        }
        acc.value() * TAU / self.rays.len() as f64
    }
}

/// `\int_D p(z) conj(q(z)) dmu(z)` on a prepared rule; coefficients in
/// increasing-degree order.
pub fn planar_inner_product(
    pcoef: &[Complex64],
    qcoef: &[Complex64],
    rule: &DiscRule,
) -> Complex64 {
    rule.integrate(|z| horner(pcoef, z) * horner(qcoef, z).conj())
}

/// Self-validating inner product: evaluates on the default rule and a
/// doubled one, erroring if they disagree beyond `rel_tol`.
pub fn planar_inner_product_checked(
    pcoef: &[Complex64],
    qcoef: &[Complex64],
    p: &ModelParams,
    rel_tol: f64,
) -> Result<QuadResult> {
    let coarse = DiscRule::new(p, DEFAULT_ANGULAR, DEFAULT_RADIAL)?;
    let fine = DiscRule::new(p, 2 * DEFAULT_ANGULAR, 2 * DEFAULT_RADIAL)?;
    let a = planar_inner_product(pcoef, qcoef, &coarse);
    let b = planar_inner_product(pcoef, qcoef, &fine);
    let err = (a - b).norm();
    if err > rel_tol * b.norm().max(1e-300) && err > 1e-14 {
        return Err(Error::Accuracy(format!(
            "disc quadrature refinement moved the value by {err:.3e} (relative {:.3e})",
            err / b.norm().max(1e-300)
        )));
    }
    Ok(QuadResult {
        value: b,
        error_estimate: err,
        nodes: 2 * DEFAULT_ANGULAR * 2 * DEFAULT_RADIAL,
    })
}
