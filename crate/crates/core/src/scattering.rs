//! Hyperradial zero-energy scattering and the scattering hypervolume.
//!
//! For hyperradial potentials the 6D defect equation reduces exactly to the
//! radial two-point problem
//!
//! ```text
//!     g'' + (5/r) g' = (v(r)/2) (g - 1),   g'(0) = 0,   g(r) ~ A r^-4
//! ```
//!
//! discretised here in conservative (finite-volume) form: integrating
//! (r^5 g')' = (v/2)(g-1) r^5 over node cells keeps second order through
//! the jump of a step profile because the cell loads int v r^5 dr are
//! computed exactly. Outside the support the exact decaying solution is
//! A r^-4, so the outer boundary condition g' + 4g/r = 0 is exact at any
//! r_max beyond the support and the far field costs nothing.
//!
//! The hypervolume is produced by two independent routes: the source
//! integral det(M) pi^3 int v (1-g) r^5 dr and the far-field coefficient
//! 8 pi^3 det(M) A; their agreement measures discretisation convergence.

use thiserror::Error;

use crate::mmatrix::mmatrix_constants;
use crate::potential::HyperradialPotential;
use crate::radial::RadialGrid;

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error("invalid radial grid: {0}")]
    InvalidGrid(String),
    #[error("BVP residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NonConvergence { residual: f64, tol: f64 },
    #[error("tail fit spread {spread:.3e} exceeds 1e-3; far field not resolved")]
    TailNotResolved { spread: f64 },
    #[error("truncation radius {lambda:.6e} below admissible minimum {required:.6e}")]
    LambdaTooSmall { lambda: f64, required: f64 },
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("integration budget exceeded: {0} evaluations requested")]
    IntegrationBudgetExceeded(u64),
}

/// Radial zero-energy scattering defect g with far-field data.
#[derive(Debug, Clone)]
pub struct ScatteringSolution {
    grid: RadialGrid,
    g: Vec<f64>,
    g_prime: Vec<f64>,
    /// Per-node cell integrals of v(r) r^5; reused by every quadrature that
    /// pairs the potential with the solution.
    cell_weights: Vec<f64>,
    pub tail_coeff: f64,
    pub tail_spread: f64,
    pub b_integral: f64,
    pub b_tail: f64,
    pub max_residual: f64,
    pub support_radius: f64,
}

/// Two-route hypervolume estimates.
#[derive(Debug, Clone, Copy)]
pub struct Hypervolume {
    pub b_integral: f64,
    pub b_tail: f64,
    pub tail_coeff: f64,
    pub rel_discrepancy: f64,
}

/// Solve the radial BVP on the given grid.
///
/// The grid must put at least 200 nodes inside the support and extend to
/// r_max >= 10 support radii (no constraint for the zero potential).
pub fn solve_scattering(
    v: &HyperradialPotential,
    grid: &RadialGrid,
    tol: f64,
) -> Result<ScatteringSolution, ScatteringError> {
    let rv = v.support_radius();
    let n = grid.len() - 1;
    if !v.is_zero() {
        let inside = grid.nodes_within(rv);
        if inside < 200 {
            return Err(ScatteringError::InvalidGrid(format!(
                "only {inside} nodes inside the support radius {rv}; need >= 200"
            )));
        }
        if grid.r_max() < 10.0 * rv {
            return Err(ScatteringError::InvalidGrid(format!(
                "r_max = {} < 10 support radii",
                grid.r_max()
            )));
        }
    }
    let r = grid.nodes();

    // cell faces at midpoints; the first cell starts at 0, the last ends at r_max
    let face = |i: usize| -> f64 { 0.5 * (r[i] + r[i + 1]) };
    let mut weights = vec![0.0; n + 1];
    for i in 0..=n {
        let lo = if i == 0 { 0.0 } else { face(i - 1) };
        let hi = if i == n { r[n] } else { face(i) };
        weights[i] = v.cell_integral_r5(lo, hi);
    }

    // tridiagonal system: sub, diag, sup, rhs
    let mut sub = vec![0.0; n + 1];
    let mut diag = vec![0.0; n + 1];
    let mut sup = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n + 1];
    for i in 0..n {
        let fp = face(i).powi(5) / (r[i + 1] - r[i]);
        let fm = if i == 0 {
            0.0
        } else {
            face(i - 1).powi(5) / (r[i] - r[i - 1])
        };
        sub[i] = fm;
        diag[i] = -(fp + fm) - 0.5 * weights[i];
        sup[i] = fp;
        rhs[i] = -0.5 * weights[i];
    }
    // outer node: eliminate the ghost with the exact Robin condition
    // g' = -4 g / r, leaving a pure decay row
    let h = r[n] - r[n - 1];
    let rm = r[n];
    sub[n] = 2.0 / (h * h);
    diag[n] = -2.0 / (h * h) - 8.0 / (h * rm) - 20.0 / (rm * rm);
    sup[n] = 0.0;
    rhs[n] = 0.0;

    let g = thomas(&sub, &diag, &sup, &rhs);

    // relative residual of the assembled system
    let mut max_res: f64 = 0.0;
    for i in 0..=n {
        let gm = if i > 0 { g[i - 1] } else { 0.0 };
        let gp = if i < n { g[i + 1] } else { 0.0 };
        let res = sub[i] * gm + diag[i] * g[i] + sup[i] * gp - rhs[i];
        let scale = sub[i].abs() * gm.abs()
            + diag[i].abs() * g[i].abs()
            + sup[i].abs() * gp.abs()
            + rhs[i].abs()
            + 1e-300;
        max_res = max_res.max((res / scale).abs());
    }
    if max_res > tol {
        return Err(ScatteringError::NonConvergence { residual: max_res, tol });
    }

    // derivative: second-order differences on a possibly nonuniform grid
    let mut g_prime = vec![0.0; n + 1];
    for i in 1..n {
        let hm = r[i] - r[i - 1];
        let hp = r[i + 1] - r[i];
        g_prime[i] = (hm / (hp * (hm + hp))) * g[i + 1]
            + ((hp - hm) / (hp * hm)) * g[i]
            - (hp / (hm * (hm + hp))) * g[i - 1];
    }
    g_prime[0] = 0.0;
    g_prime[n] = -4.0 * g[n] / r[n];

    // far-field coefficient from a constant fit of g r^4 over the outer 20%
    let cut = 0.8 * r[n];
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut qmin = f64::INFINITY;
    let mut qmax = f64::NEG_INFINITY;
    for i in 0..=n {
        if r[i] >= cut {
            let q = g[i] * r[i].powi(4);
            sum += q;
            count += 1;
            qmin = qmin.min(q);
            qmax = qmax.max(q);
        }
    }
    let tail_coeff = sum / count as f64;
    let tail_spread = (qmax - qmin) / tail_coeff.abs().max(1e-300);

    let mm = mmatrix_constants();
    let b_integral: f64 = mm.det_m
        * mm.sphere_area_5
        * weights
            .iter()
            .zip(&g)
            .map(|(w, gi)| w * (1.0 - gi))
            .sum::<f64>();
    let b_tail = 8.0 * mm.sphere_area_5 * mm.det_m * tail_coeff;

    Ok(ScatteringSolution {
        grid: grid.clone(),
        g,
        g_prime,
        cell_weights: weights,
        tail_coeff,
        tail_spread,
        b_integral,
        b_tail,
        max_residual: max_res,
        support_radius: rv,
    })
}

/// Two-route hypervolume with the relative discrepancy between routes.
pub fn hypervolume(
    sol: &ScatteringSolution,
    v: &HyperradialPotential,
) -> Result<Hypervolume, ScatteringError> {
    if !v.is_zero() && sol.tail_spread > 1e-3 {
        return Err(ScatteringError::TailNotResolved { spread: sol.tail_spread });
    }
    let mm = mmatrix_constants();
    let r = sol.grid.nodes();
    let n = r.len() - 1;
    let face = |i: usize| -> f64 { 0.5 * (r[i] + r[i + 1]) };
    let mut b_integral = 0.0;
    for i in 0..=n {
        let lo = if i == 0 { 0.0 } else { face(i - 1) };
        let hi = if i == n { r[n] } else { face(i) };
        b_integral += v.cell_integral_r5(lo, hi) * (1.0 - sol.g[i]);
    }
    b_integral *= mm.det_m * mm.sphere_area_5;
    let b_tail = 8.0 * mm.sphere_area_5 * mm.det_m * sol.tail_coeff;
    let rel = (b_integral - b_tail).abs() / b_integral.abs().max(1e-300);
    Ok(Hypervolume {
        b_integral,
        b_tail,
        tail_coeff: sol.tail_coeff,
        rel_discrepancy: rel,
    })
}

impl ScatteringSolution {
    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g
    }

    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_weights
    }

    /// g at arbitrary radius: linear interpolation on the grid, exact
    /// A r^-4 tail beyond it.
    pub fn g_at(&self, radius: f64) -> f64 {
        let r = self.grid.nodes();
        let rm = *r.last().unwrap();
        if radius >= rm {
            return self.tail_coeff / radius.powi(4);
        }
        if radius <= 0.0 {
            return self.g[0];
        }
        let j = r.partition_point(|&x| x < radius).max(1);
        let t = (radius - r[j - 1]) / (r[j] - r[j - 1]);
        (self.g[j - 1] * (1.0 - t) + self.g[j] * t).clamp(0.0, 1.0)
    }

    /// g' at arbitrary radius, with the exact -4 A r^-5 tail.
    pub fn g_prime_at(&self, radius: f64) -> f64 {
        let r = self.grid.nodes();
        let rm = *r.last().unwrap();
        if radius >= rm {
            return -4.0 * self.tail_coeff / radius.powi(5);
        }
        if radius <= 0.0 {
            return 0.0;
        }
        let j = r.partition_point(|&x| x < radius).max(1);
        let t = (radius - r[j - 1]) / (r[j] - r[j - 1]);
        self.g_prime[j - 1] * (1.0 - t) + self.g_prime[j] * t
    }
}

/// Thomas algorithm for a tridiagonal system.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = sup[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * cp[i - 1];
        cp[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}
