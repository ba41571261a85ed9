//! Smooth truncation of the scattering solution and its diagnostics.
//!
//! The truncation multiplies the scaled defect omega_N(x) = g(sqrt(N) s),
//! s = |M^{-1}x|, by a hyperradial C^2 bump chi(s/lambda'); hyperradial
//! profiles are automatically three-body symmetric. The cutoff scale is
//! lambda' = lambda * sqrt(2/3), so |x| >= lambda implies s >= lambda' and
//! the truncated field is supported in the Euclidean ball of radius lambda.
//! The `1`-region of the bump then covers the Euclidean ball of radius
//! lambda / (2 sqrt(3)); the admissibility threshold below accounts for it.
//!
//! The commutator field
//!
//! ```text
//!     eps(s) = 4 N^2 g_N'(s) c'(s) + 2 N^2 g_N(s) (c''(s) + 5 c'(s)/s)
//! ```
//!
//! lives on the annulus where the bump varies, and the compensator u with
//! -2(u'' + 5u'/s) = eps is produced by radial double integration:
//! s^5 u'(s) = -(1/2) int_0^s eps t^5 dt, closed beyond the annulus by the
//! exact E/(8 s^4) far field.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mmatrix::{mmatrix_constants, MMatrixConstants};
use crate::qmc::{gauss_legendre, split_sphere_average_sqrt};
use crate::scattering::{ScatteringError, ScatteringSolution};

/// Hyperradial C^2 bump: 1 on [0, 1/2], 0 on [1, inf), a quintic
/// smootherstep 1 - (6t^5 - 15t^4 + 10t^3), t = 2 tau - 1, in between.
#[derive(Debug, Clone, Copy, Default)]
pub struct CutoffProfile;

impl CutoffProfile {
    pub fn value(&self, tau: f64) -> f64 {
        if tau <= 0.5 {
            1.0
        } else if tau >= 1.0 {
            0.0
        } else {
            let t = 2.0 * tau - 1.0;
            1.0 - (6.0 * t.powi(5) - 15.0 * t.powi(4) + 10.0 * t.powi(3))
        }
    }

    pub fn derivative(&self, tau: f64) -> f64 {
        if tau <= 0.5 || tau >= 1.0 {
            0.0
        } else {
            let t = 2.0 * tau - 1.0;
            -2.0 * (30.0 * t.powi(4) - 60.0 * t.powi(3) + 30.0 * t.powi(2))
        }
    }

    pub fn second_derivative(&self, tau: f64) -> f64 {
        if tau <= 0.5 || tau >= 1.0 {
            0.0
        } else {
            let t = 2.0 * tau - 1.0;
            -4.0 * (120.0 * t.powi(3) - 180.0 * t.powi(2) + 60.0 * t)
        }
    }
}

/// Truncated scattering fields with radial evaluators on R^6.
#[derive(Debug, Clone)]
pub struct TruncatedScattering {
    base: ScatteringSolution,
    mm: MMatrixConstants,
    cutoff: CutoffProfile,
    /// Truncation radius in the untransformed metric.
    pub lambda: f64,
    /// Hyperradial cutoff scale lambda * sqrt(2/3).
    pub lambda_s: f64,
    pub n_particles: f64,
    // radial table for the compensator and its derivative
    u_grid: Vec<f64>,
    u_vals: Vec<f64>,
    u_prime: Vec<f64>,
    /// Total moment int eps s^5 ds; fixes the far field E/(8 s^4).
    eps_moment: f64,
}

/// Volume and slice norms of the truncated fields.
#[derive(Debug, Clone, Copy)]
pub struct NormReport {
    pub lambda: f64,
    pub n_particles: f64,
    pub omega_l1: f64,
    pub omega_l2: f64,
    pub grad_omega_l1: f64,
    pub grad_omega_l2: f64,
    pub omega_l1linf: f64,
    pub omega_l32linf: f64,
    pub omega_l2linf: f64,
    pub grad_omega_l1linf: f64,
    pub eps_l2: f64,
    pub grad_u_l2: f64,
}

impl NormReport {
    /// Fixed CSV column order used by every norm table.
    pub const CSV_HEADER: &'static str = "lambda,n_particles,omega_l1,omega_l2,grad_omega_l1,grad_omega_l2,omega_l1linf,omega_l32linf,omega_l2linf,grad_omega_l1linf,eps_l2,grad_u_l2";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.lambda,
            self.n_particles,
            self.omega_l1,
            self.omega_l2,
            self.grad_omega_l1,
            self.grad_omega_l2,
            self.omega_l1linf,
            self.omega_l32linf,
            self.omega_l2linf,
            self.grad_omega_l1linf,
            self.eps_l2,
            self.grad_u_l2
        )
    }
}

/// Empirical constants of the pointwise envelopes.
#[derive(Debug, Clone, Copy)]
pub struct PointwiseConstants {
    /// sup omega_{lambda,N}(x) (1 + |sqrt(N) x|^4)
    pub c_omega: f64,
    /// sup |eps(x)| lambda^2 |x|^4 over the annulus
    pub c_eps: f64,
    /// sup |u(x)| (lambda^4 + |x|^4)
    pub c_u: f64,
    /// sup |grad u(x)| (lambda^5 + |x|^5)
    pub c_grad_u: f64,
}

const U_TABLE_LEN: usize = 24_001;

/// Build the truncated fields for a given truncation radius and particle
/// count.
///
/// Admissibility: the bump must be identically 1 on the support of the
/// scaled potential, which in the untransformed metric requires
/// lambda >= 2 ||M|| R_v N^{-1/2}.
pub fn truncate(
    base: &ScatteringSolution,
    lambda: f64,
    n_particles: u64,
) -> Result<TruncatedScattering, ScatteringError> {
    let mm = mmatrix_constants();
    let n = n_particles as f64;
    let required = 2.0 * mm.op_norm() * base.support_radius / n.sqrt();
    if lambda < required || n_particles == 0 {
        return Err(ScatteringError::LambdaTooSmall { lambda, required });
    }
    let lambda_s = lambda * (2.0f64 / 3.0).sqrt();
    let cutoff = CutoffProfile;

    let mut ts = TruncatedScattering {
        base: base.clone(),
        mm,
        cutoff,
        lambda,
        lambda_s,
        n_particles: n,
        u_grid: Vec::new(),
        u_vals: Vec::new(),
        u_prime: Vec::new(),
        eps_moment: 0.0,
    };

    // compensator table on [0, 1.5 lambda_s]: cumulative moment, then
    // backward accumulation from the exact far field
    let s_end = 1.5 * lambda_s;
    let m = U_TABLE_LEN;
    let h = s_end / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|j| j as f64 * h).collect();
    let eps: Vec<f64> = grid.iter().map(|&s| ts.eps_radial(s)).collect();
    let mut cum = vec![0.0; m];
    for j in 1..m {
        cum[j] = cum[j - 1]
            + 0.5 * h * (eps[j - 1] * grid[j - 1].powi(5) + eps[j] * grid[j].powi(5));
    }
    let e_tot = cum[m - 1];
    let mut u_prime = vec![0.0; m];
    for j in 1..m {
        u_prime[j] = -cum[j] / (2.0 * grid[j].powi(5));
    }
    let mut u_vals = vec![0.0; m];
    u_vals[m - 1] = e_tot / (8.0 * s_end.powi(4));
    for j in (0..m - 1).rev() {
        u_vals[j] = u_vals[j + 1] + 0.5 * h * (u_prime[j] + u_prime[j + 1]);
    }
    ts.u_grid = grid;
    ts.u_vals = u_vals;
    ts.u_prime = u_prime;
    ts.eps_moment = e_tot;
    Ok(ts)
}

impl TruncatedScattering {
    pub fn base(&self) -> &ScatteringSolution {
        &self.base
    }

    /// Hyperradius of a 6D point.
    pub fn hyperradius(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        self.mm.hyperradius(a, b)
    }

    /// Unscaled defect omega_N at hyperradius s.
    pub fn omega_n_radial(&self, s: f64) -> f64 {
        self.base.g_at(self.n_particles.sqrt() * s)
    }

    fn omega_n_prime_radial(&self, s: f64) -> f64 {
        let sn = self.n_particles.sqrt();
        sn * self.base.g_prime_at(sn * s)
    }

    /// Cutoff value at hyperradius s.
    pub fn chi_radial(&self, s: f64) -> f64 {
        self.cutoff.value(s / self.lambda_s)
    }

    /// Truncated defect at hyperradius s.
    pub fn omega_radial(&self, s: f64) -> f64 {
        self.omega_n_radial(s) * self.chi_radial(s)
    }

    /// d/ds of the truncated defect.
    pub fn omega_prime_radial(&self, s: f64) -> f64 {
        let tau = s / self.lambda_s;
        self.omega_n_prime_radial(s) * self.cutoff.value(tau)
            + self.omega_n_radial(s) * self.cutoff.derivative(tau) / self.lambda_s
    }

    /// Commutator field at hyperradius s; vanishes off the cutoff annulus.
    pub fn eps_radial(&self, s: f64) -> f64 {
        let tau = s / self.lambda_s;
        if tau <= 0.5 || tau >= 1.0 {
            return 0.0;
        }
        let n2 = self.n_particles * self.n_particles;
        let c1 = self.cutoff.derivative(tau) / self.lambda_s;
        let c2 = self.cutoff.second_derivative(tau) / (self.lambda_s * self.lambda_s);
        4.0 * n2 * self.omega_n_prime_radial(s) * c1
            + 2.0 * n2 * self.omega_n_radial(s) * (c2 + 5.0 * c1 / s)
    }

    /// Compensator value at hyperradius s.
    pub fn u_radial(&self, s: f64) -> f64 {
        let end = *self.u_grid.last().unwrap();
        if s >= end {
            return self.eps_moment / (8.0 * s.powi(4));
        }
        let h = self.u_grid[1];
        let j = ((s / h) as usize).min(self.u_grid.len() - 2);
        let t = (s - self.u_grid[j]) / h;
        self.u_vals[j] * (1.0 - t) + self.u_vals[j + 1] * t
    }

    /// d/ds of the compensator.
    pub fn u_prime_radial(&self, s: f64) -> f64 {
        let end = *self.u_grid.last().unwrap();
        if s >= end {
            return -self.eps_moment / (2.0 * s.powi(5));
        }
        let h = self.u_grid[1];
        let j = ((s / h) as usize).min(self.u_grid.len() - 2);
        let t = (s - self.u_grid[j]) / h;
        self.u_prime[j] * (1.0 - t) + self.u_prime[j + 1] * t
    }

    /// omega_{lambda,N} at a 6D point given as two R^3 relative vectors.
    pub fn omega_at(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        self.omega_radial(self.hyperradius(a, b))
    }

    /// f_{lambda,N} = 1 - omega_{lambda,N}.
    pub fn f_at(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        1.0 - self.omega_at(a, b)
    }

    pub fn eps_at(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        self.eps_radial(self.hyperradius(a, b))
    }

    pub fn u_at(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        self.u_radial(self.hyperradius(a, b))
    }

    /// |grad u| at a 6D point: the chain rule through s = |M^{-1}x| gives
    /// grad u(x) = (M^{-2} x / s) u'(s).
    pub fn grad_u_mag_at(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        let s = self.hyperradius(a, b);
        if s == 0.0 {
            return 0.0;
        }
        let (p, q) = self.mm.apply_inv(a, b);
        let (p2, q2) = self.mm.apply_inv(p, q);
        MMatrixConstants::norm6(p2, q2) / s * self.u_prime_radial(s).abs()
    }

    /// Volume and slice norms by radial quadrature and a coarse x-net.
    ///
    /// Every integral is evaluated at two resolutions; disagreement beyond
    /// 1e-3 relative reports a quadrature failure.
    pub fn field_norms(&self) -> Result<NormReport, ScatteringError> {
        let fine = self.norms_at_resolution(60_000, 4_000, 48)?;
        let coarse = self.norms_at_resolution(30_000, 2_000, 32)?;
        let pairs = [
            (fine.omega_l1, coarse.omega_l1),
            (fine.omega_l2, coarse.omega_l2),
            (fine.grad_omega_l1, coarse.grad_omega_l1),
            (fine.grad_omega_l2, coarse.grad_omega_l2),
            (fine.omega_l1linf, coarse.omega_l1linf),
            (fine.omega_l32linf, coarse.omega_l32linf),
            (fine.omega_l2linf, coarse.omega_l2linf),
            (fine.grad_omega_l1linf, coarse.grad_omega_l1linf),
            (fine.eps_l2, coarse.eps_l2),
            (fine.grad_u_l2, coarse.grad_u_l2),
        ];
        for (f, c) in pairs {
            if !f.is_finite() || !c.is_finite() {
                return Err(ScatteringError::QuadratureFailure("non-finite norm".into()));
            }
            let scale = f.abs().max(1e-300);
            if f != 0.0 && ((f - c) / scale).abs() > 1e-3 {
                return Err(ScatteringError::QuadratureFailure(format!(
                    "norm quadrature not converged: {f:.6e} vs {c:.6e}"
                )));
            }
        }
        Ok(fine)
    }

    fn norms_at_resolution(
        &self,
        radial_nodes: usize,
        slice_rho_nodes: usize,
        slice_angle_nodes: usize,
    ) -> Result<NormReport, ScatteringError> {
        let mm = &self.mm;
        let pi3 = mm.sphere_area_5;
        let det = mm.det_m;
        // sphere averages of |M^{-1} sigma| and |M^{-1} sigma|^2 over the
        // split into sqrt(2/3)/sqrt(2) eigenspaces
        let avg_minv = split_sphere_average_sqrt(2.0 / 3.0, 2.0);
        let avg_minv_sq = 0.5 * (2.0 / 3.0) + 0.5 * 2.0;

        if self.base.support_radius == 0.0 {
            return Ok(NormReport {
                lambda: self.lambda,
                n_particles: self.n_particles,
                omega_l1: 0.0,
                omega_l2: 0.0,
                grad_omega_l1: 0.0,
                grad_omega_l2: 0.0,
                omega_l1linf: 0.0,
                omega_l32linf: 0.0,
                omega_l2linf: 0.0,
                grad_omega_l1linf: 0.0,
                eps_l2: 0.0,
                grad_u_l2: 0.0,
            });
        }

        // log-spaced radial quadrature over the support of the truncated
        // fields; resolves both the N^{-1/2} core and the cutoff annulus
        let s_lo = self.lambda_s * 1e-8;
        let s_hi = self.lambda_s;
        let m = radial_nodes;
        let dln = (s_hi / s_lo).ln() / m as f64;
        let mut int_h = 0.0; // omega s^5
        let mut int_h2 = 0.0; // omega^2 s^5
        let mut int_hd = 0.0; // |omega'| s^5
        let mut int_hd2 = 0.0; // omega'^2 s^5
        let mut int_e2 = 0.0; // eps^2 s^5
        let mut int_up2 = 0.0; // u'^2 s^5
        let mut prev: Option<[f64; 6]> = None;
        for j in 0..=m {
            let s = s_lo * (dln * j as f64).exp();
            let h = self.omega_radial(s);
            let hd = self.omega_prime_radial(s);
            let e = self.eps_radial(s);
            let up = self.u_prime_radial(s);
            let w5 = s.powi(5) * s; // extra s from the log measure
            let row = [
                h * w5,
                h * h * w5,
                hd.abs() * w5,
                hd * hd * w5,
                e * e * w5,
                up * up * w5,
            ];
            if let Some(p) = prev {
                int_h += 0.5 * dln * (p[0] + row[0]);
                int_h2 += 0.5 * dln * (p[1] + row[1]);
                int_hd += 0.5 * dln * (p[2] + row[2]);
                int_hd2 += 0.5 * dln * (p[3] + row[3]);
                int_e2 += 0.5 * dln * (p[4] + row[4]);
                int_up2 += 0.5 * dln * (p[5] + row[5]);
            }
            prev = Some(row);
        }
        // closure below s_lo: omega ~ omega(0), u' -> 0 there
        let h0 = self.omega_radial(0.0);
        int_h += h0 * s_lo.powi(6) / 6.0;
        int_h2 += h0 * h0 * s_lo.powi(6) / 6.0;
        // u'^2 tail beyond the table: u' = -E/(2 s^5)
        let e_tot = self.eps_moment;
        let tail_up2 = e_tot * e_tot / (16.0 * s_hi.powi(4));

        let omega_l1 = det * pi3 * int_h;
        let omega_l2 = (det * pi3 * int_h2).sqrt();
        let grad_omega_l1 = det * pi3 * avg_minv * int_hd;
        let grad_omega_l2 = (det * pi3 * avg_minv_sq * int_hd2).sqrt();
        let eps_l2 = (det * pi3 * int_e2).sqrt();
        let grad_u_l2 = (det * pi3 * avg_minv_sq * (int_up2 + tail_up2)).sqrt();

        // slice norms sup_x || f(x, .) ||_{L^p(R^3)} on a coarse |x| net;
        // the kernel depends on x only through |x|
        let (gl_nodes, gl_weights) = gauss_legendre(slice_angle_nodes);
        let xs: Vec<f64> = (0..6).map(|k| k as f64 * 0.25 * self.lambda_s).collect();
        let mut sup = [0.0f64; 4]; // L1, L3/2, L2 of omega; L1 of |grad omega|
        for &xv in &xs {
            let rho_lo = self.lambda_s * 1e-8;
            let rho_hi = xv + 1.1 * self.lambda_s;
            let mr = slice_rho_nodes;
            let dlr = (rho_hi / rho_lo).ln() / mr as f64;
            let mut acc = [0.0f64; 4];
            let mut prev_row: Option<[f64; 4]> = None;
            for j in 0..=mr {
                let rho = rho_lo * (dlr * j as f64).exp();
                let mut vals = [0.0f64; 4];
                for (t, w) in gl_nodes.iter().zip(&gl_weights) {
                    // s^2 = (4/3)(X^2 - X rho u + rho^2)
                    let s2 = (4.0 / 3.0) * (xv * xv - xv * rho * t + rho * rho);
                    let s = s2.max(0.0).sqrt();
                    if s >= self.lambda_s {
                        continue;
                    }
                    let h = self.omega_radial(s);
                    vals[0] += w * h;
                    vals[1] += w * h.powf(1.5);
                    vals[2] += w * h * h;
                    // |grad omega|(x, y) = |M^{-2}(x,y)|/s |omega'(s)|
                    let m2 =
                        (2.0 / 3.0) * (5.0 * xv * xv + 5.0 * rho * rho - 8.0 * xv * rho * t).max(0.0).sqrt();
                    let gd = if s > 0.0 {
                        m2 / s * self.omega_prime_radial(s).abs()
                    } else {
                        0.0
                    };
                    vals[3] += w * gd;
                }
                let w5 = rho * rho * rho; // rho^2 plus the log measure
                let row = [
                    vals[0] * w5,
                    vals[1] * w5,
                    vals[2] * w5,
                    vals[3] * w5,
                ];
                if let Some(p) = prev_row {
                    for k in 0..4 {
                        acc[k] += 0.5 * dlr * (p[k] + row[k]);
                    }
                }
                prev_row = Some(row);
            }
            let two_pi = 2.0 * std::f64::consts::PI;
            sup[0] = sup[0].max(two_pi * acc[0]);
            sup[1] = sup[1].max((two_pi * acc[1]).powf(2.0 / 3.0));
            sup[2] = sup[2].max((two_pi * acc[2]).sqrt());
            sup[3] = sup[3].max(two_pi * acc[3]);
        }

        Ok(NormReport {
            lambda: self.lambda,
            n_particles: self.n_particles,
            omega_l1,
            omega_l2,
            grad_omega_l1,
            grad_omega_l2,
            omega_l1linf: sup[0],
            omega_l32linf: sup[1],
            omega_l2linf: sup[2],
            grad_omega_l1linf: sup[3],
            eps_l2,
            grad_u_l2,
        })
    }

    /// Empirical constants of the pointwise envelopes over seeded random
    /// 6D samples spanning core, annulus and far field.
    pub fn pointwise_bound_constants(&self, sample_count: usize, seed: u64) -> PointwiseConstants {
        assert!(sample_count >= 1000, "need at least 1e3 samples");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sn = self.n_particles.sqrt();
        let s_lo = 1e-3 * self.lambda_s / sn;
        let s_hi = 4.0 * self.lambda_s;
        let lam = self.lambda;
        let mut c = PointwiseConstants {
            c_omega: 0.0,
            c_eps: 0.0,
            c_u: 0.0,
            c_grad_u: 0.0,
        };
        if self.base.support_radius == 0.0 {
            return c;
        }
        for _ in 0..sample_count {
            let s = s_lo * (s_hi / s_lo).powf(rng.random::<f64>());
            // isotropic direction on S^5 via normalized Gaussians
            let mut dir = [0.0f64; 6];
            let mut norm = 0.0;
            for k in 0..3 {
                let u1: f64 = rng.random::<f64>().max(1e-300);
                let u2: f64 = rng.random();
                let r = (-2.0 * u1.ln()).sqrt();
                dir[2 * k] = r * (2.0 * std::f64::consts::PI * u2).cos();
                dir[2 * k + 1] = r * (2.0 * std::f64::consts::PI * u2).sin();
            }
            for d in dir {
                norm += d * d;
            }
            let norm = norm.sqrt().max(1e-300);
            let eta_a = [s * dir[0] / norm, s * dir[1] / norm, s * dir[2] / norm];
            let eta_b = [s * dir[3] / norm, s * dir[4] / norm, s * dir[5] / norm];
            // x = M eta has hyperradius s
            let (a, b) = self.mm.apply(eta_a, eta_b);
            let x_norm = MMatrixConstants::norm6(a, b);
            let omega = self.omega_radial(s);
            c.c_omega = c.c_omega.max(omega * (1.0 + (sn * x_norm).powi(4)));
            let eps = self.eps_radial(s);
            if eps != 0.0 {
                c.c_eps = c.c_eps.max(eps.abs() * lam * lam * x_norm.powi(4));
            }
            let u = self.u_radial(s);
            c.c_u = c.c_u.max(u.abs() * (lam.powi(4) + x_norm.powi(4)));
            let gu = self.grad_u_mag_at(a, b);
            c.c_grad_u = c.c_grad_u.max(gu * (lam.powi(5) + x_norm.powi(5)));
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::HyperradialPotential;
    use crate::radial::RadialGrid;
    use crate::scattering::solve_scattering;

    fn base_solution(v0: f64) -> ScatteringSolution {
        let v = HyperradialPotential::step(v0, 1.0);
        let grid = RadialGrid::uniform(10.0, 20_000);
        solve_scattering(&v, &grid, 1e-10).unwrap()
    }

    #[test]
    fn cutoff_profile_is_c2_with_unit_plateau() {
        let c = CutoffProfile;
        assert_eq!(c.value(0.3), 1.0);
        assert_eq!(c.value(1.2), 0.0);
        // continuity of value and derivatives at the seams
        for tau in [0.5, 1.0] {
            let eps = 1e-7;
            assert!((c.value(tau - eps) - c.value(tau + eps)).abs() < 1e-5);
            assert!((c.derivative(tau - eps) - c.derivative(tau + eps)).abs() < 1e-4);
            assert!((c.second_derivative(tau - eps) - c.second_derivative(tau + eps)).abs() < 1e-2);
        }
        // monotone between the plateaus
        let mut last = 1.0;
        for j in 0..100 {
            let v = c.value(0.5 + 0.005 * j as f64);
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn lambda_admissibility_is_enforced() {
        let sol = base_solution(10.0);
        // support radius 1, N = 100 -> required = 2 sqrt(3/2) / 10
        let required = 2.0 * (1.5f64).sqrt() / 10.0;
        assert!(truncate(&sol, 0.9 * required, 100).is_err());
        assert!(truncate(&sol, 1.1 * required, 100).is_ok());
    }

    #[test]
    fn truncation_plateau_and_support() {
        let sol = base_solution(10.0);
        let ts = truncate(&sol, 1.0, 400).unwrap();
        // chi = 1 region: omega equals the scaled defect
        for s in [0.1 * ts.lambda_s, 0.49 * ts.lambda_s] {
            assert_eq!(ts.omega_radial(s), ts.omega_n_radial(s));
            assert_eq!(ts.eps_radial(s), 0.0);
        }
        // chi = 0 region
        for s in [ts.lambda_s, 1.5 * ts.lambda_s] {
            assert_eq!(ts.omega_radial(s), 0.0);
            assert_eq!(ts.eps_radial(s), 0.0);
        }
        // Euclidean support: |x| >= lambda implies omega = 0
        let a = [ts.lambda, 0.0, 0.0];
        let b = [0.0, 0.0, 0.0];
        assert_eq!(ts.omega_at(a, b), 0.0);
    }

    #[test]
    fn monotone_truncation_pointwise() {
        let sol = base_solution(100.0);
        let ts = truncate(&sol, 1.0, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            for k in 0..3 {
                a[k] = 2.0 * rng.random::<f64>() - 1.0;
                b[k] = 2.0 * rng.random::<f64>() - 1.0;
            }
            let s = ts.hyperradius(a, b);
            let om = ts.omega_at(a, b);
            let om_n = ts.omega_n_radial(s);
            assert!(om >= -1e-15 && om <= om_n + 1e-15 && om_n <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn compensator_solves_radial_poisson() {
        let sol = base_solution(100.0);
        let ts = truncate(&sol, 1.0, 400).unwrap();
        // residual of -2(u'' + 5 u'/s) = eps via central differences on the
        // u' table, checked across the annulus and beyond
        let h = 1e-6 * ts.lambda_s;
        let mut worst: f64 = 0.0;
        let scale = ts
            .u_grid
            .iter()
            .map(|&s| ts.eps_radial(s).abs())
            .fold(0.0f64, f64::max);
        for j in 0..200 {
            let s = (0.3 + 0.9 * j as f64 / 199.0) * ts.lambda_s;
            let upp = (ts.u_prime_radial(s + h) - ts.u_prime_radial(s - h)) / (2.0 * h);
            let res = -2.0 * (upp + 5.0 * ts.u_prime_radial(s) / s) - ts.eps_radial(s);
            worst = worst.max((res / scale).abs());
        }
        assert!(worst < 1e-3, "poisson residual {worst}");
    }

    #[test]
    fn compensator_matches_green_integral_oracle() {
        // quasi-random 6D integration of the explicit kernel
        // u(x) = det(M^{-1})/(8 |S^5|) int eps(y) |M^{-1}(x-y)|^{-4} dy,
        // reduced through y = M eta to mean[eps s^5 (lam_s/2) / (8 |xi - eta|^4)]
        let sol = base_solution(100.0);
        let ts = truncate(&sol, 1.0, 400).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let samples = 60_000;
        let mut checked = 0;
        for _ in 0..100 {
            // target points avoid the annulus so the kernel stays bounded
            let s_x = if rng.random::<f64>() < 0.5 {
                0.45 * ts.lambda_s * rng.random::<f64>()
            } else {
                (1.05 + 1.3 * rng.random::<f64>()) * ts.lambda_s
            };
            let xi = random_dir6(&mut rng, s_x);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..samples {
                let s = ts.lambda_s * (0.5 + 0.5 * rng.random::<f64>());
                let eta = random_dir6(&mut rng, s);
                let mut d2 = 0.0;
                for k in 0..6 {
                    let d = xi[k] - eta[k];
                    d2 += d * d;
                }
                let val = ts.eps_radial(s) * s.powi(5) * (ts.lambda_s / 2.0) / (8.0 * d2 * d2);
                sum += val;
                sumsq += val * val;
            }
            let mean = sum / samples as f64;
            let var = (sumsq / samples as f64 - mean * mean).max(0.0) / samples as f64;
            let se = var.sqrt();
            let exact = ts.u_radial(s_x);
            assert!(
                (exact - mean).abs() <= 3.0 * se + 1e-4 * exact.abs().max(1e-12),
                "green oracle mismatch at s={s_x}: {exact} vs {mean} +- {se}"
            );
            checked += 1;
        }
        assert_eq!(checked, 100);
    }

    fn random_dir6(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 6] {
        let mut z = [0.0f64; 6];
        let mut n = 0.0;
        for k in 0..3 {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random();
            let r = (-2.0 * u1.ln()).sqrt();
            z[2 * k] = r * (2.0 * std::f64::consts::PI * u2).cos();
            z[2 * k + 1] = r * (2.0 * std::f64::consts::PI * u2).sin();
        }
        for v in z {
            n += v * v;
        }
        let n = n.sqrt().max(1e-300);
        let mut out = [0.0; 6];
        for k in 0..6 {
            out[k] = radius * z[k] / n;
        }
        out
    }

    #[test]
    fn norms_vanish_for_zero_potential() {
        let v = HyperradialPotential::zero();
        let grid = RadialGrid::uniform(10.0, 2_000);
        let sol = solve_scattering(&v, &grid, 1e-10).unwrap();
        let ts = truncate(&sol, 1.0, 100).unwrap();
        let norms = ts.field_norms().unwrap();
        assert_eq!(norms.omega_l1, 0.0);
        assert_eq!(norms.eps_l2, 0.0);
        let c = ts.pointwise_bound_constants(1000, 3);
        assert_eq!(c.c_omega, 0.0);
        assert_eq!(c.c_u, 0.0);
    }

    #[test]
    fn norms_are_finite_and_positive() {
        let sol = base_solution(100.0);
        let ts = truncate(&sol, 1.0, 1000).unwrap();
        let n = ts.field_norms().unwrap();
        for v in [
            n.omega_l1,
            n.omega_l2,
            n.grad_omega_l1,
            n.grad_omega_l2,
            n.omega_l1linf,
            n.omega_l32linf,
            n.omega_l2linf,
            n.grad_omega_l1linf,
            n.eps_l2,
            n.grad_u_l2,
        ] {
            assert!(v.is_finite() && v > 0.0);
        }
    }
}
