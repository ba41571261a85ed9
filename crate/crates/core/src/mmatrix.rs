//! Coefficient matrix of the modified Laplacian in relative coordinates.
//!
//! Removing the centre of mass from a three-particle kinetic energy leaves
//! the operator div(M^2 grad) on R^6, where M acts blockwise on R^3 ⊕ R^3
//! and is the positive square root of (1/2)[[2,1],[1,2]] ⊗ I_3. Its
//! eigenvalues are sqrt(3/2) and sqrt(1/2), threefold each, so
//! det M = 3*sqrt(3)/8.

use std::f64::consts::PI;

/// Block coefficients of the modified-Laplacian matrix on R^3 ⊕ R^3,
/// together with the constants every 6D radial reduction needs.
#[derive(Debug, Clone, Copy)]
pub struct MMatrixConstants {
    /// 2x2 block matrix `[[d, o], [o, d]]`; each entry scales an identity on R^3.
    pub m: [[f64; 2]; 2],
    /// Inverse block matrix.
    pub m_inv: [[f64; 2]; 2],
    /// Determinant of the full 6x6 matrix.
    pub det_m: f64,
    /// Surface area of the unit sphere in R^6, equal to pi^3.
    pub sphere_area_5: f64,
}

/// Exact block entries: diagonal (sqrt(3)+1)/(2 sqrt(2)), off-diagonal
/// (sqrt(3)-1)/(2 sqrt(2)).
pub fn mmatrix_constants() -> MMatrixConstants {
    let s3 = 3.0_f64.sqrt();
    let s8 = 8.0_f64.sqrt();
    let d = (s3 + 1.0) / s8;
    let o = (s3 - 1.0) / s8;
    // inverse of [[d,o],[o,d]] is [[d,-o],[-o,d]]/(d^2-o^2), with d^2-o^2 = sqrt(3)/2
    let det2 = d * d - o * o;
    MMatrixConstants {
        m: [[d, o], [o, d]],
        m_inv: [[d / det2, -o / det2], [-o / det2, d / det2]],
        det_m: det2 * det2 * det2,
        sphere_area_5: PI * PI * PI,
    }
}

impl MMatrixConstants {
    /// Apply M to a pair of R^3 vectors.
    pub fn apply(&self, a: [f64; 3], b: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let mut u = [0.0; 3];
        let mut w = [0.0; 3];
        for i in 0..3 {
            u[i] = self.m[0][0] * a[i] + self.m[0][1] * b[i];
            w[i] = self.m[1][0] * a[i] + self.m[1][1] * b[i];
        }
        (u, w)
    }

    /// Apply M^{-1} to a pair of R^3 vectors.
    pub fn apply_inv(&self, a: [f64; 3], b: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let mut u = [0.0; 3];
        let mut w = [0.0; 3];
        for i in 0..3 {
            u[i] = self.m_inv[0][0] * a[i] + self.m_inv[0][1] * b[i];
            w[i] = self.m_inv[1][0] * a[i] + self.m_inv[1][1] * b[i];
        }
        (u, w)
    }

    /// Hyperradius |M^{-1}(a,b)| of a 6D relative configuration.
    ///
    /// Expanding M^{-2} = (2/3)[[2,-1],[-1,2]] gives the closed form
    /// (4/3)(|a|^2 - a.b + |b|^2), manifestly symmetric under the
    /// three-body exchange permutations.
    pub fn hyperradius(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        let mut na = 0.0;
        let mut nb = 0.0;
        let mut ab = 0.0;
        for i in 0..3 {
            na += a[i] * a[i];
            nb += b[i] * b[i];
            ab += a[i] * b[i];
        }
        ((4.0 / 3.0) * (na - ab + nb)).max(0.0).sqrt()
    }

    /// Euclidean norm of the pair (a, b) in R^6.
    pub fn norm6(a: [f64; 3], b: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            s += a[i] * a[i] + b[i] * b[i];
        }
        s.sqrt()
    }

    /// Operator norm of M, sqrt(3/2); converts hyperradial balls to
    /// Euclidean balls conservatively.
    pub fn op_norm(&self) -> f64 {
        (1.5_f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_entries_match_closed_form() {
        let c = mmatrix_constants();
        assert!((c.m[0][0] - 0.965_925_826_289_068_3).abs() < 1e-15);
        assert!((c.m[0][1] - 0.258_819_045_102_520_74).abs() < 1e-15);
        assert_eq!(c.m[0][0], c.m[1][1]);
        assert_eq!(c.m[0][1], c.m[1][0]);
    }

    #[test]
    fn m_squares_to_defining_block_matrix() {
        let c = mmatrix_constants();
        let d = c.m[0][0];
        let o = c.m[0][1];
        // (M^2) block entries must be 1 and 1/2
        assert!((d * d + o * o - 1.0).abs() < 1e-15);
        assert!((2.0 * d * o - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inverse_and_determinant() {
        let c = mmatrix_constants();
        for r in 0..2 {
            for s in 0..2 {
                let mut e = 0.0;
                for k in 0..2 {
                    e += c.m[r][k] * c.m_inv[k][s];
                }
                let want = if r == s { 1.0 } else { 0.0 };
                assert!((e - want).abs() < 1e-14);
            }
        }
        // oracle: det of the 6x6 matrix from the eigenvalues 3/2 and 1/2 of M^2,
        // each with multiplicity 3 -> det M = sqrt((3/2)^3 (1/2)^3) = 3 sqrt(3)/8
        let oracle = (1.5_f64.powi(3) * 0.5_f64.powi(3)).sqrt();
        assert!((c.det_m - oracle).abs() < 1e-15);
        assert!((c.det_m - 3.0 * 3.0_f64.sqrt() / 8.0).abs() < 1e-15);
        assert!(c.det_m > 0.0);
    }

    #[test]
    fn sphere_area_is_pi_cubed() {
        let c = mmatrix_constants();
        assert!((c.sphere_area_5 - PI.powi(3)).abs() < 1e-14);
    }

    #[test]
    fn hyperradius_matches_explicit_inverse() {
        let c = mmatrix_constants();
        let a = [0.3, -1.2, 0.7];
        let b = [1.1, 0.4, -0.5];
        let (u, w) = c.apply_inv(a, b);
        let direct = MMatrixConstants::norm6(u, w);
        assert!((c.hyperradius(a, b) - direct).abs() < 1e-13);
    }

    #[test]
    fn hyperradius_is_three_body_symmetric() {
        // with relative coordinates (x-y, x-z), the permuted pairs are
        // (y-x, y-z) and (z-x, z-y); all three must share one hyperradius
        let c = mmatrix_constants();
        let x = [0.2, 0.5, -0.1];
        let y = [-0.4, 0.9, 0.3];
        let z = [1.0, -0.2, 0.6];
        let sub = |p: [f64; 3], q: [f64; 3]| [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
        let s1 = c.hyperradius(sub(x, y), sub(x, z));
        let s2 = c.hyperradius(sub(y, x), sub(y, z));
        let s3 = c.hyperradius(sub(z, x), sub(z, y));
        assert!((s1 - s2).abs() < 1e-13);
        assert!((s1 - s3).abs() < 1e-13);
    }
}
