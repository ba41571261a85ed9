//! Hyperradial interaction profiles.
//!
//! The induced 6D potential is V(u) = v(|M^{-1}u|), which is exactly
//! three-body symmetric because the hyperradius is. Profiles are
//! nonnegative and compactly supported; a zero support radius is treated
//! as the zero potential.

use crate::qmc::gauss_legendre;

/// Built-in nonnegative compactly supported radial profiles.
#[derive(Debug, Clone)]
pub enum HyperradialPotential {
    /// v0 on [0, radius], zero outside.
    Step { height: f64, radius: f64 },
    /// Smooth bump v0 * exp(1 - radius^2/(radius^2 - r^2)) on [0, radius).
    Bump { height: f64, radius: f64 },
    /// Piecewise-linear table over strictly increasing radii; the profile
    /// is zero at and beyond the last knot.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

impl HyperradialPotential {
    pub fn step(height: f64, radius: f64) -> Self {
        assert!(height >= 0.0 && radius >= 0.0, "profile must be nonnegative");
        HyperradialPotential::Step { height, radius }
    }

    pub fn bump(height: f64, radius: f64) -> Self {
        assert!(height >= 0.0 && radius >= 0.0, "profile must be nonnegative");
        HyperradialPotential::Bump { height, radius }
    }

    pub fn table(radii: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(radii.len(), values.len());
        assert!(radii.windows(2).all(|w| w[0] < w[1]), "radii must increase");
        assert!(values.iter().all(|&v| v >= 0.0), "profile must be nonnegative");
        assert!(
            values.last().map_or(true, |&v| v == 0.0),
            "table profile must vanish at its last knot"
        );
        HyperradialPotential::Table { radii, values }
    }

    pub fn zero() -> Self {
        HyperradialPotential::Step { height: 0.0, radius: 0.0 }
    }

    /// Pointwise value v(r).
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            HyperradialPotential::Step { height, radius } => {
                if r <= *radius && *radius > 0.0 {
                    *height
                } else {
                    0.0
                }
            }
            HyperradialPotential::Bump { height, radius } => {
                if r < *radius && *radius > 0.0 {
                    let q = r / radius;
                    *height * (1.0 - 1.0 / (1.0 - q * q)).exp()
                } else {
                    0.0
                }
            }
            HyperradialPotential::Table { radii, values } => {
                if radii.is_empty() || r >= *radii.last().unwrap() {
                    return 0.0;
                }
                if r <= radii[0] {
                    return values[0];
                }
                let j = radii.partition_point(|&x| x < r);
                let (r0, r1) = (radii[j - 1], radii[j]);
                let (v0, v1) = (values[j - 1], values[j]);
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// Radius beyond which the profile vanishes.
    pub fn support_radius(&self) -> f64 {
        match self {
            HyperradialPotential::Step { radius, height } => {
                if *height > 0.0 {
                    *radius
                } else {
                    0.0
                }
            }
            HyperradialPotential::Bump { radius, height } => {
                if *height > 0.0 {
                    *radius
                } else {
                    0.0
                }
            }
            HyperradialPotential::Table { radii, .. } => radii.last().copied().unwrap_or(0.0),
        }
    }

    /// Optional core lower bound (R0, C0) with v >= C0 on [0, R0].
    pub fn core_bound(&self) -> Option<(f64, f64)> {
        match self {
            HyperradialPotential::Step { height, radius } => {
                (*height > 0.0 && *radius > 0.0).then_some((*radius, *height))
            }
            HyperradialPotential::Bump { height, radius } => {
                (*height > 0.0 && *radius > 0.0)
                    .then(|| (0.5 * radius, self.eval(0.5 * radius)))
            }
            HyperradialPotential::Table { .. } => {
                let c0 = self.eval(0.0);
                (c0 > 0.0).then_some((0.0, c0))
            }
        }
    }

    /// True when the profile is identically zero.
    pub fn is_zero(&self) -> bool {
        self.support_radius() == 0.0
    }

    /// Interior breakpoints where the profile is not smooth; quadrature
    /// intervals are split there so the cell integrals keep full order.
    fn knots(&self) -> Vec<f64> {
        match self {
            HyperradialPotential::Step { radius, .. } => vec![*radius],
            HyperradialPotential::Bump { .. } => vec![],
            HyperradialPotential::Table { radii, .. } => radii.clone(),
        }
    }

    /// Exact-order integral of v(r) r^5 over [a, b].
    ///
    /// Uses 8-point Gauss-Legendre on each smooth piece, which is exact for
    /// step and piecewise-linear profiles and far below discretisation
    /// error for the bump.
    pub fn cell_integral_r5(&self, a: f64, b: f64) -> f64 {
        if b <= a || self.is_zero() {
            return 0.0;
        }
        let rv = self.support_radius();
        let b = b.min(rv);
        if b <= a {
            return 0.0;
        }
        let mut cuts = vec![a];
        for k in self.knots() {
            if k > a && k < b {
                cuts.push(k);
            }
        }
        cuts.push(b);
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (nodes, weights) = gauss_legendre(8);
        let mut total = 0.0;
        for seg in cuts.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            let mut acc = 0.0;
            for (t, w) in nodes.iter().zip(&weights) {
                let r = mid + half * t;
                acc += w * self.eval(r) * r.powi(5);
            }
            total += acc * half;
        }
        total
    }
}
