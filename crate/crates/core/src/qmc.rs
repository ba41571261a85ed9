//! Deterministic quadrature and low-discrepancy sampling utilities.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // derivative of P_n via the standard identity
            pp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Van der Corput radical inverse of `index` in the given base.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const HALTON_BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// The `i`-th point of the 6D Halton sequence (1-based internally to avoid
/// the origin).
pub fn halton6(i: u64) -> [f64; 6] {
    let mut p = [0.0; 6];
    for (k, &b) in HALTON_BASES.iter().enumerate() {
        p[k] = radical_inverse(i + 1, b);
    }
    p
}

/// Quasi-random points on the unit sphere S^5 in R^6.
///
/// Halton points are pushed through Box-Muller pairs to a 6D Gaussian and
/// normalised; smooth sphere averages converge fast under this map.
pub fn sphere_points_s5(count: usize) -> Vec<[f64; 6]> {
    let mut out = Vec::with_capacity(count);
    let mut i = 0u64;
    while out.len() < count {
        let h = halton6(i);
        i += 1;
        let mut z = [0.0; 6];
        let mut ok = true;
        for k in 0..3 {
            let u1 = h[2 * k];
            let u2 = h[2 * k + 1];
            if u1 <= 0.0 {
                ok = false;
                break;
            }
            let r = (-2.0 * u1.ln()).sqrt();
            z[2 * k] = r * (2.0 * PI * u2).cos();
            z[2 * k + 1] = r * (2.0 * PI * u2).sin();
        }
        if !ok {
            continue;
        }
        let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n < 1e-12 {
            continue;
        }
        for v in &mut z {
            *v /= n;
        }
        out.push(z);
    }
    out
}

/// Mean of sqrt(a*rho + b*(1-rho)) with rho ~ Beta(3/2, 3/2).
///
/// This is the sphere average of |diag(a,b) applied to a unit vector| when
/// R^6 splits into two 3D eigenspaces; the Beta density of |P1 sigma|^2 is
/// (8/pi) sqrt(rho(1-rho)).
pub fn split_sphere_average_sqrt(a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(96);
    let mut acc = 0.0;
    for (t, w) in nodes.iter().zip(&weights) {
        let rho = 0.5 * (t + 1.0);
        let pdf = (8.0 / PI) * (rho * (1.0 - rho)).max(0.0).sqrt();
        acc += w * pdf * (a * rho + b * (1.0 - rho)).sqrt();
    }
    acc * 0.5
}
