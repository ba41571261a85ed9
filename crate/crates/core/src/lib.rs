//! Numerical laboratory for the quintic Gross-Pitaevskii equation and the
//! three-body scattering problem behind its coupling constant.
//!
//! The crate is organised around five independent engines:
//!
//! * [`scattering`] — the hyperradial zero-energy scattering problem, the
//!   scattering hypervolume computed by two independent routes, smooth
//!   truncations of the scattering solution and their norm/pointwise
//!   diagnostics, and the effective-coupling sup-norm error.
//! * [`gpe`] — a spectral split-step solver for the quintic nonlinear
//!   Schrödinger equation on periodic grids in one to three dimensions,
//!   with gauge handling, conservation diagnostics and an imaginary-time
//!   ground-state routine.
//! * [`boxes`] — half-open box lattices over point configurations in R^3
//!   and the counting inequalities (recombination, three-body box bound,
//!   convexity estimate, interaction-count functionals) they support.
//! * [`fewbody`] — exact evolution of a few bosons on a periodic 1D lattice
//!   with on-site three-body interaction, one-body density matrices and
//!   condensate depletion against a mean-field orbital.
//! * [`prefactors`] — the excitation-number prefactor functions and
//!   exhaustive scans of their bound constants.
//!
//! Everything is deterministic: randomised routines take explicit seeds and
//! reductions are ordered.

pub mod boxes;
pub mod coupling;
pub mod fewbody;
pub mod gpe;
pub mod mmatrix;
pub mod potential;
pub mod prefactors;
pub mod qmc;
pub mod radial;
pub mod scattering;
pub mod truncated;

pub use mmatrix::{mmatrix_constants, MMatrixConstants};
pub use potential::HyperradialPotential;
pub use radial::RadialGrid;
pub use scattering::{hypervolume, solve_scattering, ScatteringError, ScatteringSolution};
pub use truncated::{truncate, TruncatedScattering};

/// Least-squares slope of log(y) against log(x).
///
/// Used everywhere a scaling exponent is extracted from dyadic sweeps.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points for a slope");
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    sxy / sxx
}
