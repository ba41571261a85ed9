//! Excitation-number prefactor functions and their bound constants.
//!
//! Each prefactor is a product of factors (1 - (n+p)/N) or their square
//! roots, p in {-1, 0, 1, 2}. Factors are clamped below at zero (the
//! operator context truncates the excitation space there) and the value is
//! clamped to [0, 1]; the p = -1 factor would otherwise push two kinds to
//! 1 + 1/N at n = 0, where the accompanying annihilation operator kills
//! the state anyway.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PrefactorError {
    #[error("excitation number {n} outside [0, {n_total}]")]
    OutOfRange { n: u64, n_total: u64 },
}

/// The prefactor family; duplicate formulas share one tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThetaKind {
    Theta0,
    Theta1,
    Theta2One,
    Theta2TwoOrThree,
    Theta3One,
    Theta3TwoOrThree,
    Theta4One,
    Theta4TwoOrThree,
    Theta5,
    ThetaN,
}

impl ThetaKind {
    pub const ALL: [ThetaKind; 10] = [
        ThetaKind::Theta0,
        ThetaKind::Theta1,
        ThetaKind::Theta2One,
        ThetaKind::Theta2TwoOrThree,
        ThetaKind::Theta3One,
        ThetaKind::Theta3TwoOrThree,
        ThetaKind::Theta4One,
        ThetaKind::Theta4TwoOrThree,
        ThetaKind::Theta5,
        ThetaKind::ThetaN,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ThetaKind::Theta0 => "theta0",
            ThetaKind::Theta1 => "theta1",
            ThetaKind::Theta2One => "theta2_1",
            ThetaKind::Theta2TwoOrThree => "theta2_2or3",
            ThetaKind::Theta3One => "theta3_1",
            ThetaKind::Theta3TwoOrThree => "theta3_2or3",
            ThetaKind::Theta4One => "theta4_1",
            ThetaKind::Theta4TwoOrThree => "theta4_2or3",
            ThetaKind::Theta5 => "theta5",
            ThetaKind::ThetaN => "thetaN",
        }
    }
}

/// Clamped linear factor 1 - (n + p)/N.
#[inline]
fn factor(n: f64, n_total: f64, p: f64) -> f64 {
    (1.0 - (n + p) / n_total).max(0.0)
}

/// Internal evaluator tolerating any n >= 0 (used by the shifted scans).
fn eval(kind: ThetaKind, n: f64, n_total: f64) -> f64 {
    let x = |p: f64| factor(n, n_total, p);
    let v = match kind {
        ThetaKind::Theta0 => x(0.0) * x(1.0) * x(2.0),
        ThetaKind::Theta1 => x(0.0).sqrt() * x(1.0) * x(2.0),
        ThetaKind::Theta2One => x(0.0) * x(1.0).sqrt() * x(2.0).sqrt(),
        ThetaKind::Theta2TwoOrThree => x(0.0) * x(1.0),
        ThetaKind::Theta3One | ThetaKind::ThetaN => x(0.0).sqrt() * x(1.0).sqrt() * x(2.0).sqrt(),
        ThetaKind::Theta3TwoOrThree => x(0.0).sqrt() * x(-1.0),
        ThetaKind::Theta4One => (x(0.0) * x(-1.0)).sqrt(),
        ThetaKind::Theta4TwoOrThree => x(0.0),
        ThetaKind::Theta5 => x(0.0).sqrt(),
    };
    v.min(1.0)
}

/// Prefactor value at excitation number n out of N particles.
pub fn theta(kind: ThetaKind, n: u64, n_total: u64) -> Result<f64, PrefactorError> {
    if n > n_total || n_total == 0 {
        return Err(PrefactorError::OutOfRange { n, n_total });
    }
    Ok(eval(kind, n as f64, n_total as f64))
}

/// Empirical bound constants of one kind at one particle number.
#[derive(Debug, Clone, Copy)]
pub struct ThetaBoundRow {
    pub kind: ThetaKind,
    pub n_total: u64,
    /// sup over n of N |theta - 1| / (n + 1).
    pub c_one: f64,
    /// sup over n of N theta_N(n) |theta(n + p) - theta(n)| for p = 1, 2, 3.
    pub c_shift: [f64; 3],
}

impl ThetaBoundRow {
    pub const CSV_HEADER: &'static str =
        "kind,n_total,empirical_c,empirical_c1,empirical_c2,empirical_c3";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.kind.label(),
            self.n_total,
            self.c_one,
            self.c_shift[0],
            self.c_shift[1],
            self.c_shift[2]
        )
    }
}

/// Exhaustive scans of the two bound families for every kind and every
/// requested particle number.
pub fn theta_bound_report(n_list: &[u64]) -> Vec<ThetaBoundRow> {
    let mut rows = Vec::new();
    for &n_total in n_list {
        assert!(n_total >= 4, "need N >= 4 for the scans");
        let nf = n_total as f64;
        for kind in ThetaKind::ALL {
            let mut c_one: f64 = 0.0;
            let mut c_shift = [0.0f64; 3];
            for n in 0..=n_total {
                let nn = n as f64;
                let v = eval(kind, nn, nf);
                c_one = c_one.max(nf * (v - 1.0).abs() / (nn + 1.0));
                let theta_n = eval(ThetaKind::ThetaN, nn, nf);
                for (k, p) in [1.0, 2.0, 3.0].into_iter().enumerate() {
                    let shifted = eval(kind, nn + p, nf);
                    c_shift[k] = c_shift[k].max(nf * theta_n * (shifted - v).abs());
                }
            }
            rows.push(ThetaBoundRow { kind, n_total, c_one, c_shift });
        }
    }
    rows
}
