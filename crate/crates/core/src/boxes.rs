//! Half-open box lattices over point configurations and the counting
//! inequalities they support.
//!
//! Boxes are Λ_r = r + L·[-1/2, 1/2)^3 with centres r on a cubic lattice;
//! the half-open convention makes the unit-pitch family an exact partition
//! of R^3, which is load-bearing for the recombination identity (every
//! point lies in exactly 27 of the triple-size boxes centred on the same
//! lattice). All counting is exact integer arithmetic on lattice indices.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoxesError {
    #[error("scale hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid scales: {0}")]
    InvalidScales(String),
    #[error("bad configuration csv: {0}")]
    BadCsv(String),
}

/// M points in R^3.
#[derive(Debug, Clone, Default)]
pub struct Configuration {
    pub points: Vec<[f64; 3]>,
}

impl Configuration {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        assert!(
            points.iter().all(|p| p.iter().all(|c| c.is_finite())),
            "coordinates must be finite"
        );
        Configuration { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One `x,y,z` row per point.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,z\n");
        for p in &self.points {
            s.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", p[0], p[1], p[2]));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, BoxesError> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with('x')) {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(BoxesError::BadCsv(format!("line {}: need 3 columns", i + 1)));
            }
            let mut p = [0.0; 3];
            for (k, c) in cols.iter().enumerate() {
                p[k] = c
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| BoxesError::BadCsv(format!("line {}: {e}", i + 1)))?;
            }
            points.push(p);
        }
        Ok(Configuration::new(points))
    }
}

/// Box family selector: side equal to the lattice pitch (a partition) or
/// three times it (overlapping cover).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxScale {
    Single,
    Triple,
}

/// Sparse per-centre counts over the occupied boxes.
#[derive(Debug, Clone)]
pub struct CountsReport {
    pub cell: f64,
    pub scale: BoxScale,
    pub counts: HashMap<[i64; 3], u64>,
}

impl CountsReport {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Lattice index of the pitch-`cell` partition box containing `x`.
#[inline]
fn partition_index(x: f64, cell: f64) -> i64 {
    (x / cell + 0.5).floor() as i64
}

/// Exact counts of points per box for the selected family.
pub fn count_in_boxes(config: &Configuration, cell: f64, scale: BoxScale) -> CountsReport {
    assert!(cell > 0.0, "cell must be positive");
    let mut counts: HashMap<[i64; 3], u64> = HashMap::new();
    for p in &config.points {
        let m = [
            partition_index(p[0], cell),
            partition_index(p[1], cell),
            partition_index(p[2], cell),
        ];
        match scale {
            BoxScale::Single => {
                *counts.entry(m).or_insert(0) += 1;
            }
            BoxScale::Triple => {
                // a point lies in exactly the 27 triple boxes whose centres
                // neighbour its partition cell
                for di in -1..=1 {
                    for dj in -1..=1 {
                        for dk in -1..=1 {
                            *counts.entry([m[0] + di, m[1] + dj, m[2] + dk]).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
    }
    CountsReport { cell, scale, counts }
}

/// sum_r M_r^{(3 cell)} - 27 M; zero for every configuration.
pub fn recombination_identity(config: &Configuration, cell: f64) -> i64 {
    let triple = count_in_boxes(config, cell, BoxScale::Triple);
    triple.total() as i64 - 27 * config.len() as i64
}

/// Result of the three-body box bound.
#[derive(Debug, Clone, Copy)]
pub struct ThreeBodyCheck {
    /// Ordered triples with 6D relative norm at most l1.
    pub lhs: u64,
    /// sum_r m (m-1) (m-2) over the l2 partition.
    pub rhs: u64,
    pub margin: i64,
}

/// Compare the ordered-triple count against the falling-factorial sum over
/// the fine partition. Requires l2 <= l1/sqrt(6).
pub fn three_body_box_inequality(
    config: &Configuration,
    l1: f64,
    l2: f64,
) -> Result<ThreeBodyCheck, BoxesError> {
    if !(l1 > 0.0 && l2 > 0.0) {
        return Err(BoxesError::InvalidScales("scales must be positive".into()));
    }
    if l2 > l1 / 6.0f64.sqrt() * (1.0 + 1e-12) {
        return Err(BoxesError::HypothesisViolated(format!(
            "l2 = {l2} exceeds l1/sqrt(6) = {}",
            l1 / 6.0f64.sqrt()
        )));
    }
    let pts = &config.points;
    let m = pts.len();
    let l1_sq = l1 * l1;
    let mut lhs: u64 = 0;
    for i in 0..m {
        for j in 0..m {
            if j == i {
                continue;
            }
            let dij = dist_sq(pts[i], pts[j]);
            if dij > l1_sq {
                continue;
            }
            for k in 0..m {
                if k == i || k == j {
                    continue;
                }
                if dij + dist_sq(pts[i], pts[k]) <= l1_sq {
                    lhs += 1;
                }
            }
        }
    }
    let counts = count_in_boxes(config, l2, BoxScale::Single);
    let rhs: u64 = counts
        .counts
        .values()
        .map(|&c| if c >= 3 { c * (c - 1) * (c - 2) } else { 0 })
        .sum();
    Ok(ThreeBodyCheck { lhs, rhs, margin: lhs as i64 - rhs as i64 })
}

#[inline]
fn dist_sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Counts of side-`side` boxes centred on the pitch-`pitch` lattice; boxes
/// overlap when side > pitch.
pub fn counts_on_pitched_lattice(
    config: &Configuration,
    side: f64,
    pitch: f64,
) -> HashMap<[i64; 3], u64> {
    assert!(side > 0.0 && pitch > 0.0);
    let half_ratio = side / (2.0 * pitch);
    let mut counts: HashMap<[i64; 3], u64> = HashMap::new();
    let mut ranges: [(i64, i64); 3] = [(0, 0); 3];
    for p in &config.points {
        for a in 0..3 {
            let q = p[a] / pitch;
            // centres with q in (q - R, q + R]
            let lo = (q - half_ratio).floor() as i64 + 1;
            let hi = (q + half_ratio).floor() as i64;
            ranges[a] = (lo, hi);
        }
        for i in ranges[0].0..=ranges[0].1 {
            for j in ranges[1].0..=ranges[1].1 {
                for k in ranges[2].0..=ranges[2].1 {
                    *counts.entry([i, j, k]).or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

/// Scales l1 >= l2 >= l3 of the convexity estimate.
#[derive(Debug, Clone, Copy)]
pub struct ConvexityScales {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

/// Calibrated constants of the convexity estimate for one (alpha, beta).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvexityConstants {
    pub alpha: f64,
    pub beta: f64,
    /// threshold prefactor: boxes with fewer than c_beta (l1/l3)^3 points
    /// are exempt
    pub c_beta: f64,
    /// prefactor of the right-hand side
    pub c_alpha_beta: f64,
    /// prefactor of the per-box intermediate bound
    pub c_intermediate: f64,
}

/// Two-sided evaluation of the convexity estimate.
#[derive(Debug, Clone, Copy)]
pub struct ConvexityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// lhs divided by the rhs stripped of c_alpha_beta; the search
    /// calibrates the constant from the supremum of this ratio.
    pub raw_ratio: f64,
}

/// Evaluate both sides of the convexity estimate for given constants.
pub fn convexity_inequality(
    config: &Configuration,
    scales: ConvexityScales,
    consts: &ConvexityConstants,
) -> Result<ConvexityCheck, BoxesError> {
    let ConvexityScales { l1, l2, l3 } = scales;
    if !(l1 >= l2 && l2 >= l3 && l3 > 0.0) {
        return Err(BoxesError::InvalidScales(format!(
            "need l1 >= l2 >= l3 > 0, got {l1}, {l2}, {l3}"
        )));
    }
    if consts.alpha < 1.0 || consts.beta < 1.0 {
        return Err(BoxesError::InvalidScales("alpha and beta must be >= 1".into()));
    }
    let alpha = consts.alpha;
    let beta = consts.beta;
    let threshold = consts.c_beta * (l1 / l3).powi(3);
    let coarse = counts_on_pitched_lattice(config, l1, l2);
    let lhs: f64 = coarse
        .values()
        .map(|&c| {
            let cf = c as f64;
            if cf >= threshold {
                cf.powf(alpha)
            } else {
                0.0
            }
        })
        .sum();
    let fine = count_in_boxes(config, l3, BoxScale::Single);
    let fine_sum: f64 = fine
        .counts
        .values()
        .map(|&c| {
            let cf = c as f64;
            if cf >= beta {
                cf.powf(alpha)
            } else {
                0.0
            }
        })
        .sum();
    let geometry = (l1 / l2).powi(3) * (l1 / l3).powf(3.0 * (alpha - 1.0));
    let rhs = consts.c_alpha_beta * geometry * fine_sum;
    let raw = geometry * fine_sum;
    let raw_ratio = if lhs == 0.0 { 0.0 } else { lhs / raw.max(f64::MIN_POSITIVE) };
    Ok(ConvexityCheck { lhs, rhs, margin: rhs - lhs, raw_ratio })
}

/// Per-box intermediate bound: for every coarse box above the threshold,
/// the count is controlled by the fine sub-boxes holding at least beta
/// points.
#[derive(Debug, Clone, Copy)]
pub struct IntermediateCheck {
    /// Worst count/controlled-sum ratio over triggered boxes (0 if none).
    pub max_ratio: f64,
    /// True when max_ratio <= c_intermediate.
    pub ok: bool,
    pub triggered_boxes: usize,
}

pub fn intermediate_box_inequality(
    config: &Configuration,
    scales: ConvexityScales,
    consts: &ConvexityConstants,
) -> Result<IntermediateCheck, BoxesError> {
    let ConvexityScales { l1, l2, l3 } = scales;
    if !(l1 >= l2 && l2 >= l3 && l3 > 0.0) {
        return Err(BoxesError::InvalidScales(format!(
            "need l1 >= l2 >= l3 > 0, got {l1}, {l2}, {l3}"
        )));
    }
    let threshold = consts.c_beta * (l1 / l3).powi(3);
    let beta = consts.beta as u64;
    // bucket the points of every coarse box by fine partition cell
    let mut per_box: HashMap<[i64; 3], HashMap<[i64; 3], u64>> = HashMap::new();
    let half_ratio = l1 / (2.0 * l2);
    for p in &config.points {
        let fine = [
            partition_index(p[0], l3),
            partition_index(p[1], l3),
            partition_index(p[2], l3),
        ];
        let mut ranges: [(i64, i64); 3] = [(0, 0); 3];
        for a in 0..3 {
            let q = p[a] / l2;
            ranges[a] = ((q - half_ratio).floor() as i64 + 1, (q + half_ratio).floor() as i64);
        }
        for i in ranges[0].0..=ranges[0].1 {
            for j in ranges[1].0..=ranges[1].1 {
                for k in ranges[2].0..=ranges[2].1 {
                    *per_box.entry([i, j, k]).or_default().entry(fine).or_insert(0) += 1;
                }
            }
        }
    }
    let mut max_ratio: f64 = 0.0;
    let mut triggered = 0usize;
    for cells in per_box.values() {
        let count: u64 = cells.values().sum();
        if (count as f64) < threshold {
            continue;
        }
        triggered += 1;
        let controlled: u64 = cells.values().filter(|&&c| c >= beta).sum();
        let ratio = if controlled == 0 {
            f64::INFINITY
        } else {
            count as f64 / controlled as f64
        };
        max_ratio = max_ratio.max(ratio);
    }
    Ok(IntermediateCheck {
        max_ratio,
        ok: max_ratio <= consts.c_intermediate,
        triggered_boxes: triggered,
    })
}

/// Ordered interaction-count functionals; the short factor binds indices
/// (i, j), the long factors bind the remaining indices to i.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionCounts {
    pub pair: f64,
    pub triple: f64,
    pub quad: f64,
    pub quint: f64,
}

/// Count ordered tuples with the indicator (or weighted) kernels:
/// pairs 1(|xi-xj| <= short); triples add 1(|xi-xk| <= long); quads add
/// 1(|xi-xl| <= long); quints use four long factors and no short one.
/// A weight profile replaces the pair indicator by w(|xi-xj|).
pub fn interaction_counts(
    config: &Configuration,
    l_short: f64,
    l_long: f64,
    weight: Option<&dyn Fn(f64) -> f64>,
) -> Result<InteractionCounts, BoxesError> {
    if !(l_short > 0.0 && l_short <= l_long) {
        return Err(BoxesError::InvalidScales(format!(
            "need 0 < l_short <= l_long, got {l_short}, {l_long}"
        )));
    }
    let pts = &config.points;
    let m = pts.len();
    let short_sq = l_short * l_short;
    let long_sq = l_long * l_long;
    let mut long_deg = vec![0u64; m];
    for i in 0..m {
        for j in 0..m {
            if j != i && dist_sq(pts[i], pts[j]) <= long_sq {
                long_deg[i] += 1;
            }
        }
    }
    let mut pair = 0.0;
    let mut triple = 0.0;
    let mut quad = 0.0;
    let mut quint = 0.0;
    for i in 0..m {
        let nl = long_deg[i] as f64;
        quint += nl * (nl - 1.0) * (nl - 2.0) * (nl - 3.0);
        for j in 0..m {
            if j == i {
                continue;
            }
            let dij = dist_sq(pts[i], pts[j]);
            let w = match weight {
                Some(w) => w(dij.sqrt()),
                None => {
                    if dij <= short_sq {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            if w == 0.0 {
                continue;
            }
            pair += w;
            // remaining long partners of i, excluding j when j itself is one
            let free = nl - if dij <= long_sq { 1.0 } else { 0.0 };
            triple += w * free;
            quad += w * free * (free - 1.0);
        }
    }
    Ok(InteractionCounts { pair, triple, quad, quint })
}

/// Deterministic adversarial search calibrating the convexity constants.
pub mod search {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rayon::prelude::*;

    /// Versioned calibration document, shipped next to the crate and
    /// reproducible from the recorded seed.
    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct CalibrationDocument {
        pub version: u32,
        pub config_count: u64,
        pub seed: u64,
        pub entries: Vec<CalibrationEntry>,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct CalibrationEntry {
        pub constants: ConvexityConstants,
        pub observed_max_ratio: f64,
        pub observed_max_intermediate_ratio: f64,
    }

    /// Outcome of re-running the search against fixed constants.
    #[derive(Debug, Clone, Copy)]
    pub struct SearchOutcome {
        pub configs_tested: u64,
        pub violations: u64,
        pub max_ratio: f64,
        pub max_intermediate_ratio: f64,
    }

    /// Scale triples exercised by the search; ratios are kept small enough
    /// that thresholds trigger at toy particle numbers.
    fn scale_cases() -> Vec<ConvexityScales> {
        vec![
            ConvexityScales { l1: 1.0, l2: 1.0, l3: 1.0 },
            ConvexityScales { l1: 1.0, l2: 0.5, l3: 0.5 },
            ConvexityScales { l1: 1.0, l2: 1.0, l3: 0.5 },
            ConvexityScales { l1: 1.0, l2: 0.5, l3: 0.25 },
            ConvexityScales { l1: 1.0, l2: 0.25, l3: 0.25 },
        ]
    }

    /// Random, clustered, lattice-aligned and coincident generators; the
    /// mix is chosen to stress thresholds, box faces and degeneracies.
    pub fn generate_config(rng: &mut ChaCha8Rng, case: u64) -> Configuration {
        let kind = case % 4;
        let mut points = Vec::new();
        match kind {
            0 => {
                // uniform cloud
                let m = rng.random_range(1..=50);
                let side: f64 = rng.random_range(0.5..6.0);
                for _ in 0..m {
                    points.push([
                        rng.random_range(-side..side),
                        rng.random_range(-side..side),
                        rng.random_range(-side..side),
                    ]);
                }
            }
            1 => {
                // dense clusters around random centres
                let clusters = rng.random_range(1..=4);
                for _ in 0..clusters {
                    let c = [
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-3.0..3.0),
                    ];
                    let m = rng.random_range(5..=60);
                    let sigma: f64 = rng.random_range(0.02..0.6);
                    for _ in 0..m {
                        points.push([
                            c[0] + sigma * centered(rng),
                            c[1] + sigma * centered(rng),
                            c[2] + sigma * centered(rng),
                        ]);
                    }
                }
            }
            2 => {
                // dyadic lattice-aligned points sitting on box faces
                let m = rng.random_range(10..=120);
                for _ in 0..m {
                    points.push([
                        rng.random_range(-16..16) as f64 / 8.0,
                        rng.random_range(-16..16) as f64 / 8.0,
                        rng.random_range(-16..16) as f64 / 8.0,
                    ]);
                }
            }
            _ => {
                // coincident batches
                let batches = rng.random_range(1..=3);
                for _ in 0..batches {
                    let p = [
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                    ];
                    let m = rng.random_range(4..=80);
                    for _ in 0..m {
                        points.push(p);
                    }
                }
            }
        }
        Configuration::new(points)
    }

    fn centered(rng: &mut ChaCha8Rng) -> f64 {
        rng.random_range(-1.0..1.0) + rng.random_range(-1.0..1.0)
    }

    /// Run the search against fixed constants, reporting violations and
    /// the observed suprema. Deterministic in (seed, config_count);
    /// parallel workers merge by index order.
    pub fn adversarial_search(
        consts: &ConvexityConstants,
        config_count: u64,
        seed: u64,
    ) -> SearchOutcome {
        let cases = scale_cases();
        let results: Vec<(u64, f64, f64)> = (0..config_count)
            .into_par_iter()
            .map(|idx| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (idx.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
                let config = generate_config(&mut rng, idx);
                let scales = cases[(idx % cases.len() as u64) as usize];
                let chk = convexity_inequality(&config, scales, consts).unwrap();
                let inter = intermediate_box_inequality(&config, scales, consts).unwrap();
                let viol = u64::from(chk.margin < 0.0) + u64::from(!inter.ok);
                let inter_ratio = if inter.triggered_boxes > 0 { inter.max_ratio } else { 0.0 };
                (viol, chk.raw_ratio, inter_ratio)
            })
            .collect();
        let mut out = SearchOutcome {
            configs_tested: config_count,
            violations: 0,
            max_ratio: 0.0,
            max_intermediate_ratio: 0.0,
        };
        for (v, r, ir) in results {
            out.violations += v;
            out.max_ratio = out.max_ratio.max(r);
            out.max_intermediate_ratio = out.max_intermediate_ratio.max(ir);
        }
        out
    }

    /// Shipped calibration: constants frozen from a recorded search run.
    pub fn shipped_calibration() -> CalibrationDocument {
        serde_json::from_str(include_str!("../assets/box_constants.json"))
            .expect("embedded calibration document must parse")
    }
}
