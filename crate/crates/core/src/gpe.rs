//! Quintic nonlinear Schrödinger dynamics on periodic grids.
//!
//! Strang split-step: a half kinetic step in Fourier space, the exact
//! pointwise nonlinear phase, another half kinetic step. The nonlinear
//! substep leaves |phi| invariant pointwise, so the gauge term is constant
//! across it and both substeps are exactly unitary: mass is conserved to
//! rounding. Units are hbar = 2m = 1, i.e. i d/dt phi = -Laplace phi + ...
//!
//! The trajectory records, per checkpoint, the gauge value and the
//! accumulated gauge phase integral (per-step trapezoid, which is exact
//! here because the gauge is constant within each step).

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("nonlinear phase per step {phase:.3e} rad exceeds pi; reduce dt")]
    StepTooLarge { phase: f64 },
    #[error("mismatched runs: {0}")]
    MismatchedRuns(String),
    #[error("imaginary-time iteration did not converge within {iters} iterations")]
    NoConvergence { iters: usize },
    #[error("bad snapshot bytes: {0}")]
    BadSnapshot(String),
}

/// Periodic uniform grid, d in {1,2,3}, power-of-two points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub extent: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(dim: usize, extent: f64, points: usize) -> Result<Self, GpeError> {
        if !(1..=3).contains(&dim) {
            return Err(GpeError::InvalidGrid(format!("dim {dim} not in 1..=3")));
        }
        if extent <= 0.0 {
            return Err(GpeError::InvalidGrid("extent must be positive".into()));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(GpeError::InvalidGrid(format!(
                "points {points} must be a power of two >= 8"
            )));
        }
        Ok(GridSpec { dim, extent, points })
    }

    pub fn total_points(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Signed wavenumber of the j-th mode along one axis.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.points as i64;
        let jj = j as i64;
        let signed = if jj <= n / 2 - 1 { jj } else { jj - n };
        2.0 * std::f64::consts::PI * signed as f64 / self.extent
    }

    /// Coordinate of grid node j along one axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }
}

/// Complex wavefunction sampled on the grid.
#[derive(Debug, Clone)]
pub struct WaveField {
    pub grid: GridSpec,
    values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self, GpeError> {
        if values.len() != grid.total_points() {
            return Err(GpeError::InvalidGrid(format!(
                "value count {} does not match grid ({})",
                values.len(),
                grid.total_points()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(GpeError::InvalidGrid("non-finite amplitude".into()));
        }
        Ok(WaveField { grid, values })
    }

    pub fn constant(grid: GridSpec, value: Complex64) -> Self {
        WaveField { grid, values: vec![value; grid.total_points()] }
    }

    /// rho * exp(i k . x) with integer mode numbers per axis.
    pub fn plane_wave(grid: GridSpec, rho: f64, modes: [i64; 3]) -> Self {
        let mut values = Vec::with_capacity(grid.total_points());
        for_each_node(&grid, |x| {
            let mut phase = 0.0;
            for a in 0..grid.dim {
                phase += 2.0 * std::f64::consts::PI * modes[a] as f64 * x[a] / grid.extent;
            }
            values.push(Complex64::from_polar(rho, phase));
        });
        WaveField { grid, values }
    }

    /// exp(-|x - c|^2 / (4 sigma^2)), centred in the cell by default.
    pub fn gaussian(grid: GridSpec, sigma: f64, center: Option<[f64; 3]>) -> Self {
        let c = center.unwrap_or([grid.extent / 2.0; 3]);
        let mut values = Vec::with_capacity(grid.total_points());
        for_each_node(&grid, |x| {
            let mut r2 = 0.0;
            for a in 0..grid.dim {
                r2 += (x[a] - c[a]) * (x[a] - c[a]);
            }
            values.push(Complex64::new((-r2 / (4.0 * sigma * sigma)).exp(), 0.0));
        });
        WaveField { grid, values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Discrete mass integral of |phi|^2.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Rescale to the requested mass.
    pub fn normalize_mass(&mut self, target: f64) {
        let m = self.mass();
        if m > 0.0 {
            let s = (target / m).sqrt();
            for v in &mut self.values {
                *v *= s;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &WaveField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Snapshot encoding: 16-byte little-endian header (magic u32 "WGP1",
    /// dim u16, points u16, extent f64) followed by re/im f64 pairs.
    pub const SNAPSHOT_MAGIC: u32 = 0x3150_4757;

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 16 * self.values.len());
        out.extend_from_slice(&Self::SNAPSHOT_MAGIC.to_le_bytes());
        out.extend_from_slice(&(self.grid.dim as u16).to_le_bytes());
        out.extend_from_slice(&(self.grid.points as u16).to_le_bytes());
        out.extend_from_slice(&self.grid.extent.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GpeError> {
        if bytes.len() < 16 {
            return Err(GpeError::BadSnapshot("shorter than the 16-byte header".into()));
        }
        let magic = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        if magic != Self::SNAPSHOT_MAGIC {
            return Err(GpeError::BadSnapshot(format!("bad magic {magic:#x}")));
        }
        let dim = u16::from_le_bytes(bytes[4..6].try_into().unwrap()) as usize;
        let points = u16::from_le_bytes(bytes[6..8].try_into().unwrap()) as usize;
        let extent = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let grid = GridSpec::new(dim, extent, points)?;
        let need = 16 + 16 * grid.total_points();
        if bytes.len() != need {
            return Err(GpeError::BadSnapshot(format!(
                "expected {need} bytes, got {}",
                bytes.len()
            )));
        }
        let mut values = Vec::with_capacity(grid.total_points());
        for chunk in bytes[16..].chunks_exact(16) {
            let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
            values.push(Complex64::new(re, im));
        }
        WaveField::new(grid, values)
    }
}

/// Visit grid nodes in storage order, passing coordinates.
fn for_each_node(grid: &GridSpec, mut f: impl FnMut([f64; 3])) {
    let n = grid.points;
    match grid.dim {
        1 => {
            for i in 0..n {
                f([grid.coordinate(i), 0.0, 0.0]);
            }
        }
        2 => {
            for i in 0..n {
                for j in 0..n {
                    f([grid.coordinate(i), grid.coordinate(j), 0.0]);
                }
            }
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        f([grid.coordinate(i), grid.coordinate(j), grid.coordinate(k)]);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    None,
    /// mu_t = (b/3) int |phi|^6.
    Paper,
}

#[derive(Debug, Clone, Copy)]
pub struct GpeParams {
    pub coupling: f64,
    pub gauge: Gauge,
    pub dt: f64,
    pub t_end: f64,
    /// Steps between recorded checkpoints.
    pub checkpoint_stride: usize,
}

impl GpeParams {
    fn validate(&self) -> Result<(), GpeError> {
        if self.dt <= 0.0 || self.t_end < 0.0 || self.coupling < 0.0 {
            return Err(GpeError::InvalidGrid(
                "need dt > 0, t_end >= 0 and coupling >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Discrete energy content of a field.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
    pub mass: f64,
}

/// One recorded instant of an evolution.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub time: f64,
    pub field: WaveField,
    pub mu: f64,
    /// Accumulated integral of mu over [0, time].
    pub phase_integral: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: GpeParams,
    pub checkpoints: Vec<Checkpoint>,
}

/// Per-axis FFT engine over the flattened field.
struct Spectral {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// |k|^2 per flattened node.
    k_sq: Vec<f64>,
}

impl Spectral {
    fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points);
        let inverse = planner.plan_fft_inverse(grid.points);
        let n = grid.points;
        let axis_k2: Vec<f64> = (0..n).map(|j| grid.wavenumber(j).powi(2)).collect();
        let mut k_sq = vec![0.0; grid.total_points()];
        match grid.dim {
            1 => k_sq.copy_from_slice(&axis_k2),
            2 => {
                for i in 0..n {
                    for j in 0..n {
                        k_sq[i * n + j] = axis_k2[i] + axis_k2[j];
                    }
                }
            }
            _ => {
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            k_sq[(i * n + j) * n + l] = axis_k2[i] + axis_k2[j] + axis_k2[l];
                        }
                    }
                }
            }
        }
        Spectral { grid, forward, inverse, k_sq }
    }

    /// In-place FFT along every axis. `inverse` includes the 1/n per-axis
    /// normalisation.
    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid.points;
        let d = self.grid.dim;
        let fft = if inverse { &self.inverse } else { &self.forward };
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            let block = n * stride;
            data.par_chunks_mut(block).for_each(|chunk| {
                let mut line = vec![Complex64::new(0.0, 0.0); n];
                let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
                for inner in 0..stride {
                    for j in 0..n {
                        line[j] = chunk[j * stride + inner];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for j in 0..n {
                        chunk[j * stride + inner] = line[j];
                    }
                }
            });
        }
        if inverse {
            let scale = 1.0 / (self.grid.total_points() as f64);
            data.par_iter_mut().for_each(|v| *v *= scale);
        }
    }

    /// Apply exp(-i |k|^2 tau) in Fourier space.
    fn kinetic_step(&self, data: &mut [Complex64], tau: f64) {
        self.transform(data, false);
        data.par_iter_mut().zip(self.k_sq.par_iter()).for_each(|(v, &k2)| {
            *v *= Complex64::from_polar(1.0, -k2 * tau);
        });
        self.transform(data, true);
    }
}

/// Gauge value for the current field.
fn gauge_mu(values: &[Complex64], cell: f64, coupling: f64, gauge: Gauge) -> f64 {
    match gauge {
        Gauge::None => 0.0,
        Gauge::Paper => {
            let p6: f64 = values.iter().map(|v| v.norm_sqr().powi(3)).sum::<f64>() * cell;
            coupling / 3.0 * p6
        }
    }
}

/// Evolve a field, recording checkpoints every `checkpoint_stride` steps
/// (the initial state and the final time are always recorded).
pub fn evolve(field: &WaveField, params: &GpeParams) -> Result<Trajectory, GpeError> {
    params.validate()?;
    let spectral = Spectral::new(field.grid);
    let cell = field.grid.cell_volume();
    let dt = params.dt;
    let steps = (params.t_end / dt).round() as usize;
    let stride = params.checkpoint_stride.max(1);

    let mut values = field.values.clone();
    let mut phase_integral = 0.0;
    let mu0 = gauge_mu(&values, cell, params.coupling, params.gauge);
    let mut checkpoints = vec![Checkpoint {
        time: 0.0,
        field: field.clone(),
        mu: mu0,
        phase_integral: 0.0,
    }];

    let mut step = 0usize;
    while step < steps {
        let burst = stride.min(steps - step);
        spectral.kinetic_step(&mut values, dt / 2.0);
        let mut mu_last = 0.0;
        for j in 0..burst {
            // the nonlinear substep conserves |phi| pointwise, so mu is
            // constant across it and the applied phase integral is exact
            let mu = gauge_mu(&values, cell, params.coupling, params.gauge);
            mu_last = mu;
            let half_b = params.coupling / 2.0;
            let max_phase = values
                .par_iter()
                .map(|v| (half_b * v.norm_sqr().powi(2) - mu).abs())
                .reduce(|| 0.0, f64::max)
                * dt;
            if max_phase > std::f64::consts::PI {
                return Err(GpeError::StepTooLarge { phase: max_phase });
            }
            values.par_iter_mut().for_each(|v| {
                let w = half_b * v.norm_sqr().powi(2) - mu;
                *v *= Complex64::from_polar(1.0, -dt * w);
            });
            phase_integral += dt * mu;
            if j + 1 < burst {
                spectral.kinetic_step(&mut values, dt);
            }
        }
        spectral.kinetic_step(&mut values, dt / 2.0);
        step += burst;
        let snapshot = WaveField { grid: field.grid, values: values.clone() };
        checkpoints.push(Checkpoint {
            time: step as f64 * dt,
            field: snapshot,
            mu: mu_last,
            phase_integral,
        });
    }

    Ok(Trajectory { params: *params, checkpoints })
}

/// Discrete energy: spectral kinetic term, grid quadrature for the rest.
pub fn energy(field: &WaveField, coupling: f64) -> EnergyReport {
    let spectral = Spectral::new(field.grid);
    let mut hat = field.values.clone();
    spectral.transform(&mut hat, false);
    let n_tot = field.grid.total_points() as f64;
    let vol = field.grid.extent.powi(field.grid.dim as i32);
    let kinetic: f64 = hat
        .iter()
        .zip(&spectral.k_sq)
        .map(|(v, &k2)| k2 * v.norm_sqr())
        .sum::<f64>()
        * vol
        / (n_tot * n_tot);
    let cell = field.grid.cell_volume();
    let potential: f64 =
        coupling / 6.0 * field.values.iter().map(|v| v.norm_sqr().powi(3)).sum::<f64>() * cell;
    EnergyReport {
        kinetic,
        potential,
        total: kinetic + potential,
        mass: field.mass(),
    }
}

/// Result of aligning a gauged against an ungauged run.
#[derive(Debug, Clone)]
pub struct GaugeCheck {
    /// max over checkpoints of || phi_gauged - e^{i Phi} phi_ungauged ||_inf.
    pub max_deviation: f64,
    /// max over interior checkpoints of |<i d/dt phi, phi> - E| for the
    /// gauged run, with the centred-difference time derivative. Exact
    /// pairing with the energy functional holds for unit-mass data.
    pub max_energy_pairing_error: f64,
}

pub fn gauge_phase_check(
    gauged: &Trajectory,
    ungauged: &Trajectory,
) -> Result<GaugeCheck, GpeError> {
    if gauged.checkpoints.len() != ungauged.checkpoints.len() {
        return Err(GpeError::MismatchedRuns("checkpoint counts differ".into()));
    }
    if gauged.params.gauge != Gauge::Paper || ungauged.params.gauge != Gauge::None {
        return Err(GpeError::MismatchedRuns(
            "expected a Paper-gauge run and a gauge-free run".into(),
        ));
    }
    if (gauged.params.dt - ungauged.params.dt).abs() > 0.0 {
        return Err(GpeError::MismatchedRuns("time steps differ".into()));
    }
    let first_g = &gauged.checkpoints[0];
    let first_u = &ungauged.checkpoints[0];
    if first_g.field.grid != first_u.field.grid
        || first_g.field.max_abs_diff(&first_u.field) > 1e-12
    {
        return Err(GpeError::MismatchedRuns("initial data differ".into()));
    }

    let mut max_dev: f64 = 0.0;
    for (cg, cu) in gauged.checkpoints.iter().zip(&ungauged.checkpoints) {
        let rot = Complex64::from_polar(1.0, cg.phase_integral);
        let dev = cg
            .field
            .values()
            .iter()
            .zip(cu.field.values())
            .map(|(a, b)| (a - rot * b).norm())
            .fold(0.0, f64::max);
        max_dev = max_dev.max(dev);
    }

    // centred-difference energy pairing on the gauged run
    let cell = first_g.field.grid.cell_volume();
    let b = gauged.params.coupling;
    let mut max_pair: f64 = 0.0;
    for w in gauged.checkpoints.windows(3) {
        let dt2 = w[2].time - w[0].time;
        if dt2 <= 0.0 {
            continue;
        }
        let mut pairing = Complex64::new(0.0, 0.0);
        for ((p, c), n) in w[0]
            .field
            .values()
            .iter()
            .zip(w[1].field.values())
            .zip(w[2].field.values())
        {
            let dphi = (n - p) / dt2;
            pairing += (Complex64::i() * dphi).conj() * c;
        }
        let pairing = pairing * cell;
        let e = energy(&w[1].field, b);
        max_pair = max_pair.max((pairing - Complex64::new(e.total, 0.0)).norm());
    }

    Ok(GaugeCheck { max_deviation: max_dev, max_energy_pairing_error: max_pair })
}

/// Imaginary-time (normalised gradient flow) ground state at fixed mass,
/// optionally under the smooth periodic confinement
/// W(x) = w0 sum_a (1 - cos(2 pi x_a / L)).
pub fn ground_state_imaginary_time(
    grid: GridSpec,
    coupling: f64,
    mass: f64,
    confinement: Option<f64>,
    dtau: f64,
    tol: f64,
    max_iter: usize,
) -> Result<WaveField, GpeError> {
    let spectral = Spectral::new(grid);
    let mut field = match confinement {
        // a gentle bump seed; the flow smooths it out
        Some(_) => WaveField::gaussian(grid, grid.extent / 6.0, None),
        None => WaveField::constant(grid, Complex64::new(1.0, 0.0)),
    };
    field.normalize_mass(mass);

    let conf: Option<Vec<f64>> = confinement.map(|w0| {
        let mut w = Vec::with_capacity(grid.total_points());
        for_each_node(&grid, |x| {
            let mut v = 0.0;
            for a in 0..grid.dim {
                v += w0 * (1.0 - (2.0 * std::f64::consts::PI * x[a] / grid.extent).cos());
            }
            w.push(v);
        });
        w
    });

    let objective = |f: &WaveField| -> f64 {
        let e = energy(f, coupling);
        let ext = conf.as_ref().map_or(0.0, |w| {
            f.values()
                .iter()
                .zip(w)
                .map(|(v, &wv)| wv * v.norm_sqr())
                .sum::<f64>()
                * grid.cell_volume()
        });
        e.total + ext
    };

    let mut last = objective(&field);
    for _ in 0..max_iter {
        let mut next = field.values.clone();
        // explicit potential/nonlinear part
        next.par_iter_mut().enumerate().for_each(|(i, v)| {
            let w = conf.as_ref().map_or(0.0, |c| c[i]);
            let nl = coupling / 2.0 * v.norm_sqr().powi(2);
            *v *= Complex64::new(1.0 - dtau * (w + nl), 0.0);
        });
        // implicit kinetic part
        spectral.transform(&mut next, false);
        next.par_iter_mut().zip(spectral.k_sq.par_iter()).for_each(|(v, &k2)| {
            *v /= Complex64::new(1.0 + dtau * k2, 0.0);
        });
        spectral.transform(&mut next, true);
        let mut cand = WaveField { grid, values: next };
        cand.normalize_mass(mass);
        let obj = objective(&cand);
        let done = (last - obj).abs() <= tol * obj.abs().max(1.0);
        field = cand;
        last = obj;
        if done {
            return Ok(field);
        }
    }
    Err(GpeError::NoConvergence { iters: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_mass_gaussian(grid: GridSpec, sigma: f64) -> WaveField {
        let mut f = WaveField::gaussian(grid, sigma, None);
        f.normalize_mass(1.0);
        f
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1, 16.0, 256).is_ok());
        assert!(GridSpec::new(0, 16.0, 256).is_err());
        assert!(GridSpec::new(1, 16.0, 100).is_err());
        assert!(GridSpec::new(1, -1.0, 256).is_err());
    }

    #[test]
    fn free_gaussian_matches_exact_spreading() {
        // b = 0 on a large cell: compare against the closed-form free
        // evolution of exp(-|x-c|^2/(4 sigma^2))
        let grid = GridSpec::new(1, 32.0, 256).unwrap();
        let sigma = 1.0;
        let f0 = WaveField::gaussian(grid, sigma, None);
        let params = GpeParams {
            coupling: 0.0,
            gauge: Gauge::None,
            dt: 1e-3,
            t_end: 1.0,
            checkpoint_stride: 1000,
        };
        let traj = evolve(&f0, &params).unwrap();
        let last = traj.checkpoints.last().unwrap();
        let t = last.time;
        let z = Complex64::new(sigma * sigma, t);
        let amp = (Complex64::new(sigma * sigma, 0.0) / z).powf(0.5);
        let c = grid.extent / 2.0;
        let mut worst: f64 = 0.0;
        for (j, v) in last.field.values().iter().enumerate() {
            let x = grid.coordinate(j) - c;
            let exact = amp * (Complex64::new(-x * x, 0.0) / (4.0 * z)).exp();
            worst = worst.max((v - exact).norm());
        }
        assert!(worst < 1e-8, "free Gaussian error {worst}");
    }

    #[test]
    fn plane_wave_is_exact_to_rounding() {
        let grid = GridSpec::new(1, 16.0, 256).unwrap();
        let rho = 0.7;
        let b = 2.0;
        let f0 = WaveField::plane_wave(grid, rho, [3, 0, 0]);
        let params = GpeParams {
            coupling: b,
            gauge: Gauge::None,
            dt: 1e-3,
            t_end: 1.0,
            checkpoint_stride: 1000,
        };
        let traj = evolve(&f0, &params).unwrap();
        let last = traj.checkpoints.last().unwrap();
        let k = 2.0 * std::f64::consts::PI * 3.0 / grid.extent;
        let omega = k * k + b / 2.0 * rho.powi(4);
        let mut worst: f64 = 0.0;
        for (j, v) in last.field.values().iter().enumerate() {
            let x = grid.coordinate(j);
            let exact = Complex64::from_polar(rho, k * x - omega * last.time);
            worst = worst.max((v - exact).norm());
        }
        assert!(worst < 1e-10, "plane-wave error {worst}");
    }

    #[test]
    fn mass_is_conserved_to_rounding() {
        let grid = GridSpec::new(1, 16.0, 256).unwrap();
        let f0 = unit_mass_gaussian(grid, 1.0);
        let params = GpeParams {
            coupling: 5.0,
            gauge: Gauge::Paper,
            dt: 1e-3,
            t_end: 1.0,
            checkpoint_stride: 100,
        };
        let traj = evolve(&f0, &params).unwrap();
        let m0 = traj.checkpoints[0].field.mass();
        for c in &traj.checkpoints {
            assert!(((c.field.mass() - m0) / m0).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_of_plane_wave_matches_closed_form() {
        let grid = GridSpec::new(1, 16.0, 256).unwrap();
        let rho = 0.9;
        let b = 3.0;
        let f = WaveField::plane_wave(grid, rho, [2, 0, 0]);
        let e = energy(&f, b);
        let k = 2.0 * std::f64::consts::PI * 2.0 / grid.extent;
        let kin_exact = rho * rho * k * k * grid.extent;
        let pot_exact = b / 6.0 * rho.powi(6) * grid.extent;
        assert!((e.kinetic - kin_exact).abs() < 1e-10 * kin_exact);
        assert!((e.potential - pot_exact).abs() < 1e-12 * pot_exact);
        assert_eq!(energy(&WaveField::constant(grid, Complex64::new(0.0, 0.0)), b).total, 0.0);
    }

    #[test]
    fn strang_step_is_second_order() {
        // Richardson: global error at t = 0.25 against a dt/8 reference
        // must drop by ~4 when dt halves
        let grid = GridSpec::new(1, 16.0, 128).unwrap();
        let f0 = unit_mass_gaussian(grid, 1.2);
        let run = |dt: f64| {
            let params = GpeParams {
                coupling: 4.0,
                gauge: Gauge::None,
                dt,
                t_end: 0.25,
                checkpoint_stride: usize::MAX,
            };
            evolve(&f0, &params).unwrap().checkpoints.last().unwrap().field.clone()
        };
        let reference = run(2.5e-4);
        let e1 = run(2e-3).max_abs_diff(&reference);
        let e2 = run(1e-3).max_abs_diff(&reference);
        let ratio = e1 / e2;
        assert!(
            (3.2..=4.8).contains(&ratio),
            "convergence ratio {ratio}, errors {e1:.3e}/{e2:.3e}"
        );
    }

    #[test]
    fn gauge_covariance_plane_wave_and_smooth_datum() {
        let grid = GridSpec::new(1, 16.0, 256).unwrap();
        for (field, tol) in [
            (WaveField::plane_wave(grid, 1.0 / 4.0, [1, 0, 0]), 1e-8),
            (unit_mass_gaussian(grid, 1.0), 1e-6),
        ] {
            let mk = |gauge| GpeParams {
                coupling: 2.0,
                gauge,
                dt: 1e-3,
                t_end: 0.5,
                checkpoint_stride: 100,
            };
            let tg = evolve(&field, &mk(Gauge::Paper)).unwrap();
            let tu = evolve(&field, &mk(Gauge::None)).unwrap();
            let chk = gauge_phase_check(&tg, &tu).unwrap();
            assert!(chk.max_deviation < tol, "gauge deviation {}", chk.max_deviation);
        }
    }

    #[test]
    fn gauge_pairing_matches_energy_for_unit_mass_plane_wave() {
        let grid = GridSpec::new(1, 16.0, 256).unwrap();
        // unit mass: rho^2 L = 1
        let rho = (1.0 / grid.extent).sqrt();
        let field = WaveField::plane_wave(grid, rho, [2, 0, 0]);
        let run = |dt: f64, stride: usize| {
            let tg = evolve(
                &field,
                &GpeParams {
                    coupling: 2.0,
                    gauge: Gauge::Paper,
                    dt,
                    t_end: 0.2,
                    checkpoint_stride: stride,
                },
            )
            .unwrap();
            let tu = evolve(
                &field,
                &GpeParams {
                    coupling: 2.0,
                    gauge: Gauge::None,
                    dt,
                    t_end: 0.2,
                    checkpoint_stride: stride,
                },
            )
            .unwrap();
            gauge_phase_check(&tg, &tu).unwrap()
        };
        let c1 = run(2e-3, 1);
        let c2 = run(1e-3, 1);
        assert!(c1.max_deviation < 1e-8);
        // centred differences: pairing error shrinks like dt^2
        let ratio = c1.max_energy_pairing_error / c2.max_energy_pairing_error;
        assert!((3.0..=5.0).contains(&ratio), "pairing order ratio {ratio}");
        assert!(c2.max_energy_pairing_error < 1e-5);
    }

    #[test]
    fn gauge_check_rejects_mismatched_runs() {
        let grid = GridSpec::new(1, 16.0, 256).unwrap();
        let f = unit_mass_gaussian(grid, 1.0);
        let params = GpeParams {
            coupling: 2.0,
            gauge: Gauge::Paper,
            dt: 1e-3,
            t_end: 0.1,
            checkpoint_stride: 50,
        };
        let tg = evolve(&f, &params).unwrap();
        assert!(matches!(
            gauge_phase_check(&tg, &tg),
            Err(GpeError::MismatchedRuns(_))
        ));
    }

    #[test]
    fn step_too_large_is_reported() {
        let grid = GridSpec::new(1, 16.0, 64).unwrap();
        let f = WaveField::plane_wave(grid, 3.0, [0, 0, 0]);
        let params = GpeParams {
            coupling: 100.0,
            gauge: Gauge::None,
            dt: 0.5,
            t_end: 1.0,
            checkpoint_stride: 1,
        };
        assert!(matches!(evolve(&f, &params), Err(GpeError::StepTooLarge { .. })));
    }

    #[test]
    fn ground_state_on_torus_is_constant() {
        let grid = GridSpec::new(1, 16.0, 64).unwrap();
        let gs = ground_state_imaginary_time(grid, 0.0, 1.0, None, 0.05, 1e-13, 10_000).unwrap();
        let expect = (1.0 / grid.extent).sqrt();
        for v in gs.values() {
            assert!((v.norm() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn confined_ground_state_is_smooth_and_below_trial_state() {
        let grid = GridSpec::new(1, 16.0, 128).unwrap();
        let b = 2.0;
        let w0 = 1.0;
        let gs =
            ground_state_imaginary_time(grid, b, 1.0, Some(w0), 0.02, 1e-12, 50_000).unwrap();
        // spectral tail below 1e-12 of the peak coefficient
        let spectral = Spectral::new(grid);
        let mut hat = gs.values().to_vec();
        spectral.transform(&mut hat, false);
        let peak = hat.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let n = grid.points;
        let tail = (n / 2 - n / 8..n / 2 + n / 8)
            .map(|j| hat[j].norm())
            .fold(0.0, f64::max);
        assert!(tail < 1e-12 * peak, "spectral tail {tail} vs peak {peak}");
        // variational comparison against a Gaussian trial state of the same
        // mass, including the confinement energy
        let mut trial = WaveField::gaussian(grid, 2.0, None);
        trial.normalize_mass(1.0);
        let obj = |f: &WaveField| {
            let e = energy(f, b);
            let mut ext = 0.0;
            for (j, v) in f.values().iter().enumerate() {
                let x = grid.coordinate(j);
                ext += w0
                    * (1.0 - (2.0 * std::f64::consts::PI * x / grid.extent).cos())
                    * v.norm_sqr();
            }
            e.total + ext * grid.cell_volume()
        };
        assert!(obj(&gs) <= obj(&trial) + 1e-10);
    }

    #[test]
    fn snapshot_roundtrip() {
        let grid = GridSpec::new(2, 8.0, 16).unwrap();
        let f = unit_mass_gaussian(grid, 1.0);
        let bytes = f.to_bytes();
        assert_eq!(bytes.len(), 16 + 16 * grid.total_points());
        let back = WaveField::from_bytes(&bytes).unwrap();
        assert_eq!(back.grid, grid);
        assert_eq!(f.max_abs_diff(&back), 0.0);
        assert!(WaveField::from_bytes(&bytes[1..]).is_err());
    }
}
