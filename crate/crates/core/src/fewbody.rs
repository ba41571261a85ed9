//! Exact few-boson dynamics on a periodic 1D lattice with on-site
//! three-body interaction in mean-field normalisation.
//!
//! The Hamiltonian is the discrete Laplacian hopping (2 on the diagonal,
//! -1 to the neighbours) plus (g3/N^2) sum_i n_i(n_i-1)(n_i-2)/6; the
//! normalisation makes the product-state energy per particle converge to
//! the discrete quintic energy functional. States live in the fixed-N
//! occupation basis, evolution is Lanczos-propagated, and condensation is
//! measured through the one-body density matrix.
//!
//! Density-matrix convention: gamma[i][j] = <a_j^dag a_i> (the kernel
//! ordering), so a pure condensate gives gamma = N |phi><phi| and the
//! depletion 1 - <phi, gamma phi>/N vanishes on product states.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::log_log_slope;

#[derive(Debug, Error)]
pub enum FewbodyError {
    #[error("basis dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: u64, cap: u64 },
    #[error("krylov recursion produced a non-finite value")]
    KrylovBreakdown,
    #[error("krylov substep control could not reach tolerance {tol:.3e}")]
    ToleranceNotMet { tol: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Periodic chain with discrete-Laplacian hopping.
#[derive(Debug, Clone, Copy)]
pub struct LatticeSpec {
    pub sites: usize,
}

impl LatticeSpec {
    pub fn new(sites: usize) -> Result<Self, FewbodyError> {
        if sites < 2 {
            return Err(FewbodyError::InvalidInput("need at least two sites".into()));
        }
        Ok(LatticeSpec { sites })
    }
}

/// Default cap on the occupation-basis dimension.
pub const DEFAULT_DIMENSION_CAP: u64 = 200_000;

/// Complete lexicographic occupation basis of N bosons on L sites.
///
/// States are ordered with the leading site occupancy decreasing, e.g.
/// (2,0), (1,1), (0,2). Rank and unrank run in O(L) off a binomial table.
#[derive(Debug)]
pub struct FockBasis {
    pub sites: usize,
    pub particles: usize,
    /// Flattened occupation vectors, stride `sites`.
    occupations: Vec<u16>,
    dim: usize,
    /// binom[a][b] = C(a, b) for a <= sites + particles.
    binom: Vec<Vec<u64>>,
}

/// C(l + n - 1, n): dimension of the n-particle sector on l sites.
fn sector_dim(binom: &[Vec<u64>], sites: usize, particles: usize) -> u64 {
    if sites == 0 {
        return u64::from(particles == 0);
    }
    binom[sites + particles - 1][particles]
}

pub fn enumerate_basis(
    spec: LatticeSpec,
    particles: usize,
    cap: u64,
) -> Result<Arc<FockBasis>, FewbodyError> {
    let sites = spec.sites;
    let top = sites + particles + 1;
    let mut binom = vec![vec![0u64; top + 1]; top + 1];
    for a in 0..=top {
        binom[a][0] = 1;
        for b in 1..=a {
            binom[a][b] = binom[a - 1][b - 1] + if b <= a - 1 { binom[a - 1][b] } else { 0 };
        }
    }
    let dim = sector_dim(&binom, sites, particles);
    if dim > cap {
        return Err(FewbodyError::DimensionCap { dim, cap });
    }
    let dim = dim as usize;
    let mut occupations = Vec::with_capacity(dim * sites);
    let mut state = vec![0u16; sites];
    fill_states(&mut occupations, &mut state, 0, particles, sites);
    debug_assert_eq!(occupations.len(), dim * sites);
    Ok(Arc::new(FockBasis { sites, particles, occupations, dim, binom }))
}

fn fill_states(out: &mut Vec<u16>, state: &mut [u16], site: usize, remaining: usize, sites: usize) {
    if site == sites - 1 {
        state[site] = remaining as u16;
        out.extend_from_slice(state);
        return;
    }
    for m in (0..=remaining).rev() {
        state[site] = m as u16;
        fill_states(out, state, site + 1, remaining - m, sites);
    }
}

impl FockBasis {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn occupation(&self, index: usize) -> &[u16] {
        &self.occupations[index * self.sites..(index + 1) * self.sites]
    }

    /// Lexicographic rank of an occupation vector.
    pub fn rank(&self, occ: &[u16]) -> usize {
        debug_assert_eq!(occ.len(), self.sites);
        let mut rank = 0u64;
        let mut remaining = self.particles;
        for (site, &n) in occ.iter().enumerate().take(self.sites - 1) {
            let n = n as usize;
            // states with a larger occupancy at this site come first
            for m in (n + 1)..=remaining {
                rank += sector_dim(&self.binom, self.sites - site - 1, remaining - m);
            }
            remaining -= n;
        }
        rank as usize
    }

    pub fn unrank(&self, index: usize) -> Vec<u16> {
        self.occupation(index).to_vec()
    }
}

/// CSR sparse Hermitian operator on the occupation basis.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    pub dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseHamiltonian {
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *out = acc;
        });
    }

    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn max_nonzeros_per_row(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.cols[k] as usize, self.vals[k]))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.entries() {
            m[(r, c)] += v;
        }
        m
    }
}

/// Hamiltonian with scaled hopping; the public entry point fixes the
/// hopping coefficient to 1.
pub fn assemble_hamiltonian(
    basis: &FockBasis,
    g3: f64,
    hopping_scale: f64,
) -> SparseHamiltonian {
    let sites = basis.sites;
    let n = basis.particles as f64;
    let dim = basis.dimension();
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols: Vec<u32> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    row_ptr.push(0);
    let mut scratch = vec![0u16; sites];
    let mut row_entries: Vec<(u32, f64)> = Vec::with_capacity(2 * sites + 1);
    for a in 0..dim {
        row_entries.clear();
        let occ = basis.occupation(a);
        let mut diag = 0.0;
        for &ni in occ {
            let nf = ni as f64;
            diag += hopping_scale * 2.0 * nf;
            if ni >= 3 {
                diag += g3 / (n * n) * nf * (nf - 1.0) * (nf - 2.0) / 6.0;
            }
        }
        row_entries.push((a as u32, diag));
        if hopping_scale != 0.0 {
            for i in 0..sites {
                let j = (i + 1) % sites;
                // -a_i^dag a_j
                if occ[j] > 0 {
                    scratch.copy_from_slice(occ);
                    scratch[j] -= 1;
                    scratch[i] += 1;
                    let b = basis.rank(&scratch);
                    let amp = -hopping_scale
                        * ((occ[j] as f64) * (occ[i] as f64 + 1.0)).sqrt();
                    row_entries.push((b as u32, amp));
                }
                // -a_j^dag a_i
                if occ[i] > 0 {
                    scratch.copy_from_slice(occ);
                    scratch[i] -= 1;
                    scratch[j] += 1;
                    let b = basis.rank(&scratch);
                    let amp = -hopping_scale
                        * ((occ[i] as f64) * (occ[j] as f64 + 1.0)).sqrt();
                    row_entries.push((b as u32, amp));
                }
            }
        }
        row_entries.sort_by_key(|e| e.0);
        // merge duplicates (the two-site ring hits the same bond twice)
        let mut k = 0;
        while k < row_entries.len() {
            let col = row_entries[k].0;
            let mut v = row_entries[k].1;
            let mut kk = k + 1;
            while kk < row_entries.len() && row_entries[kk].0 == col {
                v += row_entries[kk].1;
                kk += 1;
            }
            cols.push(col);
            vals.push(v);
            k = kk;
        }
        row_ptr.push(cols.len());
    }
    SparseHamiltonian { dim, row_ptr, cols, vals }
}

/// Hopping plus mean-field three-body interaction.
pub fn build_hamiltonian(basis: &FockBasis, g3: f64) -> SparseHamiltonian {
    assemble_hamiltonian(basis, g3, 1.0)
}

/// Amplitudes over a Fock basis.
#[derive(Debug, Clone)]
pub struct ManyBodyState {
    pub basis: Arc<FockBasis>,
    pub amplitudes: Vec<Complex64>,
}

impl ManyBodyState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Condensate product state phi^(x) N in the occupation basis.
pub fn product_state(basis: Arc<FockBasis>, orbital: &[Complex64]) -> ManyBodyState {
    assert_eq!(orbital.len(), basis.sites);
    let n = basis.particles;
    // ln k! table
    let mut lnfact = vec![0.0f64; n + 1];
    for k in 1..=n {
        lnfact[k] = lnfact[k - 1] + (k as f64).ln();
    }
    let mut amplitudes = Vec::with_capacity(basis.dimension());
    for a in 0..basis.dimension() {
        let occ = basis.occupation(a);
        let mut ln_coeff = lnfact[n];
        let mut prod = Complex64::new(1.0, 0.0);
        for (site, &ni) in occ.iter().enumerate() {
            ln_coeff -= lnfact[ni as usize];
            prod *= orbital[site].powu(ni as u32);
        }
        amplitudes.push(prod * (0.5 * ln_coeff).exp());
    }
    ManyBodyState { basis, amplitudes }
}

/// Lanczos propagation of exp(-i H t) with adaptive substep halving.
///
/// The a-posteriori estimate beta_m |[exp(-i T dt)]_{m,1}| controls the
/// substep; the count doubles until the accumulated estimate meets `tol`.
pub fn evolve_krylov(
    state: &ManyBodyState,
    h: &SparseHamiltonian,
    t: f64,
    tol: f64,
) -> Result<ManyBodyState, FewbodyError> {
    const KRYLOV_DIM: usize = 30;
    if t == 0.0 {
        return Ok(state.clone());
    }
    let mut substeps = 1usize;
    loop {
        let dt = t / substeps as f64;
        let mut psi = state.amplitudes.clone();
        let mut total_err = 0.0;
        let mut ok = true;
        for _ in 0..substeps {
            let (next, err) = lanczos_exp_step(h, &psi, dt, KRYLOV_DIM)?;
            total_err += err;
            if total_err > tol {
                ok = false;
                break;
            }
            psi = next;
        }
        if ok {
            return Ok(ManyBodyState { basis: state.basis.clone(), amplitudes: psi });
        }
        substeps *= 2;
        if substeps > 1 << 20 {
            return Err(FewbodyError::ToleranceNotMet { tol });
        }
    }
}

fn lanczos_exp_step(
    h: &SparseHamiltonian,
    psi: &[Complex64],
    dt: f64,
    m_max: usize,
) -> Result<(Vec<Complex64>, f64), FewbodyError> {
    let dim = psi.len();
    let beta0 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if beta0 == 0.0 {
        return Ok((psi.to_vec(), 0.0));
    }
    let mut basis_vecs: Vec<Vec<Complex64>> = Vec::with_capacity(m_max + 1);
    basis_vecs.push(psi.iter().map(|a| a / beta0).collect());
    let mut alphas: Vec<f64> = Vec::with_capacity(m_max);
    let mut betas: Vec<f64> = Vec::with_capacity(m_max);
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut happy = false;
    for j in 0..m_max {
        h.apply(&basis_vecs[j], &mut w);
        if j > 0 {
            let b = betas[j - 1];
            let prev = &basis_vecs[j - 1];
            w.iter_mut().zip(prev).for_each(|(wv, pv)| *wv -= b * pv);
        }
        let alpha: f64 = basis_vecs[j]
            .iter()
            .zip(&w)
            .map(|(v, wv)| (v.conj() * wv).re)
            .sum();
        let vj = &basis_vecs[j];
        w.iter_mut().zip(vj).for_each(|(wv, vv)| *wv -= alpha * vv);
        // full reorthogonalisation keeps the tiny subspace clean
        for v in &basis_vecs {
            let ip: Complex64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            w.iter_mut().zip(v).for_each(|(wv, vv)| *wv -= ip * vv);
        }
        let beta = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(FewbodyError::KrylovBreakdown);
        }
        alphas.push(alpha);
        betas.push(beta);
        if beta < 1e-14 * alphas[0].abs().max(1.0) {
            happy = true;
            break;
        }
        if j + 1 < m_max {
            basis_vecs.push(w.iter().map(|a| a / beta).collect());
        }
    }
    let m = alphas.len();
    let mut tri = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        tri[(j, j)] = alphas[j];
        if j + 1 < m {
            tri[(j, j + 1)] = betas[j];
            tri[(j + 1, j)] = betas[j];
        }
    }
    let eig = SymmetricEigen::new(tri);
    // y = Q exp(-i Lambda dt) Q^T e_1
    let q = &eig.eigenvectors;
    let mut y = DVector::<Complex<f64>>::zeros(m);
    for a in 0..m {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..m {
            let phase = Complex64::from_polar(1.0, -eig.eigenvalues[k] * dt);
            acc += q[(a, k)] * phase * q[(0, k)];
        }
        y[a] = acc;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (a, v) in basis_vecs.iter().enumerate().take(m) {
        let coeff = beta0 * y[a];
        out.iter_mut().zip(v).for_each(|(o, vv)| *o += coeff * vv);
    }
    let err = if happy { 0.0 } else { beta0 * betas[m - 1] * y[m - 1].norm() };
    Ok((out, err))
}

/// One-body reduced density matrix in the kernel convention.
#[derive(Debug, Clone)]
pub struct OneBodyDM {
    pub sites: usize,
    /// Row-major gamma[i][j] = <a_j^dag a_i>.
    pub gamma: Vec<Complex64>,
}

impl OneBodyDM {
    pub fn trace(&self) -> f64 {
        (0..self.sites).map(|i| self.gamma[i * self.sites + i].re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let l = self.sites;
        let mut worst: f64 = 0.0;
        for i in 0..l {
            for j in 0..l {
                worst = worst
                    .max((self.gamma[i * l + j] - self.gamma[j * l + i].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let l = self.sites;
        let m = DMatrix::from_fn(l, l, |i, j| {
            let v = self.gamma[i * l + j];
            Complex::new(v.re, v.im)
        });
        let eig = SymmetricEigen::new(m);
        eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// <phi, gamma phi> for a normalised lattice orbital.
    pub fn condensate_occupation(&self, orbital: &[Complex64]) -> f64 {
        let l = self.sites;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..l {
            for j in 0..l {
                acc += orbital[i].conj() * self.gamma[i * l + j] * orbital[j];
            }
        }
        acc.re
    }
}

/// Assemble gamma by basis traversal; parallel over index chunks with an
/// ordered reduction.
pub fn one_body_dm(state: &ManyBodyState) -> OneBodyDM {
    let basis = &state.basis;
    let l = basis.sites;
    let dim = basis.dimension();
    let chunk = 4096usize;
    let partials: Vec<Vec<Complex64>> = (0..dim.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = ((c + 1) * chunk).min(dim);
            let mut local = vec![Complex64::new(0.0, 0.0); l * l];
            let mut scratch = vec![0u16; l];
            for a in lo..hi {
                let amp = state.amplitudes[a];
                if amp.norm_sqr() == 0.0 {
                    continue;
                }
                let occ = basis.occupation(a);
                for q in 0..l {
                    if occ[q] == 0 {
                        continue;
                    }
                    local[q * l + q] += Complex64::new(occ[q] as f64 * amp.norm_sqr(), 0.0);
                    for p in 0..l {
                        if p == q {
                            continue;
                        }
                        scratch.copy_from_slice(occ);
                        scratch[q] -= 1;
                        scratch[p] += 1;
                        let b = basis.rank(&scratch);
                        let w = ((occ[q] as f64) * (occ[p] as f64 + 1.0)).sqrt();
                        // gamma[q][p] = <a_p^dag a_q>
                        local[q * l + p] += state.amplitudes[b].conj() * amp * w;
                    }
                }
            }
            local
        })
        .collect();
    let mut gamma = vec![Complex64::new(0.0, 0.0); l * l];
    for part in partials {
        for (g, p) in gamma.iter_mut().zip(&part) {
            *g += p;
        }
    }
    OneBodyDM { sites: l, gamma }
}

/// Depletion of the condensate orbital: 1 - <phi, gamma phi>/N.
pub fn depletion(state: &ManyBodyState, orbital: &[Complex64]) -> f64 {
    let norm: f64 = orbital.iter().map(|v| v.norm_sqr()).sum();
    assert!((norm - 1.0).abs() < 1e-8, "orbital must be normalised");
    let dm = one_body_dm(state);
    let n = state.basis.particles as f64;
    (1.0 - dm.condensate_occupation(orbital) / n).clamp(0.0, 1.0)
}

/// Split-step evolution of the discrete quintic NLS
/// i d/dt phi = -Delta_disc phi + (g3/2)|phi|^4 phi on the ring.
pub fn lattice_nls_evolve(orbital: &[Complex64], g3: f64, t: f64, steps: usize) -> Vec<Complex64> {
    let l = orbital.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(l);
    let inv = planner.plan_fft_inverse(l);
    let eigen: Vec<f64> = (0..l)
        .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / l as f64).cos())
        .collect();
    let dt = t / steps.max(1) as f64;
    let mut phi = orbital.to_vec();
    let half: Vec<Complex64> = eigen
        .iter()
        .map(|&e| Complex64::from_polar(1.0, -e * dt / 2.0))
        .collect();
    for _ in 0..steps {
        fwd.process(&mut phi);
        phi.iter_mut().zip(&half).for_each(|(p, h)| *p *= h);
        inv.process(&mut phi);
        phi.iter_mut().for_each(|p| *p /= l as f64);
        phi.iter_mut().for_each(|p| {
            let w = g3 / 2.0 * p.norm_sqr().powi(2);
            *p *= Complex64::from_polar(1.0, -dt * w);
        });
        fwd.process(&mut phi);
        phi.iter_mut().zip(&half).for_each(|(p, h)| *p *= h);
        inv.process(&mut phi);
        phi.iter_mut().for_each(|p| *p /= l as f64);
    }
    phi
}

/// Depletion history of one particle count.
#[derive(Debug, Clone)]
pub struct DepletionCurve {
    pub particles: usize,
    pub times: Vec<f64>,
    pub depletion: Vec<f64>,
    pub norm_drift: f64,
    pub energy_drift: f64,
    pub max_depletion: f64,
}

/// Sweep over particle numbers comparing exact evolution against the
/// mean-field orbital.
#[derive(Debug, Clone)]
pub struct MeanFieldReport {
    pub curves: Vec<DepletionCurve>,
    /// log-log slope of max depletion against N.
    pub slope: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn mean_field_comparison(
    spec: LatticeSpec,
    n_list: &[usize],
    g3: f64,
    phi0: &[Complex64],
    t_end: f64,
    checkpoints: usize,
    krylov_tol: f64,
    cap: u64,
) -> Result<MeanFieldReport, FewbodyError> {
    if phi0.len() != spec.sites {
        return Err(FewbodyError::InvalidInput("orbital length must match lattice".into()));
    }
    let norm: f64 = phi0.iter().map(|v| v.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(FewbodyError::InvalidInput("orbital must be normalised".into()));
    }
    let mut curves = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let basis = enumerate_basis(spec, n, cap)?;
        let h = build_hamiltonian(&basis, g3);
        let mut state = product_state(basis.clone(), phi0);
        let e0 = h.expectation(&state.amplitudes);
        let mut times = vec![0.0];
        let mut deps = vec![depletion(&state, phi0)];
        let mut norm_drift: f64 = (state.norm() - 1.0).abs();
        let dt = t_end / checkpoints as f64;
        // one sub-ms NLS step per unit of dt keeps the orbital reference
        // far below the depletion scales measured here
        let nls_steps_per_chk = ((dt / 1e-3).ceil() as usize).max(1);
        for k in 1..=checkpoints {
            state = evolve_krylov(&state, &h, dt, krylov_tol)?;
            let t = k as f64 * dt;
            let orbital = lattice_nls_evolve(phi0, g3, t, nls_steps_per_chk * k);
            times.push(t);
            deps.push(depletion(&state, &orbital));
            norm_drift = norm_drift.max((state.norm() - 1.0).abs());
        }
        let e1 = h.expectation(&state.amplitudes);
        let max_dep = deps.iter().cloned().fold(0.0, f64::max);
        curves.push(DepletionCurve {
            particles: n,
            times,
            depletion: deps,
            norm_drift,
            energy_drift: (e1 - e0).abs() / e0.abs().max(1e-300),
            max_depletion: max_dep,
        });
    }
    let ns: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    let maxdeps: Vec<f64> = curves.iter().map(|c| c.max_depletion.max(1e-300)).collect();
    let slope = if ns.len() >= 2 { log_log_slope(&ns, &maxdeps) } else { 0.0 };
    Ok(MeanFieldReport { curves, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_plus_bump(l: usize) -> Vec<Complex64> {
        let mut phi: Vec<Complex64> = (0..l)
            .map(|i| {
                let x = 2.0 * std::f64::consts::PI * i as f64 / l as f64;
                Complex64::new(1.0 + 0.2 * x.cos(), 0.0)
            })
            .collect();
        let norm: f64 = phi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        phi.iter_mut().for_each(|v| *v /= norm);
        phi
    }

    #[test]
    fn basis_enumeration_small_cases() {
        let b = enumerate_basis(LatticeSpec::new(2).unwrap(), 2, 1000).unwrap();
        assert_eq!(b.dimension(), 3);
        assert_eq!(b.occupation(0), &[2, 0]);
        assert_eq!(b.occupation(1), &[1, 1]);
        assert_eq!(b.occupation(2), &[0, 2]);
        let b = enumerate_basis(LatticeSpec::new(10).unwrap(), 4, 100_000).unwrap();
        assert_eq!(b.dimension(), 715);
    }

    #[test]
    fn rank_unrank_bijection() {
        let b = enumerate_basis(LatticeSpec::new(7).unwrap(), 5, 100_000).unwrap();
        for i in 0..b.dimension() {
            assert_eq!(b.rank(&b.unrank(i)), i);
        }
        // spot-check ordering is duplicate-free and lexicographic
        for i in 1..b.dimension() {
            assert!(b.occupation(i - 1) > b.occupation(i));
        }
    }

    #[test]
    fn dimension_cap_is_enforced() {
        assert!(matches!(
            enumerate_basis(LatticeSpec::new(20).unwrap(), 10, 1000),
            Err(FewbodyError::DimensionCap { .. })
        ));
    }

    #[test]
    fn hamiltonian_is_exactly_symmetric_and_sparse() {
        let b = enumerate_basis(LatticeSpec::new(6).unwrap(), 3, 100_000).unwrap();
        let h = build_hamiltonian(&b, 2.0);
        assert!(h.max_nonzeros_per_row() <= 2 * 6 + 1);
        let dense = h.to_dense();
        for i in 0..h.dim {
            for j in 0..h.dim {
                assert_eq!(dense[(i, j)], dense[(j, i)], "asymmetry at ({i},{j})");
            }
        }
    }

    #[test]
    fn two_particles_feel_no_three_body_term() {
        let b = enumerate_basis(LatticeSpec::new(5).unwrap(), 2, 1000).unwrap();
        let with = build_hamiltonian(&b, 7.0);
        let without = build_hamiltonian(&b, 0.0);
        let d = (with.to_dense() - without.to_dense()).abs().max();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn product_state_energy_matches_multinomial_moments() {
        // oracle: <H>/N = <phi, h phi> + g3 (N-1)(N-2)/(6 N^2) sum |phi|^6,
        // from E[n_i(n_i-1)(n_i-2)] = N(N-1)(N-2)|phi_i|^6
        let l = 6;
        let phi = uniform_plus_bump(l);
        let spec = LatticeSpec::new(l).unwrap();
        let g3 = 2.0;
        let one_body: f64 = {
            let mut acc = 0.0;
            for i in 0..l {
                let lap = 2.0 * phi[i] - phi[(i + 1) % l] - phi[(i + l - 1) % l];
                acc += (phi[i].conj() * lap).re;
            }
            acc
        };
        let p6: f64 = phi.iter().map(|v| v.norm_sqr().powi(3)).sum();
        let gp_energy = one_body + g3 / 6.0 * p6;
        for n in [4usize, 8, 16] {
            let basis = enumerate_basis(spec, n, 1_000_000).unwrap();
            let h = build_hamiltonian(&basis, g3);
            let psi = product_state(basis, &phi);
            let nf = n as f64;
            let per_particle = h.expectation(&psi.amplitudes) / nf;
            let oracle = one_body + g3 * (nf - 1.0) * (nf - 2.0) / (6.0 * nf * nf) * p6;
            assert!(
                (per_particle - oracle).abs() < 1e-10,
                "N={n}: {per_particle} vs oracle {oracle}"
            );
            assert!((per_particle - gp_energy).abs() <= g3 * p6 * (3.0 * nf - 2.0) / (6.0 * nf * nf) + 1e-12);
        }
    }

    #[test]
    fn krylov_zero_time_is_identity() {
        let b = enumerate_basis(LatticeSpec::new(5).unwrap(), 3, 1000).unwrap();
        let h = build_hamiltonian(&b, 1.0);
        let phi = uniform_plus_bump(5);
        let psi = product_state(b, &phi);
        let out = evolve_krylov(&psi, &h, 0.0, 1e-10).unwrap();
        assert_eq!(out.amplitudes, psi.amplitudes);
    }

    #[test]
    fn krylov_matches_dense_exponential_oracle() {
        // dim-220 instance against the dense eigendecomposition
        let b = enumerate_basis(LatticeSpec::new(10).unwrap(), 3, 1000).unwrap();
        assert_eq!(b.dimension(), 220);
        let h = build_hamiltonian(&b, 2.0);
        let phi: Vec<Complex64> = {
            let l = 10;
            let mut v = uniform_plus_bump(l);
            v[3] *= Complex64::from_polar(1.0, 0.4);
            let n: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            v
        };
        let psi = product_state(b, &phi);
        let t = 1.3;
        let got = evolve_krylov(&psi, &h, t, 1e-12).unwrap();
        // oracle
        let dense = h.to_dense();
        let eig = SymmetricEigen::new(dense);
        let dim = h.dim;
        let mut proj = vec![Complex64::new(0.0, 0.0); dim];
        for k in 0..dim {
            let mut ip = Complex64::new(0.0, 0.0);
            for a in 0..dim {
                ip += eig.eigenvectors[(a, k)] * psi.amplitudes[a];
            }
            proj[k] = ip * Complex64::from_polar(1.0, -eig.eigenvalues[k] * t);
        }
        let mut want = vec![Complex64::new(0.0, 0.0); dim];
        for a in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..dim {
                acc += eig.eigenvectors[(a, k)] * proj[k];
            }
            want[a] = acc;
        }
        let err = got
            .amplitudes
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "krylov vs dense error {err}");
        assert!((got.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn diagonal_hamiltonian_gives_exact_phases() {
        let b = enumerate_basis(LatticeSpec::new(4).unwrap(), 3, 1000).unwrap();
        let h = assemble_hamiltonian(&b, 3.0, 0.0);
        let phi = uniform_plus_bump(4);
        let psi = product_state(b.clone(), &phi);
        let t = 0.7;
        let out = evolve_krylov(&psi, &h, t, 1e-12).unwrap();
        for a in 0..b.dimension() {
            let occ = b.occupation(a);
            let e: f64 = occ
                .iter()
                .map(|&ni| {
                    let nf = ni as f64;
                    3.0 / 9.0 * nf * (nf - 1.0) * (nf - 2.0) / 6.0
                })
                .sum();
            let want = psi.amplitudes[a] * Complex64::from_polar(1.0, -e * t);
            assert!((out.amplitudes[a] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn product_state_dm_has_zero_depletion_and_full_trace() {
        let l = 8;
        let phi = uniform_plus_bump(l);
        let b = enumerate_basis(LatticeSpec::new(l).unwrap(), 4, 100_000).unwrap();
        let psi = product_state(b, &phi);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let dm = one_body_dm(&psi);
        assert!((dm.trace() - 4.0).abs() < 1e-10);
        assert!(dm.hermiticity_error() < 1e-12);
        assert!(depletion(&psi, &phi) < 1e-12);
    }

    #[test]
    fn dm_matches_first_quantised_partial_trace() {
        // L = 4, N = 3: expand the 20-dimensional sector into the full
        // first-quantised tensor and trace out two particles
        let l = 4usize;
        let n = 3usize;
        let b = enumerate_basis(LatticeSpec::new(l).unwrap(), n, 1000).unwrap();
        assert_eq!(b.dimension(), 20);
        let h = build_hamiltonian(&b, 2.0);
        let phi = uniform_plus_bump(l);
        let mut state = product_state(b.clone(), &phi);
        state = evolve_krylov(&state, &h, 0.6, 1e-12).unwrap();
        // first-quantised tensor Psi[i1][i2][i3]
        let mut lnfact = [0.0f64; 4];
        for k in 1..4 {
            lnfact[k] = lnfact[k - 1] + (k as f64).ln();
        }
        let mut tensor = vec![Complex64::new(0.0, 0.0); l * l * l];
        for (idx, t) in tensor.iter_mut().enumerate() {
            let (i1, i2, i3) = (idx / (l * l), (idx / l) % l, idx % l);
            let mut occ = [0u16; 4];
            occ[i1] += 1;
            occ[i2] += 1;
            occ[i3] += 1;
            let a = b.rank(&occ);
            let ln_w: f64 = occ.iter().map(|&x| lnfact[x as usize]).sum::<f64>() - lnfact[n];
            *t = state.amplitudes[a] * (0.5 * ln_w).exp();
        }
        // gamma_oracle(p, q) = N sum_{i2,i3} Psi(p,i2,i3) conj(Psi(q,i2,i3))
        let dm = one_body_dm(&state);
        for p in 0..l {
            for q in 0..l {
                let mut acc = Complex64::new(0.0, 0.0);
                for i2 in 0..l {
                    for i3 in 0..l {
                        acc += tensor[(p * l + i2) * l + i3]
                            * tensor[(q * l + i2) * l + i3].conj();
                    }
                }
                let oracle = acc * n as f64;
                assert!(
                    (dm.gamma[p * l + q] - oracle).norm() < 1e-10,
                    "gamma({p},{q}) mismatch"
                );
            }
        }
    }

    #[test]
    fn trajectory_invariants_hold() {
        let l = 8;
        let phi = uniform_plus_bump(l);
        let b = enumerate_basis(LatticeSpec::new(l).unwrap(), 4, 100_000).unwrap();
        let h = build_hamiltonian(&b, 2.0);
        let mut state = product_state(b, &phi);
        let e0 = h.expectation(&state.amplitudes);
        for _ in 0..5 {
            state = evolve_krylov(&state, &h, 0.2, 1e-11).unwrap();
            assert!((state.norm() - 1.0).abs() < 1e-10);
            let dm = one_body_dm(&state);
            assert!((dm.trace() - 4.0).abs() < 1e-10);
            assert!(dm.hermiticity_error() < 1e-12);
            assert!(dm.min_eigenvalue() > -1e-10);
        }
        let e1 = h.expectation(&state.amplitudes);
        assert!(((e1 - e0) / e0.abs()).abs() < 1e-8);
    }

    #[test]
    fn translation_covariance_on_the_ring() {
        let l = 6;
        let phi = uniform_plus_bump(l);
        let shifted: Vec<Complex64> = (0..l).map(|i| phi[(i + l - 1) % l]).collect();
        let b = enumerate_basis(LatticeSpec::new(l).unwrap(), 3, 100_000).unwrap();
        let h = build_hamiltonian(&b, 2.0);
        let s1 = evolve_krylov(&product_state(b.clone(), &phi), &h, 0.5, 1e-12).unwrap();
        let s2 = evolve_krylov(&product_state(b, &shifted), &h, 0.5, 1e-12).unwrap();
        let d1 = one_body_dm(&s1);
        let d2 = one_body_dm(&s2);
        for i in 0..l {
            for j in 0..l {
                let want = d1.gamma[i * l + j];
                let got = d2.gamma[((i + 1) % l) * l + (j + 1) % l];
                assert!((want - got).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn free_evolution_keeps_zero_depletion() {
        let l = 8;
        let phi = uniform_plus_bump(l);
        let spec = LatticeSpec::new(l).unwrap();
        let report =
            mean_field_comparison(spec, &[3], 0.0, &phi, 1.0, 5, 1e-11, 100_000).unwrap();
        assert!(report.curves[0].max_depletion < 1e-11);
        assert!(report.curves[0].norm_drift < 1e-10);
    }

    #[test]
    fn depletion_is_bounded_and_curves_recorded() {
        let l = 6;
        let phi = uniform_plus_bump(l);
        let spec = LatticeSpec::new(l).unwrap();
        let report =
            mean_field_comparison(spec, &[3, 4], 2.0, &phi, 0.5, 4, 1e-10, 100_000).unwrap();
        assert_eq!(report.curves.len(), 2);
        for c in &report.curves {
            assert_eq!(c.times.len(), 5);
            for &d in &c.depletion {
                assert!((0.0..=1.0).contains(&d));
            }
            assert!(c.energy_drift < 1e-8);
        }
    }

    #[test]
    fn nls_orbital_conserves_norm_and_reduces_to_free_case() {
        let l = 12;
        let phi = uniform_plus_bump(l);
        let out = lattice_nls_evolve(&phi, 2.0, 1.0, 1000);
        let norm: f64 = out.iter().map(|v| v.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        // free case against the dense one-body propagator
        let free = lattice_nls_evolve(&phi, 0.0, 1.0, 1);
        let mut h = DMatrix::<f64>::zeros(l, l);
        for i in 0..l {
            h[(i, i)] = 2.0;
            h[(i, (i + 1) % l)] = -1.0;
            h[(i, (i + l - 1) % l)] = -1.0;
        }
        let eig = SymmetricEigen::new(h);
        let mut want = vec![Complex64::new(0.0, 0.0); l];
        for k in 0..l {
            let mut ip = Complex64::new(0.0, 0.0);
            for a in 0..l {
                ip += eig.eigenvectors[(a, k)] * phi[a];
            }
            let ph = Complex64::from_polar(1.0, -eig.eigenvalues[k]);
            for a in 0..l {
                want[a] += eig.eigenvectors[(a, k)] * ip * ph;
            }
        }
        let err = free
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "free lattice evolution error {err}");
    }

    #[test]
    fn random_states_have_sane_dm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = enumerate_basis(LatticeSpec::new(5).unwrap(), 3, 1000).unwrap();
        let mut amps: Vec<Complex64> = (0..b.dimension())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        let state = ManyBodyState { basis: b, amplitudes: amps };
        let dm = one_body_dm(&state);
        assert!((dm.trace() - 3.0).abs() < 1e-10);
        assert!(dm.hermiticity_error() < 1e-12);
        assert!(dm.min_eigenvalue() > -1e-10);
    }
}
