//! Ferromagnetic Heisenberg chain `H = -J Σ_j σ^j · σ^{j+1}` with open
//! boundaries, its Gibbs states and the equilibrium thermometry bounds.

use std::sync::Arc;

use crate::error::{validation, Error, Result};
use crate::numerics::{eig_hermitian, operator_function, ComplexMatrix, DensityMatrix, Spectrum, C64, ZERO};

/// Largest register the dense code paths will allocate.
pub const MAX_SITES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    pub n_sites: usize,
    pub coupling: f64,
}

impl ChainParams {
    pub fn new(n_sites: usize, coupling: f64) -> Result<Self> {
        let p = ChainParams { n_sites, coupling };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return validation(format!("chain needs at least 2 sites, got {}", self.n_sites));
        }
        if self.n_sites > MAX_SITES {
            return Err(Error::ResourceGuard(format!(
                "N = {} exceeds the dense-register limit N ≤ {MAX_SITES}",
                self.n_sites
            )));
        }
        if !(self.coupling > 0.0) || !self.coupling.is_finite() {
            return validation(format!("coupling J must be positive, got {}", self.coupling));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }
}

/// Builds `H` directly from `σ^i·σ^{i+1} = 2·SWAP − 1`.
pub fn build_hamiltonian(p: &ChainParams) -> Result<ComplexMatrix> {
    p.validate()?;
    let n = p.n_sites;
    let dim = p.dim();
    let j = p.coupling;
    let mut h = ComplexMatrix::from_element(dim, dim, ZERO);
    for b in 0..dim {
        for i in 0..n - 1 {
            let hi = n - 1 - i;
            let lo = hi - 1;
            let bi = (b >> hi) & 1;
            let bj = (b >> lo) & 1;
            if bi == bj {
                h[(b, b)] -= C64::new(j, 0.0);
            } else {
                h[(b, b)] += C64::new(j, 0.0);
                let swapped = b ^ (1 << hi) ^ (1 << lo);
                h[(swapped, b)] -= C64::new(2.0 * j, 0.0);
            }
        }
    }
    Ok(h)
}

/// Hamiltonian and spectrum of a chain, shared read-only by everything downstream.
///
/// The eigenbasis is built sector by sector in total magnetization, so every
/// eigenvector has a definite `Σ σ_z`. This fixes the basis inside degenerate
/// SU(2) multiplets, which the per-eigenpair dissipator depends on.
#[derive(Debug)]
pub struct SpinChain {
    params: ChainParams,
    hamiltonian: ComplexMatrix,
    spectrum: Spectrum,
}

impl SpinChain {
    pub fn new(params: ChainParams) -> Result<Arc<Self>> {
        let hamiltonian = build_hamiltonian(&params)?;
        let spectrum = magnetization_resolved_spectrum(&hamiltonian, params.n_sites)?;
        Ok(Arc::new(SpinChain {
            params,
            hamiltonian,
            spectrum,
        }))
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn n_sites(&self) -> usize {
        self.params.n_sites
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn ground_energy(&self) -> f64 {
        self.spectrum.min()
    }
}

fn magnetization_resolved_spectrum(h: &ComplexMatrix, n: usize) -> Result<Spectrum> {
    let dim = 1usize << n;
    let mut values = Vec::with_capacity(dim);
    let mut vectors = ComplexMatrix::from_element(dim, dim, ZERO);
    let mut col = 0;
    for ups in 0..=n {
        let idx: Vec<usize> = (0..dim).filter(|b| b.count_ones() as usize == ups).collect();
        let block = ComplexMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])]);
        let s = eig_hermitian(&block)?;
        for (k, &e) in s.eigenvalues.iter().enumerate() {
            values.push(e);
            for (r, &i) in idx.iter().enumerate() {
                vectors[(i, col)] = s.eigenvectors[(r, k)];
            }
            col += 1;
        }
    }
    Ok(Spectrum::from_parts(values, vectors))
}

/// Boltzmann weights `e^{-ε/T}/Z` computed with the ground energy shifted out,
/// together with `ln Z`.
pub fn boltzmann_weights(energies: &[f64], temperature: f64) -> (Vec<f64>, f64) {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = energies.iter().map(|&e| (-(e - e0) / temperature).exp()).collect();
    let z: f64 = raw.iter().sum();
    let log_z = z.ln() - e0 / temperature;
    (raw.into_iter().map(|w| w / z).collect(), log_z)
}

/// Thermal mean and variance of the energy from the spectrum alone.
pub fn thermal_energy_moments(energies: &[f64], temperature: f64) -> (f64, f64) {
    let (w, _) = boltzmann_weights(energies, temperature);
    let mean: f64 = w.iter().zip(energies).map(|(p, e)| p * e).sum();
    let var: f64 = w.iter().zip(energies).map(|(p, e)| p * (e - mean) * (e - mean)).sum();
    (mean, var.max(0.0))
}

/// Thermal QFI `(ΔH)²/T⁴` from the spectrum alone.
pub fn thermal_qfi(energies: &[f64], temperature: f64) -> f64 {
    let (_, var) = thermal_energy_moments(energies, temperature);
    var / temperature.powi(4)
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return validation(format!("temperature must be positive and finite, got {t}"));
    }
    Ok(())
}

/// Gibbs state of a chain at temperature `T`.
#[derive(Debug, Clone)]
pub struct ThermalProbe {
    chain: Arc<SpinChain>,
    temperature: f64,
    /// Boltzmann weights, indexed like the chain's eigenvalues.
    weights: Vec<f64>,
    log_partition: f64,
    gibbs: DensityMatrix,
}

impl ThermalProbe {
    pub fn new(chain: Arc<SpinChain>, temperature: f64) -> Result<Self> {
        check_temperature(temperature)?;
        let spectrum = chain.spectrum();
        let (weights, log_partition) = boltzmann_weights(&spectrum.eigenvalues, temperature);
        let e0 = spectrum.min();
        let unnormalized = operator_function(spectrum, |e| C64::new((-(e - e0) / temperature).exp(), 0.0))?;
        let gibbs = DensityMatrix::normalized(unnormalized)?;
        Ok(ThermalProbe {
            chain,
            temperature,
            weights,
            log_partition,
            gibbs,
        })
    }

    pub fn chain(&self) -> &Arc<SpinChain> {
        &self.chain
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn gibbs(&self) -> &DensityMatrix {
        &self.gibbs
    }

    /// Boltzmann weight of each eigenstate.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_partition_function(&self) -> f64 {
        self.log_partition
    }

    /// `Z(T)`; overflows to infinity for very negative ground energies at tiny `T`.
    pub fn partition_function(&self) -> f64 {
        self.log_partition.exp()
    }

    /// `(⟨H⟩, (ΔH)²)`.
    pub fn energy_moments(&self) -> (f64, f64) {
        thermal_energy_moments(&self.chain.spectrum().eigenvalues, self.temperature)
    }

    pub fn qfi(&self) -> f64 {
        let (_, var) = self.energy_moments();
        var / self.temperature.powi(4)
    }

    /// `C_T = (ΔH)²/T²`.
    pub fn heat_capacity(&self) -> f64 {
        let (_, var) = self.energy_moments();
        var / (self.temperature * self.temperature)
    }
}

pub fn gibbs_state(params: &ChainParams, temperature: f64) -> Result<ThermalProbe> {
    check_temperature(temperature)?;
    ThermalProbe::new(SpinChain::new(*params)?, temperature)
}

/// Uniform temperature grid, both endpoints included.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Default scan for the QFI peak: `[0.01 J, 2 J]`, 400 points.
pub fn default_t_star_grid(coupling: f64) -> Vec<f64> {
    linear_grid(0.01 * coupling, 2.0 * coupling, 400)
}

/// Grid argmax of the thermal QFI; ties go to the smaller temperature.
pub fn find_t_star(chain: &SpinChain, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return validation("find_t_star: empty temperature grid");
    }
    for &t in grid {
        check_temperature(t)?;
    }
    let energies = &chain.spectrum().eigenvalues;
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    for &t in grid {
        let q = thermal_qfi(energies, t);
        if q > best.0 || (q == best.0 && t < best.1) {
            best = (q, t);
        }
    }
    Ok(best.1)
}

/// Grid scan on the default grid followed by a golden-section refinement
/// inside the bracketing grid cells.
pub fn t_star(chain: &SpinChain) -> Result<f64> {
    let grid = default_t_star_grid(chain.params().coupling);
    let coarse = find_t_star(chain, &grid)?;
    let i = grid.iter().position(|&t| t == coarse).unwrap();
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let energies = &chain.spectrum().eigenvalues;
    let f = |t: f64| thermal_qfi(energies, t);
    let (mut a, mut b) = (lo, hi);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let refined = 0.5 * (a + b);
    Ok(if f(refined) >= f(coarse) { refined } else { coarse })
}

/// Closed-form thermal averages for the two- and three-site chains.
pub mod closed_form {
    /// `⟨H⟩` for `N = 2`.
    pub fn mean_energy_two_sites(j: f64, t: f64) -> f64 {
        4.0 * j / (3.0 * (4.0 * j / t).exp() + 1.0) - j
    }

    /// `⟨H⟩` for `N = 3`.
    pub fn mean_energy_three_sites(j: f64, t: f64) -> f64 {
        let e4 = (4.0 * j / t).exp();
        let e6 = (6.0 * j / t).exp();
        4.0 * j * (1.0 - e6) / (e4 + 2.0 * e6 + 1.0)
    }

    /// Thermal QFI for `N = 2`.
    pub fn qfi_two_sites(j: f64, t: f64) -> f64 {
        let x = 2.0 * j / t;
        let s = x.sinh() + 2.0 * x.cosh();
        12.0 * j * j / t.powi(4) / (s * s)
    }

    /// Thermal QFI for `N = 3`.
    pub fn qfi_three_sites(j: f64, t: f64) -> f64 {
        let e2 = (2.0 * j / t).exp();
        let e4 = (4.0 * j / t).exp();
        let e6 = (6.0 * j / t).exp();
        let den = e4 + 2.0 * e6 + 1.0;
        8.0 * j * j * e4 * (9.0 * e2 + e6 + 2.0) / (t.powi(4) * den * den)
    }
}
