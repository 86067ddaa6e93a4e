//! Exact outcome-sequence probabilities.
//!
//! A [`SequenceSource`] returns the probability of every outcome prefix up to
//! length `n_seq` at any temperature. Two strategies are provided:
//!
//! * `density-tree` enumerates the measurement tree with density matrices and
//!   works for any channel.
//! * `eigen-mixture` handles closed evolution only. The Gibbs state is a
//!   mixture of energy eigenstates, so `P_γ(T) = Σ_l w_l(T) q_γ(l)` where the
//!   pure-state probabilities `q_γ(l)` do not depend on `T`. They are computed
//!   once, inside the magnetization sectors, which is what makes `N = 8` feasible.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use super::{Protocol, ProtocolConfig, BRANCH_FLOOR, MAX_TREE_DEPTH};
use crate::dynamics::DynamicsRegistry;
use crate::error::{validation, Error, Result};
use crate::numerics::{basis_bit, operator_function, ComplexMatrix, C64};
use crate::rng;
use crate::spin::{boltzmann_weights, SpinChain};

/// Probabilities of all outcome prefixes.
///
/// `levels[k][i]` is the probability of the length-`k` prefix with index
/// `i = Σ_j γ_j 2^{k−j}`; its children are `2i` and `2i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceTable {
    pub levels: Vec<Vec<f64>>,
    /// Mass dropped below the branch floor.
    pub pruned_mass: f64,
}

impl SequenceTable {
    pub fn n_seq(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn leaves(&self) -> &[f64] {
        self.levels.last().unwrap()
    }

    /// `p(γ_{k+1} = 0 | prefix)`, or `None` for an unreachable prefix.
    pub fn conditional_up(&self, k: usize, prefix: usize) -> Option<f64> {
        let parent = self.levels[k][prefix];
        if parent <= 0.0 {
            return None;
        }
        let a = self.levels[k + 1][2 * prefix];
        let b = self.levels[k + 1][2 * prefix + 1];
        Some(a / (a + b).max(f64::MIN_POSITIVE))
    }
}

pub trait SequenceSource: Send + Sync {
    fn name(&self) -> &'static str;
    fn n_seq(&self) -> usize;
    fn table_at(&self, temperature: f64) -> Result<SequenceTable>;
}

type SourceBuilder = fn(&ProtocolConfig, &Arc<DynamicsRegistry>) -> Result<Arc<dyn SequenceSource>>;

/// Name → probability-source constructor.
pub struct SourceRegistry {
    entries: Vec<(&'static str, &'static str, SourceBuilder)>,
}

impl SourceRegistry {
    pub fn with_builtin() -> Self {
        SourceRegistry {
            entries: vec![
                ("density-tree", "density-matrix tree, any dynamics", |cfg, reg| {
                    Ok(Arc::new(DensityTreeSource::new(cfg.clone(), reg.clone())?))
                }),
                (
                    "eigen-mixture",
                    "eigenstate mixture, closed evolution only",
                    |cfg, _| Ok(Arc::new(EigenMixtureSource::new(cfg.clone())?)),
                ),
            ],
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.iter().map(|e| (e.0, e.1)).collect()
    }

    pub fn build(
        &self,
        name: &str,
        cfg: &ProtocolConfig,
        dynamics: &Arc<DynamicsRegistry>,
    ) -> Result<Arc<dyn SequenceSource>> {
        let entry = self.entries.iter().find(|e| e.0 == name).ok_or_else(|| {
            Error::Validation(format!(
                "unknown probability source '{name}'; available: {}",
                self.names().join(", ")
            ))
        })?;
        (entry.2)(cfg, dynamics)
    }

    /// `eigen-mixture` for closed evolution, `density-tree` otherwise.
    pub fn build_default(
        &self,
        cfg: &ProtocolConfig,
        dynamics: &Arc<DynamicsRegistry>,
    ) -> Result<Arc<dyn SequenceSource>> {
        let name = if cfg.dynamics == "unitary" {
            "eigen-mixture"
        } else {
            "density-tree"
        };
        self.build(name, cfg, dynamics)
    }
}

impl Default for SourceRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

fn check_depth(n: usize) -> Result<()> {
    if n > MAX_TREE_DEPTH {
        return Err(Error::ResourceGuard(format!(
            "exact tree limited to n_seq ≤ {MAX_TREE_DEPTH} (got {n}); n_seq > {MAX_TREE_DEPTH} requires monte-carlo"
        )));
    }
    Ok(())
}

fn empty_levels(n: usize) -> Vec<Vec<f64>> {
    (0..=n).map(|k| vec![0.0; 1 << k]).collect()
}

/// Exact tree over density matrices.
pub struct DensityTreeSource {
    cfg: ProtocolConfig,
    chain: Arc<SpinChain>,
    registry: Arc<DynamicsRegistry>,
}

impl DensityTreeSource {
    pub fn new(cfg: ProtocolConfig, registry: Arc<DynamicsRegistry>) -> Result<Self> {
        cfg.validate()?;
        check_depth(cfg.n_seq)?;
        registry.get(&cfg.dynamics)?;
        let chain = SpinChain::new(cfg.chain)?;
        Ok(DensityTreeSource { cfg, chain, registry })
    }

    pub fn protocol_at(&self, temperature: f64) -> Result<Protocol> {
        Protocol::with_chain(
            self.cfg.clone().with_temperature(temperature),
            self.chain.clone(),
            &self.registry,
        )
    }
}

impl SequenceSource for DensityTreeSource {
    fn name(&self) -> &'static str {
        "density-tree"
    }

    fn n_seq(&self) -> usize {
        self.cfg.n_seq
    }

    fn table_at(&self, temperature: f64) -> Result<SequenceTable> {
        tree_table(&self.protocol_at(temperature)?, self.cfg.n_seq)
    }
}

/// Depth at which the tree is split into independent subtrees.
const SPLIT_DEPTH: usize = 6;

/// Enumerates the tree with unnormalized states, whose traces are the prefix probabilities.
pub fn tree_table(pr: &Protocol, n: usize) -> Result<SequenceTable> {
    check_depth(n)?;
    let mut levels = empty_levels(n);
    levels[0][0] = 1.0;
    let mut pruned = 0.0;

    let split = n.min(SPLIT_DEPTH);
    let mut frontier: Vec<(usize, ComplexMatrix)> = vec![(0, pr.initial_state().matrix().clone())];
    for k in 0..split {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for (idx, rho) in frontier {
            let parent = levels[k][idx];
            for (g, (w, m)) in pr.step(&rho).into_iter().enumerate() {
                if w < BRANCH_FLOOR * parent {
                    pruned += w.max(0.0);
                    continue;
                }
                levels[k + 1][2 * idx + g] = w;
                next.push((2 * idx + g, m));
            }
        }
        frontier = next;
    }

    let below = n - split;
    let subtrees: Vec<(usize, Vec<Vec<f64>>, f64)> = frontier
        .into_par_iter()
        .map(|(idx, rho)| {
            let mut local = empty_levels(below);
            local[0][0] = crate::numerics::trace(&rho).re;
            let mut dropped = 0.0;
            descend(pr, &rho, 0, 0, below, &mut local, &mut dropped);
            (idx, local, dropped)
        })
        .collect();

    for (idx, local, dropped) in subtrees {
        pruned += dropped;
        for (j, row) in local.into_iter().enumerate().skip(1) {
            let offset = idx << j;
            levels[split + j][offset..offset + row.len()].copy_from_slice(&row);
        }
    }
    Ok(SequenceTable {
        levels,
        pruned_mass: pruned,
    })
}

fn descend(
    pr: &Protocol,
    rho: &ComplexMatrix,
    depth: usize,
    idx: usize,
    n: usize,
    levels: &mut [Vec<f64>],
    pruned: &mut f64,
) {
    if depth == n {
        return;
    }
    let parent = levels[depth][idx];
    for (g, (w, m)) in pr.step(rho).into_iter().enumerate() {
        if w < BRANCH_FLOOR * parent {
            *pruned += w.max(0.0);
            continue;
        }
        let child = 2 * idx + g;
        levels[depth + 1][child] = w;
        descend(pr, &m, depth + 1, child, n, levels, pruned);
    }
}

/// Largest `q`-table, in entries, the eigen-mixture source will allocate.
pub const MAX_MIXTURE_ENTRIES: usize = 1 << 25;

/// Closed-evolution probabilities as a temperature-weighted eigenstate mixture.
pub struct EigenMixtureSource {
    cfg: ProtocolConfig,
    chain: Arc<SpinChain>,
    /// `q[k][i * d + l]`: probability of prefix `i` of length `k` starting from eigenstate `l`.
    q: Vec<Vec<f64>>,
}

impl EigenMixtureSource {
    pub fn new(cfg: ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.dynamics != "unitary" {
            return validation(format!(
                "eigen-mixture needs closed evolution, but dynamics is '{}'",
                cfg.dynamics
            ));
        }
        check_depth(cfg.n_seq)?;
        let chain = SpinChain::new(cfg.chain)?;
        let d = chain.dim();
        let entries = (2usize << cfg.n_seq) * d;
        if entries > MAX_MIXTURE_ENTRIES {
            return Err(Error::ResourceGuard(format!(
                "eigen-mixture table would hold {entries} entries (limit {MAX_MIXTURE_ENTRIES}); reduce n_seq or N"
            )));
        }
        let q = mixture_table(&chain, &cfg)?;
        Ok(EigenMixtureSource { cfg, chain, q })
    }

    /// Prefix probabilities starting from eigenstate `l`.
    pub fn eigenstate_level(&self, k: usize, l: usize) -> Vec<f64> {
        let d = self.chain.dim();
        (0..1usize << k).map(|i| self.q[k][i * d + l]).collect()
    }
}

struct Sector {
    indices: Vec<usize>,
    unitary: ComplexMatrix,
    /// Whether each sector state has outcome 0 at the measured site.
    up: Vec<bool>,
}

fn mixture_table(chain: &SpinChain, cfg: &ProtocolConfig) -> Result<Vec<Vec<f64>>> {
    let n_sites = chain.n_sites();
    let d = chain.dim();
    let n = cfg.n_seq;
    let s = chain.spectrum();
    let u = operator_function(s, |e| C64::from_polar(1.0, -e * cfg.tau))?;

    let sectors: Vec<Sector> = (0..=n_sites)
        .map(|ups| {
            let indices: Vec<usize> = (0..d).filter(|b| b.count_ones() as usize == ups).collect();
            let unitary = ComplexMatrix::from_fn(indices.len(), indices.len(), |r, c| u[(indices[r], indices[c])]);
            let up = indices
                .iter()
                .map(|&i| basis_bit(i, cfg.measured_site, n_sites) == 0)
                .collect();
            Sector { indices, unitary, up }
        })
        .collect();

    let per_state: Vec<Vec<Vec<f64>>> = (0..d)
        .into_par_iter()
        .map(|l| {
            let col = s.eigenvectors.column(l);
            let lead = (0..d).max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm())).unwrap();
            let sector = &sectors[lead.count_ones() as usize];
            let psi: Vec<C64> = sector.indices.iter().map(|&i| col[i]).collect();
            let mut levels = empty_levels(n);
            levels[0][0] = psi.iter().map(|z| z.norm_sqr()).sum();
            pure_descend(sector, &psi, 0, 0, n, &mut levels);
            levels
        })
        .collect();

    let mut q: Vec<Vec<f64>> = (0..=n).map(|k| vec![0.0; (1 << k) * d]).collect();
    for (l, levels) in per_state.into_iter().enumerate() {
        for (k, row) in levels.into_iter().enumerate() {
            for (i, p) in row.into_iter().enumerate() {
                q[k][i * d + l] = p;
            }
        }
    }
    Ok(q)
}

fn pure_descend(sector: &Sector, psi: &[C64], depth: usize, idx: usize, n: usize, levels: &mut [Vec<f64>]) {
    if depth == n {
        return;
    }
    let m = psi.len();
    let mut evolved = vec![C64::new(0.0, 0.0); m];
    for (c, &v) in psi.iter().enumerate() {
        if v.re == 0.0 && v.im == 0.0 {
            continue;
        }
        for (r, e) in evolved.iter_mut().enumerate() {
            *e += sector.unitary[(r, c)] * v;
        }
    }
    let parent = levels[depth][idx];
    for g in 0..2 {
        let want_up = g == 0;
        let branch: Vec<C64> = evolved
            .iter()
            .zip(&sector.up)
            .map(|(&z, &up)| if up == want_up { z } else { C64::new(0.0, 0.0) })
            .collect();
        let w: f64 = branch.iter().map(|z| z.norm_sqr()).sum();
        if w < BRANCH_FLOOR * parent {
            continue;
        }
        let child = 2 * idx + g;
        levels[depth + 1][child] = w;
        pure_descend(sector, &branch, depth + 1, child, n, levels);
    }
}

impl SequenceSource for EigenMixtureSource {
    fn name(&self) -> &'static str {
        "eigen-mixture"
    }

    fn n_seq(&self) -> usize {
        self.cfg.n_seq
    }

    fn table_at(&self, temperature: f64) -> Result<SequenceTable> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return validation(format!("temperature must be positive, got {temperature}"));
        }
        let d = self.chain.dim();
        let (w, _) = boltzmann_weights(&self.chain.spectrum().eigenvalues, temperature);
        let levels: Vec<Vec<f64>> = self
            .q
            .iter()
            .map(|row| {
                row.chunks(d)
                    .map(|qs| qs.iter().zip(&w).map(|(q, w)| q * w).sum())
                    .collect()
            })
            .collect();
        let total: f64 = levels.last().unwrap().iter().sum();
        Ok(SequenceTable {
            levels,
            pruned_mass: (1.0 - total).max(0.0),
        })
    }
}

/// Draws `count` full sequences from a table, sequence `i` from stream `(seed, i)`.
/// Returns leaf indices.
pub fn sample_sequences(table: &SequenceTable, count: usize, seed: u64) -> Vec<usize> {
    let n = table.n_seq();
    (0..count)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let mut idx = 0usize;
            for k in 0..n {
                let a = table.levels[k + 1][2 * idx];
                let b = table.levels[k + 1][2 * idx + 1];
                let u: f64 = r.gen();
                idx = 2 * idx + usize::from(u * (a + b) >= a);
            }
            idx
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Protocol;
    use crate::spin::ChainParams;

    fn cfg(n: usize, t: f64, kappa: f64, tau: f64, n_seq: usize) -> ProtocolConfig {
        ProtocolConfig::new(ChainParams::new(n, 1.0).unwrap(), t, kappa, tau, n_seq).unwrap()
    }

    fn registry() -> Arc<DynamicsRegistry> {
        Arc::new(DynamicsRegistry::with_builtin())
    }

    #[test]
    fn tree_normalization_and_marginals() {
        for n_seq in 1..=8 {
            let src = DensityTreeSource::new(cfg(3, 0.5, 1.0, 3.0, n_seq), registry()).unwrap();
            let t = src.table_at(0.5).unwrap();
            for k in 0..=n_seq {
                assert!((t.level(k).iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
            assert!(t.pruned_mass < 1e-10);
            if n_seq >= 1 {
                assert!((t.level(1)[0] - 0.5).abs() < 1e-12);
            }
            for k in 0..n_seq {
                for i in 0..1 << k {
                    let s = t.level(k + 1)[2 * i] + t.level(k + 1)[2 * i + 1];
                    assert!((s - t.level(k)[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tree_matches_explicit_enumeration() {
        let c = cfg(3, 0.4, 0.8, 2.0, 7);
        let src = DensityTreeSource::new(c.clone(), registry()).unwrap();
        let table = src.table_at(0.4).unwrap();
        let pr = Protocol::new(c, &DynamicsRegistry::with_builtin()).unwrap();
        for tr in pr.enumerate_trajectories().unwrap() {
            assert!((table.leaves()[tr.index()] - tr.probability).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_matches_density_tree() {
        for n in [2, 3, 4] {
            let c = cfg(n, 0.3, 0.0, n as f64, 6);
            let mix = EigenMixtureSource::new(c.clone()).unwrap();
            let tree = DensityTreeSource::new(c, registry()).unwrap();
            for t in [0.1, 0.3, 1.2] {
                let a = mix.table_at(t).unwrap();
                let b = tree.table_at(t).unwrap();
                for k in 0..=6 {
                    for (x, y) in a.level(k).iter().zip(b.level(k)) {
                        assert!((x - y).abs() < 1e-11, "N={n} T={t} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn mixture_requires_closed_evolution() {
        assert!(EigenMixtureSource::new(cfg(3, 0.3, 1.0, 3.0, 4)).is_err());
    }

    #[test]
    fn registry_dispatch() {
        let reg = SourceRegistry::with_builtin();
        assert_eq!(reg.names(), vec!["density-tree", "eigen-mixture"]);
        let s = reg.build_default(&cfg(2, 0.3, 0.0, 2.0, 3), &registry()).unwrap();
        assert_eq!(s.name(), "eigen-mixture");
        let s = reg.build_default(&cfg(2, 0.3, 1.0, 2.0, 3), &registry()).unwrap();
        assert_eq!(s.name(), "density-tree");
        assert!(reg.build("x", &cfg(2, 0.3, 1.0, 2.0, 3), &registry()).is_err());
    }

    #[test]
    fn depth_guard() {
        let err = DensityTreeSource::new(cfg(2, 0.3, 1.0, 2.0, 21), registry())
            .err()
            .unwrap();
        assert!(matches!(err, Error::ResourceGuard(ref m) if m.contains("monte-carlo")));
    }

    #[test]
    fn sampled_sequences_follow_table() {
        let src = DensityTreeSource::new(cfg(3, 0.5, 1.0, 3.0, 3), registry()).unwrap();
        let t = src.table_at(0.5).unwrap();
        let m = 20_000;
        let draws = sample_sequences(&t, m, 11);
        assert_eq!(draws, sample_sequences(&t, m, 11));
        let mut counts = [0usize; 8];
        for i in draws {
            counts[i] += 1;
        }
        for (c, p) in counts.iter().zip(t.leaves()) {
            let sd = (m as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - m as f64 * p).abs() < 4.0 * sd + 1.0);
        }
    }
}
