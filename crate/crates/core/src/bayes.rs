//! Gridded Bayesian temperature estimation from counted outcome sequences.
//!
//! The likelihood of `M` recorded sequences is multinomial; its coefficient
//! does not depend on `T` and is dropped. The prior is uniform on the grid.

use std::collections::BTreeMap;

use crate::error::{validation, Error, Result};
use crate::protocol::SequenceTable;
use crate::spin::linear_grid;

/// Default temperature grid: `[0.01 J, 2 J]`, 400 points.
pub fn default_grid() -> Vec<f64> {
    linear_grid(0.01, 2.0, 400)
}

/// How often each length-`n_seq` outcome sequence occurred, keyed by leaf index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryCounts {
    n_seq: usize,
    counts: BTreeMap<usize, u64>,
}

impl TrajectoryCounts {
    pub fn new(n_seq: usize, counts: BTreeMap<usize, u64>) -> Result<Self> {
        if let Some((&k, _)) = counts.iter().find(|(&k, _)| k >> n_seq != 0) {
            return validation(format!("sequence index {k} does not fit in {n_seq} outcomes"));
        }
        let c = TrajectoryCounts { n_seq, counts };
        if c.total() == 0 {
            return validation("M must be positive");
        }
        Ok(c)
    }

    pub fn from_indices(n_seq: usize, indices: &[usize]) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for &i in indices {
            *counts.entry(i).or_insert(0) += 1;
        }
        Self::new(n_seq, counts)
    }

    pub fn n_seq(&self) -> usize {
        self.n_seq
    }

    pub fn counts(&self) -> &BTreeMap<usize, u64> {
        &self.counts
    }

    /// `M`.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Counts of the first `k` outcomes of every sequence.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n_seq {
            return validation(format!("prefix length {k} outside 1..={}", self.n_seq));
        }
        let mut counts = BTreeMap::new();
        for (&i, &c) in &self.counts {
            *counts.entry(i >> (self.n_seq - k)).or_insert(0) += c;
        }
        Self::new(k, counts)
    }
}

/// `Σ_i k_i ln p_i`; `−∞` when an observed sequence has zero probability.
pub fn log_likelihood(counts: &TrajectoryCounts, probabilities: &[f64]) -> Result<f64> {
    if probabilities.len() != 1 << counts.n_seq {
        return validation(format!(
            "model has {} sequences but the counts are for n_seq = {}",
            probabilities.len(),
            counts.n_seq
        ));
    }
    let mut ll = 0.0;
    for (&i, &k) in &counts.counts {
        if k == 0 {
            continue;
        }
        let p = probabilities[i];
        if p <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ll += k as f64 * p.ln();
    }
    Ok(ll)
}

/// Normalized posterior density on an ascending temperature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub temperatures: Vec<f64>,
    pub density: Vec<f64>,
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Posterior from log-likelihood values on the grid, with a uniform prior.
pub fn posterior_from_log_likelihood(grid: &[f64], log_likelihood: &[f64]) -> Result<PosteriorGrid> {
    if grid.len() < 2 || grid.len() != log_likelihood.len() {
        return validation(format!(
            "posterior needs at least two grid points and one log-likelihood per point (got {} and {})",
            grid.len(),
            log_likelihood.len()
        ));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return validation("temperature grid must be strictly ascending");
    }
    let max = log_likelihood.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegeneratePosterior(
            "likelihood vanishes at every grid temperature".into(),
        ));
    }
    let unnorm: Vec<f64> = log_likelihood.iter().map(|&l| (l - max).exp()).collect();
    let z = trapezoid(grid, &unnorm);
    if !(z > 0.0) {
        return Err(Error::DegeneratePosterior(
            "posterior mass is zero under trapezoidal integration".into(),
        ));
    }
    Ok(PosteriorGrid {
        temperatures: grid.to_vec(),
        density: unnorm.into_iter().map(|p| p / z).collect(),
    })
}

/// Posterior from one prefix table per grid temperature.
pub fn posterior(counts: &TrajectoryCounts, grid: &[f64], tables: &[SequenceTable]) -> Result<PosteriorGrid> {
    if tables.len() != grid.len() {
        return validation(format!("{} tables for {} grid points", tables.len(), grid.len()));
    }
    let ll = tables
        .iter()
        .map(|t| {
            if counts.n_seq > t.n_seq() {
                return validation(format!(
                    "counts for n_seq = {} but the model tree has depth {}",
                    counts.n_seq,
                    t.n_seq()
                ));
            }
            log_likelihood(counts, t.level(counts.n_seq))
        })
        .collect::<Result<Vec<f64>>>()?;
    posterior_from_log_likelihood(grid, &ll)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
    pub mode: f64,
    /// Posterior standard deviation is below three grid steps.
    pub resolution_limited: bool,
}

pub fn posterior_moments(pg: &PosteriorGrid) -> PosteriorSummary {
    let t = &pg.temperatures;
    let p = &pg.density;
    let mean = trapezoid(t, &t.iter().zip(p).map(|(x, y)| x * y).collect::<Vec<_>>());
    let variance = trapezoid(
        t,
        &t.iter()
            .zip(p)
            .map(|(x, y)| (x - mean) * (x - mean) * y)
            .collect::<Vec<_>>(),
    )
    .max(0.0);
    let mode = t[p
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)];
    let step = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    PosteriorSummary {
        mean,
        variance,
        mode,
        resolution_limited: variance.sqrt() < 3.0 * step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn likelihood_examples() {
        let c = TrajectoryCounts::from_indices(1, &[0]).unwrap();
        assert_eq!(log_likelihood(&c, &[1.0, 0.0]).unwrap(), 0.0);
        let c = TrajectoryCounts::from_indices(1, &[0, 1]).unwrap();
        assert!((log_likelihood(&c, &[0.5, 0.5]).unwrap() - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        let c = TrajectoryCounts::from_indices(1, &[1]).unwrap();
        assert_eq!(log_likelihood(&c, &[1.0, 0.0]).unwrap(), f64::NEG_INFINITY);
        assert!(log_likelihood(&c, &[0.25; 4]).is_err());
    }

    #[test]
    fn count_validation() {
        assert!(TrajectoryCounts::from_indices(2, &[]).is_err());
        assert!(TrajectoryCounts::from_indices(2, &[4]).is_err());
        let c = TrajectoryCounts::from_indices(3, &[0b101, 0b100, 0b011]).unwrap();
        let t = c.truncated(2).unwrap();
        assert_eq!(t.counts().get(&0b10), Some(&2));
        assert_eq!(t.counts().get(&0b01), Some(&1));
        assert_eq!(t.total(), 3);
    }

    #[test]
    fn flat_likelihood_returns_prior() {
        let g = default_grid();
        let p = posterior_from_log_likelihood(&g, &vec![-3.0; g.len()]).unwrap();
        let prior = 1.0 / (g[g.len() - 1] - g[0]);
        assert!(p.density.iter().all(|&d| (d - prior).abs() < 1e-12));
    }

    #[test]
    fn degenerate_posterior() {
        let g = default_grid();
        let r = posterior_from_log_likelihood(&g, &vec![f64::NEG_INFINITY; g.len()]);
        assert!(matches!(r, Err(Error::DegeneratePosterior(_))));
    }

    #[test]
    fn symmetric_posterior_mean() {
        let g = linear_grid(0.0, 2.0, 201);
        let ll: Vec<f64> = g.iter().map(|t| -(t - 1.0) * (t - 1.0) / 0.02).collect();
        let s = posterior_moments(&posterior_from_log_likelihood(&g, &ll).unwrap());
        assert!((s.mean - 1.0).abs() < 1e-10);
        assert!((s.mode - 1.0).abs() < 1e-12);
        assert!((s.variance - 0.01).abs() < 1e-4);
        assert!(!s.resolution_limited);
    }

    #[test]
    fn delta_posterior_is_resolution_limited() {
        let g = default_grid();
        let mut ll = vec![f64::NEG_INFINITY; g.len()];
        ll[200] = 0.0;
        let s = posterior_moments(&posterior_from_log_likelihood(&g, &ll).unwrap());
        assert!(s.resolution_limited);
        let step = g[1] - g[0];
        assert!(s.variance.sqrt() < step);
    }

    proptest! {
        #[test]
        fn posterior_is_normalized(ll in proptest::collection::vec(-50.0f64..0.0, 400)) {
            let g = default_grid();
            let p = posterior_from_log_likelihood(&g, &ll).unwrap();
            prop_assert!((trapezoid(&g, &p.density) - 1.0).abs() < 1e-8);
            prop_assert!(p.density.iter().all(|&d| d >= 0.0));
            prop_assert!(posterior_moments(&p).variance >= 0.0);
        }
    }
}
