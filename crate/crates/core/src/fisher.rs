//! Classical Fisher information of measurement records with respect to `T`.
//!
//! Temperature enters both the initial Gibbs state and the bath rates, so
//! derivatives are taken by rebuilding the whole protocol at `T ± δT`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::dynamics::DynamicsRegistry;
use crate::error::{validation, Error, Result};
use crate::protocol::{
    mean_and_standard_error, multi_site_probabilities, Protocol, ProtocolConfig, SequenceSource, SequenceTable,
    SourceRegistry,
};
use crate::rng;
use crate::spin::{SpinChain, ThermalProbe};

/// Outcomes less likely than this carry no Fisher information.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Default number of Monte-Carlo trajectories.
pub const DEFAULT_MC_SAMPLES: usize = 1000;

/// Central two-point finite difference in temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeScheme {
    pub delta_t: f64,
}

impl DerivativeScheme {
    /// `δT = max(1e-4, T/10⁴)`, capped at `T/100`.
    pub fn default_for(temperature: f64) -> Self {
        DerivativeScheme {
            delta_t: (1e-4f64).max(temperature / 1e4).min(temperature / 100.0),
        }
    }

    pub fn new(delta_t: f64, temperature: f64) -> Result<Self> {
        if !(delta_t > 0.0) || delta_t > temperature / 100.0 {
            return validation(format!(
                "δT = {delta_t} must be positive and at most T/100 = {}",
                temperature / 100.0
            ));
        }
        Ok(DerivativeScheme { delta_t })
    }

    fn temperatures(&self, t: f64) -> [f64; 3] {
        [t - self.delta_t, t, t + self.delta_t]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherMethod {
    Exact,
    MonteCarlo,
}

impl FisherMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FisherMethod::Exact => "exact",
            FisherMethod::MonteCarlo => "monte-carlo",
        }
    }
}

/// `F^{(n)}` and `ΔF^{(n)}` for `n = 1..=n_seq` (stored at index `n − 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct FisherSeries {
    pub method: FisherMethod,
    pub values: Vec<f64>,
    pub increments: Vec<f64>,
    /// Monte-Carlo only.
    pub std_errors: Option<Vec<f64>>,
    pub increment_std_errors: Option<Vec<f64>>,
    pub samples: Option<usize>,
}

impl FisherSeries {
    fn exact(increments: Vec<f64>) -> Self {
        FisherSeries {
            method: FisherMethod::Exact,
            values: cumulative(&increments),
            increments,
            std_errors: None,
            increment_std_errors: None,
            samples: None,
        }
    }

    pub fn n_seq(&self) -> usize {
        self.values.len()
    }

    /// `F^{(n)}`, 1-based.
    pub fn at(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    /// Standard error of `F^{(n)}` (zero for the exact method).
    pub fn std_error_at(&self, n: usize) -> f64 {
        self.std_errors.as_ref().map_or(0.0, |s| s[n - 1])
    }
}

fn cumulative(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// `Σ_j (∂_T p_j)² / p_j` from distributions at `T − δT`, `T`, `T + δT`.
pub fn cfi_static(minus: &[f64], center: &[f64], plus: &[f64], scheme: &DerivativeScheme) -> Result<f64> {
    if minus.len() != center.len() || plus.len() != center.len() {
        return validation(format!(
            "outcome sets differ in size: {}, {}, {}",
            minus.len(),
            center.len(),
            plus.len()
        ));
    }
    Ok(center
        .iter()
        .zip(minus.iter().zip(plus))
        .filter(|(p, _)| **p >= PROBABILITY_FLOOR)
        .map(|(p, (m, q))| {
            let dp = (q - m) / (2.0 * scheme.delta_t);
            dp * dp / p
        })
        .sum())
}

/// Static CFI of measuring `σz` on sites `1..=N_m` of the Gibbs state.
pub fn multi_site_cfi(
    chain: &Arc<SpinChain>,
    temperature: f64,
    n_measured: usize,
    scheme: &DerivativeScheme,
) -> Result<f64> {
    let [a, b, c] = scheme.temperatures(temperature);
    let p =
        |t: f64| -> Result<Vec<f64>> { multi_site_probabilities(&ThermalProbe::new(chain.clone(), t)?, n_measured) };
    cfi_static(&p(a)?, &p(b)?, &p(c)?, scheme)
}

fn binary_fisher(p: f64, dp: f64) -> f64 {
    let mut f = 0.0;
    if p >= PROBABILITY_FLOOR {
        f += dp * dp / p;
    }
    if 1.0 - p >= PROBABILITY_FLOOR {
        f += dp * dp / (1.0 - p);
    }
    f
}

/// Increments `ΔF^{(k)}` from prefix tables at the three temperatures.
pub fn increments_from_tables(tables: &[SequenceTable; 3], scheme: &DerivativeScheme) -> Vec<f64> {
    let [minus, center, plus] = tables;
    let n = center.n_seq();
    (0..n)
        .map(|k| {
            (0..1usize << k)
                .map(|i| {
                    let weight = center.levels[k][i];
                    if weight <= 0.0 {
                        return 0.0;
                    }
                    match (
                        minus.conditional_up(k, i),
                        center.conditional_up(k, i),
                        plus.conditional_up(k, i),
                    ) {
                        (Some(m), Some(c), Some(p)) => weight * binary_fisher(c, (p - m) / (2.0 * scheme.delta_t)),
                        _ => 0.0,
                    }
                })
                .sum()
        })
        .collect()
}

fn tables_at(source: &dyn SequenceSource, t: f64, scheme: &DerivativeScheme) -> Result<[SequenceTable; 3]> {
    let [a, b, c] = scheme.temperatures(t);
    let (ta, (tb, tc)) = rayon::join(
        || source.table_at(a),
        || rayon::join(|| source.table_at(b), || source.table_at(c)),
    );
    Ok([ta?, tb?, tc?])
}

/// `ΔF^{(n+1)} = Σ_prefix P(prefix) f(prefix)` over the exact tree, where `f`
/// is the Fisher information of the next outcome given the prefix.
pub fn exact_sequential_cfi(
    source: &dyn SequenceSource,
    temperature: f64,
    scheme: &DerivativeScheme,
) -> Result<FisherSeries> {
    let tables = tables_at(source, temperature, scheme)?;
    Ok(FisherSeries::exact(increments_from_tables(&tables, scheme)))
}

/// Static CFI of the joint distribution of the first `n` outcomes, for each `n`.
pub fn joint_cfi(source: &dyn SequenceSource, temperature: f64, scheme: &DerivativeScheme) -> Result<Vec<f64>> {
    let [m, c, p] = tables_at(source, temperature, scheme)?;
    (1..=c.n_seq())
        .map(|k| cfi_static(&m.levels[k], &c.levels[k], &p.levels[k], scheme))
        .collect()
}

/// Samples `μ` trajectories at `T` and replays each outcome record at `T ± δT`.
pub fn mc_sequential_cfi(
    cfg: &ProtocolConfig,
    registry: &DynamicsRegistry,
    scheme: &DerivativeScheme,
    mu: usize,
    seed: u64,
) -> Result<FisherSeries> {
    if mu == 0 {
        return validation("Monte-Carlo sample count μ must be at least 1");
    }
    let chain = SpinChain::new(cfg.chain)?;
    let [a, b, c] = scheme.temperatures(cfg.temperature);
    let build = |t: f64| Protocol::with_chain(cfg.clone().with_temperature(t), chain.clone(), registry);
    let protocols = [build(a)?, build(b)?, build(c)?];
    let n = cfg.n_seq;

    let per_traj: Vec<Vec<f64>> = (0..mu)
        .into_par_iter()
        .map(|i| replay(&protocols, n, scheme, &mut rng::stream(seed, i as u64)))
        .collect();

    let mut inc = Vec::with_capacity(n);
    let mut inc_se = Vec::with_capacity(n);
    let mut val = Vec::with_capacity(n);
    let mut val_se = Vec::with_capacity(n);
    let mut running = vec![0.0; mu];
    for k in 0..n {
        let column: Vec<f64> = per_traj.iter().map(|f| f[k]).collect();
        for (r, x) in running.iter_mut().zip(&column) {
            *r += x;
        }
        let (m, s) = mean_and_standard_error(&column);
        inc.push(m);
        inc_se.push(s);
        let (m, s) = mean_and_standard_error(&running);
        val.push(m);
        val_se.push(s);
    }
    Ok(FisherSeries {
        method: FisherMethod::MonteCarlo,
        values: val,
        increments: inc,
        std_errors: Some(val_se),
        increment_std_errors: Some(inc_se),
        samples: Some(mu),
    })
}

fn replay<R: Rng>(protocols: &[Protocol; 3], n: usize, scheme: &DerivativeScheme, r: &mut R) -> Vec<f64> {
    let mut states: Vec<_> = protocols.iter().map(|p| p.initial_state().matrix().clone()).collect();
    let mut alive = [true; 3];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let branches: Vec<_> = protocols.iter().zip(&states).map(|(p, s)| p.step(s)).collect();
        let up: Vec<f64> = branches
            .iter()
            .map(|b| b[0].0 / (b[0].0 + b[1].0).max(f64::MIN_POSITIVE))
            .collect();
        let f = if alive.iter().all(|&a| a) {
            binary_fisher(up[1], (up[2] - up[0]) / (2.0 * scheme.delta_t))
        } else {
            0.0
        };
        out.push(f);
        let u: f64 = r.gen();
        let g = usize::from(u >= up[1]);
        for (j, b) in branches.into_iter().enumerate() {
            let (w, m) = &b[g];
            if *w > 0.0 {
                states[j] = m.map(|z| z / *w);
            } else {
                alive[j] = false;
            }
        }
    }
    out
}

/// Threshold sequence length at which `F^{(n)}` exceeds a reference QFI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NSeqStar {
    /// `None` when the threshold is not crossed within the series.
    pub n_star: Option<usize>,
    /// `F/Q` at `n*`, or at the longest sequence when not found.
    pub ratio: f64,
    pub achieved: f64,
}

/// Smallest `n` with `F^{(n)} > Q`; Monte-Carlo series must clear `Q` by three
/// standard errors.
pub fn find_nseq_star(series: &FisherSeries, q_reference: f64) -> Result<NSeqStar> {
    if !(q_reference > 0.0) {
        return validation(format!("reference QFI must be positive, got {q_reference}"));
    }
    for n in 1..=series.n_seq() {
        let lower = series.at(n) - 3.0 * series.std_error_at(n);
        if lower > q_reference {
            return Ok(NSeqStar {
                n_star: Some(n),
                ratio: series.at(n) / q_reference,
                achieved: series.at(n),
            });
        }
    }
    let last = *series.values.last().unwrap_or(&0.0);
    Ok(NSeqStar {
        n_star: None,
        ratio: last / q_reference,
        achieved: last,
    })
}

/// Inputs shared by every Fisher estimator.
pub struct FisherRequest<'a> {
    pub cfg: &'a ProtocolConfig,
    pub dynamics: &'a Arc<DynamicsRegistry>,
    pub scheme: DerivativeScheme,
    pub mu: usize,
    pub seed: u64,
}

pub trait FisherEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn estimate(&self, req: &FisherRequest) -> Result<FisherSeries>;
}

struct ExactEstimator;

impl FisherEstimator for ExactEstimator {
    fn name(&self) -> &'static str {
        "exact"
    }
    fn estimate(&self, req: &FisherRequest) -> Result<FisherSeries> {
        let source = SourceRegistry::with_builtin().build_default(req.cfg, req.dynamics)?;
        exact_sequential_cfi(source.as_ref(), req.cfg.temperature, &req.scheme)
    }
}

struct MonteCarloEstimator;

impl FisherEstimator for MonteCarloEstimator {
    fn name(&self) -> &'static str {
        "monte-carlo"
    }
    fn estimate(&self, req: &FisherRequest) -> Result<FisherSeries> {
        mc_sequential_cfi(req.cfg, req.dynamics, &req.scheme, req.mu, req.seed)
    }
}

/// Name → Fisher estimator.
pub struct EstimatorRegistry {
    estimators: BTreeMap<&'static str, Box<dyn FisherEstimator>>,
}

impl EstimatorRegistry {
    pub fn with_builtin() -> Self {
        let mut r = EstimatorRegistry {
            estimators: BTreeMap::new(),
        };
        r.register(Box::new(ExactEstimator));
        r.register(Box::new(MonteCarloEstimator));
        r
    }

    pub fn register(&mut self, e: Box<dyn FisherEstimator>) {
        self.estimators.insert(e.name(), e);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.estimators.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn FisherEstimator> {
        self.estimators.get(name).map(|e| e.as_ref()).ok_or_else(|| {
            Error::Validation(format!(
                "unknown Fisher estimator '{name}'; available: {}",
                self.names().join(", ")
            ))
        })
    }

    /// Exact when the tree fits, Monte-Carlo otherwise.
    pub fn auto(&self, n_seq: usize) -> &dyn FisherEstimator {
        let name = if n_seq <= crate::protocol::MAX_TREE_DEPTH {
            "exact"
        } else {
            "monte-carlo"
        };
        self.estimators[name].as_ref()
    }
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}
