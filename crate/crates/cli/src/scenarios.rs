//! Experiment scenarios, each producing one or more [`ResultTable`]s.
//!
//! Scenarios implement [`Scenario`] and are looked up by name in
//! [`ScenarioRegistry`].

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use seqtherm::bayes::{posterior, posterior_moments, TrajectoryCounts};
use seqtherm::dynamics::{fidelity_curve, thermalization_time_t95, DynamicsRegistry, JumpGrouping, LindbladModel};
use seqtherm::fisher::{
    exact_sequential_cfi, find_nseq_star, mc_sequential_cfi, multi_site_cfi, DerivativeScheme, FisherSeries,
};
use seqtherm::numerics::{random_density_matrix, DensityMatrix};
use seqtherm::protocol::{
    default_dynamics, sample_sequences, Protocol, ProtocolConfig, SequenceSource, SourceRegistry, MAX_TREE_DEPTH,
};
use seqtherm::rng;
use seqtherm::spin::{linear_grid, t_star, ChainParams, SpinChain, ThermalProbe};

use crate::config::ExperimentConfig;
use crate::error::{config_err, CliError, Result};
use crate::table::ResultTable;

pub const DEFAULT_T_MAX: f64 = 300.0;
pub const DEFAULT_DT: f64 = 0.5;
pub const DEFAULT_MU: usize = 1000;

pub trait Scenario: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    /// Scenario-specific field checks, run before any computation.
    fn check(&self, cfg: &ExperimentConfig) -> Result<()>;
    fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ResultTable>>;
}

pub struct ScenarioRegistry {
    scenarios: BTreeMap<&'static str, Box<dyn Scenario>>,
}

impl ScenarioRegistry {
    pub fn with_builtin() -> Self {
        let mut r = ScenarioRegistry {
            scenarios: BTreeMap::new(),
        };
        r.register(Box::new(Thermalize));
        r.register(Box::new(T95Map));
        r.register(Box::new(StaticFi));
        r.register(Box::new(QfiScan));
        r.register(Box::new(WeakRegime));
        r.register(Box::new(IntermediateRegime));
        r.register(Box::new(KappaSweep));
        r.register(Box::new(NSeqStarScan));
        r.register(Box::new(Bayes));
        r
    }

    pub fn register(&mut self, s: Box<dyn Scenario>) {
        self.scenarios.insert(s.name(), s);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.scenarios.keys().copied().collect()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.scenarios.values().map(|s| (s.name(), s.description())).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Scenario> {
        self.scenarios.get(name).map(|s| s.as_ref()).ok_or_else(|| {
            CliError::Config(format!(
                "field `scenario`: unknown scenario '{name}'; valid: {}",
                self.names().join(", ")
            ))
        })
    }

    /// Validates and runs `cfg`.
    pub fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ResultTable>> {
        cfg.check_common()?;
        let s = self.get(&cfg.scenario)?;
        s.check(cfg)?;
        s.run(cfg)
    }
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

fn chain(cfg: &ExperimentConfig, n: usize) -> Result<Arc<SpinChain>> {
    Ok(SpinChain::new(ChainParams::new(n, cfg.coupling)?)?)
}

/// Configured temperatures, plus `T*` when requested.
fn temperatures(cfg: &ExperimentConfig, c: &SpinChain) -> Result<Vec<f64>> {
    let mut ts = cfg.temperatures.clone();
    if cfg.include_t_star {
        ts.push(t_star(c)?);
    }
    Ok(ts)
}

fn dynamics_name(cfg: &ExperimentConfig, kappa: f64) -> String {
    cfg.dynamics
        .clone()
        .unwrap_or_else(|| default_dynamics(kappa).to_string())
}

fn grouping(cfg: &ExperimentConfig) -> Result<JumpGrouping> {
    match cfg.dynamics.as_deref().unwrap_or("lindblad") {
        "lindblad" | "lindblad-dense" => Ok(JumpGrouping::PerPair),
        "lindblad-grouped" => Ok(JumpGrouping::ByFrequency),
        other => config_err(format!(
            "field `dynamics`: '{other}' has no thermalization map; use lindblad or lindblad-grouped"
        )),
    }
}

/// Independent sub-seed `k` of the master seed.
fn sub_seed(master: u64, k: u64) -> u64 {
    rng::stream(master, k).next_u64()
}

fn t_star_note(t: &mut ResultTable, c: &SpinChain, cfg: &ExperimentConfig) -> Result<()> {
    if cfg.include_t_star {
        t.note(format!("T* = {} for N = {}", t_star(c)?, c.n_sites()));
    }
    Ok(())
}

/// Exact tree when it fits (or when asked), Monte-Carlo otherwise.
enum FisherEngine {
    Exact(Arc<dyn SequenceSource>),
    MonteCarlo {
        cfg: ProtocolConfig,
        registry: Arc<DynamicsRegistry>,
        mu: usize,
    },
}

impl FisherEngine {
    fn new(cfg: &ExperimentConfig, pcfg: &ProtocolConfig, registry: &Arc<DynamicsRegistry>) -> Result<Self> {
        let exact = match cfg.fisher.as_deref().unwrap_or("auto") {
            "exact" => true,
            "monte-carlo" => false,
            _ => pcfg.n_seq <= MAX_TREE_DEPTH,
        };
        if exact {
            Ok(FisherEngine::Exact(
                SourceRegistry::with_builtin().build_default(pcfg, registry)?,
            ))
        } else {
            Ok(FisherEngine::MonteCarlo {
                cfg: pcfg.clone(),
                registry: registry.clone(),
                mu: cfg.mu.unwrap_or(DEFAULT_MU),
            })
        }
    }

    fn series(&self, t: f64, seed: u64) -> Result<FisherSeries> {
        let scheme = DerivativeScheme::default_for(t);
        Ok(match self {
            FisherEngine::Exact(src) => exact_sequential_cfi(src.as_ref(), t, &scheme)?,
            FisherEngine::MonteCarlo { cfg, registry, mu } => {
                mc_sequential_cfi(&cfg.clone().with_temperature(t), registry, &scheme, *mu, seed)?
            }
        })
    }
}

fn protocol_config(cfg: &ExperimentConfig, n: usize, t: f64, kappa: f64, n_seq: usize) -> Result<ProtocolConfig> {
    let p = ProtocolConfig::new(ChainParams::new(n, cfg.coupling)?, t, kappa, cfg.tau_for(n), n_seq)?;
    let p = p.with_dynamics(&dynamics_name(cfg, kappa));
    Ok(p)
}

fn entropy_rows(
    cfg: &ExperimentConfig,
    pcfg: &ProtocolConfig,
    c: &Arc<SpinChain>,
    registry: &DynamicsRegistry,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let pr = Protocol::with_chain(pcfg.clone(), c.clone(), registry)?;
    Ok(pr
        .entropy_series(cfg.mu.unwrap_or(DEFAULT_MU), seed)?
        .into_iter()
        .map(|s| (s.mean, s.std_error))
        .collect())
}

struct Thermalize;

impl Scenario for Thermalize {
    fn name(&self) -> &'static str {
        "thermalize"
    }
    fn description(&self) -> &'static str {
        "fidelity with the Gibbs state over time, from |down...down> and from a random state"
    }
    fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        cfg.require_single_chain()?;
        if cfg.temperatures.len() != 1 || cfg.kappas.len() != 1 {
            return config_err("fields `temperatures` and `kappas`: thermalize takes exactly one value each");
        }
        if cfg.kappas[0] <= 0.0 {
            return config_err("field `kappas`: thermalization needs κ > 0");
        }
        grouping(cfg)?;
        Ok(())
    }
    fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ResultTable>> {
        let n = cfg.sites[0];
        let c = chain(cfg, n)?;
        let model = LindbladModel::new(c.clone(), cfg.kappas[0], cfg.temperatures[0], grouping(cfg)?)?;
        let dt = cfg.dt.unwrap_or(DEFAULT_DT);
        let steps = (cfg.t_max.unwrap_or(DEFAULT_T_MAX) / dt + 1e-9).floor() as usize;
        let down = DensityMatrix::basis_state(c.dim() - 1, c.dim());
        let random = random_density_matrix(c.dim(), &mut rng::stream(cfg.seed, 0));
        let (a, b) = rayon::join(
            || fidelity_curve(&model, &down, dt, steps),
            || fidelity_curve(&model, &random, dt, steps),
        );
        let (a, b) = (a?, b?);
        let mut t = ResultTable::new(
            "",
            &[
                ("t", "1/J"),
                ("fidelity_down_state", "1"),
                ("fidelity_random_state", "1"),
            ],
        );
        t.note("fidelity is the Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2");
        for k in 0..=steps {
            t.push(vec![k as f64 * dt, a[k], b[k]]);
        }
        Ok(vec![t])
    }
}

struct T95Map;

impl Scenario for T95Map {
    fn name(&self) -> &'static str {
        "t95-map"
    }
    fn description(&self) -> &'static str {
        "time to reach fidelity 0.95 with the Gibbs state from |down...down>, over (kappa, T)"
    }
    fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        cfg.require_single_chain()?;
        cfg.require_kappas()?;
        if cfg.temperatures.is_empty() {
            return config_err("field `temperatures`: required by scenario 't95-map'");
        }
        if cfg.kappas.iter().any(|&k| k <= 0.0) {
            return config_err("field `kappas`: thermalization needs κ > 0");
        }
        grouping(cfg)?;
        Ok(())
    }
    fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ResultTable>> {
        let c = chain(cfg, cfg.sites[0])?;
        let g = grouping(cfg)?;
        let dt = cfg.dt.unwrap_or(DEFAULT_DT);
        let t_max = cfg.t_max.unwrap_or(DEFAULT_T_MAX);
        let down = DensityMatrix::basis_state(c.dim() - 1, c.dim());
        let points: Vec<(f64, f64)> = cfg
            .kappas
            .iter()
            .flat_map(|&k| cfg.temperatures.iter().map(move |&t| (k, t)))
            .collect();
        let t95: Vec<Option<f64>> = points
            .par_iter()
            .map(|&(k, t)| {
                let m = LindbladModel::new(c.clone(), k, t, g)?;
                Ok(thermalization_time_t95(&m, &down, t_max, dt)?)
            })
            .collect::<Result<_>>()?;
        let mut tab = ResultTable::new("", &[("kappa", "J"), ("T", "J"), ("t95", "1/J")]);
        tab.note(format!(
            "t95 = nan when fidelity 0.95 is not reached by t_max = {t_max}"
        ));
        for ((k, t), v) in points.into_iter().zip(t95) {
            tab.push(vec![k, t, v.unwrap_or(f64::NAN)]);
        }
        Ok(vec![tab])
    }
}

struct StaticFi;

impl Scenario for StaticFi {
    fn name(&self) -> &'static str {
        "static-fi"
    }
    fn description(&self) -> &'static str {
        "Fisher information of measuring the first N_m qubits of the Gibbs state"
    }
    fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        cfg.require_temperatures()?;
        for &n in &cfg.sites {
            if let Some(m) = cfg.n_measured.iter().find(|&&m| m == 0 || m > n) {
                return config_err(format!("field `n_measured`: {m} is outside 1..={n}"));
            }
            if cfg.half_chain && n < 2 {
                return config_err("field `half_chain`: needs N ≥ 2");
            }
        }
        Ok(())
    }
    fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ResultTable>> {
        let mut tab = ResultTable::new("", &[("N", "1"), ("N_m", "1"), ("T", "J"), ("F", "1/J^2")]);
        tab.note("qubits 1..N_m are measured in the computational basis");
        for &n in &cfg.sites {
            let c = chain(cfg, n)?;
            t_star_note(&mut tab, &c, cfg)?;
            let measured: Vec<usize> = if cfg.half_chain {
                vec![n / 2]
            } else if cfg.n_measured.is_empty() {
                (1..=n).collect()
            } else {
                cfg.n_measured.clone()
            };
            let ts = temperatures(cfg, &c)?;
            let points: Vec<(usize, f64)> = measured.iter().flat_map(|&m| ts.iter().map(move |&t| (m, t))).collect();
            let values: Vec<f64> = points
                .par_iter()
                .map(|&(m, t)| Ok(multi_site_cfi(&c, t, m, &DerivativeScheme::default_for(t))?))
                .collect::<Result<_>>()?;
            for ((m, t), f) in points.into_iter().zip(values) {
                tab.push(vec![n as f64, m as f64, t, f]);
            }
        }
        Ok(vec![tab])
    }
}

struct QfiScan;

impl Scenario for QfiScan {
    fn name(&self) -> &'static str {
        "qfi-scan"
    }
    fn description(&self) -> &'static str {
        "equilibrium QFI, heat capacity and full computational-basis CFI over (N, T)"
    }
    fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        cfg.require_temperatures()
    }
    fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ResultTable>> {
        let mut scan = ResultTable::new(
            "scan",
            &[
                ("N", "1"),
                ("T", "J"),
                ("Q", "1/J^2"),
                ("C_T", "1"),
                ("F_full", "1/J^2"),
            ],
        );
        let mut peak = ResultTable::new(
            "t_star",
            &[("N", "1"), ("T_star", "J"), ("Q_max", "1/J^2"), ("F_full", "1/J^2")],
        );
        for &n in &cfg.sites {
            let c = chain(cfg, n)?;
            let ts = temperatures(cfg, &c)?;
            let rows: Vec<[f64; 3]> = ts
                .par_iter()
                .map(|&t| {
                    let p = ThermalProbe::new(c.clone(), t)?;
                    let f = multi_site_cfi(&c, t, n, &DerivativeScheme::default_for(t))?;
                    Ok([p.qfi(), p.heat_capacity(), f])
                })
                .collect::<Result<_>>()?;
            for (t, r) in ts.iter().zip(rows) {
                scan.push(vec![n as f64, *t, r[0], r[1], r[2]]);
            }
            let ts = t_star(&c)?;
            let q = ThermalProbe::new(c.clone(), ts)?.qfi();
            let f = multi_site_cfi(&c, ts, n, &DerivativeScheme::default_for(ts))?;
            peak.push(vec![n as f64, ts, q, f]);
        }
        Ok(vec![scan, peak])
    }
}

fn fisher_columns() -> [(&'static str, &'static str); 3] {
    [("n_seq", "1"), ("F", "1/J^2"), ("F_std_error", "1/J^2")]
}

fn entropy_table() -> ResultTable {
    ResultTable::new(
        "entropy",
        &[
            ("N", "1"),
            ("kappa", "J"),
            ("T", "J"),
            ("n_seq", "1"),
            ("S_mean", "nat"),
            ("S_std_error", "nat"),
        ],
    )
}

fn fisher_table(extra: &[(&'static str, &'static str)]) -> ResultTable {
    let mut cols = vec![("N", "1"), ("kappa", "J"), ("T", "J")];
    cols.extend_from_slice(&fisher_columns());
    cols.extend_from_slice(extra);
    ResultTable::new("fisher", &cols)
}

/// Fisher series, equilibrium QFI and optional `(mean, std error)` entropy rows.
type SweepPoint = (FisherSeries, f64, Option<Vec<(f64, f64)>>);

/// Fisher series (and optionally entropy) for every `(N, κ, T)` combination.
fn sequential_sweep(cfg: &ExperimentConfig, kappas: &[f64], with_entropy: bool) -> Result<Vec<ResultTable>> {
    let n_seq = cfg.require_n_seq()?;
    let registry = Arc::new(DynamicsRegistry::with_builtin());
    let mut fisher = fisher_table(&[("Q", "1/J^2")]);
    let mut entropy = entropy_table();
    let mut stream = 0u64;
    for &n in &cfg.sites {
        let c = chain(cfg, n)?;
        t_star_note(&mut fisher, &c, cfg)?;
        let ts = temperatures(cfg, &c)?;
        for &k in kappas {
            let pcfg = protocol_config(cfg, n, ts[0], k, n_seq)?;
            let engine = FisherEngine::new(cfg, &pcfg, &registry)?;
            let seeds: Vec<(f64, u64)> = ts
                .iter()
                .map(|&t| {
                    stream += 1;
                    (t, sub_seed(cfg.seed, stream))
                })
                .collect();
            let results: Vec<SweepPoint> = seeds
                .par_iter()
                .map(|&(t, seed)| {
                    let s = engine.series(t, seed)?;
                    let q = ThermalProbe::new(c.clone(), t)?.qfi();
                    let e = if with_entropy {
                        let p = pcfg.clone().with_temperature(t);
                        Some(entropy_rows(cfg, &p, &c, &registry, seed ^ 0x5eed)?)
                    } else {
                        None
                    };
                    Ok((s, q, e))
                })
                .collect::<Result<_>>()?;
            for ((t, _), (s, q, e)) in seeds.iter().zip(results) {
                for m in 1..=s.n_seq() {
                    fisher.push(vec![n as f64, k, *t, m as f64, s.at(m), s.std_error_at(m), q]);
                }
                if let Some(e) = e {
                    for (m, (mean, se)) in e.into_iter().enumerate() {
                        entropy.push(vec![n as f64, k, *t, m as f64, mean, se]);
                    }
                }
            }
        }
    }
    fisher.note("F_std_error is 0 for the exact tree");
    let mut out = vec![fisher];
    if with_entropy {
        entropy.note(format!(
            "entropy of the post-measurement state averaged over mu = {} sampled sequences",
            cfg.mu.unwrap_or(DEFAULT_MU)
        ));
        out.push(entropy);
    }
    Ok(out)
}

struct WeakRegime;

impl Scenario for WeakRegime {
    fn name(&self) -> &'static str {
        "weak-regime"
    }
    fn description(&self) -> &'static str {
        "closed evolution between measurements: sequential CFI and mean entropy versus n_seq"
    }
    fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        cfg.require_n_seq()?;
        cfg.require_temperatures()?;
        if cfg.kappas.iter().any(|&k| k != 0.0) {
            return config_err("field `kappas`: weak-regime runs at κ = 0; leave it empty or [0.0]");
        }
        Ok(())
    }
    fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ResultTable>> {
        sequential_sweep(cfg, &[0.0], true)
    }
}

struct IntermediateRegime;

impl Scenario for IntermediateRegime {
    fn name(&self) -> &'static str {
        "intermediate-regime"
    }
    fn description(&self) -> &'static str {
        "open evolution at finite kappa: sequential CFI versus T and n_seq, with the equilibrium QFI"
    }
    fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        cfg.require_n_seq()?;
        cfg.require_temperatures()?;
        cfg.require_kappas()
    }
    fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ResultTable>> {
        sequential_sweep(cfg, &cfg.kappas, false)
    }
}

struct KappaSweep;

impl Scenario for KappaSweep {
    fn name(&self) -> &'static str {
        "kappa-sweep"
    }
    fn description(&self) -> &'static str {
        "sequential CFI and mean entropy versus the thermalization rate kappa"
    }
    fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        cfg.require_n_seq()?;
        cfg.require_temperatures()?;
        cfg.require_kappas()
    }
    fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ResultTable>> {
        let with_entropy = cfg.mu.is_none_or(|m| m > 0);
        sequential_sweep(cfg, &cfg.kappas, with_entropy)
    }
}

struct NSeqStarScan;

impl Scenario for NSeqStarScan {
    fn name(&self) -> &'static str {
        "nseq-star"
    }
    fn description(&self) -> &'static str {
        "smallest n_seq whose sequential CFI exceeds the equilibrium QFI, versus T"
    }
    fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        cfg.require_n_seq()?;
        cfg.require_temperatures()?;
        cfg.require_single_chain()?;
        if cfg.kappas.len() != 1 {
            return config_err("field `kappas`: nseq-star takes exactly one κ");
        }
        Ok(())
    }
    fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ResultTable>> {
        let n_seq = cfg.require_n_seq()?;
        let n = cfg.sites[0];
        let k = cfg.kappas[0];
        let c = chain(cfg, n)?;
        let ts = temperatures(cfg, &c)?;
        let registry = Arc::new(DynamicsRegistry::with_builtin());
        let engine = FisherEngine::new(cfg, &protocol_config(cfg, n, ts[0], k, n_seq)?, &registry)?;
        let results: Vec<(FisherSeries, f64)> = ts
            .par_iter()
            .enumerate()
            .map(|(i, &t)| {
                let s = engine.series(t, sub_seed(cfg.seed, i as u64 + 1))?;
                Ok((s, ThermalProbe::new(c.clone(), t)?.qfi()))
            })
            .collect::<Result<_>>()?;
        let mut fisher = fisher_table(&[("Q", "1/J^2")]);
        let mut star = ResultTable::new(
            "threshold",
            &[
                ("T", "J"),
                ("n_seq_star", "1"),
                ("ratio", "1"),
                ("F_at_n_seq_star", "1/J^2"),
                ("Q", "1/J^2"),
            ],
        );
        star.note(format!(
            "n_seq_star = nan when F never exceeds Q up to n_seq = {n_seq}; ratio is then taken at n_seq"
        ));
        t_star_note(&mut star, &c, cfg)?;
        for (t, (s, q)) in ts.iter().zip(results) {
            for m in 1..=s.n_seq() {
                fisher.push(vec![n as f64, k, *t, m as f64, s.at(m), s.std_error_at(m), q]);
            }
            let r = find_nseq_star(&s, q)?;
            star.push(vec![
                *t,
                r.n_star.map_or(f64::NAN, |v| v as f64),
                r.ratio,
                r.achieved,
                q,
            ]);
        }
        Ok(vec![fisher, star])
    }
}

struct Bayes;

pub const DEFAULT_GRID: crate::config::GridSpec = crate::config::GridSpec {
    min: 0.01,
    max: 2.0,
    points: 400,
};

impl Scenario for Bayes {
    fn name(&self) -> &'static str {
        "bayes"
    }
    fn description(&self) -> &'static str {
        "gridded posterior of T from M sampled sequences, compared with 1/F"
    }
    fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        let n_seq = cfg.require_n_seq()?;
        cfg.require_single_chain()?;
        match cfg.samples {
            None | Some(0) => return config_err("field `samples`: M must be positive"),
            Some(_) => {}
        }
        if cfg.temperatures.len() != 1 {
            return config_err("field `temperatures`: bayes takes exactly one true temperature");
        }
        if cfg.kappas.len() != 1 {
            return config_err("field `kappas`: bayes takes exactly one κ");
        }
        if let Some(v) = cfg.n_seq_values.iter().find(|&&v| v == 0 || v > n_seq) {
            return config_err(format!("field `n_seq_values`: {v} is outside 1..={n_seq}"));
        }
        if n_seq > MAX_TREE_DEPTH {
            return config_err(format!(
                "field `n_seq`: bayes needs the exact tree, so n_seq ≤ {MAX_TREE_DEPTH}"
            ));
        }
        if cfg.datasets == Some(0) {
            return config_err("field `datasets`: must be at least 1");
        }
        Ok(())
    }
    fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ResultTable>> {
        let n_seq = cfg.require_n_seq()?;
        let n = cfg.sites[0];
        let truth_t = cfg.temperatures[0];
        let m = cfg.samples.unwrap_or(0);
        let datasets = cfg.datasets.unwrap_or(1);
        let values = if cfg.n_seq_values.is_empty() {
            vec![n_seq]
        } else {
            cfg.n_seq_values.clone()
        };
        let g = cfg.grid.unwrap_or(DEFAULT_GRID);
        let grid = linear_grid(g.min, g.max, g.points);

        let registry = Arc::new(DynamicsRegistry::with_builtin());
        let pcfg = protocol_config(cfg, n, truth_t, cfg.kappas[0], n_seq)?;
        let source = SourceRegistry::with_builtin().build_default(&pcfg, &registry)?;
        let truth = source.table_at(truth_t)?;
        let tables = grid
            .par_iter()
            .map(|&t| source.table_at(t))
            .collect::<seqtherm::Result<Vec<_>>>()?;
        let fisher = exact_sequential_cfi(source.as_ref(), truth_t, &DerivativeScheme::default_for(truth_t))?;

        let mut post = ResultTable::new("posterior", &[("n_seq", "1"), ("T", "J"), ("density", "1/J")]);
        post.note("posterior of dataset 0 under a uniform prior on the grid");
        let mut est = ResultTable::new(
            "estimates",
            &[
                ("dataset", "1"),
                ("n_seq", "1"),
                ("mean", "J"),
                ("variance", "J^2"),
                ("mode", "J"),
                ("M_variance", "J^2"),
                ("inverse_F", "J^2"),
                ("resolution_limited", "1"),
            ],
        );
        let mut summary = ResultTable::new(
            "summary",
            &[
                ("n_seq", "1"),
                ("mean_M_variance", "J^2"),
                ("inverse_F", "J^2"),
                ("ratio", "1"),
            ],
        );
        summary.note(format!("M = {m}, datasets = {datasets}, true T = {truth_t}"));

        let counts: Vec<TrajectoryCounts> = (0..datasets)
            .map(|d| {
                let idx = sample_sequences(&truth, m as usize, sub_seed(cfg.seed, d as u64));
                TrajectoryCounts::from_indices(n_seq, &idx)
            })
            .collect::<seqtherm::Result<_>>()?;
        let mut mean_mv = vec![0.0; values.len()];
        for (d, full) in counts.iter().enumerate() {
            for (j, &k) in values.iter().enumerate() {
                let c = if k == n_seq { full.clone() } else { full.truncated(k)? };
                let p = posterior(&c, &grid, &tables)?;
                let s = posterior_moments(&p);
                let inv_f = 1.0 / fisher.at(k);
                est.push(vec![
                    d as f64,
                    k as f64,
                    s.mean,
                    s.variance,
                    s.mode,
                    m as f64 * s.variance,
                    inv_f,
                    f64::from(u8::from(s.resolution_limited)),
                ]);
                mean_mv[j] += m as f64 * s.variance / datasets as f64;
                if d == 0 {
                    for (t, v) in p.temperatures.iter().zip(&p.density) {
                        post.push(vec![k as f64, *t, *v]);
                    }
                }
            }
        }
        for (j, &k) in values.iter().enumerate() {
            let inv_f = 1.0 / fisher.at(k);
            summary.push(vec![k as f64, mean_mv[j], inv_f, mean_mv[j] / inv_f]);
        }
        Ok(vec![post, est, summary])
    }
}
