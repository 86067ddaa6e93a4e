//! Experiment configuration, read from TOML.
//!
//! Physical quantities use `J = 1` units implicitly through `coupling`:
//! temperatures and rates are in units of `J`, times in units of `1/J`.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliError, Result};

/// Largest seed that survives a TOML round trip (TOML integers are `i64`).
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    /// File-name stem for the CSV outputs; defaults to the scenario name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Chain lengths `N`.
    pub sites: Vec<usize>,
    #[serde(default = "unit")]
    pub coupling: f64,
    #[serde(default)]
    pub temperatures: Vec<f64>,
    /// Append `T*` of each chain to `temperatures`.
    #[serde(default)]
    pub include_t_star: bool,
    #[serde(default)]
    pub kappas: Vec<f64>,
    /// Interval between measurements. Exclusive with `tau_per_site`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// `τ = tau_per_site · N / J`. When neither is set, `Jτ = N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_per_site: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_seq: Option<usize>,
    /// Sequence lengths at which the posterior is reported.
    #[serde(default)]
    pub n_seq_values: Vec<usize>,
    /// Measured-qubit counts for `static-fi`; empty means `1..=N`.
    #[serde(default)]
    pub n_measured: Vec<usize>,
    /// Measure `N/2` qubits instead of `n_measured`.
    #[serde(default)]
    pub half_chain: bool,
    /// Monte-Carlo trajectories `μ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<usize>,
    /// Recorded sequences `M` per dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datasets: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Dynamics registry name; defaults to `unitary` at `κ = 0` and `lindblad` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<String>,
    /// `auto`, `exact` or `monte-carlo`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Fields whose values were chosen by hand.
    #[serde(default)]
    pub assumed: Vec<String>,
}

/// Uniform posterior grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

fn unit() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// A config with every optional field unset.
    pub fn new(scenario: &str, sites: Vec<usize>) -> Self {
        ExperimentConfig {
            scenario: scenario.to_string(),
            label: None,
            sites,
            coupling: 1.0,
            temperatures: Vec::new(),
            include_t_star: false,
            kappas: Vec::new(),
            tau: None,
            tau_per_site: None,
            n_seq: None,
            n_seq_values: Vec::new(),
            n_measured: Vec::new(),
            half_chain: false,
            mu: None,
            samples: None,
            datasets: None,
            seed: 0,
            t_max: None,
            dt: None,
            dynamics: None,
            fisher: None,
            grid: None,
            output: None,
            assumed: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check_common()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.scenario)
    }

    /// `τ` for a chain of `n` sites.
    pub fn tau_for(&self, n: usize) -> f64 {
        match (self.tau, self.tau_per_site) {
            (Some(t), _) => t,
            (None, Some(f)) => f * n as f64 / self.coupling,
            (None, None) => n as f64 / self.coupling,
        }
    }

    /// Checks that do not depend on the scenario.
    pub fn check_common(&self) -> Result<()> {
        if self.sites.is_empty() {
            return config_err("field `sites`: at least one chain length is required");
        }
        if !(self.coupling > 0.0) || !self.coupling.is_finite() {
            return config_err(format!("field `coupling`: must be positive, got {}", self.coupling));
        }
        if let Some(t) = self.temperatures.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return config_err(format!("field `temperatures`: must be positive, got {t}"));
        }
        if let Some(k) = self.kappas.iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
            return config_err(format!("field `kappas`: must be non-negative, got {k}"));
        }
        if self.tau.is_some() && self.tau_per_site.is_some() {
            return config_err("fields `tau` and `tau_per_site` are mutually exclusive");
        }
        for (name, v) in [
            ("tau", self.tau),
            ("tau_per_site", self.tau_per_site),
            ("t_max", self.t_max),
            ("dt", self.dt),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return config_err(format!("field `{name}`: must be positive, got {v}"));
                }
            }
        }
        if self.samples == Some(0) {
            return config_err("field `samples`: M must be positive");
        }
        if self.seed > MAX_SEED {
            return config_err(format!("field `seed`: must be at most {MAX_SEED}"));
        }
        if let Some(f) = &self.fisher {
            if !["auto", "exact", "monte-carlo"].contains(&f.as_str()) {
                return config_err(format!(
                    "field `fisher`: expected auto, exact or monte-carlo, got '{f}'"
                ));
            }
        }
        if let Some(g) = self.grid {
            if !(g.min > 0.0) || !(g.max > g.min) || g.points < 2 {
                return config_err(format!(
                    "field `grid`: need 0 < min < max and at least 2 points, got {} .. {} with {}",
                    g.min, g.max, g.points
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn require_n_seq(&self) -> Result<usize> {
        match self.n_seq {
            Some(n) if n > 0 => Ok(n),
            Some(_) => config_err("field `n_seq`: must be at least 1"),
            None => config_err(format!("field `n_seq`: required by scenario '{}'", self.scenario)),
        }
    }

    pub(crate) fn require_temperatures(&self) -> Result<()> {
        if self.temperatures.is_empty() && !self.include_t_star {
            return config_err(format!(
                "field `temperatures`: required by scenario '{}' (or set include_t_star)",
                self.scenario
            ));
        }
        Ok(())
    }

    pub(crate) fn require_kappas(&self) -> Result<()> {
        if self.kappas.is_empty() {
            return config_err(format!("field `kappas`: required by scenario '{}'", self.scenario));
        }
        Ok(())
    }

    pub(crate) fn require_single_chain(&self) -> Result<usize> {
        match self.sites.as_slice() {
            [n] => Ok(*n),
            _ => config_err(format!(
                "field `sites`: scenario '{}' takes exactly one chain length, got {:?}",
                self.scenario, self.sites
            )),
        }
    }
}

/// Recovers the config echoed in a CSV metadata header.
pub fn config_from_csv(text: &str) -> Result<ExperimentConfig> {
    let body: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix(crate::table::CONFIG_PREFIX))
        .collect();
    if body.is_empty() {
        return config_err("no config echo found in CSV header");
    }
    ExperimentConfig::from_toml(&body.join("\n"))
}
