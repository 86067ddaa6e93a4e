//! Named configurations, one per figure id.
//!
//! Values chosen by hand are listed in `assumed` and
//! echoed into the CSV metadata.

use seqtherm::spin::linear_grid;

use crate::config::{ExperimentConfig, GridSpec};
use crate::error::{config_err, Result};

pub const PRESET_IDS: [&str; 12] = [
    "fig1a", "fig1b", "fig3a", "fig3b", "fig4", "fig5", "fig6a", "fig6b", "fig7", "fig8", "figA1", "figA2",
];

/// `lo, lo + step, …, hi`, rounded to 12 digits so the values print cleanly.
fn stepped(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize + 1;
    linear_grid(lo, hi, n)
        .into_iter()
        .map(|x| (x * 1e12).round() / 1e12)
        .collect()
}

fn assumed(c: &mut ExperimentConfig, fields: &[&str]) {
    c.assumed = fields.iter().map(|s| s.to_string()).collect();
}

pub fn preset(id: &str) -> Result<ExperimentConfig> {
    let mut c = match id {
        "fig1a" => {
            let mut c = ExperimentConfig::new("thermalize", vec![4]);
            c.temperatures = vec![1.0];
            c.kappas = vec![1.0];
            c.t_max = Some(300.0);
            c.dt = Some(0.5);
            assumed(&mut c, &["t_max", "dt", "seed"]);
            c
        }
        "fig1b" => {
            let mut c = ExperimentConfig::new("t95-map", vec![4]);
            c.kappas = vec![0.25, 0.5, 1.0, 2.0, 4.0];
            c.temperatures = vec![0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0];
            c.t_max = Some(5000.0);
            c.dt = Some(0.5);
            assumed(&mut c, &["kappas", "temperatures", "t_max", "dt"]);
            c
        }
        "fig3a" => {
            let mut c = ExperimentConfig::new("static-fi", vec![2, 4, 6, 8]);
            c.temperatures = vec![0.2];
            assumed(&mut c, &["sites"]);
            c
        }
        "fig3b" => {
            let mut c = ExperimentConfig::new("static-fi", vec![2, 4, 6, 8]);
            c.temperatures = stepped(0.05, 2.0, 0.05);
            c.half_chain = true;
            assumed(&mut c, &["sites", "temperatures"]);
            c
        }
        "fig4" => {
            let mut c = ExperimentConfig::new("qfi-scan", vec![2, 3, 4, 5, 6, 7, 8]);
            c.temperatures = stepped(0.05, 2.0, 0.05);
            assumed(&mut c, &["sites", "temperatures"]);
            c
        }
        "fig5" => {
            let mut c = ExperimentConfig::new("weak-regime", vec![2, 3, 4, 5, 6]);
            c.temperatures = vec![0.3];
            c.include_t_star = true;
            c.tau_per_site = Some(1.0);
            c.n_seq = Some(12);
            c.mu = Some(500);
            assumed(&mut c, &["sites", "n_seq", "mu", "seed"]);
            c
        }
        "fig6a" | "fig6b" => {
            let mut c = ExperimentConfig::new("intermediate-regime", vec![4]);
            c.kappas = vec![if id == "fig6a" { 0.5 } else { 1.0 }];
            c.temperatures = stepped(0.05, 1.0, 0.05);
            c.tau_per_site = Some(1.0);
            c.n_seq = Some(10);
            assumed(&mut c, &["temperatures", "n_seq"]);
            c
        }
        "fig7" => {
            let mut c = ExperimentConfig::new("kappa-sweep", vec![4]);
            c.kappas = vec![0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0];
            c.temperatures = vec![0.3];
            c.include_t_star = true;
            c.tau_per_site = Some(2.0);
            c.n_seq = Some(6);
            c.mu = Some(300);
            assumed(&mut c, &["kappas", "n_seq", "mu", "seed"]);
            c
        }
        "fig8" => {
            let mut c = ExperimentConfig::new("nseq-star", vec![4]);
            c.kappas = vec![1.0];
            c.temperatures = stepped(0.1, 1.0, 0.05);
            c.tau_per_site = Some(1.0);
            c.n_seq = Some(14);
            assumed(&mut c, &["temperatures", "n_seq"]);
            c
        }
        "figA1" => {
            let mut c = ExperimentConfig::new("bayes", vec![8]);
            c.kappas = vec![0.0];
            c.temperatures = vec![0.3];
            c.tau_per_site = Some(1.0);
            c.n_seq = Some(10);
            c.n_seq_values = vec![1, 2, 4, 6, 8, 10];
            c.samples = Some(5000);
            c.grid = Some(GridSpec {
                min: 0.01,
                max: 2.0,
                points: 400,
            });
            assumed(&mut c, &["tau_per_site", "n_seq", "n_seq_values", "grid", "seed"]);
            c
        }
        "figA2" => {
            let mut c = ExperimentConfig::new("bayes", vec![4]);
            c.kappas = vec![1.0];
            c.temperatures = vec![0.3];
            c.tau_per_site = Some(1.0);
            c.n_seq = Some(10);
            c.n_seq_values = vec![1, 2, 4, 6, 8, 10];
            c.samples = Some(500);
            c.grid = Some(GridSpec {
                min: 0.01,
                max: 2.0,
                points: 400,
            });
            assumed(&mut c, &["tau_per_site", "n_seq", "n_seq_values", "grid", "seed"]);
            c
        }
        _ => {
            return config_err(format!(
                "unknown figure id '{id}'; valid ids: {}",
                PRESET_IDS.join(", ")
            ));
        }
    };
    c.label = Some(id.to_string());
    Ok(c)
}
