//! CSV result tables.
//!
//! Layout: `#`-prefixed metadata lines, one header row, then data rows.
//! Comma separated, `.` decimal point, LF line endings, UTF-8. Missing values
//! are written as `nan`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const CONFIG_PREFIX: &str = "# config: ";
pub const TIMESTAMP_PREFIX: &str = "# timestamp: ";

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// Suffix appended to the config label to form the file name.
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
    pub notes: Vec<String>,
}

impl ResultTable {
    /// `columns` as `(name, unit)` pairs.
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        ResultTable {
            name: name.to_string(),
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row arity does not match table '{}'",
            self.name
        );
        self.rows.push(row);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn file_name(&self, label: &str) -> String {
        if self.name.is_empty() {
            format!("{label}.csv")
        } else {
            format!("{label}_{}.csv", self.name)
        }
    }

    pub fn to_csv(&self, cfg: &ExperimentConfig) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "# seqtherm {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "# scenario: {}", cfg.scenario);
        let _ = writeln!(
            s,
            "# table: {}",
            if self.name.is_empty() { cfg.label() } else { &self.name }
        );
        let _ = writeln!(s, "# seed: {}", cfg.seed);
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let _ = writeln!(s, "{TIMESTAMP_PREFIX}{ts}");
        let units: Vec<String> = self.columns.iter().map(|c| format!("{}={}", c.name, c.unit)).collect();
        let _ = writeln!(s, "# units: {}", units.join(", "));
        let _ = writeln!(
            s,
            "# energies, temperatures and rates in units of J; times in units of 1/J; k_B = hbar = 1"
        );
        let _ = writeln!(s, "# logarithms: natural");
        if !cfg.assumed.is_empty() {
            let _ = writeln!(s, "# assumed: {}", cfg.assumed.join(", "));
        }
        for n in &self.notes {
            let _ = writeln!(s, "# note: {n}");
        }
        for line in cfg.to_toml()?.lines() {
            let _ = writeln!(s, "{CONFIG_PREFIX}{line}");
        }
        s.push_str(&self.body());
        Ok(s)
    }

    /// Header row and data rows.
    pub fn body(&self) -> String {
        let mut s = String::new();
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        s.push_str(&names.join(","));
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format_value(*x)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<PathBuf> {
        let path = dir.join(self.file_name(cfg.label()));
        std::fs::write(&path, self.to_csv(cfg)?).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

/// Shortest representation that parses back to the same `f64`.
fn format_value(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

/// CSV text without the timestamp line; equal for reruns of the same config.
pub fn without_timestamp(csv: &str) -> String {
    csv.lines()
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX))
        .fold(String::new(), |mut s, l| {
            s.push_str(l);
            s.push('\n');
            s
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::config_from_csv;

    #[test]
    fn csv_layout() {
        let mut t = ResultTable::new("", &[("N_m", "1"), ("F", "1/J^2")]);
        t.push(vec![1.0, 0.0]);
        t.push(vec![2.0, 0.1 + 0.2]);
        t.push(vec![3.0, f64::NAN]);
        let mut cfg = ExperimentConfig::new("static-fi", vec![4]);
        cfg.temperatures = vec![0.2];
        let csv = t.to_csv(&cfg).unwrap();
        assert!(!csv.contains('\r'));
        assert!(csv.ends_with("N_m,F\n1,0\n2,0.30000000000000004\n3,nan\n"));
        assert!(csv.contains("# units: N_m=1, F=1/J^2"));
        assert_eq!(config_from_csv(&csv).unwrap(), cfg);
    }

    #[test]
    #[should_panic]
    fn arity_is_enforced() {
        ResultTable::new("x", &[("a", "1")]).push(vec![1.0, 2.0]);
    }
}
