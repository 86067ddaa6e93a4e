use std::path::Path;
use std::process::{Command, Output};

use seqtherm_cli::config::config_from_csv;
use seqtherm_cli::presets::preset;

fn seqtherm(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_seqtherm"));
    c.args(args).env_remove("SEQTHERM_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn thermalize_config_writes_fidelity_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.toml",
        "scenario = \"thermalize\"\nsites = [4]\ntemperatures = [1.0]\nkappas = [1.0]\nt_max = 300.0\ndt = 5.0\nseed = 3\n",
    );
    let out = seqtherm(
        &["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()],
        &[("SEQTHERM_THREADS", "1")],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("thermalize.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "t,fidelity_down_state,fidelity_random_state"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 61);
    let last = rows.last().unwrap();
    assert!(last[1] > 0.999 && last[2] > 0.999, "{last:?}");

    let echoed = config_from_csv(&csv).unwrap();
    assert_eq!(echoed.temperatures, vec![1.0]);
    assert_eq!(echoed.seed, 3);
}

#[test]
fn preset_output_echoes_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = seqtherm(
        &["preset", "fig3a", "--seed", "5", "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fig3a.csv")).unwrap();
    let mut expected = preset("fig3a").unwrap();
    expected.seed = 5;
    assert_eq!(config_from_csv(&csv).unwrap(), expected);
    for r in data_rows(&csv).iter().filter(|r| r[1] == 1.0) {
        assert!(r[3].abs() < 1e-10);
    }
}

#[test]
fn unknown_preset_lists_valid_ids() {
    let out = seqtherm(&["preset", "fig2"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fig1a") && err.contains("figA2"), "{err}");
}

#[test]
fn zero_samples_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.toml",
        "scenario = \"bayes\"\nsites = [4]\ntemperatures = [0.3]\nkappas = [1.0]\nn_seq = 4\nsamples = 0\n",
    );
    let out = seqtherm(&["run", "--config", &cfg], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("M must be positive"));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.toml",
        "scenario = \"static-fi\"\nsites = [4]\ntemperatures = [0.2, ]x\n",
    );
    let out = seqtherm(&["run", "--config", &cfg], &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("m.toml"), "{err}");
}

#[test]
fn missing_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "n.toml",
        "scenario = \"nseq-star\"\nsites = [4]\ntemperatures = [0.3]\nkappas = [1.0]\n",
    );
    let out = seqtherm(&["run", "--config", &cfg], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`n_seq`"));
}

#[test]
fn resource_guard_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.toml",
        "scenario = \"nseq-star\"\nsites = [3]\ntemperatures = [0.5]\nkappas = [1.0]\nn_seq = 24\nfisher = \"exact\"\n",
    );
    let out = seqtherm(&["run", "--config", &cfg], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("requires monte-carlo"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = seqtherm(&["list"], &[("SEQTHERM_THREADS", "zero")]);
    assert_eq!(out.status.code(), Some(1));
    let out = seqtherm(&["list"], &[("SEQTHERM_THREADS", "2")]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("kappa-sweep"));
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let out = seqtherm(
            &["preset", "fig6b", "--out", dir.path().to_str().unwrap()],
            &[("SEQTHERM_THREADS", threads)],
        );
        assert!(out.status.success());
    }
    let body = |d: &Path| {
        let s = std::fs::read_to_string(d.join("fig6b_fisher.csv")).unwrap();
        seqtherm_cli::table::without_timestamp(&s)
    };
    assert_eq!(body(a.path()), body(b.path()));
}
