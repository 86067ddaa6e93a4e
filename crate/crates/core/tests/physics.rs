use std::sync::Arc;

use seqtherm::bayes::{default_grid, log_likelihood, posterior, posterior_moments, TrajectoryCounts};
use seqtherm::dynamics::{DynamicsRegistry, JumpGrouping, LindbladModel};
use seqtherm::fisher::{exact_sequential_cfi, mc_sequential_cfi, DerivativeScheme};
use seqtherm::numerics::{fidelity, random_density_matrix};
use seqtherm::protocol::{
    sample_sequences, DensityTreeSource, Protocol, ProtocolConfig, SequenceSource, SequenceTable,
};
use seqtherm::rng;
use seqtherm::spin::{t_star, ChainParams, SpinChain, ThermalProbe};

fn chain(n: usize) -> Arc<SpinChain> {
    SpinChain::new(ChainParams::new(n, 1.0).unwrap()).unwrap()
}

fn tree(n: usize, t: f64, kappa: f64, tau: f64, n_seq: usize) -> DensityTreeSource {
    let cfg = ProtocolConfig::new(ChainParams::new(n, 1.0).unwrap(), t, kappa, tau, n_seq).unwrap();
    DensityTreeSource::new(cfg, Arc::new(DynamicsRegistry::with_builtin())).unwrap()
}

#[test]
fn random_initial_states_reach_the_same_steady_state() {
    let c = chain(4);
    let model = LindbladModel::new(c, 1.0, 1.0, JumpGrouping::PerPair).unwrap();
    let a = random_density_matrix(16, &mut rng::stream(11, 0));
    let b = random_density_matrix(16, &mut rng::stream(11, 1));
    let ea = model.propagate(&a, 600.0).unwrap();
    let eb = model.propagate(&b, 600.0).unwrap();
    assert!(fidelity(&ea, &eb).unwrap() > 1.0 - 1e-6);
}

#[test]
fn peak_qfi_grows_with_chain_length() {
    let q: Vec<f64> = (2..=5)
        .map(|n| {
            let c = chain(n);
            let ts = t_star(&c).unwrap();
            ThermalProbe::new(c, ts).unwrap().qfi()
        })
        .collect();
    assert!(q.windows(2).all(|w| w[1] > w[0]), "{q:?}");
}

#[test]
fn sequential_cfi_is_insensitive_to_the_difference_step() {
    let src = tree(3, 0.4, 1.0, 3.0, 5);
    let coarse = exact_sequential_cfi(&src, 0.4, &DerivativeScheme::new(4e-4, 0.4).unwrap()).unwrap();
    let fine = exact_sequential_cfi(&src, 0.4, &DerivativeScheme::new(2e-4, 0.4).unwrap()).unwrap();
    for n in 1..=5 {
        let (a, b) = (coarse.at(n), fine.at(n));
        assert!((a - b).abs() <= 1e-4 * b.abs().max(1e-12), "n={n}: {a} vs {b}");
    }
}

#[test]
fn monte_carlo_agrees_with_the_exact_tree() {
    let src = tree(2, 0.5, 1.0, 2.0, 5);
    let scheme = DerivativeScheme::default_for(0.5);
    let exact = exact_sequential_cfi(&src, 0.5, &scheme).unwrap();
    let cfg = ProtocolConfig::new(ChainParams::new(2, 1.0).unwrap(), 0.5, 1.0, 2.0, 5).unwrap();
    let mc = mc_sequential_cfi(&cfg, &DynamicsRegistry::with_builtin(), &scheme, 2000, 5).unwrap();
    for n in 1..=5 {
        let gap = (mc.at(n) - exact.at(n)).abs();
        assert!(
            gap <= 3.0 * mc.std_error_at(n) + 1e-9,
            "n={n}: {} vs {}",
            mc.at(n),
            exact.at(n)
        );
    }
}

#[test]
fn closed_evolution_purifies_on_average() {
    let cfg = ProtocolConfig::new(ChainParams::new(4, 1.0).unwrap(), 0.3, 0.0, 4.0, 30).unwrap();
    let pr = Protocol::new(cfg, &DynamicsRegistry::with_builtin()).unwrap();
    let s = pr.entropy_series(300, 3).unwrap();
    for w in s.windows(2) {
        assert!(w[1].mean <= w[0].mean + 3.0 * (w[0].std_error + w[1].std_error) + 1e-12);
    }
    assert!(s[30].mean < 0.1 * s[0].mean);
}

#[test]
fn sampled_trajectories_follow_enumerated_probabilities() {
    let cfg = ProtocolConfig::new(ChainParams::new(3, 1.0).unwrap(), 0.6, 1.0, 3.0, 3).unwrap();
    let pr = Protocol::new(cfg, &DynamicsRegistry::with_builtin()).unwrap();
    let exact = pr.enumerate_trajectories().unwrap();
    let draws = 20_000;
    let mut seen = [0f64; 8];
    for t in pr.sample_trajectories(draws, 17) {
        seen[t.index()] += 1.0;
    }
    let chi2: f64 = exact
        .iter()
        .map(|t| {
            let e = t.probability * draws as f64;
            (seen[t.index()] - e).powi(2) / e
        })
        .sum();
    // 7 degrees of freedom; 24.3 is the 0.999 quantile.
    assert!(chi2 < 24.3, "chi2 = {chi2}");
}

fn grid_tables(src: &dyn SequenceSource, grid: &[f64]) -> Vec<SequenceTable> {
    grid.iter().map(|&t| src.table_at(t).unwrap()).collect()
}

#[test]
fn likelihood_peaks_near_the_true_temperature() {
    let src = tree(4, 0.3, 1.0, 4.0, 6);
    let truth = src.table_at(0.3).unwrap();
    let far = src.table_at(1.2).unwrap();
    let counts = TrajectoryCounts::from_indices(6, &sample_sequences(&truth, 500, 1)).unwrap();
    let at_truth = log_likelihood(&counts, truth.leaves()).unwrap();
    let at_far = log_likelihood(&counts, far.leaves()).unwrap();
    assert!(at_truth > at_far);
}

#[test]
fn posterior_concentrates_and_respects_the_cramer_rao_bound() {
    let grid = default_grid();
    let src = tree(4, 0.3, 1.0, 4.0, 6);
    let tables = grid_tables(&src, &grid);
    let truth = src.table_at(0.3).unwrap();
    let f = exact_sequential_cfi(&src, 0.3, &DerivativeScheme::default_for(0.3))
        .unwrap()
        .at(6);

    let mut previous = f64::INFINITY;
    for m in [100usize, 500, 2000] {
        let mut var = 0.0;
        for seed in 0..20u64 {
            let counts = TrajectoryCounts::from_indices(6, &sample_sequences(&truth, m, seed)).unwrap();
            let s = posterior_moments(&posterior(&counts, &grid, &tables).unwrap());
            var += s.variance / 20.0;
        }
        assert!(var < previous, "M={m}: {var} vs {previous}");
        assert!(
            m as f64 * var >= 0.75 / f,
            "M={m}: M·Var={} < 0.75/F={}",
            m as f64 * var,
            0.75 / f
        );
        previous = var;
    }
}

#[test]
fn posterior_is_reproducible_for_a_fixed_seed() {
    let grid: Vec<f64> = default_grid().into_iter().step_by(8).collect();
    let src = tree(3, 0.3, 1.0, 3.0, 4);
    let tables = grid_tables(&src, &grid);
    let truth = src.table_at(0.3).unwrap();
    let run = || {
        let counts = TrajectoryCounts::from_indices(4, &sample_sequences(&truth, 300, 9)).unwrap();
        posterior(&counts, &grid, &tables).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(
        a.density.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        b.density.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
}
