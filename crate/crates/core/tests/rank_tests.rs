//! Rank-selection tests: the threshold rule on frozen inputs, the SVT
//! estimator's structure, and bootstrap behavior on planted instances.

use ndarray::Array2;

use netreg_core::estimator::{self, FitConfig, RMode};
use netreg_core::linalg::EigenDirection;
use netreg_core::network;
use netreg_core::rank::{self, RankMethod};
use netreg_core::rng;
use netreg_core::sim::{
    self, DensitySchedule, DesignKind, EffectKind, Method, NetworkKind, Population, ScenarioConfig,
};
use netreg_core::spectral;

#[test]
fn threshold_rule_on_frozen_inputs() {
    // hand-computed: p = K = 4, n = 1000, d = 100
    // cutoff = 1 - 4 sqrt(16 ln 1000) / 100 = 1 - 4*sqrt(110.524)/100
    //        = 1 - 0.42052... = 0.579476...
    let sigma = [0.999, 0.58, 0.579, 0.2];
    let report = rank::select_r_threshold(&sigma, 100.0, 4, 4, 1000);
    assert_eq!(report.method, RankMethod::Threshold);
    assert!((report.threshold - 0.579_478_258_419_445_4).abs() < 1e-12);
    // 0.999 and 0.58 clear the cutoff, 0.579 does not (cutoff ~0.57948)
    assert_eq!(report.r_hat, 2);
    assert!(!report.unreliable);
    // boundary: a value exactly at the cutoff counts (>= comparison)
    let sigma = [report.threshold];
    let r = rank::select_r_threshold(&sigma, 100.0, 4, 4, 1000);
    assert_eq!(r.r_hat, 1);
}

#[test]
fn threshold_rule_flags_unreliable_regime() {
    // d so small that the raw cutoff is negative: everything qualifies and
    // the report must say the rule is outside its regime.
    let sigma = [0.9, 0.5, 0.1];
    let report = rank::select_r_threshold(&sigma, 5.0, 4, 4, 1000);
    assert_eq!(report.threshold, 0.0);
    assert_eq!(report.r_hat, 3);
    assert!(report.unreliable);
}

#[test]
fn threshold_rule_caps_at_min_p_k() {
    let sigma = [1.0, 1.0, 1.0, 1.0];
    let report = rank::select_r_threshold(&sigma, 1e9, 2, 4, 1000);
    assert_eq!(report.r_hat, 2);
}

fn eigenspace_config(n: usize, density: DensitySchedule, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n,
        p: 4,
        k: 4,
        network: NetworkKind::Sbm,
        density,
        design: DesignKind::Eigenspace,
        effects: EffectKind::Eigenspace { gamma: vec![0.0, 1.0, 1.0, 1.0] },
        noise_sigma2: 1.0,
        alpha_scale: None,
        reps: 1,
        seed,
        methods: vec![Method::Sp],
        r_mode: RMode::Fixed(1),
        alpha_level: 0.05,
    }
}

#[test]
fn svt_estimate_matches_density_and_range() {
    let config = eigenspace_config(300, DensitySchedule::NTwoThirds, 101);
    let pop = Population::new(&config).expect("population");
    let rep = sim::build_scenario(&config, &pop, 0).expect("replicate");
    let d_hat = network::average_degree(&rep.a);
    let p_star = rank::svt_estimate(&rep.a, 4, d_hat).expect("svt");
    let m = p_star.matrix();
    assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
    // symmetric
    let asym = netreg_core::linalg::max_abs(&(m - &m.t()).view());
    assert!(asym < 1e-12);
    // degree match within the slack the final clamp can introduce
    let avg = (m.sum() - m.diag().sum()) / m.nrows() as f64;
    assert!((avg - d_hat).abs() < 0.05 * d_hat, "avg degree {avg:.2} vs {d_hat:.2}");
    // SVT of a rank-deficient probability matrix should be close to P itself
    let diff = netreg_core::linalg::max_abs(&(m - pop.prob.matrix()).view());
    assert!(diff < 0.5, "SVT far from population P: {diff:.3}");
}

#[test]
fn bootstrap_selects_r_one_on_the_dense_design() {
    // n = 600 at d = n^(2/3): comfortably inside the consistency regime
    let config = eigenspace_config(600, DensitySchedule::NTwoThirds, 2025);
    let pop = Population::new(&config).expect("population");
    let mut hits = 0;
    let trials = 10;
    for t in 0..trials {
        let rep = sim::build_scenario(&config, &pop, t).expect("replicate");
        let z = spectral::orthonormal_basis(&rep.x.view()).expect("basis");
        let report = rank::select_r_bootstrap(&rep.a, &z, 4, 50, 777 + t as u64, EigenDirection::Largest)
            .expect("bootstrap");
        assert_eq!(report.method, RankMethod::Bootstrap);
        assert!(report.delta.is_some());
        if report.r_hat == 1 {
            hits += 1;
        }
    }
    assert!(hits >= 8, "bootstrap found r = 1 in only {hits}/{trials} trials");
}

#[test]
fn bootstrap_is_deterministic_in_the_seed() {
    let config = eigenspace_config(200, DensitySchedule::NTwoThirds, 31);
    let pop = Population::new(&config).expect("population");
    let rep = sim::build_scenario(&config, &pop, 0).expect("replicate");
    let z = spectral::orthonormal_basis(&rep.x.view()).expect("basis");
    let a = rank::select_r_bootstrap(&rep.a, &z, 4, 20, 5, EigenDirection::Largest).expect("run 1");
    let b = rank::select_r_bootstrap(&rep.a, &z, 4, 20, 5, EigenDirection::Largest).expect("run 2");
    assert_eq!(a.r_hat, b.r_hat);
    assert_eq!(a.delta, b.delta);
    assert_eq!(a.sigma_hat, b.sigma_hat);
}

#[test]
fn auto_rank_modes_flow_through_fit() {
    let config = eigenspace_config(400, DensitySchedule::NTwoThirds, 43);
    let pop = Population::new(&config).expect("population");
    let rep = sim::build_scenario(&config, &pop, 0).expect("replicate");
    let est = sim::method_estimate(Method::Sp, &rep.a, &pop.communities).expect("estimate");

    let mut fc = FitConfig::new(4);
    fc.r_mode = RMode::AutoBootstrap;
    fc.bootstrap_reps = 25;
    fc.seed = 7;
    let fit = estimator::fit(&rep.x.view(), &rep.y.view(), &est, &fc).expect("bootstrap fit");
    let report = fit.rank_report.as_ref().expect("rank report present");
    assert_eq!(report.method, RankMethod::Bootstrap);
    assert_eq!(fit.r_used, report.r_hat);
    assert_eq!(fit.r_used, 1, "planted intersection dimension is 1");

    let mut fc = FitConfig::new(4);
    fc.r_mode = RMode::AutoThreshold;
    let fit = estimator::fit(&rep.x.view(), &rep.y.view(), &est, &fc).expect("threshold fit");
    let report = fit.rank_report.as_ref().expect("rank report present");
    assert_eq!(report.method, RankMethod::Threshold);
    assert_eq!(fit.r_used, report.r_hat);
    assert_eq!(fit.r_used, 1);
}

#[test]
fn svt_handles_empty_graph_gracefully() {
    let a = network::AdjacencyMatrix::new(Array2::zeros((20, 20))).expect("empty graph");
    let p_star = rank::svt_estimate(&a, 3, 0.0).expect("svt on empty graph");
    assert!(p_star.matrix().iter().all(|&v| v == 0.0));
}

#[test]
fn bootstrap_replicates_use_distinct_streams() {
    // two different seeds should (generically) give different deltas
    let config = eigenspace_config(200, DensitySchedule::SqrtN, 59);
    let pop = Population::new(&config).expect("population");
    let rep = sim::build_scenario(&config, &pop, 0).expect("replicate");
    let z = spectral::orthonormal_basis(&rep.x.view()).expect("basis");
    let a = rank::select_r_bootstrap(&rep.a, &z, 4, 20, 1, EigenDirection::Largest).expect("seed 1");
    let b = rank::select_r_bootstrap(&rep.a, &z, 4, 20, 2, EigenDirection::Largest).expect("seed 2");
    assert_ne!(a.delta, b.delta);
    let _ = rng::derive(1, &[rng::tag::BOOTSTRAP]);
}
