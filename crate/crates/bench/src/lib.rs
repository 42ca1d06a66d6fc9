//! Shared helpers for the criterion benches.

use netreg_core::sim::{
    DensitySchedule, DesignKind, EffectKind, Method, NetworkKind, ScenarioConfig,
};

/// A small fixed scenario used by every benchmark.
pub fn bench_scenario(n: usize) -> ScenarioConfig {
    ScenarioConfig {
        n,
        p: 4,
        k: 4,
        network: NetworkKind::Sbm,
        density: DensitySchedule::SqrtN,
        design: DesignKind::Eigenspace,
        effects: EffectKind::Eigenspace { gamma: vec![0.0, 1.0, 1.0, 1.0] },
        noise_sigma2: 1.0,
        alpha_scale: None,
        reps: 1,
        seed: 11,
        methods: vec![Method::Sp],
        r_mode: netreg_core::estimator::RMode::Fixed(1),
        alpha_level: 0.05,
    }
}
