//! Shared fixtures for the benchmarks.

use mobilis_core::fit::{ExponentialModel, TruncatedPowerLawModel};
use mobilis_core::generate::{write_population_csv, Arena, GeneratorConfig, OutputOrder, StepSampler, Towers};
use mobilis_core::{ClosedRange, ObservationWindow};

/// Default synthetic population of `n` subscribers over twelve days.
pub fn population(n: u64, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_subscribers: n,
        window: ObservationWindow::default(),
        waiting_model: ExponentialModel::new(0.01, ClosedRange { lo: 15.0, hi: 1440.0 }).expect("valid model"),
        step_model: step_model(),
        arena: Arena::new(8e4, 8e4).expect("valid arena"),
        towers: Towers::None,
        seed,
        order: OutputOrder::Chunked,
        diurnal: None,
    }
}

pub fn step_model() -> TruncatedPowerLawModel {
    TruncatedPowerLawModel::new(1.75, 1e4, 0.0, ClosedRange { lo: 20.0, hi: 72295.15 }).expect("valid model")
}

/// Canonical CSV bytes of [`population`].
pub fn population_csv(n: u64, seed: u64) -> Vec<u8> {
    let mut out = Vec::new();
    write_population_csv(&population(n, seed), &mut out).expect("in-memory write");
    out
}

/// `n` step lengths drawn from [`step_model`].
pub fn step_samples(n: usize, seed: u64) -> Vec<f64> {
    use rand::SeedableRng;
    let sampler = StepSampler::new(&step_model());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| mobilis_core::generate::sample_step(&sampler, &mut rng)).collect()
}
