//! Inputs shared by the benchmarks in `benches/`.

use regbat_core::sim::{generate_trace, TWO_SECONDS};
use regbat_core::{RegulationTrace, Scenario};

/// Four weeks of 2-second set-points for a 1 MW battery.
pub const MONTH_STEPS: usize = 1_209_600;

pub fn month_scenario() -> Scenario {
    let mut s = Scenario::default();
    s.battery.interval = TWO_SECONDS;
    s
}

pub fn month_trace(seed: u64) -> RegulationTrace {
    generate_trace(seed, MONTH_STEPS, 1.0, TWO_SECONDS).unwrap()
}

/// Normalized SoC random walk of `n` samples.
pub fn walk(seed: u64, n: usize) -> Vec<f64> {
    let steps = generate_trace(seed, n, 1.0, 1.0).unwrap();
    let mut x = 0.5;
    steps
        .setpoints
        .iter()
        .map(|r| {
            x = (x + 0.05 * r).clamp(0.0, 1.0);
            x
        })
        .collect()
}
