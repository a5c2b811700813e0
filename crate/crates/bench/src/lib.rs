//! Shared inputs for the benchmarks.

use pcmod::{CouplerParams, Protocol};

/// Deterministic protocol with `segments` segments of varied phase and length.
pub fn sample_protocol(segments: usize) -> Protocol {
    let pairs: Vec<(f64, f64)> = (0..segments)
        .map(|k| {
            let k = k as f64;
            ((1.3 * k).rem_euclid(std::f64::consts::TAU), 0.2 + 0.07 * k)
        })
        .collect();
    Protocol::from_pairs(&pairs).expect("durations are positive")
}

pub fn params(ratio: f64) -> CouplerParams {
    CouplerParams::from_ratio(ratio).expect("finite ratio")
}
