//! Shared inputs for the benchmarks in `benches/`.

use qbeat_core::clickstream::synthetic::poisson_stream;
use qbeat_core::{Channel, ClickStream, SystemParams};

/// Experiment parameters with matched detuning, as used by the presets.
pub fn experiment_params() -> SystemParams {
    SystemParams::experiment_defaults().with_matched_detuning()
}

/// Uncorrelated two-detector stream at `rate` counts/s per detector.
pub fn two_detector_stream(rate: f64, duration: f64, seed: u64) -> ClickStream {
    poisson_stream(&[(Channel::ApdA, rate), (Channel::ApdB, rate)], duration, seed)
}
