//! Simulation and analysis of conditional quantum beats in a two-mode cavity
//! QED system with drive-gating feedback.
//!
//! The crate is organised along the measurement chain:
//!
//! - [`model`]: level scheme, physical parameters, Hamiltonian and jump operators.
//! - [`analytic`]: closed-form coherence, light-shift and decoherence predictions.
//! - [`engine`]: master-equation g²(τ) and Monte-Carlo quantum trajectories with
//!   the click-triggered feedback controller.
//! - [`clickstream`]: time-tagged event records, the missed-trigger filter and the
//!   start–stop correlator.
//! - [`analysis`]: envelope removal, shift/scale matching and width-sweep regressions.
//! - [`config`]: the sectioned run configuration shared by the command-line tool.

pub mod analysis;
pub mod analytic;
pub mod clickstream;
pub mod config;
pub mod engine;
mod error;
pub(crate) mod linalg;
pub mod model;
pub mod units;

pub use error::{Error, Result};

pub use analysis::{BeatFit, Curve, RegressionResult};
pub use analytic::{CoherenceKind, CoherencePrediction, GroundSuperposition};
pub use clickstream::{Channel, ClickStream, CorrelationHistogram, Event, Origin};
pub use engine::{DetectionConfig, G2Curve, PulseProtocol};
pub use model::{Branching, Level, LevelScheme, SystemOperators, SystemParams};

pub use num_complex::Complex64;
