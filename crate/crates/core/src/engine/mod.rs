//! Open-system propagation: the deterministic master equation used for
//! conditional g²(τ), and the quantum-trajectory unraveling that emits click
//! streams under the click-triggered drive gate.

mod drive;
mod master;
mod trajectory;

pub use drive::DriveProfile;
pub use master::{conditional_g2, DensityMatrix, G2Curve, G2Solver, MasterEquation};
pub use trajectory::{
    apply_trigger_electronics, run_trajectories, run_trajectories_with_seeds, GateRecord, JumpCounts, TrajectoryRun,
    TrajectorySimulator,
};

use num_complex::Complex64 as C64;

use crate::clickstream::Channel;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::model::{SystemOperators, SystemParams};

/// Click-triggered drive gate.
///
/// A trigger at time `t` is accepted if the delay generator is idle; it then
/// emits a gate copy at `t + trigger_delay`, attenuates the drive to
/// `attenuation` of full amplitude over
/// `[t + trigger_delay + off_start, t + trigger_delay + off_start + width]`,
/// and ignores further triggers until `t + rearm_deadtime`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseProtocol {
    pub trigger_delay: f64,
    pub off_start: f64,
    pub width: f64,
    pub attenuation: f64,
    pub rearm_deadtime: f64,
}

impl Default for PulseProtocol {
    /// 325 ns electronic delay, no gate, 1 μs re-arm time.
    fn default() -> Self {
        PulseProtocol { trigger_delay: 325e-9, off_start: 0.0, width: 0.0, attenuation: 0.0, rearm_deadtime: 1e-6 }
    }
}

impl PulseProtocol {
    /// No gating: triggers still produce gate copies, the drive never changes.
    pub fn continuous() -> Self {
        PulseProtocol::default()
    }

    /// Gate window relative to the trigger.
    pub fn window(&self) -> (f64, f64) {
        let start = self.trigger_delay + self.off_start;
        (start, start + self.width)
    }

    pub fn gates_drive(&self) -> bool {
        self.width > 0.0 && self.attenuation != 1.0
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("trigger_delay", self.trigger_delay),
            ("off_start", self.off_start),
            ("width", self.width),
            ("rearm_deadtime", self.rearm_deadtime),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(key, format!("must be a non-negative time (got {v})")));
            }
        }
        if !(0.0..=1.0).contains(&self.attenuation) {
            return Err(Error::param("attenuation", format!("must lie in [0, 1] (got {})", self.attenuation)));
        }
        Ok(())
    }
}

/// Which operator a detector click applies to the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectedField {
    /// H-mode output `√(2κ)(a_H + ε)`.
    #[default]
    CavityOutput,
    /// Atomic lowering operator `σ_H + ε`, ignoring the cavity filter.
    AtomicSigmaH,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    /// Local-oscillator amplitude mixed into the detected field.
    pub epsilon: C64,
    pub field: DetectedField,
    /// Fraction of detected photons routed to APD A.
    pub split_a: f64,
    /// Overall detection efficiency of the H output.
    pub efficiency: f64,
    /// Uncorrelated background rate summed over both detectors, counts/s.
    pub background_cps: f64,
    /// Detector whose clicks trigger the gate and act as correlation starts.
    pub start_channel: Channel,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            epsilon: C64::new(0.1, 0.0),
            field: DetectedField::CavityOutput,
            split_a: 0.5,
            efficiency: 1.0,
            background_cps: 0.0,
            start_channel: Channel::ApdA,
        }
    }
}

impl DetectionConfig {
    /// Real local oscillator of amplitude `params.epsilon`.
    pub fn from_params(params: &SystemParams) -> Self {
        DetectionConfig { epsilon: C64::new(params.epsilon, 0.0), ..Self::default() }
    }

    pub fn stop_channel(&self) -> Channel {
        match self.start_channel {
            Channel::ApdA => Channel::ApdB,
            _ => Channel::ApdA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("split_a", self.split_a), ("efficiency", self.efficiency)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(key, format!("must lie in [0, 1] (got {v})")));
            }
        }
        if !(self.background_cps >= 0.0 && self.background_cps.is_finite()) {
            return Err(Error::param("background_cps", "must be a non-negative rate"));
        }
        if !(self.epsilon.re.is_finite() && self.epsilon.im.is_finite()) {
            return Err(Error::param("epsilon", "must be finite"));
        }
        if self.start_channel == Channel::GateCopy {
            return Err(Error::param("start_channel", "must be a detector channel"));
        }
        Ok(())
    }

    /// Detection operator without efficiency, used for g²: `√(2κ)(a_H + ε)` or `σ_H + ε`.
    pub(crate) fn operator(&self, ops: &SystemOperators, params: &SystemParams) -> SparseMatrix {
        let id = SparseMatrix::identity(ops.dim());
        match self.field {
            DetectedField::CavityOutput => {
                ops.a_h.add(&id.scale(self.epsilon)).scale(C64::new((2.0 * params.kappa).sqrt(), 0.0))
            }
            DetectedField::AtomicSigmaH => ops.sigma_h.add(&id.scale(self.epsilon)),
        }
    }
}

/// Local-oscillator amplitude produced by rotating a half-wave plate by
/// `theta` radians away from the drive polarisation, `sin(2θ)·⟨a_V⟩`.
pub fn lo_amplitude_from_hwp(theta: f64, mean_v_field: f64) -> f64 {
    (2.0 * theta).sin() * mean_v_field
}

/// Integrator step bound: `min(1/κ, 1/γ, 2π/ω)/50`, where ω bounds the fastest
/// coherent frequency (largest row sum of `|H|`).
pub(crate) fn max_step(params: &SystemParams, ops: &SystemOperators) -> f64 {
    let h = ops.static_part.add(&ops.drive);
    let omega =
        (0..h.dim()).map(|i| h.row(i).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max).max(ops.decay.max_abs());
    let mut bound = (1.0 / params.kappa).min(1.0 / params.gamma);
    if omega > 0.0 {
        bound = bound.min(2.0 * std::f64::consts::PI / omega);
    }
    bound / 50.0
}
