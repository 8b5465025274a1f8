//! The simplified three-ground / three-excited Zeeman level scheme coupled to
//! two orthogonally polarised cavity modes.
//!
//! The vertical (V) mode is driven on the π transitions; the horizontal (H)
//! mode collects σ emission and is the detected mode. Everything is written in
//! the frame rotating at the drive frequency, with the V mode displaced by its
//! classical coherent amplitude `alpha`, so the drive reaches the atom as
//! `g·alpha·(σ_π + σ_π†)` and the V-mode Fock space only has to hold the
//! fluctuations radiated by the atom.

mod operators;
mod scheme;

pub use operators::{build_operators, Basis, JumpChannel, JumpOperator, SystemOperators};
pub use scheme::{LevelScheme, Polarization, Transition};

use crate::error::{Error, Result};
use crate::units::mhz_to_rad;

/// Atomic sublevels, ground `g_m` and excited `e_m` with `m ∈ {−1, 0, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    GMinus,
    GZero,
    GPlus,
    EMinus,
    EZero,
    EPlus,
}

impl Level {
    pub const ALL: [Level; 6] = [Level::GMinus, Level::GZero, Level::GPlus, Level::EMinus, Level::EZero, Level::EPlus];
    pub const GROUND: [Level; 3] = [Level::GMinus, Level::GZero, Level::GPlus];
    pub const EXCITED: [Level; 3] = [Level::EMinus, Level::EZero, Level::EPlus];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Magnetic quantum number.
    pub fn m(self) -> i32 {
        match self {
            Level::GMinus | Level::EMinus => -1,
            Level::GZero | Level::EZero => 0,
            Level::GPlus | Level::EPlus => 1,
        }
    }

    pub fn is_excited(self) -> bool {
        matches!(self, Level::EMinus | Level::EZero | Level::EPlus)
    }

    pub fn ground(m: i32) -> Level {
        match m {
            -1 => Level::GMinus,
            0 => Level::GZero,
            1 => Level::GPlus,
            _ => panic!("no ground sublevel with m = {m}"),
        }
    }

    pub fn excited(m: i32) -> Level {
        match m {
            -1 => Level::EMinus,
            0 => Level::EZero,
            1 => Level::EPlus,
            _ => panic!("no excited sublevel with m = {m}"),
        }
    }
}

/// Relative weight of π and σ free-space decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branching {
    pub pi: f64,
    pub sigma: f64,
}

impl Branching {
    /// Free-space decay only through π (Rayleigh) channels; σ light reaches the
    /// detector only through the H cavity mode.
    pub const PI_ONLY: Branching = Branching { pi: 1.0, sigma: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.pi >= 0.0 && self.sigma >= 0.0) {
            return Err(Error::param("branching", "weights must be non-negative"));
        }
        if ((self.pi + self.sigma) - 1.0).abs() > 1e-9 {
            return Err(Error::param("branching", format!("weights must sum to 1 (got {})", self.pi + self.sigma)));
        }
        Ok(())
    }
}

impl Default for Branching {
    fn default() -> Self {
        Branching::PI_ONLY
    }
}

/// Physical parameters. Rates and detunings are angular frequencies in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Atom–cavity dipole coupling.
    pub g: f64,
    /// Cavity field decay rate, per mode.
    pub kappa: f64,
    /// Excited-state population decay rate into free space.
    pub gamma: f64,
    /// Ground Zeeman splitting: `g_m` sits at `m·delta_g`.
    pub delta_g: f64,
    /// Excited Zeeman splitting: `e_m` sits at `m·delta_e − delta_drive`.
    pub delta_e: f64,
    /// Drive detuning from the `g_0 → e_0` transition.
    pub delta_drive: f64,
    /// σ-transition detuning used by the analytic model.
    pub delta_eff: f64,
    /// Intracavity coherent amplitude of the driven mode; `alpha²` is its mean photon number.
    pub alpha: f64,
    /// Local-oscillator amplitude, in units of the H-mode field amplitude.
    pub epsilon: f64,
    pub n_max_v: usize,
    pub n_max_h: usize,
    pub branching: Branching,
    /// Whether the intracavity drive amplitude follows gate edges through the
    /// cavity field response (rate `kappa`) rather than switching instantly.
    pub cavity_filtered_drive: bool,
}

impl SystemParams {
    /// Rates from the experiment (g/2π = 1.2 MHz, κ/2π = 3 MHz, γ/2π = 6 MHz),
    /// one photon in the driven mode, ε = 0.1, and Zeeman splittings giving a
    /// σ detuning of 2π·0.5 MHz.
    pub fn experiment_defaults() -> Self {
        SystemParams {
            g: mhz_to_rad(1.2),
            kappa: mhz_to_rad(3.0),
            gamma: mhz_to_rad(6.0),
            delta_g: mhz_to_rad(2.5),
            delta_e: mhz_to_rad(3.0),
            delta_drive: 0.0,
            delta_eff: mhz_to_rad(0.5),
            alpha: 1.0,
            epsilon: 0.1,
            n_max_v: 2,
            n_max_h: 2,
            branching: Branching::PI_ONLY,
            cavity_filtered_drive: true,
        }
    }

    /// Mean photon number `|alpha|²` in the driven mode.
    pub fn photon_number(&self) -> f64 {
        self.alpha * self.alpha
    }

    /// Detuning of the `g_+ → e_+` π transition from the drive, `Δ_e − Δ_g − δ`.
    /// With `delta_drive = 0` this is the Δ of the analytic model's `γ/2 ± iΔ` factors.
    pub fn level_detuning(&self) -> f64 {
        self.delta_e - self.delta_g - self.delta_drive
    }

    /// Copy with `delta_eff` set to [`Self::level_detuning`].
    pub fn with_matched_detuning(mut self) -> Self {
        self.delta_eff = self.level_detuning();
        self
    }

    pub fn with_photon_number(mut self, n: f64) -> Self {
        self.alpha = n.max(0.0).sqrt();
        self
    }

    pub fn dimension(&self) -> usize {
        6 * (self.n_max_v + 1) * (self.n_max_h + 1)
    }

    /// Full invariant check.
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("g", self.g), ("kappa", self.kappa), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(key, format!("must be strictly positive (got {v})")));
            }
        }
        for (key, v) in [
            ("delta_g", self.delta_g),
            ("delta_e", self.delta_e),
            ("delta_drive", self.delta_drive),
            ("delta_eff", self.delta_eff),
            ("alpha", self.alpha),
            ("epsilon", self.epsilon),
        ] {
            if !v.is_finite() {
                return Err(Error::param(key, "must be finite"));
            }
        }
        if self.delta_g < 0.0 {
            return Err(Error::param("delta_g", "must be non-negative"));
        }
        if self.delta_e <= self.delta_g {
            return Err(Error::param("delta_e", format!("must exceed delta_g ({} ≤ {})", self.delta_e, self.delta_g)));
        }
        if self.alpha < 0.0 {
            return Err(Error::param("alpha", "must be non-negative"));
        }
        if self.epsilon < 0.0 {
            return Err(Error::param("epsilon", "must be non-negative"));
        }
        if self.n_max_v < 2 {
            return Err(Error::TruncationTooSmall { mode: "v", n_max: self.n_max_v });
        }
        if self.n_max_h < 2 {
            return Err(Error::TruncationTooSmall { mode: "h", n_max: self.n_max_h });
        }
        self.branching.validate()
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams::experiment_defaults()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_defaults_are_valid() {
        let p = SystemParams::experiment_defaults();
        p.validate().unwrap();
        assert_eq!(p.dimension(), 54);
        assert!((p.level_detuning() - p.delta_eff).abs() < 1e-6);
    }

    #[test]
    fn excited_splitting_must_exceed_ground() {
        let mut p = SystemParams::experiment_defaults();
        p.delta_e = p.delta_g;
        assert!(matches!(p.validate(), Err(Error::InvalidParameter { key: "delta_e", .. })));
    }

    #[test]
    fn branching_must_be_normalised() {
        let mut p = SystemParams::experiment_defaults();
        p.branching = Branching { pi: 0.7, sigma: 0.7 };
        assert!(p.validate().is_err());
        p.branching = Branching { pi: -0.1, sigma: 1.1 };
        assert!(p.validate().is_err());
    }

    #[test]
    fn truncation_floor() {
        let mut p = SystemParams::experiment_defaults();
        p.n_max_h = 1;
        assert!(matches!(p.validate(), Err(Error::TruncationTooSmall { mode: "h", .. })));
    }

    #[test]
    fn levels_roundtrip() {
        for l in Level::ALL {
            let back = if l.is_excited() { Level::excited(l.m()) } else { Level::ground(l.m()) };
            assert_eq!(back, l);
        }
    }
}
