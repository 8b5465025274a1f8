//! Closed-form model of the ground-state coherence under Poisson-distributed
//! Rayleigh jumps: AC Stark shift, jump-induced phase drift and diffusion, and
//! the pulse-protocol predictions derived from them.
//!
//! All functions read `delta_eff` as the σ-transition detuning Δ.

use num_complex::Complex64 as C64;

use crate::engine::PulseProtocol;
use crate::error::{Error, Result};
use crate::model::SystemParams;

/// Which ground-state coherence carries the observed beat.
///
/// Without a local oscillator the conditional intensity beats at the
/// `(g+, g−)` coherence, which precesses at `2(Δ_g + Δ_light)` and dephases at
/// `2Γ_decoh`. A strong local oscillator selects `(g±, g0)` at
/// `Δ_g + Δ_light`, dephasing at `Γ_decoh`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoherenceKind {
    PlusMinus,
    #[default]
    PlusZero,
}

impl CoherenceKind {
    /// Multiple of Δ_g, Δ_light and Γ_decoh seen by this coherence.
    pub fn order(self) -> f64 {
        match self {
            CoherenceKind::PlusMinus => 2.0,
            CoherenceKind::PlusZero => 1.0,
        }
    }
}

/// Ground-state amplitudes `(g−, g0, g+)` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundSuperposition {
    pub minus: C64,
    pub zero: C64,
    pub plus: C64,
    pub t: f64,
}

impl GroundSuperposition {
    /// State heralded by a first detection: `C0/√2 (e^{iφt}|g−⟩ + e^{−iφt}|g+⟩) + C1|g0⟩`
    /// with `φ = Δ_g + Δ_AC`. `C0` and `C1` are normalised jointly.
    pub fn prepare(c0: C64, c1: C64, t: f64, params: &SystemParams) -> Result<Self> {
        let norm = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::param("c0/c1", "amplitudes must not both vanish"));
        }
        let (c0, c1) = (c0 / norm, c1 / norm);
        let phi = (params.delta_g + ac_stark_shift(params)) * t;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Ok(GroundSuperposition {
            minus: c0 * h * C64::from_polar(1.0, phi),
            zero: c1,
            plus: c0 * h * C64::from_polar(1.0, -phi),
            t,
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.minus.norm_sqr() + self.zero.norm_sqr() + self.plus.norm_sqr()
    }

    /// `⟨g+|ρ|g−⟩` of the pure state.
    pub fn rho_plus_minus(&self) -> C64 {
        self.plus * self.minus.conj()
    }

    /// `⟨g+|ρ|g0⟩` of the pure state.
    pub fn rho_plus_zero(&self) -> C64 {
        self.plus * self.zero.conj()
    }

    /// `⟨g−|ρ|g0⟩` of the pure state.
    pub fn rho_minus_zero(&self) -> C64 {
        self.minus * self.zero.conj()
    }
}

/// Frequency shifts and rates of the jump model, all in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightShifts {
    pub jump_rate: f64,
    pub delta_ac: f64,
    pub delta_jump: f64,
    pub delta_light: f64,
    pub gamma_decoh: f64,
}

impl LightShifts {
    pub fn of(params: &SystemParams) -> Self {
        LightShifts {
            jump_rate: jump_rate(params),
            delta_ac: ac_stark_shift(params),
            delta_jump: jump_shift(params),
            delta_light: light_shift(params),
            gamma_decoh: decoherence_rate(params),
        }
    }
}

/// Ground-state coherences averaged over the number of Rayleigh jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherencePrediction {
    pub t: f64,
    /// Exact Poisson sum over normalised n-jump states.
    pub rho_plus_minus: C64,
    pub rho_plus_zero: C64,
    pub rho_minus_zero: C64,
    /// First-order closed forms.
    pub rho_plus_minus_closed: C64,
    pub rho_plus_zero_closed: C64,
    pub rho_minus_zero_closed: C64,
    pub delta_ac: f64,
    pub delta_jump: f64,
    pub delta_light: f64,
    pub gamma_decoh: f64,
    /// Number of Poisson terms summed and the bound on the omitted mass.
    pub n_terms: usize,
    pub tail_bound: f64,
}

fn half_gamma(params: &SystemParams) -> f64 {
    params.gamma / 2.0
}

/// Δ_AC = −g²|α|²Δ / ((γ/2)² + Δ²), the shift of `g+` (and minus that of `g−`).
pub fn ac_stark_shift(params: &SystemParams) -> f64 {
    let d = params.delta_eff;
    let hg = half_gamma(params);
    -params.g * params.g * params.photon_number() * d / (hg * hg + d * d)
}

/// Γ = 2g²|α|² / (γ/2).
pub fn jump_rate(params: &SystemParams) -> f64 {
    2.0 * params.g * params.g * params.photon_number() / half_gamma(params)
}

/// Δ_jump = 8g²|α|²Δ / γ².
pub fn jump_shift(params: &SystemParams) -> f64 {
    8.0 * params.g * params.g * params.photon_number() * params.delta_eff / (params.gamma * params.gamma)
}

/// Γ_decoh = 2g²|α|²Δ² / (γ/2)³.
pub fn decoherence_rate(params: &SystemParams) -> f64 {
    let hg = half_gamma(params);
    2.0 * params.g * params.g * params.photon_number() * params.delta_eff * params.delta_eff / (hg * hg * hg)
}

/// Δ_light = Δ_AC + Δ_jump.
pub fn light_shift(params: &SystemParams) -> f64 {
    ac_stark_shift(params) + jump_shift(params)
}

/// Apply `n` Rayleigh jumps: each multiplies the `g∓` amplitudes by
/// `(γ/2)(γ/2 ± iΔ)/((γ/2)² + Δ²)` relative to `g0`, then the state is renormalised.
pub fn n_jump_state(psi: &GroundSuperposition, n: u32, params: &SystemParams) -> GroundSuperposition {
    if n == 0 {
        return *psi;
    }
    let hg = half_gamma(params);
    let d = params.delta_eff;
    let u = hg / (hg * hg + d * d).sqrt();
    let theta = d.atan2(hg);
    let amp = u.powi(n as i32);
    let nf = n as f64;
    let minus = psi.minus * C64::from_polar(amp, nf * theta);
    let plus = psi.plus * C64::from_polar(amp, -nf * theta);
    let zero = psi.zero;
    let norm = (minus.norm_sqr() + zero.norm_sqr() + plus.norm_sqr()).sqrt();
    GroundSuperposition { minus: minus / norm, zero: zero / norm, plus: plus / norm, t: psi.t }
}

/// Largest number of Poisson terms [`averaged_coherences`] will sum.
pub const MAX_POISSON_TERMS: usize = 200_000;
/// Bound on the omitted Poisson mass.
pub const POISSON_TAIL: f64 = 1e-12;

/// Coherences after free evolution for time `t` from `psi0`, averaged over a
/// Poisson number of jumps with mean `Γt`. Returns both the exact sum over
/// normalised n-jump states and the first-order closed forms.
pub fn averaged_coherences(psi0: &GroundSuperposition, t: f64, params: &SystemParams) -> Result<CoherencePrediction> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("t", "must be non-negative"));
    }
    let shifts = LightShifts::of(params);
    let lambda = shifts.jump_rate * t;
    let phi = (params.delta_g + shifts.delta_ac) * t;
    let free_minus = C64::from_polar(1.0, phi);
    let free_plus = C64::from_polar(1.0, -phi);

    let hg = half_gamma(params);
    let d = params.delta_eff;
    let u2 = hg * hg / (hg * hg + d * d);
    let step = C64::from_polar(u2.sqrt(), -d.atan2(hg));

    let pm = psi0.minus.norm_sqr() + psi0.plus.norm_sqr();
    let p0 = psi0.zero.norm_sqr();
    let (c_pm, c_p0, c_m0) = (psi0.rho_plus_minus(), psi0.rho_plus_zero(), psi0.rho_minus_zero());

    let mut sum_pm = C64::new(0.0, 0.0);
    let mut sum_p0 = C64::new(0.0, 0.0);
    let mut sum_m0 = C64::new(0.0, 0.0);
    let mut log_p = -lambda;
    let ln_lambda = lambda.ln();
    // (u e^{−iθ})^n and u^{2n}, advanced incrementally.
    let mut factor = C64::new(1.0, 0.0);
    let mut u2n = 1.0;
    let mut n = 0usize;
    let tail;
    loop {
        let p = log_p.exp();
        let norm = pm * u2n + p0;
        if norm > 0.0 {
            let w = p / norm;
            // g+ carries factor^n, g− its conjugate.
            sum_pm += c_pm * factor * factor * w;
            sum_p0 += c_p0 * factor * w;
            sum_m0 += c_m0 * factor.conj() * w;
        }
        if lambda == 0.0 {
            tail = 0.0;
            break;
        }
        let next = n + 1;
        let log_next = log_p + ln_lambda - (next as f64).ln();
        if (next as f64 + 1.0) > lambda {
            let ratio = lambda / (next as f64 + 1.0);
            let bound = log_next.exp() / (1.0 - ratio);
            if bound < POISSON_TAIL {
                tail = bound;
                break;
            }
        }
        if next >= MAX_POISSON_TERMS {
            return Err(Error::NonConvergentSum { n_cut: MAX_POISSON_TERMS, tail: log_next.exp() });
        }
        n = next;
        log_p = log_next;
        factor *= step;
        u2n *= u2;
    }

    let order_decay =
        |k: f64, sign: f64| C64::new(-k * shifts.gamma_decoh * t, -sign * k * shifts.delta_jump * t).exp();
    Ok(CoherencePrediction {
        t,
        rho_plus_minus: sum_pm * free_plus * free_minus.conj(),
        rho_plus_zero: sum_p0 * free_plus,
        rho_minus_zero: sum_m0 * free_minus,
        rho_plus_minus_closed: c_pm * free_plus * free_minus.conj() * order_decay(2.0, 1.0),
        rho_plus_zero_closed: c_p0 * free_plus * order_decay(1.0, 1.0),
        rho_minus_zero_closed: c_m0 * free_minus * order_decay(1.0, -1.0),
        delta_ac: shifts.delta_ac,
        delta_jump: shifts.delta_jump,
        delta_light: shifts.delta_light,
        gamma_decoh: shifts.gamma_decoh,
        n_terms: n + 1,
        tail_bound: tail,
    })
}

/// Exact decay rate and frequency shift of the `(g+, g−)` coherence under the
/// Poisson jump model with `C1 = 0`: `Γ(1 − e^{−2iθ})` with `tan θ = 2Δ/γ`.
/// Returns `(decay, shift)` in 1/s and rad/s.
pub fn plus_minus_exact_rates(params: &SystemParams) -> (f64, f64) {
    let theta = params.delta_eff.atan2(half_gamma(params));
    let gamma = jump_rate(params);
    (gamma * (1.0 - (2.0 * theta).cos()), gamma * (2.0 * theta).sin())
}

/// Beat frequency of the selected coherence, `k(Δ_g + Δ_light)`.
pub fn beat_frequency(params: &SystemParams, kind: CoherenceKind) -> f64 {
    kind.order() * (params.delta_g + light_shift(params))
}

/// Phase gained by the fed-back beat relative to continuous drive,
/// `k Δ_light (1 − r²) (τ_f − τ_0)`. The light shift scales with drive
/// intensity, so an attenuated rather than dark window removes `1 − r²` of it.
pub fn predict_phase_shift(protocol: &PulseProtocol, params: &SystemParams, kind: CoherenceKind) -> f64 {
    let r = protocol.attenuation;
    kind.order() * light_shift(params) * (1.0 - r * r) * protocol.width
}

/// Amplitude gained by the fed-back beat, `e^{k Γ_decoh (1 − r²)(τ_f − τ_0)}`.
pub fn amplitude_recovery_scale(protocol: &PulseProtocol, params: &SystemParams, kind: CoherenceKind) -> f64 {
    let r = protocol.attenuation;
    (kind.order() * decoherence_rate(params) * (1.0 - r * r) * protocol.width).exp()
}

/// Additive-decay beat model `1 + e^{−(Γ_other + kΓ_decoh)t} cos(ωt)` with
/// `ω = k(Δ_g + Δ_light)`.
pub fn predict_beat_envelope(t: f64, params: &SystemParams, gamma_other: f64, kind: CoherenceKind) -> f64 {
    let k = kind.order();
    let decay = (gamma_other + k * decoherence_rate(params)) * t;
    1.0 + (-decay).exp() * (beat_frequency(params, kind) * t).cos()
}
