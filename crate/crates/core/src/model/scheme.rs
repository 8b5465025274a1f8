use super::Level;

/// Polarisation of an absorbed photon on a `lower → upper` transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    Pi,
    SigmaPlus,
    SigmaMinus,
}

impl Polarization {
    pub fn of(lower: Level, upper: Level) -> Option<Polarization> {
        if lower.is_excited() || !upper.is_excited() {
            return None;
        }
        match upper.m() - lower.m() {
            0 => Some(Polarization::Pi),
            1 => Some(Polarization::SigmaPlus),
            -1 => Some(Polarization::SigmaMinus),
            _ => None,
        }
    }

    pub fn is_sigma(self) -> bool {
        !matches!(self, Polarization::Pi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub lower: Level,
    pub upper: Level,
    pub polarization: Polarization,
    /// Relative dipole weight; couplings and decay amplitudes scale with it.
    pub weight: f64,
}

/// Transition table of the simplified level scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelScheme {
    transitions: Vec<Transition>,
    /// Whether the `|g_∓⟩⟨e_0|` σ transitions couple to the H mode.
    pub sigma_h_includes_e0: bool,
}

impl LevelScheme {
    /// All π and σ transitions with unit weight; σ_H includes the `|g_∓⟩⟨e_0|` terms.
    pub fn simplified() -> Self {
        Self::with_sigma_weights(1.0, 1.0)
    }

    /// σ_H restricted to `|g_0⟩⟨e_+| + |g_0⟩⟨e_−|`.
    pub fn sigma_h_g0_only() -> Self {
        let mut s = Self::simplified();
        s.sigma_h_includes_e0 = false;
        s
    }

    /// Unit π weights; `w_g0` on the `g_0 ↔ e_±` σ lines and `w_e0` on `g_∓ ↔ e_0`.
    pub fn with_sigma_weights(w_g0: f64, w_e0: f64) -> Self {
        let mut transitions = Vec::new();
        for m in -1..=1 {
            transitions.push(Transition {
                lower: Level::ground(m),
                upper: Level::excited(m),
                polarization: Polarization::Pi,
                weight: 1.0,
            });
        }
        for (lower, upper, w) in [
            (Level::GZero, Level::EPlus, w_g0),
            (Level::GZero, Level::EMinus, w_g0),
            (Level::GMinus, Level::EZero, w_e0),
            (Level::GPlus, Level::EZero, w_e0),
        ] {
            transitions.push(Transition {
                lower,
                upper,
                polarization: Polarization::of(lower, upper).expect("σ pair"),
                weight: w,
            });
        }
        LevelScheme { transitions, sigma_h_includes_e0: true }
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn weight(&self, lower: Level, upper: Level) -> f64 {
        self.transitions.iter().find(|t| t.lower == lower && t.upper == upper).map_or(0.0, |t| t.weight)
    }

    pub fn set_weight(&mut self, lower: Level, upper: Level, weight: f64) {
        if let Some(t) = self.transitions.iter_mut().find(|t| t.lower == lower && t.upper == upper) {
            t.weight = weight;
        }
    }

    pub fn pi_transitions(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(|t| t.polarization == Polarization::Pi)
    }

    /// σ transitions that couple to the H cavity mode.
    pub fn sigma_h_transitions(&self) -> impl Iterator<Item = &Transition> {
        self.transitions
            .iter()
            .filter(move |t| t.polarization.is_sigma() && (self.sigma_h_includes_e0 || t.lower == Level::GZero))
    }
}

impl Default for LevelScheme {
    fn default() -> Self {
        Self::simplified()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_rules() {
        let s = LevelScheme::simplified();
        for t in s.transitions() {
            let dm = t.upper.m() - t.lower.m();
            match t.polarization {
                Polarization::Pi => assert_eq!(dm, 0),
                Polarization::SigmaPlus => assert_eq!(dm, 1),
                Polarization::SigmaMinus => assert_eq!(dm, -1),
            }
        }
        assert_eq!(s.pi_transitions().count(), 3);
        assert_eq!(s.sigma_h_transitions().count(), 4);
    }

    #[test]
    fn restricted_sigma_h() {
        let s = LevelScheme::sigma_h_g0_only();
        let lines: Vec<_> = s.sigma_h_transitions().map(|t| (t.lower, t.upper)).collect();
        assert_eq!(lines, vec![(Level::GZero, Level::EPlus), (Level::GZero, Level::EMinus)]);
    }

    #[test]
    fn polarization_rejects_non_dipole_pairs() {
        assert_eq!(Polarization::of(Level::GMinus, Level::EPlus), None);
        assert_eq!(Polarization::of(Level::EZero, Level::GZero), None);
    }
}
