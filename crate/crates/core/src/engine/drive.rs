/// Intracavity drive amplitude, as a fraction of its full value, following a
/// sequence of step changes in the drive target.
///
/// With cavity filtering the amplitude relaxes to each new target as
/// `e^{−κ(t − t_edge)}`; otherwise it follows the target instantly.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveProfile {
    /// Amplitude before the first edge (steady state).
    pub initial: f64,
    /// `(time, target)` pairs, sorted by time.
    pub edges: Vec<(f64, f64)>,
    pub kappa: f64,
    pub filtered: bool,
}

impl DriveProfile {
    pub fn constant(level: f64) -> Self {
        DriveProfile { initial: level, edges: Vec::new(), kappa: 1.0, filtered: false }
    }

    /// Full drive, attenuated to `attenuation` over `[start, end)`.
    pub fn gate(start: f64, end: f64, attenuation: f64, kappa: f64, filtered: bool) -> Self {
        let edges = if end > start { vec![(start, attenuation), (end, 1.0)] } else { Vec::new() };
        DriveProfile { initial: 1.0, edges, kappa, filtered }
    }

    /// Amplitude at time `t`.
    pub fn value(&self, t: f64) -> f64 {
        let mut v = self.initial;
        let mut last_t = f64::NEG_INFINITY;
        let mut target = self.initial;
        for &(te, tgt) in &self.edges {
            if te > t {
                break;
            }
            if self.filtered && last_t.is_finite() {
                v = target + (v - target) * (-self.kappa * (te - last_t)).exp();
            } else if !self.filtered {
                v = target;
            }
            last_t = te;
            target = tgt;
        }
        if !last_t.is_finite() {
            return self.initial;
        }
        if self.filtered {
            target + (v - target) * (-self.kappa * (t - last_t)).exp()
        } else {
            target
        }
    }

    /// Times at which the amplitude has a kink, for integrator step alignment.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.iter().map(|e| e.0)
    }
}
