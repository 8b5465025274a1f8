use num_complex::Complex64 as C64;

use super::{Level, LevelScheme, Polarization, SystemParams};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Product basis atom ⊗ Fock(V) ⊗ Fock(H), with the H photon number varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basis {
    /// Number of V-mode Fock states, `n_max_v + 1`.
    pub nv: usize,
    /// Number of H-mode Fock states, `n_max_h + 1`.
    pub nh: usize,
}

impl Basis {
    pub fn new(n_max_v: usize, n_max_h: usize) -> Self {
        Basis { nv: n_max_v + 1, nh: n_max_h + 1 }
    }

    pub fn dim(&self) -> usize {
        6 * self.nv * self.nh
    }

    pub fn index(&self, level: Level, n_v: usize, n_h: usize) -> usize {
        debug_assert!(n_v < self.nv && n_h < self.nh);
        level.index() * self.nv * self.nh + n_v * self.nh + n_h
    }

    pub fn decompose(&self, i: usize) -> (Level, usize, usize) {
        let block = self.nv * self.nh;
        (Level::ALL[i / block], (i % block) / self.nh, i % self.nh)
    }

    /// Lift the atomic operator `|to⟩⟨from|` to the full space.
    fn atomic(&self, to: Level, from: Level, amp: C64) -> Vec<(usize, usize, C64)> {
        let mut t = Vec::with_capacity(self.nv * self.nh);
        for n_v in 0..self.nv {
            for n_h in 0..self.nh {
                t.push((self.index(to, n_v, n_h), self.index(from, n_v, n_h), amp));
            }
        }
        t
    }

    /// V-mode annihilation operator.
    pub fn annihilate_v(&self) -> SparseMatrix {
        let mut t = Vec::new();
        for l in Level::ALL {
            for n_v in 1..self.nv {
                for n_h in 0..self.nh {
                    t.push((self.index(l, n_v - 1, n_h), self.index(l, n_v, n_h), C64::new((n_v as f64).sqrt(), 0.0)));
                }
            }
        }
        SparseMatrix::from_triplets(self.dim(), t)
    }

    /// H-mode annihilation operator.
    pub fn annihilate_h(&self) -> SparseMatrix {
        let mut t = Vec::new();
        for l in Level::ALL {
            for n_v in 0..self.nv {
                for n_h in 1..self.nh {
                    t.push((self.index(l, n_v, n_h - 1), self.index(l, n_v, n_h), C64::new((n_h as f64).sqrt(), 0.0)));
                }
            }
        }
        SparseMatrix::from_triplets(self.dim(), t)
    }

    /// Projector onto an atomic level (identity on both modes).
    pub fn projector(&self, level: Level) -> SparseMatrix {
        SparseMatrix::from_triplets(self.dim(), self.atomic(level, level, C64::new(1.0, 0.0)))
    }

    /// Atomic transition operator `|to⟩⟨from|` (identity on both modes).
    pub fn transition(&self, to: Level, from: Level) -> SparseMatrix {
        SparseMatrix::from_triplets(self.dim(), self.atomic(to, from, C64::new(1.0, 0.0)))
    }

    /// Number operator of the V mode.
    pub fn number_v(&self) -> SparseMatrix {
        let a = self.annihilate_v();
        a.adjoint().matmul(&a)
    }

    /// Number operator of the H mode.
    pub fn number_h(&self) -> SparseMatrix {
        let a = self.annihilate_h();
        a.adjoint().matmul(&a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JumpChannel {
    /// Decay of the V-mode fluctuation field.
    CavityV,
    /// Decay of the H mode; the detected channel.
    CavityH,
    /// Free-space π (Rayleigh) emission, coherent over the three π lines.
    FreeSpacePi,
    /// Free-space emission of a σ+ photon (`Δm = −1` on the atom).
    FreeSpaceSigmaPlus,
    /// Free-space emission of a σ− photon (`Δm = +1` on the atom).
    FreeSpaceSigmaMinus,
}

#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub channel: JumpChannel,
    pub op: SparseMatrix,
}

/// Hamiltonian pieces and collapse operators for one parameter set.
///
/// The full Hamiltonian at drive scale `s` is `static_part + s · drive`.
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub basis: Basis,
    /// Zeeman energies and both cavity couplings.
    pub static_part: SparseMatrix,
    /// Drive term `g·alpha·(σ_π + σ_π†)` at full amplitude.
    pub drive: SparseMatrix,
    pub drive_scale: f64,
    /// `static_part + drive_scale · drive`.
    pub hamiltonian: SparseMatrix,
    pub jumps: Vec<JumpOperator>,
    /// `½ Σ C†C`.
    pub decay: SparseMatrix,
    /// `H − i·decay`.
    pub h_eff: SparseMatrix,
    /// V-mode (fluctuation) annihilation operator.
    pub b_v: SparseMatrix,
    /// H-mode annihilation operator.
    pub a_h: SparseMatrix,
    /// Weighted σ_H lowering operator.
    pub sigma_h: SparseMatrix,
    /// Weighted σ_π lowering operator.
    pub sigma_pi: SparseMatrix,
}

impl SystemOperators {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Hamiltonian at another drive scale, sharing all other pieces.
    pub fn hamiltonian_at(&self, drive_scale: f64) -> SparseMatrix {
        self.static_part.add(&self.drive.scale(C64::new(drive_scale, 0.0)))
    }

    pub fn jump(&self, channel: JumpChannel) -> Option<&SparseMatrix> {
        self.jumps.iter().find(|j| j.channel == channel).map(|j| &j.op)
    }
}

fn atomic_energy(level: Level, p: &SystemParams) -> f64 {
    let m = level.m() as f64;
    if level.is_excited() {
        m * p.delta_e - p.delta_drive
    } else {
        m * p.delta_g
    }
}

/// Build the Hamiltonian and collapse operators in the frame rotating at the
/// drive frequency, with the drive attenuated to `drive_scale` of full amplitude.
pub fn build_operators(params: &SystemParams, scheme: &LevelScheme, drive_scale: f64) -> Result<SystemOperators> {
    if params.n_max_v < 1 {
        return Err(Error::TruncationTooSmall { mode: "v", n_max: params.n_max_v });
    }
    if params.n_max_h < 1 {
        return Err(Error::TruncationTooSmall { mode: "h", n_max: params.n_max_h });
    }
    params.branching.validate()?;
    if !(0.0..=1.0).contains(&drive_scale) {
        return Err(Error::param("drive_scale", format!("must lie in [0, 1] (got {drive_scale})")));
    }

    let basis = Basis::new(params.n_max_v, params.n_max_h);
    let dim = basis.dim();
    let c = |x: f64| C64::new(x, 0.0);

    let mut sigma_pi_t = Vec::new();
    for t in scheme.pi_transitions() {
        sigma_pi_t.extend(basis.atomic(t.lower, t.upper, c(t.weight)));
    }
    let sigma_pi = SparseMatrix::from_triplets(dim, sigma_pi_t);

    let mut sigma_h_t = Vec::new();
    for t in scheme.sigma_h_transitions() {
        sigma_h_t.extend(basis.atomic(t.lower, t.upper, c(t.weight)));
    }
    let sigma_h = SparseMatrix::from_triplets(dim, sigma_h_t);

    let b_v = basis.annihilate_v();
    let a_h = basis.annihilate_h();

    let energies = SparseMatrix::from_triplets(
        dim,
        (0..dim).map(|i| {
            let (level, _, _) = basis.decompose(i);
            (i, i, c(atomic_energy(level, params)))
        }),
    );
    let couple = |field: &SparseMatrix, sigma: &SparseMatrix| {
        let term = field.adjoint().matmul(sigma);
        term.add(&term.adjoint()).scale(c(params.g))
    };
    let static_part = energies.add(&couple(&b_v, &sigma_pi)).add(&couple(&a_h, &sigma_h));
    let drive = sigma_pi.add(&sigma_pi.adjoint()).scale(c(params.g * params.alpha));
    let hamiltonian = static_part.add(&drive.scale(c(drive_scale)));

    let mut jumps = vec![
        JumpOperator { channel: JumpChannel::CavityV, op: b_v.scale(c((2.0 * params.kappa).sqrt())) },
        JumpOperator { channel: JumpChannel::CavityH, op: a_h.scale(c((2.0 * params.kappa).sqrt())) },
    ];
    jumps.extend(free_space_jumps(params, scheme, &basis));

    let mut decay = SparseMatrix::zeros(dim);
    for j in &jumps {
        decay = decay.add(&j.op.adjoint().matmul(&j.op));
    }
    let decay = decay.scale(c(0.5));
    let h_eff = hamiltonian.add(&decay.scale(C64::new(0.0, -1.0)));

    Ok(SystemOperators {
        basis,
        static_part,
        drive,
        drive_scale,
        hamiltonian,
        jumps,
        decay,
        h_eff,
        b_v,
        a_h,
        sigma_h,
        sigma_pi,
    })
}

/// Free-space decay channels. Each excited level decays at total rate γ: a
/// fraction `branching.pi` through its π lines and `branching.sigma` through
/// its σ lines, split within each group by squared weight. A level without
/// lines of one kind gives that share to the other. Lines emitting the same
/// photon polarisation share one collapse operator.
fn free_space_jumps(params: &SystemParams, scheme: &LevelScheme, basis: &Basis) -> Vec<JumpOperator> {
    let mut groups: [Vec<(usize, usize, C64)>; 3] = Default::default();
    for upper in Level::EXCITED {
        let lines: Vec<_> = scheme.transitions().iter().filter(|t| t.upper == upper && t.weight != 0.0).collect();
        let norm = |sigma: bool| -> f64 {
            lines.iter().filter(|t| t.polarization.is_sigma() == sigma).map(|t| t.weight * t.weight).sum()
        };
        let (pi_norm, sigma_norm) = (norm(false), norm(true));
        let (mut pi_share, mut sigma_share) = (params.branching.pi, params.branching.sigma);
        if sigma_norm == 0.0 {
            pi_share += sigma_share;
            sigma_share = 0.0;
        } else if pi_norm == 0.0 {
            sigma_share += pi_share;
            pi_share = 0.0;
        }
        for t in lines {
            let (share, norm) = if t.polarization.is_sigma() { (sigma_share, sigma_norm) } else { (pi_share, pi_norm) };
            if share == 0.0 {
                continue;
            }
            let amp = (params.gamma * share / norm).sqrt() * t.weight;
            let group = match t.polarization {
                Polarization::Pi => 0,
                Polarization::SigmaPlus => 1,
                Polarization::SigmaMinus => 2,
            };
            groups[group].extend(basis.atomic(t.lower, t.upper, C64::new(amp, 0.0)));
        }
    }
    let channels = [JumpChannel::FreeSpacePi, JumpChannel::FreeSpaceSigmaPlus, JumpChannel::FreeSpaceSigmaMinus];
    channels
        .into_iter()
        .zip(groups)
        .filter(|(_, t)| !t.is_empty())
        .map(|(channel, t)| JumpOperator { channel, op: SparseMatrix::from_triplets(basis.dim(), t) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Branching;

    fn zero_detuning() -> SystemParams {
        let mut p = SystemParams::experiment_defaults();
        p.delta_g = 0.0;
        p.delta_e = 0.0;
        p.delta_drive = 0.0;
        p.delta_eff = 0.0;
        p
    }

    #[test]
    fn dimension_follows_truncation() {
        let ops = build_operators(&SystemParams::experiment_defaults(), &LevelScheme::simplified(), 1.0).unwrap();
        assert_eq!(ops.dim(), 54);
        let mut p = SystemParams::experiment_defaults();
        p.n_max_v = 3;
        p.n_max_h = 1;
        assert_eq!(build_operators(&p, &LevelScheme::simplified(), 1.0).unwrap().dim(), 6 * 4 * 2);
    }

    #[test]
    fn undriven_zero_detuning_has_only_cavity_couplings() {
        let p = zero_detuning();
        let ops = build_operators(&p, &LevelScheme::simplified(), 0.0).unwrap();
        assert_eq!(ops.hamiltonian.hermiticity_defect(), 0.0);
        for (i, j, v) in ops.hamiltonian.triplets() {
            let (li, vi, hi) = ops.basis.decompose(i);
            let (lj, vj, hj) = ops.basis.decompose(j);
            assert!(i != j, "diagonal entry {v} at {i}");
            assert_ne!(li.is_excited(), lj.is_excited());
            // One photon exchanged with exactly one mode.
            let dv = vi as i64 - vj as i64;
            let dh = hi as i64 - hj as i64;
            assert_eq!(dv.abs() + dh.abs(), 1);
            let n = if dv != 0 { vi.max(vj) } else { hi.max(hj) } as f64;
            assert!((v.re - p.g * n.sqrt()).abs() < 1e-6 * p.g && v.im == 0.0);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let ops = build_operators(&SystemParams::experiment_defaults(), &LevelScheme::simplified(), 0.37).unwrap();
        assert!(ops.hamiltonian.hermiticity_defect() <= 1e-12 * ops.hamiltonian.max_abs());
    }

    #[test]
    fn drive_is_linear_in_scale() {
        let p = SystemParams::experiment_defaults();
        let full = build_operators(&p, &LevelScheme::simplified(), 1.0).unwrap();
        let low = build_operators(&p, &LevelScheme::simplified(), 0.05).unwrap();
        let d_full = full.hamiltonian.add(&full.static_part.scale(C64::new(-1.0, 0.0)));
        let d_low = low.hamiltonian.add(&low.static_part.scale(C64::new(-1.0, 0.0)));
        assert!(d_full.nnz() > 0);
        for (i, j, v) in d_full.triplets() {
            assert!((d_low.get(i, j) - v * 0.05).norm() <= 1e-15 * v.norm().max(1.0));
        }
    }

    #[test]
    fn excited_decay_sums_to_gamma() {
        for branching in [Branching::PI_ONLY, Branching { pi: 0.6, sigma: 0.4 }, Branching { pi: 0.0, sigma: 1.0 }] {
            let mut p = SystemParams::experiment_defaults();
            p.branching = branching;
            let ops = build_operators(&p, &LevelScheme::simplified(), 1.0).unwrap();
            let mut total = SparseMatrix::zeros(ops.dim());
            for j in ops.jumps.iter().filter(|j| !matches!(j.channel, JumpChannel::CavityV | JumpChannel::CavityH)) {
                total = total.add(&j.op.adjoint().matmul(&j.op));
            }
            for l in Level::ALL {
                let i = ops.basis.index(l, 0, 0);
                let expected = if l.is_excited() { p.gamma } else { 0.0 };
                assert!((total.get(i, i).re - expected).abs() < 1e-9 * p.gamma, "{l:?} under {branching:?}");
            }
        }
    }

    #[test]
    fn v_mode_conserves_m() {
        let ops = build_operators(&SystemParams::experiment_defaults(), &LevelScheme::simplified(), 1.0).unwrap();
        for (i, j, _) in ops.hamiltonian.triplets() {
            let (li, _, hi) = ops.basis.decompose(i);
            let (lj, _, hj) = ops.basis.decompose(j);
            // Everything except H-mode exchange (V coupling, drive, energies) keeps m.
            if hi == hj {
                assert_eq!(li.m(), lj.m(), "{li:?} ↔ {lj:?}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut p = SystemParams::experiment_defaults();
        p.n_max_v = 0;
        assert!(matches!(build_operators(&p, &LevelScheme::simplified(), 1.0), Err(Error::TruncationTooSmall { .. })));
        let mut p = SystemParams::experiment_defaults();
        p.branching = Branching { pi: 0.5, sigma: 0.2 };
        assert!(build_operators(&p, &LevelScheme::simplified(), 1.0).is_err());
        assert!(build_operators(&SystemParams::experiment_defaults(), &LevelScheme::simplified(), 1.5).is_err());
    }

    #[test]
    fn basis_roundtrip() {
        let b = Basis::new(2, 3);
        for i in 0..b.dim() {
            let (l, v, h) = b.decompose(i);
            assert_eq!(b.index(l, v, h), i);
        }
    }
}
