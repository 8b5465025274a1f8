use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;

use super::drive::DriveProfile;
use super::{max_step, DetectionConfig, PulseProtocol};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::model::{build_operators, Basis, Level, LevelScheme, SystemOperators, SystemParams};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Population allowed in the highest retained Fock state of either mode.
pub const TRUNCATION_THRESHOLD: f64 = 1e-3;

/// Largest Hilbert-space dimension for which the steady state is found by a
/// dense solve of the Liouvillian; larger systems relax in time instead.
const DENSE_STEADY_STATE_DIM: usize = 64;

/// Row-major density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        DensityMatrix { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn from_pure(psi: &[C64]) -> Self {
        let dim = psi.len();
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = psi[i] * psi[j].conj();
            }
        }
        DensityMatrix { dim, data }
    }

    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        DensityMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// `tr(A ρ)`.
    pub fn expect(&self, op: &SparseMatrix) -> C64 {
        op.trace_with(&self.data)
    }

    /// Replace ρ by (ρ + ρ†)/2.
    pub fn hermitize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            self.data[i * d + i].im = 0.0;
            for j in (i + 1)..d {
                let avg = 0.5 * (self.data[i * d + j] + self.data[j * d + i].conj());
                self.data[i * d + j] = avg;
                self.data[j * d + i] = avg.conj();
            }
        }
    }

    pub fn normalize(&mut self) {
        let tr = self.trace().re;
        for v in &mut self.data {
            *v /= tr;
        }
    }

    /// `C ρ C†`, unnormalised.
    pub fn collapse(&self, c: &SparseMatrix) -> DensityMatrix {
        let d = self.dim;
        let mut x = vec![ZERO; d * d];
        c.mul_dense_acc(&self.data, &mut x, C64::new(1.0, 0.0));
        // x = Cρ; C (Cρ)† = C ρ C† for Hermitian ρ.
        let xa = adjoint(&x, d);
        let mut out = vec![ZERO; d * d];
        c.mul_dense_acc(&xa, &mut out, C64::new(1.0, 0.0));
        DensityMatrix { dim: d, data: out }
    }

    /// Atomic coherence `⟨a|ρ|b⟩` with both cavity modes traced out.
    pub fn atomic_element(&self, basis: &Basis, a: Level, b: Level) -> C64 {
        let mut acc = ZERO;
        for nv in 0..basis.nv {
            for nh in 0..basis.nh {
                acc += self.get(basis.index(a, nv, nh), basis.index(b, nv, nh));
            }
        }
        acc
    }

    /// Population of the highest Fock state of the V and H modes.
    pub fn edge_populations(&self, basis: &Basis) -> (f64, f64) {
        let (mut v, mut h) = (0.0, 0.0);
        for i in 0..self.dim {
            let (_, nv, nh) = basis.decompose(i);
            let p = self.data[i * self.dim + i].re;
            if nv + 1 == basis.nv {
                v += p;
            }
            if nh + 1 == basis.nh {
                h += p;
            }
        }
        (v, h)
    }

    pub(crate) fn check_truncation(&self, basis: &Basis) -> Result<()> {
        let (v, h) = self.edge_populations(basis);
        for (mode, pop) in [("v", v), ("h", h)] {
            if pop > TRUNCATION_THRESHOLD {
                return Err(Error::TruncationOverflow { mode, population: pop, threshold: TRUNCATION_THRESHOLD });
            }
        }
        Ok(())
    }
}

fn adjoint(x: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = x[i * d + j].conj();
        }
    }
    out
}

/// Lindblad generator `dρ/dt = −i(H_eff ρ − ρ H_eff†) + Σ C ρ C†` with
/// `H_eff = H_static + s·H_drive − (i/2) Σ C†C`.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    dim: usize,
    h_eff_static: SparseMatrix,
    drive: SparseMatrix,
    collapse: Vec<SparseMatrix>,
}

impl MasterEquation {
    pub fn new(ops: &SystemOperators) -> Self {
        Self::from_parts(&ops.static_part, &ops.drive, ops.jumps.iter().map(|j| j.op.clone()).collect())
    }

    pub fn from_parts(h_static: &SparseMatrix, drive: &SparseMatrix, collapse: Vec<SparseMatrix>) -> Self {
        let dim = h_static.dim();
        let mut decay = SparseMatrix::zeros(dim);
        for c in &collapse {
            decay = decay.add(&c.adjoint().matmul(c));
        }
        let h_eff_static = h_static.add(&decay.scale(C64::new(0.0, -0.5)));
        MasterEquation { dim, h_eff_static, drive: drive.clone(), collapse }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `out = L(ρ)` at drive scale `s`.
    pub fn rhs(&self, rho: &[C64], s: f64, out: &mut [C64]) {
        let d = self.dim;
        let mut a = vec![ZERO; d * d];
        let minus_i = C64::new(0.0, -1.0);
        self.h_eff_static.mul_dense_acc(rho, &mut a, minus_i);
        if s != 0.0 {
            self.drive.mul_dense_acc(rho, &mut a, minus_i * s);
        }
        // out = A + A†
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = a[i * d + j] + a[j * d + i].conj();
            }
        }
        let mut x = vec![ZERO; d * d];
        for c in &self.collapse {
            x.iter_mut().for_each(|v| *v = ZERO);
            c.mul_dense_acc(rho, &mut x, C64::new(1.0, 0.0));
            let xa = adjoint(&x, d);
            c.mul_dense_acc(&xa, out, C64::new(1.0, 0.0));
        }
    }

    /// One classical RK4 step of length `h` with drive scales at `t`, `t + h/2`, `t + h`.
    pub fn rk4_step(&self, rho: &mut [C64], h: f64, scales: [f64; 3]) {
        let n = rho.len();
        let mut k = vec![ZERO; n];
        let mut acc = vec![ZERO; n];
        let mut tmp = vec![ZERO; n];
        self.rhs(rho, scales[0], &mut k);
        for i in 0..n {
            acc[i] = k[i];
            tmp[i] = rho[i] + k[i] * (0.5 * h);
        }
        self.rhs(&tmp, scales[1], &mut k);
        for i in 0..n {
            acc[i] += k[i] * 2.0;
            tmp[i] = rho[i] + k[i] * (0.5 * h);
        }
        self.rhs(&tmp, scales[1], &mut k);
        for i in 0..n {
            acc[i] += k[i] * 2.0;
            tmp[i] = rho[i] + k[i] * h;
        }
        self.rhs(&tmp, scales[2], &mut k);
        for i in 0..n {
            acc[i] += k[i];
            rho[i] += acc[i] * (h / 6.0);
        }
    }

    /// Propagate from `t0` to `t1` in equal steps no longer than `h_max`.
    pub fn evolve(&self, rho: &mut DensityMatrix, t0: f64, t1: f64, h_max: f64, drive: &DriveProfile) {
        if t1 <= t0 {
            return;
        }
        let steps = ((t1 - t0) / h_max).ceil().max(1.0) as usize;
        let h = (t1 - t0) / steps as f64;
        for k in 0..steps {
            let t = t0 + k as f64 * h;
            let scales = if drive.filtered {
                [drive.value(t), drive.value(t + 0.5 * h), drive.value(t + h)]
            } else {
                let s = drive.value(t + 0.5 * h);
                [s, s, s]
            };
            self.rk4_step(&mut rho.data, h, scales);
        }
        rho.hermitize();
    }

    /// Dense Liouvillian acting on row-major vec(ρ).
    pub fn liouvillian(&self, s: f64) -> Mat<C64> {
        let d = self.dim;
        let n = d * d;
        let h_eff = self.h_eff_static.add(&self.drive.scale(C64::new(s, 0.0)));
        let mut l = Mat::<C64>::zeros(n, n);
        let minus_i = C64::new(0.0, -1.0);
        // −i H_eff ⊗ I
        for (i, k, v) in h_eff.triplets() {
            for j in 0..d {
                l[(i * d + j, k * d + j)] += minus_i * v;
            }
        }
        // +i I ⊗ conj(H_eff)
        for (j, l_, v) in h_eff.triplets() {
            for i in 0..d {
                l[(i * d + j, i * d + l_)] += C64::new(0.0, 1.0) * v.conj();
            }
        }
        // C ⊗ conj(C)
        for c in &self.collapse {
            let t: Vec<_> = c.triplets().collect();
            for &(i, k, a) in &t {
                for &(j, l_, b) in &t {
                    l[(i * d + j, k * d + l_)] += a * b.conj();
                }
            }
        }
        l
    }

    /// Stationary state at constant drive scale `s`.
    pub fn steady_state(&self, s: f64) -> Result<DensityMatrix> {
        let rho = if self.dim <= DENSE_STEADY_STATE_DIM {
            self.steady_state_dense(s)?
        } else {
            self.steady_state_relaxed(s)?
        };
        if rho.data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NoSteadyState("solution is not finite".into()));
        }
        let min_pop = (0..self.dim).map(|i| rho.get(i, i).re).fold(f64::INFINITY, f64::min);
        if min_pop < -1e-8 {
            return Err(Error::NoSteadyState(format!("negative population {min_pop:.3e}")));
        }
        Ok(rho)
    }

    fn steady_state_dense(&self, s: f64) -> Result<DensityMatrix> {
        let d = self.dim;
        let n = d * d;
        let mut l = self.liouvillian(s);
        for c in 0..n {
            l[(0, c)] = ZERO;
        }
        for i in 0..d {
            l[(0, i * d + i)] = C64::new(1.0, 0.0);
        }
        let mut b = Mat::<C64>::zeros(n, 1);
        b[(0, 0)] = C64::new(1.0, 0.0);
        let x = l.partial_piv_lu().solve(&b);
        let mut rho = DensityMatrix::from_row_major(d, (0..n).map(|i| x[(i, 0)]).collect());
        rho.hermitize();
        rho.normalize();
        Ok(rho)
    }

    /// Relax from the maximally mixed state until `‖L(ρ)‖ / rate < 1e−9`.
    fn steady_state_relaxed(&self, s: f64) -> Result<DensityMatrix> {
        let d = self.dim;
        let scale = self.h_eff_static.max_abs().max(self.drive.max_abs() * s).max(1.0);
        let h = 0.1 / scale;
        let mut rho = DensityMatrix::zeros(d);
        for i in 0..d {
            rho.data[i * d + i] = C64::new(1.0 / d as f64, 0.0);
        }
        let mut deriv = vec![ZERO; d * d];
        for _ in 0..2_000 {
            for _ in 0..500 {
                self.rk4_step(&mut rho.data, h, [s, s, s]);
            }
            rho.hermitize();
            rho.normalize();
            self.rhs(&rho.data, s, &mut deriv);
            let res = deriv.iter().map(|v| v.norm()).fold(0.0, f64::max) / scale;
            if res < 1e-9 {
                return Ok(rho);
            }
        }
        Err(Error::NoSteadyState("time relaxation did not converge".into()))
    }
}

/// Sampled conditional intensity after a trigger detection at τ = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Curve {
    /// Delay after the trigger, seconds.
    pub tau: Vec<f64>,
    pub g2: Vec<f64>,
    /// `⟨g0|ρ|g+⟩`, cavity modes traced out.
    pub coherence_zero_plus: Vec<C64>,
    /// `⟨g+|ρ|g−⟩`, cavity modes traced out.
    pub coherence_plus_minus: Vec<C64>,
    /// Drive amplitude as a fraction of full.
    pub drive: Vec<f64>,
    /// Steady-state detection rate `⟨C†C⟩` in 1/s.
    pub steady_rate: f64,
}

impl G2Curve {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.tau.len() < 2 {
            0.0
        } else {
            self.tau[1] - self.tau[0]
        }
    }

    /// CSV with columns `tau_ns,g2,drive,coh_g0_gp_re,coh_g0_gp_im,coh_gp_gm_re,coh_gp_gm_im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau_ns,g2,drive,coh_g0_gp_re,coh_g0_gp_im,coh_gp_gm_re,coh_gp_gm_im")?;
        for i in 0..self.len() {
            let a = self.coherence_zero_plus[i];
            let b = self.coherence_plus_minus[i];
            writeln!(
                w,
                "{:.6},{:.12e},{:.9},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.tau[i] * 1e9,
                self.g2[i],
                self.drive[i],
                a.re,
                a.im,
                b.re,
                b.im
            )?;
        }
        Ok(())
    }
}

/// Deterministic conditional-g² solver with cached operators and steady state,
/// so protocol sweeps reuse one steady-state solve.
#[derive(Debug, Clone)]
pub struct G2Solver {
    params: SystemParams,
    ops: SystemOperators,
    equation: MasterEquation,
    detect: SparseMatrix,
    detect_number: SparseMatrix,
    rho_ss: DensityMatrix,
    steady_rate: f64,
    h_max: f64,
}

impl G2Solver {
    pub fn new(params: &SystemParams, scheme: &LevelScheme, detection: &DetectionConfig) -> Result<Self> {
        params.validate()?;
        detection.validate()?;
        let ops = build_operators(params, scheme, 1.0)?;
        let equation = MasterEquation::new(&ops);
        let rho_ss = equation.steady_state(1.0)?;
        rho_ss.check_truncation(&ops.basis)?;
        let detect = detection.operator(&ops, params);
        let detect_number = detect.adjoint().matmul(&detect);
        let steady_rate = rho_ss.expect(&detect_number).re;
        if !(steady_rate > 0.0) {
            return Err(Error::NoSteadyState("steady-state detection rate vanishes".into()));
        }
        let h_max = max_step(params, &ops);
        Ok(G2Solver { params: params.clone(), ops, equation, detect, detect_number, rho_ss, steady_rate, h_max })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn operators(&self) -> &SystemOperators {
        &self.ops
    }

    pub fn equation(&self) -> &MasterEquation {
        &self.equation
    }

    pub fn steady_state(&self) -> &DensityMatrix {
        &self.rho_ss
    }

    /// Steady-state rate of the detected channel, `⟨C†C⟩_ss`, in 1/s.
    pub fn steady_rate(&self) -> f64 {
        self.steady_rate
    }

    pub fn max_step(&self) -> f64 {
        self.h_max
    }

    /// Drive profile following a trigger at τ = 0.
    pub fn drive_profile(&self, protocol: &PulseProtocol) -> DriveProfile {
        if protocol.gates_drive() {
            let (a, b) = protocol.window();
            DriveProfile::gate(a, b, protocol.attenuation, self.params.kappa, self.params.cavity_filtered_drive)
        } else {
            DriveProfile::constant(1.0)
        }
    }

    /// g²(τ) on `τ = 0, dt, …, t_max` after conditioning the steady state on one detection.
    pub fn conditional_g2(&self, protocol: &PulseProtocol, t_max: f64, dt: f64) -> Result<G2Curve> {
        protocol.validate()?;
        if !(dt > 0.0 && t_max >= 0.0) {
            return Err(Error::param("dt", "sample step must be positive and t_max non-negative"));
        }
        let drive = self.drive_profile(protocol);
        let mut rho = self.rho_ss.collapse(&self.detect);
        rho.hermitize();
        rho.normalize();

        let n = (t_max / dt).round() as usize;
        let mut stops: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        stops.extend(drive.breakpoints().filter(|&t| t > 0.0 && t < n as f64 * dt));
        stops.sort_by(f64::total_cmp);
        stops.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        let basis = self.ops.basis;
        let mut curve = G2Curve {
            tau: Vec::with_capacity(n + 1),
            g2: Vec::with_capacity(n + 1),
            coherence_zero_plus: Vec::with_capacity(n + 1),
            coherence_plus_minus: Vec::with_capacity(n + 1),
            drive: Vec::with_capacity(n + 1),
            steady_rate: self.steady_rate,
        };
        let mut t = 0.0;
        let mut next_sample = 0usize;
        for &stop in &stops {
            self.equation.evolve(&mut rho, t, stop, self.h_max, &drive);
            t = stop;
            if next_sample <= n && (stop - next_sample as f64 * dt).abs() < 1e-15 {
                let tr = rho.trace().re;
                if (tr - 1.0).abs() > 1e-6 || !tr.is_finite() {
                    return Err(Error::NoSteadyState(format!("trace drifted to {tr} at τ = {stop:e} s")));
                }
                rho.check_truncation(&basis)?;
                curve.tau.push(stop);
                curve.g2.push(rho.expect(&self.detect_number).re / (tr * self.steady_rate));
                curve.coherence_zero_plus.push(rho.atomic_element(&basis, Level::GZero, Level::GPlus) / tr);
                curve.coherence_plus_minus.push(rho.atomic_element(&basis, Level::GPlus, Level::GMinus) / tr);
                curve.drive.push(drive.value(stop));
                next_sample += 1;
            }
        }
        Ok(curve)
    }
}

/// One-shot conditional g² with the default level scheme.
pub fn conditional_g2(
    params: &SystemParams,
    protocol: &PulseProtocol,
    detection: &DetectionConfig,
    t_max: f64,
    dt: f64,
) -> Result<G2Curve> {
    G2Solver::new(params, &LevelScheme::simplified(), detection)?.conditional_g2(protocol, t_max, dt)
}
