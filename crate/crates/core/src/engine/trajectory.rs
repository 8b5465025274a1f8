use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::master::MasterEquation;
use super::{max_step, DetectedField, DetectionConfig, PulseProtocol};
use crate::clickstream::{synthetic, Channel, ClickStream, Event, Origin};
use crate::error::{Error, Result};
use crate::linalg::{dense_mul_vec, expm, norm_sqr, SparseMatrix};
use crate::model::{build_operators, JumpChannel, LevelScheme, SystemOperators, SystemParams};
use crate::units::{seconds_to_ticks, TICKS_PER_SECOND};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Longest no-jump propagator, `2^LEVELS` ps (about 1 μs).
const LEVELS: usize = 20;

/// A drive transient is considered finished once the amplitude is this close to its target.
const SETTLE_TOLERANCE: f64 = 1e-4;

/// One trigger presented to the delay generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct GateRecord {
    pub trigger_tick: u64,
    /// Whether the generator was idle and produced a gate (and a gate copy).
    pub emitted: bool,
}

/// Delay-generator model: non-paralysable dead time after each accepted trigger.
#[derive(Debug, Clone)]
pub(crate) struct GateController {
    delay: u64,
    window: Option<(u64, u64)>,
    deadtime: u64,
    busy_until: Option<u64>,
}

impl GateController {
    pub(crate) fn new(protocol: &PulseProtocol) -> Self {
        let delay = seconds_to_ticks(protocol.trigger_delay);
        let window = protocol.gates_drive().then(|| {
            let start = delay + seconds_to_ticks(protocol.off_start);
            (start, start + seconds_to_ticks(protocol.width))
        });
        GateController { delay, window, deadtime: seconds_to_ticks(protocol.rearm_deadtime), busy_until: None }
    }

    /// Returns `Some((gate_copy_tick, drive window))` when the trigger is accepted.
    pub(crate) fn trigger(&mut self, t: u64) -> Option<(u64, Option<(u64, u64)>)> {
        if self.busy_until.is_some_and(|b| t < b) {
            return None;
        }
        self.busy_until = Some(t + self.deadtime);
        Some((t + self.delay, self.window.map(|(a, b)| (t + a, t + b))))
    }
}

/// Present every start-channel click of `stream` to the delay generator and
/// add the resulting gate copies. Returns the augmented stream and the log.
pub fn apply_trigger_electronics(
    stream: &ClickStream,
    protocol: &PulseProtocol,
    start_channel: Channel,
) -> (ClickStream, Vec<GateRecord>) {
    let mut ctl = GateController::new(protocol);
    let mut events: Vec<Event> = stream.events().iter().filter(|e| e.channel != Channel::GateCopy).copied().collect();
    let mut log = Vec::new();
    for e in stream.events().iter().filter(|e| e.channel == start_channel) {
        let accepted = ctl.trigger(e.tick);
        log.push(GateRecord { trigger_tick: e.tick, emitted: accepted.is_some() });
        if let Some((copy, _)) = accepted {
            events.push(Event::new(copy, Channel::GateCopy, e.origin));
        }
    }
    (ClickStream::from_events(events), log)
}

/// Output of a trajectory run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRun {
    pub stream: ClickStream,
    pub gate_log: Vec<GateRecord>,
    pub seeds: Vec<u64>,
    /// Length of each trajectory, ps; trajectory `k` occupies `[k·d, (k+1)·d)`.
    pub duration_ps: u64,
    /// Quantum jumps per channel, summed over trajectories.
    pub jump_counts: JumpCounts,
}

impl TrajectoryRun {
    /// Trigger log, ordered by time.
    pub fn gate_copy_log(&self) -> &[GateRecord] {
        &self.gate_log
    }

    /// Fraction of triggers that found the delay generator busy.
    pub fn missed_fraction(&self) -> f64 {
        if self.gate_log.is_empty() {
            return 0.0;
        }
        self.gate_log.iter().filter(|g| !g.emitted).count() as f64 / self.gate_log.len() as f64
    }

    pub fn total_time(&self) -> f64 {
        self.duration_ps as f64 * self.seeds.len() as f64 / TICKS_PER_SECOND
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JumpCounts {
    pub detected: u64,
    pub undetected_h: u64,
    pub cavity_v: u64,
    pub free_space: u64,
}

impl JumpCounts {
    fn add(&mut self, o: &JumpCounts) {
        self.detected += o.detected;
        self.undetected_h += o.undetected_h;
        self.cavity_v += o.cavity_v;
        self.free_space += o.free_space;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum McKind {
    Detected,
    UndetectedH,
    CavityV,
    FreeSpace,
}

/// Propagators `exp(−i H_eff 2^k ps)` for one constant drive scale.
#[derive(Debug, Clone)]
struct Ladder {
    scale: f64,
    steps: Vec<Mat<C64>>,
}

/// Quantum-jump unraveling with the detected channel written as
/// `√(2κη)(a_H + ε)`. The LO displacement is absorbed into the Hamiltonian
/// (`H → H − (i/2)(c* L − c L†)`, `c = √(2κη) ε`), which leaves the master
/// equation unchanged.
#[derive(Debug, Clone)]
pub struct TrajectorySimulator {
    params: SystemParams,
    protocol: PulseProtocol,
    detection: DetectionConfig,
    h_static: SparseMatrix,
    drive: SparseMatrix,
    jumps: Vec<(McKind, SparseMatrix)>,
    h_eff_static: SparseMatrix,
    ladders: Vec<Ladder>,
    initial: Vec<(f64, Vec<C64>)>,
    rk_step: u64,
}

impl TrajectorySimulator {
    pub fn new(
        params: &SystemParams,
        scheme: &LevelScheme,
        protocol: &PulseProtocol,
        detection: &DetectionConfig,
    ) -> Result<Self> {
        params.validate()?;
        protocol.validate()?;
        detection.validate()?;
        if detection.field != DetectedField::CavityOutput {
            return Err(Error::param("field", "trajectories require the cavity-output detection operator"));
        }
        let ops = build_operators(params, scheme, 1.0)?;
        let (h_static, jumps) = unraveling(&ops, params, detection);
        let dim = ops.dim();
        let mut decay = SparseMatrix::zeros(dim);
        for (_, l) in &jumps {
            decay = decay.add(&l.adjoint().matmul(l));
        }
        let h_eff_static = h_static.add(&decay.scale(C64::new(0.0, -0.5)));

        let mut scales = vec![1.0];
        if protocol.gates_drive() {
            scales.push(protocol.attenuation);
        }
        let ladders = scales.into_iter().map(|s| ladder(&h_eff_static, &ops.drive, s)).collect();

        let equation = MasterEquation::new(&ops);
        let rho_ss = equation.steady_state(1.0)?;
        rho_ss.check_truncation(&ops.basis)?;
        let initial = mixture(rho_ss.as_slice(), dim)?;

        let rk_step = seconds_to_ticks(max_step(params, &ops)).max(1);
        Ok(TrajectorySimulator {
            params: params.clone(),
            protocol: *protocol,
            detection: *detection,
            h_static,
            drive: ops.drive.clone(),
            jumps,
            h_eff_static,
            ladders,
            initial,
            rk_step,
        })
    }

    /// Master equation generated by the unraveling's operators.
    pub fn master_equation(&self) -> MasterEquation {
        MasterEquation::from_parts(&self.h_static, &self.drive, self.jumps.iter().map(|(_, l)| l.clone()).collect())
    }

    /// Run `seeds.len()` trajectories of `duration` seconds each and
    /// concatenate them in time.
    pub fn run(&self, duration: f64, seeds: &[u64]) -> Result<TrajectoryRun> {
        let mut seen = BTreeSet::new();
        for &s in seeds {
            if !seen.insert(s) {
                return Err(Error::SeedReuse { seed: s });
            }
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::param("duration", "must be positive"));
        }
        let duration_ps = seconds_to_ticks(duration);
        let parts: Vec<Result<(Vec<Event>, Vec<GateRecord>, JumpCounts)>> = seeds
            .par_iter()
            .enumerate()
            .map(|(k, &seed)| self.single(seed, k as u64 * duration_ps, duration_ps))
            .collect();
        let mut events = Vec::new();
        let mut gate_log = Vec::new();
        let mut jump_counts = JumpCounts::default();
        for p in parts {
            let (e, g, c) = p?;
            events.extend(e);
            gate_log.extend(g);
            jump_counts.add(&c);
        }
        gate_log.sort_unstable();
        Ok(TrajectoryRun {
            stream: ClickStream::from_events(events),
            gate_log,
            seeds: seeds.to_vec(),
            duration_ps,
            jump_counts,
        })
    }

    fn single(&self, seed: u64, offset: u64, duration: u64) -> Result<(Vec<Event>, Vec<GateRecord>, JumpCounts)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bg_rng = ChaCha8Rng::seed_from_u64(seed);
        bg_rng.set_stream(1);
        let background: Vec<(u64, Channel)> = {
            let secs = duration as f64 / TICKS_PER_SECOND;
            synthetic::poisson_ticks(&mut bg_rng, self.detection.background_cps, secs)
                .into_iter()
                .map(|t| (t, self.route(&mut bg_rng)))
                .collect()
        };
        let mut bg_next = 0usize;

        let mut psi = self.sample_initial(&mut rng);
        let mut threshold: f64 = rng.random();
        let mut ctl = GateController::new(&self.protocol);
        let mut windows: Vec<(u64, u64)> = Vec::new();
        let mut edges: BinaryHeap<Reverse<u64>> = BinaryHeap::new();
        let mut drive = DriveState { value: 1.0, target: 1.0 };
        let filtered = self.params.cavity_filtered_drive;
        let kappa = self.params.kappa;

        let mut events = Vec::new();
        let mut log = Vec::new();
        let mut counts = JumpCounts::default();
        let mut t = 0u64;
        let mut scratch = vec![ZERO; psi.len()];

        // Trigger handling shared by cavity and background clicks.
        let on_click = |tick: u64,
                        channel: Channel,
                        origin: Origin,
                        ctl: &mut GateController,
                        windows: &mut Vec<(u64, u64)>,
                        edges: &mut BinaryHeap<Reverse<u64>>,
                        events: &mut Vec<Event>,
                        log: &mut Vec<GateRecord>| {
            events.push(Event::new(offset + tick, channel, origin));
            if channel != self.detection.start_channel {
                return;
            }
            let accepted = ctl.trigger(tick);
            log.push(GateRecord { trigger_tick: offset + tick, emitted: accepted.is_some() });
            if let Some((copy, window)) = accepted {
                events.push(Event::new(offset + copy, Channel::GateCopy, origin));
                if let Some((a, b)) = window {
                    windows.push((a, b));
                    edges.push(Reverse(a));
                    edges.push(Reverse(b));
                }
            }
        };

        loop {
            let next_edge = edges.peek().map_or(u64::MAX, |r| r.0);
            let next_bg = background.get(bg_next).map_or(u64::MAX, |b| b.0);
            let stop = next_edge.min(next_bg).min(duration);
            if t >= stop {
                if t >= duration {
                    break;
                }
                while edges.peek().is_some_and(|r| r.0 <= t) {
                    edges.pop();
                }
                windows.retain(|&(_, b)| b > t);
                let attenuated = windows.iter().any(|&(a, b)| a <= t && t < b);
                drive.target = if attenuated { self.protocol.attenuation } else { 1.0 };
                if !filtered {
                    drive.value = drive.target;
                }
                while background.get(bg_next).is_some_and(|b| b.0 <= t) {
                    let (tick, ch) = background[bg_next];
                    bg_next += 1;
                    on_click(tick, ch, Origin::Background, &mut ctl, &mut windows, &mut edges, &mut events, &mut log);
                }
                continue;
            }

            let jumped = if drive.settled() {
                drive.value = drive.target;
                let ladder = self.ladder_for(drive.target);
                advance_exact(ladder, &mut psi, &mut scratch, &mut t, stop, threshold)
            } else {
                let h = self.rk_step.min(stop - t);
                let before = psi.clone();
                let n0 = norm_sqr(&psi);
                let (s0, s1, s2) = (drive.value, drive.at(kappa, h as f64 / 2e12), drive.at(kappa, h as f64 / 1e12));
                self.rk4(&mut psi, h as f64 / TICKS_PER_SECOND, [s0, s1, s2]);
                let n1 = norm_sqr(&psi);
                if n1 > threshold {
                    t += h;
                    drive.value = s2;
                    false
                } else {
                    // Interpolate the crossing in log-norm and redo the partial step.
                    let frac = ((n0.ln() - threshold.ln()) / (n0.ln() - n1.ln())).clamp(0.0, 1.0);
                    let hc = ((frac * h as f64).round() as u64).clamp(1, h);
                    psi = before;
                    let dt = hc as f64 / TICKS_PER_SECOND;
                    let (c1, c2) = (drive.at(kappa, dt / 2.0), drive.at(kappa, dt));
                    self.rk4(&mut psi, dt, [drive.value, c1, c2]);
                    t += hc;
                    drive.value = c2;
                    true
                }
            };
            if !jumped {
                continue;
            }

            // Collapse.
            let weights: Vec<f64> = self
                .jumps
                .iter()
                .map(|(_, l)| {
                    l.mul_vec(&psi, &mut scratch);
                    norm_sqr(&scratch)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(Error::NoSteadyState("trajectory reached a dark state with no jump channel".into()));
            }
            let mut pick = rng.random::<f64>() * total;
            let mut which = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if pick < *w {
                    which = i;
                    break;
                }
                pick -= w;
            }
            let (kind, op) = &self.jumps[which];
            op.mul_vec(&psi, &mut scratch);
            let n = norm_sqr(&scratch).sqrt();
            for (p, s) in psi.iter_mut().zip(&scratch) {
                *p = s / n;
            }
            threshold = rng.random();
            match kind {
                McKind::Detected => {
                    counts.detected += 1;
                    let ch = self.route(&mut rng);
                    on_click(t, ch, Origin::Cavity, &mut ctl, &mut windows, &mut edges, &mut events, &mut log);
                }
                McKind::UndetectedH => counts.undetected_h += 1,
                McKind::CavityV => counts.cavity_v += 1,
                McKind::FreeSpace => counts.free_space += 1,
            }
        }
        Ok((events, log, counts))
    }

    fn route<R: Rng>(&self, rng: &mut R) -> Channel {
        if rng.random::<f64>() < self.detection.split_a {
            Channel::ApdA
        } else {
            Channel::ApdB
        }
    }

    fn ladder_for(&self, scale: f64) -> &Ladder {
        self.ladders.iter().find(|l| l.scale == scale).expect("propagators exist for every settled drive level")
    }

    fn sample_initial<R: Rng>(&self, rng: &mut R) -> Vec<C64> {
        let mut u = rng.random::<f64>();
        for (p, v) in &self.initial {
            if u < *p {
                return v.clone();
            }
            u -= p;
        }
        self.initial.last().expect("non-empty mixture").1.clone()
    }

    fn rk4(&self, psi: &mut [C64], h: f64, scales: [f64; 3]) {
        let n = psi.len();
        let f = |x: &[C64], s: f64, out: &mut [C64]| {
            let mut a = vec![ZERO; n];
            let mut b = vec![ZERO; n];
            self.h_eff_static.mul_vec(x, &mut a);
            self.drive.mul_vec(x, &mut b);
            for i in 0..n {
                out[i] = C64::new(0.0, -1.0) * (a[i] + b[i] * s);
            }
        };
        let mut k = vec![ZERO; n];
        let mut acc = vec![ZERO; n];
        let mut tmp = vec![ZERO; n];
        f(psi, scales[0], &mut k);
        for i in 0..n {
            acc[i] = k[i];
            tmp[i] = psi[i] + k[i] * (0.5 * h);
        }
        f(&tmp, scales[1], &mut k);
        for i in 0..n {
            acc[i] += k[i] * 2.0;
            tmp[i] = psi[i] + k[i] * (0.5 * h);
        }
        f(&tmp, scales[1], &mut k);
        for i in 0..n {
            acc[i] += k[i] * 2.0;
            tmp[i] = psi[i] + k[i] * h;
        }
        f(&tmp, scales[2], &mut k);
        for i in 0..n {
            acc[i] += k[i];
            psi[i] += acc[i] * (h / 6.0);
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct DriveState {
    value: f64,
    target: f64,
}

impl DriveState {
    fn settled(&self) -> bool {
        (self.value - self.target).abs() <= SETTLE_TOLERANCE
    }

    /// Amplitude after `dt` seconds of relaxation at rate κ.
    fn at(&self, kappa: f64, dt: f64) -> f64 {
        self.target + (self.value - self.target) * (-kappa * dt).exp()
    }
}

/// Advance under constant drive towards `stop`, stopping early at a jump.
/// Returns whether a jump is due at the new `t`.
fn advance_exact(
    ladder: &Ladder,
    psi: &mut [C64],
    scratch: &mut [C64],
    t: &mut u64,
    stop: u64,
    threshold: f64,
) -> bool {
    let remaining = stop - *t;
    let k = (63 - remaining.leading_zeros() as usize).min(LEVELS);
    dense_mul_vec(&ladder.steps[k], psi, scratch);
    if norm_sqr(scratch) > threshold {
        psi.copy_from_slice(scratch);
        *t += 1 << k;
        return false;
    }
    // The norm crosses the threshold within (t, t + 2^k]: bisect to 1 ps.
    for j in (0..k).rev() {
        dense_mul_vec(&ladder.steps[j], psi, scratch);
        if norm_sqr(scratch) > threshold {
            psi.copy_from_slice(scratch);
            *t += 1 << j;
        }
    }
    dense_mul_vec(&ladder.steps[0], psi, scratch);
    psi.copy_from_slice(scratch);
    *t += 1;
    true
}

fn ladder(h_eff_static: &SparseMatrix, drive: &SparseMatrix, scale: f64) -> Ladder {
    let h = h_eff_static.add(&drive.scale(C64::new(scale, 0.0))).to_dense();
    let n = h.nrows();
    let steps = (0..=LEVELS)
        .map(|k| {
            let dt = (1u64 << k) as f64 / TICKS_PER_SECOND;
            let a = Mat::<C64>::from_fn(n, n, |i, j| h[(i, j)] * C64::new(0.0, -dt));
            expm(&a)
        })
        .collect();
    Ladder { scale, steps }
}

/// Collapse operators of the unraveling and the compensated Hamiltonian.
fn unraveling(
    ops: &SystemOperators,
    params: &SystemParams,
    detection: &DetectionConfig,
) -> (SparseMatrix, Vec<(McKind, SparseMatrix)>) {
    let dim = ops.dim();
    let eta = detection.efficiency;
    let detected = ops.a_h.scale(C64::new((2.0 * params.kappa * eta).sqrt(), 0.0));
    let c = detection.epsilon * (2.0 * params.kappa * eta).sqrt();
    // H' = H − (i/2)(c* L − c L†)
    let correction = detected.scale(c.conj()).add(&detected.adjoint().scale(-c)).scale(C64::new(0.0, -0.5));
    let h_static = ops.static_part.add(&correction);

    let mut jumps = Vec::new();
    jumps.push((McKind::Detected, detected.add(&SparseMatrix::identity(dim).scale(c))));
    if eta < 1.0 {
        jumps.push((McKind::UndetectedH, ops.a_h.scale(C64::new((2.0 * params.kappa * (1.0 - eta)).sqrt(), 0.0))));
    }
    for j in &ops.jumps {
        let kind = match j.channel {
            JumpChannel::CavityH => continue,
            JumpChannel::CavityV => McKind::CavityV,
            _ => McKind::FreeSpace,
        };
        jumps.push((kind, j.op.clone()));
    }
    (h_static, jumps)
}

/// Eigen-decomposition of a density matrix as `(probability, state)` pairs.
fn mixture(rho: &[C64], dim: usize) -> Result<Vec<(f64, Vec<C64>)>> {
    let m = Mat::<C64>::from_fn(dim, dim, |i, j| rho[i * dim + j]);
    let eig = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::NoSteadyState(format!("eigendecomposition failed: {e:?}")))?;
    let vals = eig.S().column_vector();
    let vecs = eig.U();
    let mut out: Vec<(f64, Vec<C64>)> = (0..dim)
        .filter_map(|k| {
            let p = vals[k].re;
            (p > 1e-14).then(|| (p, (0..dim).map(|i| vecs[(i, k)]).collect()))
        })
        .collect();
    let total: f64 = out.iter().map(|(p, _)| p).sum();
    for (p, v) in &mut out {
        *p /= total;
        let n = norm_sqr(v).sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    }
    // Largest weights first so sampling usually stops early.
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(out)
}

/// Run `n_traj` trajectories with seeds `seed, seed + 1, …`.
pub fn run_trajectories(
    params: &SystemParams,
    protocol: &PulseProtocol,
    detection: &DetectionConfig,
    duration: f64,
    n_traj: usize,
    seed: u64,
) -> Result<TrajectoryRun> {
    let seeds: Vec<u64> = (0..n_traj as u64).map(|k| seed.wrapping_add(k)).collect();
    run_trajectories_with_seeds(params, protocol, detection, duration, &seeds)
}

/// Run one trajectory per seed; seeds must be distinct.
pub fn run_trajectories_with_seeds(
    params: &SystemParams,
    protocol: &PulseProtocol,
    detection: &DetectionConfig,
    duration: f64,
    seeds: &[u64],
) -> Result<TrajectoryRun> {
    TrajectorySimulator::new(params, &LevelScheme::simplified(), protocol, detection)?.run(duration, seeds)
}
