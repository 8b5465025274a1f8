use std::fmt::Write as _;

use super::{catmull_rom, dominant_frequency, envelope_fit, invert_small, Curve};
use crate::error::{Error, Result};

/// Result of matching a test curve to a reference curve.
///
/// The test oscillation is modelled as `scale · ref(t − time_shift)` after
/// each curve's mean envelope is removed; a positive shift means the test
/// curve lags.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatFit {
    pub time_shift: f64,
    pub time_shift_err: f64,
    /// `time_shift · beat_frequency`, rad.
    pub phase_shift: f64,
    pub phase_shift_err: f64,
    pub scale: f64,
    pub scale_err: f64,
    /// Reference beat angular frequency, rad/s.
    pub beat_frequency: f64,
    pub residual_rms_before: f64,
    pub residual_rms: f64,
    pub fit_window: (f64, f64),
    pub bin_width: f64,
    pub n_points: usize,
}

impl BeatFit {
    /// `key = value` report; times in ns, frequencies in MHz.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to string");
        kv("time_shift_ns", format!("{:.6}", self.time_shift * 1e9));
        kv("time_shift_err_ns", format!("{:.6}", self.time_shift_err * 1e9));
        kv("phase_shift_rad", format!("{:.6}", self.phase_shift));
        kv("phase_shift_err_rad", format!("{:.6}", self.phase_shift_err));
        kv("scale", format!("{:.6}", self.scale));
        kv("scale_err", format!("{:.6}", self.scale_err));
        kv("beat_frequency_mhz", format!("{:.6}", self.beat_frequency / (2.0 * std::f64::consts::PI) / 1e6));
        kv("residual_rms_before", format!("{:.6e}", self.residual_rms_before));
        kv("residual_rms", format!("{:.6e}", self.residual_rms));
        kv("fit_window_ns", format!("{:.3},{:.3}", self.fit_window.0 * 1e9, self.fit_window.1 * 1e9));
        kv("bin_width_ns", format!("{:.4}", self.bin_width * 1e9));
        kv("n_points", self.n_points.to_string());
        s
    }
}

/// Fit `(time shift, scale)` between envelope-subtracted curves over `window`.
pub fn match_curves(reference: &Curve, test: &Curve, window: (f64, f64)) -> Result<BeatFit> {
    if window.0 >= window.1 {
        return Err(Error::NonOverlappingWindows);
    }
    if (reference.dt / test.dt - 1.0).abs() > 1e-9 {
        return Err(Error::IncommensurateBins {
            source_ps: (reference.dt * 1e12).round() as u64,
            target_ps: (test.dt * 1e12).round() as u64,
        });
    }
    let env_ref = envelope_fit(reference, window)?;
    let env_test = envelope_fit(test, window)?;
    let r: Vec<f64> = (0..reference.len()).map(|k| reference.values[k] - env_ref.mean(reference.t(k))).collect();

    let ref_window = reference.indices_in(window);
    let omega = dominant_frequency(&r[ref_window], reference.dt)?;
    let half_period = std::f64::consts::PI / omega;

    // Keep only test samples whose shifted reference stays inside the data.
    let lo = window.0.max(reference.t0 + half_period);
    let hi = window.1.min(reference.t_end() - half_period);
    let idx = test.indices_in((lo, hi));
    if idx.len() < 4 {
        return Err(Error::NonOverlappingWindows);
    }
    let ts: Vec<f64> = idx.clone().map(|k| test.t(k)).collect();
    let s: Vec<f64> = idx.map(|k| test.values[k] - env_test.mean(test.t(k))).collect();
    let ss: f64 = s.iter().map(|v| v * v).sum();
    let r_at = |t: f64| catmull_rom(&r, (t - reference.t0) / reference.dt);

    // Residual after the optimal positive scale at shift d. Negative scales
    // are excluded so a half-period shift cannot masquerade as a match.
    let objective = |d: f64| {
        let (mut sr, mut rr) = (0.0, 0.0);
        for (t, y) in ts.iter().zip(&s) {
            let x = r_at(t - d);
            sr += y * x;
            rr += x * x;
        }
        if rr > 0.0 && sr > 0.0 {
            ss - sr * sr / rr
        } else {
            ss
        }
    };

    let step = reference.dt.min(half_period / 20.0);
    let n_steps = (half_period / step).floor() as i64;
    let grid: Vec<(f64, f64)> = (-n_steps..=n_steps).map(|k| (k as f64 * step, objective(k as f64 * step))).collect();
    let best = (0..grid.len()).min_by(|&a, &b| grid[a].1.total_cmp(&grid[b].1)).expect("non-empty grid");
    if best == 0 || best == grid.len() - 1 {
        return Err(Error::ShiftAmbiguous { shift_ns: grid[best].0 * 1e9 });
    }
    let (a, b, c) = (grid[best - 1].1, grid[best].1, grid[best + 1].1);
    let denom = a - 2.0 * b + c;
    let offset = if denom > 0.0 { (0.5 * (a - c) / denom).clamp(-1.0, 1.0) } else { 0.0 };
    let mut d = grid[best].0 + offset * step;
    // A few golden-section steps tighten the parabolic estimate.
    let (mut x0, mut x1) = (d - 0.5 * step, d + 0.5 * step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..30 {
        let (m1, m2) = (x1 - g * (x1 - x0), x0 + g * (x1 - x0));
        if objective(m1) < objective(m2) {
            x1 = m2;
        } else {
            x0 = m1;
        }
    }
    if objective(0.5 * (x0 + x1)) < objective(d) {
        d = 0.5 * (x0 + x1);
    }

    let shifted: Vec<f64> = ts.iter().map(|t| r_at(t - d)).collect();
    let rr: f64 = shifted.iter().map(|x| x * x).sum();
    if !(rr > 0.0) {
        return Err(Error::DegenerateCurve);
    }
    let scale = s.iter().zip(&shifted).map(|(y, x)| y * x).sum::<f64>() / rr;
    let n = s.len();
    let ssr: f64 = s.iter().zip(&shifted).map(|(y, x)| (y - scale * x).powi(2)).sum();
    let before: f64 = ts.iter().zip(&s).map(|(t, y)| (y - r_at(*t)).powi(2)).sum();

    // Covariance σ²(JᵀJ)⁻¹ of the two-parameter model.
    let h = 1e-3 * reference.dt;
    let mut jtj = [[0.0; 2]; 2];
    for (t, x) in ts.iter().zip(&shifted) {
        let slope = (r_at(t - d + h) - r_at(t - d - h)) / (2.0 * h);
        let row = [-scale * slope, *x];
        for i in 0..2 {
            for j in 0..2 {
                jtj[i][j] += row[i] * row[j];
            }
        }
    }
    let sigma2 = ssr / (n.saturating_sub(2).max(1)) as f64;
    let cov = invert_small(jtj).ok_or(Error::DegenerateCurve)?;
    let shift_err = (sigma2 * cov[0][0]).max(0.0).sqrt();
    let scale_err = (sigma2 * cov[1][1]).max(0.0).sqrt();

    if !(scale > 0.0) {
        return Err(Error::DegenerateCurve);
    }
    Ok(BeatFit {
        time_shift: d,
        time_shift_err: shift_err,
        phase_shift: d * omega,
        phase_shift_err: shift_err * omega,
        scale,
        scale_err,
        beat_frequency: omega,
        residual_rms_before: (before / n as f64).sqrt(),
        residual_rms: (ssr / n as f64).sqrt(),
        fit_window: (ts[0], ts[n - 1]),
        bin_width: test.dt,
        n_points: n,
    })
}
