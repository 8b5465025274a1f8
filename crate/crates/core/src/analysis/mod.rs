//! Beat fitting: envelopes, curve matching and sweep regressions.

mod envelope;
mod matching;
mod regression;
mod spectrum;

pub use envelope::{envelope_fit, Envelope, Quadratic};
pub use matching::{match_curves, BeatFit};
pub use regression::{linear_regression, sweep_regression, write_sweep_csv, RegressionResult, SweepPoint};
pub use spectrum::dominant_frequency;

use crate::clickstream::CorrelationHistogram;
use crate::engine::G2Curve;
use crate::error::{Error, Result};

/// Samples on a uniform time grid, `t_k = t0 + k·dt` (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Curve {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(Error::param("dt", "curve spacing must be positive and finite"));
        }
        Ok(Curve { t0, dt, values })
    }

    /// Background-corrected, normalised histogram sampled at bin centres.
    pub fn from_histogram(hist: &CorrelationHistogram) -> Self {
        let dt = hist.bin_width();
        Curve { t0: dt / 2.0, dt, values: hist.normalized() }
    }

    pub fn from_g2(curve: &G2Curve) -> Self {
        Curve { t0: curve.tau.first().copied().unwrap_or(0.0), dt: curve.dt(), values: curve.g2.clone() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.len().saturating_sub(1))
    }

    /// Indices of samples with `start ≤ t ≤ end`.
    pub fn indices_in(&self, (start, end): (f64, f64)) -> std::ops::Range<usize> {
        let eps = 1e-9 * self.dt;
        let lo = ((start - self.t0 - eps) / self.dt).ceil().max(0.0) as usize;
        let hi = (((end - self.t0 + eps) / self.dt).floor() + 1.0).max(0.0) as usize;
        lo.min(self.len())..hi.min(self.len()).max(lo.min(self.len()))
    }

    /// Catmull-Rom interpolation; clamps outside the sampled range.
    pub fn interpolate(&self, t: f64) -> f64 {
        catmull_rom(&self.values, (t - self.t0) / self.dt)
    }
}

pub(crate) fn catmull_rom(v: &[f64], x: f64) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return v[0];
    }
    let x = x.clamp(0.0, (n - 1) as f64);
    let i = (x.floor() as usize).min(n - 2);
    let f = x - i as f64;
    let p = |k: isize| v[k.clamp(0, n as isize - 1) as usize];
    let (p0, p1, p2, p3) = (p(i as isize - 1), p(i as isize), p(i as isize + 1), p(i as isize + 2));
    0.5 * (2.0 * p1
        + (p2 - p0) * f
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f * f
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * f * f * f)
}

/// What a rebinned histogram is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinPurpose {
    Phase,
    Amplitude,
}

impl BinPurpose {
    pub fn bin_width_ps(self) -> u64 {
        match self {
            BinPurpose::Phase => 1_640,
            BinPurpose::Amplitude => 16_400,
        }
    }
}

/// Rebin to 1.64 ns for phase work or 16.4 ns for amplitude work.
pub fn bin_for_purpose(hist: &CorrelationHistogram, purpose: BinPurpose) -> Result<CorrelationHistogram> {
    hist.rebin_to(purpose.bin_width_ps())
}

/// Solve a small dense system by Gaussian elimination with partial pivoting.
pub(crate) fn solve_small<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for c in 0..N {
        let p = (c..N).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..N {
            let f = a[r][c] / a[c][c];
            for k in c..N {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; N];
    for r in (0..N).rev() {
        let s: f64 = (r + 1..N).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Inverse of a 2×2 or 3×3 symmetric matrix via column solves.
pub(crate) fn invert_small<const N: usize>(a: [[f64; N]; N]) -> Option<[[f64; N]; N]> {
    let mut inv = [[0.0; N]; N];
    for c in 0..N {
        let mut e = [0.0; N];
        e[c] = 1.0;
        let col = solve_small(a, e)?;
        for r in 0..N {
            inv[r][c] = col[r];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clickstream::{correlate, synthetic, Channel, CorrelationParams};

    #[test]
    fn window_indices() {
        let c = Curve::new(0.5, 1.0, vec![0.0; 10]).unwrap();
        assert_eq!(c.indices_in((0.0, 3.5)), 0..4);
        assert_eq!(c.indices_in((2.0, 2.9)), 2..3);
        assert_eq!(c.indices_in((20.0, 30.0)), 10..10);
    }

    #[test]
    fn interpolation_is_exact_for_cubics_inside() {
        let v: Vec<f64> = (0..20).map(|k| (k as f64).powi(2) * 0.3 - k as f64).collect();
        let c = Curve::new(0.0, 1.0, v).unwrap();
        for x in [2.25, 7.5, 13.9] {
            assert!((c.interpolate(x) - (0.3 * x * x - x)).abs() < 1e-12);
        }
        assert_eq!(c.interpolate(5.0), c.values[5]);
    }

    #[test]
    fn small_solver() {
        let x = solve_small([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]], [3.0, 5.0, 5.0]).unwrap();
        for (a, b) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(solve_small([[1.0, 2.0], [2.0, 4.0]], [1.0, 2.0]).is_none());
    }

    #[test]
    fn purpose_rebinning_conserves_counts() {
        let s = synthetic::poisson_stream(&[(Channel::ApdA, 2e5), (Channel::ApdB, 2e5)], 0.5, 3);
        let h = correlate(&s, &CorrelationParams::default()).unwrap();
        let phase = bin_for_purpose(&h, BinPurpose::Phase).unwrap();
        let amp = bin_for_purpose(&h, BinPurpose::Amplitude).unwrap();
        assert_eq!(phase.total(), h.total());
        assert_eq!(amp.total(), h.total());
        assert_eq!(amp, bin_for_purpose(&phase, BinPurpose::Amplitude).unwrap());
        for k in 0..amp.len() - 1 {
            assert_eq!(amp.counts[k], phase.counts[10 * k..10 * k + 10].iter().sum::<u64>());
        }
        let odd = CorrelationParams { bin_width_ps: 1_000, ..CorrelationParams::default() };
        let h = correlate(&s, &odd).unwrap();
        assert!(matches!(bin_for_purpose(&h, BinPurpose::Phase), Err(Error::IncommensurateBins { .. })));
    }
}
