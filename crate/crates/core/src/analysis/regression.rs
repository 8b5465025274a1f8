use std::io::Write;

use super::{invert_small, BeatFit};
use crate::error::{Error, Result};

/// Straight-line fit `y = intercept + slope·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub slope: f64,
    pub slope_err: f64,
    pub intercept: f64,
    pub intercept_err: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Per-point uncertainties used as weights (zero when unweighted).
    pub y_err: Vec<f64>,
    pub chi2_reduced: f64,
}

/// Weighted least squares with weights `1/σ²`. Falls back to an unweighted
/// fit when any `σ` is not positive. The covariance is scaled by the
/// reduced χ².
pub fn linear_regression(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<RegressionResult> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::InsufficientPoints { needed: 3, got: n.min(y.len()) });
    }
    let weighted = sigma.len() == n && sigma.iter().all(|s| *s > 0.0 && s.is_finite());
    let w: Vec<f64> = if weighted { sigma.iter().map(|s| 1.0 / (s * s)).collect() } else { vec![1.0; n] };
    let (mut s0, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        s0 += w[i];
        sx += w[i] * x[i];
        sxx += w[i] * x[i] * x[i];
        sy += w[i] * y[i];
        sxy += w[i] * x[i] * y[i];
    }
    let cov = invert_small([[s0, sx], [sx, sxx]]).ok_or(Error::InsufficientPoints { needed: 3, got: 1 })?;
    let intercept = cov[0][0] * sy + cov[0][1] * sxy;
    let slope = cov[1][0] * sy + cov[1][1] * sxy;
    let chi2: f64 = (0..n).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let chi2_reduced = chi2 / (n - 2) as f64;
    Ok(RegressionResult {
        slope,
        slope_err: (chi2_reduced * cov[1][1]).max(0.0).sqrt(),
        intercept,
        intercept_err: (chi2_reduced * cov[0][0]).max(0.0).sqrt(),
        x: x.to_vec(),
        y: y.to_vec(),
        y_err: if weighted { sigma.to_vec() } else { vec![0.0; n] },
        chi2_reduced,
    })
}

/// One pulse width of a sweep and its fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Dark-window width, seconds.
    pub width: f64,
    pub fit: BeatFit,
}

/// Phase shift vs. width (slope: light shift, rad/s) and ln(scale) vs.
/// width (slope: decoherence rate, 1/s).
pub fn sweep_regression(points: &[SweepPoint]) -> Result<(RegressionResult, RegressionResult)> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: points.len() });
    }
    let x: Vec<f64> = points.iter().map(|p| p.width).collect();
    let phase: Vec<f64> = points.iter().map(|p| p.fit.phase_shift).collect();
    let phase_err: Vec<f64> = points.iter().map(|p| p.fit.phase_shift_err).collect();
    let log_scale: Vec<f64> = points.iter().map(|p| p.fit.scale.ln()).collect();
    let log_err: Vec<f64> = points.iter().map(|p| p.fit.scale_err / p.fit.scale).collect();
    Ok((linear_regression(&x, &phase, &phase_err)?, linear_regression(&x, &log_scale, &log_err)?))
}

/// CSV with columns `width_us,phase_rad,phase_err_rad,scale,scale_err`.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], mut w: W) -> Result<()> {
    writeln!(w, "width_us,phase_rad,phase_err_rad,scale,scale_err")?;
    for p in points {
        writeln!(
            w,
            "{:.4},{:.6},{:.6},{:.6},{:.6}",
            p.width * 1e6,
            p.fit.phase_shift,
            p.fit.phase_shift_err,
            p.fit.scale,
            p.fit.scale_err
        )?;
    }
    Ok(())
}
