use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Angular frequency (rad/s) of the strongest spectral peak of `values`
/// sampled every `dt` seconds.
///
/// A linear trend is removed and a Hann window applied; the spectrum is
/// zero-padded eightfold and the peak refined by a parabola through the
/// log-magnitudes of the three highest bins. Peaks below 1.5 cycles per
/// record are ignored.
pub fn dominant_frequency(values: &[f64], dt: f64) -> Result<f64> {
    let n = values.len();
    if n < 8 {
        return Err(Error::InsufficientPoints { needed: 8, got: n });
    }
    let detrended = detrend(values);
    let scale = detrended.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::DegenerateCurve);
    }
    let padded = (8 * n).next_power_of_two();
    let mut buf: Vec<C64> = vec![C64::new(0.0, 0.0); padded];
    for (k, v) in detrended.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
        buf[k] = C64::new(v * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let mag: Vec<f64> = buf[..padded / 2].iter().map(|c| c.norm()).collect();
    let first = ((1.5 * padded as f64 / n as f64).ceil() as usize).max(1);
    if first + 2 >= mag.len() {
        return Err(Error::DegenerateCurve);
    }
    let k = (first..mag.len() - 1).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).expect("non-empty search range");
    if mag[k] <= 0.0 {
        return Err(Error::DegenerateCurve);
    }
    let (a, b, c) = (mag[k - 1].max(1e-300).ln(), mag[k].ln(), mag[k + 1].max(1e-300).ln());
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let f = (k as f64 + offset) / (padded as f64 * dt);
    Ok(2.0 * std::f64::consts::PI * f)
}

fn detrend(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, v) in values.iter().enumerate() {
        let x = k as f64 - xm;
        sxy += x * (v - ym);
        sxx += x * x;
    }
    let slope = sxy / sxx;
    values.iter().enumerate().map(|(k, v)| v - ym - slope * (k as f64 - xm)).collect()
}
