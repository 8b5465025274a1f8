use super::{dominant_frequency, solve_small, Curve};
use crate::error::{Error, Result};

/// `c0 + c1·(t − t_ref) + c2·(t − t_ref)²`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub t_ref: f64,
    pub c: [f64; 3],
}

impl Quadratic {
    pub fn eval(&self, t: f64) -> f64 {
        let x = t - self.t_ref;
        self.c[0] + x * (self.c[1] + x * self.c[2])
    }

    /// Least-squares fit through at least three points.
    pub fn fit(points: &[(f64, f64)], t_ref: f64) -> Option<Quadratic> {
        if points.len() < 3 {
            return None;
        }
        // Work in a unit-scaled variable for conditioning.
        let span = points.iter().map(|p| (p.0 - t_ref).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut ata = [[0.0; 3]; 3];
        let mut atb = [0.0; 3];
        for &(t, y) in points {
            let x = (t - t_ref) / span;
            let row = [1.0, x, x * x];
            for i in 0..3 {
                for j in 0..3 {
                    ata[i][j] += row[i] * row[j];
                }
                atb[i] += row[i] * y;
            }
        }
        let c = solve_small(ata, atb)?;
        Some(Quadratic { t_ref, c: [c[0], c[1] / span, c[2] / (span * span)] })
    }
}

/// Quadratic envelopes through the maxima and minima of an oscillation.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub upper: Quadratic,
    pub lower: Quadratic,
    pub maxima: Vec<(f64, f64)>,
    pub minima: Vec<(f64, f64)>,
    pub window: (f64, f64),
}

impl Envelope {
    pub fn mean(&self, t: f64) -> f64 {
        0.5 * (self.upper.eval(t) + self.lower.eval(t))
    }

    pub fn half_amplitude(&self, t: f64) -> f64 {
        0.5 * (self.upper.eval(t) - self.lower.eval(t))
    }
}

/// Locate the extrema of `curve` inside `window` and fit a quadratic
/// through each set.
pub fn envelope_fit(curve: &Curve, window: (f64, f64)) -> Result<Envelope> {
    let range = curve.indices_in(window);
    if range.len() < 8 {
        return Err(Error::NonOverlappingWindows);
    }
    let raw = &curve.values[range.clone()];
    let smooth = moving_average3(raw);
    let spread =
        smooth.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - smooth.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(spread > 1e-12 * smooth.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
        return Err(Error::DegenerateCurve);
    }
    let omega = dominant_frequency(&smooth, curve.dt)?;
    let period_samples = 2.0 * std::f64::consts::PI / (omega * curve.dt);
    let half = ((period_samples / 4.0).round() as usize).max(1);

    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for i in half..smooth.len().saturating_sub(half) {
        let v = smooth[i];
        let before = &smooth[i - half..i];
        let after = &smooth[i + 1..=i + half];
        let t = |off: f64| curve.t(range.start + i) + off * curve.dt;
        if before.iter().all(|&x| x < v) && after.iter().all(|&x| x <= v) {
            let (off, val) = vertex(smooth[i - 1], v, smooth[i + 1]);
            maxima.push((t(off), val));
        } else if before.iter().all(|&x| x > v) && after.iter().all(|&x| x >= v) {
            let (off, val) = vertex(smooth[i - 1], v, smooth[i + 1]);
            minima.push((t(off), val));
        }
    }
    if maxima.len() < 3 || minima.len() < 3 {
        return Err(Error::TooFewExtrema { maxima: maxima.len(), minima: minima.len() });
    }
    let t_ref = 0.5 * (window.0 + window.1);
    let upper = Quadratic::fit(&maxima, t_ref).ok_or(Error::DegenerateCurve)?;
    let lower = Quadratic::fit(&minima, t_ref).ok_or(Error::DegenerateCurve)?;
    Ok(Envelope { upper, lower, maxima, minima, window })
}

/// Centred 3-point average; end points use the available neighbours.
fn moving_average3(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Vertex of the parabola through `(−1, a), (0, b), (1, c)`.
fn vertex(a: f64, b: f64, c: f64) -> (f64, f64) {
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        return (0.0, b);
    }
    let x = (0.5 * (a - c) / denom).clamp(-1.0, 1.0);
    (x, b - 0.25 * (a - c) * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sampled(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> Curve {
        Curve::new(0.0, dt, (0..n).map(|k| f(k as f64 * dt)).collect()).unwrap()
    }

    #[test]
    fn constant_amplitude_cosine() {
        let w = 2.0 * PI * 2.5e6;
        let c = sampled(|t| 1.2 + 0.4 * (w * t).cos(), 1.64e-9, 2900);
        let e = envelope_fit(&c, (0.3e-6, 4.7e-6)).unwrap();
        for t in [0.5e-6, 2e-6, 4.5e-6] {
            assert!((e.upper.eval(t) - 1.6).abs() < 2e-3, "{}", e.upper.eval(t));
            assert!((e.lower.eval(t) - 0.8).abs() < 2e-3);
            assert!((e.mean(t) - 1.2).abs() < 1e-3);
        }
        assert!(e.upper.c[1].abs() < 1e3 && e.upper.c[2].abs() < 1e9);
    }

    #[test]
    fn decaying_cosine_mean_tracks_offset() {
        let w = 2.0 * PI * 3e6;
        let c = sampled(|t| 1.0 + 0.5 * (-t / 2e-6).exp() * (w * t + 0.7).cos(), 1.64e-9, 2900);
        let e = envelope_fit(&c, (0.2e-6, 4.7e-6)).unwrap();
        let r = c.indices_in((0.2e-6, 4.7e-6));
        for k in r.step_by(50) {
            assert!((e.mean(c.t(k)) - 1.0).abs() < 0.02, "t={} mean={}", c.t(k), e.mean(c.t(k)));
        }
    }

    #[test]
    fn too_few_extrema() {
        let w = 2.0 * PI * 0.5e6;
        let c = sampled(|t| 1.0 + 0.3 * (w * t).cos(), 1.64e-9, 2900);
        assert!(matches!(envelope_fit(&c, (0.0, 4.7e-6)), Err(Error::TooFewExtrema { .. })));
    }

    #[test]
    fn flat_curve() {
        let c = sampled(|_| 1.0, 1e-9, 500);
        assert!(matches!(envelope_fit(&c, (0.0, 4e-7)), Err(Error::DegenerateCurve)));
    }

    #[test]
    fn quadratic_fit_exact() {
        let pts: Vec<(f64, f64)> = (0..6)
            .map(|k| {
                let t = k as f64 * 1e-6;
                (t, 2.0 - 3e5 * t + 4e10 * t * t)
            })
            .collect();
        let q = Quadratic::fit(&pts, 2e-6).unwrap();
        for &(t, y) in &pts {
            assert!((q.eval(t) - y).abs() < 1e-10);
        }
    }
}
