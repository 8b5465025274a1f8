use std::io::Write;

use rayon::prelude::*;

use super::{Channel, ClickStream};
use crate::error::{Error, Result};
use crate::units::TICKS_PER_SECOND;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationMode {
    /// Only the first stop after each start.
    StartStop,
    /// Every stop within the lag range of each start.
    #[default]
    MultiStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrelationParams {
    pub bin_width_ps: u64,
    /// Lags `0 ≤ τ < t_max` are histogrammed.
    pub t_max_ps: u64,
    pub mode: CorrelationMode,
    pub start_channel: Channel,
    pub stop_channel: Channel,
}

impl Default for CorrelationParams {
    fn default() -> Self {
        CorrelationParams {
            bin_width_ps: 1_640,
            t_max_ps: 4_700_000,
            mode: CorrelationMode::MultiStop,
            start_channel: Channel::ApdA,
            stop_channel: Channel::ApdB,
        }
    }
}

/// Start–stop lag histogram.
///
/// Bin `k` covers lags `[k·w, (k+1)·w)` except that the last bin may be
/// narrower after rebinning. The uncorrelated expectation for a bin of width
/// `w` is `n_starts · (n_stops / span) · w`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationHistogram {
    pub bin_width_ps: u64,
    /// Width of the final bin, equal to `bin_width_ps` unless rebinning padded it.
    pub last_bin_ps: u64,
    pub counts: Vec<u64>,
    pub n_starts: u64,
    pub n_stops: u64,
    /// Time span of the correlated stream, ps.
    pub span_ps: u64,
    /// Uncorrelated counts per full-width bin that have been subtracted as background.
    pub background_level: f64,
}

impl CorrelationHistogram {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width_ps as f64 / TICKS_PER_SECOND
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn width_ps(&self, k: usize) -> u64 {
        if k + 1 == self.counts.len() {
            self.last_bin_ps
        } else {
            self.bin_width_ps
        }
    }

    /// Bin centre, seconds.
    pub fn center(&self, k: usize) -> f64 {
        (k as u64 * self.bin_width_ps) as f64 / TICKS_PER_SECOND + 0.5 * self.width_ps(k) as f64 / TICKS_PER_SECOND
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.center(k)).collect()
    }

    /// Uncorrelated expectation per full-width bin.
    pub fn plateau(&self) -> f64 {
        if self.span_ps == 0 {
            return 0.0;
        }
        self.n_starts as f64 * self.n_stops as f64 / self.span_ps as f64 * self.bin_width_ps as f64
    }

    /// Fraction of the uncorrelated plateau removed as background.
    pub fn suppressed_fraction(&self) -> f64 {
        let p = self.plateau();
        if p > 0.0 {
            self.background_level / p
        } else {
            0.0
        }
    }

    /// `(C − B)/(N − B)` per bin, scaled for the bin's width.
    pub fn normalized(&self) -> Vec<f64> {
        let full = self.bin_width_ps as f64;
        let p = self.plateau();
        (0..self.len())
            .map(|k| {
                let f = self.width_ps(k) as f64 / full;
                let b = self.background_level * f;
                let n = p * f;
                if n - b > 0.0 {
                    (self.counts[k] as f64 - b) / (n - b)
                } else {
                    f64::NAN
                }
            })
            .collect()
    }

    /// Poisson standard error of each normalised value.
    pub fn normalized_errors(&self) -> Vec<f64> {
        let full = self.bin_width_ps as f64;
        let p = self.plateau();
        (0..self.len())
            .map(|k| {
                let f = self.width_ps(k) as f64 / full;
                let denom = p * f - self.background_level * f;
                (self.counts[k] as f64).max(1.0).sqrt() / denom
            })
            .collect()
    }

    /// Sum groups of `factor` adjacent bins; a short final group becomes a narrower bin.
    pub fn rebin(&self, factor: usize) -> Result<CorrelationHistogram> {
        if factor == 0 {
            return Err(Error::param("factor", "rebin factor must be positive"));
        }
        let counts: Vec<u64> = self.counts.chunks(factor).map(|c| c.iter().sum()).collect();
        let groups = counts.len();
        let last_start = (groups.saturating_sub(1)) * factor;
        let last_bin_ps = (last_start..self.len()).map(|k| self.width_ps(k)).sum();
        Ok(CorrelationHistogram {
            bin_width_ps: self.bin_width_ps * factor as u64,
            last_bin_ps,
            counts,
            n_starts: self.n_starts,
            n_stops: self.n_stops,
            span_ps: self.span_ps,
            background_level: self.background_level * factor as f64,
        })
    }

    /// Rebin to `target_ps`, which must be a whole multiple of the current width.
    pub fn rebin_to(&self, target_ps: u64) -> Result<CorrelationHistogram> {
        if target_ps == 0 || !target_ps.is_multiple_of(self.bin_width_ps) {
            return Err(Error::IncommensurateBins { source_ps: self.bin_width_ps, target_ps });
        }
        self.rebin((target_ps / self.bin_width_ps) as usize)
    }

    /// CSV with columns `tau_ns,counts,g2_normalized`; τ is the bin centre.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau_ns,counts,g2_normalized")?;
        for (k, g) in self.normalized().iter().enumerate() {
            writeln!(w, "{:.4},{},{:.9}", self.center(k) * 1e9, self.counts[k], g)?;
        }
        Ok(())
    }
}

/// Histogram lags from start-channel to stop-channel clicks.
///
/// When start and stop share a channel an event is never paired with itself.
/// Work is split over starts and merged by exact integer sums.
pub fn correlate(stream: &ClickStream, params: &CorrelationParams) -> Result<CorrelationHistogram> {
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }
    if params.bin_width_ps == 0 {
        return Err(Error::param("bin_width", "must be positive"));
    }
    if params.t_max_ps < params.bin_width_ps {
        return Err(Error::param("t_max", "must be at least one bin width"));
    }
    let n_bins = params.t_max_ps.div_ceil(params.bin_width_ps) as usize;
    let t_max = params.t_max_ps;
    let starts = stream.ticks(params.start_channel);
    let stops = stream.ticks(params.stop_channel);
    let same = params.start_channel == params.stop_channel;
    let (first, last) = stream.span().expect("non-empty stream");

    let chunk = (starts.len() / (4 * rayon::current_num_threads()).max(1)).max(1024);
    let counts = starts
        .par_chunks(chunk)
        .enumerate()
        .map(|(ci, block)| {
            let mut h = vec![0u64; n_bins];
            let base = ci * chunk;
            // Index of the first stop not earlier than the current start.
            let mut j = stops.partition_point(|&s| s < block[0]);
            for (bi, &s) in block.iter().enumerate() {
                while j < stops.len() && stops[j] < s {
                    j += 1;
                }
                let mut k = j;
                if same {
                    // Skip the start itself: starts and stops are the same sorted list.
                    k = base + bi + 1;
                }
                while k < stops.len() {
                    let lag = stops[k] - s;
                    if lag >= t_max {
                        break;
                    }
                    h[(lag / params.bin_width_ps) as usize] += 1;
                    if params.mode == CorrelationMode::StartStop {
                        break;
                    }
                    k += 1;
                }
            }
            h
        })
        .reduce(
            || vec![0u64; n_bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let full = n_bins as u64 * params.bin_width_ps;
    Ok(CorrelationHistogram {
        bin_width_ps: params.bin_width_ps,
        last_bin_ps: params.bin_width_ps - (full - t_max),
        counts,
        n_starts: starts.len() as u64,
        n_stops: stops.len() as u64,
        span_ps: (last - first).max(1),
        background_level: 0.0,
    })
}

/// Set the uncorrelated background (counts per full-width bin) to be removed
/// on normalisation. `0` leaves the histogram unchanged.
pub fn subtract_background(hist: &CorrelationHistogram, dark_level: f64) -> Result<CorrelationHistogram> {
    if !(dark_level >= 0.0 && dark_level.is_finite()) {
        return Err(Error::param("dark_level", "must be a non-negative count level"));
    }
    let plateau = hist.plateau();
    if dark_level >= plateau {
        return Err(Error::IllPosedBackground { dark_level, plateau });
    }
    Ok(CorrelationHistogram { background_level: dark_level, ..hist.clone() })
}

/// Mean counts per bin over a segment recorded with the drive off.
pub fn estimate_dark_level(counts: &[u64]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, got: 0 });
    }
    Ok(counts.iter().sum::<u64>() as f64 / counts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clickstream::{synthetic, Event, Origin};
    use proptest::prelude::*;

    fn ev(t: u64, c: Channel) -> Event {
        Event::new(t, c, Origin::Cavity)
    }

    /// Direct O(n²) pair count.
    fn brute_force(stream: &ClickStream, p: &CorrelationParams) -> Vec<u64> {
        let n = p.t_max_ps.div_ceil(p.bin_width_ps) as usize;
        let mut h = vec![0u64; n];
        let ev = stream.events();
        for (i, a) in ev.iter().enumerate() {
            if a.channel != p.start_channel {
                continue;
            }
            for (j, b) in ev.iter().enumerate() {
                if b.channel != p.stop_channel || i == j || b.tick < a.tick {
                    continue;
                }
                if p.start_channel == p.stop_channel && j < i {
                    continue;
                }
                let lag = b.tick - a.tick;
                if lag < p.t_max_ps {
                    h[(lag / p.bin_width_ps) as usize] += 1;
                }
            }
        }
        h
    }

    fn arb_stream() -> impl Strategy<Value = ClickStream> {
        proptest::collection::vec((0u64..5_000_000, 0u8..2), 1..150).prop_map(|v| {
            ClickStream::from_events(v.into_iter().map(|(t, c)| ev(t, Channel::from_code(c).unwrap())).collect())
        })
    }

    fn params(bw: u64, tmax: u64) -> CorrelationParams {
        CorrelationParams { bin_width_ps: bw, t_max_ps: tmax, ..CorrelationParams::default() }
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(matches!(correlate(&ClickStream::new(), &params(1640, 16400)), Err(Error::EmptyStream)));
    }

    #[test]
    fn fixed_offset_pairs_fill_one_bin() {
        let mut events = Vec::new();
        for k in 0..500u64 {
            let t = k * 10_000_000;
            events.push(ev(t, Channel::ApdA));
            events.push(ev(t + 100_000, Channel::ApdB));
        }
        let h = correlate(&ClickStream::from_events(events), &params(1_640, 1_000_000)).unwrap();
        let bin = (100_000 / 1_640) as usize;
        assert_eq!(h.counts[bin], 500);
        assert_eq!(h.total(), 500);
    }

    #[test]
    fn start_stop_counts_first_stop_only() {
        let s = ClickStream::from_events(vec![ev(0, Channel::ApdA), ev(10, Channel::ApdB), ev(20, Channel::ApdB)]);
        let mut p = params(5, 100);
        p.mode = CorrelationMode::StartStop;
        assert_eq!(correlate(&s, &p).unwrap().total(), 1);
        p.mode = CorrelationMode::MultiStop;
        assert_eq!(correlate(&s, &p).unwrap().total(), 2);
    }

    #[test]
    fn poisson_stream_normalizes_to_one() {
        let s = synthetic::poisson_stream(&[(Channel::ApdA, 2e5), (Channel::ApdB, 2e5)], 2.0, 7);
        let h = correlate(&s, &params(16_400, 4_700_000)).unwrap();
        let g = h.normalized();
        let err = h.normalized_errors();
        let mut outliers = 0;
        for (v, e) in g.iter().zip(&err) {
            if (v - 1.0).abs() > 3.0 * e {
                outliers += 1;
            }
        }
        // 287 bins; a 3σ excursion has probability 0.27% per bin.
        assert!(outliers <= 4, "{outliers} bins beyond 3σ");
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn rebin_preserves_counts_and_composes() {
        let s = synthetic::poisson_stream(&[(Channel::ApdA, 1e5), (Channel::ApdB, 1e5)], 0.5, 3);
        let h = correlate(&s, &params(1_640, 4_700_000)).unwrap();
        let r10 = h.rebin(10).unwrap();
        assert_eq!(r10.total(), h.total());
        assert_eq!(r10.bin_width_ps, 16_400);
        assert_eq!(r10.counts[0], h.counts[..10].iter().sum::<u64>());
        let r3 = h.rebin(3).unwrap();
        assert_eq!(r3.rebin(7).unwrap(), h.rebin(21).unwrap());
        assert!(matches!(h.rebin_to(2_000), Err(Error::IncommensurateBins { .. })));
        assert_eq!(h.rebin_to(16_400).unwrap(), r10);
    }

    #[test]
    fn background_subtraction() {
        let s = synthetic::poisson_stream(&[(Channel::ApdA, 1e5), (Channel::ApdB, 1e5)], 0.2, 11);
        let h = correlate(&s, &params(16_400, 1_000_000)).unwrap();
        assert_eq!(subtract_background(&h, 0.0).unwrap(), h);
        assert!(matches!(subtract_background(&h, h.plateau() * 1.01), Err(Error::IllPosedBackground { .. })));

        // Signal plus a flat offset is recovered exactly.
        let plateau_signal = 1000.0;
        let bg = 250u64;
        let signal: Vec<u64> =
            (0..50).map(|k| (plateau_signal * (1.0 + 0.5 * (k as f64 * 0.3).cos())) as u64).collect();
        let n_starts = 1_000u64;
        let span_ps = 1_000_000_000u64;
        let bw = 16_400u64;
        // Choose n_stops so the plateau equals signal plateau + background.
        let n_stops = ((plateau_signal + bg as f64) * span_ps as f64 / (n_starts as f64 * bw as f64)).round() as u64;
        let h = CorrelationHistogram {
            bin_width_ps: bw,
            last_bin_ps: bw,
            counts: signal.iter().map(|c| c + bg).collect(),
            n_starts,
            n_stops,
            span_ps,
            background_level: 0.0,
        };
        let plateau = h.plateau();
        let sub = subtract_background(&h, bg as f64).unwrap();
        for (k, g) in sub.normalized().iter().enumerate() {
            assert!((g - signal[k] as f64 / (plateau - bg as f64)).abs() < 1e-12);
        }
        assert!((sub.suppressed_fraction() - bg as f64 / plateau).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn matches_brute_force(s in arb_stream(), bw in 1u64..50_000, same in any::<bool>()) {
            let mut p = params(bw, 2_000_000.max(bw));
            if same {
                p.stop_channel = p.start_channel;
            }
            prop_assert_eq!(correlate(&s, &p).unwrap().counts, brute_force(&s, &p));
        }

        #[test]
        fn translation_invariant(s in arb_stream(), offset in 0u64..1_000_000_000_000) {
            let p = params(10_000, 1_000_000);
            prop_assert_eq!(correlate(&s, &p).unwrap(), correlate(&s.translate(offset), &p).unwrap());
        }

        #[test]
        fn reversal_with_swapped_detectors_is_symmetric(s in arb_stream()) {
            let p = params(7_000, 3_000_000);
            let (_, last) = s.span().unwrap();
            let r = s.time_reversed(last + 123, true);
            let a = correlate(&s, &p).unwrap();
            let b = correlate(&r, &p).unwrap();
            prop_assert_eq!(&a.counts, &b.counts);
            prop_assert_eq!(a.n_starts * a.n_stops, b.n_starts * b.n_stops);
        }

        #[test]
        fn disjoint_merge_adds_counts(a in arb_stream(), b in arb_stream()) {
            let p = params(10_000, 1_000_000);
            // Separate the streams by more than the lag range so no cross pairs form.
            let shifted = b.translate(10_000_000);
            let merged = a.merge(&shifted);
            let h = correlate(&merged, &p).unwrap();
            let ha = correlate(&a, &p).unwrap();
            let hb = correlate(&shifted, &p).unwrap();
            let sum: Vec<u64> = ha.counts.iter().zip(&hb.counts).map(|(x, y)| x + y).collect();
            prop_assert_eq!(h.counts, sum);
        }

        #[test]
        fn rebin_conserves_total(s in arb_stream(), f in 1usize..40) {
            let h = correlate(&s, &params(1_640, 3_000_000)).unwrap();
            let r = h.rebin(f).unwrap();
            prop_assert_eq!(r.total(), h.total());
            let w: u64 = (0..r.len()).map(|k| r.width_ps(k)).sum();
            let w0: u64 = (0..h.len()).map(|k| h.width_ps(k)).sum();
            prop_assert_eq!(w, w0);
        }
    }
}
