//! Synthetic click streams for tests, fixtures and dead-time studies.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Channel, ClickStream, Event, Origin};
use crate::units::TICKS_PER_SECOND;

/// Exponential deviate with the given rate, seconds.
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Ticks of a Poisson process of `rate` (1/s) on `[0, duration)` seconds.
pub fn poisson_ticks<R: Rng + ?Sized>(rng: &mut R, rate: f64, duration: f64) -> Vec<u64> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let mut t = 0.0;
    loop {
        t += exponential(rng, rate);
        if t >= duration {
            return out;
        }
        out.push((t * TICKS_PER_SECOND).round() as u64);
    }
}

/// Independent Poisson processes, one per `(channel, rate)` entry, tagged as background.
pub fn poisson_stream(channels: &[(Channel, f64)], duration: f64, seed: u64) -> ClickStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    for &(channel, rate) in channels {
        events.extend(
            poisson_ticks(&mut rng, rate, duration).into_iter().map(|t| Event::new(t, channel, Origin::Background)),
        );
    }
    ClickStream::from_events(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_is_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = poisson_ticks(&mut rng, 1e5, 1.0);
        let n = t.len() as f64;
        assert!((n - 1e5).abs() < 5.0 * 1e5f64.sqrt());
        assert!(t.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn seeded_streams_repeat() {
        let a = poisson_stream(&[(Channel::ApdA, 1e4)], 0.1, 5);
        let b = poisson_stream(&[(Channel::ApdA, 1e4)], 0.1, 5);
        assert_eq!(a, b);
        assert_ne!(a, poisson_stream(&[(Channel::ApdA, 1e4)], 0.1, 6));
    }
}
