use super::{Channel, ClickStream};
use crate::error::{Error, Result};

/// Matching rule between start clicks and gate copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    pub start_channel: Channel,
    /// Expected delay between a trigger click and its gate copy, ps.
    pub delay_ps: u64,
    /// Half-width of the coincidence window around the expected delay, ps.
    pub window_ps: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { start_channel: Channel::ApdA, delay_ps: 325_000, window_ps: 10_000 }
    }
}

/// Drop start-channel clicks that did not produce a gate copy.
///
/// Each gate copy vouches for at most one start: starts are matched in time
/// order to the earliest unused copy within `delay ± window`. All other
/// events, gate copies included, pass through.
pub fn filter_triggered(stream: &ClickStream, config: &FilterConfig) -> Result<ClickStream> {
    if stream.is_empty() {
        return Ok(ClickStream::new());
    }
    let gates = stream.ticks(Channel::GateCopy);
    if gates.is_empty() {
        return Err(Error::NoGateCopies);
    }
    let mut next_gate = 0usize;
    let mut keep = Vec::with_capacity(stream.len());
    for e in stream.events() {
        if e.channel != config.start_channel {
            keep.push(*e);
            continue;
        }
        let expected = e.tick + config.delay_ps;
        let lo = expected.saturating_sub(config.window_ps);
        let hi = expected + config.window_ps;
        while next_gate < gates.len() && gates[next_gate] < lo {
            next_gate += 1;
        }
        if next_gate < gates.len() && gates[next_gate] <= hi {
            next_gate += 1;
            keep.push(*e);
        }
    }
    Ok(ClickStream::from_events(keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clickstream::{Event, Origin};
    use proptest::prelude::*;

    fn ev(t: u64, c: Channel) -> Event {
        Event::new(t, c, Origin::Cavity)
    }

    #[test]
    fn empty_stream_passes() {
        assert!(filter_triggered(&ClickStream::new(), &FilterConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn requires_gate_copies() {
        let s = ClickStream::from_events(vec![ev(5, Channel::ApdA)]);
        assert!(matches!(filter_triggered(&s, &FilterConfig::default()), Err(Error::NoGateCopies)));
    }

    #[test]
    fn removes_exactly_the_unmatched_starts() {
        let cfg = FilterConfig::default();
        let mut events = Vec::new();
        let mut expected = Vec::new();
        for k in 0..1000u64 {
            let t = k * 50_000_000;
            events.push(ev(t, Channel::ApdA));
            events.push(ev(t + 7_000, Channel::ApdB));
            if k % 50 != 17 {
                events.push(ev(t + cfg.delay_ps + (k % 7) * 1_000, Channel::GateCopy));
                expected.push(t);
            }
        }
        let s = ClickStream::from_events(events);
        let out = filter_triggered(&s, &cfg).unwrap();
        assert_eq!(out.ticks(Channel::ApdA), expected);
        assert_eq!(out.count(Channel::ApdB), 1000);
        assert_eq!(out.count(Channel::GateCopy), 980);
    }

    #[test]
    fn one_copy_vouches_for_one_start() {
        let cfg = FilterConfig::default();
        let s = ClickStream::from_events(vec![
            ev(1_000_000, Channel::ApdA),
            ev(1_004_000, Channel::ApdA),
            ev(1_000_000 + cfg.delay_ps, Channel::GateCopy),
        ]);
        assert_eq!(filter_triggered(&s, &cfg).unwrap().ticks(Channel::ApdA), vec![1_000_000]);
    }

    proptest! {
        #[test]
        fn idempotent(
            starts in proptest::collection::vec(0u64..2_000_000_000, 1..300),
            drop_mask in proptest::collection::vec(any::<bool>(), 300),
            jitter in proptest::collection::vec(0u64..20_000, 300),
        ) {
            let cfg = FilterConfig::default();
            let mut events = Vec::new();
            for (i, &t) in starts.iter().enumerate() {
                events.push(ev(t, Channel::ApdA));
                if !drop_mask[i] {
                    events.push(ev(t + cfg.delay_ps - 10_000 + jitter[i], Channel::GateCopy));
                }
            }
            events.push(ev(0, Channel::GateCopy));
            let s = ClickStream::from_events(events);
            let once = filter_triggered(&s, &cfg).unwrap();
            let twice = filter_triggered(&once, &cfg).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
