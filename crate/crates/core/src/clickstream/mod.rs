//! Time-tagged detector events, the missed-trigger filter, and the start–stop
//! correlator.

mod correlate;
mod filter;
mod io;
pub mod synthetic;

pub use correlate::{
    correlate, estimate_dark_level, subtract_background, CorrelationHistogram, CorrelationMode, CorrelationParams,
};
pub use filter::{filter_triggered, FilterConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Channel {
    ApdA = 0,
    ApdB = 1,
    /// Copy of the delay generator's output, one per accepted trigger.
    GateCopy = 2,
}

impl Channel {
    pub fn from_code(code: u8) -> Option<Channel> {
        match code {
            0 => Some(Channel::ApdA),
            1 => Some(Channel::ApdB),
            2 => Some(Channel::GateCopy),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::ApdA => "apd_a",
            Channel::ApdB => "apd_b",
            Channel::GateCopy => "gate_copy",
        }
    }

    pub fn from_name(s: &str) -> Option<Channel> {
        match s {
            "apd_a" | "a" | "A" => Some(Channel::ApdA),
            "apd_b" | "b" | "B" => Some(Channel::ApdB),
            "gate_copy" | "gate" => Some(Channel::GateCopy),
            _ => None,
        }
    }
}

/// Where a simulated event came from. Real data is tagged `Cavity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Origin {
    Cavity = 0,
    Background = 1,
}

impl Origin {
    pub fn from_code(code: u8) -> Option<Origin> {
        match code {
            0 => Some(Origin::Cavity),
            1 => Some(Origin::Background),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Origin::Cavity => "cavity",
            Origin::Background => "background",
        }
    }

    pub fn from_name(s: &str) -> Option<Origin> {
        match s {
            "cavity" => Some(Origin::Cavity),
            "background" => Some(Origin::Background),
            _ => None,
        }
    }
}

/// One time-tagged event; `tick` is in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    pub tick: u64,
    pub channel: Channel,
    pub origin: Origin,
}

impl Event {
    pub fn new(tick: u64, channel: Channel, origin: Origin) -> Self {
        Event { tick, channel, origin }
    }
}

/// Events ordered by tick (ties ordered by channel, then origin).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClickStream {
    events: Vec<Event>,
}

impl ClickStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sorts the events.
    pub fn from_events(mut events: Vec<Event>) -> Self {
        events.sort_unstable();
        ClickStream { events }
    }

    /// Rejects events that are not already in order.
    pub fn from_sorted(events: Vec<Event>) -> Result<Self> {
        if let Some(i) = events.windows(2).position(|w| w[1].tick < w[0].tick) {
            return Err(Error::Format(format!(
                "timestamps decrease at event {} ({} ps after {} ps)",
                i + 1,
                events[i + 1].tick,
                events[i].tick
            )));
        }
        Ok(Self::from_events(events))
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn ticks(&self, channel: Channel) -> Vec<u64> {
        self.events.iter().filter(|e| e.channel == channel).map(|e| e.tick).collect()
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.events.iter().filter(|e| e.channel == channel).count()
    }

    /// First and last tick.
    pub fn span(&self) -> Option<(u64, u64)> {
        Some((self.events.first()?.tick, self.events.last()?.tick))
    }

    /// Union of two streams.
    pub fn merge(&self, other: &ClickStream) -> ClickStream {
        let mut events = Vec::with_capacity(self.len() + other.len());
        events.extend_from_slice(&self.events);
        events.extend_from_slice(&other.events);
        Self::from_events(events)
    }

    /// Shift every tick by `offset`.
    pub fn translate(&self, offset: u64) -> ClickStream {
        ClickStream { events: self.events.iter().map(|e| Event { tick: e.tick + offset, ..*e }).collect() }
    }

    /// Reflect time about `pivot` (`t → pivot − t`), optionally exchanging the two detectors.
    pub fn time_reversed(&self, pivot: u64, swap_detectors: bool) -> ClickStream {
        let swap = |c: Channel| match (swap_detectors, c) {
            (true, Channel::ApdA) => Channel::ApdB,
            (true, Channel::ApdB) => Channel::ApdA,
            (_, c) => c,
        };
        Self::from_events(
            self.events
                .iter()
                .map(|e| {
                    assert!(e.tick <= pivot, "pivot {pivot} precedes event at {}", e.tick);
                    Event { tick: pivot - e.tick, channel: swap(e.channel), origin: e.origin }
                })
                .collect(),
        )
    }

    pub fn retain(&mut self, f: impl FnMut(&Event) -> bool) {
        self.events.retain(f);
    }
}

impl FromIterator<Event> for ClickStream {
    fn from_iter<I: IntoIterator<Item = Event>>(iter: I) -> Self {
        Self::from_events(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: u64, c: Channel) -> Event {
        Event::new(t, c, Origin::Cavity)
    }

    #[test]
    fn from_sorted_rejects_disorder() {
        assert!(ClickStream::from_sorted(vec![ev(5, Channel::ApdA), ev(3, Channel::ApdB)]).is_err());
        let s = ClickStream::from_sorted(vec![ev(3, Channel::ApdB), ev(3, Channel::ApdA), ev(9, Channel::GateCopy)])
            .unwrap();
        assert_eq!(s.events()[0].channel, Channel::ApdA);
    }

    #[test]
    fn reversal_is_an_involution() {
        let s = ClickStream::from_events(vec![ev(1, Channel::ApdA), ev(7, Channel::ApdB), ev(10, Channel::GateCopy)]);
        assert_eq!(s.time_reversed(20, true).time_reversed(20, true), s);
        let r = s.time_reversed(10, true);
        assert_eq!(r.events()[0], ev(0, Channel::GateCopy));
        assert_eq!(r.events()[1], ev(3, Channel::ApdA));
    }

    #[test]
    fn channel_codes_roundtrip() {
        for c in [Channel::ApdA, Channel::ApdB, Channel::GateCopy] {
            assert_eq!(Channel::from_code(c as u8), Some(c));
            assert_eq!(Channel::from_name(c.name()), Some(c));
        }
        assert_eq!(Channel::from_code(7), None);
    }
}
