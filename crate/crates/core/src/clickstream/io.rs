//! Stream files: 16-byte little-endian binary records
//! (`u64` tick, `u8` channel, `u8` origin, 6 zero bytes) or CSV
//! (`tick_ps,channel,origin`).

use std::io::{BufRead, BufReader, Read, Write};

use super::{Channel, ClickStream, Event, Origin};
use crate::error::{Error, Result};

const RECORD: usize = 16;

impl ClickStream {
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(self.len() * RECORD);
        for e in self.events() {
            buf.extend_from_slice(&e.tick.to_le_bytes());
            buf.push(e.channel as u8);
            buf.push(e.origin as u8);
            buf.extend_from_slice(&[0u8; 6]);
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<ClickStream> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() % RECORD != 0 {
            return Err(Error::Format(format!("binary stream length {} is not a multiple of {RECORD}", buf.len())));
        }
        let mut events = Vec::with_capacity(buf.len() / RECORD);
        for (i, rec) in buf.chunks_exact(RECORD).enumerate() {
            let tick = u64::from_le_bytes(rec[..8].try_into().expect("8-byte slice"));
            let channel = Channel::from_code(rec[8])
                .ok_or_else(|| Error::Format(format!("record {i}: invalid channel code {}", rec[8])))?;
            let origin = Origin::from_code(rec[9])
                .ok_or_else(|| Error::Format(format!("record {i}: invalid origin code {}", rec[9])))?;
            events.push(Event { tick, channel, origin });
        }
        ClickStream::from_sorted(events)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tick_ps,channel,origin")?;
        for e in self.events() {
            writeln!(w, "{},{},{}", e.tick, e.channel.name(), e.origin.name())?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<ClickStream> {
        let mut events = Vec::new();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("tick")) {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let bad = |what: &str| Error::Format(format!("line {}: {what}: {line:?}", i + 1));
            let tick = fields.next().and_then(|f| f.parse::<u64>().ok()).ok_or_else(|| bad("bad tick"))?;
            let channel = fields.next().and_then(Channel::from_name).ok_or_else(|| bad("bad channel"))?;
            let origin = match fields.next() {
                None | Some("") => Origin::Cavity,
                Some(f) => Origin::from_name(f).ok_or_else(|| bad("bad origin"))?,
            };
            events.push(Event { tick, channel, origin });
        }
        ClickStream::from_sorted(events)
    }

    /// Read either format, choosing CSV for `.csv` paths.
    pub fn load(path: &std::path::Path) -> Result<ClickStream> {
        let file = std::fs::File::open(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::read_csv(file)
        } else {
            Self::read_binary(BufReader::new(file))
        }
    }

    /// Write either format, choosing CSV for `.csv` paths.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            self.write_csv(file)
        } else {
            self.write_binary(file)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_stream() -> impl Strategy<Value = ClickStream> {
        proptest::collection::vec((0u64..1_000_000_000, 0u8..3, 0u8..2), 0..200).prop_map(|v| {
            ClickStream::from_events(
                v.into_iter()
                    .map(|(t, c, o)| Event::new(t, Channel::from_code(c).unwrap(), Origin::from_code(o).unwrap()))
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn binary_roundtrip(s in arb_stream()) {
            let mut buf = Vec::new();
            s.write_binary(&mut buf).unwrap();
            prop_assert_eq!(buf.len(), 16 * s.len());
            prop_assert_eq!(ClickStream::read_binary(&buf[..]).unwrap(), s);
        }

        #[test]
        fn csv_roundtrip(s in arb_stream()) {
            let mut buf = Vec::new();
            s.write_csv(&mut buf).unwrap();
            prop_assert_eq!(ClickStream::read_csv(&buf[..]).unwrap(), s);
        }
    }

    #[test]
    fn binary_layout() {
        let s = ClickStream::from_events(vec![Event::new(0x0102, Channel::GateCopy, Origin::Background)]);
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(buf, [2, 1, 0, 0, 0, 0, 0, 0, 2, 1, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(ClickStream::read_binary(&[0u8; 15][..]).is_err());
        let mut rec = [0u8; 16];
        rec[8] = 9;
        assert!(ClickStream::read_binary(&rec[..]).is_err());
        assert!(ClickStream::read_csv("tick_ps,channel,origin\n10,apd_c,cavity\n".as_bytes()).is_err());
        assert!(ClickStream::read_csv("20,apd_a,cavity\n10,apd_a,cavity\n".as_bytes()).is_err());
    }
}
