use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{Site, TorusGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EventKind {
    Jump { from: Site, to: Site },
    Birth { site: Site },
    Death { site: Site },
}

/// One state change. `particle` and `offspring` are set only by
/// particle-level simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub particle: Option<u64>,
    pub offspring: Option<u64>,
}

impl Event {
    pub fn new(time: f64, kind: EventKind) -> Self {
        Self {
            time,
            kind,
            particle: None,
            offspring: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub time: f64,
    /// Occupied sites sorted by site.
    pub counts: Vec<(Site, u32)>,
}

impl Snapshot {
    pub fn count(&self, site: Site) -> u32 {
        self.counts
            .binary_search_by_key(&site, |&(s, _)| s)
            .map_or(0, |i| self.counts[i].1)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| c as u64).sum()
    }
}

/// Initial state, ordered events and snapshots of a single run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EventLog {
    pub initial: Vec<(Site, u32)>,
    pub events: Vec<Event>,
    pub snapshots: Vec<Snapshot>,
}

const MAGIC: &[u8; 4] = b"LWEV";
const VERSION: u32 = 1;

impl EventLog {
    /// Rebuild the snapshots by applying the events to the initial state.
    pub fn replay(&self, geometry: &TorusGeometry, times: &[f64]) -> Result<Vec<Snapshot>> {
        let mut counts = vec![0u32; geometry.num_sites()];
        for &(s, c) in &self.initial {
            counts[s] = c;
        }
        let sparse = |counts: &[u32], time| Snapshot {
            time,
            counts: counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(s, &c)| (s, c))
                .collect(),
        };
        let mut out = Vec::with_capacity(times.len());
        let mut ev = self.events.iter().peekable();
        for &t in times {
            while let Some(e) = ev.next_if(|e| e.time <= t) {
                let dec = |counts: &mut [u32], s: Site| {
                    counts[s] = counts[s].checked_sub(1).ok_or_else(|| {
                        Error::Numerical(format!("replay removed a particle from empty site {s}"))
                    })?;
                    Ok::<_, Error>(())
                };
                match e.kind {
                    EventKind::Jump { from, to } => {
                        dec(&mut counts, from)?;
                        counts[to] += 1;
                    }
                    EventKind::Birth { site } => counts[site] += 1,
                    EventKind::Death { site } => dec(&mut counts, site)?,
                }
            }
            out.push(sparse(&counts, t));
        }
        Ok(out)
    }

    /// Snapshots as `time,site,count` rows.
    pub fn write_snapshots_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,site,count")?;
        for snap in &self.snapshots {
            for &(s, c) in &snap.counts {
                writeln!(w, "{},{},{}", snap.time, s, c)?;
            }
        }
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,kind,site,target,particle,offspring")?;
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.events {
            let (kind, a, b) = match e.kind {
                EventKind::Jump { from, to } => ("jump", from, to.to_string()),
                EventKind::Birth { site } => ("birth", site, String::new()),
                EventKind::Death { site } => ("death", site, String::new()),
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.time,
                kind,
                a,
                b,
                opt(e.particle),
                opt(e.offspring)
            )?;
        }
        Ok(())
    }

    /// Compact little-endian binary encoding.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let write_counts = |w: &mut W, counts: &[(Site, u32)]| -> Result<()> {
            w.write_all(&(counts.len() as u64).to_le_bytes())?;
            for &(s, c) in counts {
                w.write_all(&(s as u64).to_le_bytes())?;
                w.write_all(&c.to_le_bytes())?;
            }
            Ok(())
        };
        write_counts(&mut w, &self.initial)?;
        w.write_all(&(self.events.len() as u64).to_le_bytes())?;
        for e in &self.events {
            let (tag, a, b) = match e.kind {
                EventKind::Jump { from, to } => (0u8, from, to),
                EventKind::Birth { site } => (1, site, 0),
                EventKind::Death { site } => (2, site, 0),
            };
            w.write_all(&e.time.to_le_bytes())?;
            w.write_all(&[tag])?;
            w.write_all(&(a as u64).to_le_bytes())?;
            w.write_all(&(b as u64).to_le_bytes())?;
            w.write_all(&e.particle.map_or(u64::MAX, |p| p).to_le_bytes())?;
            w.write_all(&e.offspring.map_or(u64::MAX, |p| p).to_le_bytes())?;
        }
        w.write_all(&(self.snapshots.len() as u64).to_le_bytes())?;
        for snap in &self.snapshots {
            w.write_all(&snap.time.to_le_bytes())?;
            write_counts(&mut w, &snap.counts)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Config("not an event log".into()));
        }
        if read_u32(&mut r)? != VERSION {
            return Err(Error::Config("unsupported event log version".into()));
        }
        let read_counts = |r: &mut R| -> Result<Vec<(Site, u32)>> {
            let n = read_u64(r)?;
            (0..n)
                .map(|_| Ok((read_u64(r)? as Site, read_u32(r)?)))
                .collect()
        };
        let initial = read_counts(&mut r)?;
        let n = read_u64(&mut r)?;
        let mut events = Vec::with_capacity(n.min(1 << 20) as usize);
        for _ in 0..n {
            let time = f64::from_bits(read_u64(&mut r)?);
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag)?;
            let a = read_u64(&mut r)? as Site;
            let b = read_u64(&mut r)? as Site;
            let opt = |v: u64| (v != u64::MAX).then_some(v);
            let particle = opt(read_u64(&mut r)?);
            let offspring = opt(read_u64(&mut r)?);
            let kind = match tag[0] {
                0 => EventKind::Jump { from: a, to: b },
                1 => EventKind::Birth { site: a },
                2 => EventKind::Death { site: a },
                t => return Err(Error::Config(format!("bad event tag {t}"))),
            };
            events.push(Event {
                time,
                kind,
                particle,
                offspring,
            });
        }
        let n = read_u64(&mut r)?;
        let mut snapshots = Vec::new();
        for _ in 0..n {
            let time = f64::from_bits(read_u64(&mut r)?);
            snapshots.push(Snapshot {
                time,
                counts: read_counts(&mut r)?,
            });
        }
        Ok(Self {
            initial,
            events,
            snapshots,
        })
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EventLog {
        EventLog {
            initial: vec![(0, 1), (3, 2)],
            events: vec![
                Event::new(0.5, EventKind::Jump { from: 3, to: 4 }),
                Event {
                    time: 0.7,
                    kind: EventKind::Birth { site: 0 },
                    particle: Some(0),
                    offspring: Some(9),
                },
                Event::new(1.5, EventKind::Death { site: 4 }),
            ],
            snapshots: vec![],
        }
    }

    #[test]
    fn replay_applies_events_in_order() {
        let g = TorusGeometry::cube(1, 8).unwrap();
        let snaps = sample().replay(&g, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(snaps[0].counts, vec![(0, 1), (3, 2)]);
        assert_eq!(snaps[1].counts, vec![(0, 2), (3, 1), (4, 1)]);
        assert_eq!(snaps[2].counts, vec![(0, 2), (3, 1)]);
    }

    #[test]
    fn binary_roundtrip() {
        let mut log = sample();
        log.snapshots.push(Snapshot {
            time: 1.0,
            counts: vec![(2, 5)],
        });
        let mut buf = Vec::new();
        log.write_binary(&mut buf).unwrap();
        assert_eq!(EventLog::read_binary(&buf[..]).unwrap(), log);
        assert!(EventLog::read_binary(&b"nope"[..]).is_err());
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        sample().write_events_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("time,kind,site,target,particle,offspring\n0.5,jump,3,4,,\n"));
    }
}
