//! Switch model: configuration, packet traces and the shared buffer.
//!
//! Ports are numbered `1..=n` everywhere in the public API. Time is slotted:
//! the departure instant at integer time `s` (one packet per nonempty port)
//! happens before every arrival labelled with slot `s`, and arrivals within a
//! slot are processed in trace order. Departures begin at `t = 1`, so slot-0
//! arrivals see an undrained buffer.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Port count `n` and shared capacity `B` (in packets).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwitchConfig {
    pub n: usize,
    #[serde(rename = "B")]
    pub capacity: usize,
}

impl SwitchConfig {
    pub fn new(n: usize, capacity: usize) -> Result<Self> {
        let config = Self { n, capacity };
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("port count n must be at least 1".into()));
        }
        if self.capacity == 0 {
            return Err(Error::InvalidConfig("buffer capacity B must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let config: Self = serde_json::from_str(&text)?;
        config.check()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Packet {
    pub id: usize,
    pub slot: u64,
    pub port: usize,
}

/// Arrival sequence of one run. Packets are kept in arrival order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub config: SwitchConfig,
    pub packets: Vec<Packet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    PortOutOfRange { id: usize, port: usize },
    SlotsNotNondecreasing { id: usize, slot: u64, previous: u64 },
    DuplicateId { id: usize },
    IdsNotDense { position: usize, id: usize },
    Malformed { line: usize, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PortOutOfRange { id, port } => {
                write!(f, "packet {id}: port {port} out of range")
            }
            Violation::SlotsNotNondecreasing { id, slot, previous } => write!(
                f,
                "packet {id}: slots not nondecreasing ({slot} after {previous})"
            ),
            Violation::DuplicateId { id } => write!(f, "duplicate id {id}"),
            Violation::IdsNotDense { position, id } => {
                write!(f, "id {id} at position {position} breaks dense numbering")
            }
            Violation::Malformed { line, detail } => write!(f, "line {line}: {detail}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidTrace(self.violations))
        }
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    slot: String,
    port: String,
}

impl Trace {
    /// Builds a trace from `(slot, port)` pairs, numbering packets by position.
    /// The result is not validated.
    pub fn from_arrivals(config: SwitchConfig, arrivals: &[(u64, usize)]) -> Self {
        let packets = arrivals
            .iter()
            .enumerate()
            .map(|(id, &(slot, port))| Packet { id, slot, port })
            .collect();
        Self { config, packets }
    }

    pub fn empty(config: SwitchConfig) -> Self {
        Self {
            config,
            packets: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn last_slot(&self) -> Option<u64> {
        self.packets.last().map(|p| p.slot)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut seen = HashSet::with_capacity(self.packets.len());
        let mut previous: Option<u64> = None;
        for (position, p) in self.packets.iter().enumerate() {
            if p.port == 0 || p.port > self.config.n {
                violations.push(Violation::PortOutOfRange {
                    id: p.id,
                    port: p.port,
                });
            }
            if let Some(prev) = previous {
                if p.slot < prev {
                    violations.push(Violation::SlotsNotNondecreasing {
                        id: p.id,
                        slot: p.slot,
                        previous: prev,
                    });
                }
            }
            previous = Some(p.slot);
            if !seen.insert(p.id) {
                violations.push(Violation::DuplicateId { id: p.id });
            } else if p.id != position {
                violations.push(Violation::IdsNotDense { position, id: p.id });
            }
        }
        ValidationReport { violations }
    }

    /// Reads the `slot,port` CSV format. Packet ids follow line order.
    pub fn read_csv<R: Read>(config: SwitchConfig, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "slot" || &headers[1] != "port" {
            return Err(Error::InvalidTrace(vec![Violation::Malformed {
                line: 1,
                detail: format!("expected header `slot,port`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            }]));
        }
        let mut arrivals = Vec::new();
        let mut malformed = Vec::new();
        for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
            let line = i + 2;
            let row = match row {
                Ok(r) => r,
                Err(e) => {
                    malformed.push(Violation::Malformed {
                        line,
                        detail: e.to_string(),
                    });
                    continue;
                }
            };
            match (row.slot.parse::<u64>(), row.port.parse::<usize>()) {
                (Ok(slot), Ok(port)) => arrivals.push((slot, port)),
                _ => malformed.push(Violation::Malformed {
                    line,
                    detail: format!("expected nonnegative integers, got `{},{}`", row.slot, row.port),
                }),
            }
        }
        if !malformed.is_empty() {
            return Err(Error::InvalidTrace(malformed));
        }
        let trace = Self::from_arrivals(config, &arrivals);
        trace.validate().into_result()?;
        Ok(trace)
    }

    pub fn read_csv_file(config: SwitchConfig, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::read_csv(config, std::io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        wtr.write_record(["slot", "port"])?;
        for p in &self.packets {
            wtr.write_record([p.slot.to_string(), p.port.to_string()])?;
        }
        wtr.flush().map_err(|source| Error::Io {
            path: "<trace>".into(),
            source,
        })?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Relabels ports through `perm`, where `perm[p - 1]` is the new label of port `p`.
    pub fn permute_ports(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.config.n, "permutation length must equal n");
        let packets = self
            .packets
            .iter()
            .map(|p| Packet {
                port: perm[p.port - 1],
                ..*p
            })
            .collect();
        Self {
            config: self.config,
            packets,
        }
    }
}

/// Per-port occupancy counters of one buffer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BufferState {
    occ: Vec<usize>,
    total: usize,
    capacity: usize,
}

impl BufferState {
    pub fn new(config: SwitchConfig) -> Self {
        Self {
            occ: vec![0; config.n],
            total: 0,
            capacity: config.capacity,
        }
    }

    /// Builds a state from explicit occupancies (ports `1..=occ.len()`).
    /// Used by tests and the C interface; the total may exceed `capacity`.
    pub fn from_occupancies(capacity: usize, occ: &[usize]) -> Self {
        Self {
            occ: occ.to_vec(),
            total: occ.iter().sum(),
            capacity,
        }
    }

    pub fn n(&self) -> usize {
        self.occ.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_full(&self) -> bool {
        self.total >= self.capacity
    }

    /// Occupancy of `port` (1-based).
    pub fn occ(&self, port: usize) -> usize {
        self.occ[port - 1]
    }

    pub fn occupancies(&self) -> &[usize] {
        &self.occ
    }

    fn check_port(&self, port: usize) -> Result<()> {
        if port == 0 || port > self.occ.len() {
            return Err(Error::PortOutOfRange {
                port,
                n: self.occ.len(),
            });
        }
        Ok(())
    }

    pub fn admit(&mut self, port: usize) -> Result<()> {
        self.check_port(port)?;
        if self.total >= self.capacity {
            return Err(Error::CapacityExceeded {
                port,
                total: self.total,
                capacity: self.capacity,
            });
        }
        self.occ[port - 1] += 1;
        self.total += 1;
        Ok(())
    }

    /// One transmission round. Returns the ports that sent a packet, ascending.
    pub fn drain(&mut self) -> Vec<usize> {
        let mut sent = Vec::new();
        for (i, o) in self.occ.iter_mut().enumerate() {
            if *o > 0 {
                *o -= 1;
                sent.push(i + 1);
            }
        }
        self.total -= sent.len();
        sent
    }
}

/// Buffer that also remembers which packet ids sit in each FIFO queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FifoBuffer {
    state: BufferState,
    queues: Vec<VecDeque<usize>>,
}

impl FifoBuffer {
    pub fn new(config: SwitchConfig) -> Self {
        Self {
            state: BufferState::new(config),
            queues: vec![VecDeque::new(); config.n],
        }
    }

    pub fn state(&self) -> &BufferState {
        &self.state
    }

    /// Packet ids queued at `port`, head first.
    pub fn queue(&self, port: usize) -> &VecDeque<usize> {
        &self.queues[port - 1]
    }

    pub fn queues(&self) -> &[VecDeque<usize>] {
        &self.queues
    }

    pub fn admit(&mut self, port: usize, id: usize) -> Result<()> {
        self.state.admit(port)?;
        self.queues[port - 1].push_back(id);
        Ok(())
    }

    /// Returns `(port, packet id)` for every transmitted packet.
    pub fn drain(&mut self) -> Vec<(usize, usize)> {
        let ports = self.state.drain();
        ports
            .into_iter()
            .map(|port| {
                let id = self.queues[port - 1]
                    .pop_front()
                    .expect("queue contents track occupancy");
                (port, id)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Phase {
    Transmit,
    Arrivals,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Transmit => "TRANSMIT",
            Phase::Arrivals => "ARRIVALS",
        })
    }
}

/// Position in the slotted event order: `(slot, TRANSMIT) < (slot, ARRIVALS) < (slot + 1, TRANSMIT)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventClock {
    pub slot: u64,
    pub phase: Phase,
}

impl EventClock {
    pub fn start() -> Self {
        Self {
            slot: 0,
            phase: Phase::Arrivals,
        }
    }

    /// Moves to the transmit phase of the next slot.
    pub fn tick(&mut self) {
        self.slot += 1;
        self.phase = Phase::Transmit;
    }

    pub fn to_arrivals(&mut self) {
        self.phase = Phase::Arrivals;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, b: usize) -> SwitchConfig {
        SwitchConfig::new(n, b).unwrap()
    }

    #[test]
    fn config_rejects_zero() {
        assert!(SwitchConfig::new(0, 4).is_err());
        assert!(SwitchConfig::new(2, 0).is_err());
    }

    #[test]
    fn config_json_uses_capital_b() {
        let c: SwitchConfig = serde_json::from_str(r#"{"n": 4, "B": 100}"#).unwrap();
        assert_eq!(c, cfg(4, 100));
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"n":4,"B":100}"#);
    }

    #[test]
    fn validate_well_formed() {
        let t = Trace::from_arrivals(cfg(2, 4), &[(0, 1), (0, 2)]);
        assert!(t.validate().is_ok());
    }

    #[test]
    fn validate_port_out_of_range() {
        let t = Trace::from_arrivals(cfg(2, 4), &[(0, 3)]);
        let report = t.validate();
        assert_eq!(
            report.violations,
            vec![Violation::PortOutOfRange { id: 0, port: 3 }]
        );
        assert!(report.violations[0].to_string().contains("port 3 out of range"));
    }

    #[test]
    fn validate_slot_order() {
        let t = Trace::from_arrivals(cfg(2, 4), &[(1, 1), (0, 1)]);
        let report = t.validate();
        assert!(matches!(
            report.violations.as_slice(),
            [Violation::SlotsNotNondecreasing { id: 1, slot: 0, previous: 1 }]
        ));
        assert!(report.violations[0].to_string().contains("slots not nondecreasing"));
    }

    #[test]
    fn validate_duplicate_ids() {
        let mut t = Trace::from_arrivals(cfg(2, 4), &[(0, 1), (0, 2)]);
        t.packets[1].id = 0;
        assert_eq!(t.validate().violations, vec![Violation::DuplicateId { id: 0 }]);
    }

    #[test]
    fn admit_increments_target_only() {
        let mut s = BufferState::new(cfg(2, 4));
        s.admit(1).unwrap();
        assert_eq!(s.occupancies(), &[1, 0]);
        let mut s = BufferState::from_occupancies(4, &[2, 1]);
        s.admit(2).unwrap();
        assert_eq!(s.occupancies(), &[2, 2]);
        assert_eq!(s.total(), 4);
    }

    #[test]
    fn admit_guard() {
        let mut s = BufferState::from_occupancies(3, &[3]);
        assert!(matches!(s.admit(1), Err(Error::CapacityExceeded { .. })));
        assert_eq!(s.occupancies(), &[3]);
        assert!(matches!(s.admit(2), Err(Error::PortOutOfRange { port: 2, n: 1 })));
    }

    #[test]
    fn drain_examples() {
        let mut s = BufferState::from_occupancies(10, &[2, 0, 1]);
        assert_eq!(s.drain(), vec![1, 3]);
        assert_eq!(s.occupancies(), &[1, 0, 0]);
        assert_eq!(s.total(), 1);

        let mut s = BufferState::new(cfg(3, 10));
        assert!(s.drain().is_empty());
        assert_eq!(s, BufferState::new(cfg(3, 10)));

        let mut s = BufferState::from_occupancies(10, &[1, 1]);
        assert_eq!(s.drain(), vec![1, 2]);
        assert_eq!(s.total(), 0);
    }

    #[test]
    fn fifo_order() {
        let mut b = FifoBuffer::new(cfg(2, 4));
        b.admit(1, 0).unwrap();
        b.admit(1, 1).unwrap();
        b.admit(2, 2).unwrap();
        assert_eq!(b.drain(), vec![(1, 0), (2, 2)]);
        assert_eq!(b.queue(1).iter().copied().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn csv_round_trip_and_header() {
        let t = Trace::from_arrivals(cfg(3, 5), &[(0, 1), (0, 3), (2, 2)]);
        let text = t.to_csv_string();
        assert_eq!(text, "slot,port\n0,1\n0,3\n2,2\n");
        assert_eq!(Trace::read_csv(cfg(3, 5), text.as_bytes()).unwrap(), t);
        assert!(Trace::read_csv(cfg(3, 5), "port,slot\n1,0\n".as_bytes()).is_err());
        assert!(Trace::read_csv(cfg(3, 5), "slot,port\n0,x\n".as_bytes()).is_err());
        assert!(matches!(
            Trace::read_csv(cfg(3, 5), "slot,port\n0,4\n".as_bytes()),
            Err(Error::InvalidTrace(_))
        ));
    }

    #[test]
    fn clock_order() {
        let mut c = EventClock::start();
        let a = c;
        c.tick();
        let b = c;
        c.to_arrivals();
        assert!(a < b && b < c);
        assert_eq!(b.slot, 1);
    }
}
