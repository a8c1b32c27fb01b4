//! Replays the competitiveness argument for Modified Harmonic on one trace.
//!
//! Given the policy's accepted set HAR and a feasible offline set OPT, the
//! checker splits OPT into
//!
//! * `A = OPT ∩ HAR`,
//! * `B`: packets HAR rejected while its queue for that port was strictly
//!   longer than OPT's,
//! * `C`: the rest,
//!
//! maps `A ∪ B` injectively into HAR port by port, matches every `C` packet
//! to a HAR packet that leaves earlier, and checks the three counting
//! inequalities. Every construction step that fails is recorded, never
//! suppressed.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SwitchConfig, Trace};
use crate::oracle::{offline_opt, OracleLimits};
use crate::policy::{harmonic_denominator, match_cap, ModifiedHarmonic, RejectCause, ThresholdTable};
use crate::sim::{simulate_lockstep, LockstepEvent, LockstepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    A,
    B,
    C,
}

/// Which unmapped HAR packet a `B` packet takes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingStrategy {
    #[default]
    MostRecent,
    Earliest,
}

/// Where `B` packets may find their image, and what `u` counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidatePool {
    /// Unmapped HAR packets still in the buffer.
    #[default]
    Buffered,
    /// Every unmapped HAR packet that has arrived, transmitted or not.
    Arrived,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofOptions {
    pub strategy: MappingStrategy,
    pub pool: CandidatePool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    /// Class of each packet id; `None` for packets outside OPT.
    pub class: Vec<Option<Class>>,
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl Partition {
    pub fn ids(&self, which: Class) -> impl Iterator<Item = usize> + '_ {
        self.class
            .iter()
            .enumerate()
            .filter(move |(_, c)| **c == Some(which))
            .map(|(i, _)| i)
    }
}

/// Splits OPT into `A`, `B`, `C` from the lockstep pre-arrival occupancies.
pub fn partition_opt(lockstep: &LockstepResult) -> Partition {
    let mut class = vec![None; lockstep.policy.decisions.len()];
    let (mut a, mut b, mut c) = (0, 0, 0);
    for s in lockstep.arrivals() {
        if !s.fixed_accepts {
            continue;
        }
        let k = if s.policy_decision.accepted {
            a += 1;
            Class::A
        } else if s.occ_policy > s.occ_fixed {
            b += 1;
            Class::B
        } else {
            c += 1;
            Class::C
        };
        class[s.packet.id] = Some(k);
    }
    Partition { class, a, b, c }
}

/// Checks `A = OPT ∩ HAR`, disjointness and `A ∪ B ∪ C = OPT`.
pub fn partition_well_formed(lockstep: &LockstepResult, partition: &Partition) -> bool {
    let har = &lockstep.policy.decisions;
    let opt = &lockstep.fixed.decisions;
    let mut ok = partition.class.len() == har.len();
    for (i, cls) in partition.class.iter().enumerate() {
        let in_both = har[i].accepted && opt[i].accepted;
        ok &= match cls {
            Some(Class::A) => in_both,
            Some(Class::B) | Some(Class::C) => opt[i].accepted && !har[i].accepted,
            None => !opt[i].accepted,
        };
    }
    let opt_size = opt.iter().filter(|d| d.accepted).count();
    ok && partition.a + partition.b + partition.c == opt_size
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MappingViolation {
    pub event: usize,
    pub packet: usize,
    pub port: usize,
    pub g: usize,
    pub u: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubMappingRun {
    pub options: ProofOptions,
    /// Image of each `A ∪ B` packet.
    pub image: Vec<Option<usize>>,
    /// Event index at which each HAR packet received its antecedent.
    pub mapped_at: Vec<Option<usize>>,
    pub violations: Vec<MappingViolation>,
}

impl SubMappingRun {
    /// Injective, same port, `A` onto itself, `B` onto earlier HAR packets.
    pub fn is_well_formed(&self, trace: &Trace, partition: &Partition, har: &[bool]) -> bool {
        let mut hit = vec![false; self.image.len()];
        for (id, img) in self.image.iter().enumerate() {
            match (partition.class[id], img) {
                (Some(Class::A), Some(h)) if *h != id => return false,
                (Some(Class::B), Some(h)) if *h >= id => return false,
                (Some(Class::C) | None, Some(_)) => return false,
                _ => {}
            }
            if let Some(h) = *img {
                if hit[h] || !har[h] || trace.packets[h].port != trace.packets[id].port {
                    return false;
                }
                hit[h] = true;
            }
        }
        true
    }
}

/// Per-port queue contents of both buffers, replayed from the event log.
struct Replay {
    har: Vec<VecDeque<usize>>,
    opt: Vec<VecDeque<usize>>,
}

impl Replay {
    fn new(n: usize) -> Self {
        Self {
            har: vec![VecDeque::new(); n],
            opt: vec![VecDeque::new(); n],
        }
    }

    fn drain(&mut self, policy_sent: &[(usize, usize)], fixed_sent: &[(usize, usize)]) {
        for &(port, id) in policy_sent {
            let head = self.har[port - 1].pop_front();
            debug_assert_eq!(head, Some(id));
        }
        for &(port, id) in fixed_sent {
            let head = self.opt[port - 1].pop_front();
            debug_assert_eq!(head, Some(id));
        }
    }

    fn g(&self, port: usize) -> usize {
        self.har[port - 1].len().saturating_sub(self.opt[port - 1].len())
    }
}

/// Unmapped HAR packets per port, as `u` counts them.
struct Unmapped {
    pool: CandidatePool,
    arrived: Vec<Vec<usize>>,
}

impl Unmapped {
    fn new(n: usize, pool: CandidatePool) -> Self {
        Self {
            pool,
            arrived: vec![Vec::new(); n],
        }
    }

    fn u(&self, replay: &Replay, port: usize, mapped: &[bool]) -> usize {
        match self.pool {
            CandidatePool::Buffered => replay.har[port - 1].iter().filter(|&&h| !mapped[h]).count(),
            CandidatePool::Arrived => self.arrived[port - 1].iter().filter(|&&h| !mapped[h]).count(),
        }
    }

    fn candidates<'a>(
        &'a self,
        replay: &'a Replay,
        port: usize,
    ) -> Box<dyn DoubleEndedIterator<Item = usize> + 'a> {
        match self.pool {
            CandidatePool::Buffered => Box::new(replay.har[port - 1].iter().copied()),
            CandidatePool::Arrived => Box::new(self.arrived[port - 1].iter().copied()),
        }
    }
}

/// Extends the per-port sub-mappings packet by packet.
pub fn build_submappings(
    lockstep: &LockstepResult,
    partition: &Partition,
    options: ProofOptions,
) -> SubMappingRun {
    let n = lockstep.config.n;
    let m = partition.class.len();
    let mut replay = Replay::new(n);
    let mut unmapped = Unmapped::new(n, options.pool);
    let mut mapped = vec![false; m];
    let mut image = vec![None; m];
    let mut mapped_at = vec![None; m];
    let mut violations = Vec::new();

    for (event, ev) in lockstep.events.iter().enumerate() {
        match ev {
            LockstepEvent::Drain { policy_sent, fixed_sent, .. } => replay.drain(policy_sent, fixed_sent),
            LockstepEvent::Arrival(s) => {
                let id = s.packet.id;
                let port = s.packet.port;
                match partition.class[id] {
                    Some(Class::A) => {
                        image[id] = Some(id);
                        mapped[id] = true;
                        mapped_at[id] = Some(event);
                    }
                    Some(Class::B) => {
                        let pick = {
                            let mut it = unmapped.candidates(&replay, port).filter(|&h| !mapped[h]);
                            match options.strategy {
                                MappingStrategy::MostRecent => it.next_back(),
                                MappingStrategy::Earliest => it.next(),
                            }
                        };
                        match pick {
                            Some(h) => {
                                image[id] = Some(h);
                                mapped[h] = true;
                                mapped_at[h] = Some(event);
                            }
                            None => violations.push(MappingViolation {
                                event,
                                packet: id,
                                port,
                                g: replay.g(port),
                                u: unmapped.u(&replay, port, &mapped),
                            }),
                        }
                    }
                    _ => {}
                }
                if s.policy_decision.accepted {
                    replay.har[port - 1].push_back(id);
                    unmapped.arrived[port - 1].push(id);
                }
                if s.fixed_accepts {
                    replay.opt[port - 1].push_back(id);
                }
            }
        }
    }
    SubMappingRun {
        options,
        image,
        mapped_at,
        violations,
    }
}

/// The A/B/C case of an arrival, or a transmission round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// Case (1): `p ∈ B`.
    ArrivalB,
    /// Case (2): `p ∈ A`.
    ArrivalA,
    /// Case (3): `p ∈ C`.
    ArrivalC,
    /// Case (4): `p ∈ HAR \ OPT`.
    ArrivalHarOnly,
    /// Rejected by both.
    ArrivalNeither,
    Drain,
}

impl EventKind {
    pub fn is_arrival(&self) -> bool {
        !matches!(self, EventKind::Drain)
    }

    fn as_str(&self) -> &'static str {
        match self {
            EventKind::ArrivalB => "arrival-b",
            EventKind::ArrivalA => "arrival-a",
            EventKind::ArrivalC => "arrival-c",
            EventKind::ArrivalHarOnly => "arrival-har-only",
            EventKind::ArrivalNeither => "arrival-neither",
            EventKind::Drain => "drain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GuMismatch {
    pub event: usize,
    pub kind: EventKind,
    pub port: usize,
    pub occ_har: usize,
    pub occ_opt: usize,
    pub g: usize,
    pub u: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GuReport {
    pub checks: usize,
    /// Events after which `g != u` on some port, counted once per port.
    pub arrival_mismatches: usize,
    pub drain_mismatches: usize,
    /// Mismatches with `u < g`, the direction that can starve a later `B` packet.
    pub arrival_deficits: usize,
    pub drain_deficits: usize,
    /// Arrival events whose own step changed `g - u` on the arriving port
    /// (the inductive step failing, as opposed to a carried-over mismatch).
    pub arrival_step_breaks: usize,
    pub mismatches: Vec<GuMismatch>,
}

fn classify(s: &crate::sim::ArrivalSnapshot, partition: &Partition) -> EventKind {
    match (partition.class[s.packet.id], s.policy_decision.accepted) {
        (Some(Class::A), _) => EventKind::ArrivalA,
        (Some(Class::B), _) => EventKind::ArrivalB,
        (Some(Class::C), _) => EventKind::ArrivalC,
        (None, true) => EventKind::ArrivalHarOnly,
        (None, false) => EventKind::ArrivalNeither,
    }
}

/// Recomputes `g(q) = max(Occ_HAR(q) - Occ_OPT(q), 0)` and `u(q)` after every
/// event, on every port.
pub fn check_g_equals_u(lockstep: &LockstepResult, partition: &Partition, run: &SubMappingRun) -> GuReport {
    let n = lockstep.config.n;
    let m = partition.class.len();
    let mut replay = Replay::new(n);
    let mut unmapped = Unmapped::new(n, run.options.pool);
    let mut mapped = vec![false; m];
    let mut report = GuReport::default();
    // time 0: both buffers empty
    report.checks += n;

    for (event, ev) in lockstep.events.iter().enumerate() {
        let kind;
        let mut step_port = None;
        match ev {
            LockstepEvent::Drain { policy_sent, fixed_sent, .. } => {
                replay.drain(policy_sent, fixed_sent);
                kind = EventKind::Drain;
            }
            LockstepEvent::Arrival(s) => {
                let id = s.packet.id;
                let port = s.packet.port;
                kind = classify(s, partition);
                let before = replay.g(port) as i64 - unmapped.u(&replay, port, &mapped) as i64;
                for (slot, at) in mapped.iter_mut().zip(&run.mapped_at) {
                    if *at == Some(event) {
                        *slot = true;
                    }
                }
                if s.policy_decision.accepted {
                    replay.har[port - 1].push_back(id);
                    unmapped.arrived[port - 1].push(id);
                    if run.mapped_at[id] == Some(event) {
                        mapped[id] = true;
                    }
                }
                if s.fixed_accepts {
                    replay.opt[port - 1].push_back(id);
                }
                let after = replay.g(port) as i64 - unmapped.u(&replay, port, &mapped) as i64;
                if before != after {
                    step_port = Some(port);
                }
            }
        }
        if step_port.is_some() {
            report.arrival_step_breaks += 1;
        }
        for port in 1..=n {
            report.checks += 1;
            let g = replay.g(port);
            let u = unmapped.u(&replay, port, &mapped);
            if g != u {
                if kind.is_arrival() {
                    report.arrival_mismatches += 1;
                    report.arrival_deficits += usize::from(u < g);
                } else {
                    report.drain_mismatches += 1;
                    report.drain_deficits += usize::from(u < g);
                }
                report.mismatches.push(GuMismatch {
                    event,
                    kind,
                    port,
                    occ_har: replay.har[port - 1].len(),
                    occ_opt: replay.opt[port - 1].len(),
                    g,
                    u,
                });
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Match {
    pub event: usize,
    pub c_packet: usize,
    pub har_packet: usize,
    /// Remaining drain time of the HAR packet (1 = at the head).
    pub har_position: usize,
    /// Position of the `C` packet in OPT's queue after acceptance.
    pub opt_position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchingViolation {
    pub event: usize,
    pub packet: usize,
    pub port: usize,
    pub cause: Option<String>,
    /// Threshold index that rejected the packet (for guard rejections, the
    /// index the threshold rule would have used).
    pub k: Option<usize>,
    pub opt_position: usize,
    /// HAR-buffered packets at positions `<= ceil(T_k)`.
    pub har_at_or_below_threshold: Option<usize>,
    /// Of those, how many already carry `cap` matches.
    pub saturated: Option<usize>,
    pub har_buffered: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MateViolation {
    pub event: usize,
    pub c_packet: usize,
    pub har_packet: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchingRun {
    pub cap: usize,
    pub matches: Vec<Match>,
    pub match_count: Vec<usize>,
    pub violations: Vec<MatchingViolation>,
    /// A `C` packet left OPT's buffer while its HAR mate was still queued.
    pub mate_violations: Vec<MateViolation>,
    pub max_match_count: usize,
}

/// Matches each `C` packet, when OPT accepts it, to a HAR-buffered packet
/// with fewer than `cap` matches and a strictly earlier departure.
pub fn build_matching(lockstep: &LockstepResult, partition: &Partition, table: &ThresholdTable) -> MatchingRun {
    let n = lockstep.config.n;
    let m = partition.class.len();
    let cap = match_cap(n);
    let mut replay = Replay::new(n);
    let mut match_count = vec![0usize; m];
    let mut mate_of = vec![None; m];
    let mut har_buffered = vec![false; m];
    let mut matches = Vec::new();
    let mut violations = Vec::new();
    let mut mate_violations = Vec::new();

    for (event, ev) in lockstep.events.iter().enumerate() {
        match ev {
            LockstepEvent::Drain { policy_sent, fixed_sent, .. } => {
                for &(_, h) in policy_sent {
                    har_buffered[h] = false;
                }
                for &(_, c) in fixed_sent {
                    if let Some(h) = mate_of[c] {
                        if har_buffered[h] {
                            mate_violations.push(MateViolation { event, c_packet: c, har_packet: h });
                        }
                    }
                }
                replay.drain(policy_sent, fixed_sent);
            }
            LockstepEvent::Arrival(s) => {
                let id = s.packet.id;
                let port = s.packet.port;
                if partition.class[id] == Some(Class::C) {
                    let opt_position = s.occ_fixed + 1;
                    let mut best: Option<(usize, usize, usize)> = None;
                    for q in replay.har.iter() {
                        for (i, &h) in q.iter().enumerate().take(opt_position.saturating_sub(1)) {
                            if match_count[h] >= cap {
                                continue;
                            }
                            let key = (i + 1, match_count[h], h);
                            if best.is_none_or(|b| key < b) {
                                best = Some(key);
                            }
                        }
                    }
                    match best {
                        Some((pos, _, h)) => {
                            match_count[h] += 1;
                            mate_of[id] = Some(h);
                            matches.push(Match {
                                event,
                                c_packet: id,
                                har_packet: h,
                                har_position: pos,
                                opt_position,
                            });
                        }
                        None => {
                            let cause = s.policy_decision.cause;
                            let k = match cause {
                                Some(RejectCause::Threshold { k }) => Some(k),
                                Some(RejectCause::CapacityGuard) => table.rank_for(s.occ_policy),
                                _ => None,
                            };
                            let (below, saturated) = match k {
                                Some(k) => {
                                    let limit = table.upper(k);
                                    let mut below = 0;
                                    let mut sat = 0;
                                    for q in replay.har.iter() {
                                        for &h in q.iter().take(limit) {
                                            below += 1;
                                            sat += usize::from(match_count[h] >= cap);
                                        }
                                    }
                                    (Some(below), Some(sat))
                                }
                                None => (None, None),
                            };
                            violations.push(MatchingViolation {
                                event,
                                packet: id,
                                port,
                                cause: cause.map(|c| c.to_string()),
                                k,
                                opt_position,
                                har_at_or_below_threshold: below,
                                saturated,
                                har_buffered: replay.har.iter().map(|q| q.len()).sum(),
                            });
                        }
                    }
                }
                if s.policy_decision.accepted {
                    replay.har[port - 1].push_back(id);
                    har_buffered[id] = true;
                }
                if s.fixed_accepts {
                    replay.opt[port - 1].push_back(id);
                }
            }
        }
    }
    let max_match_count = match_count.iter().copied().max().unwrap_or(0);
    MatchingRun {
        cap,
        matches,
        match_count,
        violations,
        mate_violations,
        max_match_count,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl Inequality {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            holds: lhs >= rhs,
            lhs,
            rhs,
            slack: lhs - rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdicts {
    /// `|HAR| >= |A| + |B|`
    pub mapping_bound: Inequality,
    /// `(1 + ln n) |HAR| >= |C|`
    pub matching_bound: Inequality,
    /// `(2 + ln n) |HAR| >= |OPT|`
    pub competitive_bound: Inequality,
}

impl Verdicts {
    pub fn all_hold(&self) -> bool {
        self.mapping_bound.holds && self.matching_bound.holds && self.competitive_bound.holds
    }
}

pub fn verify_bounds(n: usize, har: usize, partition: &Partition) -> Verdicts {
    let denom = harmonic_denominator(n);
    let har = har as f64;
    let (a, b, c) = (partition.a as f64, partition.b as f64, partition.c as f64);
    Verdicts {
        mapping_bound: Inequality::new(har, a + b),
        matching_bound: Inequality::new(denom * har, c),
        competitive_bound: Inequality::new((1.0 + denom) * har, a + b + c),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CauseBreakdown {
    pub none_threshold: usize,
    pub threshold: usize,
    pub capacity_guard: usize,
}

/// Everything the checker found on one trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofLedger {
    pub config: SwitchConfig,
    pub options: ProofOptions,
    pub har: usize,
    pub opt: usize,
    pub har_guard_triggers: usize,
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub partition_well_formed: bool,
    pub mapping_well_formed: bool,
    pub mapping_violations: Vec<MappingViolation>,
    pub b_causes: CauseBreakdown,
    pub c_causes: CauseBreakdown,
    pub cap: usize,
    pub max_match_count: usize,
    pub matching_violations: Vec<MatchingViolation>,
    pub mate_violations: Vec<MateViolation>,
    pub g_u: GuReportSummary,
    pub verdicts: Verdicts,
    #[serde(skip)]
    pub detail: Option<Box<ProofDetail>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GuReportSummary {
    pub checks: usize,
    pub arrival_mismatches: usize,
    pub drain_mismatches: usize,
    pub arrival_deficits: usize,
    pub drain_deficits: usize,
    pub arrival_step_breaks: usize,
}

impl From<&GuReport> for GuReportSummary {
    fn from(r: &GuReport) -> Self {
        Self {
            checks: r.checks,
            arrival_mismatches: r.arrival_mismatches,
            drain_mismatches: r.drain_mismatches,
            arrival_deficits: r.arrival_deficits,
            drain_deficits: r.drain_deficits,
            arrival_step_breaks: r.arrival_step_breaks,
        }
    }
}

/// Intermediate objects kept for the event dump.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofDetail {
    pub lockstep: LockstepResult,
    pub partition: Partition,
    pub mapping: SubMappingRun,
    pub g_u: GuReport,
    pub matching: MatchingRun,
}

impl ProofLedger {
    /// Construction failures: mapping, matching, mate order, or malformed sets.
    pub fn construction_violations(&self) -> usize {
        self.mapping_violations.len()
            + self.matching_violations.len()
            + self.mate_violations.len()
            + usize::from(!self.partition_well_formed)
            + usize::from(!self.mapping_well_formed)
    }

    /// Anything that makes the trace a reportable finding.
    pub fn has_violation(&self) -> bool {
        self.construction_violations() > 0 || !self.verdicts.all_hold()
    }

    /// One row per event with both occupancies, the class, and `g`/`u` on the
    /// event's port.
    pub fn write_event_dump<W: Write>(&self, writer: W) -> Result<()> {
        let detail = self.detail.as_ref().ok_or_else(|| Error::Consistency {
            event: "dump",
            detail: "ledger was built without detail".into(),
        })?;
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        wtr.write_record([
            "event", "slot", "kind", "packet", "port", "occ_har", "occ_opt", "har_decision", "cause",
            "opt_accepts", "class", "image", "mate", "g", "u",
        ])?;
        let mate: std::collections::HashMap<usize, usize> = detail
            .matching
            .matches
            .iter()
            .map(|m| (m.c_packet, m.har_packet))
            .collect();
        let mut mismatch = std::collections::HashMap::new();
        for mm in &detail.g_u.mismatches {
            mismatch.insert((mm.event, mm.port), (mm.g, mm.u));
        }
        for (event, ev) in detail.lockstep.events.iter().enumerate() {
            match ev {
                LockstepEvent::Drain { slot, policy_sent, fixed_sent } => {
                    let ports: std::collections::BTreeSet<usize> =
                        policy_sent.iter().chain(fixed_sent.iter()).map(|&(p, _)| p).collect();
                    for port in ports {
                        let gu = mismatch.get(&(event, port));
                        wtr.write_record([
                            event.to_string(),
                            slot.to_string(),
                            "drain".into(),
                            String::new(),
                            port.to_string(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            gu.map(|x| x.0.to_string()).unwrap_or_default(),
                            gu.map(|x| x.1.to_string()).unwrap_or_default(),
                        ])?;
                    }
                }
                LockstepEvent::Arrival(s) => {
                    let id = s.packet.id;
                    let kind = classify(s, &detail.partition);
                    let gu = mismatch.get(&(event, s.packet.port));
                    wtr.write_record([
                        event.to_string(),
                        s.packet.slot.to_string(),
                        kind.as_str().into(),
                        id.to_string(),
                        s.packet.port.to_string(),
                        s.occ_policy.to_string(),
                        s.occ_fixed.to_string(),
                        if s.policy_decision.accepted { "accept".into() } else { "reject".into() },
                        s.policy_decision.cause.map(|c| c.to_string()).unwrap_or_default(),
                        s.fixed_accepts.to_string(),
                        detail.partition.class[id].map(|c| format!("{c:?}")).unwrap_or_default(),
                        detail.mapping.image[id].map(|h| h.to_string()).unwrap_or_default(),
                        mate.get(&id).map(|h| h.to_string()).unwrap_or_default(),
                        gu.map(|x| x.0.to_string()).unwrap_or_default(),
                        gu.map(|x| x.1.to_string()).unwrap_or_default(),
                    ])?;
                }
            }
        }
        wtr.flush().map_err(|source| Error::Io {
            path: "<dump>".into(),
            source,
        })?;
        Ok(())
    }
}

fn causes<'a>(lockstep: &LockstepResult, ids: impl Iterator<Item = usize> + 'a) -> CauseBreakdown {
    let mut out = CauseBreakdown::default();
    for id in ids {
        match lockstep.policy.decisions[id].cause {
            Some(RejectCause::NoThreshold) => out.none_threshold += 1,
            Some(RejectCause::Threshold { .. }) => out.threshold += 1,
            Some(RejectCause::CapacityGuard) => out.capacity_guard += 1,
            _ => {}
        }
    }
    out
}

/// Runs every step of the check against a given feasible OPT vector.
pub fn check_proof_with(trace: &Trace, opt_vector: &[bool], options: ProofOptions) -> Result<ProofLedger> {
    let config = trace.config;
    let table = ThresholdTable::new(config);
    let lockstep = simulate_lockstep(trace, ModifiedHarmonic::new(config), opt_vector)?;
    let partition = partition_opt(&lockstep);
    let partition_ok = partition_well_formed(&lockstep, &partition);
    let mapping = build_submappings(&lockstep, &partition, options);
    let har_vec = lockstep.policy.acceptance_vector();
    let mapping_ok = mapping.is_well_formed(trace, &partition, &har_vec);
    let g_u = check_g_equals_u(&lockstep, &partition, &mapping);
    let matching = build_matching(&lockstep, &partition, &table);
    let har = lockstep.policy.throughput;
    let opt = lockstep.fixed.throughput;
    let verdicts = verify_bounds(config.n, har, &partition);
    Ok(ProofLedger {
        config,
        options,
        har,
        opt,
        har_guard_triggers: lockstep.policy.guard_triggers,
        a: partition.a,
        b: partition.b,
        c: partition.c,
        partition_well_formed: partition_ok,
        mapping_well_formed: mapping_ok,
        mapping_violations: mapping.violations.clone(),
        b_causes: causes(&lockstep, partition.ids(Class::B)),
        c_causes: causes(&lockstep, partition.ids(Class::C)),
        cap: matching.cap,
        max_match_count: matching.max_match_count,
        matching_violations: matching.violations.clone(),
        mate_violations: matching.mate_violations.clone(),
        g_u: (&g_u).into(),
        verdicts,
        detail: Some(Box::new(ProofDetail {
            lockstep,
            partition,
            mapping,
            g_u,
            matching,
        })),
    })
}

/// Checks against the oracle's optimal vector.
pub fn check_proof(trace: &Trace, limits: OracleLimits, options: ProofOptions) -> Result<ProofLedger> {
    let opt = offline_opt(trace, limits)?;
    check_proof_with(trace, &opt.opt_vector, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicySpec;
    use crate::sim::{simulate, SimOptions};

    fn trace(n: usize, b: usize, arrivals: &[(u64, usize)]) -> Trace {
        Trace::from_arrivals(SwitchConfig::new(n, b).unwrap(), arrivals)
    }

    fn har_vector(t: &Trace) -> Vec<bool> {
        simulate(t, &PolicySpec::ModifiedHarmonic, SimOptions::default())
            .unwrap()
            .acceptance_vector()
    }

    #[test]
    fn opt_equal_to_har() {
        let t = trace(3, 6, &[(0, 1), (0, 1), (0, 2), (0, 1), (0, 1), (1, 3), (1, 1), (3, 2)]);
        let v = har_vector(&t);
        let l = check_proof_with(&t, &v, ProofOptions::default()).unwrap();
        assert_eq!((l.a, l.b, l.c), (l.har, 0, 0));
        assert!(l.partition_well_formed && l.mapping_well_formed);
        assert!(!l.has_violation());
        assert_eq!(l.g_u.arrival_mismatches + l.g_u.drain_mismatches, 0);
        let d = l.detail.as_ref().unwrap();
        for (id, &kept) in v.iter().enumerate() {
            if kept {
                assert_eq!(d.mapping.image[id], Some(id));
            }
        }
    }

    #[test]
    fn empty_trace_bounds() {
        let t = trace(2, 2, &[]);
        let l = check_proof_with(&t, &[], ProofOptions::default()).unwrap();
        assert!(l.verdicts.all_hold());
        assert_eq!(l.verdicts.competitive_bound.slack, 0.0);
        assert_eq!(l.g_u.checks, 2);
    }

    #[test]
    fn equal_queues_put_rejected_packet_in_c() {
        // n=2, B=2: U = (2, 1). HAR takes packet 0, then rejects packet 1
        // (k=1, queue would reach 2 >= U_1 while... ) OPT takes both.
        let t = trace(2, 2, &[(0, 2), (0, 1), (0, 1)]);
        let har = har_vector(&t);
        let opt = vec![true, true, false];
        let l = check_proof_with(&t, &opt, ProofOptions::default()).unwrap();
        let d = l.detail.as_ref().unwrap();
        for s in d.lockstep.arrivals() {
            if opt[s.packet.id] && !har[s.packet.id] {
                let expect = if s.occ_policy > s.occ_fixed { Class::B } else { Class::C };
                assert_eq!(d.partition.class[s.packet.id], Some(expect));
            }
        }
        assert!(l.partition_well_formed);
    }

    #[test]
    fn single_b_packet() {
        // n=1, B=2: OPT rejects 0, takes 1 and 2; HAR takes 0 and 1
        let t = trace(1, 2, &[(0, 1), (0, 1), (0, 1)]);
        assert_eq!(har_vector(&t), vec![true, true, false]);
        let l = check_proof_with(&t, &[false, true, true], ProofOptions::default()).unwrap();
        let d = l.detail.as_ref().unwrap();
        assert_eq!(d.partition.class, vec![None, Some(Class::A), Some(Class::B)]);
        assert_eq!(d.mapping.image[2], Some(0));
        assert!(l.mapping_violations.is_empty());
        assert!(l.verdicts.all_hold());
    }

    #[test]
    fn har_only_arrival_increments_g_and_u() {
        // OPT rejects everything; every HAR packet is case (4)
        let t = trace(2, 4, &[(0, 1), (0, 1), (0, 2)]);
        let l = check_proof_with(&t, &[false; 3], ProofOptions::default()).unwrap();
        let d = l.detail.as_ref().unwrap();
        assert_eq!(l.g_u.arrival_mismatches, 0);
        assert_eq!(d.g_u.arrival_step_breaks, 0);
        assert_eq!(l.a + l.b + l.c, 0);
    }

    #[test]
    fn matching_cap_for_four_ports() {
        assert_eq!(match_cap(4), 2);
        let t = trace(4, 8, &[(0, 1), (0, 2), (0, 3)]);
        let v = har_vector(&t);
        let l = check_proof_with(&t, &v, ProofOptions::default()).unwrap();
        assert_eq!(l.cap, 2);
        assert!(l.detail.unwrap().matching.matches.is_empty());
    }

    #[test]
    fn event_dump_has_one_row_per_arrival() {
        let t = trace(2, 4, &[(0, 1), (0, 1), (0, 1), (0, 1), (1, 2)]);
        let l = check_proof(&t, OracleLimits::default(), ProofOptions::default()).unwrap();
        let mut out = Vec::new();
        l.write_event_dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let arrivals = text.lines().filter(|r| r.contains(",arrival-")).count();
        assert_eq!(arrivals, t.len());
    }
}
