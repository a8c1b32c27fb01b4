//! Slotted simulation engine.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BufferState, EventClock, FifoBuffer, Packet, Phase, SwitchConfig, Trace};
use crate::policy::{AdmissionPolicy, Decision, OpCounters, PolicySpec, RejectCause};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SimOptions {
    /// Keep a per-event timeline.
    pub timeline: bool,
    /// Recount Modified Harmonic bookkeeping from scratch after every event.
    pub verify_bookkeeping: bool,
}

/// Aggregated policy work.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CounterStats {
    pub arrivals: u64,
    pub arrival_total: u64,
    pub arrival_max_comparisons: u64,
    pub arrival_max_increments: u64,
    pub arrival_max: u64,
    pub drain_rounds: u64,
    pub drain_total: u64,
    pub drain_max: u64,
}

impl CounterStats {
    fn record_arrival(&mut self, ops: OpCounters) {
        self.arrivals += 1;
        self.arrival_total += ops.total();
        self.arrival_max_comparisons = self.arrival_max_comparisons.max(ops.comparisons);
        self.arrival_max_increments = self.arrival_max_increments.max(ops.increments);
        self.arrival_max = self.arrival_max.max(ops.total());
    }

    fn record_drain(&mut self, ops: OpCounters) {
        self.drain_rounds += 1;
        self.drain_total += ops.total();
        self.drain_max = self.drain_max.max(ops.total());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PacketDecision {
    pub id: usize,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cause: Option<RejectCause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimelineRow {
    pub event: u64,
    pub slot: u64,
    pub phase: Phase,
    pub port: usize,
    pub occ_before: usize,
    pub decision: &'static str,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimResult {
    pub policy: String,
    pub config: SwitchConfig,
    pub decisions: Vec<PacketDecision>,
    pub throughput: usize,
    pub transmitted: usize,
    pub guard_triggers: usize,
    pub counters: CounterStats,
    /// Slot of the last transmission (0 if nothing was sent).
    pub last_slot: u64,
    #[serde(skip)]
    pub timeline: Option<Vec<TimelineRow>>,
}

impl SimResult {
    pub fn accepted(&self) -> impl Iterator<Item = usize> + '_ {
        self.decisions.iter().filter(|d| d.accepted).map(|d| d.id)
    }

    pub fn rejected(&self) -> impl Iterator<Item = (usize, RejectCause)> + '_ {
        self.decisions
            .iter()
            .filter_map(|d| d.cause.map(|c| (d.id, c)))
    }

    pub fn acceptance_vector(&self) -> Vec<bool> {
        self.decisions.iter().map(|d| d.accepted).collect()
    }

    pub fn write_timeline_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        wtr.write_record(["event", "slot", "phase", "port", "occ_before", "decision", "cause"])?;
        for row in self.timeline.iter().flatten() {
            wtr.write_record([
                row.event.to_string(),
                row.slot.to_string(),
                row.phase.to_string(),
                row.port.to_string(),
                row.occ_before.to_string(),
                row.decision.to_string(),
                row.cause.clone(),
            ])?;
        }
        wtr.flush().map_err(|source| Error::Io {
            path: "<timeline>".into(),
            source,
        })?;
        Ok(())
    }
}

/// One simulated buffer driven by an admission policy.
///
/// Callers feed arrivals in trace order; [`Engine::advance_to`] runs the
/// transmission rounds between slots. Between bursts the clock jumps over
/// idle slots once the buffer is empty.
pub struct Engine<P> {
    policy: P,
    buffer: FifoBuffer,
    clock: EventClock,
    decisions: Vec<PacketDecision>,
    transmitted: usize,
    guard_triggers: usize,
    last_slot: u64,
    counters: CounterStats,
    event: u64,
    timeline: Option<Vec<TimelineRow>>,
}

impl<P: AdmissionPolicy> Engine<P> {
    pub fn new(config: SwitchConfig, policy: P) -> Self {
        Self {
            policy,
            buffer: FifoBuffer::new(config),
            clock: EventClock::start(),
            decisions: Vec::new(),
            transmitted: 0,
            guard_triggers: 0,
            last_slot: 0,
            counters: CounterStats::default(),
            event: 0,
            timeline: None,
        }
    }

    pub fn with_timeline(mut self) -> Self {
        self.timeline = Some(Vec::new());
        self
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }

    pub fn state(&self) -> &BufferState {
        self.buffer.state()
    }

    pub fn buffer(&self) -> &FifoBuffer {
        &self.buffer
    }

    pub fn clock(&self) -> EventClock {
        self.clock
    }

    pub fn decisions(&self) -> &[PacketDecision] {
        &self.decisions
    }

    /// One transmission round at the next integer time.
    pub fn tick(&mut self) -> Result<Vec<(usize, usize)>> {
        self.clock.tick();
        let before: Option<Vec<usize>> =
            self.timeline.as_ref().map(|_| self.buffer.state().occupancies().to_vec());
        let sent = self.buffer.drain();
        let ports: Vec<usize> = sent.iter().map(|&(p, _)| p).collect();
        self.policy.reset_counters();
        self.policy.on_drain(self.buffer.state(), &ports)?;
        self.counters.record_drain(self.policy.counters());
        if !sent.is_empty() {
            self.transmitted += sent.len();
            self.last_slot = self.clock.slot;
        }
        if let (Some(tl), Some(before)) = (self.timeline.as_mut(), before) {
            for &port in &ports {
                tl.push(TimelineRow {
                    event: self.event,
                    slot: self.clock.slot,
                    phase: Phase::Transmit,
                    port,
                    occ_before: before[port - 1],
                    decision: "transmit",
                    cause: String::new(),
                });
            }
        }
        self.event += 1;
        Ok(sent)
    }

    /// Runs transmission rounds up to and including time `slot`, then opens
    /// the arrival phase of `slot`. Returns the rounds that were executed.
    pub fn advance_to(&mut self, slot: u64) -> Result<Vec<Vec<(usize, usize)>>> {
        let mut rounds = Vec::new();
        while self.clock.slot < slot {
            if self.buffer.state().total() == 0 {
                self.clock.slot = slot;
                break;
            }
            rounds.push(self.tick()?);
        }
        self.clock.to_arrivals();
        Ok(rounds)
    }

    /// Skips idle time; only valid on an empty buffer.
    pub(crate) fn jump_to(&mut self, slot: u64) {
        debug_assert_eq!(self.buffer.state().total(), 0);
        if self.clock.slot < slot {
            self.clock.slot = slot;
        }
        self.clock.to_arrivals();
    }

    pub fn arrive(&mut self, packet: &Packet) -> Result<Decision> {
        debug_assert_eq!(packet.id, self.decisions.len(), "arrivals must come in id order");
        let occ_before = self.buffer.state().occ(packet.port);
        self.policy.reset_counters();
        let decision = self.policy.decide(self.buffer.state(), packet.port);
        if decision.is_accept() {
            self.buffer.admit(packet.port, packet.id)?;
            self.policy.on_admit(self.buffer.state(), packet.port)?;
        } else if decision.cause() == Some(RejectCause::CapacityGuard) {
            self.guard_triggers += 1;
        }
        self.counters.record_arrival(self.policy.counters());
        self.decisions.push(PacketDecision {
            id: packet.id,
            accepted: decision.is_accept(),
            cause: decision.cause(),
        });
        if let Some(tl) = self.timeline.as_mut() {
            tl.push(TimelineRow {
                event: self.event,
                slot: packet.slot,
                phase: Phase::Arrivals,
                port: packet.port,
                occ_before,
                decision: if decision.is_accept() { "accept" } else { "reject" },
                cause: decision.cause().map(|c| c.to_string()).unwrap_or_default(),
            });
        }
        self.event += 1;
        Ok(decision)
    }

    pub fn drain_until_empty(&mut self) -> Result<()> {
        while self.buffer.state().total() > 0 {
            self.tick()?;
        }
        Ok(())
    }

    pub fn finish(self, config: SwitchConfig) -> SimResult {
        let throughput = self.decisions.iter().filter(|d| d.accepted).count();
        SimResult {
            policy: self.policy.name().to_string(),
            config,
            decisions: self.decisions,
            throughput,
            transmitted: self.transmitted,
            guard_triggers: self.guard_triggers,
            counters: self.counters,
            last_slot: self.last_slot,
            timeline: self.timeline,
        }
    }
}

/// Drives `policy` over the whole trace and drains the buffer afterwards.
pub fn run_policy<P: AdmissionPolicy>(trace: &Trace, policy: P, options: SimOptions) -> Result<SimResult> {
    trace.validate().into_result()?;
    let mut engine = Engine::new(trace.config, policy);
    if options.timeline {
        engine = engine.with_timeline();
    }
    for p in &trace.packets {
        engine.advance_to(p.slot)?;
        engine.arrive(p)?;
    }
    engine.drain_until_empty()?;
    Ok(engine.finish(trace.config))
}

pub fn simulate(trace: &Trace, policy: &PolicySpec, options: SimOptions) -> Result<SimResult> {
    let built = policy.build_with(trace.config, options.verify_bookkeeping);
    run_policy(trace, built, options)
}

/// Admission decisions fixed in advance, one per packet in arrival order.
#[derive(Debug, Clone)]
pub struct FixedDecisions {
    accept: Vec<bool>,
    next: usize,
}

impl FixedDecisions {
    pub fn new(accept: Vec<bool>) -> Self {
        Self { accept, next: 0 }
    }
}

impl AdmissionPolicy for FixedDecisions {
    fn name(&self) -> &'static str {
        "fixed"
    }

    fn decide(&mut self, _state: &BufferState, _port: usize) -> Decision {
        let accept = self.accept[self.next];
        self.next += 1;
        if accept {
            Decision::Accept
        } else {
            Decision::Reject(RejectCause::Offline)
        }
    }
}

/// First arrival at which a fixed vector would overflow the buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Infeasibility {
    pub packet: usize,
    pub slot: u64,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayOutcome {
    Feasible(SimResult),
    Infeasible(Infeasibility),
}

impl ReplayOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, ReplayOutcome::Feasible(_))
    }
}

/// Replays a fixed acceptance vector as a buffer process.
pub fn replay_acceptance(trace: &Trace, accept: &[bool]) -> Result<ReplayOutcome> {
    trace.validate().into_result()?;
    if accept.len() != trace.len() {
        return Err(Error::VectorLength {
            expected: trace.len(),
            got: accept.len(),
        });
    }
    let mut engine = Engine::new(trace.config, FixedDecisions::new(accept.to_vec()));
    for p in &trace.packets {
        engine.advance_to(p.slot)?;
        let total = engine.state().total();
        match engine.arrive(p) {
            Ok(_) => {}
            Err(Error::CapacityExceeded { .. }) => {
                return Ok(ReplayOutcome::Infeasible(Infeasibility {
                    packet: p.id,
                    slot: p.slot,
                    total,
                }))
            }
            Err(e) => return Err(e),
        }
    }
    engine.drain_until_empty()?;
    Ok(ReplayOutcome::Feasible(engine.finish(trace.config)))
}

/// Per-arrival view of two buffers run under one clock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArrivalSnapshot {
    pub packet: Packet,
    /// Pre-arrival occupancy of the arriving port in the policy's buffer.
    pub occ_policy: usize,
    /// Same for the fixed-vector buffer.
    pub occ_fixed: usize,
    pub policy_decision: PacketDecision,
    pub fixed_accepts: bool,
    /// Queue contents (packet ids, head first) of both buffers before the arrival.
    pub queues_policy: Vec<Vec<usize>>,
    pub queues_fixed: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum LockstepEvent {
    /// One transmission round at time `slot` in both buffers.
    Drain {
        slot: u64,
        policy_sent: Vec<(usize, usize)>,
        fixed_sent: Vec<(usize, usize)>,
    },
    Arrival(Box<ArrivalSnapshot>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LockstepResult {
    pub config: SwitchConfig,
    pub policy: SimResult,
    pub fixed: SimResult,
    pub events: Vec<LockstepEvent>,
}

impl LockstepResult {
    pub fn arrivals(&self) -> impl Iterator<Item = &ArrivalSnapshot> {
        self.events.iter().filter_map(|e| match e {
            LockstepEvent::Arrival(a) => Some(a.as_ref()),
            LockstepEvent::Drain { .. } => None,
        })
    }
}

fn queue_snapshot(buffer: &FifoBuffer) -> Vec<Vec<usize>> {
    buffer.queues().iter().map(|q| q.iter().copied().collect()).collect()
}

/// Runs a policy and a fixed acceptance vector side by side. Both buffers
/// see identical transmission rounds.
pub fn simulate_lockstep<P: AdmissionPolicy>(
    trace: &Trace,
    policy: P,
    accept: &[bool],
) -> Result<LockstepResult> {
    trace.validate().into_result()?;
    if accept.len() != trace.len() {
        return Err(Error::VectorLength {
            expected: trace.len(),
            got: accept.len(),
        });
    }
    let config = trace.config;
    let mut a = Engine::new(config, policy);
    let mut b = Engine::new(config, FixedDecisions::new(accept.to_vec()));
    let mut events = Vec::new();
    let mut now = 0u64;

    let run_rounds = |a: &mut Engine<P>, b: &mut Engine<FixedDecisions>, until: Option<u64>, events: &mut Vec<LockstepEvent>, now: &mut u64| -> Result<()> {
        loop {
            let busy = a.state().total() > 0 || b.state().total() > 0;
            match until {
                Some(slot) if *now >= slot => break,
                None if !busy => break,
                _ => {}
            }
            if !busy {
                let slot = until.expect("idle jump only toward an arrival");
                a.jump_to(slot);
                b.jump_to(slot);
                *now = slot;
                break;
            }
            let policy_sent = a.tick()?;
            let fixed_sent = b.tick()?;
            *now += 1;
            events.push(LockstepEvent::Drain {
                slot: *now,
                policy_sent,
                fixed_sent,
            });
        }
        Ok(())
    };

    for p in &trace.packets {
        run_rounds(&mut a, &mut b, Some(p.slot), &mut events, &mut now)?;
        let snapshot_a = queue_snapshot(a.buffer());
        let snapshot_b = queue_snapshot(b.buffer());
        let occ_policy = a.state().occ(p.port);
        let occ_fixed = b.state().occ(p.port);
        let decision = a.arrive(p)?;
        match b.arrive(p) {
            Ok(_) => {}
            Err(Error::CapacityExceeded { .. }) => {
                return Err(Error::InfeasibleVector {
                    packet: p.id,
                    slot: p.slot,
                })
            }
            Err(e) => return Err(e),
        }
        events.push(LockstepEvent::Arrival(Box::new(ArrivalSnapshot {
            packet: *p,
            occ_policy,
            occ_fixed,
            policy_decision: PacketDecision {
                id: p.id,
                accepted: decision.is_accept(),
                cause: decision.cause(),
            },
            fixed_accepts: accept[p.id],
            queues_policy: snapshot_a,
            queues_fixed: snapshot_b,
        })));
    }
    run_rounds(&mut a, &mut b, None, &mut events, &mut now)?;

    Ok(LockstepResult {
        config,
        policy: a.finish(config),
        fixed: b.finish(config),
        events,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub packet: usize,
    pub slot: u64,
    pub port: usize,
    pub harmonic_occupancies: Vec<usize>,
    pub modified_occupancies: Vec<usize>,
    pub harmonic: PacketDecision,
    pub modified: PacketDecision,
}

/// Decision agreement between the sorted-queue and single-threshold forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DifferentialReport {
    pub config: SwitchConfig,
    pub packets: usize,
    pub agree: bool,
    pub first_divergence: Option<Divergence>,
    /// Packets decided differently over the whole run (states may differ
    /// after the first divergence).
    pub disagreements: usize,
    pub harmonic_throughput: usize,
    pub modified_throughput: usize,
    pub harmonic_guard_triggers: usize,
    pub modified_guard_triggers: usize,
}

pub fn differential(trace: &Trace) -> Result<DifferentialReport> {
    use crate::policy::{HarmonicOriginal, ModifiedHarmonic};

    trace.validate().into_result()?;
    let config = trace.config;
    let mut h = Engine::new(config, HarmonicOriginal::new(config));
    let mut m = Engine::new(config, ModifiedHarmonic::new(config));
    let mut first = None;
    let mut disagreements = 0;
    for p in &trace.packets {
        h.advance_to(p.slot)?;
        m.advance_to(p.slot)?;
        let h_occ = h.state().occupancies().to_vec();
        let m_occ = m.state().occupancies().to_vec();
        let dh = h.arrive(p)?;
        let dm = m.arrive(p)?;
        if dh.is_accept() != dm.is_accept() {
            disagreements += 1;
            if first.is_none() {
                first = Some(Divergence {
                    packet: p.id,
                    slot: p.slot,
                    port: p.port,
                    harmonic_occupancies: h_occ,
                    modified_occupancies: m_occ,
                    harmonic: PacketDecision { id: p.id, accepted: dh.is_accept(), cause: dh.cause() },
                    modified: PacketDecision { id: p.id, accepted: dm.is_accept(), cause: dm.cause() },
                });
            }
        }
    }
    h.drain_until_empty()?;
    m.drain_until_empty()?;
    let h = h.finish(config);
    let m = m.finish(config);
    Ok(DifferentialReport {
        config,
        packets: trace.len(),
        agree: first.is_none(),
        first_divergence: first,
        disagreements,
        harmonic_throughput: h.throughput,
        modified_throughput: m.throughput,
        harmonic_guard_triggers: h.guard_triggers,
        modified_guard_triggers: m.guard_triggers,
    })
}
