use super::bookkeeping::{HarmonicBookkeeping, OpCounters};
use super::thresholds::ThresholdTable;
use super::{AdmissionPolicy, Decision, RejectCause};
use crate::error::Result;
use crate::model::{BufferState, SwitchConfig};

/// Sorted-queue Harmonic rule: after a hypothetical admission, the `i`
/// largest queues together may hold at most `P_i` packets, for every `i`.
pub fn harmonic_original_decide(
    table: &ThresholdTable,
    state: &BufferState,
    port: usize,
    ops: &mut OpCounters,
) -> Decision {
    let mut occ = state.occupancies().to_vec();
    occ[port - 1] += 1;
    occ.sort_unstable_by(|a, b| b.cmp(a));
    let mut sum = 0usize;
    for (i, o) in occ.iter().enumerate() {
        sum += o;
        ops.comparisons += 1;
        if sum as f64 > table.prefix_budget(i + 1) {
            return Decision::Reject(RejectCause::Budget { rank: i + 1 });
        }
    }
    ops.comparisons += 1;
    if state.is_full() {
        return Decision::Reject(RejectCause::CapacityGuard);
    }
    Decision::Accept
}

/// Single-threshold Harmonic rule using the incremental bookkeeping.
///
/// With `k` the largest index such that the queue is below `T_k`, accept iff
/// after admission at most `k` queues are at or above `T_k`. Rejections
/// report `k`. A queue already at `U_1` has no such `k` and is rejected.
pub fn modified_harmonic_decide(
    table: &ThresholdTable,
    bk: &HarmonicBookkeeping,
    state: &BufferState,
    port: usize,
    ops: &mut OpCounters,
) -> Decision {
    ops.comparisons += 1;
    let Some(level) = bk.level(port) else {
        return Decision::Reject(RejectCause::NoThreshold);
    };
    let k = table.level_rank(level);
    ops.comparisons += 1;
    let crosses = state.occ(port) + 1 >= table.level_value(level);
    let after = bk.level_count_at(level) + usize::from(crosses);
    ops.comparisons += 1;
    if after > k {
        return Decision::Reject(RejectCause::Threshold { k });
    }
    ops.comparisons += 1;
    if state.is_full() {
        return Decision::Reject(RejectCause::CapacityGuard);
    }
    Decision::Accept
}

/// Same rule evaluated directly on the real thresholds by full scans.
/// Reference for the integer implementation; `O(n)` per call.
pub fn modified_harmonic_decide_real(
    table: &ThresholdTable,
    state: &BufferState,
    port: usize,
) -> Decision {
    let occ = state.occ(port) as f64;
    let Some(k) = (1..=table.n()).rev().find(|&k| occ < table.real(k)) else {
        return Decision::Reject(RejectCause::NoThreshold);
    };
    let t = table.real(k);
    let count = state
        .occupancies()
        .iter()
        .enumerate()
        .filter(|&(i, &o)| {
            let o = if i + 1 == port { o + 1 } else { o };
            o as f64 >= t
        })
        .count();
    if count > k {
        return Decision::Reject(RejectCause::Threshold { k });
    }
    if state.is_full() {
        return Decision::Reject(RejectCause::CapacityGuard);
    }
    Decision::Accept
}

#[derive(Debug, Clone)]
pub struct HarmonicOriginal {
    table: ThresholdTable,
    ops: OpCounters,
}

impl HarmonicOriginal {
    pub fn new(config: SwitchConfig) -> Self {
        Self {
            table: ThresholdTable::new(config),
            ops: OpCounters::default(),
        }
    }

    pub fn table(&self) -> &ThresholdTable {
        &self.table
    }
}

impl AdmissionPolicy for HarmonicOriginal {
    fn name(&self) -> &'static str {
        "harmonic"
    }

    fn decide(&mut self, state: &BufferState, port: usize) -> Decision {
        harmonic_original_decide(&self.table, state, port, &mut self.ops)
    }

    fn counters(&self) -> OpCounters {
        self.ops
    }

    fn reset_counters(&mut self) {
        self.ops.reset();
    }
}

#[derive(Debug, Clone)]
pub struct ModifiedHarmonic {
    table: ThresholdTable,
    bk: HarmonicBookkeeping,
    ops: OpCounters,
    verify: bool,
}

impl ModifiedHarmonic {
    pub fn new(config: SwitchConfig) -> Self {
        let table = ThresholdTable::new(config);
        let bk = HarmonicBookkeeping::new(&table);
        Self {
            table,
            bk,
            ops: OpCounters::default(),
            verify: false,
        }
    }

    /// Recount the bookkeeping from scratch after every event and fail on
    /// any difference.
    pub fn with_verification(mut self) -> Self {
        self.verify = true;
        self
    }

    pub fn table(&self) -> &ThresholdTable {
        &self.table
    }

    pub fn bookkeeping(&self) -> &HarmonicBookkeeping {
        &self.bk
    }
}

impl AdmissionPolicy for ModifiedHarmonic {
    fn name(&self) -> &'static str {
        "modified-harmonic"
    }

    fn decide(&mut self, state: &BufferState, port: usize) -> Decision {
        modified_harmonic_decide(&self.table, &self.bk, state, port, &mut self.ops)
    }

    fn on_admit(&mut self, state: &BufferState, port: usize) -> Result<()> {
        self.bk.on_admit(&self.table, port, state.occ(port), &mut self.ops);
        if self.verify {
            self.bk.verify(&self.table, state, "admit")?;
        }
        Ok(())
    }

    fn on_drain(&mut self, state: &BufferState, transmitted: &[usize]) -> Result<()> {
        for &port in transmitted {
            self.bk.on_transmit(&self.table, port, state.occ(port), &mut self.ops);
        }
        if self.verify {
            self.bk.verify(&self.table, state, "drain")?;
        }
        Ok(())
    }

    fn counters(&self) -> OpCounters {
        self.ops
    }

    fn reset_counters(&mut self) {
        self.ops.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n: usize, b: usize) -> ThresholdTable {
        ThresholdTable::new(SwitchConfig { n, capacity: b })
    }

    fn mh(t: &ThresholdTable, occ: &[usize], port: usize) -> Decision {
        let state = BufferState::from_occupancies(t.capacity(), occ);
        let bk = HarmonicBookkeeping::from_state(t, &state);
        let d = modified_harmonic_decide(t, &bk, &state, port, &mut OpCounters::default());
        assert_eq!(d, modified_harmonic_decide_real(t, &state, port));
        d
    }

    fn alg1(t: &ThresholdTable, occ: &[usize], port: usize) -> Decision {
        let state = BufferState::from_occupancies(t.capacity(), occ);
        harmonic_original_decide(t, &state, port, &mut OpCounters::default())
    }

    #[test]
    fn original_examples() {
        let t = table(2, 4);
        assert_eq!(alg1(&t, &[2, 2], 2), Decision::Reject(RejectCause::Budget { rank: 1 }));
        assert_eq!(alg1(&t, &[0, 0], 1), Decision::Accept);
        for n in 1..=10 {
            let b = 20;
            let t = table(n, b);
            assert_eq!(alg1(&t, &vec![0; n], 1), Decision::Accept);
        }
    }

    #[test]
    fn original_rejects_when_first_budget_below_one() {
        // n=3, B=2: P_1 < 1 so nothing is ever admitted
        let t = table(3, 2);
        assert!(t.prefix_budget(1) < 1.0);
        assert_eq!(alg1(&t, &[0, 0, 0], 1), Decision::Reject(RejectCause::Budget { rank: 1 }));
    }

    #[test]
    fn modified_examples() {
        let t = table(2, 4);
        assert_eq!(mh(&t, &[2, 0], 1), Decision::Accept);
        assert_eq!(mh(&t, &[3, 0], 1), Decision::Reject(RejectCause::NoThreshold));
        // threshold rule alone admits a fifth packet; the guard stops it
        assert_eq!(mh(&t, &[2, 2], 2), Decision::Reject(RejectCause::CapacityGuard));
        assert_eq!(mh(&t, &[0, 0], 2), Decision::Accept);
    }

    #[test]
    fn modified_small_thresholds() {
        // n=4, B=5: U = (3, 2, 1, 1)
        let t = table(4, 5);
        assert_eq!(mh(&t, &[2, 1, 0, 0], 2), Decision::Accept);
        assert_eq!(mh(&t, &[2, 2, 0, 0], 4), Decision::Accept);
        assert_eq!(mh(&t, &[1, 1, 1, 1], 1), Decision::Accept);
        assert_eq!(mh(&t, &[2, 2, 1, 0], 3), Decision::Reject(RejectCause::Threshold { k: 2 }));
    }

    #[test]
    fn modified_threshold_rejection_reports_k() {
        // n=4, B=12: U = (6, 3, 2, 2)
        let t = table(4, 12);
        assert_eq!(t.uppers(), &[6, 3, 2, 2]);
        assert_eq!(mh(&t, &[3, 3, 3, 2], 4), Decision::Reject(RejectCause::Threshold { k: 2 }));
        assert_eq!(mh(&t, &[3, 2, 0, 0], 3), Decision::Accept);
    }

    #[test]
    fn counters_are_constant() {
        let config = SwitchConfig { n: 64, capacity: 1000 };
        let mut p = ModifiedHarmonic::new(config);
        let mut state = BufferState::new(config);
        for i in 0..500 {
            let port = (i * 7) % 64 + 1;
            p.reset_counters();
            if p.decide(&state, port).is_accept() {
                state.admit(port).unwrap();
                p.on_admit(&state, port).unwrap();
            }
            assert!(p.counters().total() <= 8, "{:?}", p.counters());
        }
    }
}
