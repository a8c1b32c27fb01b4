use serde::Serialize;

use super::thresholds::ThresholdTable;
use crate::error::{Error, Result};
use crate::model::BufferState;

/// Comparison and increment counts for one event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounters {
    pub comparisons: u64,
    pub increments: u64,
}

impl OpCounters {
    pub fn total(&self) -> u64 {
        self.comparisons + self.increments
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Incremental state behind the constant-time Modified Harmonic decision.
///
/// Per port it stores the current level (see [`ThresholdTable`]): the
/// smallest threshold still above the queue, or `None` once the queue has
/// reached `U_1`. Per level it stores how many queues sit at or above the
/// level's value. Both change by at most one step per packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarmonicBookkeeping {
    level: Vec<Option<usize>>,
    at_or_above: Vec<usize>,
}

impl HarmonicBookkeeping {
    /// Bookkeeping for an empty buffer.
    pub fn new(table: &ThresholdTable) -> Self {
        let last = table.level_count() - 1;
        Self {
            level: vec![Some(last); table.n()],
            at_or_above: vec![0; table.level_count()],
        }
    }

    /// Recomputes everything from the occupancies.
    pub fn from_state(table: &ThresholdTable, state: &BufferState) -> Self {
        let level = state.occupancies().iter().map(|&o| table.level_for(o)).collect();
        let at_or_above = (0..table.level_count())
            .map(|l| {
                let v = table.level_value(l);
                state.occupancies().iter().filter(|&&o| o >= v).count()
            })
            .collect();
        Self { level, at_or_above }
    }

    /// `max { k : occ[port] <= U_k - 1 }`, or `None` if `occ[port] >= U_1`.
    pub fn q_index(&self, table: &ThresholdTable, port: usize) -> Option<usize> {
        self.level[port - 1].map(|l| table.level_rank(l))
    }

    pub(crate) fn level(&self, port: usize) -> Option<usize> {
        self.level[port - 1]
    }

    pub(crate) fn level_count_at(&self, level: usize) -> usize {
        self.at_or_above[level]
    }

    /// Number of queues with occupancy at least `U_k`.
    pub fn at_or_above(&self, table: &ThresholdTable, k: usize) -> usize {
        self.at_or_above[table.level_of_rank(k)]
    }

    /// Update after `port` grew by one packet to `new_occ`.
    pub fn on_admit(
        &mut self,
        table: &ThresholdTable,
        port: usize,
        new_occ: usize,
        ops: &mut OpCounters,
    ) {
        let slot = &mut self.level[port - 1];
        if let Some(l) = *slot {
            ops.comparisons += 1;
            if new_occ >= table.level_value(l) {
                self.at_or_above[l] += 1;
                *slot = l.checked_sub(1);
                ops.increments += 2;
            }
        }
    }

    /// Update after `port` shrank by one packet to `new_occ`.
    pub fn on_transmit(
        &mut self,
        table: &ThresholdTable,
        port: usize,
        new_occ: usize,
        ops: &mut OpCounters,
    ) {
        let slot = &mut self.level[port - 1];
        let below = match *slot {
            None => Some(0),
            Some(l) if l + 1 < table.level_count() => Some(l + 1),
            Some(_) => None,
        };
        if let Some(next) = below {
            ops.comparisons += 1;
            if new_occ < table.level_value(next) {
                self.at_or_above[next] -= 1;
                *slot = Some(next);
                ops.increments += 2;
            }
        }
    }

    /// Checks the incremental state against a from-scratch recount.
    pub fn verify(&self, table: &ThresholdTable, state: &BufferState, event: &'static str) -> Result<()> {
        let fresh = Self::from_state(table, state);
        if *self != fresh {
            return Err(Error::Consistency {
                event,
                detail: format!(
                    "incremental levels {:?} counts {:?}, recomputed levels {:?} counts {:?}",
                    self.level, self.at_or_above, fresh.level, fresh.at_or_above
                ),
            });
        }
        Ok(())
    }
}
