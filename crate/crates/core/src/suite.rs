//! Batch runs: the randomized suite, exhaustive boxes and ratio sweeps.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SwitchConfig, Trace};
use crate::oracle::{offline_opt, ratio, OracleLimits};
use crate::policy::{harmonic_denominator, PolicySpec};
use crate::sim::{replay_acceptance, simulate, SimOptions};
use crate::tracegen::{enumerate_all, generate_one, GenKind, GenSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptSource {
    /// Exact optimum from the oracle.
    Oracle,
    /// Best feasible vector found by the heuristics; a lower bound on OPT.
    Heuristic,
    /// Upper bound on OPT, not a vector.
    UpperBound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OptChoice {
    pub source: OptSource,
    pub count: usize,
    #[serde(skip)]
    pub vector: Vec<bool>,
}

/// Packets that longest-queue-drop with push-out ends up transmitting.
///
/// Dropping packets never delays the ones behind them, so the surviving set
/// is feasible without push-out.
pub fn lqd_vector(trace: &Trace) -> Vec<bool> {
    let n = trace.config.n;
    let cap = trace.config.capacity;
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); n];
    let mut keep = vec![false; trace.len()];
    let mut total = 0usize;
    let mut now = 0u64;
    for p in &trace.packets {
        while now < p.slot && total > 0 {
            now += 1;
            for q in queues.iter_mut() {
                if q.pop_front().is_some() {
                    total -= 1;
                }
            }
        }
        now = now.max(p.slot);
        let i = p.port - 1;
        if total == cap {
            let (longest, len) = queues
                .iter()
                .enumerate()
                .map(|(j, q)| (j, q.len()))
                .max_by_key(|&(j, len)| (len, std::cmp::Reverse(j)))
                .expect("n >= 1");
            if len <= queues[i].len() + 1 {
                continue;
            }
            let dropped = queues[longest].pop_back().expect("nonempty");
            keep[dropped] = false;
            total -= 1;
        }
        queues[i].push_back(p.id);
        keep[p.id] = true;
        total += 1;
    }
    keep
}

/// Best feasible acceptance vector among LQD survivors and the online policies.
pub fn heuristic_opt(trace: &Trace) -> Result<OptChoice> {
    let mut best = lqd_vector(trace);
    let mut best_count = best.iter().filter(|&&a| a).count();
    for spec in [PolicySpec::Sharing, PolicySpec::ModifiedHarmonic, PolicySpec::DynamicThreshold { alpha: 1.0 }] {
        let r = simulate(trace, &spec, SimOptions::default())?;
        if r.throughput > best_count {
            best_count = r.throughput;
            best = r.acceptance_vector();
        }
    }
    if !replay_acceptance(trace, &best)?.is_feasible() {
        return Err(Error::Consistency {
            event: "heuristic",
            detail: "heuristic acceptance vector is infeasible".into(),
        });
    }
    Ok(OptChoice {
        source: OptSource::Heuristic,
        count: best_count,
        vector: best,
    })
}

/// The oracle's vector when the trace is within `limits`, else the heuristic.
pub fn opt_vector(trace: &Trace, limits: OracleLimits) -> Result<OptChoice> {
    if trace.len() <= limits.max_packets {
        match offline_opt(trace, limits) {
            Ok(r) => {
                return Ok(OptChoice {
                    source: OptSource::Oracle,
                    count: r.opt_count,
                    vector: r.opt_vector,
                })
            }
            Err(Error::BudgetExhausted { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    heuristic_opt(trace)
}

/// Upper bound on OPT: each port alone with the whole buffer, where greedy
/// is optimal.
pub fn per_port_upper_bound(trace: &Trace) -> usize {
    (1..=trace.config.n)
        .map(|port| {
            let arrivals: Vec<(u64, usize)> =
                trace.packets.iter().filter(|p| p.port == port).map(|p| (p.slot, 1)).collect();
            let single = Trace::from_arrivals(SwitchConfig { n: 1, capacity: trace.config.capacity }, &arrivals);
            simulate(&single, &PolicySpec::Sharing, SimOptions::default())
                .map(|r| r.throughput)
                .unwrap_or(arrivals.len())
        })
        .sum()
}

/// Upper bound on OPT: at the last arrival slot the buffer holds at most `B`,
/// and port `q` cannot have sent more than `min(last - first_q, count_q)`.
/// Combined with [`per_port_upper_bound`].
pub fn opt_upper_bound(trace: &Trace) -> usize {
    let Some(last) = trace.last_slot() else { return 0 };
    let n = trace.config.n;
    let mut first = vec![None; n];
    let mut count = vec![0u64; n];
    for p in &trace.packets {
        first[p.port - 1].get_or_insert(p.slot);
        count[p.port - 1] += 1;
    }
    let sent: u64 = first
        .iter()
        .zip(&count)
        .filter_map(|(f, &c)| f.map(|f| (last - f).min(c)))
        .sum();
    let drain_bound = trace.config.capacity.saturating_add(sent as usize);
    drain_bound.min(per_port_upper_bound(trace)).min(trace.len())
}

/// Parameters of the seeded randomized suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSuite {
    pub seed: u64,
    pub count: usize,
    pub max_n: usize,
    #[serde(rename = "max_B")]
    pub max_capacity: usize,
    pub max_len: usize,
    /// Share of traces kept short enough for the oracle, in percent.
    pub oracle_share: u32,
    pub oracle_len: usize,
}

impl Default for RandomSuite {
    fn default() -> Self {
        Self {
            seed: 1,
            count: 10_000,
            max_n: 6,
            max_capacity: 20,
            max_len: 200,
            oracle_share: 50,
            oracle_len: 20,
        }
    }
}

impl RandomSuite {
    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    /// Generator spec of trace `index`; a function of `(seed, index)` only.
    pub fn spec(&self, index: usize) -> GenSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let n = rng.random_range(1..=self.max_n);
        let capacity = rng.random_range(1..=self.max_capacity);
        let short = rng.random_range(0..100) < self.oracle_share;
        let length = if short {
            rng.random_range(1..=self.oracle_len.min(self.max_len))
        } else {
            rng.random_range(1..=self.max_len)
        };
        let kind = match rng.random_range(0..4) {
            0 => GenKind::Uniform,
            1 => GenKind::Onoff,
            2 => GenKind::Flood,
            _ => GenKind::AdversarialShift,
        };
        let mut spec = GenSpec::new(kind, n, capacity, length).seeded(rng.random());
        spec.target = rng.random_range(1..=n);
        spec.burst_len = rng.random_range(1..=8);
        spec.load = rng.random_range(0.5..3.0);
        spec
    }

    pub fn trace(&self, index: usize) -> Result<Trace> {
        generate_one(&self.spec(index))
    }

    pub fn traces(&self) -> Result<Vec<Trace>> {
        (0..self.count).into_par_iter().map(|i| self.trace(i)).collect()
    }
}

/// A parameter box for exhaustive enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustiveBox {
    pub ns: Vec<usize>,
    #[serde(rename = "Bs")]
    pub capacities: Vec<usize>,
    pub max_slots: u64,
    pub max_packets: usize,
}

impl ExhaustiveBox {
    pub fn configs(&self) -> Result<Vec<SwitchConfig>> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &b in &self.capacities {
                out.push(SwitchConfig::new(n, b)?);
            }
        }
        Ok(out)
    }

    /// Runs `f` on every trace of the box in parallel and collects the
    /// `Some` results, in enumeration order per config.
    pub fn collect<T, F>(&self, f: F) -> Result<(u64, Vec<T>)>
    where
        T: Send,
        F: Fn(&Trace) -> Result<Option<T>> + Sync,
    {
        let mut total = 0u64;
        let mut found = Vec::new();
        for config in self.configs()? {
            let mut traces = enumerate_all(config, self.max_slots, self.max_packets).peekable();
            while traces.peek().is_some() {
                let chunk: Vec<Trace> = traces.by_ref().take(1 << 16).collect();
                total += chunk.len() as u64;
                let hits = chunk.par_iter().map(&f).collect::<Result<Vec<Option<T>>>>()?;
                found.extend(hits.into_iter().flatten());
            }
        }
        Ok((total, found))
    }
}

/// One row of a ratio sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub trace_id: String,
    pub n: usize,
    #[serde(rename = "B")]
    pub capacity: usize,
    pub policy: String,
    pub opt: usize,
    pub opt_source: OptSource,
    pub alg: usize,
    pub ratio: f64,
    pub bound: f64,
    pub guard_triggers: usize,
    /// Modified Harmonic row above `2 + ln n` against an exact or lower-bound OPT.
    pub flagged: bool,
}

/// Rows for `trace` under each policy. With an exact or heuristic OPT a
/// Modified Harmonic ratio above the bound is flagged; upper-bound rows are
/// never flagged.
pub fn ratio_rows(trace_id: &str, trace: &Trace, policies: &[PolicySpec], opt: &OptChoice) -> Result<Vec<RatioRow>> {
    let bound = 1.0 + harmonic_denominator(trace.config.n);
    policies
        .iter()
        .map(|spec| {
            let alg = simulate(trace, spec, SimOptions::default())?;
            let r = ratio(opt.count, alg.throughput);
            Ok(RatioRow {
                trace_id: trace_id.to_string(),
                n: trace.config.n,
                capacity: trace.config.capacity,
                policy: spec.name().to_string(),
                opt: opt.count,
                opt_source: opt.source,
                alg: alg.throughput,
                ratio: r,
                bound,
                guard_triggers: alg.guard_triggers,
                flagged: *spec == PolicySpec::ModifiedHarmonic && opt.source != OptSource::UpperBound && r > bound,
            })
        })
        .collect()
}

pub fn write_ratio_csv<W: Write>(rows: &[RatioRow], writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(["trace_id", "n", "B", "policy", "opt", "opt_source", "alg", "ratio", "bound", "guard_triggers", "flagged"])?;
    for r in rows {
        let source = match r.opt_source {
            OptSource::Oracle => "oracle",
            OptSource::Heuristic => "heuristic",
            OptSource::UpperBound => "upper-bound",
        };
        let ratio = if r.ratio.is_infinite() { "inf".to_string() } else { format!("{:.6}", r.ratio) };
        wtr.write_record([
            r.trace_id.clone(),
            r.n.to_string(),
            r.capacity.to_string(),
            r.policy.clone(),
            r.opt.to_string(),
            source.to_string(),
            r.alg.to_string(),
            ratio,
            format!("{:.6}", r.bound),
            r.guard_triggers.to_string(),
            r.flagged.to_string(),
        ])?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<ratio table>".into(),
        source,
    })?;
    Ok(())
}

/// Flood trace of the comparison family: `burst_len = B` slots on port 1,
/// then the all-port burst.
pub fn flood_family_trace(n: usize, capacity: usize) -> Result<Trace> {
    let mut spec = GenSpec::new(GenKind::Flood, n, capacity, 0);
    spec.burst_len = capacity;
    generate_one(&spec)
}
