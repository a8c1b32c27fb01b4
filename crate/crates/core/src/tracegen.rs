//! Reproducible workloads: seeded random kinds and exhaustive enumeration.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SwitchConfig, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    /// Binomial(n, load / n) arrivals per port per slot, shuffled within the slot.
    Uniform,
    /// Two packets per slot into `target` for `burst_len` slots, then one
    /// slot in which every port receives `B` packets, interleaved.
    Flood,
    /// Ports switch between silent and overloaded (two packets per slot);
    /// each slot a port flips state with probability `1 / burst_len`.
    Onoff,
    /// Every `burst_len` slots the next port in turn receives `B` packets.
    AdversarialShift,
    /// Every trace with exactly `length` packets in `slots` slots.
    Enumerate,
}

impl std::str::FromStr for GenKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "uniform" => GenKind::Uniform,
            "flood" => GenKind::Flood,
            "onoff" => GenKind::Onoff,
            "adversarial-shift" => GenKind::AdversarialShift,
            "enumerate" => GenKind::Enumerate,
            other => return Err(format!("unknown trace kind `{other}`")),
        })
    }
}

fn default_target() -> usize {
    1
}

fn default_burst_len() -> usize {
    8
}

fn default_load() -> f64 {
    1.0
}

fn default_slots() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: GenKind,
    pub n: usize,
    #[serde(rename = "B")]
    pub capacity: usize,
    /// Packet count; random kinds truncate here, 0 means no cap for `flood`
    /// and `adversarial-shift`.
    pub length: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_target")]
    pub target: usize,
    #[serde(default = "default_burst_len")]
    pub burst_len: usize,
    #[serde(default = "default_load")]
    pub load: f64,
    /// Slot count for `enumerate`.
    #[serde(default = "default_slots")]
    pub slots: u64,
}

impl GenSpec {
    pub fn new(kind: GenKind, n: usize, capacity: usize, length: usize) -> Self {
        Self {
            kind,
            n,
            capacity,
            length,
            seed: None,
            target: default_target(),
            burst_len: default_burst_len(),
            load: default_load(),
            slots: default_slots(),
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn config(&self) -> Result<SwitchConfig> {
        SwitchConfig::new(self.n, self.capacity).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    fn check(&self) -> Result<SwitchConfig> {
        let config = self.config()?;
        let randomized = matches!(self.kind, GenKind::Uniform | GenKind::Onoff);
        if randomized && self.seed.is_none() {
            return Err(Error::InvalidSpec(format!("{:?} traces need a seed", self.kind)));
        }
        if !(self.load > 0.0 && self.load.is_finite()) {
            return Err(Error::InvalidSpec(format!("load must be positive, got {}", self.load)));
        }
        if self.target == 0 || self.target > self.n {
            return Err(Error::InvalidSpec(format!("target port {} out of range", self.target)));
        }
        if self.burst_len == 0 {
            return Err(Error::InvalidSpec("burst_len must be at least 1".into()));
        }
        if self.kind == GenKind::Enumerate && self.slots == 0 {
            return Err(Error::InvalidSpec("enumerate needs at least one slot".into()));
        }
        if matches!(self.kind, GenKind::Uniform | GenKind::Onoff) && self.length == 0 {
            return Err(Error::InvalidSpec("random kinds need a positive length".into()));
        }
        Ok(config)
    }
}

/// Traces for `spec`: one trace for the random kinds, all of them for `enumerate`.
pub fn generate(spec: &GenSpec) -> Result<Vec<Trace>> {
    let config = spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.unwrap_or(0));
    let arrivals = match spec.kind {
        GenKind::Enumerate => {
            return Ok(Enumeration::with_length(config, spec.slots, spec.length).collect())
        }
        GenKind::Uniform => uniform(spec, &mut rng),
        GenKind::Flood => flood(spec),
        GenKind::Onoff => onoff(spec, &mut rng),
        GenKind::AdversarialShift => adversarial_shift(spec),
    };
    Ok(vec![Trace::from_arrivals(config, &arrivals)])
}

/// Convenience for the random kinds.
pub fn generate_one(spec: &GenSpec) -> Result<Trace> {
    if spec.kind == GenKind::Enumerate {
        return Err(Error::InvalidSpec("enumerate produces many traces".into()));
    }
    Ok(generate(spec)?.pop().expect("one trace"))
}

fn cap(spec: &GenSpec, arrivals: &mut Vec<(u64, usize)>) -> bool {
    if spec.length > 0 && arrivals.len() >= spec.length {
        arrivals.truncate(spec.length);
        true
    } else {
        false
    }
}

fn uniform(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Vec<(u64, usize)> {
    let n = spec.n;
    let p = (spec.load / n as f64).min(1.0);
    let per_port = Binomial::new(n as u64, p).expect("valid binomial");
    let mut arrivals = Vec::with_capacity(spec.length);
    let mut slot_ports = Vec::new();
    let mut slot = 0u64;
    while arrivals.len() < spec.length {
        slot_ports.clear();
        for port in 1..=n {
            let k = per_port.sample(rng);
            slot_ports.extend(std::iter::repeat_n(port, k as usize));
        }
        slot_ports.shuffle(rng);
        arrivals.extend(slot_ports.iter().map(|&port| (slot, port)));
        slot += 1;
    }
    arrivals.truncate(spec.length);
    arrivals
}

fn flood(spec: &GenSpec) -> Vec<(u64, usize)> {
    let mut arrivals = Vec::new();
    for slot in 0..spec.burst_len as u64 {
        arrivals.push((slot, spec.target));
        arrivals.push((slot, spec.target));
        if cap(spec, &mut arrivals) {
            return arrivals;
        }
    }
    let burst_slot = spec.burst_len as u64;
    for _ in 0..spec.capacity {
        for port in 1..=spec.n {
            arrivals.push((burst_slot, port));
        }
        if cap(spec, &mut arrivals) {
            return arrivals;
        }
    }
    arrivals
}

fn onoff(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Vec<(u64, usize)> {
    let flip = 1.0 / spec.burst_len as f64;
    let start_on = (spec.load / 2.0).min(1.0);
    let mut on: Vec<bool> = (0..spec.n).map(|_| rng.random_bool(start_on)).collect();
    let mut arrivals = Vec::with_capacity(spec.length);
    let mut slot = 0u64;
    let mut slot_ports = Vec::new();
    while arrivals.len() < spec.length {
        slot_ports.clear();
        for (i, state) in on.iter_mut().enumerate() {
            if rng.random_bool(flip) {
                *state = !*state;
            }
            if *state {
                slot_ports.push(i + 1);
                slot_ports.push(i + 1);
            }
        }
        slot_ports.shuffle(rng);
        arrivals.extend(slot_ports.iter().map(|&port| (slot, port)));
        slot += 1;
    }
    arrivals.truncate(spec.length);
    arrivals
}

fn adversarial_shift(spec: &GenSpec) -> Vec<(u64, usize)> {
    let mut arrivals = Vec::new();
    let rounds = if spec.length == 0 { spec.n } else { usize::MAX };
    for round in 0..rounds {
        let slot = (round * spec.burst_len) as u64;
        let port = round % spec.n + 1;
        for _ in 0..spec.capacity {
            arrivals.push((slot, port));
            if cap(spec, &mut arrivals) {
                return arrivals;
            }
        }
    }
    arrivals
}

/// All traces with a given packet count range over `slots` slots, in
/// lexicographic order of their `(slot, port)` sequences, shorter first.
pub struct Enumeration {
    config: SwitchConfig,
    slots: u64,
    max_len: usize,
    current: Option<Vec<(u64, usize)>>,
}

impl Enumeration {
    fn new(config: SwitchConfig, slots: u64, min_len: usize, max_len: usize) -> Self {
        let current = (slots > 0 && min_len <= max_len).then(|| vec![(0, 1); min_len]);
        Self {
            config,
            slots,
            max_len,
            current,
        }
    }

    pub fn with_length(config: SwitchConfig, slots: u64, len: usize) -> Self {
        Self::new(config, slots, len, len)
    }

    fn step(&mut self) {
        let Some(cur) = self.current.as_mut() else { return };
        let n = self.config.n;
        let last_slot = self.slots - 1;
        for i in (0..cur.len()).rev() {
            let (slot, port) = cur[i];
            if port < n || slot < last_slot {
                cur[i] = if port < n { (slot, port + 1) } else { (slot + 1, 1) };
                let reset = cur[i].0;
                for entry in cur.iter_mut().skip(i + 1) {
                    *entry = (reset, 1);
                }
                return;
            }
        }
        let len = cur.len() + 1;
        self.current = (len <= self.max_len).then(|| vec![(0, 1); len]);
    }
}

impl Iterator for Enumeration {
    type Item = Trace;

    fn next(&mut self) -> Option<Trace> {
        let arrivals = self.current.as_ref()?;
        let trace = Trace::from_arrivals(self.config, arrivals);
        self.step();
        Some(trace)
    }
}

/// Every trace with at most `max_packets` arrivals in slots `0..max_slots`.
pub fn enumerate_all(config: SwitchConfig, max_slots: u64, max_packets: usize) -> Enumeration {
    Enumeration::new(config, max_slots, 0, max_packets)
}

/// Closed form for the size of [`enumerate_all`]: the sum over `m` of
/// `C(m + S - 1, m) * n^m`.
pub fn enumeration_count(n: usize, max_slots: u64, max_packets: usize) -> u128 {
    if max_slots == 0 {
        return 0;
    }
    let s = max_slots as u128;
    let mut total = 1u128;
    let mut multisets = 1u128; // C(m + s - 1, m)
    let mut power = 1u128;
    for m in 1..=max_packets as u128 {
        multisets = multisets * (m + s - 1) / m;
        power *= n as u128;
        total += multisets * power;
    }
    total
}
