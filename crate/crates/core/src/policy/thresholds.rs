use serde::Serialize;

use crate::model::SwitchConfig;

/// Harmonic thresholds for one switch configuration.
///
/// `T_k = B / ((1 + ln n) k)` for `k = 1..=n`, their ceilings `U_k`, and the
/// prefix budgets `P_i = B / (1 + ln n) * H_i` used by the sorted-queue form
/// of the policy. All runtime comparisons go through the integer `U_k`: for
/// an integer occupancy `o`, `o >= T_k` exactly when `o >= U_k`.
///
/// Distinct values of `U` form *levels* (level 0 holds `U_1`, values strictly
/// decreasing). A queue crosses at most one level per packet, which is what
/// keeps the bookkeeping constant-time even when many `U_k` coincide.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTable {
    n: usize,
    capacity: usize,
    scale: f64,
    real: Vec<f64>,
    upper: Vec<usize>,
    prefix_budget: Vec<f64>,
    level_value: Vec<usize>,
    level_rank: Vec<usize>,
    level_of_rank: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<PrecisionWarning>,
}

/// A ceiling that would change if `ln n` moved by a few ulps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionWarning {
    pub k: usize,
    pub threshold: f64,
    pub ceiling: usize,
    pub alternative: usize,
}

/// `1 + ln n` in binary64.
pub fn harmonic_denominator(n: usize) -> f64 {
    1.0 + (n as f64).ln()
}

/// Largest integer strictly below `1 + ln n`.
pub fn match_cap(n: usize) -> usize {
    let bound = harmonic_denominator(n);
    let floor = bound.floor();
    if floor == bound {
        (floor as usize).saturating_sub(1)
    } else {
        floor as usize
    }
}

impl ThresholdTable {
    pub fn new(config: SwitchConfig) -> Self {
        let SwitchConfig { n, capacity } = config;
        assert!(n >= 1 && capacity >= 1, "switch config must be validated");
        let denom = harmonic_denominator(n);
        let scale = capacity as f64 / denom;
        let real: Vec<f64> = (1..=n).map(|k| scale / k as f64).collect();
        let upper: Vec<usize> = real.iter().map(|t| t.ceil() as usize).collect();

        let mut prefix_budget = Vec::with_capacity(n);
        let mut harmonic = 0.0;
        for k in 1..=n {
            harmonic += 1.0 / k as f64;
            prefix_budget.push(scale * harmonic);
        }

        // Recompute with ln n nudged by a few ulps either way; ln 1 is exact.
        let ln = (n as f64).ln();
        let slack = 4.0 * f64::EPSILON * ln.max(1.0);
        let mut warnings = Vec::new();
        for k in (1..=n).filter(|_| n > 1) {
            for d in [ln - slack, ln + slack] {
                let alt = (capacity as f64 / ((1.0 + d) * k as f64)).ceil() as usize;
                if alt != upper[k - 1] {
                    warnings.push(PrecisionWarning {
                        k,
                        threshold: real[k - 1],
                        ceiling: upper[k - 1],
                        alternative: alt,
                    });
                    break;
                }
            }
        }

        let mut level_value: Vec<usize> = Vec::new();
        let mut level_rank: Vec<usize> = Vec::new();
        let mut level_of_rank = Vec::with_capacity(n);
        for (i, &u) in upper.iter().enumerate() {
            if level_value.last() != Some(&u) {
                level_value.push(u);
                level_rank.push(i + 1);
            } else {
                *level_rank.last_mut().unwrap() = i + 1;
            }
            level_of_rank.push(level_value.len() - 1);
        }

        Self {
            n,
            capacity,
            scale,
            real,
            upper,
            prefix_budget,
            level_value,
            level_rank,
            level_of_rank,
            warnings,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `B / (1 + ln n)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Real threshold `T_k`, `k` in `1..=n`.
    pub fn real(&self, k: usize) -> f64 {
        self.real[k - 1]
    }

    /// Integer threshold `U_k = ceil(T_k)`.
    pub fn upper(&self, k: usize) -> usize {
        self.upper[k - 1]
    }

    pub fn reals(&self) -> &[f64] {
        &self.real
    }

    pub fn uppers(&self) -> &[usize] {
        &self.upper
    }

    /// `P_i = T_1 (1 + 1/2 + ... + 1/i)`.
    pub fn prefix_budget(&self, i: usize) -> f64 {
        self.prefix_budget[i - 1]
    }

    pub fn prefix_budgets(&self) -> &[f64] {
        &self.prefix_budget
    }

    pub fn warnings(&self) -> &[PrecisionWarning] {
        &self.warnings
    }

    pub fn level_count(&self) -> usize {
        self.level_value.len()
    }

    /// Integer threshold shared by every rank in `level`.
    pub fn level_value(&self, level: usize) -> usize {
        self.level_value[level]
    }

    /// Largest rank `k` whose `U_k` equals the level's value.
    pub fn level_rank(&self, level: usize) -> usize {
        self.level_rank[level]
    }

    pub fn level_of_rank(&self, k: usize) -> usize {
        self.level_of_rank[k - 1]
    }

    /// Level of a queue holding `occ` packets: the last level whose value
    /// exceeds `occ`, or `None` when `occ >= U_1`.
    pub fn level_for(&self, occ: usize) -> Option<usize> {
        // level values are strictly decreasing
        let above = self.level_value.partition_point(|&v| v > occ);
        above.checked_sub(1)
    }

    /// `max { k : occ < T_k }`, computed through the integer table.
    pub fn rank_for(&self, occ: usize) -> Option<usize> {
        self.level_for(occ).map(|l| self.level_rank[l])
    }
}
