//! Admission policies for the shared buffer.

mod baseline;
mod bookkeeping;
mod harmonic;
mod thresholds;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baseline::{
    complete_partitioning_decide, complete_sharing_decide, dynamic_threshold_decide, smxq_decide,
    smxq_default_theta, CompletePartitioning, CompleteSharing, DynamicThreshold, Smxq,
};
pub use bookkeeping::{HarmonicBookkeeping, OpCounters};
pub use harmonic::{
    harmonic_original_decide, modified_harmonic_decide, modified_harmonic_decide_real,
    HarmonicOriginal, ModifiedHarmonic,
};
pub use thresholds::{harmonic_denominator, match_cap, PrecisionWarning, ThresholdTable};

use crate::error::Result;
use crate::model::{BufferState, SwitchConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectCause {
    /// The queue already reached `U_1`; no threshold lies above it.
    NoThreshold,
    /// More than `k` queues would sit at or above `T_k`.
    Threshold { k: usize },
    /// The buffer holds `B` packets.
    CapacityGuard,
    /// The `rank` largest queues would exceed their harmonic budget.
    Budget { rank: usize },
    /// A baseline policy's own admission rule.
    Rule,
    /// Rejected by a fixed (offline) acceptance vector.
    Offline,
}

impl fmt::Display for RejectCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectCause::NoThreshold => f.write_str("none-threshold"),
            RejectCause::Threshold { k } => write!(f, "threshold-{k}"),
            RejectCause::CapacityGuard => f.write_str("capacity-guard"),
            RejectCause::Budget { rank } => write!(f, "budget-{rank}"),
            RejectCause::Rule => f.write_str("rule"),
            RejectCause::Offline => f.write_str("offline"),
        }
    }
}

impl Serialize for RejectCause {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Accept,
    Reject(RejectCause),
}

impl Decision {
    pub fn is_accept(&self) -> bool {
        matches!(self, Decision::Accept)
    }

    pub fn cause(&self) -> Option<RejectCause> {
        match self {
            Decision::Accept => None,
            Decision::Reject(c) => Some(*c),
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Accept => f.write_str("accept"),
            Decision::Reject(_) => f.write_str("reject"),
        }
    }
}

/// An online admission rule driven by the simulator.
///
/// `decide` sees the buffer before the arrival. Stateful policies are told
/// about every admission and transmission round afterwards, with the state
/// already updated.
pub trait AdmissionPolicy {
    fn name(&self) -> &'static str;

    fn decide(&mut self, state: &BufferState, port: usize) -> Decision;

    fn on_admit(&mut self, _state: &BufferState, _port: usize) -> Result<()> {
        Ok(())
    }

    fn on_drain(&mut self, _state: &BufferState, _transmitted: &[usize]) -> Result<()> {
        Ok(())
    }

    /// Work recorded since the last reset.
    fn counters(&self) -> OpCounters {
        OpCounters::default()
    }

    fn reset_counters(&mut self) {}
}

macro_rules! forward_policy {
    ($ty:ty) => {
        impl<P: AdmissionPolicy + ?Sized> AdmissionPolicy for $ty {
            fn name(&self) -> &'static str {
                (**self).name()
            }
            fn decide(&mut self, state: &BufferState, port: usize) -> Decision {
                (**self).decide(state, port)
            }
            fn on_admit(&mut self, state: &BufferState, port: usize) -> Result<()> {
                (**self).on_admit(state, port)
            }
            fn on_drain(&mut self, state: &BufferState, transmitted: &[usize]) -> Result<()> {
                (**self).on_drain(state, transmitted)
            }
            fn counters(&self) -> OpCounters {
                (**self).counters()
            }
            fn reset_counters(&mut self) {
                (**self).reset_counters()
            }
        }
    };
}

forward_policy!(Box<P>);
forward_policy!(&mut P);

/// Serializable policy selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum PolicySpec {
    Harmonic,
    ModifiedHarmonic,
    #[serde(rename = "dt")]
    DynamicThreshold {
        alpha: f64,
    },
    Sharing,
    Partitioning,
    Smxq {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<usize>,
    },
}

impl PolicySpec {
    pub const NAMES: [&'static str; 6] = [
        "harmonic",
        "modified-harmonic",
        "dt",
        "sharing",
        "partitioning",
        "smxq",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Harmonic => "harmonic",
            PolicySpec::ModifiedHarmonic => "modified-harmonic",
            PolicySpec::DynamicThreshold { .. } => "dt",
            PolicySpec::Sharing => "sharing",
            PolicySpec::Partitioning => "partitioning",
            PolicySpec::Smxq { .. } => "smxq",
        }
    }

    /// Parses a policy name, filling in `alpha` / `theta` where they apply.
    pub fn parse(name: &str, alpha: Option<f64>, theta: Option<usize>) -> Result<Self, String> {
        let spec = match name {
            "harmonic" => PolicySpec::Harmonic,
            "modified-harmonic" => PolicySpec::ModifiedHarmonic,
            "dt" => {
                let alpha = alpha.unwrap_or(1.0);
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(format!("alpha must be positive, got {alpha}"));
                }
                PolicySpec::DynamicThreshold { alpha }
            }
            "sharing" => PolicySpec::Sharing,
            "partitioning" => PolicySpec::Partitioning,
            "smxq" => PolicySpec::Smxq { theta },
            other => {
                return Err(format!(
                    "unknown policy `{other}`, expected one of {}",
                    Self::NAMES.join("|")
                ))
            }
        };
        Ok(spec)
    }

    pub fn build(&self, config: SwitchConfig) -> Box<dyn AdmissionPolicy + Send> {
        self.build_with(config, false)
    }

    /// Like [`PolicySpec::build`]; `verify` turns on the from-scratch
    /// bookkeeping check of Modified Harmonic.
    pub fn build_with(&self, config: SwitchConfig, verify: bool) -> Box<dyn AdmissionPolicy + Send> {
        match *self {
            PolicySpec::Harmonic => Box::new(HarmonicOriginal::new(config)),
            PolicySpec::ModifiedHarmonic if verify => {
                Box::new(ModifiedHarmonic::new(config).with_verification())
            }
            PolicySpec::ModifiedHarmonic => Box::new(ModifiedHarmonic::new(config)),
            PolicySpec::DynamicThreshold { alpha } => Box::new(DynamicThreshold::new(alpha)),
            PolicySpec::Sharing => Box::new(CompleteSharing),
            PolicySpec::Partitioning => Box::new(CompletePartitioning),
            PolicySpec::Smxq { theta } => {
                Box::new(Smxq::new(theta.unwrap_or_else(|| smxq_default_theta(config))))
            }
        }
    }
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s, None, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json() {
        let s: PolicySpec = serde_json::from_str(r#"{"policy":"dt","alpha":2.0}"#).unwrap();
        assert_eq!(s, PolicySpec::DynamicThreshold { alpha: 2.0 });
        let s: PolicySpec = serde_json::from_str(r#"{"policy":"smxq"}"#).unwrap();
        assert_eq!(s, PolicySpec::Smxq { theta: None });
        assert_eq!(
            serde_json::to_string(&PolicySpec::ModifiedHarmonic).unwrap(),
            r#"{"policy":"modified-harmonic"}"#
        );
    }

    #[test]
    fn parse_names() {
        for name in PolicySpec::NAMES {
            assert_eq!(PolicySpec::parse(name, None, None).unwrap().name(), name);
        }
        assert!(PolicySpec::parse("lqd", None, None).is_err());
        assert!(PolicySpec::parse("dt", Some(0.0), None).is_err());
        assert_eq!(
            PolicySpec::parse("dt", None, None).unwrap(),
            PolicySpec::DynamicThreshold { alpha: 1.0 }
        );
    }

    #[test]
    fn cause_strings() {
        assert_eq!(RejectCause::Threshold { k: 3 }.to_string(), "threshold-3");
        assert_eq!(RejectCause::NoThreshold.to_string(), "none-threshold");
        assert_eq!(RejectCause::CapacityGuard.to_string(), "capacity-guard");
    }
}
