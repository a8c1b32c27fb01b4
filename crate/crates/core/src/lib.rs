//! Online buffer sharing for an `n`-port shared-memory switch.
//!
//! The crate simulates admission policies on packet traces (Harmonic in its
//! sorted-queue and single-threshold forms, plus Dynamic Thresholds, SMXQ and
//! static sharing/partitioning), computes the offline optimum of small
//! instances exactly, and replays the partition/mapping/matching argument
//! behind the `2 + ln n` competitive bound on concrete traces.

pub mod cli;
pub mod error;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod proof;
pub mod sim;
pub mod suite;
pub mod tracegen;

pub use error::{Error, Result};
pub use model::{BufferState, Packet, SwitchConfig, Trace};
pub use policy::{AdmissionPolicy, Decision, PolicySpec, RejectCause, ThresholdTable};

/// Version string embedded in every output file.
pub const TOOL_VERSION: &str = concat!("hswitch ", env!("CARGO_PKG_VERSION"));
