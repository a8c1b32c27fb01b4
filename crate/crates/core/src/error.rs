use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid switch config: {0}")]
    InvalidConfig(String),

    #[error("invalid trace: {}", format_violations(.0))]
    InvalidTrace(Vec<Violation>),

    #[error("capacity exceeded: admitting to port {port} with {total} of {capacity} slots used")]
    CapacityExceeded {
        port: usize,
        total: usize,
        capacity: usize,
    },

    #[error("port {port} out of range 1..={n}")]
    PortOutOfRange { port: usize, n: usize },

    #[error("bookkeeping inconsistent after {event}: {detail}")]
    Consistency { event: &'static str, detail: String },

    #[error("acceptance vector has {got} entries, trace has {expected} packets")]
    VectorLength { expected: usize, got: usize },

    #[error("acceptance vector infeasible at packet {packet} (slot {slot}): buffer full")]
    InfeasibleVector { packet: usize, slot: u64 },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("trace has {packets} packets, oracle limit is {limit}")]
    TooLarge { packets: usize, limit: usize },

    #[error("oracle node budget of {budget} exhausted; best lower bound {lower_bound}")]
    BudgetExhausted { budget: u64, lower_bound: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
