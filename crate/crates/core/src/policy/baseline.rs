use super::{AdmissionPolicy, Decision, RejectCause};
use crate::model::{BufferState, SwitchConfig};

/// Dynamic Thresholds: a queue may grow while it is shorter than
/// `alpha` times the free space.
pub fn dynamic_threshold_decide(alpha: f64, state: &BufferState, port: usize) -> Decision {
    let free = (state.capacity() - state.total().min(state.capacity())) as f64;
    if (state.occ(port) as f64) >= alpha * free {
        return Decision::Reject(RejectCause::Rule);
    }
    if state.is_full() {
        return Decision::Reject(RejectCause::CapacityGuard);
    }
    Decision::Accept
}

pub fn complete_sharing_decide(state: &BufferState) -> Decision {
    if state.is_full() {
        Decision::Reject(RejectCause::CapacityGuard)
    } else {
        Decision::Accept
    }
}

/// Static split: every queue owns `floor(B / n)` slots.
pub fn complete_partitioning_decide(state: &BufferState, port: usize) -> Decision {
    let share = state.capacity() / state.n();
    if state.occ(port) >= share {
        return Decision::Reject(RejectCause::Rule);
    }
    complete_sharing_decide(state)
}

/// Sharing with a static per-queue cap `theta`.
pub fn smxq_decide(theta: usize, state: &BufferState, port: usize) -> Decision {
    if state.occ(port) >= theta {
        return Decision::Reject(RejectCause::Rule);
    }
    complete_sharing_decide(state)
}

/// `ceil(B / sqrt(n))`.
pub fn smxq_default_theta(config: SwitchConfig) -> usize {
    (config.capacity as f64 / (config.n as f64).sqrt()).ceil() as usize
}

#[derive(Debug, Clone, Copy)]
pub struct DynamicThreshold {
    pub alpha: f64,
}

impl DynamicThreshold {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0, "alpha must be positive");
        Self { alpha }
    }
}

impl AdmissionPolicy for DynamicThreshold {
    fn name(&self) -> &'static str {
        "dt"
    }

    fn decide(&mut self, state: &BufferState, port: usize) -> Decision {
        dynamic_threshold_decide(self.alpha, state, port)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompleteSharing;

impl AdmissionPolicy for CompleteSharing {
    fn name(&self) -> &'static str {
        "sharing"
    }

    fn decide(&mut self, state: &BufferState, _port: usize) -> Decision {
        complete_sharing_decide(state)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompletePartitioning;

impl AdmissionPolicy for CompletePartitioning {
    fn name(&self) -> &'static str {
        "partitioning"
    }

    fn decide(&mut self, state: &BufferState, port: usize) -> Decision {
        complete_partitioning_decide(state, port)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Smxq {
    pub theta: usize,
}

impl Smxq {
    pub fn new(theta: usize) -> Self {
        Self { theta }
    }
}

impl AdmissionPolicy for Smxq {
    fn name(&self) -> &'static str {
        "smxq"
    }

    fn decide(&mut self, state: &BufferState, port: usize) -> Decision {
        smxq_decide(self.theta, state, port)
    }
}
