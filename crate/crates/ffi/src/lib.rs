//! C ABI over `harmonic_switch`.
//!
//! Objects are opaque handles created by `hs_*_new` and released by the
//! matching `hs_*_free`. Every fallible call returns an [`HsStatus`]; on
//! failure [`hs_last_error`] describes the problem for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use harmonic_switch::oracle::{offline_opt, OracleLimits};
use harmonic_switch::proof::{check_proof_with, ProofOptions};
use harmonic_switch::sim::{simulate, Engine, SimOptions};
use harmonic_switch::{AdmissionPolicy, Decision, Error, Packet, PolicySpec, RejectCause, SwitchConfig, Trace};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    InvalidTrace = 4,
    TooLarge = 5,
    BudgetExhausted = 6,
    Io = 7,
    BufferTooSmall = 8,
    Internal = 9,
    Panic = 10,
}

/// Outcome of one arrival.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsCause {
    Accepted = 0,
    NoThreshold = 1,
    Threshold = 2,
    CapacityGuard = 3,
    Budget = 4,
    Rule = 5,
    Offline = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HsSimSummary {
    pub throughput: usize,
    pub transmitted: usize,
    pub guard_triggers: usize,
    pub last_slot: u64,
    /// Largest comparison + increment count of a single arrival.
    pub arrival_max_ops: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HsProofSummary {
    pub har: usize,
    pub opt: usize,
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub mapping_violations: usize,
    pub matching_violations: usize,
    pub g_u_arrival_mismatches: usize,
    pub g_u_drain_mismatches: usize,
    /// 1 if all three inequalities hold.
    pub bounds_hold: u8,
}

/// Packet trace under construction or loaded from CSV.
pub struct HsTrace {
    trace: Trace,
}

/// Online simulator fed one arrival at a time.
pub struct HsEngine {
    config: SwitchConfig,
    engine: Engine<Box<dyn AdmissionPolicy + Send>>,
    next_id: usize,
    last_slot: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::InvalidConfig(_) => HsStatus::InvalidConfig,
        Error::InvalidTrace(_) | Error::PortOutOfRange { .. } | Error::Csv(_) => HsStatus::InvalidTrace,
        Error::TooLarge { .. } => HsStatus::TooLarge,
        Error::BudgetExhausted { .. } => HsStatus::BudgetExhausted,
        Error::Io { .. } => HsStatus::Io,
        Error::InvalidSpec(_) | Error::VectorLength { .. } | Error::InfeasibleVector { .. } => {
            HsStatus::InvalidArgument
        }
        _ => HsStatus::Internal,
    }
}

/// Runs `f`, recording errors and containing panics.
fn guard(f: impl FnOnce() -> Result<(), (HsStatus, String)>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside harmonic_switch");
            HsStatus::Panic
        }
    }
}

fn lib(e: Error) -> (HsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HsStatus, String) {
    (HsStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (HsStatus, String) {
    (HsStatus::InvalidArgument, msg.into())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (HsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// `alpha` NaN and `theta` 0 select the policy defaults.
unsafe fn policy_arg(policy: *const c_char, alpha: f64, theta: usize) -> Result<PolicySpec, (HsStatus, String)> {
    let name = str_arg(policy, "policy")?;
    let alpha = (!alpha.is_nan()).then_some(alpha);
    let theta = (theta != 0).then_some(theta);
    PolicySpec::parse(name, alpha, theta).map_err(invalid)
}

fn cause_code(d: Decision) -> HsCause {
    match d {
        Decision::Accept => HsCause::Accepted,
        Decision::Reject(RejectCause::NoThreshold) => HsCause::NoThreshold,
        Decision::Reject(RejectCause::Threshold { .. }) => HsCause::Threshold,
        Decision::Reject(RejectCause::CapacityGuard) => HsCause::CapacityGuard,
        Decision::Reject(RejectCause::Budget { .. }) => HsCause::Budget,
        Decision::Reject(RejectCause::Rule) => HsCause::Rule,
        Decision::Reject(RejectCause::Offline) => HsCause::Offline,
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    static VERSION: &str = concat!("hswitch ", env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Empty trace for an `n`-port switch with buffer `capacity`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_new(n: usize, capacity: usize, out: *mut *mut HsTrace) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = SwitchConfig::new(n, capacity).map_err(lib)?;
        *out = Box::into_raw(Box::new(HsTrace {
            trace: Trace::empty(config),
        }));
        Ok(())
    })
}

/// Loads a `slot,port` CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_read_csv(
    path: *const c_char,
    n: usize,
    capacity: usize,
    out: *mut *mut HsTrace,
) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let config = SwitchConfig::new(n, capacity).map_err(lib)?;
        let trace = Trace::read_csv_file(config, Path::new(path)).map_err(lib)?;
        *out = Box::into_raw(Box::new(HsTrace { trace }));
        Ok(())
    })
}

/// Appends an arrival; slots must be nondecreasing and `1 <= port <= n`.
///
/// # Safety
/// `trace` must come from `hs_trace_new` or `hs_trace_read_csv`.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_push(trace: *mut HsTrace, slot: u64, port: usize) -> HsStatus {
    guard(|| {
        let t = trace.as_mut().ok_or_else(|| null("trace"))?;
        let n = t.trace.config.n;
        if port == 0 || port > n {
            return Err((HsStatus::InvalidTrace, format!("port {port} out of range 1..={n}")));
        }
        if t.trace.last_slot().is_some_and(|last| slot < last) {
            return Err((HsStatus::InvalidTrace, "slots not nondecreasing".into()));
        }
        let id = t.trace.packets.len();
        t.trace.packets.push(Packet { id, slot, port });
        Ok(())
    })
}

/// Number of packets, 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_len(trace: *const HsTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.len())
}

/// # Safety
/// `trace` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_trace_free(trace: *mut HsTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Runs a policy over a whole trace.
///
/// # Safety
/// `trace` must be a live handle, `policy` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_simulate(
    trace: *const HsTrace,
    policy: *const c_char,
    alpha: f64,
    theta: usize,
    out: *mut HsSimSummary,
) -> HsStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = policy_arg(policy, alpha, theta)?;
        let r = simulate(&t.trace, &spec, SimOptions::default()).map_err(lib)?;
        *out = HsSimSummary {
            throughput: r.throughput,
            transmitted: r.transmitted,
            guard_triggers: r.guard_triggers,
            last_slot: r.last_slot,
            arrival_max_ops: r.counters.arrival_max,
        };
        Ok(())
    })
}

/// Exact optimum. `accept` receives one 0/1 byte per packet when not null;
/// `accept_len` must then be at least the trace length.
///
/// # Safety
/// `trace` must be a live handle, `opt_count` writable, and `accept`
/// null or valid for `accept_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hs_offline_opt(
    trace: *const HsTrace,
    max_packets: usize,
    node_budget: u64,
    opt_count: *mut usize,
    accept: *mut u8,
    accept_len: usize,
) -> HsStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let count = opt_count.as_mut().ok_or_else(|| null("opt_count"))?;
        if !accept.is_null() && accept_len < t.trace.len() {
            return Err((
                HsStatus::BufferTooSmall,
                format!("accept buffer holds {accept_len}, trace has {} packets", t.trace.len()),
            ));
        }
        let limits = OracleLimits {
            max_packets,
            node_budget,
        };
        let r = offline_opt(&t.trace, limits).map_err(lib)?;
        *count = r.opt_count;
        if !accept.is_null() {
            let dst = std::slice::from_raw_parts_mut(accept, t.trace.len());
            for (d, &a) in dst.iter_mut().zip(&r.opt_vector) {
                *d = u8::from(a);
            }
        }
        Ok(())
    })
}

/// Proof check against `accept` (one 0/1 byte per packet), or against the
/// oracle's optimum when `accept` is null.
///
/// # Safety
/// `trace` must be a live handle, `accept` null or valid for `accept_len`
/// bytes, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_check_proof(
    trace: *const HsTrace,
    accept: *const u8,
    accept_len: usize,
    out: *mut HsProofSummary,
) -> HsStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let vector: Vec<bool> = if accept.is_null() {
            offline_opt(&t.trace, OracleLimits::default()).map_err(lib)?.opt_vector
        } else {
            std::slice::from_raw_parts(accept, accept_len).iter().map(|&b| b != 0).collect()
        };
        let l = check_proof_with(&t.trace, &vector, ProofOptions::default()).map_err(lib)?;
        *out = HsProofSummary {
            har: l.har,
            opt: l.opt,
            a: l.a,
            b: l.b,
            c: l.c,
            mapping_violations: l.mapping_violations.len(),
            matching_violations: l.matching_violations.len(),
            g_u_arrival_mismatches: l.g_u.arrival_mismatches,
            g_u_drain_mismatches: l.g_u.drain_mismatches,
            bounds_hold: u8::from(l.verdicts.all_hold()),
        };
        Ok(())
    })
}

/// Full proof ledger as JSON; release with `hs_string_free`.
///
/// # Safety
/// As for `hs_check_proof`; `json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_check_proof_json(
    trace: *const HsTrace,
    accept: *const u8,
    accept_len: usize,
    json: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        if json.is_null() {
            return Err(null("json"));
        }
        let vector: Vec<bool> = if accept.is_null() {
            offline_opt(&t.trace, OracleLimits::default()).map_err(lib)?.opt_vector
        } else {
            std::slice::from_raw_parts(accept, accept_len).iter().map(|&b| b != 0).collect()
        };
        let l = check_proof_with(&t.trace, &vector, ProofOptions::default()).map_err(lib)?;
        let text = serde_json::to_string(&l).map_err(|e| lib(e.into()))?;
        *json = CString::new(text).map_err(|_| invalid("ledger contains NUL"))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn hs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Online engine for `policy` (see `hs_simulate` for `alpha` and `theta`).
///
/// # Safety
/// `policy` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_engine_new(
    n: usize,
    capacity: usize,
    policy: *const c_char,
    alpha: f64,
    theta: usize,
    out: *mut *mut HsEngine,
) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = SwitchConfig::new(n, capacity).map_err(lib)?;
        let spec = policy_arg(policy, alpha, theta)?;
        *out = Box::into_raw(Box::new(HsEngine {
            config,
            engine: Engine::new(config, spec.build(config)),
            next_id: 0,
            last_slot: 0,
        }));
        Ok(())
    })
}

/// Feeds one arrival. Transmission rounds up to `slot` run first.
///
/// # Safety
/// `engine` must be a live handle; `cause` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_engine_arrive(
    engine: *mut HsEngine,
    slot: u64,
    port: usize,
    cause: *mut HsCause,
) -> HsStatus {
    guard(|| {
        let e = engine.as_mut().ok_or_else(|| null("engine"))?;
        let cause = cause.as_mut().ok_or_else(|| null("cause"))?;
        if port == 0 || port > e.config.n {
            return Err((HsStatus::InvalidTrace, format!("port {port} out of range 1..={}", e.config.n)));
        }
        if slot < e.last_slot {
            return Err((HsStatus::InvalidTrace, "slots not nondecreasing".into()));
        }
        e.engine.advance_to(slot).map_err(lib)?;
        let packet = Packet {
            id: e.next_id,
            slot,
            port,
        };
        let d = e.engine.arrive(&packet).map_err(lib)?;
        e.next_id += 1;
        e.last_slot = slot;
        *cause = cause_code(d);
        Ok(())
    })
}

/// Current queue length of `port`.
///
/// # Safety
/// `engine` must be a live handle; `occ` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_engine_occupancy(engine: *const HsEngine, port: usize, occ: *mut usize) -> HsStatus {
    guard(|| {
        let e = engine.as_ref().ok_or_else(|| null("engine"))?;
        let occ = occ.as_mut().ok_or_else(|| null("occ"))?;
        if port == 0 || port > e.config.n {
            return Err(invalid(format!("port {port} out of range 1..={}", e.config.n)));
        }
        *occ = e.engine.state().occ(port);
        Ok(())
    })
}

/// Packets accepted so far.
///
/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_engine_throughput(engine: *const HsEngine) -> usize {
    engine
        .as_ref()
        .map_or(0, |e| e.engine.decisions().iter().filter(|d| d.accepted).count())
}

/// # Safety
/// `engine` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_engine_free(engine: *mut HsEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}
