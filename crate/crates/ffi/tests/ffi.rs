use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use harmonic_switch_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hs_last_error()) }.to_string_lossy().into_owned()
}

fn trace(n: usize, b: usize, arrivals: &[(u64, usize)]) -> *mut HsTrace {
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(hs_trace_new(n, b, &mut t), HsStatus::Ok);
        for &(slot, port) in arrivals {
            assert_eq!(hs_trace_push(t, slot, port), HsStatus::Ok);
        }
    }
    t
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(hs_version()) }.to_str().unwrap();
    assert!(v.starts_with("hswitch "));
}

#[test]
fn simulate_and_opt() {
    let t = trace(2, 2, &[(0, 1), (0, 1), (0, 2)]);
    let policy = CString::new("sharing").unwrap();
    let mut sim = HsSimSummary::default();
    let mut opt = 0usize;
    let mut accept = [9u8; 3];
    unsafe {
        assert_eq!(hs_trace_len(t), 3);
        assert_eq!(hs_simulate(t, policy.as_ptr(), f64::NAN, 0, &mut sim), HsStatus::Ok);
        assert_eq!(sim.throughput, 2);
        assert_eq!(hs_offline_opt(t, 24, 1_000_000, &mut opt, accept.as_mut_ptr(), 3), HsStatus::Ok);
        assert_eq!(opt, 2);
        assert_eq!(accept, [1, 1, 0]);
        assert_eq!(
            hs_offline_opt(t, 24, 1_000_000, &mut opt, accept.as_mut_ptr(), 2),
            HsStatus::BufferTooSmall
        );
        assert_eq!(hs_offline_opt(t, 2, 1_000_000, &mut opt, ptr::null_mut(), 0), HsStatus::TooLarge);
        assert!(last_error().contains("oracle limit"));
        hs_trace_free(t);
    }
}

#[test]
fn errors_are_codes() {
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(hs_trace_new(0, 4, &mut t), HsStatus::InvalidConfig);
        assert!(!last_error().is_empty());
        assert_eq!(hs_trace_new(2, 4, ptr::null_mut()), HsStatus::NullPointer);
        let t = trace(2, 4, &[(3, 1)]);
        assert_eq!(hs_trace_push(t, 2, 1), HsStatus::InvalidTrace);
        assert_eq!(hs_trace_push(t, 3, 3), HsStatus::InvalidTrace);
        let bad = CString::new("lqd").unwrap();
        let mut sim = HsSimSummary::default();
        assert_eq!(hs_simulate(t, bad.as_ptr(), f64::NAN, 0, &mut sim), HsStatus::InvalidArgument);
        assert!(last_error().contains("unknown policy"));
        let missing = CString::new("/nonexistent/trace.csv").unwrap();
        let mut u = ptr::null_mut();
        assert_eq!(hs_trace_read_csv(missing.as_ptr(), 2, 4, &mut u), HsStatus::Io);
        hs_trace_free(t);
        hs_trace_free(ptr::null_mut());
    }
}

#[test]
fn engine_reports_causes() {
    let policy = CString::new("modified-harmonic").unwrap();
    let mut e = ptr::null_mut();
    let mut cause = HsCause::Accepted;
    let mut occ = 0usize;
    unsafe {
        assert_eq!(hs_engine_new(1, 2, policy.as_ptr(), f64::NAN, 0, &mut e), HsStatus::Ok);
        assert_eq!(hs_engine_arrive(e, 0, 1, &mut cause), HsStatus::Ok);
        assert_eq!(cause, HsCause::Accepted);
        assert_eq!(hs_engine_arrive(e, 0, 1, &mut cause), HsStatus::Ok);
        assert_eq!(hs_engine_arrive(e, 0, 1, &mut cause), HsStatus::Ok);
        assert_eq!(cause, HsCause::NoThreshold);
        assert_eq!(hs_engine_occupancy(e, 1, &mut occ), HsStatus::Ok);
        assert_eq!(occ, 2);
        // one departure at time 1 precedes the slot-1 arrival
        assert_eq!(hs_engine_arrive(e, 1, 1, &mut cause), HsStatus::Ok);
        assert_eq!(cause, HsCause::Accepted);
        assert_eq!(hs_engine_throughput(e), 3);
        assert_eq!(hs_engine_arrive(e, 0, 1, &mut cause), HsStatus::InvalidTrace);
        hs_engine_free(e);
    }
}

#[test]
fn proof_summary_and_json() {
    let t = trace(1, 2, &[(0, 1), (0, 1), (0, 1)]);
    let accept = [0u8, 1, 1];
    let mut s = HsProofSummary::default();
    let mut json = ptr::null_mut();
    unsafe {
        assert_eq!(hs_check_proof(t, accept.as_ptr(), 3, &mut s), HsStatus::Ok);
        assert_eq!((s.har, s.opt, s.a, s.b, s.c), (2, 2, 1, 1, 0));
        assert_eq!(s.bounds_hold, 1);
        assert_eq!(hs_check_proof(t, ptr::null(), 0, &mut s), HsStatus::Ok);
        assert_eq!(s.a, 2);
        assert_eq!(hs_check_proof_json(t, ptr::null(), 0, &mut json), HsStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        hs_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["verdicts"]["competitive_bound"]["holds"], true);
        let bad = [1u8, 1, 1];
        assert_eq!(hs_check_proof(t, bad.as_ptr(), 3, &mut s), HsStatus::InvalidArgument);
        hs_trace_free(t);
    }
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "harmonic_switch.h"

int main(void) {
    hs_trace *t = NULL;
    if (hs_trace_new(2, 4, &t) != HS_STATUS_OK) return 1;
    hs_trace_push(t, 0, 1);
    hs_trace_push(t, 0, 1);
    hs_trace_push(t, 0, 2);
    hs_sim_summary s;
    if (hs_simulate(t, "modified-harmonic", NAN, 0, &s) != HS_STATUS_OK) return 2;
    size_t opt = 0;
    if (hs_offline_opt(t, 24, 1000000, &opt, NULL, 0) != HS_STATUS_OK) return 3;
    printf("%zu %zu\n", s.throughput, opt);
    hs_trace_free(t);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    assert!(include.join("harmonic_switch.h").exists());
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();

    let syntax = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(syntax.status.success(), "{}", String::from_utf8_lossy(&syntax.stderr));

    // link against the static library when this build produced one
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let staticlib = deps.parent().unwrap().join("libharmonic_switch_ffi.a");
    if !staticlib.exists() {
        eprintln!("{} not built; link step skipped", staticlib.display());
        return;
    }
    let exe = dir.path().join("main");
    let link = Command::new("cc")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&staticlib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(link.status.success(), "{}", String::from_utf8_lossy(&link.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "3 3");
}
