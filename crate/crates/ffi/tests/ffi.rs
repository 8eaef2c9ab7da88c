use std::ffi::{CStr, CString};
use std::ptr;

use cyclic_teleport_ffi::*;

const QUARTER: f64 = std::f64::consts::FRAC_PI_4;

fn simulator(alpha: f64) -> *mut CtSimulator {
    let mut sim = ptr::null_mut();
    let st = unsafe { ct_simulator_new(alpha, [QUARTER; 3].as_ptr(), &mut sim) };
    assert_eq!(st, CtStatus::Ok);
    assert!(!sim.is_null());
    sim
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ct_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ct_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn invalid_alpha_is_rejected() {
    let mut sim = ptr::null_mut();
    let st = unsafe { ct_simulator_new(-1.0, [QUARTER; 3].as_ptr(), &mut sim) };
    assert_eq!(st, CtStatus::InvalidArgument);
    assert!(sim.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_pointers_are_reported() {
    let mut sim = ptr::null_mut();
    assert_eq!(
        unsafe { ct_simulator_new(1.0, ptr::null(), &mut sim) },
        CtStatus::NullPointer
    );
    assert_eq!(
        unsafe { ct_simulator_new(1.0, [QUARTER; 3].as_ptr(), ptr::null_mut()) },
        CtStatus::NullPointer
    );
    let mut case = CtCase::Impossible;
    assert_eq!(
        unsafe { ct_classify_event(ptr::null(), &mut case, ptr::null_mut()) },
        CtStatus::NullPointer
    );
    assert_eq!(unsafe { ct_table_len(ptr::null()) }, 0);
    unsafe {
        ct_simulator_free(ptr::null_mut());
        ct_table_free(ptr::null_mut());
    }
}

#[test]
fn classify_without_simulator() {
    let mut case = CtCase::Impossible;
    let mut parities = [9u8; 3];
    // odd on every sum port: Case I, all odd
    let st = unsafe {
        ct_classify_event(
            [1, 0, 1, 0, 3, 0].as_ptr(),
            &mut case,
            parities.as_mut_ptr(),
        )
    };
    assert_eq!(st, CtStatus::Ok);
    assert_eq!(case, CtCase::I);
    assert_eq!(parities, [1, 1, 1]);

    let st = unsafe {
        ct_classify_event(
            [1, 1, 0, 0, 0, 0].as_ptr(),
            &mut case,
            parities.as_mut_ptr(),
        )
    };
    assert_eq!(st, CtStatus::Ok);
    assert_eq!(case, CtCase::Impossible);
    assert_eq!(parities, [255; 3]);
}

#[test]
fn herald_and_table_agree() {
    let sim = simulator(1.0);
    let counts = [2u32, 0, 0, 4, 0, 2];
    let mut h = CtHerald {
        case_id: CtCase::Impossible,
        probability: 0.0,
        fidelities: [0.0; 3],
        faithful: false,
    };
    assert_eq!(
        unsafe { ct_simulator_herald(sim, counts.as_ptr(), &mut h) },
        CtStatus::Ok
    );
    assert_eq!(h.case_id, CtCase::V);
    assert!(h.faithful);
    for f in h.fidelities {
        assert!((f - 1.0).abs() < 1e-9, "{f}");
    }

    let mut table = ptr::null_mut();
    assert_eq!(
        unsafe { ct_simulator_enumerate(sim, &mut table) },
        CtStatus::Ok
    );
    let len = unsafe { ct_table_len(table) };
    assert!(len > 0);
    let (mut total, mut ambiguous) = (0.0, 0.0);
    assert_eq!(
        unsafe { ct_table_masses(table, &mut total, &mut ambiguous) },
        CtStatus::Ok
    );
    assert!((total - 1.0).abs() < 1e-9);
    assert!(ambiguous > 0.0 && ambiguous < total);

    let mut row = CtOutcome {
        counts: [0; 6],
        case_id: CtCase::Impossible,
        probability: 0.0,
        fidelities: [0.0; 3],
        faithful: false,
    };
    let mut found = false;
    let mut sum = 0.0;
    for i in 0..len {
        assert_eq!(unsafe { ct_table_get(table, i, &mut row) }, CtStatus::Ok);
        sum += row.probability;
        if row.counts == counts {
            assert!((row.probability - h.probability).abs() < 1e-15);
            found = true;
        }
    }
    assert!(found);
    assert!((sum - total).abs() < 1e-9);
    assert_eq!(
        unsafe { ct_table_get(table, len, &mut row) },
        CtStatus::InvalidArgument
    );
    unsafe {
        ct_table_free(table);
        ct_simulator_free(sim);
    }
}

#[test]
fn seeded_run_is_deterministic_and_writes_trace() {
    let sim = simulator(1.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let blank = CtRunSummary {
        seed: 0,
        counts: [0; 6],
        case_id: CtCase::Impossible,
        fidelities: [0.0; 3],
        failed: false,
        messages: 0,
    };
    let (mut a, mut b) = (blank, blank);
    assert_eq!(
        unsafe { ct_simulator_run(sim, 7, cpath.as_ptr(), &mut a) },
        CtStatus::Ok
    );
    assert_eq!(
        unsafe { ct_simulator_run(sim, 7, ptr::null(), &mut b) },
        CtStatus::Ok
    );
    assert_eq!(a.counts, b.counts);
    assert_eq!(a.case_id, b.case_id);
    assert_eq!(a.messages, 3);
    assert_eq!(a.failed, a.case_id == CtCase::Ambiguous);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().count() > 3);

    let bad = CString::new(dir.path().join("missing/trace.jsonl").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { ct_simulator_run(sim, 7, bad.as_ptr(), &mut a) },
        CtStatus::Io
    );
    assert!(last_error().contains("missing"));
    unsafe { ct_simulator_free(sim) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/cyclic_teleport.h"
    ))
    .unwrap();
    for name in [
        "ct_version",
        "ct_last_error",
        "ct_simulator_new",
        "ct_simulator_new_ex",
        "ct_simulator_free",
        "ct_simulator_herald",
        "ct_classify_event",
        "ct_simulator_enumerate",
        "ct_table_len",
        "ct_table_get",
        "ct_table_masses",
        "ct_table_free",
        "ct_simulator_run",
        "typedef struct CtSimulator CtSimulator",
        "CT_STATUS_TAIL_BUDGET = 3",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
