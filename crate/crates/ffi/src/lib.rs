//! C ABI for the cyclic-teleport simulator.
//!
//! Every fallible function returns a [`CtStatus`]; on failure a message is
//! kept per thread and can be read with [`ct_last_error`]. Handles are opaque
//! and must be released with their matching `*_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cyclic_teleport::coherent::SuperposedState;
use cyclic_teleport::harness::Harness;
use cyclic_teleport::protocol::{
    classify_event, global_state, herald_outcome_from, mix_network, CaseId, DetectionEvent,
    OutcomeRecord, Parity, ProtocolParams,
};
use cyclic_teleport::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    TailBudget = 3,
    Io = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtCase {
    I = 1,
    II = 2,
    III = 3,
    IV = 4,
    V = 5,
    VI = 6,
    VII = 7,
    VIII = 8,
    Ambiguous = 9,
    Impossible = 10,
}

impl From<CaseId> for CtCase {
    fn from(c: CaseId) -> Self {
        match c {
            CaseId::I => CtCase::I,
            CaseId::II => CtCase::II,
            CaseId::III => CtCase::III,
            CaseId::IV => CtCase::IV,
            CaseId::V => CtCase::V,
            CaseId::VI => CtCase::VI,
            CaseId::VII => CtCase::VII,
            CaseId::VIII => CtCase::VIII,
            CaseId::Ambiguous => CtCase::Ambiguous,
            CaseId::Impossible => CtCase::Impossible,
        }
    }
}

/// One heralded event. Fidelities are NaN when undefined (Impossible).
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CtHerald {
    pub case_id: CtCase,
    pub probability: f64,
    /// A→B, B→C, C→A.
    pub fidelities: [f64; 3],
    pub faithful: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CtOutcome {
    /// n7..n12.
    pub counts: [u32; 6],
    pub case_id: CtCase,
    pub probability: f64,
    pub fidelities: [f64; 3],
    pub faithful: bool,
}

/// Result of one seeded three-party run.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CtRunSummary {
    pub seed: u64,
    pub counts: [u32; 6],
    pub case_id: CtCase,
    /// NaN for failed runs.
    pub fidelities: [f64; 3],
    pub failed: bool,
    pub messages: u32,
}

/// Simulator for one parameter set.
pub struct CtSimulator {
    harness: Harness,
    post_mix: SuperposedState,
}

/// Enumerated outcomes in lexicographic event order.
pub struct CtTable {
    rows: Vec<OutcomeRecord>,
    total_mass: f64,
    ambiguous_mass: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(err: &Error) -> CtStatus {
    match err {
        Error::InvalidParams(_) | Error::NotACase(_) => CtStatus::InvalidArgument,
        Error::TailBudget { .. } | Error::TailUnreachable { .. } => CtStatus::TailBudget,
        Error::Io { .. } => CtStatus::Io,
        _ => CtStatus::Internal,
    }
}

/// Runs `f`, recording errors and converting panics to `Internal`.
fn guard(f: impl FnOnce() -> Result<(), (CtStatus, String)>) -> CtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CtStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CtStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (CtStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CtStatus, String) {
    (CtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_theta(theta: *const f64) -> Result<[f64; 3], (CtStatus, String)> {
    if theta.is_null() {
        return Err(null("theta"));
    }
    let t = std::slice::from_raw_parts(theta, 3);
    Ok([t[0], t[1], t[2]])
}

unsafe fn read_counts(counts: *const u32) -> Result<DetectionEvent, (CtStatus, String)> {
    if counts.is_null() {
        return Err(null("counts"));
    }
    let c = std::slice::from_raw_parts(counts, 6);
    Ok(DetectionEvent::new([c[0], c[1], c[2], c[3], c[4], c[5]]))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ct_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn ct_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a simulator with default cutoff and tail budget.
/// `theta` points to three angles.
#[no_mangle]
pub unsafe extern "C" fn ct_simulator_new(
    alpha: f64,
    theta: *const f64,
    out: *mut *mut CtSimulator,
) -> CtStatus {
    ct_simulator_new_ex(alpha, theta, 0, f64::NAN, out)
}

/// Like [`ct_simulator_new`]; `cutoff == 0` and a NaN `tail_budget` select
/// the defaults.
#[no_mangle]
pub unsafe extern "C" fn ct_simulator_new_ex(
    alpha: f64,
    theta: *const f64,
    cutoff: u32,
    tail_budget: f64,
    out: *mut *mut CtSimulator,
) -> CtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let mut params = ProtocolParams::new(alpha, read_theta(theta)?).map_err(lib_err)?;
        if cutoff > 0 {
            params = params.with_cutoff(cutoff);
        }
        if !tail_budget.is_nan() {
            params = params.with_tail_budget(tail_budget).map_err(lib_err)?;
        }
        let harness = Harness::new(params).map_err(lib_err)?;
        let post_mix = global_state(&params)
            .and_then(|g| mix_network(&g))
            .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CtSimulator { harness, post_mix }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ct_simulator_free(sim: *mut CtSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Heralds the event `counts` (six photon numbers n7..n12).
#[no_mangle]
pub unsafe extern "C" fn ct_simulator_herald(
    sim: *const CtSimulator,
    counts: *const u32,
    out: *mut CtHerald,
) -> CtStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let event = read_counts(counts)?;
        let h = herald_outcome_from(sim.harness.params(), &sim.post_mix, event).map_err(lib_err)?;
        *out = CtHerald {
            case_id: h.case.into(),
            probability: h.probability,
            fidelities: h.fidelities.unwrap_or([f64::NAN; 3]),
            faithful: h.faithful(),
        };
        Ok(())
    })
}

/// Classifies an event without a simulator. `parities` (may be null)
/// receives 0 (even) or 1 (odd) per pair, or 255 when the event is not one
/// of cases I-VIII.
#[no_mangle]
pub unsafe extern "C" fn ct_classify_event(
    counts: *const u32,
    case_id: *mut CtCase,
    parities: *mut u8,
) -> CtStatus {
    guard(|| {
        if case_id.is_null() {
            return Err(null("case_id"));
        }
        let c = classify_event(&read_counts(counts)?);
        *case_id = c.case.into();
        if !parities.is_null() {
            let bits = match c.parities {
                Some(p) => p.map(|x| u8::from(x == Parity::Odd)),
                None => [255; 3],
            };
            std::slice::from_raw_parts_mut(parities, 3).copy_from_slice(&bits);
        }
        Ok(())
    })
}

/// Snapshot of every enumerated event.
#[no_mangle]
pub unsafe extern "C" fn ct_simulator_enumerate(
    sim: *const CtSimulator,
    out: *mut *mut CtTable,
) -> CtStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let e = sim.harness.enumeration();
        *out = Box::into_raw(Box::new(CtTable {
            rows: e.outcomes(),
            total_mass: e.total_mass(),
            ambiguous_mass: e.ambiguous_mass(),
        }));
        Ok(())
    })
}

/// Number of rows; 0 for a null table.
#[no_mangle]
pub unsafe extern "C" fn ct_table_len(table: *const CtTable) -> usize {
    table.as_ref().map_or(0, |t| t.rows.len())
}

#[no_mangle]
pub unsafe extern "C" fn ct_table_get(
    table: *const CtTable,
    index: usize,
    out: *mut CtOutcome,
) -> CtStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = t.rows.get(index).ok_or_else(|| {
            (
                CtStatus::InvalidArgument,
                format!("index {index} out of range for {} rows", t.rows.len()),
            )
        })?;
        *out = CtOutcome {
            counts: r.event.counts,
            case_id: r.case.into(),
            probability: r.probability,
            fidelities: r.fidelities,
            faithful: r.faithful,
        };
        Ok(())
    })
}

/// Total enumerated mass and the Ambiguous part of it.
#[no_mangle]
pub unsafe extern "C" fn ct_table_masses(
    table: *const CtTable,
    total: *mut f64,
    ambiguous: *mut f64,
) -> CtStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        if total.is_null() || ambiguous.is_null() {
            return Err(null("output"));
        }
        *total = t.total_mass;
        *ambiguous = t.ambiguous_mass;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ct_table_free(table: *mut CtTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// One seeded protocol run. If `trace_path` is not null the JSON-lines trace
/// is written there.
#[no_mangle]
pub unsafe extern "C" fn ct_simulator_run(
    sim: *const CtSimulator,
    seed: u64,
    trace_path: *const c_char,
    out: *mut CtRunSummary,
) -> CtStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let trace = sim.harness.run(seed).map_err(lib_err)?;
        if !trace_path.is_null() {
            let path = CStr::from_ptr(trace_path).to_str().map_err(|_| {
                (
                    CtStatus::InvalidArgument,
                    "trace path is not UTF-8".to_string(),
                )
            })?;
            std::fs::write(path, trace.to_json_lines())
                .map_err(|e| (CtStatus::Io, format!("{path}: {e}")))?;
        }
        *out = CtRunSummary {
            seed,
            counts: trace.event.counts,
            case_id: trace.case.into(),
            fidelities: trace.fidelities.unwrap_or([f64::NAN; 3]),
            failed: trace.failed,
            messages: trace.messages.len() as u32,
        };
        Ok(())
    })
}
