//! C interface to tm-core.
//!
//! Every call returns a [`TmStatus`]; on failure a message is available from
//! [`tm_last_error`] on the same thread. Documents are opaque handles freed
//! with [`tm_document_free`]; strings returned through out-parameters are
//! freed with [`tm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tm_core::dot::to_dot;
use tm_core::dsl::{parse_str, Document};
use tm_core::railcar::{self, ExploreConfig, WorldParams};
use tm_core::sim::{check_trace, simulate, SimConfig, Stimulus, Trace};
use tm_core::validate::validate_static;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidModel = 4,
    SimulationError = 5,
    BadInput = 6,
    RailcarError = 7,
    Panic = 8,
}

/// A parsed model file.
pub struct TmDocument {
    doc: Document,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Res<T> = Result<T, (TmStatus, String)>;

fn guarded(f: impl FnOnce() -> Res<()>) -> TmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TmStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err((TmStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (TmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_text<'a>(p: *const c_char, what: &str) -> Res<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

unsafe fn give(out: *mut *mut c_char, s: String) -> Res<()> {
    if out.is_null() {
        return Err((TmStatus::NullArgument, "output pointer is null".into()));
    }
    *out = CString::new(s).map_err(|_| (TmStatus::BadInput, "output holds a NUL byte".into()))?.into_raw();
    Ok(())
}

unsafe fn doc_ref<'a>(d: *const TmDocument) -> Res<&'a Document> {
    d.as_ref().map(|d| &d.doc).ok_or((TmStatus::NullArgument, "document is null".into()))
}

/// Last error message on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn tm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn tm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses model text into a new document.
///
/// # Safety
/// `src` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_document_parse(src: *const c_char, out: *mut *mut TmDocument) -> TmStatus {
    guarded(|| {
        let src = text(src, "source")?;
        if out.is_null() {
            return Err((TmStatus::NullArgument, "output pointer is null".into()));
        }
        let doc = parse_str(src).map_err(|d| {
            let lines: Vec<String> = d.iter().map(|x| x.to_string()).collect();
            (TmStatus::ParseError, lines.join("\n"))
        })?;
        *out = Box::into_raw(Box::new(TmDocument { doc }));
        Ok(())
    })
}

/// # Safety
/// `doc` must come from [`tm_document_parse`] or be null.
#[no_mangle]
pub unsafe extern "C" fn tm_document_free(doc: *mut TmDocument) {
    if !doc.is_null() {
        drop(Box::from_raw(doc));
    }
}

/// Validates the model; writes the findings, one per line.
///
/// # Safety
/// Pointers must be valid; `fatal` may be null.
#[no_mangle]
pub unsafe extern "C" fn tm_validate(doc: *const TmDocument, findings: *mut *mut c_char, fatal: *mut bool) -> TmStatus {
    guarded(|| {
        let report = validate_static(&doc_ref(doc)?.model);
        if !fatal.is_null() {
            *fatal = report.has_fatal();
        }
        let lines: String = report.findings.iter().map(|f| format!("{f}\n")).collect();
        give(findings, lines)
    })
}

/// Simulates a JSON stimulus list and writes the trace JSON. `behavior` may
/// be null when the document declares exactly one.
///
/// # Safety
/// String arguments must be NUL-terminated; `trace` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_simulate(
    doc: *const TmDocument,
    behavior: *const c_char,
    stimuli_json: *const c_char,
    seed: u64,
    max_ticks: u64,
    trace: *mut *mut c_char,
) -> TmStatus {
    guarded(|| {
        let doc = doc_ref(doc)?;
        let beh = behavior_of(doc, opt_text(behavior, "behavior")?)?;
        let stim: Vec<Stimulus> =
            serde_json::from_str(text(stimuli_json, "stimuli")?).map_err(|e| (TmStatus::BadInput, e.to_string()))?;
        let cfg = SimConfig { seed, max_ticks, ..Default::default() };
        let t = simulate(&doc.model, &beh, &cfg, &stim).map_err(|e| (TmStatus::SimulationError, e.to_string()))?;
        give(trace, t.to_json())
    })
}

fn behavior_of(doc: &Document, name: Option<&str>) -> Res<tm_core::dynamics::BehavioralModel> {
    let name = match name {
        Some(n) => n,
        None => doc.sole_behavior().ok_or((TmStatus::BadInput, "name a behavior".to_string()))?,
    };
    doc.behavior(name).map_err(|e| (TmStatus::InvalidModel, e.to_string()))
}

/// Checks a trace; writes the verdict JSON and whether it conforms.
///
/// # Safety
/// As for [`tm_simulate`]; `conforms` may be null.
#[no_mangle]
pub unsafe extern "C" fn tm_check_trace(
    doc: *const TmDocument,
    behavior: *const c_char,
    trace_json: *const c_char,
    verdict: *mut *mut c_char,
    conforms: *mut bool,
) -> TmStatus {
    guarded(|| {
        let doc = doc_ref(doc)?;
        let beh = behavior_of(doc, opt_text(behavior, "behavior")?)?;
        let t = Trace::from_json(text(trace_json, "trace")?).map_err(|e| (TmStatus::BadInput, e.to_string()))?;
        let v = check_trace(&t, &beh);
        if !conforms.is_null() {
            *conforms = v.conforms;
        }
        give(verdict, serde_json::to_string_pretty(&v).unwrap())
    })
}

/// Renders the model as DOT, optionally colored by region.
///
/// # Safety
/// `doc` must be valid; `dot` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_export_dot(doc: *const TmDocument, regions: bool, dot: *mut *mut c_char) -> TmStatus {
    guarded(|| {
        let doc = doc_ref(doc)?;
        if validate_static(&doc.model).has_fatal() {
            return Err((TmStatus::InvalidModel, "model has fatal findings".into()));
        }
        give(dot, to_dot(&doc.model, regions.then_some(&doc.regions)))
    })
}

/// Runs the railcar world with default segments and spots.
///
/// # Safety
/// `trace` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tm_railcar_run(
    terminals: usize,
    cars: usize,
    seed: u64,
    max_ticks: u64,
    trace: *mut *mut c_char,
) -> TmStatus {
    guarded(|| {
        let params = WorldParams { terminals, cars, ..Default::default() };
        let cfg = SimConfig { seed, max_ticks, ..Default::default() };
        let t = railcar::run_world(&params, &cfg).map_err(|e| (TmStatus::RailcarError, e.to_string()))?;
        give(trace, t.to_json())
    })
}

/// Explores the railcar world; writes the report JSON and whether it is safe.
///
/// # Safety
/// `report` must be writable; `safe` may be null.
#[no_mangle]
pub unsafe extern "C" fn tm_railcar_explore(
    terminals: usize,
    cars: usize,
    depth: usize,
    report: *mut *mut c_char,
    safe: *mut bool,
) -> TmStatus {
    guarded(|| {
        let params = WorldParams { terminals, cars, ..Default::default() };
        let r = railcar::explore(&ExploreConfig::new(params, depth))
            .map_err(|e| (TmStatus::RailcarError, e.to_string()))?;
        if !safe.is_null() {
            *safe = r.is_safe();
        }
        give(report, serde_json::to_string_pretty(&r).unwrap())
    })
}
