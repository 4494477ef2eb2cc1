//! C ABI for the flowlatin engine.
//!
//! Conventions: every function returns an [`FlStatus`] code (or a plain
//! value where it cannot fail); results come back through out-pointers to
//! opaque handles that must be released with the matching `_free` function.
//! On any non-OK status, `fl_last_error` returns a human-readable message
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};

use flowlatin::flow_model::{
    parse_capture_text, parse_v5_datagram, sectionize, write_sections, CaptureSet, SectionTables,
};
use flowlatin::mr_engine::{Engine, EngineConfig};
use flowlatin::netflow_analyses::{analyze, AnalysisKind, TrafficReport};
use flowlatin::planner::{compile, insert_combiners};
use flowlatin::script_lang::{infer_schemas, parse_script_text};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlStatus {
    FlOk = 0,
    FlNullArgument = 1,
    FlInvalidUtf8 = 2,
    FlParseError = 3,
    FlIoError = 4,
    FlExecError = 5,
    FlBadKind = 6,
    FlOutOfRange = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    let cstring = CString::new(message.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("error message unavailable").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = cstring);
}

fn fail(status: FlStatus, message: impl Into<String>) -> FlStatus {
    set_error(message);
    status
}

/// Copy the current thread's last error message into `buf` (NUL-terminated,
/// truncated to `len` bytes). Returns the full message length in bytes,
/// excluding the NUL.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (then only the
/// required length is returned).
#[no_mangle]
pub unsafe extern "C" fn fl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fl_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

unsafe fn cstr_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, FlStatus> {
    if ptr.is_null() {
        return Err(fail(FlStatus::FlNullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| fail(FlStatus::FlInvalidUtf8, format!("{what}: {e}")))
}

// ---------------------------------------------------------------------------
// Captures
// ---------------------------------------------------------------------------

/// Opaque handle: a parsed capture plus its three section tables.
pub struct FlCapture {
    capture: CaptureSet,
    sections: SectionTables,
}

impl FlCapture {
    fn new(capture: CaptureSet) -> Box<FlCapture> {
        let sections = sectionize(&capture);
        Box::new(FlCapture { capture, sections })
    }
}

/// Parse capture text (`#capture,...` header plus record lines) into a
/// capture handle.
///
/// # Safety
/// `text` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_capture_parse_text(
    text: *const c_char,
    out: *mut *mut FlCapture,
) -> FlStatus {
    if out.is_null() {
        return fail(FlStatus::FlNullArgument, "out pointer is null");
    }
    let text = match cstr_arg(text, "capture text") {
        Ok(t) => t,
        Err(status) => return status,
    };
    match parse_capture_text(text) {
        Ok(capture) => {
            *out = Box::into_raw(FlCapture::new(capture));
            FlStatus::FlOk
        }
        Err(e) => fail(FlStatus::FlParseError, e.to_string()),
    }
}

/// Read and parse a capture file.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_capture_open_text(
    path: *const c_char,
    out: *mut *mut FlCapture,
) -> FlStatus {
    if out.is_null() {
        return fail(FlStatus::FlNullArgument, "out pointer is null");
    }
    let path = match cstr_arg(path, "capture path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(FlStatus::FlIoError, format!("{path}: {e}")),
    };
    match parse_capture_text(&text) {
        Ok(capture) => {
            *out = Box::into_raw(FlCapture::new(capture));
            FlStatus::FlOk
        }
        Err(e) => fail(FlStatus::FlParseError, e.to_string()),
    }
}

/// Decode a binary NetFlow v5 export datagram into a capture handle whose
/// window is `[capture_start, capture_end]` epoch seconds.
///
/// # Safety
/// `bytes` must point to `len` readable bytes, `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fl_capture_from_datagram(
    bytes: *const u8,
    len: usize,
    capture_start: u64,
    capture_end: u64,
    out: *mut *mut FlCapture,
) -> FlStatus {
    if out.is_null() || bytes.is_null() {
        return fail(FlStatus::FlNullArgument, "bytes or out pointer is null");
    }
    if capture_end < capture_start {
        return fail(
            FlStatus::FlParseError,
            "capture_end is before capture_start",
        );
    }
    let data = std::slice::from_raw_parts(bytes, len);
    match parse_v5_datagram(data) {
        Ok(records) => {
            *out = Box::into_raw(FlCapture::new(CaptureSet {
                capture_start,
                capture_end,
                records,
            }));
            FlStatus::FlOk
        }
        Err(e) => fail(FlStatus::FlParseError, e.to_string()),
    }
}

/// Number of flow records in the capture.
///
/// # Safety
/// `capture` must be a live handle from this library (or null, yielding 0).
#[no_mangle]
pub unsafe extern "C" fn fl_capture_record_count(capture: *const FlCapture) -> u64 {
    if capture.is_null() {
        return 0;
    }
    (*capture).capture.records.len() as u64
}

/// Capture window length in whole seconds (floored at 1).
///
/// # Safety
/// `capture` must be a live handle (or null, yielding 0).
#[no_mangle]
pub unsafe extern "C" fn fl_capture_duration_secs(capture: *const FlCapture) -> u64 {
    if capture.is_null() {
        return 0;
    }
    (*capture).capture.duration_secs()
}

/// Write the three section datasets (NetFlow-Data1/2/3) under `dir`.
///
/// # Safety
/// `capture` must be a live handle; `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn fl_capture_write_sections(
    capture: *const FlCapture,
    dir: *const c_char,
) -> FlStatus {
    if capture.is_null() {
        return fail(FlStatus::FlNullArgument, "capture handle is null");
    }
    let dir = match cstr_arg(dir, "section directory") {
        Ok(d) => d,
        Err(status) => return status,
    };
    if let Err(e) = std::fs::create_dir_all(dir) {
        return fail(FlStatus::FlIoError, format!("{dir}: {e}"));
    }
    match write_sections(&(*capture).sections, Path::new(dir)) {
        Ok(_) => FlStatus::FlOk,
        Err(e) => fail(FlStatus::FlIoError, e.to_string()),
    }
}

/// Release a capture handle.
///
/// # Safety
/// `capture` must be a handle from this library, or null (a no-op).
#[no_mangle]
pub unsafe extern "C" fn fl_capture_free(capture: *mut FlCapture) {
    if !capture.is_null() {
        drop(Box::from_raw(capture));
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Analysis selector for `fl_capture_analyze`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlAnalysis {
    FlAnalysisSrcInterface = 0,
    FlAnalysisSrcIp = 1,
    FlAnalysisProtocol = 2,
    FlAnalysisNode = 3,
}

/// Opaque handle: one traffic report, rows sorted by flow rate descending.
pub struct FlReport {
    duration_secs: u64,
    rows: Vec<(CString, f64, u64)>,
}

impl FlReport {
    fn new(report: TrafficReport) -> Box<FlReport> {
        let rows = report
            .rows
            .into_iter()
            .map(|row| {
                let entity = CString::new(row.entity.replace('\0', "?"))
                    .unwrap_or_else(|_| CString::new("?").unwrap());
                (entity, row.flow_per_sec, row.record_count)
            })
            .collect();
        Box::new(FlReport {
            duration_secs: report.duration_secs,
            rows,
        })
    }
}

/// Run one built-in analysis over a capture.
///
/// # Safety
/// `capture` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_capture_analyze(
    capture: *const FlCapture,
    kind: FlAnalysis,
    out: *mut *mut FlReport,
) -> FlStatus {
    if capture.is_null() || out.is_null() {
        return fail(FlStatus::FlNullArgument, "capture or out pointer is null");
    }
    let kind = match kind {
        FlAnalysis::FlAnalysisSrcInterface => AnalysisKind::SrcInterface,
        FlAnalysis::FlAnalysisSrcIp => AnalysisKind::SrcIp,
        FlAnalysis::FlAnalysisProtocol => AnalysisKind::Protocol,
        FlAnalysis::FlAnalysisNode => AnalysisKind::Node,
    };
    match analyze(kind, &(*capture).sections) {
        Ok(report) => {
            *out = Box::into_raw(FlReport::new(report));
            FlStatus::FlOk
        }
        Err(e) => fail(FlStatus::FlExecError, e.to_string()),
    }
}

/// Number of rows in a report (0 for null).
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fl_report_len(report: *const FlReport) -> usize {
    if report.is_null() {
        return 0;
    }
    (*report).rows.len()
}

/// Report window length in seconds (0 for null).
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fl_report_duration_secs(report: *const FlReport) -> u64 {
    if report.is_null() {
        return 0;
    }
    (*report).duration_secs
}

/// Fetch one report row. The entity pointer stays valid until the report is
/// freed. Out-pointers may be null to skip a column.
///
/// # Safety
/// `report` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_report_row(
    report: *const FlReport,
    index: usize,
    entity: *mut *const c_char,
    flow_per_sec: *mut f64,
    record_count: *mut u64,
) -> FlStatus {
    if report.is_null() {
        return fail(FlStatus::FlNullArgument, "report handle is null");
    }
    let rows = &(*report).rows;
    let Some((e, flow, count)) = rows.get(index) else {
        return fail(
            FlStatus::FlOutOfRange,
            format!("row {index} out of range ({} rows)", rows.len()),
        );
    };
    if !entity.is_null() {
        *entity = e.as_ptr();
    }
    if !flow_per_sec.is_null() {
        *flow_per_sec = *flow;
    }
    if !record_count.is_null() {
        *record_count = *count;
    }
    FlStatus::FlOk
}

/// Release a report handle.
///
/// # Safety
/// `report` must be a handle from this library, or null (a no-op).
#[no_mangle]
pub unsafe extern "C" fn fl_report_free(report: *mut FlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

// ---------------------------------------------------------------------------
// Script execution
// ---------------------------------------------------------------------------

/// Parse, compile and execute a script. Load paths in the script resolve
/// against the process working directory; intermediates live under
/// `work_dir`. `workers` 0 means one per CPU; `split_bytes` 0 means 64 KiB.
///
/// # Safety
/// `script` and `work_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn fl_run_script(
    script: *const c_char,
    work_dir: *const c_char,
    workers: u32,
    split_bytes: u64,
) -> FlStatus {
    let script = match cstr_arg(script, "script text") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let work_dir = match cstr_arg(work_dir, "work directory") {
        Ok(d) => d,
        Err(status) => return status,
    };
    let plan = match parse_script_text(script).map_err(|e| e.to_string()).and_then(|p| {
        infer_schemas(p).map_err(|e| e.to_string())
    }) {
        Ok(plan) => plan,
        Err(e) => return fail(FlStatus::FlParseError, e),
    };
    let graph = match compile(&plan) {
        Ok(g) => insert_combiners(g),
        Err(e) => return fail(FlStatus::FlParseError, e.to_string()),
    };
    let mut cfg = EngineConfig::new(PathBuf::from(work_dir));
    if workers > 0 {
        cfg = cfg.with_workers(workers as usize);
    }
    if split_bytes > 0 {
        cfg = cfg.with_split_bytes(split_bytes);
    }
    let engine = match Engine::new(cfg) {
        Ok(e) => e,
        Err(e) => return fail(FlStatus::FlIoError, e.to_string()),
    };
    match engine.run_graph(&graph) {
        Ok(_) => FlStatus::FlOk,
        Err(e) => fail(FlStatus::FlExecError, e.to_string()),
    }
}
