//! C interface to `gerbe-index`.
//!
//! Scenarios and reports are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`GiStatus`]; on failure [`gi_last_error`] describes the problem. Strings
//! returned through out-parameters are freed with [`gi_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gerbe_index::scenario::{RunOptions, Scenario, ScenarioError, ScenarioReport};

/// Status codes; the non-zero values match the command-line exit codes where they overlap.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GiStatus {
    Ok = 0,
    ModuleError = 1,
    InputError = 2,
    InternalError = 3,
    NullPointer = 4,
    InvalidUtf8 = 5,
    OutOfRange = 6,
}

/// Opaque scenario handle.
pub struct GiScenario(Scenario);

/// Opaque report handle.
pub struct GiReport(ScenarioReport);

/// Overrides for a run; zero means "use the scenario's value".
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct GiRunOptions {
    pub resolution: usize,
    pub truncation: usize,
    pub tolerance: f64,
}

impl From<GiRunOptions> for RunOptions {
    fn from(o: GiRunOptions) -> Self {
        RunOptions {
            resolution: (o.resolution > 0).then_some(o.resolution),
            truncation: (o.truncation > 0).then_some(o.truncation),
            tolerance: (o.tolerance > 0.0).then_some(o.tolerance),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let s = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: GiStatus, message: &str) -> GiStatus {
    set_error(message);
    status
}

fn scenario_error(e: ScenarioError) -> GiStatus {
    let status = if e.exit_code() == 1 { GiStatus::ModuleError } else { GiStatus::InputError };
    fail(status, &e.to_string())
}

fn guard(f: impl FnOnce() -> GiStatus) -> GiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(GiStatus::InternalError, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, GiStatus> {
    if p.is_null() {
        return Err(fail(GiStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(GiStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message of the last failure on this thread; valid until the next call.
#[no_mangle]
pub extern "C" fn gi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a scenario file, or a bundled fixture by name.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gi_scenario_load(path: *const c_char, out: *mut *mut GiScenario) -> GiStatus {
    guard(|| {
        if out.is_null() {
            return fail(GiStatus::NullPointer, "null out pointer");
        }
        let path = match read_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Scenario::load(path) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(GiScenario(s)));
                GiStatus::Ok
            }
            Err(e) => scenario_error(e),
        }
    })
}

/// Parses scenario text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gi_scenario_parse(text: *const c_char, out: *mut *mut GiScenario) -> GiStatus {
    guard(|| {
        if out.is_null() {
            return fail(GiStatus::NullPointer, "null out pointer");
        }
        let text = match read_str(text) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Scenario::parse(text) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(GiScenario(s)));
                GiStatus::Ok
            }
            Err(e) => scenario_error(e),
        }
    })
}

/// # Safety
/// `s` must come from `gi_scenario_load` / `gi_scenario_parse` or be null.
#[no_mangle]
pub unsafe extern "C" fn gi_scenario_free(s: *mut GiScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Order of the Dixmier-Douady class (0 for infinite order) and its description.
///
/// # Safety
/// `s` must be a live scenario handle; `order` and `summary` valid pointers or null.
#[no_mangle]
pub unsafe extern "C" fn gi_ddclass(s: *const GiScenario, order: *mut u64, summary: *mut *mut c_char) -> GiStatus {
    guard(|| {
        let Some(s) = s.as_ref() else { return fail(GiStatus::NullPointer, "null scenario") };
        match s.0.dd_class() {
            Ok(c) => {
                if !order.is_null() {
                    *order = if c.is_zero() { 1 } else { c.order.as_deref().and_then(|o| o.parse().ok()).unwrap_or(0) };
                }
                if !summary.is_null() {
                    *summary = into_c_string(c.summary());
                }
                GiStatus::Ok
            }
            Err(e) => scenario_error(e),
        }
    })
}

/// Which computation [`gi_run`] performs.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GiCommand {
    Validate = 0,
    Chern = 1,
    IndexAnalytic = 2,
    IndexTopological = 3,
    Verify = 4,
}

/// Runs a command and returns its report. A report that records failed
/// checks is still returned with status `GI_STATUS_OK`; see [`gi_report_passed`].
///
/// # Safety
/// `s` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gi_run(
    s: *const GiScenario,
    command: GiCommand,
    options: GiRunOptions,
    out: *mut *mut GiReport,
) -> GiStatus {
    guard(|| {
        let Some(s) = s.as_ref() else { return fail(GiStatus::NullPointer, "null scenario") };
        if out.is_null() {
            return fail(GiStatus::NullPointer, "null out pointer");
        }
        let opts = RunOptions::from(options);
        let result = match command {
            GiCommand::Validate => s.0.validate(&opts),
            GiCommand::Chern => s.0.chern(&opts),
            GiCommand::IndexAnalytic => s.0.index_analytic(&opts),
            GiCommand::IndexTopological => s.0.index_topological(&opts),
            GiCommand::Verify => s.0.verify(&opts),
        };
        match result {
            Ok(r) => {
                *out = Box::into_raw(Box::new(GiReport(r)));
                GiStatus::Ok
            }
            Err(e) => scenario_error(e),
        }
    })
}

/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn gi_report_passed(r: *const GiReport) -> bool {
    r.as_ref().is_some_and(|r| r.0.passed)
}

/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn gi_report_integral_count(r: *const GiReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.integrals.len())
}

/// Value and (optionally) name of integral `i`.
///
/// # Safety
/// `r` must be a live report handle; `value` and `name` valid pointers or null.
#[no_mangle]
pub unsafe extern "C" fn gi_report_integral(
    r: *const GiReport,
    i: usize,
    value: *mut f64,
    name: *mut *mut c_char,
) -> GiStatus {
    let Some(r) = r.as_ref() else { return fail(GiStatus::NullPointer, "null report") };
    let Some(entry) = r.0.integrals.get(i) else {
        return fail(GiStatus::OutOfRange, &format!("integral {i} of {}", r.0.integrals.len()));
    };
    if !value.is_null() {
        *value = entry.value;
    }
    if !name.is_null() {
        *name = into_c_string(entry.name.clone());
    }
    GiStatus::Ok
}

/// Fixed-format text rendering; free with [`gi_string_free`].
///
/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn gi_report_text(r: *const GiReport) -> *mut c_char {
    r.as_ref().map_or(ptr::null_mut(), |r| into_c_string(r.0.render()))
}

/// JSON rendering; free with [`gi_string_free`].
///
/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn gi_report_json(r: *const GiReport) -> *mut c_char {
    r.as_ref()
        .map_or(ptr::null_mut(), |r| into_c_string(serde_json::to_string_pretty(&r.0).expect("report serialises")))
}

/// # Safety
/// `r` must come from [`gi_run`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gi_report_free(r: *mut GiReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `s` must be a string returned by this library or null.
#[no_mangle]
pub unsafe extern "C" fn gi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
