//! C ABI over `qprecond`.
//!
//! Every fallible call returns a [`QpStatus`]; on failure a message for the
//! calling thread is available from [`qp_last_error`]. Objects cross the
//! boundary as opaque handles created by `*_new`/`*_run` functions and
//! released with the matching `*_free`. Strings returned by the library are
//! owned by the caller and released with [`qp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qprecond::gradfree::GradFreeConfig;
use qprecond::harness::{self, BatteryConfig, BatteryReport, Format, HarnessError, Mode};
use qprecond::objectives::{self, Objective};
use qprecond::precond::{self, PrecondConfig, SeedBox};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NoCapture = 4,
    Runtime = 5,
    Io = 6,
    Panic = 7,
}

/// Optimizer mode of a report cell.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpMode {
    Hybrid = 0,
    Classical = 1,
}

/// Aggregates of one report cell. `median_bfgs_correct` is NaN when no
/// trial in the cell was correct.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpCellStats {
    pub mode: QpMode,
    pub dims: usize,
    pub budget: usize,
    pub trials: usize,
    pub n_correct: usize,
    pub median_bfgs_correct: f64,
}

/// Opaque benchmark objective.
pub struct QpObjective(Objective);

/// Opaque seed point and search box.
pub struct QpSeedBox(SeedBox);

/// Opaque battery configuration.
pub struct QpConfig(BatteryConfig);

/// Opaque battery report.
pub struct QpReport(BatteryReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(QpStatus, String);

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let code = match e {
            HarnessError::Config(_) => QpStatus::Config,
            HarnessError::NoSuccessfulCapture { .. } => QpStatus::NoCapture,
            HarnessError::Io { .. } => QpStatus::Io,
            _ => QpStatus::Runtime,
        };
        Failure(code, e.to_string())
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(QpStatus::InvalidArgument, message.into())
}

fn null(name: &str) -> Failure {
    Failure(QpStatus::NullPointer, format!("{name} is null"))
}

/// Runs `body`, records any failure for [`qp_last_error`] and converts
/// panics into [`QpStatus::Panic`].
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> QpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QpStatus::Ok
        }
        Ok(Err(Failure(code, message))) => {
            set_error(message);
            code
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {message}"));
            QpStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn as_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{name} is not valid UTF-8")))
}

unsafe fn as_slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_into(dst: *mut f64, len: usize, src: &[f64], name: &str) -> Result<(), Failure> {
    if dst.is_null() {
        return Ok(());
    }
    if len < src.len() {
        return Err(invalid(format!("{name} holds {len} values, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(QpStatus::Runtime, "string contains a NUL byte".into()))
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. The pointer stays valid until the next call into the
/// library on the same thread.
#[no_mangle]
pub extern "C" fn qp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a benchmark objective by name (`rastrigin`, `ackley`,
/// `himmelblau`) and dimension.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qp_objective_new(name: *const c_char, dims: usize, out: *mut *mut QpObjective) -> QpStatus {
    guard(|| {
        let name = as_str(name, "name")?;
        let obj = objectives::by_name(name, dims).map_err(|e| invalid(e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(QpObjective(obj))), "out")
    })
}

/// Releases an objective. NULL is ignored.
///
/// # Safety
/// `obj` must come from [`qp_objective_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qp_objective_free(obj: *mut QpObjective) {
    if !obj.is_null() {
        drop(Box::from_raw(obj));
    }
}

/// Dimension of the objective, 0 for NULL.
///
/// # Safety
/// `obj` must be NULL or a live objective handle.
#[no_mangle]
pub unsafe extern "C" fn qp_objective_dims(obj: *const QpObjective) -> usize {
    obj.as_ref().map_or(0, |o| o.0.dims())
}

/// Evaluates the objective at `x[0..len]`.
///
/// # Safety
/// `obj` must be a live handle, `x` must point to `len` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_objective_eval(obj: *const QpObjective, x: *const f64, len: usize, out: *mut f64) -> QpStatus {
    guard(|| {
        let obj = &as_ref(obj, "obj")?.0;
        let x = as_slice(x, len, "x")?;
        if x.len() != obj.dims() {
            return Err(invalid(format!("x holds {} values, objective has {} dimensions", x.len(), obj.dims())));
        }
        write_out(out, obj.eval(x), "out")
    })
}

/// Copies the search bounds into `lb` and `ub`, each holding `len` doubles.
/// Either output may be NULL.
///
/// # Safety
/// `obj` must be a live handle and non-NULL outputs must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qp_objective_bounds(obj: *const QpObjective, lb: *mut f64, ub: *mut f64, len: usize) -> QpStatus {
    guard(|| {
        let obj = &as_ref(obj, "obj")?.0;
        let (lo, hi): (Vec<f64>, Vec<f64>) = obj.bounds().iter().copied().unzip();
        copy_into(lb, len, &lo, "lb")?;
        copy_into(ub, len, &hi, "ub")
    })
}

/// Trains one register fragment per dimension and returns the seed point
/// with its search box. `qubits` is the register width per dimension and
/// `budget` the evaluation budget of each fragment; the remaining settings
/// take their defaults.
///
/// # Safety
/// `obj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qp_precondition(
    obj: *const QpObjective,
    qubits: usize,
    budget: usize,
    seed: u64,
    out: *mut *mut QpSeedBox,
) -> QpStatus {
    guard(|| {
        let obj = &as_ref(obj, "obj")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = PrecondConfig { k_qubits: qubits, gradfree: GradFreeConfig::with_budget(budget), ..Default::default() };
        let (sb, _) = precond::precondition(obj, &cfg, seed).map_err(|e| Failure(QpStatus::Runtime, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(QpSeedBox(sb))), "out")
    })
}

/// Releases a seed box. NULL is ignored.
///
/// # Safety
/// `sb` must come from [`qp_precondition`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qp_seedbox_free(sb: *mut QpSeedBox) {
    if !sb.is_null() {
        drop(Box::from_raw(sb));
    }
}

/// Dimension of the seed box, 0 for NULL.
///
/// # Safety
/// `sb` must be NULL or a live seed box handle.
#[no_mangle]
pub unsafe extern "C" fn qp_seedbox_dims(sb: *const QpSeedBox) -> usize {
    sb.as_ref().map_or(0, |s| s.0.x_seed.len())
}

/// Copies the seed point and box bounds, each into an array of `len`
/// doubles. Any output may be NULL.
///
/// # Safety
/// `sb` must be a live handle and non-NULL outputs must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qp_seedbox_get(
    sb: *const QpSeedBox,
    x_seed: *mut f64,
    lb: *mut f64,
    ub: *mut f64,
    len: usize,
) -> QpStatus {
    guard(|| {
        let sb = &as_ref(sb, "sb")?.0;
        copy_into(x_seed, len, &sb.x_seed, "x_seed")?;
        copy_into(lb, len, &sb.lb, "lb")?;
        copy_into(ub, len, &sb.ub, "ub")
    })
}

/// Creates a battery configuration with default settings.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qp_config_default(out: *mut *mut QpConfig) -> QpStatus {
    guard(|| write_out(out, Box::into_raw(Box::new(QpConfig(BatteryConfig::default()))), "out"))
}

/// Parses a battery configuration from TOML text and validates it.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qp_config_from_toml(toml: *const c_char, out: *mut *mut QpConfig) -> QpStatus {
    guard(|| {
        let cfg = BatteryConfig::from_toml_str(as_str(toml, "toml")?)?;
        cfg.validate()?;
        write_out(out, Box::into_raw(Box::new(QpConfig(cfg))), "out")
    })
}

/// Releases a configuration. NULL is ignored.
///
/// # Safety
/// `cfg` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qp_config_free(cfg: *mut QpConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs every trial of the configured battery.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qp_battery_run(cfg: *const QpConfig, out: *mut *mut QpReport) -> QpStatus {
    guard(|| {
        let cfg = &as_ref(cfg, "cfg")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = harness::run_battery(cfg)?;
        write_out(out, Box::into_raw(Box::new(QpReport(report))), "out")
    })
}

/// Releases a report. NULL is ignored.
///
/// # Safety
/// `report` must come from [`qp_battery_run`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qp_report_free(report: *mut QpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Number of cells in the report, 0 for NULL.
///
/// # Safety
/// `report` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn qp_report_cell_count(report: *const QpReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.cells.len())
}

/// Aggregates of cell `index`.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qp_report_cell(report: *const QpReport, index: usize, out: *mut QpCellStats) -> QpStatus {
    guard(|| {
        let report = &as_ref(report, "report")?.0;
        let cell = report
            .cells
            .get(index)
            .ok_or_else(|| invalid(format!("cell {index} out of range ({} cells)", report.cells.len())))?;
        let stats = QpCellStats {
            mode: match cell.mode {
                Mode::Hybrid => QpMode::Hybrid,
                Mode::Classical => QpMode::Classical,
            },
            dims: cell.dims,
            budget: cell.budget,
            trials: cell.trials,
            n_correct: cell.n_correct,
            median_bfgs_correct: cell.median_bfgs_correct().unwrap_or(f64::NAN),
        };
        write_out(out, stats, "out")
    })
}

/// Serializes the report to JSON. Release the string with
/// [`qp_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qp_report_to_json(report: *const QpReport, out: *mut *mut c_char) -> QpStatus {
    guard(|| {
        let report = &as_ref(report, "report")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, into_c_string(report.to_json()?)?, "out")
    })
}

/// Writes the report to `path` as `json` or `csv`, plus the box-plot file
/// next to it.
///
/// # Safety
/// `report` must be a live handle; `path` and `format` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn qp_report_write(report: *const QpReport, path: *const c_char, format: *const c_char) -> QpStatus {
    guard(|| {
        let report = &as_ref(report, "report")?.0;
        let path = as_str(path, "path")?;
        let format: Format = as_str(format, "format")?.parse()?;
        harness::emit_report(report, Path::new(path), format)?;
        Ok(())
    })
}
