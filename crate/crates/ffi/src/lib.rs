//! C ABI over `terasim`.
//!
//! Objects are opaque heap handles created by `*_new`/`*_from_*` functions
//! and released with the matching `*_free`. Every fallible call returns a
//! [`TerasimStatus`]; on failure [`terasim_last_error`] describes the cause.
//! Handles are immutable once built and may be shared across threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use terasim::analysis::{coverage, laptop_link, CellResult, CoverageGrid, LinkMode};
use terasim::config::Scenario;
use terasim::propagation::fspl_db;
use terasim::Error;

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerasimStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Validation = 4,
    Simulation = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Link selection rule.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerasimMode {
    Los = 0,
    Nlos = 1,
}

impl From<TerasimMode> for LinkMode {
    fn from(m: TerasimMode) -> Self {
        match m {
            TerasimMode::Los => LinkMode::Los,
            TerasimMode::Nlos => LinkMode::Nlos,
        }
    }
}

/// Budget for one receiver position. `has_path` is 0 when nothing reaches
/// it, in which case `snr_db` is negative infinity and capacities are 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerasimCell {
    pub x_m: f64,
    pub y_m: f64,
    pub snr_db: f64,
    pub capacity_bps: f64,
    pub throughput_bps: f64,
    pub has_path: i32,
}

impl From<&CellResult> for TerasimCell {
    fn from(c: &CellResult) -> Self {
        TerasimCell {
            x_m: c.x_m,
            y_m: c.y_m,
            snr_db: c.snr_db,
            capacity_bps: c.capacity_bps,
            throughput_bps: c.throughput_bps,
            has_path: c.selected_surface.is_some() as i32,
        }
    }
}

/// Opaque scenario handle.
pub struct TerasimScenario(Scenario);

/// Opaque coverage-grid handle.
pub struct TerasimCoverage(CoverageGrid);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TerasimStatus {
    match e {
        Error::Io { .. } => TerasimStatus::Io,
        Error::NoPath => TerasimStatus::Simulation,
        _ => TerasimStatus::Validation,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), TerasimStatus>) -> TerasimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TerasimStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            TerasimStatus::Panic
        }
    }
}

fn fail(e: Error) -> TerasimStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> TerasimStatus {
    set_error(format!("{what} is null"));
    TerasimStatus::NullArgument
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, TerasimStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        TerasimStatus::InvalidUtf8
    })
}

/// Message describing the last failure on the calling thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn terasim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn terasim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads bundled preset `name` (`"ieee"` or `"thz"`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn terasim_scenario_from_preset(
    name: *const c_char,
    out: *mut *mut TerasimScenario,
) -> TerasimStatus {
    terasim_scenario_load(name, ptr::null(), out)
}

/// Loads preset `preset` with the scenario file `config_path` merged over it.
/// `config_path` may be null.
///
/// # Safety
/// String arguments must be NUL-terminated (or null where allowed) and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn terasim_scenario_load(
    preset: *const c_char,
    config_path: *const c_char,
    out: *mut *mut TerasimScenario,
) -> TerasimStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let preset = str_arg(preset, "preset")?;
        let config = if config_path.is_null() {
            None
        } else {
            Some(str_arg(config_path, "config_path")?)
        };
        let s = Scenario::load(preset, config.map(Path::new)).map_err(fail)?;
        *out = Box::into_raw(Box::new(TerasimScenario(s)));
        Ok(())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must come from a terasim constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn terasim_scenario_free(scenario: *mut TerasimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Plug-to-laptop budget.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn terasim_laptop_link(
    scenario: *const TerasimScenario,
    mode: TerasimMode,
    out: *mut TerasimCell,
) -> TerasimStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = laptop_link(&s.0, mode.into()).map_err(fail)?;
        *out = (&r).into();
        Ok(())
    })
}

/// SNR/capacity map with grid step `step_m` (the scenario default when
/// `step_m <= 0`).
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn terasim_coverage(
    scenario: *const TerasimScenario,
    mode: TerasimMode,
    step_m: f64,
    out: *mut *mut TerasimCoverage,
) -> TerasimStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let mut settings = s.0.coverage.clone();
        if step_m > 0.0 {
            settings.step_m = step_m;
        }
        let grid = coverage(&s.0, mode.into(), &settings).map_err(fail)?;
        *out = Box::into_raw(Box::new(TerasimCoverage(grid)));
        Ok(())
    })
}

/// Grid dimensions (cells along x and y).
///
/// # Safety
/// `grid` must be a live handle; `nx` and `ny` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn terasim_coverage_dims(
    grid: *const TerasimCoverage,
    nx: *mut usize,
    ny: *mut usize,
) -> TerasimStatus {
    guard(|| {
        let g = grid.as_ref().ok_or_else(|| null("grid"))?;
        if nx.is_null() || ny.is_null() {
            return Err(null("nx/ny"));
        }
        *nx = g.0.nx;
        *ny = g.0.ny;
        Ok(())
    })
}

/// Cell `(i, j)`, `i` along x.
///
/// # Safety
/// `grid` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn terasim_coverage_cell(
    grid: *const TerasimCoverage,
    i: usize,
    j: usize,
    out: *mut TerasimCell,
) -> TerasimStatus {
    guard(|| {
        let g = grid.as_ref().ok_or_else(|| null("grid"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if i >= g.0.nx || j >= g.0.ny {
            set_error(format!("cell ({i}, {j}) outside {} x {} grid", g.0.nx, g.0.ny));
            return Err(TerasimStatus::OutOfRange);
        }
        *out = g.0.cell(i, j).into();
        Ok(())
    })
}

/// Releases a coverage grid. Null is ignored.
///
/// # Safety
/// `grid` must come from [`terasim_coverage`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn terasim_coverage_free(grid: *mut TerasimCoverage) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Free-space spreading loss in dB.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn terasim_fspl_db(distance_m: f64, frequency_ghz: f64, out: *mut f64) -> TerasimStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = fspl_db(distance_m, frequency_ghz).map_err(fail)?;
        Ok(())
    })
}
