//! C ABI over the experiment runner.
//!
//! Every function returns one of the `RV_*` codes. On failure the message
//! is kept per thread and can be fetched with `rv_last_error`. Handles are
//! opaque and must be released with their `_free` function.

use rvlab::config::{parse_config, Parsed};
use rvlab::flows::SpacetimeSolution;
use rvlab::lgeo::PathField;
use rvlab::runner;
use rvlab::{Error, Mode, TimeOrientation};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

pub const RV_OK: i32 = 0;
pub const RV_ERR_NULL: i32 = 1;
pub const RV_ERR_CONFIG: i32 = 2;
pub const RV_ERR_SINGULARITY: i32 = 3;
pub const RV_ERR_NUMERIC: i32 = 4;
pub const RV_ERR_IO: i32 = 5;
pub const RV_ERR_PANIC: i32 = 6;

pub const RV_FORWARDS: i32 = 0;
pub const RV_BACKWARDS: i32 = 1;

/// Parsed experiment config.
pub struct RvConfig {
    parsed: Parsed,
}

/// Evolved flow with its interpolant.
pub struct RvSolution {
    solution: SpacetimeSolution,
    field: PathField,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Io(_) => RV_ERR_IO,
        _ => match runner::error_exit_code(e) {
            runner::EXIT_CONFIG => RV_ERR_CONFIG,
            runner::EXIT_SINGULARITY => RV_ERR_SINGULARITY,
            _ => RV_ERR_NUMERIC,
        },
    }
}

fn guard(f: impl FnOnce() -> Result<(), (i32, String)>) -> i32 {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RV_OK,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            RV_ERR_PANIC
        }
    }
}

fn lift<T>(r: rvlab::Result<T>) -> Result<T, (i32, String)> {
    r.map_err(|e| (code_of(&e), e.to_string()))
}

fn null(what: &str) -> (i32, String) {
    (RV_ERR_NULL, format!("null {what}"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (i32, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (RV_ERR_CONFIG, format!("{what} is not UTF-8")))
}

fn orientation(cfg: &RvConfig, mode: i32) -> Result<TimeOrientation, (i32, String)> {
    let want = match mode {
        RV_FORWARDS => Mode::Forwards,
        RV_BACKWARDS => Mode::Backwards,
        _ => return Err((RV_ERR_CONFIG, format!("unknown mode {mode}"))),
    };
    let c = &cfg.parsed.config;
    Ok(match want {
        Mode::Forwards => TimeOrientation::forwards(c.reduced.forwards_origin.unwrap_or(c.run.t_start)),
        Mode::Backwards => TimeOrientation::backwards(c.reduced.backwards_origin.unwrap_or(c.run.t_end)),
    })
}

/// Parse a TOML config. On success `*out` owns a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rv_config_parse(text: *const c_char, out: *mut *mut RvConfig) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = c_str(text, "text")?;
        let parsed = lift(parse_config(t))?;
        *out = Box::into_raw(Box::new(RvConfig { parsed }));
        Ok(())
    })
}

/// Number of warnings recorded while parsing.
///
/// # Safety
/// `cfg` must be a handle from `rv_config_parse` or null.
#[no_mangle]
pub unsafe extern "C" fn rv_config_warning_count(cfg: *const RvConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.parsed.warnings.len())
}

/// # Safety
/// `cfg` must come from `rv_config_parse` (or be null) and not be used after.
#[no_mangle]
pub unsafe extern "C" fn rv_config_free(cfg: *mut RvConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Evolve the flow of a config.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rv_evolve(cfg: *const RvConfig, out: *mut *mut RvSolution) -> i32 {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let solution = lift(runner::evolve_config(&cfg.parsed.config))?;
        let field = lift(PathField::new(&solution))?;
        *out = Box::into_raw(Box::new(RvSolution { solution, field }));
        Ok(())
    })
}

/// Number of stored snapshots.
///
/// # Safety
/// `sol` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn rv_solution_snapshots(sol: *const RvSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.solution.snapshots.len())
}

/// # Safety
/// `sol` must come from `rv_evolve` (or be null) and not be used after.
#[no_mangle]
pub unsafe extern "C" fn rv_solution_free(sol: *mut RvSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Reduced volume at orientation time `s` from the config's base point.
/// `error` may be null.
///
/// # Safety
/// Handles must be live; `volume` must be valid, `error` valid or null.
#[no_mangle]
pub unsafe extern "C" fn rv_reduced_volume(
    cfg: *const RvConfig,
    sol: *const RvSolution,
    mode: i32,
    s: f64,
    volume: *mut f64,
    error: *mut f64,
) -> i32 {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("config"))?;
        let sol = sol.as_ref().ok_or_else(|| null("solution"))?;
        if volume.is_null() {
            return Err(null("volume"));
        }
        let orient = orientation(cfg, mode)?;
        let (v, e) = lift(runner::reduced_volume_at(&cfg.parsed.config, &sol.field, orient, s))?;
        *volume = v;
        if !error.is_null() {
            *error = e;
        }
        Ok(())
    })
}

/// Minimizing L-geodesic from `from` to `to` (each `dim` values) ending at
/// flow time `t1`. Writes the L-length, reduced distance and residual.
///
/// # Safety
/// Handles must be live; `from`/`to` must hold `dim` values; outputs valid.
#[no_mangle]
pub unsafe extern "C" fn rv_geodesic(
    cfg: *const RvConfig,
    sol: *const RvSolution,
    mode: i32,
    from: *const f64,
    to: *const f64,
    dim: usize,
    t1: f64,
    action: *mut f64,
    reduced_distance: *mut f64,
    residual: *mut f64,
) -> i32 {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("config"))?;
        let sol = sol.as_ref().ok_or_else(|| null("solution"))?;
        if from.is_null() || to.is_null() {
            return Err(null("point"));
        }
        if action.is_null() || reduced_distance.is_null() || residual.is_null() {
            return Err(null("output"));
        }
        let p = std::slice::from_raw_parts(from, dim);
        let q = std::slice::from_raw_parts(to, dim);
        let orient = orientation(cfg, mode)?;
        let g = lift(runner::geodesic_on(&cfg.parsed.config, &sol.field, orient, p, q, t1))?;
        *action = g.result.best.action;
        *reduced_distance = g.reduced_distance;
        *residual = g.result.best.residual;
        Ok(())
    })
}

/// Full experiment. Artifacts go to `out_dir` (the config's directory when
/// null); `*exit_code` receives the run's exit status.
///
/// # Safety
/// `cfg` must be live, `out_dir` null or NUL-terminated, `exit_code` valid.
#[no_mangle]
pub unsafe extern "C" fn rv_run_experiment(cfg: *const RvConfig, out_dir: *const c_char, exit_code: *mut i32) -> i32 {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("config"))?;
        if exit_code.is_null() {
            return Err(null("exit_code"));
        }
        let dir = if out_dir.is_null() { cfg.parsed.config.outputs.directory.clone() } else { c_str(out_dir, "out_dir")?.to_string() };
        let out = lift(runner::run_experiment(&cfg.parsed.config, cfg.parsed.warnings.clone()))?;
        lift(out.write(Path::new(&dir)))?;
        *exit_code = out.exit_code(false);
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Free with
/// `rv_string_free`.
#[no_mangle]
pub extern "C" fn rv_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        Some(m) => CString::new(m.replace('\0', " ")).map_or(std::ptr::null_mut(), CString::into_raw),
        None => std::ptr::null_mut(),
    })
}

/// # Safety
/// `s` must come from this library (or be null).
#[no_mangle]
pub unsafe extern "C" fn rv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
