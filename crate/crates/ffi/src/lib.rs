//! C ABI over the hydrovalue pipeline: opaque handles, integer status codes,
//! and a thread-local last-error message. The generated header lands in
//! `include/hydrovalue.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use hydrovalue::config::RunConfig;
use hydrovalue::error::Error;
use hydrovalue::mdp::HydroDims;
use hydrovalue::pipeline::Pipeline;
use hydrovalue::HOURS_PER_WEEK;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum HvStatus {
    Ok = 0,
    ValidationError = 1,
    SolverError = 2,
    CheckFailed = 3,
    NullArgument = 4,
    NotSolved = 5,
    Unsupported = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_of(err: &Error) -> HvStatus {
    match err.exit_code() {
        2 => HvStatus::SolverError,
        _ => HvStatus::ValidationError,
    }
}

/// Opaque pipeline handle.
pub struct HvPipeline {
    inner: Pipeline,
}

fn guard<F: FnOnce() -> HvStatus>(f: F) -> HvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            HvStatus::Panic
        }
    }
}

/// Returns the library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message into `buf` (truncating) and returns the
/// full message length in bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn hv_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // always NUL-terminate
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

/// Creates a pipeline from a TOML config file; NULL path uses the default
/// reference configuration. Returns NULL on error.
#[no_mangle]
pub unsafe extern "C" fn hv_pipeline_new(config_path: *const c_char) -> *mut HvPipeline {
    let result = catch_unwind(|| {
        let config = if config_path.is_null() {
            Ok(RunConfig::default())
        } else {
            match CStr::from_ptr(config_path).to_str() {
                Ok(s) => RunConfig::load(&PathBuf::from(s)),
                Err(_) => Err(Error::Validation("config path is not valid UTF-8".into())),
            }
        };
        match config.and_then(Pipeline::new) {
            Ok(inner) => Box::into_raw(Box::new(HvPipeline { inner })),
            Err(e) => {
                set_error(&e.to_string());
                std::ptr::null_mut()
            }
        }
    });
    result.unwrap_or(std::ptr::null_mut())
}

/// Frees a pipeline handle.
#[no_mangle]
pub unsafe extern "C" fn hv_pipeline_free(p: *mut HvPipeline) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

unsafe fn pipeline_mut<'a>(p: *mut HvPipeline) -> Option<&'a mut Pipeline> {
    p.as_mut().map(|h| &mut h.inner)
}

/// Fits the inflow model (quantiles, regime chain, histograms).
#[no_mangle]
pub unsafe extern "C" fn hv_pipeline_fit(p: *mut HvPipeline) -> HvStatus {
    guard(|| {
        let Some(pl) = pipeline_mut(p) else {
            set_error("null pipeline handle");
            return HvStatus::NullArgument;
        };
        match pl.fit() {
            Ok(_) => HvStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Builds the MDP and solves the primal/dual LP pair.
#[no_mangle]
pub unsafe extern "C" fn hv_pipeline_solve(p: *mut HvPipeline) -> HvStatus {
    guard(|| {
        let Some(pl) = pipeline_mut(p) else {
            set_error("null pipeline handle");
            return HvStatus::NullArgument;
        };
        match pl.solve() {
            Ok(_) => HvStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

unsafe fn solved<'a>(p: *mut HvPipeline) -> Result<(&'a Pipeline, HydroDims), HvStatus> {
    let Some(pl) = p.as_ref().map(|h| &h.inner) else {
        set_error("null pipeline handle");
        return Err(HvStatus::NullArgument);
    };
    if pl.solution.is_none() {
        set_error("pipeline not solved yet");
        return Err(HvStatus::NotSolved);
    }
    let dims = pl
        .model
        .as_ref()
        .and_then(|m| m.dims)
        .ok_or(HvStatus::NotSolved)?;
    Ok((pl, dims))
}

/// Model dimensions after solve: states, actions, LP variables, LP rows.
#[no_mangle]
pub unsafe extern "C" fn hv_pipeline_dimensions(
    p: *mut HvPipeline,
    n_states: *mut usize,
    n_actions: *mut usize,
    lp_variables: *mut usize,
    lp_rows: *mut usize,
) -> HvStatus {
    guard(|| match solved(p) {
        Ok((pl, _)) => {
            let report = &pl.solution.as_ref().unwrap().report;
            if let Some(v) = n_states.as_mut() {
                *v = report.n_states;
            }
            if let Some(v) = n_actions.as_mut() {
                *v = report.n_actions;
            }
            if let Some(v) = lp_variables.as_mut() {
                *v = report.lp_variables;
            }
            if let Some(v) = lp_rows.as_mut() {
                *v = report.lp_rows;
            }
            HvStatus::Ok
        }
        Err(s) => s,
    })
}

/// Expected system cost per week and annualized, plus the relative duality gap.
#[no_mangle]
pub unsafe extern "C" fn hv_pipeline_gain(
    p: *mut HvPipeline,
    u_weekly: *mut f64,
    u_annual: *mut f64,
    duality_gap_rel: *mut f64,
) -> HvStatus {
    guard(|| match solved(p) {
        Ok((pl, _)) => {
            let sol = pl.solution.as_ref().unwrap();
            if let Some(v) = u_weekly.as_mut() {
                *v = sol.policy.u_weekly;
            }
            if let Some(v) = u_annual.as_mut() {
                *v = sol.policy.u_annual;
            }
            if let Some(v) = duality_gap_rel.as_mut() {
                *v = sol.report.duality_gap_rel;
            }
            HvStatus::Ok
        }
        Err(s) => s,
    })
}

/// Policy release in MW at (week 1..52, regime 1..|R|, level 0..capacity).
/// Returns `Unsupported` when the state is off the optimal support.
#[no_mangle]
pub unsafe extern "C" fn hv_pipeline_release_mw(
    p: *mut HvPipeline,
    week: u32,
    regime: usize,
    level: usize,
    release_mw: *mut f64,
) -> HvStatus {
    guard(|| match solved(p) {
        Ok((pl, dims)) => {
            if !(1..=dims.weeks as u32).contains(&week)
                || !(1..=dims.n_regimes).contains(&regime)
                || level > dims.storage_blocks
            {
                set_error("state index out of range");
                return HvStatus::ValidationError;
            }
            let s = dims.state_index(level, regime, week);
            match pl.solution.as_ref().unwrap().policy.policy[s] {
                Some(a) => {
                    if let Some(v) = release_mw.as_mut() {
                        *v = a as f64 * dims.block_mw;
                    }
                    HvStatus::Ok
                }
                None => {
                    set_error("state is unsupported under the optimal policy");
                    HvStatus::Unsupported
                }
            }
        }
        Err(s) => s,
    })
}

/// Anchored state value v(s) in dollars.
#[no_mangle]
pub unsafe extern "C" fn hv_pipeline_value(
    p: *mut HvPipeline,
    week: u32,
    regime: usize,
    level: usize,
    value: *mut f64,
) -> HvStatus {
    guard(|| match solved(p) {
        Ok((pl, dims)) => {
            if !(1..=dims.weeks as u32).contains(&week)
                || !(1..=dims.n_regimes).contains(&regime)
                || level > dims.storage_blocks
            {
                set_error("state index out of range");
                return HvStatus::ValidationError;
            }
            let s = dims.state_index(level, regime, week);
            if let Some(v) = value.as_mut() {
                *v = pl.solution.as_ref().unwrap().values.v[s];
            }
            HvStatus::Ok
        }
        Err(s) => s,
    })
}

/// Marginal water value in $/MWh between `level` and `level`+1.
#[no_mangle]
pub unsafe extern "C" fn hv_pipeline_marginal_value(
    p: *mut HvPipeline,
    week: u32,
    regime: usize,
    level: usize,
    dollars_per_mwh: *mut f64,
) -> HvStatus {
    guard(|| match solved(p) {
        Ok((pl, dims)) => {
            if !(1..=dims.weeks as u32).contains(&week)
                || !(1..=dims.n_regimes).contains(&regime)
                || level >= dims.storage_blocks
            {
                set_error("state index out of range");
                return HvStatus::ValidationError;
            }
            let lo = dims.state_index(level, regime, week);
            let hi = dims.state_index(level + 1, regime, week);
            let v = &pl.solution.as_ref().unwrap().values.v;
            if let Some(out) = dollars_per_mwh.as_mut() {
                *out = (v[lo] - v[hi]) / (dims.block_mw * HOURS_PER_WEEK);
            }
            HvStatus::Ok
        }
        Err(s) => s,
    })
}

/// Simulates the solved policy; reports the mean weekly cost and its
/// standard error. Returns `CheckFailed` when the simulated mean is more
/// than three standard errors from the LP gain.
#[no_mangle]
pub unsafe extern "C" fn hv_pipeline_simulate(
    p: *mut HvPipeline,
    years: u32,
    seed: u64,
    mean_weekly_cost: *mut f64,
    std_error_weekly: *mut f64,
) -> HvStatus {
    guard(|| {
        let Some(pl) = pipeline_mut(p) else {
            set_error("null pipeline handle");
            return HvStatus::NullArgument;
        };
        match pl.simulate(Some(years), Some(seed)) {
            Ok(result) => {
                if let Some(v) = mean_weekly_cost.as_mut() {
                    *v = result.mean_weekly_cost;
                }
                if let Some(v) = std_error_weekly.as_mut() {
                    *v = result.std_error_weekly;
                }
                let u = pl.solution.as_ref().unwrap().policy.u_weekly;
                let gap = (result.mean_weekly_cost - u).abs();
                if gap <= 3.0 * result.std_error_weekly + 1e-9 * (1.0 + u.abs()) {
                    HvStatus::Ok
                } else {
                    set_error("simulated mean is outside 3 standard errors of the LP gain");
                    HvStatus::CheckFailed
                }
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Writes policy.csv, values.csv, and offer_curves.csv into `dir`.
#[no_mangle]
pub unsafe extern "C" fn hv_pipeline_export_csv(
    p: *mut HvPipeline,
    dir: *const c_char,
) -> HvStatus {
    guard(|| {
        if dir.is_null() {
            set_error("null directory");
            return HvStatus::NullArgument;
        }
        let Some(pl) = pipeline_mut(p) else {
            set_error("null pipeline handle");
            return HvStatus::NullArgument;
        };
        let Ok(dir) = CStr::from_ptr(dir).to_str() else {
            set_error("directory path is not valid UTF-8");
            return HvStatus::ValidationError;
        };
        match pl.export_solution_csvs(std::path::Path::new(dir)) {
            Ok(()) => HvStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

