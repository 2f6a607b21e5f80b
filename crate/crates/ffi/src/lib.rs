//! C ABI for `rru-core`.
//!
//! Objects cross the boundary as opaque handles created by `rru_*_new` /
//! `rru_*_parse` / `rru_*_run` and released with the matching `rru_*_free`.
//! Fallible calls return an [`RruStatus`] and write results through out
//! pointers; after a non-`RRU_OK` status, [`rru_last_error_message`] describes
//! the failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rru_core::analytics::normal_cdf;
use rru_core::config::ConfigError;
use rru_core::ensemble::EnsembleError;
use rru_core::output::{unix_now, write_outputs};
use rru_core::{astar, astar_bounds, run_ensemble, Dist, DistError, ExperimentConfig, ReinforcementSpec};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RruStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// A reinforcement law.
pub struct RruDist(Dist);

/// A parsed experiment config.
pub struct RruConfig(ExperimentConfig);

/// A simulated ensemble.
pub struct RruEnsemble(rru_core::Ensemble);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let text = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn fail(status: RruStatus, msg: impl std::fmt::Display) -> RruStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> RruStatus) -> RruStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == RruStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(RruStatus::Panic, "internal panic"),
    }
}

fn dist_status(e: DistError) -> RruStatus {
    fail(RruStatus::InvalidArgument, e)
}

fn config_status(e: ConfigError) -> RruStatus {
    match e {
        ConfigError::Io { .. } => fail(RruStatus::Io, e),
        _ => fail(RruStatus::Config, e),
    }
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, RruStatus> {
    if p.is_null() {
        return Err(fail(RruStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(RruStatus::InvalidArgument, e))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> RruStatus {
    if out.is_null() {
        return fail(RruStatus::NullPointer, "null out pointer");
    }
    *out = Box::into_raw(Box::new(value));
    RruStatus::Ok
}

unsafe fn new_dist(spec: ReinforcementSpec, out: *mut *mut RruDist) -> RruStatus {
    match Dist::new(spec) {
        Ok(d) => emit(out, RruDist(d)),
        Err(e) => dist_status(e),
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `rru_*` call on the same thread.
#[no_mangle]
pub extern "C" fn rru_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rru_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rru_dist_new_point_mass(
    value: f64,
    beta: f64,
    out: *mut *mut RruDist,
) -> RruStatus {
    guard(|| new_dist(ReinforcementSpec::point_mass(value, beta), out))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rru_dist_new_two_point(
    beta: f64,
    mean: f64,
    out: *mut *mut RruDist,
) -> RruStatus {
    guard(|| new_dist(ReinforcementSpec::two_point(beta, mean), out))
}

/// # Safety
/// `values` and `probs` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rru_dist_new_finite_discrete(
    values: *const f64,
    probs: *const f64,
    len: usize,
    beta: f64,
    out: *mut *mut RruDist,
) -> RruStatus {
    guard(|| {
        if len > 0 && (values.is_null() || probs.is_null()) {
            return fail(RruStatus::NullPointer, "null atom array");
        }
        let (v, p) = if len == 0 {
            (Vec::new(), Vec::new())
        } else {
            (
                std::slice::from_raw_parts(values, len).to_vec(),
                std::slice::from_raw_parts(probs, len).to_vec(),
            )
        };
        new_dist(ReinforcementSpec::finite_discrete(v, p, beta), out)
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rru_dist_new_uniform(
    lo: f64,
    hi: f64,
    beta: f64,
    out: *mut *mut RruDist,
) -> RruStatus {
    guard(|| new_dist(ReinforcementSpec::uniform_interval(lo, hi, beta), out))
}

/// Parses a law written as `kind=two_point beta=4 mean=1`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rru_dist_parse(text: *const c_char, out: *mut *mut RruDist) -> RruStatus {
    guard(|| {
        let text = match c_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match text.parse::<ReinforcementSpec>() {
            Ok(spec) => new_dist(spec, out),
            Err(e) => dist_status(e),
        }
    })
}

/// # Safety
/// `dist` must come from an `rru_dist_*` constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rru_dist_free(dist: *mut RruDist) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Quantile at `u` in `[0, 1]`.
///
/// # Safety
/// `dist` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rru_dist_quantile(
    dist: *const RruDist,
    u: f64,
    out: *mut f64,
) -> RruStatus {
    guard(|| {
        if dist.is_null() || out.is_null() {
            return fail(RruStatus::NullPointer, "null argument");
        }
        match (*dist).0.quantile(u) {
            Ok(q) => {
                *out = q;
                RruStatus::Ok
            }
            Err(e) => dist_status(e),
        }
    })
}

/// Mean, second moment and variance. Any out pointer may be null.
///
/// # Safety
/// `dist` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rru_dist_moments(
    dist: *const RruDist,
    mean: *mut f64,
    second_moment: *mut f64,
    variance: *mut f64,
) -> RruStatus {
    guard(|| {
        if dist.is_null() {
            return fail(RruStatus::NullPointer, "null dist");
        }
        let m = (*dist).0.moments();
        for (p, v) in [(mean, m.mean), (second_moment, m.second_moment), (variance, m.variance)] {
            if !p.is_null() {
                *p = v;
            }
        }
        RruStatus::Ok
    })
}

/// `E[R / (R + d)]` for `d > 0`.
///
/// # Safety
/// `dist` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rru_dist_expect_fraction(
    dist: *const RruDist,
    d: f64,
    out: *mut f64,
) -> RruStatus {
    guard(|| {
        if dist.is_null() || out.is_null() {
            return fail(RruStatus::NullPointer, "null argument");
        }
        match (*dist).0.expect_fraction(d) {
            Ok(v) => {
                *out = v;
                RruStatus::Ok
            }
            Err(e) => dist_status(e),
        }
    })
}

/// Normalized compensator increment at urn size `d`.
///
/// # Safety
/// `mu`, `nu` must be live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rru_astar(
    mu: *const RruDist,
    nu: *const RruDist,
    d: f64,
    out: *mut f64,
) -> RruStatus {
    guard(|| {
        if mu.is_null() || nu.is_null() || out.is_null() {
            return fail(RruStatus::NullPointer, "null argument");
        }
        match astar(&(*mu).0, &(*nu).0, d) {
            Ok(v) => {
                *out = v;
                RruStatus::Ok
            }
            Err(e) => dist_status(e),
        }
    })
}

/// Lower and upper bounds on `rru_astar`.
///
/// # Safety
/// `mu`, `nu` must be live handles; `lo`, `hi` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rru_astar_bounds(
    mu: *const RruDist,
    nu: *const RruDist,
    d: f64,
    lo: *mut f64,
    hi: *mut f64,
) -> RruStatus {
    guard(|| {
        if mu.is_null() || nu.is_null() || lo.is_null() || hi.is_null() {
            return fail(RruStatus::NullPointer, "null argument");
        }
        match astar_bounds(&(*mu).0, &(*nu).0, d) {
            Ok(b) => {
                *lo = b.lo;
                *hi = b.hi;
                RruStatus::Ok
            }
            Err(e) => dist_status(e),
        }
    })
}

/// Standard normal CDF.
#[no_mangle]
pub extern "C" fn rru_normal_cdf(x: f64) -> f64 {
    normal_cdf(x)
}

/// Parses config text in the `key=value` format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rru_config_parse(
    text: *const c_char,
    out: *mut *mut RruConfig,
) -> RruStatus {
    guard(|| {
        let text = match c_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match text.parse::<ExperimentConfig>().and_then(|c| c.validate().map(|_| c)) {
            Ok(cfg) => emit(out, RruConfig(cfg)),
            Err(e) => config_status(e),
        }
    })
}

/// Reads and parses a config file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rru_config_load(
    path: *const c_char,
    out: *mut *mut RruConfig,
) -> RruStatus {
    guard(|| {
        let path = match c_str(path) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ExperimentConfig::from_file(Path::new(path)).and_then(|c| c.validate().map(|_| c)) {
            Ok(cfg) => emit(out, RruConfig(cfg)),
            Err(e) => config_status(e),
        }
    })
}

/// Replaces the config's master seed.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rru_config_set_seed(cfg: *mut RruConfig, seed: u64) -> RruStatus {
    guard(|| {
        if cfg.is_null() {
            return fail(RruStatus::NullPointer, "null config");
        }
        (*cfg).0.master_seed = seed;
        RruStatus::Ok
    })
}

/// # Safety
/// `cfg` must come from `rru_config_parse`/`rru_config_load` and not have
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn rru_config_free(cfg: *mut RruConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Simulates the ensemble on `workers` threads (0 means all cores).
///
/// # Safety
/// `cfg` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rru_ensemble_run(
    cfg: *const RruConfig,
    workers: usize,
    out: *mut *mut RruEnsemble,
) -> RruStatus {
    guard(|| {
        if cfg.is_null() {
            return fail(RruStatus::NullPointer, "null config");
        }
        let workers = if workers == 0 {
            rru_core::ensemble::default_workers()
        } else {
            workers
        };
        match run_ensemble(&(*cfg).0, workers) {
            Ok(ens) => emit(out, RruEnsemble(ens)),
            Err(EnsembleError::Config(e)) => config_status(e),
            Err(e) => fail(RruStatus::Config, e),
        }
    })
}

/// # Safety
/// `ens` must come from `rru_ensemble_run` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rru_ensemble_free(ens: *mut RruEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Number of paths, or 0 for a null handle.
///
/// # Safety
/// `ens` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rru_ensemble_num_paths(ens: *const RruEnsemble) -> u64 {
    if ens.is_null() {
        0
    } else {
        (*ens).0.summary.num_paths
    }
}

/// Copies `Z_N` of every path into `buf`. `*written` receives the number of
/// paths; if `len` is smaller, nothing is copied and `RRU_BUFFER_TOO_SMALL`
/// is returned.
///
/// # Safety
/// `ens` must be a live handle, `buf` must hold `len` doubles and `written`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn rru_ensemble_final_z(
    ens: *const RruEnsemble,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> RruStatus {
    guard(|| {
        if ens.is_null() || written.is_null() {
            return fail(RruStatus::NullPointer, "null argument");
        }
        let z = &(*ens).0.summary.final_z;
        *written = z.len();
        if len < z.len() {
            return fail(RruStatus::BufferTooSmall, format!("need {} doubles", z.len()));
        }
        if !z.is_empty() {
            if buf.is_null() {
                return fail(RruStatus::NullPointer, "null buffer");
            }
            ptr::copy_nonoverlapping(z.as_ptr(), buf, z.len());
        }
        RruStatus::Ok
    })
}

/// The ensemble summary as JSON; release with `rru_string_free`.
///
/// # Safety
/// `ens` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rru_ensemble_summary_json(
    ens: *const RruEnsemble,
    out: *mut *mut c_char,
) -> RruStatus {
    guard(|| {
        if ens.is_null() || out.is_null() {
            return fail(RruStatus::NullPointer, "null argument");
        }
        let json = match serde_json::to_string(&(*ens).0.summary) {
            Ok(j) => j,
            Err(e) => return fail(RruStatus::Io, e),
        };
        match CString::new(json) {
            Ok(s) => {
                *out = s.into_raw();
                RruStatus::Ok
            }
            Err(e) => fail(RruStatus::Io, e),
        }
    })
}

/// Writes `paths.csv`, `summary.json` and `manifest.json` into `dir`.
///
/// # Safety
/// `ens` must be a live handle; `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rru_ensemble_write_outputs(
    ens: *const RruEnsemble,
    dir: *const c_char,
) -> RruStatus {
    guard(|| {
        if ens.is_null() {
            return fail(RruStatus::NullPointer, "null ensemble");
        }
        let dir = match c_str(dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match write_outputs(Path::new(dir), &(*ens).0, 1, unix_now()) {
            Ok(_) => RruStatus::Ok,
            Err(e) => fail(RruStatus::Io, e),
        }
    })
}
