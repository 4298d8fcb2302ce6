//! C ABI over `spde2d`.
//!
//! Every fallible function returns an [`Spde2dStatus`]; on failure the
//! message is kept per thread and read with [`spde2d_last_error`]. Configs
//! and fields are opaque handles released with their `_free` function.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use spde2d::coeff::{fit_coeff, increment_stats};
use spde2d::conditions::check_conditions;
use spde2d::config::ExperimentConfig;
use spde2d::field_io::{load_binary, save_binary};
use spde2d::harness::{run_mc, Experiment};
use spde2d::ou::fit_ou;
use spde2d::reaction::{approx_coordinate_path, estimate_reaction};
use spde2d::sim::{simulate_field, FieldData};
use spde2d::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spde2dStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Config = 3,
    MisalignedThinning = 4,
    DimensionMismatch = 5,
    Quadrature = 6,
    CutoffTooSmall = 7,
    Degenerate = 8,
    Io = 9,
    Format = 10,
    Panic = 11,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend_from_slice(msg.as_bytes());
    });
}

fn status_of(e: &Error) -> Spde2dStatus {
    match e {
        Error::InvalidParameter(_) => Spde2dStatus::InvalidParameter,
        Error::DimensionMismatch(_) => Spde2dStatus::DimensionMismatch,
        Error::MisalignedThinning { .. } => Spde2dStatus::MisalignedThinning,
        Error::Quadrature { .. } => Spde2dStatus::Quadrature,
        Error::CutoffTooSmall(_) => Spde2dStatus::CutoffTooSmall,
        Error::Degenerate(_) => Spde2dStatus::Degenerate,
        Error::Config(_) => Spde2dStatus::Config,
        Error::Format(_) | Error::Csv(_) => Spde2dStatus::Format,
        Error::Io(_) => Spde2dStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> Spde2dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            Spde2dStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            Spde2dStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            Spde2dStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Core(Error::InvalidParameter(format!("{what} is not UTF-8"))))
}

/// Opaque experiment configuration.
pub struct Spde2dConfig(ExperimentConfig);

/// Opaque simulated or loaded field.
pub struct Spde2dField(FieldData);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct Spde2dCoeffEstimate {
    pub kappa_hat: f64,
    pub eta_hat: f64,
    pub theta2_hat: f64,
    pub theta1_hat: f64,
    pub eta1_hat: f64,
    pub contrast: f64,
    pub bound_hit: bool,
    pub budget_exhausted: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct Spde2dReactionEstimate {
    pub lambda_hat: f64,
    /// NaN in the known-`mu0` variant.
    pub mu_hat: f64,
    pub theta0_hat: f64,
    /// NaN in the known-`mu0` variant.
    pub mu0_hat: f64,
    pub lambda_sd: f64,
    pub mu_sd: f64,
    pub bound_hit: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct Spde2dOuFit {
    pub lambda_hat: f64,
    pub mu_hat: f64,
    pub contrast: f64,
    pub bound_hit: bool,
}

/// Means, sample sds and counts in the order theta1, eta1, theta2, theta0, mu0.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct Spde2dSummary {
    pub mean: [f64; 5],
    pub sd: [f64; 5],
    pub count: [usize; 5],
    pub replications: usize,
    pub failed: usize,
    pub flagged: usize,
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn spde2d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_phi(r: f64, alpha: f64, theta2: f64, out_value: *mut f64) -> Spde2dStatus {
    guard(|| {
        let o = out(out_value, "out_value")?;
        *o = spde2d::phi::phi(r, alpha, theta2)?;
        Ok(())
    })
}

/// # Safety
/// `text` must be a NUL-terminated string and `out_config` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_config_from_text(text: *const c_char, out_config: *mut *mut Spde2dConfig) -> Spde2dStatus {
    guard(|| {
        let o = out(out_config, "out_config")?;
        *o = ptr::null_mut();
        let config = ExperimentConfig::from_text(string(text, "text")?)?;
        *o = Box::into_raw(Box::new(Spde2dConfig(config)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out_config` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_config_from_file(path: *const c_char, out_config: *mut *mut Spde2dConfig) -> Spde2dStatus {
    guard(|| {
        let o = out(out_config, "out_config")?;
        *o = ptr::null_mut();
        let config = ExperimentConfig::from_file(Path::new(string(path, "path")?))?;
        *o = Box::into_raw(Box::new(Spde2dConfig(config)));
        Ok(())
    })
}

/// # Safety
/// `config` must be null or come from a `spde2d_config_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn spde2d_config_free(config: *mut Spde2dConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Simulates one field with the config's seed replaced by `seed`.
///
/// # Safety
/// `config` must be a live handle and `out_field` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_field_simulate(
    config: *const Spde2dConfig,
    seed: u64,
    out_field: *mut *mut Spde2dField,
) -> Spde2dStatus {
    guard(|| {
        let o = out(out_field, "out_field")?;
        *o = ptr::null_mut();
        let c = &deref(config, "config")?.0;
        let experiment = Experiment::new(c.clone())?;
        let field = simulate_field(
            &c.params,
            &c.noise,
            &c.spectrum,
            c.truncation,
            c.time_grid,
            c.grid,
            experiment.tail.as_ref(),
            seed,
        )?;
        *o = Box::into_raw(Box::new(Spde2dField(field)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out_field` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_field_load(path: *const c_char, out_field: *mut *mut Spde2dField) -> Spde2dStatus {
    guard(|| {
        let o = out(out_field, "out_field")?;
        *o = ptr::null_mut();
        let field = load_binary(Path::new(string(path, "path")?))?;
        *o = Box::into_raw(Box::new(Spde2dField(field)));
        Ok(())
    })
}

/// # Safety
/// `field` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn spde2d_field_save(field: *const Spde2dField, path: *const c_char) -> Spde2dStatus {
    guard(|| {
        save_binary(&deref(field, "field")?.0, Path::new(string(path, "path")?))?;
        Ok(())
    })
}

/// Writes `N`, `M1`, `M2`; the data holds `(N+1)(M1+1)(M2+1)` values.
///
/// # Safety
/// `field` must be a live handle; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_field_dims(
    field: *const Spde2dField,
    n: *mut usize,
    m1: *mut usize,
    m2: *mut usize,
) -> Spde2dStatus {
    guard(|| {
        let f = &deref(field, "field")?.0;
        *out(n, "n")? = f.time_grid.n;
        *out(m1, "m1")? = f.grid.m1;
        *out(m2, "m2")? = f.grid.m2;
        Ok(())
    })
}

/// Borrowed pointer to the values in `[t][y][z]` row-major order, valid
/// until the field is freed. Null for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spde2d_field_data(field: *const Spde2dField) -> *const f64 {
    match field.as_ref() {
        Some(f) => f.0.data.as_ptr(),
        None => ptr::null(),
    }
}

/// # Safety
/// `field` must be null or come from a `spde2d_field_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn spde2d_field_free(field: *mut Spde2dField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

fn coeff_for(c: &ExperimentConfig, f: &FieldData) -> Result<spde2d::coeff::CoeffEstimate, Error> {
    let spatial = c.spatial_thinning()?;
    let stats = increment_stats(f, &spatial, c.noise.alpha, c.noise.epsilon)?;
    fit_coeff(&stats, &spatial, c.xi)
}

/// # Safety
/// Handles must be live; `out_estimate` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_fit_coeff(
    config: *const Spde2dConfig,
    field: *const Spde2dField,
    out_estimate: *mut Spde2dCoeffEstimate,
) -> Spde2dStatus {
    guard(|| {
        let o = out(out_estimate, "out_estimate")?;
        let e = coeff_for(&deref(config, "config")?.0, &deref(field, "field")?.0)?;
        *o = Spde2dCoeffEstimate {
            kappa_hat: e.kappa_hat,
            eta_hat: e.eta_hat,
            theta2_hat: e.theta2_hat,
            theta1_hat: e.theta1_hat,
            eta1_hat: e.eta1_hat,
            contrast: e.contrast,
            bound_hit: e.any_bound_hit(),
            budget_exhausted: e.budget_exhausted,
        };
        Ok(())
    })
}

/// Coefficient fit followed by the reaction fit on the configured mode.
///
/// # Safety
/// Handles must be live; `out_estimate` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_fit_reaction(
    config: *const Spde2dConfig,
    field: *const Spde2dField,
    out_estimate: *mut Spde2dReactionEstimate,
) -> Spde2dStatus {
    guard(|| {
        let o = out(out_estimate, "out_estimate")?;
        let c = &deref(config, "config")?.0;
        let f = &deref(field, "field")?.0;
        let coeff = coeff_for(c, f)?;
        let path = approx_coordinate_path(f, c.mode, coeff.kappa_hat, coeff.eta_hat, c.temporal_thinning()?)?;
        let mu0_known = c.mu0_known.then_some(c.noise.mu0);
        let r = estimate_reaction(&path, &coeff, &c.noise, mu0_known, c.lambda_box, c.mu_box, c.spectrum.get(c.mode))?;
        *o = Spde2dReactionEstimate {
            lambda_hat: r.lambda_hat,
            mu_hat: r.mu_hat.unwrap_or(f64::NAN),
            theta0_hat: r.theta0_hat,
            mu0_hat: r.mu0_hat.unwrap_or(f64::NAN),
            lambda_sd: r.lambda_sd,
            mu_sd: r.mu_sd.unwrap_or(f64::NAN),
            bound_hit: r.lambda_at_bound || r.mu_at_bound,
        };
        Ok(())
    })
}

/// Fits an OU path sampled at step `h`. Pass NaN as `mu_known` to estimate `mu`.
///
/// # Safety
/// `values` must be valid for `len` reads; `out_fit` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_fit_ou(
    values: *const f64,
    len: usize,
    epsilon: f64,
    alpha: f64,
    h: f64,
    mu_known: f64,
    out_fit: *mut Spde2dOuFit,
) -> Spde2dStatus {
    guard(|| {
        let o = out(out_fit, "out_fit")?;
        if values.is_null() {
            return Err(Failure::Null("values"));
        }
        let values = std::slice::from_raw_parts(values, len);
        let mu = (!mu_known.is_nan()).then_some(mu_known);
        let fit = fit_ou(values, epsilon, alpha, h, mu, spde2d::ou::DEFAULT_LAMBDA_BOX, spde2d::ou::DEFAULT_MU_BOX)?;
        *o = Spde2dOuFit {
            lambda_hat: fit.lambda_hat,
            mu_hat: fit.mu_hat.unwrap_or(f64::NAN),
            contrast: fit.contrast,
            bound_hit: fit.lambda_at_bound || fit.mu_at_bound,
        };
        Ok(())
    })
}

/// Runs the configured replications on `threads` workers. CSV artifacts are
/// written when `out_dir` is not null.
///
/// # Safety
/// `config` must be live, `out_dir` null or NUL-terminated, `out_summary`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_run_mc(
    config: *const Spde2dConfig,
    threads: usize,
    out_dir: *const c_char,
    out_summary: *mut Spde2dSummary,
) -> Spde2dStatus {
    guard(|| {
        let o = out(out_summary, "out_summary")?;
        let c = &deref(config, "config")?.0;
        let dir = if out_dir.is_null() { None } else { Some(Path::new(string(out_dir, "out_dir")?)) };
        let run = run_mc(c, threads, dir)?;
        let s = &run.summary;
        let mut summary = Spde2dSummary { replications: s.replications, failed: s.failed, flagged: s.flagged, ..Default::default() };
        for (i, e) in s.estimators.iter().enumerate().take(5) {
            summary.mean[i] = e.all.mean;
            summary.sd[i] = e.all.sd;
            summary.count[i] = e.all.count;
        }
        *o = summary;
        Ok(())
    })
}

/// Value of one condition entry by name, e.g. `"C3.1"` or `"B2"`.
///
/// # Safety
/// `config` must be live, `name` NUL-terminated, `out_value` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn spde2d_condition_value(
    config: *const Spde2dConfig,
    name: *const c_char,
    out_value: *mut f64,
) -> Spde2dStatus {
    guard(|| {
        let o = out(out_value, "out_value")?;
        let name = string(name, "name")?;
        let report = check_conditions(&deref(config, "config")?.0);
        *o = report
            .get(name)
            .ok_or_else(|| Failure::Core(Error::InvalidParameter(format!("unknown condition {name}"))))?;
        Ok(())
    })
}
