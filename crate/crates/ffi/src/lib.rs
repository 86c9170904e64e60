//! C ABI over `ghz-stab`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every fallible call returns a [`GhzStatus`]; on failure
//! [`ghz_last_error_message`] describes the error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ghz_stab::analysis::{bures_to_ghz, lyapunov, rate_bounds};
use ghz_stab::config::{RawConfig, ScenarioConfig};
use ghz_stab::ensemble::{emit_csv, run_scenario, EnsembleResult};
use ghz_stab::qmat::{ComplexMatrix, C64};
use ghz_stab::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GhzStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad configuration, parameter or argument.
    InvalidInput = 2,
    /// The integrator or a decomposition failed.
    Numerical = 3,
    Io = 4,
    /// A buffer is too small; the needed length was written where documented.
    BufferTooSmall = 5,
    Panic = 6,
}

/// A scenario configuration with any overrides applied.
pub struct GhzScenario {
    raw: RawConfig,
    cfg: ScenarioConfig,
}

/// The outcome of an ensemble run.
pub struct GhzEnsemble {
    result: EnsembleResult,
}

/// Decay rates for the scenario's target; absent values are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhzRates {
    pub c_bar_z: f64,
    pub c_bar_x: f64,
    pub c_bar: f64,
    pub c_bar_plus: f64,
    pub c_bar_minus: f64,
    pub ell: f64,
    pub c_plus: f64,
    pub c_minus: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GhzStatus {
    match e {
        Error::Io(_) => GhzStatus::Io,
        e if e.is_numerical() => GhzStatus::Numerical,
        _ => GhzStatus::InvalidInput,
    }
}

fn fail(status: GhzStatus, message: impl Into<String>) -> GhzStatus {
    set_error(message.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), GhzStatus>) -> GhzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GhzStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(GhzStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: ghz_stab::Result<T>) -> Result<T, GhzStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, GhzStatus> {
    if p.is_null() {
        return Err(fail(GhzStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GhzStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, GhzStatus> {
    p.as_mut().ok_or_else(|| fail(GhzStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, GhzStatus> {
    p.as_ref().ok_or_else(|| fail(GhzStatus::NullPointer, format!("{what} is null")))
}

fn scenario_from(raw: RawConfig) -> Result<Box<GhzScenario>, GhzStatus> {
    let cfg = lift(ScenarioConfig::from_raw(&raw))?;
    Ok(Box::new(GhzScenario { raw, cfg }))
}

/// Message of the last failed call on this thread, or null. Release with
/// [`ghz_string_free`].
#[no_mangle]
pub extern "C" fn ghz_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ghz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads `scenario_a` or `scenario_b`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_scenario_builtin(name: *const c_char, out: *mut *mut GhzScenario) -> GhzStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let name = text(name, "name")?;
        let raw = lift(ScenarioConfig::builtin_text(name).and_then(RawConfig::parse))?;
        *out = Box::into_raw(scenario_from(raw)?);
        Ok(())
    })
}

/// Parses a scenario from configuration text.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_scenario_parse(config: *const c_char, out: *mut *mut GhzScenario) -> GhzStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let raw = lift(RawConfig::parse(text(config, "config")?))?;
        *out = Box::into_raw(scenario_from(raw)?);
        Ok(())
    })
}

/// Sets one configuration key. The scenario is unchanged if the result is invalid.
///
/// # Safety
/// `scenario` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ghz_scenario_set(
    scenario: *mut GhzScenario,
    key: *const c_char,
    value: *const c_char,
) -> GhzStatus {
    guard(|| {
        let s = out_ptr(scenario, "scenario")?;
        let key = text(key, "key")?;
        let value = text(value, "value")?;
        let mut raw = s.raw.clone();
        raw.set(key, value);
        *s = *scenario_from(raw)?;
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ghz_scenario_free(scenario: *mut GhzScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Hilbert-space dimension `2^n`.
///
/// # Safety
/// `scenario` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn ghz_scenario_dim(scenario: *const GhzScenario) -> usize {
    scenario.as_ref().map_or(0, |s| 1usize << s.cfg.qubits)
}

/// # Safety
/// `scenario` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_scenario_rates(scenario: *const GhzScenario, out: *mut GhzRates) -> GhzStatus {
    guard(|| {
        let s = handle(scenario, "scenario")?;
        let out = out_ptr(out, "out")?;
        let model = lift(s.cfg.model())?;
        let r = lift(rate_bounds(&model, s.cfg.target))?;
        let d = lift(ghz_stab::model::spectral_data(&model, s.cfg.target))?;
        *out = GhzRates {
            c_bar_z: r.c_bar_z,
            c_bar_x: r.c_bar_x.unwrap_or(f64::NAN),
            c_bar: r.c_bar,
            c_bar_plus: r.c_bar_plus.unwrap_or(f64::NAN),
            c_bar_minus: r.c_bar_minus.unwrap_or(f64::NAN),
            ell: d.ell,
            c_plus: d.c_plus,
            c_minus: d.c_minus,
        };
        Ok(())
    })
}

unsafe fn read_state(re: *const f64, im: *const f64, dim: usize, expected: usize) -> Result<ComplexMatrix, GhzStatus> {
    if re.is_null() {
        return Err(fail(GhzStatus::NullPointer, "re is null"));
    }
    if dim != expected {
        return Err(fail(GhzStatus::InvalidInput, format!("state dimension {dim}, model needs {expected}")));
    }
    let re = std::slice::from_raw_parts(re, dim * dim);
    let im = if im.is_null() { None } else { Some(std::slice::from_raw_parts(im, dim * dim)) };
    let data = (0..dim * dim).map(|i| C64::new(re[i], im.map_or(0.0, |v| v[i]))).collect();
    lift(ComplexMatrix::from_row_major(dim, dim, data))
}

/// Lyapunov function `V(ρ)` of the scenario and Bures distance of `ρ` to its
/// target. `ρ` is row-major in the computational basis; `im` may be null.
///
/// # Safety
/// `re` (and `im` unless null) must hold `dim*dim` values; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_state_measures(
    scenario: *const GhzScenario,
    re: *const f64,
    im: *const f64,
    dim: usize,
    v_out: *mut f64,
    bures_out: *mut f64,
) -> GhzStatus {
    guard(|| {
        let s = handle(scenario, "scenario")?;
        let v_out = out_ptr(v_out, "v_out")?;
        let bures_out = out_ptr(bures_out, "bures_out")?;
        let model = lift(s.cfg.model())?;
        let rho = read_state(re, im, dim, model.dim())?;
        lift(ghz_stab::dynamics::DensityMatrix::new(rho.clone()))?;
        *v_out = lift(lyapunov(s.cfg.lyapunov_kind(), &rho, &model))?;
        *bures_out = lift(bures_to_ghz(&rho, model.basis(), s.cfg.target))?;
        Ok(())
    })
}

/// Runs the scenario's ensemble.
///
/// # Safety
/// `scenario` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_ensemble_run(scenario: *const GhzScenario, out: *mut *mut GhzEnsemble) -> GhzStatus {
    guard(|| {
        let s = handle(scenario, "scenario")?;
        let out = out_ptr(out, "out")?;
        let result = lift(run_scenario(&s.cfg))?;
        *out = Box::into_raw(Box::new(GhzEnsemble { result }));
        Ok(())
    })
}

/// # Safety
/// `ensemble` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ghz_ensemble_free(ensemble: *mut GhzEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// # Safety
/// `ensemble` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn ghz_ensemble_trajectories(ensemble: *const GhzEnsemble) -> usize {
    ensemble.as_ref().map_or(0, |e| e.result.trajectories())
}

/// Number of sample times.
///
/// # Safety
/// `ensemble` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn ghz_ensemble_samples(ensemble: *const GhzEnsemble) -> usize {
    ensemble.as_ref().map_or(0, |e| e.result.times.len())
}

/// Series selectable with [`ghz_ensemble_series`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GhzSeries {
    Time = 0,
    MeanV = 1,
    MeanBures = 2,
    MeanFidelity = 3,
    Reference = 4,
}

/// Copies a series of length [`ghz_ensemble_samples`] into `buf`.
///
/// # Safety
/// `ensemble` must be a live handle; `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ghz_ensemble_series(
    ensemble: *const GhzEnsemble,
    series: GhzSeries,
    buf: *mut f64,
    len: usize,
) -> GhzStatus {
    guard(|| {
        let r = &handle(ensemble, "ensemble")?.result;
        let values: Vec<f64> = match series {
            GhzSeries::Time => r.times.clone(),
            GhzSeries::MeanV => r.mean.iter().map(|s| s.v).collect(),
            GhzSeries::MeanBures => r.mean.iter().map(|s| s.bures).collect(),
            GhzSeries::MeanFidelity => r.mean.iter().map(|s| s.fidelity).collect(),
            GhzSeries::Reference => r.reference.clone(),
        };
        copy_out(&values, buf, len)
    })
}

/// Final target fidelity of each trajectory, length [`ghz_ensemble_trajectories`].
///
/// # Safety
/// `ensemble` must be a live handle; `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ghz_ensemble_final_fidelities(
    ensemble: *const GhzEnsemble,
    buf: *mut f64,
    len: usize,
) -> GhzStatus {
    guard(|| copy_out(&handle(ensemble, "ensemble")?.result.final_fidelities(), buf, len))
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), GhzStatus> {
    if len < values.len() {
        return Err(fail(
            GhzStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", values.len()),
        ));
    }
    if !values.is_empty() {
        if buf.is_null() {
            return Err(fail(GhzStatus::NullPointer, "buf is null"));
        }
        std::slice::from_raw_parts_mut(buf, values.len()).copy_from_slice(values);
    }
    Ok(())
}

/// Fitted exponent of the mean `V` on `[t0, t1]`; pass `t0 > t1` for the
/// default window (last two thirds).
///
/// # Safety
/// `ensemble` must be a live handle; `slope` writable.
#[no_mangle]
pub unsafe extern "C" fn ghz_ensemble_fit_v(
    ensemble: *const GhzEnsemble,
    t0: f64,
    t1: f64,
    slope: *mut f64,
) -> GhzStatus {
    guard(|| {
        let r = &handle(ensemble, "ensemble")?.result;
        let slope = out_ptr(slope, "slope")?;
        let window = (t0 <= t1).then_some((t0, t1));
        *slope = lift(r.fit_v(window))?.slope;
        Ok(())
    })
}

/// Exponent of the reference curve (NaN when the law has none).
///
/// # Safety
/// `ensemble` must be a live handle or null (which yields NaN).
#[no_mangle]
pub unsafe extern "C" fn ghz_ensemble_reference_exponent(ensemble: *const GhzEnsemble) -> f64 {
    ensemble.as_ref().map_or(f64::NAN, |e| e.result.reference_exponent)
}

/// Writes the ensemble CSV to `path`.
///
/// # Safety
/// `ensemble` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ghz_ensemble_write_csv(ensemble: *const GhzEnsemble, path: *const c_char) -> GhzStatus {
    guard(|| {
        let r = &handle(ensemble, "ensemble")?.result;
        lift(emit_csv(r, Path::new(text(path, "path")?)))
    })
}
