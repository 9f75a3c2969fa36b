//! C ABI for the `mobo-pc` library.
//!
//! Conventions:
//! - Every fallible function returns a [`MoboStatus`]; results go through
//!   out-pointers that are written only on success.
//! - The message of the most recent failure on the calling thread is
//!   available from [`mobo_last_error_message`].
//! - Objects are opaque heap handles released by their `_free` function.
//!   Freeing a null handle is a no-op.
//! - Matrices are dense, row-major `f64` arrays.
//! - Panics never cross the boundary; they are reported as
//!   [`MoboStatus::Panic`].
//!
//! # Safety
//!
//! Pointer arguments must be non-null unless documented otherwise, must
//! point to the number of elements the function describes, and handles must
//! come from this library and not be used after being freed.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mobo_pc::acquisition::SearchSpace;
use mobo_pc::benchmarks::get_benchmark;
use mobo_pc::cone::{ConeBasis, PreferenceTuple, SignTolerance};
use mobo_pc::constraint_prob::prob_satisfies;
use mobo_pc::gp::{FitOptions, GpModel, KernelSpec};
use nalgebra::{DMatrix, DVector};
use mobo_pc::optimizer::{execute, RunConfig, RunOutcome, RunStatus};
use mobo_pc::Error;

/// Outcome of a call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoboStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numeric = 3,
    Contract = 4,
    Config = 5,
    Evaluation = 6,
    Io = 7,
    Panic = 8,
}

impl From<&Error> for MoboStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidData(_) | Error::Parse { .. } | Error::UnknownBenchmark { .. } => MoboStatus::InvalidArgument,
            Error::Numeric(_) => MoboStatus::Numeric,
            Error::Contract(_) => MoboStatus::Contract,
            Error::Config(_) => MoboStatus::Config,
            Error::Evaluation(_) => MoboStatus::Evaluation,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => MoboStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul bytes were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MoboStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(MoboStatus::from(&e), e.to_string())
    }
}

type Outcome<T> = Result<T, Failure>;

fn null_pointer(name: &str) -> Failure {
    Failure(MoboStatus::NullPointer, format!("`{name}` is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(MoboStatus::InvalidArgument, message.into())
}

/// Runs `f`, converting errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Outcome<()>) -> MoboStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MoboStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            MoboStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Outcome<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null_pointer(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Outcome<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null_pointer(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Outcome<&'a T> {
    p.as_ref().ok_or_else(|| null_pointer(name))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Outcome<()> {
    if out.is_null() {
        return Err(null_pointer(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return Err(null_pointer(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("`{name}` is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or null if none failed.
///
/// The string stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mobo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Clears the last error of this thread.
#[no_mangle]
pub extern "C" fn mobo_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// A fitted Gaussian process for one objective.
pub struct MoboGp(GpModel);

unsafe fn training_data(inputs: *const f64, targets: *const f64, n_obs: usize, dim: usize) -> Outcome<(DMatrix<f64>, DVector<f64>)> {
    if n_obs == 0 || dim == 0 {
        return Err(invalid("n_obs and dim must be positive"));
    }
    let x = slice(inputs, n_obs * dim, "inputs")?;
    let y = slice(targets, n_obs, "targets")?;
    Ok((DMatrix::from_row_slice(n_obs, dim, x), DVector::from_column_slice(y)))
}

/// Conditions a zero-mean GP with fixed hyperparameters on `n_obs` rows of
/// `dim` inputs. `lengthscales` holds `dim` values.
#[no_mangle]
pub unsafe extern "C" fn mobo_gp_new(
    inputs: *const f64,
    targets: *const f64,
    n_obs: usize,
    dim: usize,
    signal_variance: f64,
    lengthscales: *const f64,
    noise_variance: f64,
    out: *mut *mut MoboGp,
) -> MoboStatus {
    guard(|| {
        let (x, y) = training_data(inputs, targets, n_obs, dim)?;
        let ls = slice(lengthscales, dim, "lengthscales")?.to_vec();
        let model = GpModel::new(KernelSpec::new(signal_variance, ls, noise_variance)?, x, y)?;
        write(out, Box::into_raw(Box::new(MoboGp(model))), "out")
    })
}

/// Fits hyperparameters by maximum marginal likelihood (deterministic in `seed`).
#[no_mangle]
pub unsafe extern "C" fn mobo_gp_fit(
    inputs: *const f64,
    targets: *const f64,
    n_obs: usize,
    dim: usize,
    seed: u64,
    out: *mut *mut MoboGp,
) -> MoboStatus {
    guard(|| {
        let (x, y) = training_data(inputs, targets, n_obs, dim)?;
        let model = GpModel::fit(x, y, &FitOptions { seed, ..FitOptions::default() })?;
        write(out, Box::into_raw(Box::new(MoboGp(model))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn mobo_gp_free(gp: *mut MoboGp) {
    if !gp.is_null() {
        drop(Box::from_raw(gp));
    }
}

#[no_mangle]
pub unsafe extern "C" fn mobo_gp_dim(gp: *const MoboGp) -> usize {
    gp.as_ref().map_or(0, |g| g.0.dim())
}

/// Posterior mean and variance at `x` (`dim` values).
#[no_mangle]
pub unsafe extern "C" fn mobo_gp_posterior(
    gp: *const MoboGp,
    x: *const f64,
    dim: usize,
    mean: *mut f64,
    variance: *mut f64,
) -> MoboStatus {
    guard(|| {
        let g = handle(gp, "gp")?;
        if dim != g.0.dim() {
            return Err(invalid(format!("model has {} inputs, got {dim}", g.0.dim())));
        }
        let (m, v) = g.0.posterior(slice(x, dim, "x")?)?;
        write(mean, m, "mean")?;
        write(variance, v, "variance")
    })
}

/// Posterior of the gradient at `x`: `dim` means and the row-major
/// `dim x dim` covariance. `covariance` may be null.
#[no_mangle]
pub unsafe extern "C" fn mobo_gp_gradient(
    gp: *const MoboGp,
    x: *const f64,
    dim: usize,
    mean: *mut f64,
    covariance: *mut f64,
) -> MoboStatus {
    guard(|| {
        let g = handle(gp, "gp")?;
        if dim != g.0.dim() {
            return Err(invalid(format!("model has {} inputs, got {dim}", g.0.dim())));
        }
        let post = g.0.gradient_posterior(slice(x, dim, "x")?)?;
        slice_mut(mean, dim, "mean")?.copy_from_slice(post.mean.as_slice());
        if !covariance.is_null() {
            let cov = slice_mut(covariance, dim * dim, "covariance")?;
            for i in 0..dim {
                for j in 0..dim {
                    cov[i * dim + j] = post.covariance[(i, j)];
                }
            }
        }
        Ok(())
    })
}

/// The cone of a preference tuple over `num_objectives` objectives.
pub struct MoboCone(ConeBasis);

/// Builds the cone of the tuple `indices` (most important objective first).
#[no_mangle]
pub unsafe extern "C" fn mobo_cone_new(
    indices: *const usize,
    len: usize,
    num_objectives: usize,
    out: *mut *mut MoboCone,
) -> MoboStatus {
    guard(|| {
        let tuple = PreferenceTuple::new(slice(indices, len, "indices")?.to_vec(), num_objectives)?;
        write(out, Box::into_raw(Box::new(MoboCone(ConeBasis::build(&tuple)))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn mobo_cone_free(cone: *mut MoboCone) {
    if !cone.is_null() {
        drop(Box::from_raw(cone));
    }
}

/// Whether `v` (one partial derivative per objective) is orthogonal to some
/// member of the cone, with the default relative sign tolerance.
#[no_mangle]
pub unsafe extern "C" fn mobo_cone_contains_perp(
    cone: *const MoboCone,
    v: *const f64,
    num_objectives: usize,
    out: *mut bool,
) -> MoboStatus {
    guard(|| {
        let c = handle(cone, "cone")?;
        if num_objectives != c.0.num_objectives() {
            return Err(invalid(format!("cone has {} objectives, got {num_objectives}", c.0.num_objectives())));
        }
        let v = slice(v, num_objectives, "v")?;
        write(out, c.0.in_s_perp_with(v, SignTolerance::default()), "out")
    })
}

/// Monte-Carlo probability that `x` satisfies every cone, with one model per
/// objective.
#[no_mangle]
pub unsafe extern "C" fn mobo_prob_satisfies(
    models: *const *const MoboGp,
    num_models: usize,
    cones: *const *const MoboCone,
    num_cones: usize,
    x: *const f64,
    dim: usize,
    samples: usize,
    key: u64,
    out: *mut f64,
) -> MoboStatus {
    guard(|| {
        let models = slice(models, num_models, "models")?
            .iter()
            .map(|&m| handle(m, "models[i]").map(|g| g.0.clone()))
            .collect::<Outcome<Vec<_>>>()?;
        let bases = slice(cones, num_cones, "cones")?
            .iter()
            .map(|&c| handle(c, "cones[i]").map(|b| b.0.clone()))
            .collect::<Outcome<Vec<_>>>()?;
        let p = prob_satisfies(&models, &bases, slice(x, dim, "x")?, samples, key)?;
        write(out, p.value, "out")
    })
}

/// Dominated hypervolume (maximisation) of `n` row-major points with `m`
/// objectives against the reference point `z`.
#[no_mangle]
pub unsafe extern "C" fn mobo_hypervolume(points: *const f64, n: usize, m: usize, z: *const f64, out: *mut f64) -> MoboStatus {
    guard(|| {
        if m == 0 {
            return Err(invalid("m must be positive"));
        }
        let flat = slice(points, n * m, "points")?;
        let rows: Vec<&[f64]> = flat.chunks(m).collect();
        let hv = if rows.is_empty() { 0.0 } else { mobo_pc::hypervolume::hypervolume(&rows, slice(z, m, "z")?)? };
        write(out, hv, "out")
    })
}

/// Result of an optimisation run on a bundled benchmark.
pub struct MoboRun(RunOutcome);

/// Runs a bundled benchmark (all objectives minimised) under the tuple
/// `indices`; pass `len = 0` for plain expected hypervolume improvement.
/// `initial_design = 0` selects the default size.
#[no_mangle]
pub unsafe extern "C" fn mobo_run_benchmark(
    name: *const c_char,
    indices: *const usize,
    len: usize,
    iterations: usize,
    initial_design: usize,
    seed: u64,
    out: *mut *mut MoboRun,
) -> MoboStatus {
    guard(|| {
        let spec = get_benchmark(c_str(name, "name")?)?;
        let mut config = RunConfig::new(vec![spec.direction; spec.num_objectives], iterations, seed);
        let tuple = slice(indices, len, "indices")?.to_vec();
        if !tuple.is_empty() {
            config.preferences = vec![tuple];
        }
        if initial_design > 0 {
            config.initial_design = Some(initial_design);
        }
        let outcome = execute(&spec, &SearchSpace::Box(spec.design_bounds()), &config)?;
        write(out, Box::into_raw(Box::new(MoboRun(outcome))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn mobo_run_free(run: *mut MoboRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Whether the run finished its budget (false when it aborted).
#[no_mangle]
pub unsafe extern "C" fn mobo_run_completed(run: *const MoboRun) -> bool {
    run.as_ref().is_some_and(|r| !matches!(r.0.status, RunStatus::Aborted { .. }))
}

#[no_mangle]
pub unsafe extern "C" fn mobo_run_num_evaluations(run: *const MoboRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.runs.iter().map(|t| t.records.len()).sum())
}

#[no_mangle]
pub unsafe extern "C" fn mobo_run_pareto_size(run: *const MoboRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.pareto.points.len())
}

/// Hypervolume of the final Pareto set, or NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mobo_run_hypervolume(run: *const MoboRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.0.pareto.hypervolume)
}

/// Fraction of Pareto points satisfying the preference under analytic
/// gradients, or NaN when the run had no tuple.
#[no_mangle]
pub unsafe extern "C" fn mobo_run_compliance(run: *const MoboRun) -> f64 {
    run.as_ref().and_then(|r| r.0.compliance.as_ref()).map_or(f64::NAN, |c| c.fraction)
}

/// Copies Pareto point `k` into `x` (`dim` values) and `y` (`m` values).
#[no_mangle]
pub unsafe extern "C" fn mobo_run_pareto_point(
    run: *const MoboRun,
    k: usize,
    x: *mut f64,
    dim: usize,
    y: *mut f64,
    m: usize,
) -> MoboStatus {
    guard(|| {
        let r = handle(run, "run")?;
        let p = r.0.pareto.points.get(k).ok_or_else(|| invalid(format!("no Pareto point {k}")))?;
        if dim != p.x.len() || m != p.y.len() {
            return Err(invalid(format!("point has {} inputs and {} objectives", p.x.len(), p.y.len())));
        }
        slice_mut(x, dim, "x")?.copy_from_slice(&p.x);
        slice_mut(y, m, "y")?.copy_from_slice(&p.y);
        Ok(())
    })
}
