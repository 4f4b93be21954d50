//! C ABI over `racetrack-fe`.
//!
//! Every entry point returns an [`RfeStatus`]; outputs go through caller
//! supplied pointers. On failure the message is available from
//! [`rfe_last_error_message`] on the same thread. Handles are opaque and must
//! be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use racetrack_fe::analysis::count_spikes_in;
use racetrack_fe::dynamics::{simulate, SimulationResult};
use racetrack_fe::equilibrium::instantaneous_equilibrium;
use racetrack_fe::stability::{critical_tau, eigenvalue, homogeneous_state, mode_z, z_star};
use racetrack_fe::theory::contraction_modulus;
use racetrack_fe::{make_grid, perturbed_uniform, uniform_field, Error, Field, Grid, KernelMatrix, ModelParams, NumericsConfig};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Model constants; field meanings follow the library's `ModelParams`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfeParams {
    pub mu: f64,
    pub sigma: f64,
    pub fixed_input: f64,
    pub tau: f64,
    pub migration_speed: f64,
    pub lambda_total: f64,
    pub phi_total: f64,
    pub rho: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfeNumerics {
    pub dt: f64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub stat_tol: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub perturb_amplitude: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfeHomogeneous {
    pub lambda_bar: f64,
    pub phi_bar: f64,
    pub y_bar: f64,
    pub w_bar: f64,
    pub g_bar: f64,
    pub omega_bar: f64,
}

/// Parameters, grid and kernel of one model.
pub struct RfeModel {
    params: ModelParams,
    numerics: NumericsConfig,
    grid: Arc<Grid>,
    kernel: KernelMatrix,
    phi: Field,
}

/// Outcome of [`rfe_model_simulate`].
pub struct RfeSimulation {
    result: SimulationResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(RfeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_numerical() { RfeStatus::Numerical } else { RfeStatus::InvalidArgument };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RfeStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RfeStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RfeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            RfeStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or points to a valid `T`.
unsafe fn read<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `p` is null or points to writable memory for a `T`.
unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

/// # Safety
/// `p` is null or valid for `len` reads.
unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` is null or valid for `cap` writes.
unsafe fn copy_out(values: &[f64], p: *mut f64, cap: usize, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if cap < values.len() {
        return Err(Failure(
            RfeStatus::BufferTooSmall,
            format!("{what} holds {cap} values, {} needed", values.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), p, values.len());
    Ok(())
}

impl From<RfeParams> for ModelParams {
    fn from(p: RfeParams) -> Self {
        ModelParams {
            mu: p.mu,
            sigma: p.sigma,
            fixed_input: p.fixed_input,
            tau: p.tau,
            migration_speed: p.migration_speed,
            lambda_total: p.lambda_total,
            phi_total: p.phi_total,
            rho: p.rho,
        }
    }
}

impl From<ModelParams> for RfeParams {
    fn from(p: ModelParams) -> Self {
        RfeParams {
            mu: p.mu,
            sigma: p.sigma,
            fixed_input: p.fixed_input,
            tau: p.tau,
            migration_speed: p.migration_speed,
            lambda_total: p.lambda_total,
            phi_total: p.phi_total,
            rho: p.rho,
        }
    }
}

impl From<RfeNumerics> for NumericsConfig {
    fn from(n: RfeNumerics) -> Self {
        NumericsConfig {
            dt: n.dt,
            fp_tol: n.fp_tol,
            fp_max_iter: n.fp_max_iter,
            stat_tol: n.stat_tol,
            max_steps: n.max_steps,
            seed: n.seed,
            perturb_amplitude: n.perturb_amplitude,
            snapshot_stride: 0,
        }
    }
}

impl From<NumericsConfig> for RfeNumerics {
    fn from(n: NumericsConfig) -> Self {
        RfeNumerics {
            dt: n.dt,
            fp_tol: n.fp_tol,
            fp_max_iter: n.fp_max_iter,
            stat_tol: n.stat_tol,
            max_steps: n.max_steps,
            seed: n.seed,
            perturb_amplitude: n.perturb_amplitude,
        }
    }
}

unsafe fn checked_params(p: *const RfeParams) -> Result<ModelParams, Failure> {
    let params: ModelParams = (*read(p, "params")?).into();
    params.validate()?;
    Ok(params)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rfe_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(s) => s,
        Err(_) => c"",
    };
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn rfe_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `out` must point to writable memory for one `RfeParams`.
#[no_mangle]
pub unsafe extern "C" fn rfe_params_default(out: *mut RfeParams) -> RfeStatus {
    guard(|| write(out, ModelParams::default().into(), "out"))
}

/// # Safety
/// `out` must point to writable memory for one `RfeNumerics`.
#[no_mangle]
pub unsafe extern "C" fn rfe_numerics_default(out: *mut RfeNumerics) -> RfeStatus {
    guard(|| write(out, NumericsConfig::default().into(), "out"))
}

/// # Safety
/// `params` must point to a valid `RfeParams`; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn rfe_eigenvalue(params: *const RfeParams, k: i64, out: *mut f64) -> RfeStatus {
    guard(|| {
        let p = checked_params(params)?;
        write(out, eigenvalue(k, &p), "out")
    })
}

/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn rfe_mode_z(k: i64, alpha: f64, rho: f64, out: *mut f64) -> RfeStatus {
    guard(|| {
        if !(alpha > 0.0 && rho > 0.0) {
            return Err(Failure(RfeStatus::InvalidArgument, "alpha and rho must be > 0".into()));
        }
        write(out, mode_z(k, alpha, rho), "out")
    })
}

/// # Safety
/// `params` must point to a valid `RfeParams`; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn rfe_z_star(params: *const RfeParams, out: *mut f64) -> RfeStatus {
    guard(|| {
        let p = checked_params(params)?;
        write(out, z_star(&p), "out")
    })
}

/// Critical transport cost of mode `k` at elasticity `sigma`; the `sigma`
/// field of `params` is ignored.
///
/// # Safety
/// `params` must point to a valid `RfeParams`; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn rfe_critical_tau(params: *const RfeParams, k: i64, sigma: f64, out: *mut f64) -> RfeStatus {
    guard(|| {
        let p = checked_params(params)?.with_sigma(sigma);
        p.validate()?;
        write(out, critical_tau(k, sigma, &p)?, "out")
    })
}

/// # Safety
/// `params` must point to a valid `RfeParams`; `out` to one writable struct.
#[no_mangle]
pub unsafe extern "C" fn rfe_homogeneous_state(params: *const RfeParams, out: *mut RfeHomogeneous) -> RfeStatus {
    guard(|| {
        let h = homogeneous_state(&checked_params(params)?);
        let value = RfeHomogeneous {
            lambda_bar: h.lambda_bar,
            phi_bar: h.phi_bar,
            y_bar: h.y_bar,
            w_bar: h.w_bar,
            g_bar: h.g_bar,
            omega_bar: h.omega_bar,
        };
        write(out, value, "out")
    })
}

/// # Safety
/// `params` must point to a valid `RfeParams`; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn rfe_contraction_modulus(
    params: *const RfeParams,
    lambda1: f64,
    lambda2: f64,
    out: *mut f64,
) -> RfeStatus {
    guard(|| {
        let p = checked_params(params)?;
        write(out, contraction_modulus(&p, lambda1, lambda2)?, "out")
    })
}

/// Spikes of `values[0..len]` above `threshold_ratio` times the mean.
///
/// # Safety
/// `values` must be valid for `len` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn rfe_count_spikes(
    values: *const f64,
    len: usize,
    threshold_ratio: f64,
    out: *mut usize,
) -> RfeStatus {
    guard(|| {
        let v = slice(values, len, "values")?;
        write(out, count_spikes_in(v, threshold_ratio), "out")
    })
}

/// Builds a model on `grid_size` nodes. `numerics` may be null for defaults.
///
/// # Safety
/// `params` must point to a valid `RfeParams`, `numerics` be null or valid,
/// and `out` point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rfe_model_new(
    params: *const RfeParams,
    numerics: *const RfeNumerics,
    grid_size: usize,
    out: *mut *mut RfeModel,
) -> RfeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = checked_params(params)?;
        let numerics: NumericsConfig = match numerics.as_ref() {
            Some(n) => (*n).into(),
            None => NumericsConfig::default(),
        };
        numerics.validate()?;
        let grid = make_grid(grid_size, params.rho)?;
        let kernel = KernelMatrix::build(&grid, &params);
        let phi = uniform_field(&grid, params.phi_total)?;
        let model = Box::new(RfeModel { params, numerics, grid, kernel, phi });
        out.write(Box::into_raw(model));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`rfe_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rfe_model_free(model: *mut RfeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rfe_model_grid_size(model: *const RfeModel, out: *mut usize) -> RfeStatus {
    guard(|| {
        let m = read(model, "model")?;
        write(out, m.grid.n_nodes(), "out")
    })
}

/// Node angles, `grid_size` values.
///
/// # Safety
/// `model` must be a live handle; `buf` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn rfe_model_theta(model: *const RfeModel, buf: *mut f64, cap: usize) -> RfeStatus {
    guard(|| {
        let m = read(model, "model")?;
        copy_out(m.grid.theta(), buf, cap, "buf")
    })
}

/// Nominal and real wage for the population `lambda[0..len]`; `w_out` and
/// `omega_out` each receive `len` values.
///
/// # Safety
/// `model` must be a live handle; `lambda` valid for `len` reads; the
/// output buffers valid for `len` writes each.
#[no_mangle]
pub unsafe extern "C" fn rfe_model_equilibrium(
    model: *const RfeModel,
    lambda: *const f64,
    len: usize,
    w_out: *mut f64,
    omega_out: *mut f64,
) -> RfeStatus {
    guard(|| {
        let m = read(model, "model")?;
        let values = slice(lambda, len, "lambda")?.to_vec();
        let field = Field::new(m.grid.clone(), values)?;
        let eq = instantaneous_equilibrium(&field, &m.phi, &m.kernel, &m.params, &m.numerics, None)?;
        copy_out(eq.w.values(), w_out, len, "w_out")?;
        copy_out(eq.omega.values(), omega_out, len, "omega_out")
    })
}

/// Integrates to stationarity from `initial[0..len]`, or from the seeded
/// perturbed-uniform state when `initial` is null.
///
/// # Safety
/// `model` must be a live handle; `initial` null or valid for `len` reads;
/// `out` valid for one handle write.
#[no_mangle]
pub unsafe extern "C" fn rfe_model_simulate(
    model: *const RfeModel,
    initial: *const f64,
    len: usize,
    out: *mut *mut RfeSimulation,
) -> RfeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = read(model, "model")?;
        let lambda0 = if initial.is_null() {
            perturbed_uniform(&m.grid, m.params.lambda_total, &m.numerics)?
        } else {
            Field::new(m.grid.clone(), slice(initial, len, "initial")?.to_vec())?
        };
        let result = simulate(&lambda0, &m.phi, &m.kernel, &m.params, &m.numerics)?;
        out.write(Box::into_raw(Box::new(RfeSimulation { result })));
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle from [`rfe_model_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rfe_simulation_free(sim: *mut RfeSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// # Safety
/// `sim` must be a live handle; every non-null output valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rfe_simulation_summary(
    sim: *const RfeSimulation,
    steps: *mut usize,
    converged: *mut bool,
    mass_drift: *mut f64,
) -> RfeStatus {
    guard(|| {
        let r = &read(sim, "sim")?.result;
        if !steps.is_null() {
            steps.write(r.steps_taken);
        }
        if !converged.is_null() {
            converged.write(r.converged);
        }
        if !mass_drift.is_null() {
            mass_drift.write(r.mass_drift);
        }
        Ok(())
    })
}

/// Final population field.
///
/// # Safety
/// `sim` must be a live handle; `buf` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn rfe_simulation_lambda(sim: *const RfeSimulation, buf: *mut f64, cap: usize) -> RfeStatus {
    guard(|| copy_out(read(sim, "sim")?.result.final_lambda.values(), buf, cap, "buf"))
}

/// Real wage at the final population.
///
/// # Safety
/// `sim` must be a live handle; `buf` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn rfe_simulation_omega(sim: *const RfeSimulation, buf: *mut f64, cap: usize) -> RfeStatus {
    guard(|| copy_out(read(sim, "sim")?.result.final_equilibrium.omega.values(), buf, cap, "buf"))
}
