use std::ffi::CStr;
use std::ptr;

use racetrack_fe_ffi::*;

fn defaults() -> RfeParams {
    let mut p = std::mem::MaybeUninit::<RfeParams>::uninit();
    assert_eq!(unsafe { rfe_params_default(p.as_mut_ptr()) }, RfeStatus::Ok);
    unsafe { p.assume_init() }
}

fn last_error() -> String {
    let p = rfe_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(rfe_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn closed_forms_through_the_abi() {
    let mut p = defaults();
    assert_eq!(p.mu, 0.6);
    assert_eq!(p.sigma, 3.0);

    let mut h = RfeHomogeneous { lambda_bar: 0.0, phi_bar: 0.0, y_bar: 0.0, w_bar: 0.0, g_bar: 0.0, omega_bar: 0.0 };
    assert_eq!(unsafe { rfe_homogeneous_state(&p, &mut h) }, RfeStatus::Ok);
    assert!((h.w_bar - 0.25).abs() < 1e-15);

    p.tau = 1.6;
    let (mut g6, mut g1, mut zs) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { rfe_eigenvalue(&p, 6, &mut g6) }, RfeStatus::Ok);
    assert_eq!(unsafe { rfe_eigenvalue(&p, 1, &mut g1) }, RfeStatus::Ok);
    assert_eq!(unsafe { rfe_z_star(&p, &mut zs) }, RfeStatus::Ok);
    assert!(g6 > 0.0 && g1 < 0.0);

    let mut z = 0.0;
    assert_eq!(unsafe { rfe_mode_z(6, 3.2, 1.0, &mut z) }, RfeStatus::Ok);
    assert!((z - 10.24 / 46.24).abs() < 1e-15);
    assert!(z < zs);

    let mut tau = 0.0;
    assert_eq!(unsafe { rfe_critical_tau(&p, 2, 3.0, &mut tau) }, RfeStatus::Ok);
    p.tau = tau;
    let mut g = 1.0;
    unsafe { rfe_eigenvalue(&p, 2, &mut g) };
    assert!(g.abs() < 1e-9);

    let mut q = 0.0;
    p.tau = 1e-9;
    assert_eq!(unsafe { rfe_contraction_modulus(&p, 1.0, 1.0, &mut q) }, RfeStatus::Ok);
    assert!((q - 0.2).abs() < 1e-8);
}

#[test]
fn error_codes() {
    let mut p = defaults();
    let mut out = 0.0;
    assert_eq!(unsafe { rfe_eigenvalue(ptr::null(), 1, &mut out) }, RfeStatus::NullPointer);
    assert!(last_error().contains("params"));
    assert_eq!(unsafe { rfe_eigenvalue(&p, 1, ptr::null_mut()) }, RfeStatus::NullPointer);

    p.sigma = 0.5;
    assert_eq!(unsafe { rfe_eigenvalue(&p, 1, &mut out) }, RfeStatus::InvalidArgument);
    assert!(last_error().contains("sigma"));

    let p = defaults();
    assert_eq!(unsafe { rfe_critical_tau(&p, 0, 3.0, &mut out) }, RfeStatus::InvalidArgument);
    assert_eq!(unsafe { rfe_z_star(&p, &mut out) }, RfeStatus::Ok);
    assert!(rfe_last_error_message().is_null());
}

#[test]
fn spike_counting() {
    let v: Vec<f64> = (0..255)
        .map(|i| 1.0 + 0.5 * (3.0 * (-std::f64::consts::PI + i as f64 * 2.0 * std::f64::consts::PI / 255.0)).cos())
        .collect();
    let mut n = 99;
    assert_eq!(unsafe { rfe_count_spikes(v.as_ptr(), v.len(), 1.2, &mut n) }, RfeStatus::Ok);
    assert_eq!(n, 3);
    assert_eq!(unsafe { rfe_count_spikes(ptr::null(), 3, 1.2, &mut n) }, RfeStatus::NullPointer);
}

#[test]
fn model_lifecycle() {
    let p = RfeParams { tau: 0.8, ..defaults() };
    let mut num = std::mem::MaybeUninit::<RfeNumerics>::uninit();
    assert_eq!(unsafe { rfe_numerics_default(num.as_mut_ptr()) }, RfeStatus::Ok);
    let mut num = unsafe { num.assume_init() };
    num.max_steps = 50;

    let mut model: *mut RfeModel = ptr::null_mut();
    assert_eq!(unsafe { rfe_model_new(&p, &num, 63, &mut model) }, RfeStatus::Ok);
    assert!(!model.is_null());
    let mut n = 0;
    assert_eq!(unsafe { rfe_model_grid_size(model, &mut n) }, RfeStatus::Ok);
    assert_eq!(n, 63);
    let mut theta = vec![0.0; 63];
    assert_eq!(unsafe { rfe_model_theta(model, theta.as_mut_ptr(), 63) }, RfeStatus::Ok);
    assert_eq!(theta[0], -std::f64::consts::PI);

    let lambda = vec![1.0 / (2.0 * std::f64::consts::PI); 63];
    let (mut w, mut om) = (vec![0.0; 63], vec![0.0; 63]);
    assert_eq!(
        unsafe { rfe_model_equilibrium(model, lambda.as_ptr(), 63, w.as_mut_ptr(), om.as_mut_ptr()) },
        RfeStatus::Ok
    );
    assert!(w.iter().all(|v| (v - 0.25).abs() < 1e-10));
    assert_eq!(
        unsafe { rfe_model_equilibrium(model, lambda.as_ptr(), 62, w.as_mut_ptr(), om.as_mut_ptr()) },
        RfeStatus::InvalidArgument
    );

    let mut sim: *mut RfeSimulation = ptr::null_mut();
    assert_eq!(unsafe { rfe_model_simulate(model, ptr::null(), 0, &mut sim) }, RfeStatus::Ok);
    let (mut steps, mut conv, mut drift) = (0usize, true, 1.0);
    assert_eq!(unsafe { rfe_simulation_summary(sim, &mut steps, &mut conv, &mut drift) }, RfeStatus::Ok);
    assert_eq!(steps, 50);
    assert!(!conv);
    assert!(drift < 1e-12);
    let mut out = vec![0.0; 63];
    assert_eq!(unsafe { rfe_simulation_lambda(sim, out.as_mut_ptr(), 10) }, RfeStatus::BufferTooSmall);
    assert_eq!(unsafe { rfe_simulation_lambda(sim, out.as_mut_ptr(), 63) }, RfeStatus::Ok);
    assert!(out.iter().all(|v| *v > 0.0));
    assert_eq!(unsafe { rfe_simulation_omega(sim, out.as_mut_ptr(), 63) }, RfeStatus::Ok);

    unsafe {
        rfe_simulation_free(sim);
        rfe_model_free(model);
        rfe_simulation_free(ptr::null_mut());
        rfe_model_free(ptr::null_mut());
    }
}

#[test]
fn bad_model_rejected() {
    let p = defaults();
    let mut model: *mut RfeModel = ptr::null_mut();
    assert_eq!(unsafe { rfe_model_new(&p, ptr::null(), 2, &mut model) }, RfeStatus::InvalidArgument);
    assert!(model.is_null());
}
