//! Linear stability of the homogeneous stationary state.
//!
//! A perturbation `e^{ik theta}` of the uniform population grows at rate
//! `Gamma_k`, a closed-form function of the spectral factor `Z_k` of the
//! transport kernel. The mode is unstable exactly when `Z_k < Z*`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Spatially uniform stationary solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogeneousState {
    pub lambda_bar: f64,
    pub phi_bar: f64,
    pub y_bar: f64,
    pub w_bar: f64,
    pub g_bar: f64,
    pub omega_bar: f64,
}

/// `1 - (-1)^|k| e^{-x}`, accurate for small `x`.
fn parity_factor(k: i64, x: f64) -> f64 {
    if k.unsigned_abs() % 2 == 0 {
        -(-x).exp_m1()
    } else {
        1.0 + (-x).exp()
    }
}

pub fn homogeneous_state(params: &ModelParams) -> HomogeneousState {
    let circ = 2.0 * PI * params.rho;
    let lambda_bar = params.lambda_total / circ;
    let phi_bar = params.phi_total / circ;
    let ratio = params.mu / params.sigma;
    let w_bar = ratio * phi_bar / lambda_bar / (1.0 - ratio);
    let alpha = params.alpha();
    let ring_integral = -2.0 * (-alpha * params.rho * PI).exp_m1() / alpha;
    let g_bar = (lambda_bar * ring_integral / params.fixed_input).powf(1.0 / (1.0 - params.sigma));
    HomogeneousState {
        lambda_bar,
        phi_bar,
        y_bar: w_bar * lambda_bar + phi_bar,
        w_bar,
        g_bar,
        omega_bar: w_bar * g_bar.powf(-params.mu),
    }
}

/// Eigenvalue of the kernel convolution on `e^{ik theta}`:
/// `E_k = 2 alpha rho^2 (1 - (-1)^|k| e^{-alpha rho pi}) / (k^2 + alpha^2 rho^2)`.
pub fn mode_e(k: i64, alpha: f64, rho: f64) -> f64 {
    let ar = alpha * rho;
    let k2 = (k * k) as f64;
    2.0 * alpha * rho * rho * parity_factor(k, ar * PI) / (k2 + ar * ar)
}

/// Normalized spectral factor `Z_k = E_k / E_0`, in `(0, 1)` for `k != 0`.
pub fn mode_z(k: i64, alpha: f64, rho: f64) -> f64 {
    let ar = alpha * rho;
    let k2 = (k * k) as f64;
    let shape = ar * ar / (k2 + ar * ar);
    if k.unsigned_abs() % 2 == 0 {
        shape
    } else {
        let x = ar * PI;
        shape * (1.0 + (-x).exp()) / -(-x).exp_m1()
    }
}

/// Threshold `Z*`: mode `k` is stable iff `Z_k > Z*`.
pub fn z_star(params: &ModelParams) -> f64 {
    let h = homogeneous_state(params);
    let s = params.sigma;
    (h.w_bar + h.w_bar * s / (s - 1.0)) / (params.mu * h.w_bar / (s - 1.0) + h.y_bar / h.lambda_bar)
}

/// `sigma - 1 > mu`; without it no transport cost stabilizes every mode.
pub fn no_black_hole(params: &ModelParams) -> bool {
    params.sigma - 1.0 > params.mu
}

/// `w_hat_k / lambda_hat_k` of the linearized wage equation.
pub fn wage_response_ratio(k: i64, params: &ModelParams) -> f64 {
    let h = homogeneous_state(params);
    let z = mode_z(k, params.alpha(), params.rho);
    let (mu, s, lb) = (params.mu, params.sigma, h.lambda_bar);
    let num = -mu * h.y_bar / (s * lb * lb) * z * z + mu * h.w_bar / (s * lb) * z;
    num / (1.0 - mu / s * z)
}

/// `G_hat_k / lambda_hat_k = G_bar Z_k / ((1 - sigma) lambda_bar)`.
pub fn price_response_ratio(k: i64, params: &ModelParams) -> f64 {
    let h = homogeneous_state(params);
    let z = mode_z(k, params.alpha(), params.rho);
    h.g_bar * z / ((1.0 - params.sigma) * h.lambda_bar)
}

/// `omega_hat_k / lambda_hat_k`, assembled from the price and wage responses.
pub fn realwage_response_ratio(k: i64, params: &ModelParams) -> f64 {
    let h = homogeneous_state(params);
    let mu = params.mu;
    -mu * h.w_bar * h.g_bar.powf(-mu - 1.0) * price_response_ratio(k, params)
        + h.g_bar.powf(-mu) * wage_response_ratio(k, params)
}

/// Growth rate `Gamma_k` of mode `k`.
pub fn eigenvalue(k: i64, params: &ModelParams) -> f64 {
    let h = homogeneous_state(params);
    let z = mode_z(k, params.alpha(), params.rho);
    let (mu, s) = (params.mu, params.sigma);
    let inner = h.w_bar * z / (1.0 - s) + (h.y_bar / h.lambda_bar * z * z - h.w_bar * z) / (s - mu * z);
    -params.migration_speed * mu * h.g_bar.powf(-mu) * inner
}

/// Per-frequency stability data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeDiagnostics {
    pub k: i64,
    pub e_k: f64,
    pub z_k: f64,
    pub gamma_k: f64,
    pub stable: bool,
}

pub fn mode_diagnostics(k: i64, params: &ModelParams) -> ModeDiagnostics {
    let gamma_k = eigenvalue(k, params);
    ModeDiagnostics {
        k,
        e_k: mode_e(k, params.alpha(), params.rho),
        z_k: mode_z(k, params.alpha(), params.rho),
        gamma_k,
        stable: gamma_k < 0.0,
    }
}

/// Bracket and tolerance of the critical-point search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionConfig {
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub tol: f64,
    /// How many times the upper end may double before giving up.
    pub max_expansions: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            tau_lo: 1e-6,
            tau_hi: 50.0,
            tol: 1e-10,
            max_expansions: 40,
        }
    }
}

/// Transport cost `tau_k*` where `Gamma_k` changes sign, at elasticity `sigma`.
pub fn critical_tau(k: i64, sigma: f64, params_base: &ModelParams) -> Result<f64> {
    critical_tau_with(k, sigma, params_base, &BisectionConfig::default())
}

pub fn critical_tau_with(k: i64, sigma: f64, params_base: &ModelParams, cfg: &BisectionConfig) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k", "mode 0 is removed by the mass constraint"));
    }
    let params = params_base.with_sigma(sigma);
    if !no_black_hole(&params) {
        return Err(Error::param(
            "sigma",
            format!("critical points need sigma - 1 > mu, got sigma = {sigma}, mu = {}", params.mu),
        ));
    }
    let gamma = |tau: f64| eigenvalue(k, &params.with_tau(tau));
    let (mut lo, mut hi) = (cfg.tau_lo, cfg.tau_hi);
    let (mut g_lo, mut g_hi) = (gamma(lo), gamma(hi));
    let mut expansions = 0;
    while g_hi >= 0.0 && expansions < cfg.max_expansions {
        lo = hi;
        g_lo = g_hi;
        hi *= 2.0;
        g_hi = gamma(hi);
        expansions += 1;
    }
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::NoBracket {
            k,
            lo,
            hi,
            gamma_lo: g_lo,
            gamma_hi: g_hi,
        });
    }
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        if gamma(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One point of a critical curve; `tau` is `None` where the search failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub sigma: f64,
    pub tau: Option<f64>,
}

pub fn critical_curve(k: i64, sigma_grid: &[f64], params_base: &ModelParams) -> Vec<CurvePoint> {
    sigma_grid
        .iter()
        .map(|&sigma| CurvePoint {
            sigma,
            tau: critical_tau(k, sigma, params_base).ok(),
        })
        .collect()
}

/// One cell of a `Gamma_k` heat map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatCell {
    pub k: i64,
    pub tau: f64,
    pub sigma: f64,
    pub z_k: f64,
    pub gamma_k: f64,
}

pub fn heatmap(k: i64, taus: &[f64], sigmas: &[f64], params_base: &ModelParams) -> Vec<HeatCell> {
    let mut cells = Vec::with_capacity(taus.len() * sigmas.len());
    for &sigma in sigmas {
        for &tau in taus {
            let p = params_base.with_sigma(sigma).with_tau(tau);
            cells.push(HeatCell {
                k,
                tau,
                sigma,
                z_k: mode_z(k, p.alpha(), p.rho),
                gamma_k: eigenvalue(k, &p),
            });
        }
    }
    cells
}

/// Stability picture of one parameter set over a frequency window.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub params: ModelParams,
    pub homogeneous: HomogeneousState,
    pub modes: Vec<ModeDiagnostics>,
    pub z_star: f64,
    pub no_black_hole: bool,
    /// `tau_k*` at the report's `sigma` for each `k` in the window.
    pub critical_taus: BTreeMap<i64, f64>,
}

impl StabilityReport {
    /// Modes `+-1 ..= +-k_max`; `k = 0` is constrained out by mass conservation.
    pub fn build(params: &ModelParams, k_max: i64) -> Self {
        let mut ks: Vec<i64> = (1..=k_max).flat_map(|k| [-k, k]).collect();
        ks.sort_unstable();
        let nbh = no_black_hole(params);
        let modes = ks.iter().map(|&k| mode_diagnostics(k, params)).collect();
        let critical_taus = if nbh {
            ks.iter()
                .filter_map(|&k| critical_tau(k, params.sigma, params).ok().map(|t| (k, t)))
                .collect()
        } else {
            BTreeMap::new()
        };
        Self {
            params: *params,
            homogeneous: homogeneous_state(params),
            modes,
            z_star: z_star(params),
            no_black_hole: nbh,
            critical_taus,
        }
    }

    /// Positive frequencies where the sign of `Gamma_k` differs from `Gamma_{k-1}`.
    pub fn sign_changes(&self) -> Vec<i64> {
        let pos: Vec<&ModeDiagnostics> = self.modes.iter().filter(|m| m.k > 0).collect();
        pos.windows(2)
            .filter(|w| w[0].stable != w[1].stable)
            .map(|w| w[1].k)
            .collect()
    }
}
