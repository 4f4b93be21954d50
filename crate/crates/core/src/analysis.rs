//! Spike counting, measured linear growth rates and parameter sweeps.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{euler_step, simulate};
use crate::error::{Error, Result};
use crate::grid::{make_grid, perturbed_uniform, uniform_field, Field, Grid};
use crate::io::csv::write_field_csv;
use crate::io::meta::Metadata;
use crate::kernel::KernelMatrix;
use crate::params::{ModelParams, NumericsConfig};
use crate::stability::no_black_hole;

pub const DEFAULT_THRESHOLD_RATIO: f64 = 2.0;

/// Number of peaks above `threshold_ratio * mean`.
///
/// A peak is a maximal run of equal values whose cyclic neighbours on both
/// sides are strictly lower. A constant field has none.
pub fn count_spikes(lambda: &Field, threshold_ratio: f64) -> usize {
    count_spikes_in(lambda.values(), threshold_ratio)
}

pub fn count_spikes_in(values: &[f64], threshold_ratio: f64) -> usize {
    let n = values.len();
    if n == 0 {
        return 0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let threshold = threshold_ratio * mean;
    // Start scanning just after a value change so no run wraps the origin.
    let Some(start) = (0..n).find(|&i| values[i] != values[(i + n - 1) % n]) else {
        return 0;
    };
    let mut spikes = 0;
    let mut i = 0;
    while i < n {
        let head = (start + i) % n;
        let value = values[head];
        let mut len = 1;
        while len < n && values[(head + len) % n] == value {
            len += 1;
        }
        let before = values[(head + n - 1) % n];
        let after = values[(head + len) % n];
        if before < value && after < value && value > threshold {
            spikes += 1;
        }
        i += len;
    }
    spikes
}

/// Magnitude of the discrete Fourier coefficient `sum lambda_j e^{-ik theta_j} h`.
pub fn fourier_amplitude(field: &Field, k: i64) -> f64 {
    let grid = field.grid();
    let (mut re, mut im) = (0.0, 0.0);
    for (v, th) in field.values().iter().zip(grid.theta()) {
        let phase = k as f64 * th;
        re += v * phase.cos();
        im -= v * phase.sin();
    }
    re.hypot(im) * grid.weight()
}

/// `lambda_bar (1 + epsilon cos k theta)`, rescaled to mass `Lambda`.
pub fn mode_perturbation(grid: &std::sync::Arc<Grid>, params: &ModelParams, k: i64, epsilon: f64) -> Result<Field> {
    let mean = params.lambda_total / grid.circumference();
    let raw: Vec<f64> = grid
        .theta()
        .iter()
        .map(|th| mean * (1.0 + epsilon * (k as f64 * th).cos()))
        .collect();
    let scale = params.lambda_total / grid.integrate(&raw);
    Field::new(grid.clone(), raw.into_iter().map(|v| v * scale).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    pub k: i64,
    pub rate: f64,
    /// Fit points `(t, ln |lambda_hat_k(t)|)`.
    pub points: Vec<(f64, f64)>,
    /// Set when the amplitude fell below `1e-14` and the fit was truncated.
    pub underflow: bool,
}

pub const AMPLITUDE_FLOOR: f64 = 1e-14;

/// Slope of `ln |lambda_hat_k|` under the full nonlinear Euler dynamics, fitted
/// by least squares over the middle 80% of `[0, horizon]`.
pub fn measured_growth_rate(
    k: i64,
    grid: &std::sync::Arc<Grid>,
    params: &ModelParams,
    cfg: &NumericsConfig,
    epsilon: f64,
    horizon: f64,
) -> Result<GrowthFit> {
    params.validate()?;
    cfg.validate()?;
    if k == 0 {
        return Err(Error::param("k", "mode 0 carries the conserved mass"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", format!("must lie in (0, 1), got {epsilon}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::param("horizon", format!("must be > 0, got {horizon}")));
    }
    let kernel = KernelMatrix::build(grid, params);
    let phi = uniform_field(grid, params.phi_total)?;
    let mut lambda = mode_perturbation(grid, params, k, epsilon)?;
    let n_steps = (horizon / cfg.dt).round().max(1.0) as usize;
    let (t_lo, t_hi) = (0.1 * horizon, 0.9 * horizon);

    let mut points = Vec::new();
    let mut underflow = false;
    let mut warm: Option<Field> = None;
    for step in 0..=n_steps {
        let t = step as f64 * cfg.dt;
        let amp = fourier_amplitude(&lambda, k);
        if amp < AMPLITUDE_FLOOR {
            underflow = true;
            break;
        }
        if t >= t_lo - 1e-12 && t <= t_hi + 1e-12 {
            points.push((t, amp.ln()));
        }
        if step == n_steps {
            break;
        }
        let next = euler_step(&lambda, &phi, &kernel, params, cfg, warm.as_ref())?;
        warm = Some(next.equilibrium.w);
        lambda = next.lambda;
    }
    if points.len() < 2 {
        return Err(Error::AmplitudeUnderflow { k, samples: points.len() });
    }
    Ok(GrowthFit { k, rate: slope(&points), points, underflow })
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in points {
        sxy += (t - mt) * (y - my);
        sxx += (t - mt) * (t - mt);
    }
    sxy / sxx
}

/// One stationary run of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param_name: String,
    pub param_value: f64,
    /// Present only for converged rows.
    pub spike_count: Option<usize>,
    pub converged: bool,
    pub steps: usize,
    pub max_lambda: f64,
    pub final_path: Option<PathBuf>,
    pub no_black_hole: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub grid_size: usize,
    pub threshold_ratio: f64,
    pub workers: usize,
    /// Directory for per-row final fields; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { grid_size: 255, threshold_ratio: DEFAULT_THRESHOLD_RATIO, workers: 1, out_dir: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Tau,
    Sigma,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::Sigma => "sigma",
        }
    }

    fn apply(self, base: &ModelParams, value: f64) -> ModelParams {
        match self {
            SweepParam::Tau => base.with_tau(value),
            SweepParam::Sigma => base.with_sigma(value),
        }
    }
}

/// Simulates from the seeded perturbed-uniform start and counts spikes.
pub fn run_stationary(
    params: &ModelParams,
    cfg: &NumericsConfig,
    opts: &SweepOptions,
    label: (&str, f64),
) -> SweepRow {
    let mut row = SweepRow {
        param_name: label.0.to_string(),
        param_value: label.1,
        spike_count: None,
        converged: false,
        steps: 0,
        max_lambda: f64::NAN,
        final_path: None,
        no_black_hole: no_black_hole(params),
        error: None,
    };
    match stationary_inner(params, cfg, opts, label, &mut row) {
        Ok(()) => row,
        Err(e) => {
            row.error = Some(e.to_string());
            row
        }
    }
}

fn stationary_inner(
    params: &ModelParams,
    cfg: &NumericsConfig,
    opts: &SweepOptions,
    label: (&str, f64),
    row: &mut SweepRow,
) -> Result<()> {
    params.validate()?;
    cfg.validate()?;
    let grid = make_grid(opts.grid_size, params.rho)?;
    let kernel = KernelMatrix::build(&grid, params);
    let phi = uniform_field(&grid, params.phi_total)?;
    let lambda0 = perturbed_uniform(&grid, params.lambda_total, cfg)?;
    let result = simulate(&lambda0, &phi, &kernel, params, cfg)?;
    row.converged = result.converged;
    row.steps = result.steps_taken;
    row.max_lambda = result.final_lambda.max();
    if result.converged {
        row.spike_count = Some(count_spikes(&result.final_lambda, opts.threshold_ratio));
    }
    if let Some(dir) = &opts.out_dir {
        let path = row_path(dir, label);
        let meta = Metadata::new(params, cfg, opts.grid_size)
            .with("converged", result.converged)
            .with("steps", result.steps_taken);
        write_field_csv(&result.final_lambda, &path, &meta)?;
        row.final_path = Some(path);
    }
    Ok(())
}

fn row_path(dir: &Path, label: (&str, f64)) -> PathBuf {
    dir.join(format!("final_{}_{}.csv", label.0, label.1))
}

/// One row per value, in input order; a failing row is recorded and the
/// sweep continues.
pub fn run_sweep(
    which: SweepParam,
    values: &[f64],
    params_base: &ModelParams,
    cfg: &NumericsConfig,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let run = |v: &f64| run_stationary(&which.apply(params_base, *v), cfg, opts, (which.name(), *v));
    if opts.workers <= 1 {
        return Ok(values.iter().map(run).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| values.par_iter().map(run).collect()))
}

pub fn run_tau_sweep(
    sigma: f64,
    tau_values: &[f64],
    params_base: &ModelParams,
    cfg: &NumericsConfig,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    run_sweep(SweepParam::Tau, tau_values, &params_base.with_sigma(sigma), cfg, opts)
}

pub fn run_sigma_sweep(
    tau: f64,
    sigma_values: &[f64],
    params_base: &ModelParams,
    cfg: &NumericsConfig,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    run_sweep(SweepParam::Sigma, sigma_values, &params_base.with_tau(tau), cfg, opts)
}

/// Indices `i` where the converged count rises although the swept value
/// decreased, for values listed in decreasing order.
pub fn monotonicity_breaks(rows: &[SweepRow]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..rows.len() {
        let (a, b) = (&rows[i - 1], &rows[i]);
        if let (Some(ca), Some(cb)) = (a.spike_count, b.spike_count) {
            let falling = b.param_value < a.param_value;
            if (falling && cb > ca) || (!falling && cb < ca) {
                out.push(i);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos_field(n: usize, k: f64, amp: f64) -> Field {
        let grid = make_grid(n, 1.0).unwrap();
        let mean = 1.0 / (2.0 * PI);
        let v = grid.theta().iter().map(|t| mean * (1.0 + amp * (k * t).cos())).collect();
        Field::new(grid, v).unwrap()
    }

    #[test]
    fn spikes_of_simple_fields() {
        let flat = Field::constant(make_grid(64, 1.0).unwrap(), 0.3);
        assert_eq!(count_spikes(&flat, 2.0), 0);
        assert_eq!(count_spikes(&cos_field(255, 3.0, 0.5), 1.2), 3);
        assert_eq!(count_spikes(&cos_field(255, 3.0, 0.5), 2.0), 0);
    }

    #[test]
    fn plateau_counts_once() {
        assert_eq!(count_spikes_in(&[0.0, 0.0, 5.0, 5.0, 5.0, 0.0, 0.0, 0.0], 2.0), 1);
        // Plateau straddling the wrap point.
        assert_eq!(count_spikes_in(&[5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0, 5.0], 2.0), 1);
        // A shoulder is not a peak.
        assert_eq!(count_spikes_in(&[0.0, 4.0, 4.0, 6.0, 0.0, 0.0, 0.0, 0.0], 2.0), 1);
        assert_eq!(count_spikes_in(&[], 2.0), 0);
    }

    #[test]
    fn fourier_bins_of_mode_input() {
        let grid = make_grid(64, 1.0).unwrap();
        let p = ModelParams::default();
        let f = mode_perturbation(&grid, &p, 4, 1e-3).unwrap();
        let bar = p.lambda_total / (2.0 * PI);
        let expected = PI * bar * 1e-3;
        approx::assert_relative_eq!(fourier_amplitude(&f, 4), expected, max_relative = 1e-9);
        approx::assert_relative_eq!(fourier_amplitude(&f, -4), expected, max_relative = 1e-9);
        for k in [1, 2, 3, 5, 6, 8] {
            assert!(fourier_amplitude(&f, k) < 1e-15);
        }
    }

    #[test]
    fn slope_of_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        approx::assert_relative_eq!(slope(&pts), -0.5, max_relative = 1e-14);
    }

    #[test]
    fn empty_sweep() {
        let rows = run_tau_sweep(3.0, &[], &ModelParams::default(), &NumericsConfig::default(), &SweepOptions::default())
            .unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn failing_row_is_recorded() {
        let opts = SweepOptions { grid_size: 15, ..Default::default() };
        let rows = run_tau_sweep(3.0, &[-1.0], &ModelParams::default(), &NumericsConfig::default(), &opts).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].error.is_some());
        assert_eq!(rows[0].spike_count, None);
    }

    #[test]
    fn monotonicity() {
        let mk = |v: f64, c: usize| SweepRow {
            param_name: "tau".into(),
            param_value: v,
            spike_count: Some(c),
            converged: true,
            steps: 1,
            max_lambda: 1.0,
            final_path: None,
            no_black_hole: true,
            error: None,
        };
        assert!(monotonicity_breaks(&[mk(1.6, 6), mk(1.3, 5), mk(1.1, 5)]).is_empty());
        assert_eq!(monotonicity_breaks(&[mk(1.6, 4), mk(1.3, 5)]), vec![1]);
    }
}
