//! Replicator migration dynamics and time integration to stationarity.

use crate::equilibrium::{instantaneous_equilibrium, EquilibriumState};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::kernel::KernelMatrix;
use crate::params::{ModelParams, NumericsConfig};

/// Relative mass drift tolerated over a run before it is treated as a bug.
pub const MASS_DRIFT_TOL: f64 = 1e-10;

/// Population-weighted mean real wage `(1/Lambda) sum omega lambda h`.
pub fn average_real_wage(lambda: &Field, omega: &Field, lambda_total: f64) -> Result<f64> {
    if !(lambda_total > 0.0) {
        return Err(Error::param("Lambda", format!("must be > 0, got {lambda_total}")));
    }
    lambda.check_same_grid(omega)?;
    let weighted: f64 = lambda.values().iter().zip(omega.values()).map(|(l, o)| l * o).sum();
    Ok(weighted * lambda.grid().weight() / lambda_total)
}

/// `v (omega - omega_avg) lambda`.
pub fn replicator_rhs(lambda: &Field, omega: &Field, params: &ModelParams) -> Result<Field> {
    let avg = average_real_wage(lambda, omega, params.lambda_total)?;
    let v = params.migration_speed;
    let values = lambda
        .values()
        .iter()
        .zip(omega.values())
        .map(|(l, o)| v * (o - avg) * l)
        .collect();
    Ok(Field::from_vec_unchecked(lambda.grid().clone(), values))
}

/// Right-hand side of the population ODE with its equilibrium.
fn psi(
    lambda: &Field,
    phi: &Field,
    kernel: &KernelMatrix,
    params: &ModelParams,
    cfg: &NumericsConfig,
    warm: Option<&Field>,
) -> Result<(Field, EquilibriumState)> {
    let eq = instantaneous_equilibrium(lambda, phi, kernel, params, cfg, warm)?;
    let rhs = replicator_rhs(lambda, &eq.omega, params)?;
    Ok((rhs, eq))
}

fn axpy(base: &Field, dt: f64, dir: &Field) -> Field {
    let values = base.values().iter().zip(dir.values()).map(|(b, d)| b + dt * d).collect();
    Field::from_vec_unchecked(base.grid().clone(), values)
}

fn check_positive(lambda: &Field, step: usize) -> Result<()> {
    match lambda.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        Some((node, &value)) => Err(Error::NegativePopulation { step, node, value }),
        None => Ok(()),
    }
}

/// One step of an integrator together with the equilibrium at its start.
#[derive(Debug, Clone)]
pub struct Step {
    pub lambda: Field,
    pub equilibrium: EquilibriumState,
}

/// Explicit Euler step `lambda + dt * Psi[lambda]`.
pub fn euler_step(
    lambda: &Field,
    phi: &Field,
    kernel: &KernelMatrix,
    params: &ModelParams,
    cfg: &NumericsConfig,
    warm: Option<&Field>,
) -> Result<Step> {
    let (rhs, equilibrium) = psi(lambda, phi, kernel, params, cfg, warm)?;
    let next = axpy(lambda, cfg.dt, &rhs);
    check_positive(&next, 0)?;
    Ok(Step { lambda: next, equilibrium })
}

/// Classical four-stage Runge-Kutta step of the same right-hand side.
pub fn rk4_step(
    lambda: &Field,
    phi: &Field,
    kernel: &KernelMatrix,
    params: &ModelParams,
    cfg: &NumericsConfig,
    warm: Option<&Field>,
) -> Result<Step> {
    let dt = cfg.dt;
    let (k1, equilibrium) = psi(lambda, phi, kernel, params, cfg, warm)?;
    let w = Some(&equilibrium.w);
    let (k2, _) = psi(&axpy(lambda, 0.5 * dt, &k1), phi, kernel, params, cfg, w)?;
    let (k3, _) = psi(&axpy(lambda, 0.5 * dt, &k2), phi, kernel, params, cfg, w)?;
    let (k4, _) = psi(&axpy(lambda, dt, &k3), phi, kernel, params, cfg, w)?;
    let values = (0..lambda.len())
        .map(|i| {
            let incr = k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i];
            lambda.values()[i] + dt / 6.0 * incr
        })
        .collect();
    let next = Field::from_vec_unchecked(lambda.grid().clone(), values);
    check_positive(&next, 0)?;
    Ok(Step { lambda: next, equilibrium })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Rk4,
}

/// Outcome of [`simulate`].
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub final_lambda: Field,
    pub final_equilibrium: EquilibriumState,
    pub steps_taken: usize,
    pub converged: bool,
    /// `(time, lambda)` every `snapshot_stride` steps, plus the initial state.
    pub trajectory_samples: Vec<(f64, Field)>,
    /// Largest relative deviation of the quadrature mass from `Lambda`.
    pub mass_drift: f64,
    /// Per-node change of the last step.
    pub last_change: f64,
    /// Picard sweeps summed over all steps.
    pub wage_sweeps: usize,
}

/// Linear predictor `2 w_n - w_{n-1}` of the next wage, floored at `w_n / 2`.
fn extrapolate(current: &Field, previous: &Field) -> Field {
    let values = current
        .values()
        .iter()
        .zip(previous.values())
        .map(|(c, p)| (2.0 * c - p).max(0.5 * c))
        .collect();
    Field::from_vec_unchecked(current.grid().clone(), values)
}

fn relative_drift(lambda: &Field, total: f64) -> f64 {
    (lambda.integral() - total).abs() / total
}

/// Euler integration until every node changes by less than `stat_tol` in
/// one step, or `max_steps` is reached.
pub fn simulate(
    lambda0: &Field,
    phi: &Field,
    kernel: &KernelMatrix,
    params: &ModelParams,
    cfg: &NumericsConfig,
) -> Result<SimulationResult> {
    simulate_with(lambda0, phi, kernel, params, cfg, |_, _| {})
}

/// [`simulate`] with a callback invoked after every accepted step with
/// `(step, lambda)`.
pub fn simulate_with(
    lambda0: &Field,
    phi: &Field,
    kernel: &KernelMatrix,
    params: &ModelParams,
    cfg: &NumericsConfig,
    mut on_step: impl FnMut(usize, &Field),
) -> Result<SimulationResult> {
    lambda0.check_same_grid(phi)?;
    check_positive(lambda0, 0)?;
    let total = params.lambda_total;
    let mut mass_drift = relative_drift(lambda0, total);
    if mass_drift > MASS_DRIFT_TOL {
        return Err(Error::Degenerate(format!(
            "initial mass {} differs from Lambda = {total}",
            lambda0.integral()
        )));
    }

    let mut samples = Vec::new();
    if cfg.snapshot_stride > 0 {
        samples.push((0.0, lambda0.clone()));
    }
    let mut lambda = lambda0.clone();
    let mut warm: Option<Field> = None;
    let mut prev_w: Option<Field> = None;
    let mut converged = false;
    let mut steps = 0;
    let mut last_change = f64::INFINITY;
    let mut wage_sweeps = 0;

    while steps < cfg.max_steps {
        steps += 1;
        let (rhs, eq) = psi(&lambda, phi, kernel, params, cfg, warm.as_ref())?;
        let next = axpy(&lambda, cfg.dt, &rhs);
        check_positive(&next, steps)?;
        let drift = relative_drift(&next, total);
        if drift > MASS_DRIFT_TOL {
            return Err(Error::MassDrift { step: steps, drift });
        }
        mass_drift = mass_drift.max(drift);
        wage_sweeps += eq.iterations;
        last_change = next.sup_distance(&lambda);
        lambda = next;
        warm = Some(match &prev_w {
            Some(p) => extrapolate(&eq.w, p),
            None => eq.w.clone(),
        });
        prev_w = Some(eq.w);
        on_step(steps, &lambda);
        if cfg.snapshot_stride > 0 && steps % cfg.snapshot_stride == 0 {
            samples.push((steps as f64 * cfg.dt, lambda.clone()));
        }
        if last_change < cfg.stat_tol {
            converged = true;
            break;
        }
    }

    let final_equilibrium = instantaneous_equilibrium(&lambda, phi, kernel, params, cfg, warm.as_ref())?;
    Ok(SimulationResult {
        final_lambda: lambda,
        final_equilibrium,
        steps_taken: steps,
        converged,
        trajectory_samples: samples,
        mass_drift,
        last_change,
        wage_sweeps,
    })
}

/// Fixed number of steps of either scheme, without a stationarity test.
pub fn integrate(
    lambda0: &Field,
    phi: &Field,
    kernel: &KernelMatrix,
    params: &ModelParams,
    cfg: &NumericsConfig,
    scheme: Scheme,
    n_steps: usize,
) -> Result<Field> {
    let mut lambda = lambda0.clone();
    let mut warm: Option<Field> = None;
    for step in 1..=n_steps {
        let out = match scheme {
            Scheme::Euler => euler_step(&lambda, phi, kernel, params, cfg, warm.as_ref()),
            Scheme::Rk4 => rk4_step(&lambda, phi, kernel, params, cfg, warm.as_ref()),
        }
        .map_err(|e| match e {
            Error::NegativePopulation { node, value, .. } => Error::NegativePopulation { step, node, value },
            other => other,
        })?;
        lambda = out.lambda;
        warm = Some(out.equilibrium.w);
    }
    Ok(lambda)
}
