//! Instantaneous equilibrium for a frozen mobile-population field.
//!
//! Given `lambda` and `phi` the solver evaluates the price index
//! `G = [(1/F) K lambda]^{1/(1-sigma)}`, then runs plain Picard iteration on
//! the linear wage equation
//!
//! ```text
//! w_i = mu/(sigma F) * sum_j (w_j lambda_j + phi_j) G_j^{sigma-1} K_ij h
//! ```
//!
//! and finishes with income `Y = w lambda + phi` and real wage `w G^{-mu}`.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::kernel::KernelMatrix;
use crate::params::{ModelParams, NumericsConfig};

/// Solution of the instantaneous equilibrium.
#[derive(Debug, Clone)]
pub struct EquilibriumState {
    pub w: Field,
    pub price_index: Field,
    pub income: Field,
    pub omega: Field,
    /// Picard sweeps used by the wage solver.
    pub iterations: usize,
    /// Last sup-norm change of the wage iterate.
    pub residual: f64,
}

/// Wage fixed point together with its iteration report.
#[derive(Debug, Clone)]
pub struct WageSolution {
    pub w: Field,
    pub iterations: usize,
    pub residual: f64,
    /// Sup-norm change after every sweep, only filled by [`solve_wage_traced`].
    pub history: Vec<f64>,
}

fn check_mass(name: &'static str, f: &Field) -> Result<f64> {
    f.check_nonnegative()?;
    let mass = f.integral();
    if !(mass > 0.0) {
        return Err(Error::Degenerate(format!("{name} has zero total mass")));
    }
    Ok(mass)
}

/// `K lambda / F`, i.e. `G^{1-sigma}`.
fn price_base(lambda: &Field, kernel: &KernelMatrix, params: &ModelParams) -> Vec<f64> {
    let mut g = kernel.convolve(lambda.values());
    let inv_f = 1.0 / params.fixed_input;
    g.iter_mut().for_each(|v| *v *= inv_f);
    g
}

pub fn price_index(lambda: &Field, kernel: &KernelMatrix, params: &ModelParams) -> Result<Field> {
    check_mass("lambda", lambda)?;
    let exponent = 1.0 / (1.0 - params.sigma);
    let g = price_base(lambda, kernel, params);
    Ok(Field::from_vec_unchecked(
        lambda.grid().clone(),
        g.into_iter().map(|v| v.powf(exponent)).collect(),
    ))
}

/// Constant wage of the homogeneous problem with the same masses; the cold start.
pub fn homogeneous_wage(lambda_mass: f64, phi_mass: f64, params: &ModelParams) -> f64 {
    let ratio = params.mu / params.sigma;
    ratio * (phi_mass / lambda_mass) / (1.0 - ratio)
}

struct WageProblem<'a> {
    lambda: &'a [f64],
    phi: &'a [f64],
    inv_base: Vec<f64>,
    kernel: &'a KernelMatrix,
    coef: f64,
}

impl WageProblem<'_> {
    fn solve(
        &self,
        mut w: Vec<f64>,
        cfg: &NumericsConfig,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<(Vec<f64>, usize, f64)> {
        let n = w.len();
        let mut src = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut scratch = Vec::with_capacity(2 * n);
        let mut residual = f64::INFINITY;
        for sweep in 1..=cfg.fp_max_iter {
            for j in 0..n {
                src[j] = (w[j] * self.lambda[j] + self.phi[j]) * self.inv_base[j];
            }
            self.kernel.convolve_into(&src, &mut scratch, &mut next);
            residual = 0.0;
            for (nx, old) in next.iter_mut().zip(&w) {
                *nx *= self.coef;
                residual = f64::max(residual, (*nx - old).abs());
            }
            std::mem::swap(&mut w, &mut next);
            if let Some(t) = trace.as_deref_mut() {
                t.push(residual);
            }
            if residual < cfg.fp_tol {
                return Ok((w, sweep, residual));
            }
        }
        Err(Error::NoConvergence {
            iterations: cfg.fp_max_iter,
            residual,
        })
    }
}

fn wage_impl(
    lambda: &Field,
    phi: &Field,
    base: &[f64],
    kernel: &KernelMatrix,
    params: &ModelParams,
    cfg: &NumericsConfig,
    warm: Option<&Field>,
    trace: Option<&mut Vec<f64>>,
) -> Result<(Vec<f64>, usize, f64)> {
    let start = match warm {
        Some(w0) => {
            w0.check_same_grid(lambda)?;
            w0.values().to_vec()
        }
        None => {
            let w0 = homogeneous_wage(lambda.integral(), phi.integral(), params);
            vec![w0; lambda.len()]
        }
    };
    let problem = WageProblem {
        lambda: lambda.values(),
        phi: phi.values(),
        inv_base: base.iter().map(|b| 1.0 / b).collect(),
        kernel,
        coef: params.mu / (params.sigma * params.fixed_input),
    };
    problem.solve(start, cfg, trace)
}

/// Solves the wage equation by Picard iteration, optionally warm-started.
pub fn solve_wage(
    lambda: &Field,
    phi: &Field,
    kernel: &KernelMatrix,
    params: &ModelParams,
    cfg: &NumericsConfig,
    warm: Option<&Field>,
) -> Result<WageSolution> {
    solve_wage_inner(lambda, phi, kernel, params, cfg, warm, false)
}

/// Like [`solve_wage`] but records the residual of every sweep.
pub fn solve_wage_traced(
    lambda: &Field,
    phi: &Field,
    kernel: &KernelMatrix,
    params: &ModelParams,
    cfg: &NumericsConfig,
    warm: Option<&Field>,
) -> Result<WageSolution> {
    solve_wage_inner(lambda, phi, kernel, params, cfg, warm, true)
}

fn solve_wage_inner(
    lambda: &Field,
    phi: &Field,
    kernel: &KernelMatrix,
    params: &ModelParams,
    cfg: &NumericsConfig,
    warm: Option<&Field>,
    traced: bool,
) -> Result<WageSolution> {
    lambda.check_same_grid(phi)?;
    check_mass("lambda", lambda)?;
    check_mass("phi", phi)?;
    let base = price_base(lambda, kernel, params);
    let mut history = Vec::new();
    let (w, iterations, residual) = wage_impl(
        lambda,
        phi,
        &base,
        kernel,
        params,
        cfg,
        warm,
        traced.then_some(&mut history),
    )?;
    Ok(WageSolution {
        w: Field::from_vec_unchecked(lambda.grid().clone(), w),
        iterations,
        residual,
        history,
    })
}

/// Sup norm of `w - E[w]`, the defect of the wage equation at `w`.
pub fn wage_equation_residual(
    lambda: &Field,
    phi: &Field,
    w: &Field,
    kernel: &KernelMatrix,
    params: &ModelParams,
) -> f64 {
    let base = price_base(lambda, kernel, params);
    let src: Vec<f64> = (0..lambda.len())
        .map(|j| (w.values()[j] * lambda.values()[j] + phi.values()[j]) / base[j])
        .collect();
    let coef = params.mu / (params.sigma * params.fixed_input);
    kernel
        .convolve(&src)
        .iter()
        .zip(w.values())
        .map(|(e, wi)| (coef * e - wi).abs())
        .fold(0.0, f64::max)
}

/// `Y = w lambda + phi`.
pub fn income(lambda: &Field, w: &Field, phi: &Field) -> Field {
    let values = lambda
        .values()
        .iter()
        .zip(w.values())
        .zip(phi.values())
        .map(|((l, w), p)| w * l + p)
        .collect();
    Field::from_vec_unchecked(lambda.grid().clone(), values)
}

/// `omega = w G^{-mu}`.
pub fn real_wage(w: &Field, price_index: &Field, mu: f64) -> Result<Field> {
    w.check_same_grid(price_index)?;
    if let Some((node, &value)) = price_index.values().iter().enumerate().find(|(_, g)| !(**g > 0.0)) {
        return Err(Error::InvalidField { node, value });
    }
    let values = w
        .values()
        .iter()
        .zip(price_index.values())
        .map(|(w, g)| w * g.powf(-mu))
        .collect();
    Ok(Field::from_vec_unchecked(w.grid().clone(), values))
}

/// Price index, wage, income and real wage for a frozen `lambda`.
pub fn instantaneous_equilibrium(
    lambda: &Field,
    phi: &Field,
    kernel: &KernelMatrix,
    params: &ModelParams,
    cfg: &NumericsConfig,
    warm: Option<&Field>,
) -> Result<EquilibriumState> {
    lambda.check_same_grid(phi)?;
    check_mass("lambda", lambda)?;
    check_mass("phi", phi)?;
    let base = price_base(lambda, kernel, params);
    let (w, iterations, residual) = wage_impl(lambda, phi, &base, kernel, params, cfg, warm, None)?;

    let grid = lambda.grid().clone();
    let exponent = 1.0 / (1.0 - params.sigma);
    // G^{-mu} = base^{mu/(sigma-1)}
    let deflator = params.mu / (params.sigma - 1.0);
    let (g, omega): (Vec<f64>, Vec<f64>) = base
        .iter()
        .zip(&w)
        .map(|(b, w)| {
            let ln_b = b.ln();
            ((exponent * ln_b).exp(), w * (deflator * ln_b).exp())
        })
        .unzip();
    let w = Field::from_vec_unchecked(grid.clone(), w);
    let y = income(lambda, &w, phi);
    Ok(EquilibriumState {
        w,
        price_index: Field::from_vec_unchecked(grid.clone(), g),
        income: y,
        omega: Field::from_vec_unchecked(grid, omega),
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, perturbed_uniform, uniform_field};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn setup(tau: f64) -> (ModelParams, std::sync::Arc<crate::grid::Grid>, KernelMatrix) {
        let params = ModelParams { tau, ..Default::default() };
        let grid = make_grid(255, 1.0).unwrap();
        let kernel = KernelMatrix::build(&grid, &params);
        (params, grid, kernel)
    }

    #[test]
    fn uniform_price_index_matches_closed_form() {
        // Same Riemann sum as the solver, so compare with the discrete row sum.
        let (params, grid, kernel) = setup(1.0);
        let lambda = uniform_field(&grid, 1.0).unwrap();
        let g = price_index(&lambda, &kernel, &params).unwrap();
        let lbar = 1.0 / (2.0 * PI);
        let expect = (lbar * kernel.row_integral()).powf(-0.5);
        assert!(g.spread() < 1e-12);
        assert_relative_eq!(g.values()[0], expect, max_relative = 1e-13);
        // Continuum value 2.5090 differs only by the quadrature error.
        assert_relative_eq!(g.values()[0], 2.5090, max_relative = 2e-4);
    }

    #[test]
    fn price_index_homogeneity() {
        let (params, grid, kernel) = setup(1.0);
        let cfg = NumericsConfig { perturb_amplitude: 0.3, ..Default::default() };
        let lambda = perturbed_uniform(&grid, 1.0, &cfg).unwrap();
        let g1 = price_index(&lambda, &kernel, &params).unwrap();
        let g3 = price_index(&lambda.scaled(3.0), &kernel, &params).unwrap();
        let factor = 3f64.powf(1.0 / (1.0 - params.sigma));
        for (a, b) in g1.values().iter().zip(g3.values()) {
            assert_relative_eq!(a * factor, *b, max_relative = 1e-13);
        }
    }

    #[test]
    fn zero_mass_rejected() {
        let (params, grid, kernel) = setup(1.0);
        let zero = Field::constant(grid, 0.0);
        assert!(matches!(price_index(&zero, &kernel, &params), Err(Error::Degenerate(_))));
    }

    #[test]
    fn uniform_wage_is_quarter() {
        let (params, grid, kernel) = setup(1.0);
        let cfg = NumericsConfig::default();
        let lambda = uniform_field(&grid, 1.0).unwrap();
        let phi = uniform_field(&grid, 1.0).unwrap();
        let sol = solve_wage(&lambda, &phi, &kernel, &params, &cfg, None).unwrap();
        for w in sol.w.values() {
            assert_relative_eq!(*w, 0.25, max_relative = 1e-12);
        }
        assert!(sol.iterations <= 1);

        let lambda2 = uniform_field(&grid, 2.0).unwrap();
        let phi2 = uniform_field(&grid, 2.0).unwrap();
        let sol2 = solve_wage(&lambda2, &phi2, &kernel, &params, &cfg, None).unwrap();
        assert_relative_eq!(sol2.w.values()[7], 0.25, max_relative = 1e-12);
    }

    #[test]
    fn warm_start_from_solution_is_one_sweep() {
        let (params, grid, kernel) = setup(0.7);
        let cfg = NumericsConfig { perturb_amplitude: 0.2, ..Default::default() };
        let lambda = perturbed_uniform(&grid, 1.0, &cfg).unwrap();
        let phi = uniform_field(&grid, 1.0).unwrap();
        let cold = solve_wage(&lambda, &phi, &kernel, &params, &cfg, None).unwrap();
        assert!(cold.iterations > 1);
        let warm = solve_wage(&lambda, &phi, &kernel, &params, &cfg, Some(&cold.w)).unwrap();
        assert_eq!(warm.iterations, 1);
        assert!(warm.residual < cfg.fp_tol);
    }

    #[test]
    fn income_and_real_wage() {
        let grid = make_grid(8, 1.0).unwrap();
        let lambda = Field::new(grid.clone(), vec![0.0; 8]).unwrap();
        let w = Field::constant(grid.clone(), 0.3);
        let phi = Field::constant(grid.clone(), 0.2);
        assert_eq!(income(&lambda, &w, &phi).values(), phi.values());
        let lam = Field::constant(grid.clone(), 0.5);
        let zero_w = Field::constant(grid.clone(), 0.0);
        assert_eq!(income(&lam, &zero_w, &phi).values(), phi.values());

        let ones = Field::constant(grid.clone(), 1.0);
        assert_eq!(real_wage(&w, &ones, 0.6).unwrap().values(), w.values());
        let g = Field::constant(grid.clone(), 2.7);
        assert_eq!(real_wage(&w, &g, 0.0).unwrap().values(), w.values());
        let bad = Field::constant(grid, -1.0);
        assert!(real_wage(&w, &bad, 0.6).is_err());
    }

    #[test]
    fn uniform_equilibrium_tuple() {
        let (params, grid, kernel) = setup(1.0);
        let cfg = NumericsConfig::default();
        let lambda = uniform_field(&grid, 1.0).unwrap();
        let phi = uniform_field(&grid, 1.0).unwrap();
        let eq = instantaneous_equilibrium(&lambda, &phi, &kernel, &params, &cfg, None).unwrap();
        assert_relative_eq!(eq.income.values()[0], 1.25 / (2.0 * PI), max_relative = 1e-12);
        assert_relative_eq!(eq.omega.values()[3], 0.143_960, max_relative = 2e-4);
        for f in [&eq.w, &eq.price_index, &eq.income, &eq.omega] {
            assert!(f.spread() < 1e-12);
            assert!(f.min() > 0.0);
        }
    }

    #[test]
    fn equilibrium_postconditions_on_perturbed_input() {
        let (params, grid, kernel) = setup(1.3);
        let cfg = NumericsConfig { perturb_amplitude: 0.5, seed: 3, ..Default::default() };
        let lambda = perturbed_uniform(&grid, 1.0, &cfg).unwrap();
        let phi = uniform_field(&grid, 1.0).unwrap();
        let eq = instantaneous_equilibrium(&lambda, &phi, &kernel, &params, &cfg, None).unwrap();
        assert!(eq.residual < cfg.fp_tol);
        assert!(wage_equation_residual(&lambda, &phi, &eq.w, &kernel, &params) < cfg.fp_tol);
        let y = income(&lambda, &eq.w, &phi);
        assert_eq!(y.values(), eq.income.values());
        let om = real_wage(&eq.w, &eq.price_index, params.mu).unwrap();
        for (a, b) in om.values().iter().zip(eq.omega.values()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-13);
        }
    }

    #[test]
    fn rotation_equivariance_is_exact() {
        let (params, grid, kernel) = setup(0.9);
        let cfg = NumericsConfig { perturb_amplitude: 0.4, seed: 11, ..Default::default() };
        let lambda = perturbed_uniform(&grid, 1.0, &cfg).unwrap();
        let phi = perturbed_uniform(&grid, 1.0, &NumericsConfig { seed: 12, ..cfg }).unwrap();
        let m = 37;
        // Warm start from the same constant so the cold start is not mass-dependent.
        let w0 = Field::constant(grid.clone(), 0.25);
        let a = instantaneous_equilibrium(&lambda, &phi, &kernel, &params, &cfg, Some(&w0)).unwrap();
        let b = instantaneous_equilibrium(&lambda.rotated(m), &phi.rotated(m), &kernel, &params, &cfg, Some(&w0))
            .unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.w.rotated(m).values(), b.w.values());
        assert_eq!(a.omega.rotated(m).values(), b.omega.values());
        assert_eq!(a.price_index.rotated(m).values(), b.price_index.values());
    }
}
