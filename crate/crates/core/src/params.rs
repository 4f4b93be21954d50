//! Model constants and numerics configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Economic and geometric constants of the racetrack economy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Expenditure share on manufactures, `0 < mu < 1`.
    pub mu: f64,
    /// Elasticity of substitution, `sigma > 1`.
    pub sigma: f64,
    /// Fixed input of mobile workers per firm.
    #[serde(rename = "F")]
    pub fixed_input: f64,
    /// Transport-cost rate per unit distance.
    pub tau: f64,
    /// Migration speed.
    #[serde(rename = "v")]
    pub migration_speed: f64,
    /// Total mobile population.
    #[serde(rename = "Lambda")]
    pub lambda_total: f64,
    /// Total immobile population.
    #[serde(rename = "Phi")]
    pub phi_total: f64,
    /// Radius of the ring.
    pub rho: f64,
}

impl Default for ModelParams {
    /// `Phi = Lambda = F = v = rho = 1`, `mu = 0.6`, `sigma = 3`, `tau = 1`.
    fn default() -> Self {
        Self {
            mu: 0.6,
            sigma: 3.0,
            fixed_input: 1.0,
            tau: 1.0,
            migration_speed: 1.0,
            lambda_total: 1.0,
            phi_total: 1.0,
            rho: 1.0,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {value}")))
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::param("mu", format!("must satisfy 0 < mu < 1, got {}", self.mu)));
        }
        if !(self.sigma.is_finite() && self.sigma > 1.0) {
            return Err(Error::param("sigma", format!("must satisfy sigma > 1, got {}", self.sigma)));
        }
        positive("F", self.fixed_input)?;
        positive("tau", self.tau)?;
        positive("v", self.migration_speed)?;
        positive("Lambda", self.lambda_total)?;
        positive("Phi", self.phi_total)?;
        positive("rho", self.rho)?;
        Ok(())
    }

    /// `alpha = tau (sigma - 1)`, the decay rate of `T^{1-sigma}`.
    pub fn alpha(&self) -> f64 {
        self.tau * (self.sigma - 1.0)
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Circumference `2 pi rho`.
    pub fn circumference(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.rho
    }
}

/// Knobs of the discretized solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Euler time step.
    pub dt: f64,
    /// Sup-norm tolerance of the wage fixed-point iteration.
    pub fp_tol: f64,
    /// Iteration cap of the wage fixed point.
    pub fp_max_iter: usize,
    /// Per-node absolute change below which a step counts as stationary.
    pub stat_tol: f64,
    /// Time-step cap of a simulation.
    pub max_steps: usize,
    /// Seed of the initial perturbation.
    pub seed: u64,
    /// Relative amplitude of the initial perturbation.
    pub perturb_amplitude: f64,
    /// Keep a trajectory snapshot every this many steps (0 disables).
    pub snapshot_stride: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            fp_tol: 1e-12,
            fp_max_iter: 10_000,
            stat_tol: 1e-10,
            max_steps: 10_000_000,
            seed: 42,
            perturb_amplitude: 1e-3,
            snapshot_stride: 0,
        }
    }
}

impl NumericsConfig {
    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("fp_tol", self.fp_tol)?;
        positive("stat_tol", self.stat_tol)?;
        if self.fp_max_iter < 1 {
            return Err(Error::param("fp_max_iter", "must be >= 1"));
        }
        if self.max_steps < 1 {
            return Err(Error::param("max_steps", "must be >= 1"));
        }
        if !(self.perturb_amplitude >= 0.0 && self.perturb_amplitude < 1.0) {
            return Err(Error::param(
                "perturb_amplitude",
                format!("must satisfy 0 <= delta < 1, got {}", self.perturb_amplitude),
            ));
        }
        Ok(())
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ModelParams::default().validate().unwrap();
        NumericsConfig::default().validate().unwrap();
        assert_eq!(ModelParams::default().alpha(), 2.0);
    }

    #[test]
    fn rejects_out_of_range() {
        let p = ModelParams { sigma: 0.5, ..Default::default() };
        match p.validate() {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "sigma"),
            other => panic!("{other:?}"),
        }
        assert!(ModelParams { mu: 1.0, ..Default::default() }.validate().is_err());
        assert!(ModelParams { tau: 0.0, ..Default::default() }.validate().is_err());
        let c = NumericsConfig { perturb_amplitude: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
