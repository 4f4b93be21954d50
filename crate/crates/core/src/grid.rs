//! Uniform periodic discretization of the ring and fields living on it.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::NumericsConfig;

/// `N` equally spaced nodes on `[-pi, pi)`, node `i` at `-pi + i * 2pi/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_nodes: usize,
    rho: f64,
    dtheta: f64,
    weight: f64,
    theta: Vec<f64>,
}

impl Grid {
    pub fn new(n_nodes: usize, rho: f64) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::param("grid", format!("need at least 3 nodes, got {n_nodes}")));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::param("rho", format!("must be > 0, got {rho}")));
        }
        let dtheta = 2.0 * PI / n_nodes as f64;
        let theta = (0..n_nodes).map(|i| -PI + i as f64 * dtheta).collect();
        Ok(Self {
            n_nodes,
            rho,
            dtheta,
            weight: rho * dtheta,
            theta,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    /// Quadrature weight `rho * dtheta` shared by every node.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Node index reduced modulo `N`; accepts any signed offset.
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n_nodes as isize) as usize
    }

    /// Riemann-sum integral of `values` over the ring.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.weight
    }

    pub fn circumference(&self) -> f64 {
        2.0 * PI * self.rho
    }
}

/// Shorthand for [`Grid::new`] returning a shareable handle.
pub fn make_grid(n_nodes: usize, rho: f64) -> Result<Arc<Grid>> {
    Grid::new(n_nodes, rho).map(Arc::new)
}

/// Real-valued function sampled at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    grid: Arc<Grid>,
}

impl Field {
    /// Wraps `values`, rejecting wrong lengths and non-finite entries.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidField { node, value });
        }
        Ok(Self { values, grid })
    }

    pub(crate) fn from_vec_unchecked(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_nodes());
        Self { values, grid }
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let values = vec![value; grid.n_nodes()];
        Self { values, grid }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a periodically wrapped index.
    pub fn at(&self, i: isize) -> f64 {
        self.values[self.grid.wrap(i)]
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max - min`.
    pub fn spread(&self) -> f64 {
        self.max() - self.min()
    }

    /// Sup norm of the difference with another field on the same grid.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Shifts node values by `m` positions: `out[i] = self[i - m]`.
    pub fn rotated(&self, m: isize) -> Field {
        let n = self.values.len() as isize;
        let values = (0..n).map(|i| self.values[(i - m).rem_euclid(n) as usize]).collect();
        Field::from_vec_unchecked(self.grid.clone(), values)
    }

    pub fn scaled(&self, c: f64) -> Field {
        let values = self.values.iter().map(|v| v * c).collect();
        Field::from_vec_unchecked(self.grid.clone(), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Field::from_vec_unchecked(self.grid.clone(), values)
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.values.len() != other.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_nonnegative(&self) -> Result<()> {
        match self.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            Some((node, &value)) => Err(Error::InvalidField { node, value }),
            None => Ok(()),
        }
    }
}

/// Constant density `total / (2 pi rho)`, whose integral over the ring is `total`.
pub fn uniform_field(grid: &Arc<Grid>, total: f64) -> Result<Field> {
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::param("total", format!("mass must be > 0, got {total}")));
    }
    Ok(Field::constant(grid.clone(), total / grid.circumference()))
}

/// Uniform density with seeded multiplicative noise of relative size
/// `cfg.perturb_amplitude`, projected to zero mean and renormalized so the
/// quadrature mass is exactly `total`.
pub fn perturbed_uniform(grid: &Arc<Grid>, total: f64, cfg: &NumericsConfig) -> Result<Field> {
    let delta = cfg.perturb_amplitude;
    if !(delta >= 0.0 && delta < 1.0) {
        return Err(Error::param(
            "perturb_amplitude",
            format!("must satisfy 0 <= delta < 1, got {delta}"),
        ));
    }
    let base = uniform_field(grid, total)?;
    if delta == 0.0 {
        return Ok(base);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut eps: Vec<f64> = (0..grid.n_nodes()).map(|_| rng.random_range(-delta..=delta)).collect();
    let shift = eps.iter().sum::<f64>() / eps.len() as f64;
    eps.iter_mut().for_each(|e| *e -= shift);

    let level = total / grid.circumference();
    let mut values: Vec<f64> = eps.iter().map(|e| level * (1.0 + e)).collect();
    let scale = total / grid.integrate(&values);
    values.iter_mut().for_each(|v| *v *= scale);

    if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::InvalidField { node, value });
    }
    Field::new(grid.clone(), values)
}
