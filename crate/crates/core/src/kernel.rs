//! Ring distance, iceberg transport cost and the discounted-distance kernel.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::ModelParams;

/// Arc-length distance between two points of the ring of radius `rho`.
///
/// Angles outside `[-pi, pi]` are reduced modulo `2 pi` first.
pub fn ring_distance(theta1: f64, theta2: f64, rho: f64) -> f64 {
    let gap = (theta1 - theta2).abs() % (2.0 * PI);
    rho * gap.min(2.0 * PI - gap)
}

/// Iceberg cost `T = exp(tau * d)`.
pub fn transport_cost(tau: f64, distance: f64) -> f64 {
    (tau * distance).exp()
}

/// `T(x_i, y_j)^{1 - sigma} = exp(-alpha d(x_i, y_j))` on every pair of nodes.
///
/// The matrix is circulant, so only the first row is stored:
/// `entry(i, j) = coeff[(j - i) mod N]` with `coeff[m] = coeff[N - m]`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    coeff: Vec<f64>,
    alpha: f64,
    t_min: f64,
    t_max: f64,
    grid: Arc<Grid>,
}

impl KernelMatrix {
    pub fn build(grid: &Arc<Grid>, params: &ModelParams) -> Self {
        let n = grid.n_nodes();
        let alpha = params.alpha();
        let coeff = (0..n)
            .map(|m| {
                let hops = m.min(n - m) as f64;
                (-alpha * grid.rho() * hops * grid.dtheta()).exp()
            })
            .collect();
        Self {
            coeff,
            alpha,
            t_min: 1.0,
            t_max: (params.tau * grid.rho() * PI).exp(),
            grid: grid.clone(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n_nodes(&self) -> usize {
        self.coeff.len()
    }

    /// Kernel entry between nodes `i` and `j`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.coeff.len();
        self.coeff[(j + n - i % n) % n]
    }

    /// Row `i` as a dense vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.entry(i, j)).collect()
    }

    /// Offsets `coeff[m] = entry(i, i + m)`.
    pub fn offsets(&self) -> &[f64] {
        &self.coeff
    }

    /// Quadrature `out_i = sum_j entry(i, j) x_j * weight`.
    ///
    /// `scratch` must hold `2N` values. The sum for node `i` runs over the
    /// offset `m = j - i` in a fixed order, so a rotated input yields an
    /// exactly rotated output.
    pub fn convolve_into(&self, x: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        let n = self.coeff.len();
        assert_eq!(x.len(), n);
        assert_eq!(out.len(), n);
        scratch.clear();
        scratch.extend_from_slice(x);
        scratch.extend_from_slice(x);
        convolve_rows(&self.coeff, scratch, out, self.grid.weight());
    }

    pub fn convolve(&self, x: &[f64]) -> Vec<f64> {
        let mut scratch = Vec::with_capacity(2 * x.len());
        let mut out = vec![0.0; x.len()];
        self.convolve_into(x, &mut scratch, &mut out);
        out
    }

    /// Weighted row sum, the discrete counterpart of
    /// [`kernel_integral_closed_form`]. Identical for every row.
    pub fn row_integral(&self) -> f64 {
        self.coeff.iter().sum::<f64>() * self.grid.weight()
    }
}

/// `out_i = <coeff, doubled[i..i + N]> * weight` for every row.
///
/// The AVX path performs the same multiplies and adds in the same order (no
/// fused multiply-add), so both paths return identical bits.
fn convolve_rows(coeff: &[f64], doubled: &[f64], out: &mut [f64], weight: f64) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { convolve_rows_avx(coeff, doubled, out, weight) };
        }
    }
    convolve_rows_generic(coeff, doubled, out, weight)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn convolve_rows_avx(coeff: &[f64], doubled: &[f64], out: &mut [f64], weight: f64) {
    use std::arch::x86_64::*;
    let n = coeff.len();
    let body = n - n % 8;
    let c = coeff.as_ptr();
    for (i, o) in out.iter_mut().enumerate() {
        let x = doubled[i..i + n].as_ptr();
        let mut lo = _mm256_setzero_pd();
        let mut hi = _mm256_setzero_pd();
        let mut j = 0;
        while j < body {
            lo = _mm256_add_pd(lo, _mm256_mul_pd(_mm256_loadu_pd(c.add(j)), _mm256_loadu_pd(x.add(j))));
            hi = _mm256_add_pd(hi, _mm256_mul_pd(_mm256_loadu_pd(c.add(j + 4)), _mm256_loadu_pd(x.add(j + 4))));
            j += 8;
        }
        let mut acc = [0.0f64; 8];
        _mm256_storeu_pd(acc.as_mut_ptr(), lo);
        _mm256_storeu_pd(acc.as_mut_ptr().add(4), hi);
        *o = reduce_lanes(&acc, &coeff[body..], &doubled[i + body..i + n]) * weight;
    }
}

#[inline(always)]
fn reduce_lanes(acc: &[f64; 8], ra: &[f64], rb: &[f64]) -> f64 {
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline(always)]
fn convolve_rows_generic(coeff: &[f64], doubled: &[f64], out: &mut [f64], weight: f64) {
    let n = coeff.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot_lanes(coeff, &doubled[i..i + n]) * weight;
    }
}

/// Eight-lane dot product; lane order depends only on the position in the slice.
#[inline(always)]
fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    reduce_lanes(&acc, ra, rb)
}

/// `int_C exp(-alpha d(x, y)) dy = 2 (1 - exp(-alpha rho pi)) / alpha`.
pub fn kernel_integral_closed_form(alpha: f64, rho: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
    }
    if !(rho > 0.0) {
        return Err(Error::param("rho", format!("must be > 0, got {rho}")));
    }
    Ok(-2.0 * (-alpha * rho * PI).exp_m1() / alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;

    #[test]
    fn distances() {
        assert_eq!(ring_distance(0.3, 0.3, 5.0), 0.0);
        assert_relative_eq!(ring_distance(PI / 2.0, -PI / 2.0, 1.0), PI);
        assert_relative_eq!(ring_distance(3.0 * PI / 4.0, -3.0 * PI / 4.0, 1.0), PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(ring_distance(0.1, 0.4, 2.0), ring_distance(0.4, 0.1, 2.0));
    }

    #[test]
    fn kernel_structure() {
        let grid = make_grid(9, 1.0).unwrap();
        let params = ModelParams { sigma: 3.0, tau: 1.0, ..Default::default() };
        let k = KernelMatrix::build(&grid, &params);
        let floor = (-k.alpha() * PI).exp();
        for i in 0..9 {
            assert_eq!(k.entry(i, i), 1.0);
            for j in 0..9 {
                assert_eq!(k.entry(i, j), k.entry(j, i));
                assert_eq!(k.entry(i, j), k.entry((i + 1) % 9, (j + 1) % 9));
                assert!(k.entry(i, j) <= 1.0 && k.entry(i, j) >= floor);
                let d = ring_distance(grid.theta()[i], grid.theta()[j], 1.0);
                assert_relative_eq!(k.entry(i, j), (-k.alpha() * d).exp(), max_relative = 1e-14);
            }
        }
        assert_relative_eq!(k.t_max(), PI.exp());
    }

    #[test]
    fn antipodal_entry() {
        // Even N puts a node exactly opposite node 0.
        let grid = make_grid(256, 1.0).unwrap();
        let k = KernelMatrix::build(&grid, &ModelParams { sigma: 3.0, tau: 1.0, ..Default::default() });
        assert_relative_eq!(k.entry(0, 128), (-2.0 * PI).exp(), max_relative = 1e-14);
        assert_relative_eq!(k.entry(0, 128), 1.867_442_731_707_988_8e-3, max_relative = 1e-12);
    }

    #[test]
    fn rows_sum_alike() {
        let grid = make_grid(31, 1.3).unwrap();
        let k = KernelMatrix::build(&grid, &ModelParams::default());
        let sums = k.convolve(&vec![1.0; 31]);
        for s in &sums {
            assert_relative_eq!(*s, sums[0], max_relative = 1e-14);
        }
        assert_relative_eq!(sums[0], k.row_integral(), max_relative = 1e-14);
    }

    #[test]
    fn closed_form() {
        assert_relative_eq!(
            kernel_integral_closed_form(2.0, 1.0).unwrap(),
            1.0 - (-2.0 * PI).exp(),
            max_relative = 1e-15
        );
        let mut prev = f64::INFINITY;
        for a in [0.1, 1.0, 10.0, 100.0, 1e4] {
            let v = kernel_integral_closed_form(a, 1.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-3);
        assert!(kernel_integral_closed_form(0.0, 1.0).is_err());
    }

    #[test]
    fn row_paths_agree_bitwise() {
        for n in [3, 7, 8, 9, 100, 255] {
            let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..2 * n).map(|i| (i as f64 * 1.3).cos() / 3.0).collect();
            let mut fast = vec![0.0; n];
            let mut plain = vec![0.0; n];
            convolve_rows(&a, &b, &mut fast, 0.7);
            convolve_rows_generic(&a, &b, &mut plain, 0.7);
            for (x, y) in fast.iter().zip(&plain) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn rotated_input_rotates_output_exactly() {
        let grid = make_grid(17, 1.0).unwrap();
        let k = KernelMatrix::build(&grid, &ModelParams::default());
        let x: Vec<f64> = (0..17).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let y = k.convolve(&x);
        let xr: Vec<f64> = (0..17).map(|i| x[(i + 17 - 3) % 17]).collect();
        let yr = k.convolve(&xr);
        for i in 0..17 {
            assert_eq!(yr[i], y[(i + 17 - 3) % 17]);
        }
    }
}
