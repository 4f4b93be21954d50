//! A-priori constants behind the existence theory: the fixed-point
//! contraction modulus, range bounds of `G`, `w`, `omega`, `Psi`, and the
//! Lipschitz chain. All depend only on the parameters and the ball radius `b`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// `T_min` and `T_max` of `T = exp(tau d)` on the ring.
pub fn transport_bounds(params: &ModelParams) -> (f64, f64) {
    (1.0, (params.tau * params.rho * PI).exp())
}

/// `(mu/sigma) (T_max/T_min)^{sigma-1} Lambda2/Lambda1`; the wage map is a
/// sup-norm contraction with this modulus whenever it is below one.
pub fn contraction_modulus(params: &ModelParams, lambda1: f64, lambda2: f64) -> Result<f64> {
    if !(lambda1 > 0.0) {
        return Err(Error::param("Lambda1", format!("must be > 0, got {lambda1}")));
    }
    if !(lambda2 >= lambda1) {
        return Err(Error::param("Lambda2", format!("must be >= Lambda1, got {lambda2}")));
    }
    let (t_min, t_max) = transport_bounds(params);
    Ok(contraction_from_ratio(params, t_max / t_min, lambda2 / lambda1))
}

/// Same modulus from the two ratios directly.
pub fn contraction_from_ratio(params: &ModelParams, t_ratio: f64, mass_ratio: f64) -> f64 {
    params.mu / params.sigma * t_ratio.powf(params.sigma - 1.0) * mass_ratio
}

/// Bounds valid on the ball `||lambda - lambda0||_1 <= b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryBounds {
    pub b: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub contraction_modulus: f64,
    pub g_lower: f64,
    pub g_upper: f64,
    pub w_upper: f64,
    pub omega_upper: f64,
    /// Bound on `||Psi[lambda]||_1`.
    pub k_bound: f64,
    pub c_g: f64,
    pub l_g: f64,
    pub l_w: f64,
    pub l_omega: f64,
    /// Lipschitz constant of `Psi` in `L^1`.
    pub l_psi: f64,
    /// `b / K`, one of the local existence horizons (the third, `a`, is free).
    pub horizon_b_over_k: f64,
    /// `1 / L`.
    pub horizon_inv_l: f64,
}

/// Why [`apriori_bounds`] could not produce constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NotApplicable {
    pub violated: String,
    pub contraction_modulus: Option<f64>,
}

impl std::fmt::Display for NotApplicable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "bounds not applicable: {}", self.violated)
    }
}

pub fn apriori_bounds(params: &ModelParams, b: f64) -> std::result::Result<TheoryBounds, NotApplicable> {
    let lam = params.lambda_total;
    if !(b > 0.0 && b < lam) {
        return Err(NotApplicable {
            violated: format!("0 < b < Lambda (b = {b}, Lambda = {lam})"),
            contraction_modulus: None,
        });
    }
    let (mu, s, f, phi, v) = (
        params.mu,
        params.sigma,
        params.fixed_input,
        params.phi_total,
        params.migration_speed,
    );
    let (t_min, t_max) = transport_bounds(params);
    let (l1, l2) = (lam - b, lam + b);
    let t_pow = (t_max / t_min).powf(s - 1.0);
    let q = mu / s * t_pow * l2 / l1;
    if !(q < 1.0) {
        return Err(NotApplicable {
            violated: format!(
                "(mu/sigma)(Tmax/Tmin)^(sigma-1)(Lambda+b)/(Lambda-b) < 1 (value {q:.6e})"
            ),
            contraction_modulus: Some(q),
        });
    }

    let f_root = f.powf(1.0 / (s - 1.0));
    let g_lower = f_root * t_min * l2.powf(1.0 / (1.0 - s));
    let g_upper = f_root * t_max * l1.powf(1.0 / (1.0 - s));
    let w_upper = (mu / s * t_pow * phi / l1) / (1.0 - q);
    let omega_upper = w_upper * g_lower.powf(-mu);
    let k_bound = v * omega_upper * l2 * (1.0 + l2 / lam);

    let t_min_pow = t_min.powf(1.0 - s);
    let l_g = f_root * t_max.powf(s) * t_min_pow * l1.powf(s / (1.0 - s)) / (s - 1.0);
    let c_g = if s <= 2.0 { g_lower } else { g_upper };
    let coupling = mu / (s * f);
    let lw_num = coupling
        * ((s - 1.0) * c_g.powf(s - 2.0) * l_g * t_min_pow * (w_upper * l2 + phi)
            + w_upper * g_upper.powf(s - 1.0) * t_min_pow);
    let lw_den = 1.0 - coupling * l2 * g_upper.powf(s - 1.0) * t_min_pow;
    let l_w = lw_num / lw_den;
    let l_omega = mu * w_upper * g_lower.powf(-mu - 1.0) * l_g + g_lower.powf(-mu) * l_w;
    let l_psi = l2 * l_omega + omega_upper + l2 * (2.0 * omega_upper + l2 * l_omega) / lam;

    Ok(TheoryBounds {
        b,
        lambda1: l1,
        lambda2: l2,
        contraction_modulus: q,
        g_lower,
        g_upper,
        w_upper,
        omega_upper,
        k_bound,
        c_g,
        l_g,
        l_w,
        l_omega,
        l_psi,
        horizon_b_over_k: b / k_bound,
        horizon_inv_l: 1.0 / l_psi,
    })
}

/// Default reporting radius `b = Lambda / 2`.
pub fn default_radius(params: &ModelParams) -> f64 {
    0.5 * params.lambda_total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn modulus_values() {
        let p = ModelParams::default();
        let unit = contraction_from_ratio(&p, 1.0, 1.0);
        assert_eq!(unit, p.mu / p.sigma);

        let small = contraction_modulus(&p.with_tau(0.01), 1.0, 1.0).unwrap();
        assert_relative_eq!(small, 0.2 * (0.02 * PI).exp(), max_relative = 1e-14);
        assert!(small < 1.0);

        let big = contraction_modulus(&p, 1.0, 1.0).unwrap();
        assert_relative_eq!(big, 0.2 * (2.0 * PI).exp(), max_relative = 1e-14);
        assert!(big > 100.0);

        assert!(contraction_modulus(&p, 0.0, 1.0).is_err());
    }

    #[test]
    fn bounds_need_contraction() {
        let p = ModelParams::default();
        let err = apriori_bounds(&p, 0.5).unwrap_err();
        assert!(err.contraction_modulus.unwrap() > 1.0);
        assert!(apriori_bounds(&p.with_tau(0.01), 1.5).is_err());
        let ok = apriori_bounds(&p.with_tau(0.01), 0.2).unwrap();
        assert!(ok.g_lower <= ok.g_upper);
        for c in [ok.w_upper, ok.omega_upper, ok.k_bound, ok.l_g, ok.l_w, ok.l_omega, ok.l_psi] {
            assert!(c > 0.0 && c.is_finite());
        }
    }

    #[test]
    fn small_radius_limit_is_continuous() {
        let p = ModelParams::default().with_tau(0.01);
        let a = apriori_bounds(&p, 1e-9).unwrap();
        let b = apriori_bounds(&p, 1e-7).unwrap();
        assert_relative_eq!(a.g_upper, b.g_upper, max_relative = 1e-6);
        assert_relative_eq!(a.w_upper, b.w_upper, max_relative = 1e-6);
        assert_relative_eq!(a.l_psi, b.l_psi, max_relative = 1e-6);
        // b -> 0 collapses the mass bracket onto Lambda.
        let f_root = p.fixed_input.powf(1.0 / (p.sigma - 1.0));
        assert_relative_eq!(a.g_lower, f_root, max_relative = 1e-8);
    }

    #[test]
    fn c_g_case_split() {
        let low = ModelParams { sigma: 1.8, mu: 0.3, tau: 0.01, ..Default::default() };
        let b = apriori_bounds(&low, 0.1).unwrap();
        assert_eq!(b.c_g, b.g_lower);
        let high = ModelParams { sigma: 3.0, tau: 0.01, ..Default::default() };
        let b = apriori_bounds(&high, 0.1).unwrap();
        assert_eq!(b.c_g, b.g_upper);
    }
}
