//! Special functions used by the analysis: log-gamma, regularized incomplete
//! gamma, Tricomi's confluent hypergeometric `U`, generalized exponential
//! integrals, the Gaussian Q-function and its inverse.
//!
//! Functions that need numerical integration or series truncation take an
//! [`EvalPolicy`]. All others are closed-form or fixed-cost.

mod gamma;
mod kummer;
mod normal;
pub(crate) mod quad;
pub(crate) mod sum;
mod zeta;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use gamma::ln_gamma_ratio;
pub use gamma::{
    gamma_cdf, gamma_p, gamma_p_interval, gamma_q, ln_gamma, ln_upper_inc_gamma, upper_inc_gamma,
};
pub(crate) use kummer::ln_u_integral;
pub use kummer::{gen_exp_integral, kummer_u, ln_gen_exp_integral, ln_kummer_u};
pub use normal::{inv_q, q_function};
pub(crate) use zeta::hurwitz_zeta;

/// Accuracy and effort limits for series truncation and quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPolicy {
    /// Hard cap on the number of terms of any infinite series.
    pub max_series_terms: usize,
    /// Target relative accuracy.
    pub rel_tol: f64,
    /// Base quadrature resolution; each integration piece starts with
    /// `quadrature_points / 16` Gauss-Kronrod panels.
    pub quadrature_points: usize,
}

impl Default for EvalPolicy {
    fn default() -> Self {
        EvalPolicy {
            max_series_terms: 1 << 27,
            rel_tol: 1e-10,
            quadrature_points: 256,
        }
    }
}

impl EvalPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_series_terms < 1 {
            return Err(Error::config("max_series_terms", "must be at least 1"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::config("rel_tol", "must lie in (0, 1)"));
        }
        if self.quadrature_points < 16 {
            return Err(Error::config("quadrature_points", "must be at least 16"));
        }
        Ok(())
    }
}

/// `sin(pi x)` with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    let n = (2.0 * x).round();
    let y = x - 0.5 * n;
    let (s, c) = (std::f64::consts::PI * y).sin_cos();
    match (n as i64).rem_euclid(4) {
        0 => s,
        1 => c,
        2 => -s,
        _ => -c,
    }
}

/// Normalized sinc, `sin(pi x) / (pi x)`, with `sinc_norm(0) = 1`.
pub fn sinc_norm(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        sin_pi(x) / (std::f64::consts::PI * x)
    }
}

/// Generalized binomial coefficient `C(1/2, k)`.
pub fn binom_half(k: usize) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c *= (0.5 - j as f64) / (j as f64 + 1.0);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_values() {
        assert_eq!(sinc_norm(0.0), 1.0);
        assert_eq!(sinc_norm(1.0), 0.0);
        assert_eq!(sinc_norm(-2.0), 0.0);
        let v = sinc_norm(0.25);
        assert!((v - 2.0 * 2f64.sqrt() / std::f64::consts::PI).abs() < 1e-15);
        assert!((sinc_norm(0.5) - 2.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn binomial_half() {
        assert_eq!(binom_half(0), 1.0);
        assert_eq!(binom_half(1), 0.5);
        assert_eq!(binom_half(2), -0.125);
        assert_eq!(binom_half(3), 0.0625);
        // sum of C(1/2,k) x^k = sqrt(1+x)
        let x: f64 = 0.3;
        let s: f64 = (0..60).map(|k| binom_half(k) * x.powi(k as i32)).sum();
        assert!((s - 1.3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn policy_validation() {
        assert!(EvalPolicy::default().validate().is_ok());
        let bad = EvalPolicy {
            rel_tol: 0.0,
            ..EvalPolicy::default()
        };
        assert!(bad.validate().is_err());
    }
}
