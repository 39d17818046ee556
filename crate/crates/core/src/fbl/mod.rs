//! Finite-blocklength metrics under the normal approximation
//!
//! ```text
//! R(gamma) = C(gamma) - Q^-1(eps) sqrt(V(gamma) / r),
//! C = log2(1+gamma),  V = (log2 e)^2 (1 - (1+gamma)^-2),
//! ```
//!
//! both for a given SNR and averaged over a Gamma-distributed SNR.

mod bler;
mod series;

use std::f64::consts::{LN_2, LOG2_E};

use serde::{Deserialize, Serialize};

use crate::channel::GammaFit;
use crate::error::{Error, Result};
use crate::specfun::{inv_q, ln_kummer_u, q_function, EvalPolicy};

pub use bler::{
    avg_bler, avg_bler_detailed, avg_bler_reference, linearization_params, AvgBler,
    LinearizationParams,
};
pub use series::{c1_avg_capacity, c2_avg_sqrt_dispersion};

/// Packet size, blocklength and target error rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketConfig {
    /// Information bits `L`.
    pub info_bits: u32,
    /// Blocklength `r` in channel uses.
    pub blocklength: u32,
    /// Target block error rate `eps`.
    pub target_bler: f64,
}

impl Default for PacketConfig {
    fn default() -> Self {
        PacketConfig {
            info_bits: 240,
            blocklength: 300,
            target_bler: 1e-9,
        }
    }
}

impl PacketConfig {
    pub fn validate(&self) -> Result<()> {
        if self.info_bits < 1 {
            return Err(Error::config("info_bits", "must be at least 1"));
        }
        if self.blocklength < 100 {
            return Err(Error::config(
                "blocklength",
                format!(
                    "{} is below 100 channel uses, where the normal approximation is not used",
                    self.blocklength
                ),
            ));
        }
        if !(self.target_bler > 0.0 && self.target_bler <= 0.5) {
            return Err(Error::config("target_bler", "must lie in (0, 0.5]"));
        }
        Ok(())
    }

    pub fn r(&self) -> f64 {
        self.blocklength as f64
    }

    pub fn l(&self) -> f64 {
        self.info_bits as f64
    }
}

/// Averaged metrics of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvgMetrics {
    /// Average capacity `E[log2(1+gamma)]`.
    pub avg_capacity: f64,
    pub avg_rate: f64,
    /// Closed-form lower bound on `avg_rate`; absent for simulated averages.
    pub avg_rate_lb: Option<f64>,
    pub avg_bler: f64,
    pub avg_blocklength: f64,
    pub avg_sqrt_dispersion: f64,
}

fn check_snr(func: &'static str, gamma: f64) -> Result<()> {
    if !(gamma >= 0.0) {
        return Err(Error::domain(
            func,
            format!("SNR {gamma} must be non-negative"),
        ));
    }
    Ok(())
}

fn check_r(func: &'static str, r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain(
            func,
            format!("blocklength {r} must be positive"),
        ));
    }
    Ok(())
}

/// Shannon capacity `log2(1+gamma)`.
pub fn capacity(gamma: f64) -> f64 {
    gamma.ln_1p() / LN_2
}

/// Channel dispersion `(log2 e)^2 (1 - (1+gamma)^-2)`.
pub fn dispersion(gamma: f64) -> f64 {
    let x = 1.0 / (1.0 + gamma);
    // 1 - x^2 = (1-x)(1+x) with 1 - x = gamma x
    LOG2_E * LOG2_E * (gamma * x) * (1.0 + x)
}

/// Normal-approximation rate at SNR `gamma`.
pub fn instantaneous_rate(gamma: f64, r: f64, target_bler: f64) -> Result<f64> {
    check_snr("instantaneous_rate", gamma)?;
    check_r("instantaneous_rate", r)?;
    let q = inv_q(target_bler)?;
    Ok(capacity(gamma) - q * (dispersion(gamma) / r).sqrt())
}

/// Block error rate `Q(sqrt(r/V) (C - L/r))` at SNR `gamma`.
pub fn instantaneous_bler(gamma: f64, r: f64, l: f64) -> Result<f64> {
    check_snr("instantaneous_bler", gamma)?;
    check_r("instantaneous_bler", r)?;
    if !(l >= 0.0) {
        return Err(Error::domain(
            "instantaneous_bler",
            "L must be non-negative",
        ));
    }
    if gamma == 0.0 {
        return Ok(1.0);
    }
    let f = (r / dispersion(gamma)).sqrt() * (capacity(gamma) - l / r);
    Ok(q_function(f))
}

/// Positive root in `sqrt(r)` of `c r - q d sqrt(r) - L = 0`.
fn quadratic_blocklength(c: f64, qd: f64, l: f64) -> f64 {
    let w = (qd + (qd * qd + 4.0 * c * l).sqrt()) / (2.0 * c);
    w * w
}

/// Blocklength needed to carry `L` bits at SNR `gamma` with error `eps`.
pub fn instantaneous_blocklength(gamma: f64, l: f64, target_bler: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::domain(
            "instantaneous_blocklength",
            "SNR must be positive",
        ));
    }
    let q = inv_q(target_bler)?;
    Ok(quadratic_blocklength(
        capacity(gamma),
        q * dispersion(gamma).sqrt(),
        l,
    ))
}

/// Average rate `C1 - Q^-1(eps) C2 / sqrt(r)`.
pub fn avg_rate_exact(
    fit: &GammaFit,
    r: f64,
    target_bler: f64,
    policy: &EvalPolicy,
) -> Result<f64> {
    check_r("avg_rate_exact", r)?;
    let q = inv_q(target_bler)?;
    let c1 = c1_avg_capacity(fit, policy)?;
    if q == 0.0 {
        return Ok(c1);
    }
    Ok(c1 - q / r.sqrt() * c2_avg_sqrt_dispersion(fit, policy)?)
}

/// Jensen upper estimate of `C1`: `log2(1 + alpha^2 / (beta (alpha + 1)))`.
pub fn jensen_capacity(fit: &GammaFit) -> f64 {
    let (a, b) = (fit.shape(), fit.rate());
    capacity(a * a / (b * (a + 1.0)))
}

/// Closed-form bound on `C2` from `sqrt(1-y) <= 1 - y/2`:
/// `(2 - beta + beta (alpha+beta-1) e^beta E_alpha(beta)) / (2 ln 2)`.
pub fn approx_sqrt_dispersion(fit: &GammaFit, policy: &EvalPolicy) -> Result<f64> {
    let (a, b) = (fit.shape(), fit.rate());
    // e^beta E_alpha(beta) = U(1, 2 - alpha, beta)
    let eu = ln_kummer_u(1.0, 2.0 - a, b, policy)?.exp();
    Ok((2.0 - b + b * (a + b - 1.0) * eu) / (2.0 * LN_2))
}

/// Closed-form lower bound on [`avg_rate_exact`].
pub fn avg_rate_lower_bound(fit: &GammaFit, r: f64, target_bler: f64) -> Result<f64> {
    check_r("avg_rate_lower_bound", r)?;
    let q = inv_q(target_bler)?;
    let c2 = approx_sqrt_dispersion(fit, &EvalPolicy::default())?;
    Ok(jensen_capacity(fit) - q / r.sqrt() * c2)
}

/// Taylor approximation of `C1` around the mean in its commonly quoted form,
/// `log2(1+m) - var / (2 (1+m) ln 2)`.
///
/// A second-order expansion of `ln(1+gamma)` actually yields `(1+m)^2` in
/// the denominator; that variant is [`taylor_capacity_second_order`].
pub fn avg_rate_taylor(fit: &GammaFit) -> f64 {
    let m = fit.mean();
    capacity(m) - fit.variance() / (2.0 * (1.0 + m) * LN_2)
}

/// `log2(1+m) - var / (2 (1+m)^2 ln 2)`.
pub fn taylor_capacity_second_order(fit: &GammaFit) -> f64 {
    let m = fit.mean();
    capacity(m) - fit.variance() / (2.0 * (1.0 + m).powi(2) * LN_2)
}

/// Average blocklength: positive root of `c1 r - Q^-1(eps) c2 sqrt(r) - L = 0`.
pub fn avg_blocklength(c1: f64, c2: f64, l: f64, target_bler: f64) -> Result<f64> {
    if !(c1 > 0.0) {
        return Err(Error::domain(
            "avg_blocklength",
            format!("c1 = {c1} must be positive"),
        ));
    }
    if !(c2 >= 0.0) {
        return Err(Error::domain(
            "avg_blocklength",
            format!("c2 = {c2} must be >= 0"),
        ));
    }
    let q = inv_q(target_bler)?;
    Ok(quadratic_blocklength(c1, q * c2, l))
}

/// All averaged metrics of a fit.
pub fn avg_metrics(
    fit: &GammaFit,
    packet: &PacketConfig,
    policy: &EvalPolicy,
) -> Result<AvgMetrics> {
    packet.validate()?;
    let q = inv_q(packet.target_bler)?;
    let c1 = c1_avg_capacity(fit, policy)?;
    let c2 = c2_avg_sqrt_dispersion(fit, policy)?;
    let r = packet.r();
    Ok(AvgMetrics {
        avg_capacity: c1,
        avg_rate: c1 - q / r.sqrt() * c2,
        avg_rate_lb: Some(
            jensen_capacity(fit) - q / r.sqrt() * approx_sqrt_dispersion(fit, policy)?,
        ),
        avg_bler: avg_bler(fit, r, packet.l())?,
        avg_blocklength: avg_blocklength(c1, c2, packet.l(), packet.target_bler)?,
        avg_sqrt_dispersion: c2,
    })
}
