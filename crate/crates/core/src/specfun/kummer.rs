//! Tricomi's confluent hypergeometric function `U(a, b, z)` from its integral
//! representation
//!
//! ```text
//! U(a, b, z) = 1/Gamma(a) int_0^inf u^(a-1) (1+u)^(b-a-1) e^(-z u) du,   a > 0, z > 0.
//! ```
//!
//! The integrand is split around its mode, with a power substitution when it
//! is singular at the origin, and integrated in the log domain.

use super::quad::{LogIntegrator, Segment};
use super::EvalPolicy;
use crate::error::{Error, Result};

// Log-integrand written so that `a - 1` and `b - a - 1` never cancel each
// other: (a-1) ln u + (b-a-1) ln(1+u) = -(a-1) ln(1 + 1/u) + (b-2) ln(1+u).
fn ln_integrand(a: f64, b: f64, z: f64, u: f64) -> f64 {
    -(a - 1.0) * (1.0 / u).ln_1p() + (b - 2.0) * u.ln_1p() - z * u
}

struct Plan {
    segments: Vec<Segment>,
    u_ref: f64,
    ln_ref: f64,
}

fn plan(a: f64, b: f64, z: f64) -> Plan {
    // h'(u) u (1+u) = (a-1) + (b-2-z) u - z u^2
    let bq = b - 2.0 - z;
    let cq = a - 1.0;
    let disc = bq * bq + 4.0 * z * cq;
    let mode = if disc >= 0.0 {
        let sd = disc.sqrt();
        if bq > 0.0 {
            (bq + sd) / (2.0 * z)
        } else if sd - bq > 0.0 {
            2.0 * cq / (sd - bq)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let head = |end: f64| {
        if a < 1.0 {
            Segment::FromZeroPower { end, power: a }
        } else {
            Segment::Finite { a: 0.0, b: end }
        }
    };
    let mut segments = Vec::with_capacity(8);
    if mode > 0.0 {
        let h2 = -(a - 1.0) / (mode * mode) - (b - a - 1.0) / (1.0 + mode).powi(2);
        let sigma = if h2 < 0.0 {
            1.0 / (-h2).sqrt()
        } else {
            mode.max(1.0 / z)
        };
        let lo = mode - 12.0 * sigma;
        let hi = mode + 12.0 * sigma;
        if lo > 0.0 {
            segments.push(head(lo));
            segments.push(Segment::Finite { a: lo, b: hi });
        } else {
            segments.push(head(hi));
        }
        segments.push(Segment::SemiInfinite {
            start: hi,
            scale: sigma,
        });
        let ln_ref = if a < 1.0 { (-a.ln()).max(0.0) } else { 0.0 };
        Plan {
            segments,
            u_ref: mode,
            ln_ref,
        }
    } else {
        // monotone decreasing integrand, only possible for a <= 1
        let s0 = 1.0 / (z + (a + 1.0 - b).max(0.0));
        segments.push(head(s0));
        let mut s = s0;
        let mut guard = 0;
        while s < 1.0 / z && guard < 40 {
            segments.push(Segment::Finite { a: s, b: 10.0 * s });
            s *= 10.0;
            guard += 1;
        }
        segments.push(Segment::SemiInfinite {
            start: s,
            scale: s.max(1.0 / z),
        });
        // near u = 0 the substituted integrand tends to u_ref^(1-a) e^(z u_ref) / a
        let ln_ref = -a.ln() - (a - 1.0) * s0.ln() + z * s0 - (b - a - 1.0) * s0.ln_1p();
        Plan {
            segments,
            u_ref: s0,
            ln_ref: ln_ref.max(0.0),
        }
    }
}

/// `ln int_0^inf u^(a-1) (1+u)^(b-a-1) e^(-z u) du = ln(Gamma(a) U(a, b, z))`.
pub(crate) fn ln_u_integral(a: f64, b: f64, z: f64, policy: &EvalPolicy) -> Result<f64> {
    policy.validate()?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain(
            "kummer_u",
            format!("a = {a} must be positive"),
        ));
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(
            "kummer_u",
            format!("z = {z} must be positive"),
        ));
    }
    if !b.is_finite() {
        return Err(Error::domain("kummer_u", format!("b = {b} must be finite")));
    }
    let p = plan(a, b, z);
    let u0 = p.u_ref;
    let l0 = (1.0 / u0).ln_1p();
    let shifted = |u: f64| {
        -(a - 1.0) * ((1.0 / u).ln_1p() - l0) + (b - 2.0) * ((u - u0) / (1.0 + u0)).ln_1p()
            - z * (u - u0)
    };
    let ln_int =
        LogIntegrator::new(&p.segments, p.ln_ref, policy, "kummer_u").integrate(shifted)?;
    Ok(ln_int + ln_integrand(a, b, z, u0))
}

/// `ln U(a, b, z)` for `a > 0`, `z > 0` and any real `b`.
pub fn ln_kummer_u(a: f64, b: f64, z: f64, policy: &EvalPolicy) -> Result<f64> {
    Ok(ln_u_integral(a, b, z, policy)? - libm::lgamma_r(a).0)
}

/// Tricomi confluent hypergeometric function `U(a, b, z)`.
pub fn kummer_u(a: f64, b: f64, z: f64, policy: &EvalPolicy) -> Result<f64> {
    Ok(ln_kummer_u(a, b, z, policy)?.exp())
}

/// `ln E_nu(z)` for order `nu >= 0` and `z > 0`.
pub fn ln_gen_exp_integral(nu: f64, z: f64, policy: &EvalPolicy) -> Result<f64> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::domain(
            "gen_exp_integral",
            format!("order nu = {nu} must be non-negative"),
        ));
    }
    if !(z > 0.0) {
        return Err(Error::domain(
            "gen_exp_integral",
            format!("z = {z} must be positive"),
        ));
    }
    // E_nu(z) = e^-z U(1, 2-nu, z)
    Ok(-z + ln_kummer_u(1.0, 2.0 - nu, z, policy)?)
}

/// Generalized exponential integral `E_nu(z) = int_1^inf e^(-z t) t^(-nu) dt`.
pub fn gen_exp_integral(nu: f64, z: f64, policy: &EvalPolicy) -> Result<f64> {
    Ok(ln_gen_exp_integral(nu, z, policy)?.exp())
}
