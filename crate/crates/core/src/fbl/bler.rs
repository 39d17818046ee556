//! Average block error rate with the linearized error curve
//!
//! ```text
//! g(gamma) = 1                              gamma <= kappa0
//!          = 1/2 + xi0 (gamma - xi1)        kappa0 < gamma < kappa1
//!          = 0                              gamma >= kappa1
//! ```
//!
//! which integrates in closed form against a Gamma density.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::GammaFit;
use crate::error::{Error, Result};
use crate::specfun::quad::{LogIntegrator, Segment};
use crate::specfun::{gamma_p, gamma_p_interval, ln_gamma, EvalPolicy};

// Relative disagreement between closed form and quadrature that flags
// cancellation in the closed form.
const CANCELLATION_TOL: f64 = 1e-6;

/// Slope, center and end points of the linear ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizationParams {
    pub xi0: f64,
    pub xi1: f64,
    pub kappa0: f64,
    pub kappa1: f64,
}

impl LinearizationParams {
    /// The linearized error curve `g(gamma)`.
    pub fn g(&self, gamma: f64) -> f64 {
        if gamma <= self.kappa0 {
            1.0
        } else if gamma >= self.kappa1 {
            0.0
        } else {
            0.5 + self.xi0 * (gamma - self.xi1)
        }
    }
}

pub fn linearization_params(r: f64, l: f64) -> Result<LinearizationParams> {
    if !(r > 0.0) || !(l > 0.0) {
        return Err(Error::domain(
            "linearization_params",
            "r and L must be positive",
        ));
    }
    let xi0 = -(r / (2.0 * PI * ((2.0 * l / r).exp2() - 1.0))).sqrt();
    let xi1 = (l / r).exp2() - 1.0;
    let p = LinearizationParams {
        xi0,
        xi1,
        kappa0: xi1 + 0.5 / xi0,
        kappa1: xi1 - 0.5 / xi0,
    };
    if !(p.kappa0 > 0.0) {
        return Err(Error::Linearization {
            detail: format!(
                "ramp start kappa0 = {:e} is not positive for r = {r}, L = {l}",
                p.kappa0
            ),
        });
    }
    Ok(p)
}

/// Average BLER with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvgBler {
    /// Returned estimate: the closed form unless `cancellation` is set.
    pub value: f64,
    pub closed_form: f64,
    /// Quadrature of the linearized curve against the density.
    pub reference: f64,
    /// Closed form and quadrature disagree beyond tolerance.
    pub cancellation: bool,
}

// P(a, k0 b) + |xi0| [k1 (P(a,k1 b) - P(a,k0 b)) - (a/b)(P(a+1,k1 b) - P(a+1,k0 b))]
fn closed_form(fit: &GammaFit, lp: &LinearizationParams) -> Result<f64> {
    let (a, b) = (fit.shape(), fit.rate());
    let (x0, x1) = (lp.kappa0 * b, lp.kappa1 * b);
    let head = gamma_p(a, x0)?;
    let d0 = gamma_p_interval(a, x0, x1)?;
    let d1 = gamma_p_interval(a + 1.0, x0, x1)?;
    let ramp = (lp.kappa1 * d0 - a / b * d1).max(0.0);
    Ok((head + lp.xi0.abs() * ramp).clamp(0.0, 1.0))
}

/// Numerical integral of `g(gamma)` against the fitted density.
pub fn avg_bler_reference(fit: &GammaFit, r: f64, l: f64, policy: &EvalPolicy) -> Result<f64> {
    let lp = linearization_params(r, l)?;
    let (a, b) = (fit.shape(), fit.rate());
    let ln_c = a * b.ln() - ln_gamma(a)?;
    let ln_f = move |u: f64| ln_c + (a - 1.0) * u.ln() - b * u;
    let mode = ((a - 1.0) / b).max(0.0);
    let width = a.sqrt() / b;

    let mut breaks = vec![lp.kappa0, lp.kappa1];
    for m in [-10.0, 0.0, 10.0] {
        let x = mode + m * width;
        if x > 0.0 && x < lp.kappa1 {
            breaks.push(x);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let ln_peak = |lo: f64, hi: f64| {
        let m = mode.clamp(lo, hi);
        if m > 0.0 {
            ln_f(m)
        } else {
            ln_f(hi)
        }
    };
    let mut total = 0.0;
    let mut start = 0.0;
    for &end in &breaks {
        if end <= start {
            continue;
        }
        let seg = if start == 0.0 && a < 1.0 {
            Segment::FromZeroPower { end, power: a }
        } else {
            Segment::Finite { a: start, b: end }
        };
        let (ref_val, ramp) = if end <= lp.kappa0 {
            (ln_peak(start, end), false)
        } else {
            (
                ln_peak(start, end) + (lp.xi0.abs() * (lp.kappa1 - start)).ln(),
                true,
            )
        };
        let ref_val = if a < 1.0 && start == 0.0 {
            ln_c - a.ln()
        } else {
            ref_val
        };
        let ln_int = {
            let segs = [seg];
            let integ = LogIntegrator::new(&segs, ref_val, policy, "avg_bler_reference");
            if ramp {
                let k1 = lp.kappa1;
                let s0 = lp.xi0.abs();
                integ.integrate(|u: f64| ln_f(u) + (s0 * (k1 - u)).ln())
            } else {
                integ.integrate(ln_f)
            }
        };
        total += ln_int?.exp();
        start = end;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Closed form, quadrature reference and cancellation flag.
pub fn avg_bler_detailed(fit: &GammaFit, r: f64, l: f64) -> Result<AvgBler> {
    let lp = linearization_params(r, l)?;
    let cf = closed_form(fit, &lp)?;
    let reference = avg_bler_reference(fit, r, l, &EvalPolicy::default())?;
    let scale = cf.abs().max(reference.abs());
    let cancellation = scale > 0.0 && (cf - reference).abs() > CANCELLATION_TOL * scale;
    Ok(AvgBler {
        value: if cancellation { reference } else { cf },
        closed_form: cf,
        reference,
        cancellation,
    })
}

/// Average BLER `E[g(gamma)]` under a Gamma fit.
pub fn avg_bler(fit: &GammaFit, r: f64, l: f64) -> Result<f64> {
    Ok(avg_bler_detailed(fit, r, l)?.value)
}
