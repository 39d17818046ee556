//! Reference integrals against a Gamma density by tanh-sinh quadrature.
//!
//! Written separately from the library's integrators so that the two can
//! check each other.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, LOG2_E, PI};

const T_MAX: f64 = 4.5;
const MAX_LEVEL: u32 = 12;
const LEVEL_TOL: f64 = 1e-14;

/// `ln` density of Gamma(shape `a`, rate `b`) at `x`.
fn ln_density(a: f64, b: f64, x: f64) -> f64 {
    a * b.ln() - libm::lgamma(a) + (a - 1.0) * x.ln() - b * x
}

// Nodes at t = j h for j in `js`, mapped onto [lo, hi].
fn level_sum(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, h: f64, odd_only: bool) -> f64 {
    let width = hi - lo;
    let n = (T_MAX / h).ceil() as i64;
    let mut s = 0.0;
    for j in -n..=n {
        if odd_only && j % 2 == 0 {
            continue;
        }
        let t = j as f64 * h;
        let u = FRAC_PI_2 * t.sinh();
        // s_lo = distance fraction from lo, s_hi from hi; never subtract
        let s_lo = 1.0 / (1.0 + (-2.0 * u).exp());
        let s_hi = 1.0 / (1.0 + (2.0 * u).exp());
        let w = width * 2.0 * s_lo * s_hi * FRAC_PI_2 * t.cosh();
        if w == 0.0 || !w.is_finite() {
            continue;
        }
        let x = if s_lo < 0.5 {
            lo + width * s_lo
        } else {
            hi - width * s_hi
        };
        if x <= lo || x >= hi {
            continue;
        }
        s += w * f(x);
    }
    s
}

/// Integral of `f` over the finite interval `[lo, hi]`.
pub fn tanh_sinh(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    assert!(hi > lo);
    let mut h = 1.0;
    let mut sum = level_sum(f, lo, hi, h, false);
    let mut prev = sum * h;
    for level in 1..=MAX_LEVEL {
        h /= 2.0;
        sum += level_sum(f, lo, hi, h, true);
        let est = sum * h;
        if level >= 4 && (est - prev).abs() <= LEVEL_TOL * est.abs() {
            return est;
        }
        prev = est;
    }
    panic!("tanh-sinh did not settle on [{lo}, {hi}]");
}

/// `ln` of `int_lo^hi h(x) f(x) dx` for the Gamma(a, b) density `f` and a
/// non-negative weight `h`. `hi` may be infinite.
pub fn ln_expectation(a: f64, b: f64, lo: f64, hi: f64, h: &dyn Fn(f64) -> f64) -> f64 {
    let mode = ((a - 1.0) / b).max(0.0);
    let sd = a.sqrt() / b;
    let far = (a + 100.0 * a.sqrt() + 800.0) / b;
    let hi = hi.min(far);
    if hi <= lo {
        return f64::NEG_INFINITY;
    }
    // density peak within the range sets the scale; below shape 1 the peak
    // is the integrable pole at zero, so scale by the mean instead
    let x_ref = if a >= 1.0 { mode } else { a / b };
    let ln_ref = ln_density(a, b, x_ref.clamp(lo, hi).max(f64::MIN_POSITIVE));

    let mut cuts = vec![lo, hi];
    for k in [
        -40.0, -20.0, -10.0, -5.0, -2.0, 0.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0,
    ] {
        let x = mode + k * sd;
        if x > lo && x < hi {
            cuts.push(x);
        }
    }
    // boundary layers when the range sits in a steep flank
    for end in [lo, hi] {
        if end > 0.0 {
            let slope = ((a - 1.0) / end - b).abs();
            if slope > 0.0 {
                for k in [1.0, 4.0, 16.0, 64.0] {
                    for x in [end - k / slope, end + k / slope] {
                        if x > lo && x < hi {
                            cuts.push(x);
                        }
                    }
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let g = |x: f64| h(x) * (ln_density(a, b, x) - ln_ref).exp();
    let total: f64 = cuts.windows(2).map(|w| tanh_sinh(&g, w[0], w[1])).sum();
    total.ln() + ln_ref
}

pub fn c1(a: f64, b: f64) -> f64 {
    ln_expectation(a, b, 0.0, f64::INFINITY, &|x| x.ln_1p() * LOG2_E).exp()
}

pub fn c2(a: f64, b: f64) -> f64 {
    ln_expectation(a, b, 0.0, f64::INFINITY, &|x| {
        LOG2_E * (x * (2.0 + x)).sqrt() / (1.0 + x)
    })
    .exp()
}

/// Expectation of the `sqrt(1-y) <= 1 - y/2` bound on the root dispersion.
pub fn c2_bound(a: f64, b: f64) -> f64 {
    ln_expectation(a, b, 0.0, f64::INFINITY, &|x| {
        LOG2_E * (1.0 - 0.5 / ((1.0 + x) * (1.0 + x)))
    })
    .exp()
}

/// `ln` of the average of the piecewise-linear error curve.
pub fn ln_bler(a: f64, b: f64, r: f64, l: f64) -> f64 {
    let xi0 = (r / (2.0 * PI * ((2.0 * l / r).exp2() - 1.0))).sqrt();
    let xi1 = (l / r).exp2() - 1.0;
    let (k0, k1) = (xi1 - 0.5 / xi0, xi1 + 0.5 / xi0);
    let head = ln_expectation(a, b, 0.0, k0, &|_| 1.0);
    let ramp = ln_expectation(a, b, k0, k1, &|x| xi0 * (k1 - x));
    let m = head.max(ramp);
    m + ((head - m).exp() + (ramp - m).exp()).ln()
}
