//! Globally adaptive Gauss-Kronrod (G10/K21) quadrature in the log domain.
//!
//! Integrands are passed as `ln f(u)` and integrated piecewise over
//! [`Segment`]s, which may carry a change of variables. The result is returned
//! as a logarithm so that integrals far outside the `f64` range are fine.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::EvalPolicy;
use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// One integration piece in the original variable `u`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Segment {
    /// `u` in `[a, b]`, no substitution.
    Finite { a: f64, b: f64 },
    /// `u` in `[0, end]` with `u = w^(1/power)`; removes a `u^(power-1)`
    /// endpoint singularity.
    FromZeroPower { end: f64, power: f64 },
    /// `u` in `[start, inf)` with `u = start + scale t/(1-t)`.
    SemiInfinite { start: f64, scale: f64 },
}

impl Segment {
    fn t_range(&self) -> (f64, f64) {
        match *self {
            Segment::Finite { a, b } => (a, b),
            Segment::FromZeroPower { end, power } => (0.0, end.powf(power)),
            Segment::SemiInfinite { .. } => (0.0, 1.0),
        }
    }

    /// Maps `t` to `(u, ln |du/dt|)`.
    fn map(&self, t: f64) -> (f64, f64) {
        match *self {
            Segment::Finite { .. } => (t, 0.0),
            Segment::FromZeroPower { power, .. } => {
                let inv = 1.0 / power;
                let u = t.powf(inv);
                (u, -power.ln() + (inv - 1.0) * t.ln())
            }
            Segment::SemiInfinite { start, scale } => {
                let om = 1.0 - t;
                (start + scale * t / om, scale.ln() - 2.0 * om.ln())
            }
        }
    }
}

struct Panel {
    seg: usize,
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrator for `exp(ln_f(u))` over a set of segments.
pub(crate) struct LogIntegrator<'a> {
    segments: &'a [Segment],
    ln_ref: f64,
    rel_tol: f64,
    initial_panels: usize,
    max_panels: usize,
    what: &'static str,
}

impl<'a> LogIntegrator<'a> {
    /// `ln_ref` should be near the log of the integrand's peak; it only guards
    /// against overflow, so a rough value is enough.
    pub(crate) fn new(
        segments: &'a [Segment],
        ln_ref: f64,
        policy: &EvalPolicy,
        what: &'static str,
    ) -> Self {
        LogIntegrator {
            segments,
            ln_ref,
            rel_tol: (policy.rel_tol * 1e-2).max(1e-14),
            initial_panels: (policy.quadrature_points / 16).max(1),
            max_panels: 64 * policy.quadrature_points,
            what,
        }
    }

    /// Overrides the number of starting panels per segment.
    pub(crate) fn with_initial_panels(mut self, n: usize) -> Self {
        self.initial_panels = n.max(1);
        self
    }

    fn rule<F: Fn(f64) -> f64>(&self, ln_f: &F, seg: usize, a: f64, b: f64) -> Result<Panel> {
        let s = &self.segments[seg];
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let eval = |t: f64| -> Result<f64> {
            let (u, lj) = s.map(t);
            let l = ln_f(u) + lj - self.ln_ref;
            if l.is_nan() {
                return Err(Error::nonconv(
                    self.what,
                    format!("integrand is NaN at u = {u:e}"),
                ));
            }
            Ok(l.exp())
        };
        let fc = eval(c)?;
        let mut resk = fc * WGK[10];
        let mut resg = 0.0;
        let mut fv = [0.0f64; 21];
        fv[10] = fc;
        for j in 0..10 {
            let dx = h * XGK[j];
            let f1 = eval(c - dx)?;
            let f2 = eval(c + dx)?;
            fv[j] = f1;
            fv[20 - j] = f2;
            resk += WGK[j] * (f1 + f2);
            if j % 2 == 1 {
                resg += WG[j / 2] * (f1 + f2);
            }
        }
        let mean = 0.5 * resk;
        let mut resasc = WGK[10] * (fc - mean).abs();
        let mut resabs = WGK[10] * fc.abs();
        for j in 0..10 {
            resasc += WGK[j] * ((fv[j] - mean).abs() + (fv[20 - j] - mean).abs());
            resabs += WGK[j] * (fv[j].abs() + fv[20 - j].abs());
        }
        let hh = h.abs();
        let value = resk * h;
        resasc *= hh;
        resabs *= hh;
        let mut err = ((resk - resg) * h).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * resabs);
        }
        Ok(Panel {
            seg,
            a,
            b,
            value,
            err,
        })
    }

    /// Returns `ln` of the integral.
    pub(crate) fn integrate<F: Fn(f64) -> f64>(&self, ln_f: F) -> Result<f64> {
        let mut heap = BinaryHeap::new();
        for (i, s) in self.segments.iter().enumerate() {
            let (t0, t1) = s.t_range();
            if !(t1 > t0) {
                continue;
            }
            let n = self.initial_panels;
            let w = (t1 - t0) / n as f64;
            for k in 0..n {
                let a = t0 + w * k as f64;
                let b = if k + 1 == n { t1 } else { a + w };
                heap.push(self.rule(&ln_f, i, a, b)?);
            }
        }
        let mut total: f64 = heap.iter().map(|p| p.value).sum();
        let mut err: f64 = heap.iter().map(|p| p.err).sum();
        let mut steps = 0usize;
        loop {
            if err <= self.rel_tol * total.abs() || total == 0.0 && err == 0.0 {
                // re-sum to drop drift from the running updates
                total = heap.iter().map(|p| p.value).sum();
                err = heap.iter().map(|p| p.err).sum();
                if err <= self.rel_tol * total.abs() || total == 0.0 && err == 0.0 {
                    if total == 0.0 {
                        return Ok(f64::NEG_INFINITY);
                    }
                    if !(total > 0.0) || !total.is_finite() {
                        return Err(Error::nonconv(
                            self.what,
                            format!("integral is not a positive finite number ({total:e})"),
                        ));
                    }
                    return Ok(total.ln() + self.ln_ref);
                }
            }
            if heap.len() >= self.max_panels {
                return Err(Error::nonconv(
                    self.what,
                    format!(
                        "quadrature reached {} panels with relative error {:e}",
                        heap.len(),
                        err / total.abs()
                    ),
                ));
            }
            let worst = heap.pop().expect("non-empty heap");
            let mid = 0.5 * (worst.a + worst.b);
            if !(mid > worst.a && mid < worst.b) {
                return Err(Error::nonconv(
                    self.what,
                    "quadrature panel cannot be subdivided further",
                ));
            }
            let left = self.rule(&ln_f, worst.seg, worst.a, mid)?;
            let right = self.rule(&ln_f, worst.seg, mid, worst.b)?;
            total += left.value + right.value - worst.value;
            err += left.err + right.err - worst.err;
            heap.push(left);
            heap.push(right);
            steps += 1;
            if steps.is_multiple_of(128) {
                total = heap.iter().map(|p| p.value).sum();
                err = heap.iter().map(|p| p.err).sum();
            }
        }
    }
}
