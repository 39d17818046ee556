//! Series for the Gamma-averaged capacity `C1 = E[log2(1+gamma)]` and square
//! root dispersion `C2 = E[sqrt(V(gamma))]`.
//!
//! With `x = gamma/(1+gamma)`, `ln(1+gamma) = sum_k x^k / k` and
//! ```text
//! J_k = E[x^k] = beta^alpha Gamma(k+alpha) U(k+alpha, 1+alpha, beta) / Gamma(alpha).
//! ```
//! Likewise `sqrt(1 - (1+gamma)^-2) = sum_k (-1)^k C(1/2,k) (1+gamma)^-2k` with
//! ```text
//! M_j = E[(1+gamma)^-j] = beta^alpha U(alpha, alpha+1-j, beta).
//! ```
//! Individual terms come from quadrature. Long runs of terms come from the
//! three-term recurrences of `U`, run in the direction in which they are
//! stable, with quadrature values as anchors and cross-checks. Where the terms
//! vary slowly in `k` they are summed in blocks by Euler-Maclaurin, treating
//! the term index as continuous.

use std::cell::RefCell;
use std::f64::consts::{LN_2, PI};

use crate::channel::GammaFit;
use crate::error::{Error, Result};
use crate::specfun::quad::{LogIntegrator, Segment};
use crate::specfun::sum::Neumaier;
use crate::specfun::{hurwitz_zeta, ln_gamma, ln_gamma_ratio, ln_u_integral, EvalPolicy};

// Agreement required between recurrence values and independent quadrature.
const ANCHOR_TOL: f64 = 1e-8;
// Relative tail above which hitting the term cap is an error.
const CAP_TAIL_TOL: f64 = 1e-6;
// Backward recurrence for J_k amplifies rounding roughly by k / alpha per
// step, so past this index the capacity series switches to block summation.
const C1_DIRECT_TERMS: usize = 2000;
// Dispersion series terms computed one by one before block summation.
const C2_DIRECT_TERMS: usize = 256;
// Largest |d ln t_k / dk| accepted for Euler-Maclaurin blocks.
const EM_MAX_LOG_SLOPE: f64 = 0.1;

struct Block {
    sum: f64,
    // ln t_{b+1} - ln t_b
    end_log_slope: f64,
    ln_last: f64,
}

// Sum of exp(ln_t(k)) for k = a..=b, for a smooth positive term sequence
// extended to real k.
fn euler_maclaurin_block<F>(
    ln_t: &F,
    a: usize,
    b: usize,
    policy: &EvalPolicy,
    what: &'static str,
) -> Result<Block>
where
    F: Fn(f64) -> Result<f64>,
{
    let (af, bf) = (a as f64, b as f64);
    let ln_ref = ln_t(af)?;
    let stencil = |x: f64| -> Result<[f64; 8]> {
        let mut v = [0.0; 8];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = (ln_t(x + i as f64 - 3.0)? - ln_ref).exp();
        }
        Ok(v)
    };
    let sa = stencil(af)?;
    let sb = stencil(bf)?;
    let slope = (sa[4] / sa[3]).ln().abs().max((sb[4] / sb[3]).ln().abs());
    if !(slope <= EM_MAX_LOG_SLOPE) {
        return Err(Error::nonconv(
            what,
            format!("terms near index {a} vary too fast for block summation"),
        ));
    }
    let d1 = |v: &[f64; 8]| (-v[5] + 8.0 * v[4] - 8.0 * v[2] + v[1]) / 12.0;
    let d3 =
        |v: &[f64; 8]| (-v[6] + 8.0 * v[5] - 13.0 * v[4] + 13.0 * v[2] - 8.0 * v[1] + v[0]) / 8.0;

    let failure = RefCell::new(None);
    let segs = [Segment::Finite { a: af, b: bf }];
    let integral = LogIntegrator::new(&segs, 0.0, policy, what)
        .with_initial_panels(2)
        .integrate(|t| match ln_t(t) {
            Ok(l) => l - ln_ref,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        });
    let integral = match (integral, failure.into_inner()) {
        (_, Some(e)) => return Err(e),
        (r, None) => r?.exp(),
    };
    let sum =
        integral + 0.5 * (sa[3] + sb[3]) + (d1(&sb) - d1(&sa)) / 12.0 - (d3(&sb) - d3(&sa)) / 720.0;
    Ok(Block {
        sum: sum * ln_ref.exp(),
        end_log_slope: (sb[4] / sb[3]).ln(),
        ln_last: sb[3].ln() + ln_ref,
    })
}

/// `E[log2(1 + gamma)]` under a Gamma fit.
pub fn c1_avg_capacity(fit: &GammaFit, policy: &EvalPolicy) -> Result<f64> {
    policy.validate()?;
    let (alpha, beta) = (fit.shape(), fit.rate());
    let ln_norm = alpha * beta.ln() - ln_gamma(alpha)?;
    let ln_j = |k: f64| -> Result<f64> {
        Ok(ln_norm + ln_u_integral(k + alpha, 1.0 + alpha, beta, policy)?)
    };
    let ln_term = |k: f64| -> Result<f64> { Ok(ln_j(k)? - k.ln()) };
    // sum_{j > K} x^j / j <= x^K gamma / (K+1), and E[x^K gamma] has the same form
    let tail_bound = |k: usize| -> Result<f64> {
        let l = ln_norm + ln_u_integral(k as f64 + alpha + 1.0, alpha + 2.0, beta, policy)?;
        Ok(l.exp() / (k as f64 + 1.0))
    };

    let cap = policy.max_series_terms;
    let mut sum = Neumaier::new(0.0);
    let mut lo = 0usize;
    let mut block = 32usize;
    let mut prev_seed: Option<f64> = None;
    loop {
        let hi = if lo >= C1_DIRECT_TERMS {
            lo.saturating_mul(2).min(cap)
        } else {
            (lo + block).min(cap)
        };
        if lo >= C1_DIRECT_TERMS {
            let b = euler_maclaurin_block(&ln_term, lo + 1, hi, policy, "c1_avg_capacity")?;
            sum.add(b.sum);
        } else {
            sum.add(c1_recurrence_block(
                alpha,
                beta,
                lo,
                hi,
                &ln_j,
                &mut prev_seed,
            )?);
        }
        let total = sum.value();
        let tail = tail_bound(hi)?;
        if tail <= policy.rel_tol * total {
            return Ok(total / LN_2);
        }
        if hi >= cap {
            if tail <= CAP_TAIL_TOL * total {
                return Ok(total / LN_2);
            }
            return Err(Error::nonconv(
                "c1_avg_capacity",
                format!(
                    "{cap} terms leave a relative tail bound of {:e}",
                    tail / total
                ),
            ));
        }
        lo = hi;
        block = block.saturating_mul(2);
    }
}

// sum_{k=lo+1}^{hi} J_k / k by backward recurrence from quadrature seeds,
//   J_{k-1} = [(2k + alpha + beta - 1) J_k - k J_{k+1}] / (k + alpha - 1),
// checked against J_0 = 1 or the previous block's seed.
fn c1_recurrence_block<F>(
    alpha: f64,
    beta: f64,
    lo: usize,
    hi: usize,
    ln_j: &F,
    prev_seed: &mut Option<f64>,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let seed_hi = ln_j(hi as f64)?;
    let seed_hi1 = ln_j(hi as f64 + 1.0)?;
    // values scaled by exp(-s)
    let mut s = seed_hi;
    let mut factor = s.exp();
    let mut y_k = 1.0;
    let mut y_k1 = (seed_hi1 - seed_hi).exp();
    let mut block_sum = Neumaier::new(0.0);
    let mut k = hi;
    loop {
        let term = if factor > 1e-290 {
            y_k * factor
        } else {
            (y_k.ln() + s).exp()
        };
        block_sum.add(term / k as f64);
        if k == lo + 1 {
            break;
        }
        let kf = k as f64;
        let y_km1 = ((2.0 * kf + alpha + beta - 1.0) * y_k - kf * y_k1) / (kf + alpha - 1.0);
        y_k1 = y_k;
        y_k = y_km1;
        k -= 1;
        if y_k.abs() > 1e250 {
            s += y_k.abs().ln();
            factor = s.exp();
            y_k1 /= y_k.abs();
            y_k = y_k.signum();
        }
    }
    if !(y_k > 0.0) {
        return Err(Error::nonconv(
            "c1_avg_capacity",
            "recurrence lost positivity",
        ));
    }
    // y_k now holds J_{lo+1}
    let bottom = y_k.ln() + s;
    match *prev_seed {
        Some(anchor) => {
            if (bottom - anchor).abs() > ANCHOR_TOL {
                return Err(Error::nonconv(
                    "c1_avg_capacity",
                    format!("recurrence and quadrature disagree at term {}", lo + 1),
                ));
            }
        }
        None => {
            // one more step reaches J_0 = 1
            let j0 = ((alpha + beta + 1.0) * y_k - y_k1) / alpha;
            let l0 = j0.ln() + s;
            if !(l0.abs() <= ANCHOR_TOL) {
                return Err(Error::nonconv(
                    "c1_avg_capacity",
                    format!("normalization check failed (ln J_0 = {l0:e})"),
                ));
            }
        }
    }
    *prev_seed = Some(seed_hi1);
    Ok(block_sum.value())
}

// Least-squares-free fit of t_k k^p = a0 + a1/k + ... through the given points.
#[allow(clippy::needless_range_loop)]
fn tail_from_fit(p: f64, pts: &[(f64, f64)], from: f64) -> f64 {
    let n = pts.len();
    // Vandermonde system in 1/k, solved by Gaussian elimination (n <= 3)
    let mut m = vec![vec![0.0; n + 1]; n];
    for (i, &(k, t)) in pts.iter().enumerate() {
        for j in 0..n {
            m[i][j] = k.powi(-(j as i32));
        }
        m[i][n] = t * k.powf(p);
    }
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))
            .unwrap();
        m.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for j in c..=n {
                    m[r][j] -= f * m[c][j];
                }
            }
        }
    }
    (0..n)
        .map(|j| m[j][n] / m[j][j] * hurwitz_zeta(p + j as f64, from))
        .sum()
}

// (-1)^k C(1/2, k) = -Gamma(k - 1/2) / (2 sqrt(pi) Gamma(k + 1)), always negative.
fn ln_abs_sqrt_coef(k: f64) -> Result<f64> {
    Ok(ln_gamma_ratio(k + 1.0, -1.5)? - (2.0 * PI.sqrt()).ln())
}

/// `E[sqrt(V(gamma))]` under a Gamma fit, in bits per channel use.
pub fn c2_avg_sqrt_dispersion(fit: &GammaFit, policy: &EvalPolicy) -> Result<f64> {
    policy.validate()?;
    let (alpha, beta) = (fit.shape(), fit.rate());
    let ln_norm = alpha * beta.ln() - ln_gamma(alpha)?;
    let ln_m = |j: f64| -> Result<f64> {
        Ok(ln_norm + ln_u_integral(alpha, alpha + 1.0 - j, beta, policy)?)
    };
    let finish = |s: f64| (s / LN_2).clamp(0.0, 1.0 / LN_2);

    // For alpha > 1, the terms past K sum to at most
    //   |c_{K+1}| E[(1+gamma)^(-2K) / (gamma (2 + gamma))]
    //     <= |c_{K+1}| beta / (2 (alpha-1)) * beta^(alpha-1) U(alpha-1, alpha-2K, beta).
    let tail_bound = |k: usize| -> Result<Option<f64>> {
        if alpha <= 1.0 {
            return Ok(None);
        }
        let kf = k as f64;
        let l = ln_abs_sqrt_coef(kf + 1.0)? + (alpha - 1.0) * beta.ln() - ln_gamma(alpha - 1.0)?
            + ln_u_integral(alpha - 1.0, alpha - 2.0 * kf, beta, policy)?
            + (beta / (2.0 * (alpha - 1.0))).ln();
        Ok(Some(l.exp()))
    };
    // geometric stop, confirmed by the bound when there is one
    let converged = |k: usize, term: f64, r: f64, s: f64, pre_asymptotic: bool| -> Result<bool> {
        let r_max = if alpha > 1.0 { 1.0 } else { 0.999 };
        if !(r > 0.0 && (r <= 0.5 || (pre_asymptotic && r < r_max))) {
            return Ok(false);
        }
        let tail = term.abs() * r / (1.0 - r);
        if tail > policy.rel_tol * s.abs() {
            return Ok(false);
        }
        Ok(match tail_bound(k)? {
            Some(b) => b <= policy.rel_tol * s.abs(),
            None => true,
        })
    };

    let cap = policy.max_series_terms;
    // forward recurrence j M_{j+1} = (j - alpha - beta) M_j + beta M_{j-1} is
    // stable once M_j is the dominant solution
    let switch_k = ((alpha + beta + 8.0).ceil() as usize).max(8);
    let fit_start = (4.0 * (alpha + beta) + 64.0).ceil() as usize;
    let p = 1.5 + alpha;

    let mut sum = Neumaier::new(1.0);
    let mut coef = 1.0; // (-1)^k C(1/2, k)
    let mut prev_term = f64::NAN;

    // terms one at a time
    let direct_end = (switch_k - 1).min(C2_DIRECT_TERMS).min(cap);
    for k in 1..=direct_end {
        let kf = k as f64;
        coef *= (kf - 1.5) / kf;
        let term = coef * ln_m(2.0 * kf)?.exp();
        sum.add(term);
        if k >= 2
            && converged(
                k,
                term,
                term / prev_term,
                sum.value(),
                2.0 * kf <= alpha + beta,
            )?
        {
            return Ok(finish(sum.value()));
        }
        prev_term = term;
    }
    let mut next = direct_end + 1;

    // slowly decaying bulk before the recurrence becomes stable
    if next < switch_k {
        let ln_term = |t: f64| -> Result<f64> { Ok(ln_abs_sqrt_coef(t)? + ln_m(2.0 * t)?) };
        let mut lo = next - 1;
        while lo + 1 < switch_k && lo < cap {
            let hi = lo.saturating_mul(2).min(switch_k - 1).min(cap);
            let b = euler_maclaurin_block(&ln_term, lo + 1, hi, policy, "c2_avg_sqrt_dispersion")?;
            sum.add(-b.sum);
            let last = -b.ln_last.exp();
            if converged(hi, last, b.end_log_slope.exp(), sum.value(), true)? {
                return Ok(finish(sum.value()));
            }
            lo = hi;
        }
        next = lo + 1;
        coef = -ln_abs_sqrt_coef(next as f64 - 1.0)?.exp();
        prev_term = f64::NAN;
    }

    // forward recurrence and the algebraic tail
    let mut checkpoints: Vec<(f64, f64)> = Vec::new();
    let mut m_odd = f64::NAN; // M_{2k-1}
    let mut m_even = f64::NAN; // M_{2k}
    let mut anchor_checked = false;
    for k in next..=cap {
        let kf = k as f64;
        coef *= (kf - 1.5) / kf;
        let m2k = if k == next {
            m_odd = ln_m(2.0 * kf - 1.0)?.exp();
            m_even = ln_m(2.0 * kf)?.exp();
            m_even
        } else {
            let j = (2 * k - 2) as f64;
            let m_next = ((j - alpha - beta) * m_even + beta * m_odd) / j;
            let j1 = j + 1.0;
            let m_next2 = ((j1 - alpha - beta) * m_next + beta * m_even) / j1;
            m_odd = m_next;
            m_even = m_next2;
            if !anchor_checked && k >= 2 * next {
                let q = ln_m(2.0 * kf)?.exp();
                if ((m_even - q) / q).abs() > ANCHOR_TOL {
                    return Err(Error::nonconv(
                        "c2_avg_sqrt_dispersion",
                        format!("recurrence and quadrature disagree at order {}", 2 * k),
                    ));
                }
                anchor_checked = true;
            }
            m_even
        };
        let term = coef * m2k;
        sum.add(term);
        let s = sum.value();

        if k > next && converged(k, term, term / prev_term, s, 2.0 * kf <= alpha + beta)? {
            return Ok(finish(s));
        }
        prev_term = term;

        // algebraic tail t_k ~ k^-p (a0 + a1/k + a2/k^2) past the bulk
        if k.is_power_of_two() {
            checkpoints.push((kf, term));
            if k >= fit_start && k >= 4 * next && checkpoints.len() >= 3 {
                let n = checkpoints.len();
                let three = [checkpoints[n - 3], checkpoints[n - 2], checkpoints[n - 1]];
                let tail3 = tail_from_fit(p, &three, kf + 1.0);
                let tail2 = tail_from_fit(p, &three[1..], kf + 1.0);
                let total = s + tail3;
                let err = (tail3 - tail2).abs();
                if err <= policy.rel_tol * total.abs() {
                    return Ok(finish(total));
                }
                if k == cap || 2 * k > cap {
                    if err <= CAP_TAIL_TOL * total.abs() {
                        return Ok(finish(total));
                    }
                    return Err(Error::nonconv(
                        "c2_avg_sqrt_dispersion",
                        format!("{k} terms leave a relative tail error of {:e}", err / total),
                    ));
                }
            }
        }
    }
    Err(Error::nonconv(
        "c2_avg_sqrt_dispersion",
        format!("no convergence within {cap} terms"),
    ))
}
