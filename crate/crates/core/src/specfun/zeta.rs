//! Hurwitz zeta function for tail sums of algebraically decaying series.

// B_{2j} / (2j)!
const BERN_OVER_FACT: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
];

/// `sum_{i>=0} (q+i)^(-s)` for `s > 1`, `q > 0`.
pub(crate) fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    debug_assert!(s > 1.0 && q > 0.0);
    let shift = (16.0 + s - q).ceil().max(0.0) as usize;
    let mut head = 0.0;
    for i in (0..shift).rev() {
        head += (q + i as f64).powf(-s);
    }
    let w = q + shift as f64;
    let mut tail = w.powf(1.0 - s) / (s - 1.0) + 0.5 * w.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) times w^(-s-2j+1)
    let mut fac = s * w.powf(-s - 1.0);
    for (j, c) in BERN_OVER_FACT.iter().enumerate() {
        tail += c * fac;
        let k = 2.0 * j as f64;
        fac *= (s + k + 1.0) * (s + k + 2.0) / (w * w);
    }
    head + tail
}
