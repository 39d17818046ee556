//! Monte Carlo sampling of the composite RIS channel.
//!
//! Every sample is drawn from its own position in a ChaCha8 keystream keyed by
//! `(seed, stream_id, index)`, so a batch is reproducible bit for bit no
//! matter how many worker threads produced it. Sums over elements and over
//! samples run in a fixed order for the same reason.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{GammaFit, LinkGains, PhaseModel};
use crate::error::{Error, Result};
use crate::fbl::{
    capacity, dispersion, instantaneous_bler, instantaneous_blocklength, instantaneous_rate,
    AvgMetrics,
};
use crate::specfun::sum::{pairwise_sum, Neumaier};

// Keystream words reserved per sample; far more than N = 10^6 elements use.
const WORDS_PER_SAMPLE_LOG2: u32 = 36;
const MIN_KS_SAMPLES: usize = 1000;

/// Sampling controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub realizations: usize,
    pub seed: u64,
    pub stream_id: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            realizations: 10_000,
            seed: 20_240_601,
            stream_id: 0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::config("realizations", "must be positive"));
        }
        Ok(())
    }

    /// Same seed, different stream.
    pub fn with_stream(self, stream_id: u64) -> Self {
        McConfig { stream_id, ..self }
    }

    fn rng_for(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos((index as u128) << WORDS_PER_SAMPLE_LOG2);
        rng
    }
}

// Circularly symmetric complex Gaussian with E|z|^2 = 2 s^2.
fn complex_gaussian<R: Rng>(rng: &mut R, s: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

// Index of the level of {-pi + q delta} nearest to `ideal` in [-pi, pi).
fn nearest_level(ideal: f64, levels: usize) -> usize {
    let delta = 2.0 * PI / levels as f64;
    (((ideal + PI) / delta).round() as usize) % levels
}

#[cfg(test)]
fn quantized_residual(ideal: f64, levels: usize) -> f64 {
    let delta = 2.0 * PI / levels as f64;
    wrap_phase(-PI + nearest_level(ideal, levels) as f64 * delta - ideal)
}

// Maps to [-pi, pi).
fn wrap_phase(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

// Phase shifts available to a b-bit surface, as unit phasors.
fn codebook(bits: u32) -> Vec<Complex64> {
    let levels = 1usize << bits;
    let delta = 2.0 * PI / levels as f64;
    (0..levels)
        .map(|q| Complex64::from_polar(1.0, -PI + q as f64 * delta))
        .collect()
}

// The surface co-phases every cascade with the direct path, so only the
// residual phase errors phi_n enter relative to |h_d|.
fn one_sample(
    gains: &LinkGains,
    n: usize,
    phase: PhaseModel,
    book: &[Complex64],
    rng: &mut ChaCha8Rng,
) -> f64 {
    let sd = |power: f64| (0.5 * power).sqrt();
    let (s_h, s_g) = (sd(gains.ap_ris), sd(gains.ris_ac));
    let direct = if gains.direct > 0.0 {
        complex_gaussian(rng, sd(gains.direct))
    } else {
        Complex64::new(0.0, 0.0)
    };
    let direct_amp = direct.norm_sqr().sqrt();
    let mut re = Neumaier::new(0.0);
    let mut im = Neumaier::new(0.0);
    match phase {
        PhaseModel::Perfect => {
            for _ in 0..n {
                let h = complex_gaussian(rng, s_h);
                let g = complex_gaussian(rng, s_g);
                re.add((h.norm_sqr() * g.norm_sqr()).sqrt());
            }
        }
        PhaseModel::UniformSpread(s) => {
            for _ in 0..n {
                let h = complex_gaussian(rng, s_h);
                let g = complex_gaussian(rng, s_g);
                let amp = (h.norm_sqr() * g.norm_sqr()).sqrt();
                if s > 0.0 {
                    let (sin, cos) = rng.random_range(-s * PI..s * PI).sin_cos();
                    re.add(amp * cos);
                    im.add(amp * sin);
                } else {
                    re.add(amp);
                }
            }
        }
        PhaseModel::QuantizedBits(_) => {
            // sum in the absolute frame, then rotate by -arg h_d
            let psi = direct.im.atan2(direct.re);
            for _ in 0..n {
                let h = complex_gaussian(rng, s_h);
                let g = complex_gaussian(rng, s_g);
                let c = h * g;
                let ideal = wrap_phase(psi - c.im.atan2(c.re));
                let z = c * book[nearest_level(ideal, book.len())];
                re.add(z.re);
                im.add(z.im);
            }
            let rot = Complex64::new(psi.cos(), -psi.sin());
            let z = Complex64::new(re.value(), im.value()) * rot;
            return (direct_amp + z.re).powi(2) + z.im * z.im;
        }
    }
    (direct_amp + re.value()).powi(2) + im.value().powi(2)
}

/// Draws `mc.realizations` SNR samples `rho |h_d + sum_n a_n b_n e^{j phi_n}|^2`.
pub fn sample_snr_batch(
    gains: &LinkGains,
    n: usize,
    phase: PhaseModel,
    rho: f64,
    mc: &McConfig,
) -> Result<Vec<f64>> {
    gains.validate()?;
    phase.validate()?;
    mc.validate()?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::config(
            "rho",
            "SNR scale must be positive and finite",
        ));
    }
    let book = match phase {
        PhaseModel::QuantizedBits(b) => codebook(b),
        _ => Vec::new(),
    };
    Ok((0..mc.realizations)
        .into_par_iter()
        .map(|i| {
            let mut rng = mc.rng_for(i);
            rho * one_sample(gains, n, phase, &book, &mut rng)
        })
        .collect())
}

/// Empirical summary of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    pub second_moment: f64,
    pub sorted_samples: Vec<f64>,
}

impl SampleStats {
    pub fn len(&self) -> usize {
        self.sorted_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_samples.is_empty()
    }

    /// Standard error of the sample mean.
    pub fn mean_std_error(&self) -> f64 {
        let n = self.len() as f64;
        let var = (self.second_moment - self.mean * self.mean).max(0.0) * n / (n - 1.0).max(1.0);
        (var / n).sqrt()
    }

    /// Standard error of the raw second moment.
    pub fn second_moment_std_error(&self) -> f64 {
        let sq: Vec<f64> = self.sorted_samples.iter().map(|x| x * x).collect();
        let n = sq.len() as f64;
        let m = self.second_moment;
        let dev: Vec<f64> = sq.iter().map(|v| (v - m) * (v - m)).collect();
        (pairwise_sum(&dev) / (n - 1.0).max(1.0) / n).sqrt()
    }

    /// Empirical quantile by linear interpolation between order statistics.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::InsufficientData {
                detail: "no samples".into(),
            });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(
                "quantile",
                format!("p = {p} is not in [0, 1]"),
            ));
        }
        let xs = &self.sorted_samples;
        let pos = p * (xs.len() - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        Ok(match xs.get(i + 1) {
            Some(&next) => xs[i] + frac * (next - xs[i]),
            None => xs[i],
        })
    }
}

/// Sample mean, raw second moment and sorted copy.
pub fn empirical_stats(samples: &[f64]) -> Result<SampleStats> {
    if samples.is_empty() {
        return Err(Error::InsufficientData {
            detail: "empirical statistics need at least one sample".into(),
        });
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::domain(
            "empirical_stats",
            format!("non-finite sample {bad}"),
        ));
    }
    let n = samples.len() as f64;
    let sq: Vec<f64> = samples.iter().map(|x| x * x).collect();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SampleStats {
        mean: pairwise_sum(samples) / n,
        second_moment: pairwise_sum(&sq) / n,
        sorted_samples: sorted,
    })
}

/// Kolmogorov-Smirnov distance between the empirical CDF and a Gamma fit.
pub fn ks_distance(stats: &SampleStats, fit: &GammaFit) -> Result<f64> {
    let n = stats.len();
    if n < MIN_KS_SAMPLES {
        return Err(Error::InsufficientData {
            detail: format!("KS distance needs at least {MIN_KS_SAMPLES} samples, got {n}"),
        });
    }
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in stats.sorted_samples.iter().enumerate() {
        let f = fit.cdf(x)?;
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Sample averages of the instantaneous FBL metrics.
///
/// BLER uses the exact Q-function form per sample. There is no sample-side
/// lower bound, so `avg_rate_lb` is `None`.
pub fn mc_avg_metrics(samples: &[f64], l: f64, r: f64, target_bler: f64) -> Result<AvgMetrics> {
    if samples.is_empty() {
        return Err(Error::InsufficientData {
            detail: "metric averages need at least one sample".into(),
        });
    }
    let n = samples.len() as f64;
    let collect = |f: &(dyn Fn(f64) -> Result<f64> + Sync)| -> Result<f64> {
        let v: Vec<f64> = samples.par_iter().map(|&g| f(g)).collect::<Result<_>>()?;
        Ok(pairwise_sum(&v) / n)
    };
    Ok(AvgMetrics {
        avg_capacity: collect(&|g| Ok(capacity(g)))?,
        avg_rate: collect(&|g| instantaneous_rate(g, r, target_bler))?,
        avg_rate_lb: None,
        avg_bler: collect(&|g| instantaneous_bler(g, r, l))?,
        avg_blocklength: collect(&|g| instantaneous_blocklength(g, l, target_bler))?,
        avg_sqrt_dispersion: collect(&|g| Ok(dispersion(g).sqrt()))?,
    })
}
