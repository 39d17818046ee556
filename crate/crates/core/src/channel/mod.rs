//! Channel model: geometry and path loss, RIS phase-error models, moments of
//! the end-to-end SNR and their Gamma moment-matching fit.
//!
//! The unnormalized SNR is
//!
//! ```text
//! X = | |h_d| + sum_n a_n b_n e^{j phi_n} |^2,   gamma = rho X
//! ```
//!
//! where `|h_d|`, `a_n`, `b_n` are Rayleigh amplitudes with mean powers
//! `direct`, `ap_ris` and `ris_ac`, and `phi_n` is the residual phase error of
//! element `n`.

mod moments;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{gamma_cdf, sinc_norm};

pub use moments::{asymptotic_trend, closed_form, moments_x, TrendReport};

/// Mean channel power gains of the three links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGains {
    /// AP to AC direct link; zero when the direct path is blocked.
    pub direct: f64,
    /// AP to RIS, per element.
    pub ap_ris: f64,
    /// RIS to AC, per element.
    pub ris_ac: f64,
}

impl LinkGains {
    pub fn new(direct: f64, ap_ris: f64, ris_ac: f64) -> Result<Self> {
        let g = LinkGains {
            direct,
            ap_ris,
            ris_ac,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.direct >= 0.0) || !self.direct.is_finite() {
            return Err(Error::domain(
                "LinkGains",
                "direct gain must be finite and >= 0",
            ));
        }
        for (name, v) in [("ap_ris", self.ap_ris), ("ris_ac", self.ris_ac)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(
                    "LinkGains",
                    format!("{name} gain must be positive"),
                ));
            }
        }
        Ok(())
    }

    /// Same gains with the direct link removed.
    pub fn without_direct(self) -> Self {
        LinkGains {
            direct: 0.0,
            ..self
        }
    }

    /// Product of the two cascade gains.
    pub fn cascade(&self) -> f64 {
        self.ap_ris * self.ris_ac
    }
}

/// Residual phase error at the RIS elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseModel {
    /// Ideal phase alignment.
    Perfect,
    /// Independent errors uniform on `[-s pi, s pi]`, `s` in `[0, 1]`.
    UniformSpread(f64),
    /// Alignment phases snapped to a `b`-bit uniform codebook.
    QuantizedBits(u32),
}

impl PhaseModel {
    /// Spread `s` of the equivalent uniform error; `b` bits give `2^-b`.
    pub fn spread(&self) -> f64 {
        match *self {
            PhaseModel::Perfect => 0.0,
            PhaseModel::UniformSpread(s) => s,
            PhaseModel::QuantizedBits(b) => 0.5f64.powi(b as i32),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PhaseModel::Perfect => Ok(()),
            PhaseModel::UniformSpread(s) if (0.0..=1.0).contains(&s) => Ok(()),
            PhaseModel::UniformSpread(s) => Err(Error::config(
                "phase",
                format!("uniform spread {s} must lie in [0, 1]"),
            )),
            PhaseModel::QuantizedBits(b) if (1..=24).contains(&b) => Ok(()),
            PhaseModel::QuantizedBits(b) => Err(Error::config(
                "phase",
                format!("quantizer resolution {b} bits must lie in 1..=24"),
            )),
        }
    }

    /// Short label used in column names, e.g. `perfect`, `2bit`, `spread0.25`.
    pub fn label(&self) -> String {
        match *self {
            PhaseModel::Perfect => "perfect".to_string(),
            PhaseModel::UniformSpread(s) => format!("spread{s}"),
            PhaseModel::QuantizedBits(b) => format!("{b}bit"),
        }
    }
}

impl fmt::Display for PhaseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PhaseModel::Perfect => write!(f, "perfect"),
            PhaseModel::UniformSpread(s) => write!(f, "spread:{s}"),
            PhaseModel::QuantizedBits(b) => write!(f, "bits:{b}"),
        }
    }
}

impl FromStr for PhaseModel {
    type Err = Error;

    /// Accepts `perfect`, `spread:<s>` and `bits:<b>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::config("phase", format!("cannot parse phase model `{s}`"));
        let model = if s.eq_ignore_ascii_case("perfect") {
            PhaseModel::Perfect
        } else if let Some(v) = s.strip_prefix("spread:") {
            PhaseModel::UniformSpread(v.trim().parse().map_err(|_| bad())?)
        } else if let Some(v) = s.strip_prefix("bits:") {
            PhaseModel::QuantizedBits(v.trim().parse().map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        model.validate()?;
        Ok(model)
    }
}

impl Serialize for PhaseModel {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PhaseModel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The six phase-error expectations for independent uniform errors on
/// `[-s pi, s pi]`; indices `n`, `m`, `k` are distinct.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseExpectations {
    /// `E[cos phi_n]`
    pub cos: f64,
    /// `E[cos^2 phi_n]`
    pub cos_sq: f64,
    /// `E[cos(phi_n - phi_m)]`
    pub cos_diff: f64,
    /// `E[cos^2(phi_n - phi_m)]`
    pub cos_diff_sq: f64,
    /// `E[cos phi_n cos(phi_n - phi_m)]`
    pub cos_times_cos_diff: f64,
    /// `E[cos(phi_n - phi_m) cos(phi_k - phi_n)]`
    pub cos_diff_times_cos_diff: f64,
}

impl PhaseExpectations {
    /// Characteristic function `E[e^{j k phi}]` for `k` in `0..=2`.
    pub(crate) fn characteristic(&self, k: u32) -> f64 {
        match k {
            0 => 1.0,
            1 => self.cos,
            2 => 2.0 * self.cos_sq - 1.0,
            _ => unreachable!("only orders up to 2 are needed"),
        }
    }
}

pub fn phase_expectations(spread: f64) -> Result<PhaseExpectations> {
    if !(0.0..=1.0).contains(&spread) {
        return Err(Error::domain(
            "phase_expectations",
            format!("spread {spread} not in [0, 1]"),
        ));
    }
    let s1 = sinc_norm(spread);
    let s2 = sinc_norm(2.0 * spread);
    Ok(PhaseExpectations {
        cos: s1,
        cos_sq: 0.5 * (1.0 + s2),
        cos_diff: s1 * s1,
        cos_diff_sq: 0.5 * (1.0 + s2 * s2),
        cos_times_cos_diff: s1 * 0.5 * (1.0 + s2),
        cos_diff_times_cos_diff: 0.5 * (1.0 + s2) * s1 * s1,
    })
}

/// First two raw moments of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub m1: f64,
    pub m2: f64,
}

impl Moments {
    pub fn variance(&self) -> f64 {
        self.m2 - self.m1 * self.m1
    }
}

/// Gamma distribution with shape `alpha` and rate `beta` (mean `alpha/beta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    shape: f64,
    rate: f64,
}

impl GammaFit {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0) || !shape.is_finite() || !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::domain(
                "GammaFit",
                format!("shape {shape} and rate {rate} must be positive and finite"),
            ));
        }
        Ok(GammaFit { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        gamma_cdf(x, self.shape, self.rate)
    }
}

/// Moment-matched Gamma law of `gamma = rho X`.
pub fn gamma_fit(moments: &Moments, rho: f64) -> Result<GammaFit> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(
            "gamma_fit",
            format!("rho = {rho} must be positive"),
        ));
    }
    let var = moments.variance();
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::DegenerateMoments { variance: var });
    }
    let m1 = moments.m1;
    GammaFit::new(m1 * m1 / var, m1 / (rho * var))
}

/// Transmit and receiver-noise parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub tx_power_w: f64,
    pub noise_density_w_per_hz: f64,
    pub bandwidth_hz: f64,
    /// Linear noise figure (not dB).
    pub noise_figure: f64,
    /// Carried for reporting; the path-loss law does not use it.
    pub carrier_frequency_hz: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            tx_power_w: 0.2,
            noise_density_w_per_hz: 10f64.powf((-174.0 - 30.0) / 10.0),
            bandwidth_hz: 200e3,
            noise_figure: 10f64.powf(0.3),
            carrier_frequency_hz: 1900e6,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tx_power_w", self.tx_power_w),
            ("noise_density_w_per_hz", self.noise_density_w_per_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_figure", self.noise_figure),
            ("carrier_frequency_hz", self.carrier_frequency_hz),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Transmit SNR scale `rho = p / (N0 W F)`.
pub fn snr_scale(radio: &RadioConfig) -> Result<f64> {
    radio.validate()?;
    Ok(radio.tx_power_w / (radio.noise_density_w_per_hz * radio.bandwidth_hz * radio.noise_figure))
}

/// Point in the horizontal plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    fn dist(&self, o: &Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// Node placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub ap: Point2,
    pub ac: Point2,
    pub ris: Point2,
    /// AP antenna height above the plane of the RIS and AC.
    pub ap_height_m: f64,
    /// Include the AP height in AP distances. Off by default (planar).
    pub use_3d: bool,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            ap: Point2::new(0.0, 0.0),
            ac: Point2::new(100.0, 0.0),
            ris: Point2::new(95.0, 10.0),
            ap_height_m: 12.5,
            use_3d: false,
        }
    }
}

impl Geometry {
    fn ap_dist(&self, p: &Point2) -> f64 {
        let d = self.ap.dist(p);
        if self.use_3d {
            d.hypot(self.ap_height_m)
        } else {
            d
        }
    }

    /// Distances `(AP-AC, AP-RIS, RIS-AC)` in meters.
    pub fn distances(&self) -> (f64, f64, f64) {
        (
            self.ap_dist(&self.ac),
            self.ap_dist(&self.ris),
            self.ris.dist(&self.ac),
        )
    }
}

/// Log-distance path loss `PL(D) = intercept + 10 n log10(D)` dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub intercept_db: f64,
    /// Exponent `n` of the cascaded AP-RIS and RIS-AC hops.
    pub exponent: f64,
    /// Exponent of the direct AP-AC link.
    pub direct_exponent: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            intercept_db: 34.53,
            exponent: 3.8,
            direct_exponent: 3.8,
        }
    }
}

impl PathLossModel {
    /// Linear gain `10^(-PL(D)/10)`.
    pub fn gain(&self, distance_m: f64, exponent: f64) -> Result<f64> {
        if !(distance_m > 0.0) || !distance_m.is_finite() {
            return Err(Error::domain(
                "path_loss_gain",
                format!("distance {distance_m} m must be positive"),
            ));
        }
        Ok(10f64.powf(-(self.intercept_db + 10.0 * exponent * distance_m.log10()) / 10.0))
    }
}

/// Gain of the default path-loss law `34.53 + 38 log10(D)` dB.
pub fn path_loss_gain(distance_m: f64) -> Result<f64> {
    let m = PathLossModel::default();
    m.gain(distance_m, m.exponent)
}

/// Mean link gains implied by a placement.
pub fn link_gains(
    geometry: &Geometry,
    model: &PathLossModel,
    direct_link: bool,
) -> Result<LinkGains> {
    let (d_direct, d_ap_ris, d_ris_ac) = geometry.distances();
    let direct = if direct_link {
        model.gain(d_direct, model.direct_exponent)?
    } else {
        0.0
    };
    LinkGains::new(
        direct,
        model.gain(d_ap_ris, model.exponent)?,
        model.gain(d_ris_ac, model.exponent)?,
    )
}
