//! Scenario configuration and figure reproduction.
//!
//! A [`ScenarioConfig`] bundles everything needed to evaluate one operating
//! point. It reads and writes a flat key/value form (see [`KEYS`]) so that
//! config files and command-line overrides share one vocabulary. Decibel
//! inputs are only accepted under explicitly suffixed keys.

mod figures;
mod table;

use serde_json::{Map, Value};

use crate::channel::{
    gamma_fit, link_gains, moments_x, snr_scale, GammaFit, Geometry, LinkGains, Moments,
    PathLossModel, PhaseModel, Point2, RadioConfig,
};
use crate::error::{Error, Result};
use crate::fbl::{avg_metrics, AvgMetrics, PacketConfig};
use crate::montecarlo::{sample_snr_batch, McConfig};
use crate::specfun::EvalPolicy;

pub use figures::{
    calibrate_ris_y, required_elements, run_figure, FigureId, CALIBRATED_RIS_Y, D_GRID, N_GRID,
};
pub use table::{Column, ColumnKind, ResultTable};

/// Partial configuration in flat form.
pub type Overrides = Map<String, Value>;

/// Every accepted flat key.
pub const KEYS: &[&str] = &[
    "ap_x",
    "ap_y",
    "ac_x",
    "ac_y",
    "ris_x",
    "ris_y",
    "ap_height_m",
    "use_3d_distance",
    "path_loss_intercept_db",
    "path_loss_exponent",
    "direct_path_loss_exponent",
    "tx_power_w",
    "tx_power_dbm",
    "noise_density_w_per_hz",
    "noise_density_dbm_per_hz",
    "bandwidth_hz",
    "noise_figure",
    "noise_figure_db",
    "carrier_frequency_hz",
    "info_bits",
    "blocklength",
    "target_bler",
    "n_elements",
    "phase",
    "direct_link",
    "realizations",
    "seed",
    "stream_id",
    "max_series_terms",
    "rel_tol",
    "quadrature_points",
];

// Linear key and its decibel alternative.
const DB_PAIRS: &[(&str, &str)] = &[
    ("tx_power_w", "tx_power_dbm"),
    ("noise_density_w_per_hz", "noise_density_dbm_per_hz"),
    ("noise_figure", "noise_figure_db"),
];

/// Complete description of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: Geometry,
    pub path_loss: PathLossModel,
    pub radio: RadioConfig,
    pub packet: PacketConfig,
    pub n_elements: usize,
    pub phase: PhaseModel,
    pub direct_link: bool,
    pub mc: McConfig,
    pub policy: EvalPolicy,
}

impl Default for ScenarioConfig {
    /// Default link parameters with the RIS at the calibrated placement
    /// `(95, CALIBRATED_RIS_Y)`, 512 elements and phase errors uniform on
    /// `[-pi/4, pi/4]`.
    fn default() -> Self {
        let geometry = Geometry {
            ris: Point2::new(95.0, CALIBRATED_RIS_Y),
            ..Geometry::default()
        };
        ScenarioConfig {
            geometry,
            path_loss: PathLossModel::default(),
            radio: RadioConfig::default(),
            packet: PacketConfig::default(),
            n_elements: 512,
            phase: PhaseModel::UniformSpread(0.25),
            direct_link: true,
            mc: McConfig::default(),
            policy: EvalPolicy::default(),
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| Error::config(key, format!("expected a number, got {v}")))?;
    if !x.is_finite() {
        return Err(Error::config(key, "must be finite"));
    }
    Ok(x)
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    if let Some(x) = v.as_u64() {
        return Ok(x);
    }
    match v.as_f64() {
        Some(x) if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(64) => Ok(x as u64),
        _ => Err(Error::config(
            key,
            format!("expected a non-negative integer, got {v}"),
        )),
    }
}

fn as_u32(key: &str, v: &Value) -> Result<u32> {
    u32::try_from(as_u64(key, v)?).map_err(|_| Error::config(key, "integer is too large"))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    usize::try_from(as_u64(key, v)?).map_err(|_| Error::config(key, "integer is too large"))
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::String(s) if s == "true" || s == "false" => Ok(s == "true"),
        _ => Err(Error::config(
            key,
            format!("expected true or false, got {v}"),
        )),
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Splits `key=value`; the value is read as JSON when possible, otherwise as
/// a plain string (so `phase=bits:2` works unquoted).
pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::config(s, "override must have the form key=value"))?;
    let k = k.trim();
    let v = v.trim();
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

impl ScenarioConfig {
    /// Applies flat overrides, then validates the result.
    ///
    /// Unknown keys, and a linear key given together with its decibel
    /// alternative, are errors.
    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        for key in overrides.keys() {
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::config(key.as_str(), "unknown configuration key"));
            }
        }
        for (lin, db) in DB_PAIRS {
            if overrides.contains_key(*lin) && overrides.contains_key(*db) {
                return Err(Error::config(
                    *db,
                    format!("conflicts with `{lin}`; give one of the two"),
                ));
            }
        }
        for (key, v) in overrides {
            let k = key.as_str();
            match k {
                "ap_x" => self.geometry.ap.x = as_f64(k, v)?,
                "ap_y" => self.geometry.ap.y = as_f64(k, v)?,
                "ac_x" => self.geometry.ac.x = as_f64(k, v)?,
                "ac_y" => self.geometry.ac.y = as_f64(k, v)?,
                "ris_x" => self.geometry.ris.x = as_f64(k, v)?,
                "ris_y" => self.geometry.ris.y = as_f64(k, v)?,
                "ap_height_m" => self.geometry.ap_height_m = as_f64(k, v)?,
                "use_3d_distance" => self.geometry.use_3d = as_bool(k, v)?,
                "path_loss_intercept_db" => self.path_loss.intercept_db = as_f64(k, v)?,
                "path_loss_exponent" => self.path_loss.exponent = as_f64(k, v)?,
                "direct_path_loss_exponent" => self.path_loss.direct_exponent = as_f64(k, v)?,
                "tx_power_w" => self.radio.tx_power_w = as_f64(k, v)?,
                "tx_power_dbm" => self.radio.tx_power_w = db_to_linear(as_f64(k, v)? - 30.0),
                "noise_density_w_per_hz" => self.radio.noise_density_w_per_hz = as_f64(k, v)?,
                "noise_density_dbm_per_hz" => {
                    self.radio.noise_density_w_per_hz = db_to_linear(as_f64(k, v)? - 30.0)
                }
                "bandwidth_hz" => self.radio.bandwidth_hz = as_f64(k, v)?,
                "noise_figure" => self.radio.noise_figure = as_f64(k, v)?,
                "noise_figure_db" => self.radio.noise_figure = db_to_linear(as_f64(k, v)?),
                "carrier_frequency_hz" => self.radio.carrier_frequency_hz = as_f64(k, v)?,
                "info_bits" => self.packet.info_bits = as_u32(k, v)?,
                "blocklength" => self.packet.blocklength = as_u32(k, v)?,
                "target_bler" => self.packet.target_bler = as_f64(k, v)?,
                "n_elements" => self.n_elements = as_usize(k, v)?,
                "phase" => {
                    let s = v
                        .as_str()
                        .ok_or_else(|| Error::config(k, format!("expected a string, got {v}")))?;
                    self.phase = s.parse()?;
                }
                "direct_link" => self.direct_link = as_bool(k, v)?,
                "realizations" => self.mc.realizations = as_usize(k, v)?,
                "seed" => self.mc.seed = as_u64(k, v)?,
                "stream_id" => self.mc.stream_id = as_u64(k, v)?,
                "max_series_terms" => self.policy.max_series_terms = as_usize(k, v)?,
                "rel_tol" => self.policy.rel_tol = as_f64(k, v)?,
                "quadrature_points" => self.policy.quadrature_points = as_usize(k, v)?,
                _ => unreachable!("key list and match arms disagree on `{k}`"),
            }
        }
        self.validate()
    }

    /// Default scenario with overrides applied.
    pub fn from_overrides(overrides: &Overrides) -> Result<Self> {
        let mut c = ScenarioConfig::default();
        c.apply(overrides)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        for (name, v) in [
            ("ap_x", g.ap.x),
            ("ap_y", g.ap.y),
            ("ac_x", g.ac.x),
            ("ac_y", g.ac.y),
            ("ris_x", g.ris.x),
            ("ris_y", g.ris.y),
        ] {
            if !v.is_finite() {
                return Err(Error::config(name, "coordinate must be finite"));
            }
        }
        if !(g.ap_height_m >= 0.0) || !g.ap_height_m.is_finite() {
            return Err(Error::config("ap_height_m", "must be finite and >= 0"));
        }
        let (d0, d1, d2) = g.distances();
        if !(d0 > 0.0) {
            return Err(Error::config("ac_x", "AP and AC must not coincide"));
        }
        if !(d1 > 0.0) {
            return Err(Error::config("ris_x", "RIS and AP must not coincide"));
        }
        if !(d2 > 0.0) {
            return Err(Error::config("ris_x", "RIS and AC must not coincide"));
        }
        let pl = &self.path_loss;
        if !pl.intercept_db.is_finite() {
            return Err(Error::config("path_loss_intercept_db", "must be finite"));
        }
        for (name, v) in [
            ("path_loss_exponent", pl.exponent),
            ("direct_path_loss_exponent", pl.direct_exponent),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, "must be positive and finite"));
            }
        }
        self.radio.validate()?;
        self.packet.validate()?;
        self.phase.validate()?;
        self.mc.validate()?;
        self.policy.validate()?;
        if self.n_elements == 0 && !self.direct_link {
            return Err(Error::config(
                "n_elements",
                "must be positive when the direct link is disabled",
            ));
        }
        Ok(())
    }

    /// Resolved configuration in flat form, linear units only.
    pub fn to_flat(&self) -> Overrides {
        let g = &self.geometry;
        let mut m = Map::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        put("ap_x", g.ap.x.into());
        put("ap_y", g.ap.y.into());
        put("ac_x", g.ac.x.into());
        put("ac_y", g.ac.y.into());
        put("ris_x", g.ris.x.into());
        put("ris_y", g.ris.y.into());
        put("ap_height_m", g.ap_height_m.into());
        put("use_3d_distance", g.use_3d.into());
        put("path_loss_intercept_db", self.path_loss.intercept_db.into());
        put("path_loss_exponent", self.path_loss.exponent.into());
        put(
            "direct_path_loss_exponent",
            self.path_loss.direct_exponent.into(),
        );
        put("tx_power_w", self.radio.tx_power_w.into());
        put(
            "noise_density_w_per_hz",
            self.radio.noise_density_w_per_hz.into(),
        );
        put("bandwidth_hz", self.radio.bandwidth_hz.into());
        put("noise_figure", self.radio.noise_figure.into());
        put(
            "carrier_frequency_hz",
            self.radio.carrier_frequency_hz.into(),
        );
        put("info_bits", self.packet.info_bits.into());
        put("blocklength", self.packet.blocklength.into());
        put("target_bler", self.packet.target_bler.into());
        put("n_elements", self.n_elements.into());
        put("phase", self.phase.to_string().into());
        put("direct_link", self.direct_link.into());
        put("realizations", self.mc.realizations.into());
        put("seed", self.mc.seed.into());
        put("stream_id", self.mc.stream_id.into());
        put("max_series_terms", self.policy.max_series_terms.into());
        put("rel_tol", self.policy.rel_tol.into());
        put("quadrature_points", self.policy.quadrature_points.into());
        m
    }

    pub fn gains(&self) -> Result<LinkGains> {
        link_gains(&self.geometry, &self.path_loss, self.direct_link)
    }

    /// Transmit SNR scale `rho`.
    pub fn rho(&self) -> Result<f64> {
        snr_scale(&self.radio)
    }

    pub fn moments(&self) -> Result<Moments> {
        moments_x(&self.gains()?, self.n_elements, self.phase)
    }

    pub fn fit(&self) -> Result<GammaFit> {
        gamma_fit(&self.moments()?, self.rho()?)
    }

    /// Closed-form averages at this point.
    pub fn analyze(&self) -> Result<PointAnalysis> {
        self.validate()?;
        let gains = self.gains()?;
        let rho = self.rho()?;
        let moments = moments_x(&gains, self.n_elements, self.phase)?;
        let fit = gamma_fit(&moments, rho)?;
        let metrics = avg_metrics(&fit, &self.packet, &self.policy)?;
        Ok(PointAnalysis {
            gains,
            rho,
            moments,
            fit,
            metrics,
        })
    }

    /// Monte Carlo SNR samples at this point.
    pub fn sample_snr(&self) -> Result<Vec<f64>> {
        self.validate()?;
        sample_snr_batch(
            &self.gains()?,
            self.n_elements,
            self.phase,
            self.rho()?,
            &self.mc,
        )
    }
}

/// Everything the closed forms say about one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PointAnalysis {
    pub gains: LinkGains,
    pub rho: f64,
    pub moments: Moments,
    pub fit: GammaFit,
    pub metrics: AvgMetrics,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ov(v: Value) -> Overrides {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn flat_round_trip() {
        let c = ScenarioConfig::default();
        let back = ScenarioConfig::from_overrides(&c.to_flat()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.to_flat().len(), KEYS.len() - DB_PAIRS.len());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let e = ScenarioConfig::from_overrides(&ov(json!({"bandwith_hz": 1.0}))).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "bandwith_hz"));
    }

    #[test]
    fn decibel_keys() {
        let c = ScenarioConfig::from_overrides(&ov(json!({
            "tx_power_dbm": 23.0103, "noise_figure_db": 3.0, "noise_density_dbm_per_hz": -174.0
        })))
        .unwrap();
        let d = ScenarioConfig::default();
        assert!((c.radio.tx_power_w - 0.2).abs() < 1e-6);
        assert!((c.radio.noise_figure - d.radio.noise_figure).abs() < 1e-12);
        assert!(
            (c.radio.noise_density_w_per_hz / d.radio.noise_density_w_per_hz - 1.0).abs() < 1e-12
        );
        let e = ScenarioConfig::from_overrides(&ov(
            json!({"noise_figure": 2.0, "noise_figure_db": 3.0}),
        ))
        .unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "noise_figure_db"));
    }

    #[test]
    fn zero_bandwidth_names_field() {
        let e = ScenarioConfig::from_overrides(&ov(json!({"bandwidth_hz": 0}))).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "bandwidth_hz"));
    }

    #[test]
    fn assignments() {
        assert_eq!(parse_assignment("n_elements=64").unwrap().1, json!(64));
        assert_eq!(parse_assignment("phase=bits:2").unwrap().1, json!("bits:2"));
        assert_eq!(
            parse_assignment("direct_link=false").unwrap().1,
            json!(false)
        );
        assert!(parse_assignment("oops").is_err());
        let e = ScenarioConfig::from_overrides(&ov(json!({"info_bits": 2.5}))).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "info_bits"));
    }

    #[test]
    fn no_direct_needs_elements() {
        assert!(ScenarioConfig::from_overrides(&ov(
            json!({"n_elements": 0, "direct_link": false})
        ))
        .is_err());
        assert!(ScenarioConfig::from_overrides(&ov(json!({"n_elements": 0}))).is_ok());
    }
}
