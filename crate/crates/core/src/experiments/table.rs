//! Tabular figure output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::Overrides;
use crate::error::{Error, Result};
use crate::montecarlo::McConfig;

/// What a column holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnKind {
    /// The x-axis.
    Axis,
    /// A closed-form or special-function value.
    Analytic,
    /// A Monte Carlo estimate; `stream_id` is the stream of the first point,
    /// later points use consecutive streams.
    MonteCarlo {
        realizations: usize,
        seed: u64,
        stream_id: u64,
    },
}

impl ColumnKind {
    pub fn monte_carlo(mc: &McConfig) -> Self {
        ColumnKind::MonteCarlo {
            realizations: mc.realizations,
            seed: mc.seed,
            stream_id: mc.stream_id,
        }
    }
}

/// One named series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub kind: ColumnKind,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, kind: ColumnKind) -> Self {
        Column {
            name: name.into(),
            unit: unit.into(),
            kind,
            values: Vec::new(),
        }
    }

    fn header(&self) -> String {
        match &self.kind {
            ColumnKind::MonteCarlo {
                realizations,
                seed,
                stream_id,
            } => format!(
                "{} [{}] (mc realizations={} seed={} stream={})",
                self.name, self.unit, realizations, seed, stream_id
            ),
            _ => format!("{} [{}]", self.name, self.unit),
        }
    }
}

/// Output of one figure run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub figure: String,
    /// SHA-256 of the figure id and resolved configuration.
    pub fingerprint: String,
    /// Resolved base configuration in flat form.
    pub config: Overrides,
    /// Scalar results such as thresholds and medians.
    pub summary: BTreeMap<String, f64>,
    pub columns: Vec<Column>,
}

// 17 significant digits round-trip every f64.
fn cell(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

impl ResultTable {
    pub(crate) fn new(figure: &str, config: Overrides, columns: Vec<Column>) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.values.len());
        if let Some(bad) = columns.iter().find(|c| c.values.len() != rows) {
            return Err(Error::InsufficientData {
                detail: format!(
                    "column {} has {} rows, expected {rows}",
                    bad.name,
                    bad.values.len()
                ),
            });
        }
        let mut h = Sha256::new();
        h.update(figure.as_bytes());
        h.update(b"\n");
        h.update(Value::Object(config.clone()).to_string().as_bytes());
        let fingerprint = h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        Ok(ResultTable {
            figure: figure.to_string(),
            fingerprint,
            config,
            summary: BTreeMap::new(),
            columns,
        })
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Values of a named column.
    pub fn values(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::InsufficientData {
                detail: format!("table {} has no column {name}", self.figure),
            })
    }

    /// Header row with names and units, then one row per x value.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.columns.iter().map(Column::header).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|c| cell(c.values[i])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Full table as JSON.
    pub fn to_json(&self) -> String {
        // serde_json writes the shortest round-tripping form of each f64;
        // non-finite values become null
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }

    /// Configuration, seed and summary without the data columns.
    pub fn sidecar_json(&self) -> String {
        let v = serde_json::json!({
            "figure": self.figure,
            "fingerprint": self.fingerprint,
            "seed": self.config.get("seed"),
            "config": self.config,
            "summary": self.summary,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("sidecar serializes");
        s.push('\n');
        s
    }
}
