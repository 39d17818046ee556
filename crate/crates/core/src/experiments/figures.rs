//! Figure registry: sweeps, curves and their table layout.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::table::{Column, ColumnKind, ResultTable};
use super::{Overrides, ScenarioConfig};
use crate::channel::PhaseModel;
use crate::error::{Error, Result};
use crate::fbl::{approx_sqrt_dispersion, avg_bler};
use crate::montecarlo::{empirical_stats, ks_distance, mc_avg_metrics, McConfig};

/// RIS `y` offset (m) used with `x = 95` for the element-count sweeps.
///
/// Calibrated once so that the perfect-phase, no-direct-link case needs
/// about 190 elements for a 1e-9 average BLER (see [`calibrate_ris_y`]), then
/// frozen.
pub const CALIBRATED_RIS_Y: f64 = 8.5;

/// Element counts of the N sweeps: powers of two and their midpoints.
pub const N_GRID: &[usize] = &[
    16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512, 768, 1024, 1536, 2048,
];

/// RIS `x` positions (m) of the placement sweeps, at `y = 10`.
pub const D_GRID: &[f64] = &[
    5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0, 75.0, 80.0,
    85.0, 90.0, 95.0,
];

// Direct-path exponents compared in fig6a.
const FIG6A_DIRECT_EXPONENTS: &[f64] = &[3.0, 3.4, 3.8];
// Points of the SNR axis in the CDF figures.
const CDF_POINTS: usize = 161;
// Largest element count tried by `required_elements`.
const N_CAP: usize = 1 << 16;

/// The reproducible figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig2a,
    Fig2b,
    Fig3,
    Fig4,
    Fig5,
    Fig6a,
    Fig6b,
    Fig7,
    Fig8,
}

impl FigureId {
    pub const ALL: [FigureId; 9] = [
        FigureId::Fig2a,
        FigureId::Fig2b,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6a,
        FigureId::Fig6b,
        FigureId::Fig7,
        FigureId::Fig8,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FigureId::Fig2a => "fig2a",
            FigureId::Fig2b => "fig2b",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6a => "fig6a",
            FigureId::Fig6b => "fig6b",
            FigureId::Fig7 => "fig7",
            FigureId::Fig8 => "fig8",
        }
    }

    /// Keys set by the figure itself, which overrides may not touch.
    pub fn swept_keys(&self) -> &'static [&'static str] {
        match self {
            FigureId::Fig2a => &["phase"],
            FigureId::Fig2b => &["phase", "direct_link"],
            FigureId::Fig3 | FigureId::Fig4 | FigureId::Fig7 | FigureId::Fig8 => {
                &["n_elements", "phase"]
            }
            FigureId::Fig5 | FigureId::Fig6b => &["ris_x", "phase"],
            FigureId::Fig6a => &["ris_x", "phase", "direct_path_loss_exponent"],
        }
    }

    /// Figure defaults before overrides.
    pub fn base(&self) -> ScenarioConfig {
        let mut c = ScenarioConfig {
            direct_link: false,
            ..ScenarioConfig::default()
        };
        match self {
            FigureId::Fig2a | FigureId::Fig2b => c.n_elements = 1024,
            FigureId::Fig5 => {
                c.n_elements = 512;
                c.geometry.ris.y = 10.0;
            }
            FigureId::Fig6a => {
                c.n_elements = 1024;
                c.direct_link = true;
                c.geometry.ris.y = 10.0;
            }
            FigureId::Fig6b => {
                c.n_elements = 1024;
                c.geometry.ris.y = 10.0;
            }
            _ => {}
        }
        c
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::config("figure", format!("unknown figure id `{s}`")))
    }
}

struct Curve {
    label: String,
    cfg: ScenarioConfig,
}

fn phase_curves(base: &ScenarioConfig, phases: &[PhaseModel]) -> Vec<Curve> {
    phases
        .iter()
        .map(|&p| Curve {
            label: p.label(),
            cfg: ScenarioConfig {
                phase: p,
                ..base.clone()
            },
        })
        .collect()
}

const PERFECT: PhaseModel = PhaseModel::Perfect;
const B1: PhaseModel = PhaseModel::QuantizedBits(1);
const B2: PhaseModel = PhaseModel::QuantizedBits(2);
const B3: PhaseModel = PhaseModel::QuantizedBits(3);

#[derive(Clone, Copy)]
enum Axis {
    Elements(&'static [usize]),
    RisX(&'static [f64]),
}

impl Axis {
    fn len(&self) -> usize {
        match self {
            Axis::Elements(v) => v.len(),
            Axis::RisX(v) => v.len(),
        }
    }

    fn set(&self, cfg: &mut ScenarioConfig, i: usize) {
        match self {
            Axis::Elements(v) => cfg.n_elements = v[i],
            Axis::RisX(v) => cfg.geometry.ris.x = v[i],
        }
    }

    fn column(&self) -> Column {
        let mut c = match self {
            Axis::Elements(_) => Column::new("n_elements", "elements", ColumnKind::Axis),
            Axis::RisX(_) => Column::new("ris_x", "m", ColumnKind::Axis),
        };
        c.values = match self {
            Axis::Elements(v) => v.iter().map(|&n| n as f64).collect(),
            Axis::RisX(v) => v.to_vec(),
        };
        c
    }
}

struct Metric {
    name: &'static str,
    unit: &'static str,
    mc: bool,
}

const fn analytic(name: &'static str, unit: &'static str) -> Metric {
    Metric {
        name,
        unit,
        mc: false,
    }
}

const fn simulated(name: &'static str, unit: &'static str) -> Metric {
    Metric {
        name,
        unit,
        mc: true,
    }
}

// Each (curve, point) gets its own stream so no two points share samples.
fn point_stream(base: u64, curve: usize, point: usize) -> u64 {
    base.wrapping_mul(1 << 32) ^ ((curve as u64) << 16) ^ point as u64
}

fn sweep<F>(
    id: FigureId,
    base: &ScenarioConfig,
    curves: &[Curve],
    axis: Axis,
    metrics: &[Metric],
    eval: F,
) -> Result<ResultTable>
where
    F: Fn(&ScenarioConfig) -> Result<Vec<f64>> + Sync,
{
    let mut jobs = Vec::with_capacity(curves.len() * axis.len());
    for (c, curve) in curves.iter().enumerate() {
        for i in 0..axis.len() {
            let mut cfg = curve.cfg.clone();
            axis.set(&mut cfg, i);
            cfg.mc.stream_id = point_stream(base.mc.stream_id, c, i);
            cfg.validate()?;
            jobs.push(cfg);
        }
    }
    let results: Vec<Vec<f64>> = jobs.par_iter().map(&eval).collect::<Result<_>>()?;

    let mut columns = vec![axis.column()];
    for (c, curve) in curves.iter().enumerate() {
        for (m, metric) in metrics.iter().enumerate() {
            let kind = if metric.mc {
                ColumnKind::monte_carlo(&McConfig {
                    stream_id: point_stream(base.mc.stream_id, c, 0),
                    ..base.mc
                })
            } else {
                ColumnKind::Analytic
            };
            let mut col = Column::new(
                format!("{}_{}", metric.name, curve.label),
                metric.unit,
                kind,
            );
            col.values = (0..axis.len())
                .map(|i| results[c * axis.len() + i][m])
                .collect();
            columns.push(col);
        }
    }
    ResultTable::new(id.name(), base.to_flat(), columns)
}

fn cdf_table(id: FigureId, base: &ScenarioConfig, curves: &[Curve]) -> Result<ResultTable> {
    let per_curve: Vec<_> = curves
        .par_iter()
        .enumerate()
        .map(|(c, curve)| {
            let mut cfg = curve.cfg.clone();
            cfg.mc.stream_id = point_stream(base.mc.stream_id, c, 0);
            let stats = empirical_stats(&cfg.sample_snr()?)?;
            let fit = cfg.fit()?;
            Ok((cfg, stats, fit))
        })
        .collect::<Result<Vec<_>>>()?;

    let to_db = |x: f64| 10.0 * x.log10();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, s, _) in &per_curve {
        lo = lo.min(to_db(s.quantile(0.001)?.max(f64::MIN_POSITIVE)));
        hi = hi.max(to_db(s.quantile(0.999)?));
    }
    let grid: Vec<f64> = (0..CDF_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (CDF_POINTS - 1) as f64)
        .collect();

    let mut axis = Column::new("snr", "dB", ColumnKind::Axis);
    axis.values = grid.clone();
    let mut columns = vec![axis];
    let mut summary = Vec::new();
    for (c, (curve, (cfg, stats, fit))) in curves.iter().zip(&per_curve).enumerate() {
        let n = stats.len() as f64;
        let mut emp = Column::new(
            format!("cdf_mc_{}", curve.label),
            "1",
            ColumnKind::monte_carlo(&McConfig {
                stream_id: point_stream(base.mc.stream_id, c, 0),
                ..cfg.mc
            }),
        );
        let mut ana = Column::new(
            format!("cdf_gamma_{}", curve.label),
            "1",
            ColumnKind::Analytic,
        );
        for &db in &grid {
            let x = 10f64.powf(db / 10.0);
            emp.values
                .push(stats.sorted_samples.partition_point(|&s| s <= x) as f64 / n);
            ana.values.push(fit.cdf(x)?);
        }
        columns.push(emp);
        columns.push(ana);
        summary.push((
            format!("median_db_{}", curve.label),
            to_db(stats.quantile(0.5)?),
        ));
        summary.push((format!("ks_{}", curve.label), ks_distance(stats, fit)?));
        summary.push((format!("shape_{}", curve.label), fit.shape()));
        summary.push((format!("rate_{}", curve.label), fit.rate()));
    }
    let mut t = ResultTable::new(id.name(), base.to_flat(), columns)?;
    t.summary.extend(summary);
    if let Some(&p) = t.summary.get("median_db_perfect") {
        for curve in curves {
            let m = t.summary[&format!("median_db_{}", curve.label)];
            t.summary
                .insert(format!("median_gap_db_{}", curve.label), p - m);
        }
    }
    Ok(t)
}

/// Reproduces one figure as a data table.
///
/// `overrides` adjusts the figure's base scenario. Keys the figure sweeps
/// itself (see [`FigureId::swept_keys`]) are rejected.
pub fn run_figure(id: FigureId, overrides: &Overrides) -> Result<ResultTable> {
    if let Some(k) = overrides
        .keys()
        .find(|k| id.swept_keys().contains(&k.as_str()))
    {
        return Err(Error::config(
            k.as_str(),
            format!("is swept by {id} and cannot be overridden"),
        ));
    }
    let mut base = id.base();
    base.apply(overrides)?;

    let rate_metrics = [
        analytic("rate_exact", "bpcu"),
        analytic("rate_lb", "bpcu"),
        simulated("rate_mc", "bpcu"),
    ];
    let rate_eval = |cfg: &ScenarioConfig| -> Result<Vec<f64>> {
        let a = cfg.analyze()?;
        let mc = mc_point(cfg)?;
        Ok(vec![
            a.metrics.avg_rate,
            a.metrics.avg_rate_lb.unwrap_or(f64::NAN),
            mc.avg_rate,
        ])
    };
    let bler_metrics = [analytic("bler", "1"), simulated("bler_mc", "1")];
    let bler_eval = |cfg: &ScenarioConfig| -> Result<Vec<f64>> {
        let fit = cfg.fit()?;
        let v = avg_bler(&fit, cfg.packet.r(), cfg.packet.l())?;
        Ok(vec![v, mc_point(cfg)?.avg_bler])
    };

    match id {
        FigureId::Fig2a => cdf_table(id, &base, &phase_curves(&base, &[PERFECT, B1, B2, B3])),
        FigureId::Fig2b => {
            let mk = |label: &str, direct: bool, phase| Curve {
                label: label.to_string(),
                cfg: ScenarioConfig {
                    direct_link: direct,
                    phase,
                    ..base.clone()
                },
            };
            let curves = [
                mk("reflector", false, PhaseModel::UniformSpread(1.0)),
                mk("nodirect_1bit", false, B1),
                mk("nodirect_2bit", false, B2),
                mk("direct_1bit", true, B1),
                mk("direct_2bit", true, B2),
            ];
            cdf_table(id, &base, &curves)
        }
        FigureId::Fig3 => {
            let metrics = [
                analytic("rate_exact", "bpcu"),
                analytic("rate_lb", "bpcu"),
                analytic("capacity", "bpcu"),
                simulated("rate_mc", "bpcu"),
                simulated("capacity_mc", "bpcu"),
            ];
            sweep(
                id,
                &base,
                &phase_curves(&base, &[PERFECT, B1, B2]),
                Axis::Elements(N_GRID),
                &metrics,
                |cfg| {
                    let a = cfg.analyze()?;
                    let mc = mc_point(cfg)?;
                    Ok(vec![
                        a.metrics.avg_rate,
                        a.metrics.avg_rate_lb.unwrap_or(f64::NAN),
                        a.metrics.avg_capacity,
                        mc.avg_rate,
                        mc.avg_capacity,
                    ])
                },
            )
        }
        FigureId::Fig4 => {
            let curves = phase_curves(&base, &[PERFECT, B1, B2, B3]);
            let mut t = sweep(
                id,
                &base,
                &curves,
                Axis::Elements(N_GRID),
                &bler_metrics,
                bler_eval,
            )?;
            let thresholds: Vec<(String, usize)> = curves
                .par_iter()
                .map(|c| {
                    Ok((
                        c.label.clone(),
                        required_elements(c.cfg.packet.target_bler, &c.cfg)?,
                    ))
                })
                .collect::<Result<_>>()?;
            for (label, n) in thresholds {
                t.summary.insert(format!("required_n_{label}"), n as f64);
            }
            Ok(t)
        }
        FigureId::Fig5 => {
            let curves = phase_curves(&base, &[PERFECT, B1, B2]);
            let mut t = sweep(
                id,
                &base,
                &curves,
                Axis::RisX(D_GRID),
                &bler_metrics,
                bler_eval,
            )?;
            for c in &curves {
                let v = t.values(&format!("bler_{}", c.label))?;
                let worst = (0..v.len()).fold(0, |w, i| if v[i] > v[w] { i } else { w });
                t.summary
                    .insert(format!("worst_ris_x_{}", c.label), D_GRID[worst]);
            }
            Ok(t)
        }
        FigureId::Fig6a => {
            let mut curves = Vec::new();
            for &e in FIG6A_DIRECT_EXPONENTS {
                for p in [B1, B2] {
                    let mut cfg = base.clone();
                    cfg.phase = p;
                    cfg.path_loss.direct_exponent = e;
                    curves.push(Curve {
                        label: format!("{}_ple{e}", p.label()),
                        cfg,
                    });
                }
            }
            sweep(
                id,
                &base,
                &curves,
                Axis::RisX(D_GRID),
                &rate_metrics,
                rate_eval,
            )
        }
        FigureId::Fig6b => sweep(
            id,
            &base,
            &phase_curves(&base, &[B1, B2]),
            Axis::RisX(D_GRID),
            &rate_metrics,
            rate_eval,
        ),
        FigureId::Fig7 => {
            let metrics = [
                analytic("blocklength", "channel uses"),
                simulated("blocklength_mc", "channel uses"),
            ];
            sweep(
                id,
                &base,
                &phase_curves(&base, &[B1, B2, B3, PERFECT]),
                Axis::Elements(N_GRID),
                &metrics,
                |cfg| {
                    let a = cfg.analyze()?;
                    Ok(vec![
                        a.metrics.avg_blocklength,
                        mc_point(cfg)?.avg_blocklength,
                    ])
                },
            )
        }
        FigureId::Fig8 => {
            let metrics = [
                analytic("sqrt_dispersion", "bit"),
                analytic("sqrt_dispersion_binomial", "bit"),
                simulated("sqrt_dispersion_mc", "bit"),
            ];
            sweep(
                id,
                &base,
                &phase_curves(&base, &[PERFECT, PhaseModel::UniformSpread(0.25)]),
                Axis::Elements(N_GRID),
                &metrics,
                |cfg| {
                    let a = cfg.analyze()?;
                    Ok(vec![
                        a.metrics.avg_sqrt_dispersion,
                        approx_sqrt_dispersion(&a.fit, &cfg.policy)?,
                        mc_point(cfg)?.avg_sqrt_dispersion,
                    ])
                },
            )
        }
    }
}

fn mc_point(cfg: &ScenarioConfig) -> Result<crate::fbl::AvgMetrics> {
    let x = cfg.sample_snr()?;
    mc_avg_metrics(&x, cfg.packet.l(), cfg.packet.r(), cfg.packet.target_bler)
}

/// Smallest element count whose closed-form average BLER is at most
/// `target_bler`, by exponential bracketing and integer bisection.
///
/// The BLER must be non-increasing along the bracket, and a solution must
/// exist below 65536 elements; otherwise a bracket error is returned.
pub fn required_elements(target_bler: f64, scenario: &ScenarioConfig) -> Result<usize> {
    if !(target_bler > 0.0 && target_bler < 1.0) {
        return Err(Error::domain(
            "required_elements",
            "target BLER must lie in (0, 1)",
        ));
    }
    let bler_at = |n: usize| -> Result<f64> {
        let mut c = scenario.clone();
        c.n_elements = n;
        avg_bler(&c.fit()?, c.packet.r(), c.packet.l())
    };
    let start = if scenario.direct_link { 0 } else { 1 };
    let mut prev = bler_at(start)?;
    if prev <= target_bler {
        return Ok(start);
    }
    let mut lo = start;
    let mut hi;
    loop {
        hi = (2 * lo).max(1);
        if hi > N_CAP {
            return Err(Error::Bracket {
                detail: format!("average BLER {prev:e} at N = {lo} is still above {target_bler:e}"),
            });
        }
        let v = bler_at(hi)?;
        if v > prev * (1.0 + 1e-12) {
            return Err(Error::Bracket {
                detail: format!("average BLER increases from N = {lo} to N = {hi}"),
            });
        }
        if v <= target_bler {
            break;
        }
        lo = hi;
        prev = v;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bler_at(mid)? <= target_bler {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Largest RIS `y` offset (at the scenario's `x`) for which the scenario
/// reaches its target BLER with at most `target_n` elements.
///
/// This is the procedure behind [`CALIBRATED_RIS_Y`].
pub fn calibrate_ris_y(target_n: usize, scenario: &ScenarioConfig) -> Result<f64> {
    let ok = |y: f64| -> Result<bool> {
        let mut c = scenario.clone();
        c.geometry.ris.y = y;
        Ok(required_elements(c.packet.target_bler, &c)? <= target_n)
    };
    let (mut lo, mut hi) = (0.0, 50.0);
    if !ok(lo)? || ok(hi)? {
        return Err(Error::Bracket {
            detail: format!("no RIS offset in [{lo}, {hi}] m gives {target_n} elements"),
        });
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
