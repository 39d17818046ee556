//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary so every criterion reports even when an earlier
//! one fails. Pass criterion numbers as arguments to run a subset.

mod oracle;

use std::collections::BTreeMap;
use std::f64::consts::LOG2_E;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use risfbl::channel::{asymptotic_trend, GammaFit, PhaseModel};
use risfbl::experiments::{
    required_elements, run_figure, FigureId, Overrides, ResultTable, ScenarioConfig, D_GRID, N_GRID,
};
use risfbl::fbl::{
    approx_sqrt_dispersion, avg_bler, avg_rate_exact, avg_rate_lower_bound, c1_avg_capacity,
    c2_avg_sqrt_dispersion,
};
use risfbl::montecarlo::{empirical_stats, ks_distance, mc_avg_metrics};
use risfbl::specfun::EvalPolicy;

type Check = Result<String, String>;

fn within_time(start: Instant, limit_s: u64, detail: String) -> Check {
    let t = start.elapsed();
    if t > Duration::from_secs(limit_s) {
        Err(format!(
            "{detail}; took {:.1}s, limit {limit_s}s",
            t.as_secs_f64()
        ))
    } else {
        Ok(detail)
    }
}

fn sc_with(base: ScenarioConfig, n: usize, phase: PhaseModel) -> ScenarioConfig {
    ScenarioConfig {
        n_elements: n,
        phase,
        ..base
    }
}

const BITS_1: PhaseModel = PhaseModel::QuantizedBits(1);
const BITS_2: PhaseModel = PhaseModel::QuantizedBits(2);
const BITS_3: PhaseModel = PhaseModel::QuantizedBits(3);
const SPREAD: PhaseModel = PhaseModel::UniformSpread(0.25);

fn fig4_anchors() -> Check {
    let start = Instant::now();
    let base = FigureId::Fig4.base();
    let mut parts = Vec::new();
    let mut ok = true;
    for (phase, expect) in [
        (PhaseModel::Perfect, 190.0),
        (BITS_1, 290.0),
        (BITS_2, 200.0),
    ] {
        let sc = ScenarioConfig {
            phase,
            ..base.clone()
        };
        let n = required_elements(1e-9, &sc).map_err(|e| e.to_string())?;
        ok &= ((n as f64) - expect).abs() <= 0.1 * expect;
        parts.push(format!("{}: N={n} (expect {expect}±10%)", phase.label()));
    }
    let detail = parts.join(", ");
    if !ok {
        return Err(detail);
    }
    within_time(start, 30, detail)
}

fn fig2a_anchors() -> Check {
    let start = Instant::now();
    let t = run_figure(FigureId::Fig2a, &Overrides::new()).map_err(|e| e.to_string())?;
    let g1 = t.summary["median_gap_db_1bit"];
    let g2 = t.summary["median_gap_db_2bit"];
    let detail = format!("gap 1bit {g1:.3} dB (3.9±0.3), 2bit {g2:.3} dB (0.9±0.3)");
    if (g1 - 3.9).abs() > 0.3 || (g2 - 0.9).abs() > 0.3 {
        return Err(detail);
    }
    within_time(start, 30, detail)
}

fn gamma_fit_fidelity() -> Check {
    let base = ScenarioConfig {
        direct_link: false,
        ..ScenarioConfig::default()
    };
    let mut worst = (0.0, String::new());
    let mut stream = 0;
    for phase in [PhaseModel::Perfect, SPREAD, BITS_1, BITS_2, BITS_3] {
        for n in [256, 512, 1024, 2048] {
            let mut sc = sc_with(base.clone(), n, phase);
            sc.mc = sc.mc.with_stream(stream);
            stream += 1;
            let samples = sc.sample_snr().map_err(|e| e.to_string())?;
            let stats = empirical_stats(&samples).map_err(|e| e.to_string())?;
            let ks = ks_distance(&stats, &sc.fit().map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            if ks > worst.0 {
                worst = (ks, format!("{} N={n}", phase.label()));
            }
        }
    }
    let detail = format!(
        "max KS {:.4} at {} over 20 cases (limit 0.03)",
        worst.0, worst.1
    );
    if worst.0 < 0.03 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// (alpha, beta, r, L) spanning alpha in [0.5, 200], beta in [1e-4, 10]
const ORACLE_GRID: [(f64, f64, f64, f64); 20] = [
    (0.5, 1e-4, 300.0, 240.0),
    (0.5, 0.1, 200.0, 100.0),
    (0.5, 10.0, 500.0, 400.0),
    (0.8, 0.02, 300.0, 240.0),
    (1.0, 1.0, 1000.0, 256.0),
    (1.3, 3e-3, 150.0, 64.0),
    (2.0, 5.0, 300.0, 240.0),
    (3.0, 1e-3, 400.0, 100.0),
    (4.0, 0.5, 300.0, 240.0),
    (6.0, 0.05, 250.0, 500.0),
    (10.0, 2.0, 300.0, 240.0),
    (15.0, 1e-4, 300.0, 240.0),
    (25.0, 8.0, 120.0, 60.0),
    (40.0, 0.3, 300.0, 240.0),
    (60.0, 10.0, 800.0, 300.0),
    (90.0, 1e-2, 300.0, 240.0),
    (120.0, 1.5, 200.0, 320.0),
    (150.0, 40.0 / 150.0, 300.0, 240.0),
    (200.0, 1e-4, 300.0, 240.0),
    (200.0, 10.0, 600.0, 480.0),
];

fn rel_err(value: f64, ln_reference: f64) -> f64 {
    if value == 0.0 {
        // only an underflowing reference can be matched by zero
        return if ln_reference < -745.2 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    (value.ln() - ln_reference).exp_m1().abs()
}

fn closed_forms_vs_oracle() -> Check {
    // the oracle itself on an exact identity: E ln(1+X) = e E1(1) = 0.5963... for Exp(1)
    let id = oracle::c1(1.0, 1.0);
    let e1_identity = 0.596_347_362_323_194_1 * LOG2_E;
    if (id / e1_identity - 1.0).abs() > 1e-12 {
        return Err(format!("oracle self-check failed: {id} vs {e1_identity}"));
    }

    let policy = EvalPolicy::default();
    let mut worst = BTreeMap::<&str, (f64, String)>::new();
    let mut lib_time = Duration::ZERO;
    let mut underflow = 0;
    for &(a, b, r, l) in &ORACLE_GRID {
        let fit = GammaFit::new(a, b).map_err(|e| e.to_string())?;
        let t0 = Instant::now();
        let c1 = c1_avg_capacity(&fit, &policy).map_err(|e| format!("c1({a},{b}): {e}"))?;
        let c2 = c2_avg_sqrt_dispersion(&fit, &policy).map_err(|e| format!("c2({a},{b}): {e}"))?;
        let c2b =
            approx_sqrt_dispersion(&fit, &policy).map_err(|e| format!("C2~({a},{b}): {e}"))?;
        let bler = avg_bler(&fit, r, l).map_err(|e| format!("bler({a},{b},{r},{l}): {e}"))?;
        lib_time += t0.elapsed();

        let ln_bler = oracle::ln_bler(a, b, r, l);
        if ln_bler < -745.2 {
            underflow += 1;
        }
        for (name, err) in [
            ("c1", rel_err(c1, oracle::c1(a, b).ln())),
            ("c2", rel_err(c2, oracle::c2(a, b).ln())),
            ("c2_bound", rel_err(c2b, oracle::c2_bound(a, b).ln())),
            ("avg_bler", rel_err(bler, ln_bler)),
        ] {
            let slot = worst.entry(name).or_insert((0.0, String::new()));
            if err.is_nan() || err > slot.0 {
                *slot = (err, format!("({a}, {b:e}, {r}, {l})"));
            }
        }
    }
    let limit = |name: &str| if name == "avg_bler" { 1e-9 } else { 1e-7 };
    let ok = worst.iter().all(|(k, (e, _))| *e <= limit(k));
    let mut detail: Vec<String> = worst
        .iter()
        .map(|(k, (e, at))| format!("{k} {e:.1e} at {at} (limit {:.0e})", limit(k)))
        .collect();
    detail.push(format!("{underflow} bler references underflow"));
    detail.push(format!("library time {:.2}s", lib_time.as_secs_f64()));
    let detail = detail.join("; ");
    if !ok {
        return Err(detail);
    }
    if lib_time > Duration::from_secs(10) {
        return Err(format!("{detail}; over the 10s limit"));
    }
    Ok(detail)
}

fn moments_vs_mc() -> Check {
    let mut worst = (0.0, String::new());
    let mut stream = 1000;
    for direct in [true, false] {
        for phase in [PhaseModel::Perfect, SPREAD, BITS_1] {
            for n in [1, 16, 256] {
                let mut sc = sc_with(ScenarioConfig::default(), n, phase);
                sc.direct_link = direct;
                sc.mc = sc.mc.with_stream(stream);
                stream += 1;
                let m = sc.moments().map_err(|e| e.to_string())?;
                let rho = sc.rho().map_err(|e| e.to_string())?;
                let s = empirical_stats(&sc.sample_snr().map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
                let z1 = (s.mean - rho * m.m1).abs() / s.mean_std_error();
                let z2 = (s.second_moment - rho * rho * m.m2).abs() / s.second_moment_std_error();
                let z = z1.max(z2);
                if z > worst.0 {
                    worst = (z, format!("{} N={n} direct={direct}", phase.label()));
                }
            }
        }
    }
    let detail = format!(
        "max |z| {:.2} at {} over 18 cases (limit 4)",
        worst.0, worst.1
    );
    if worst.0 <= 4.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Rate crosses zero near N = 64 for the fig3 scenario, so relative error
// there is dominated by sampling noise; 1e5 draws keep it well under 1%.
const RATE_REALIZATIONS: usize = 100_000;

fn rate_agreement() -> Check {
    let base = FigureId::Fig3.base();
    let mut worst = (0.0, String::new());
    let mut bound_violations = Vec::new();
    let mut stream = 2000;
    for phase in [PhaseModel::Perfect, BITS_1, BITS_2] {
        for &n in N_GRID {
            let mut sc = sc_with(base.clone(), n, phase);
            let fit = sc.fit().map_err(|e| e.to_string())?;
            let (r, eps) = (sc.packet.r(), sc.packet.target_bler);
            let exact = avg_rate_exact(&fit, r, eps, &sc.policy).map_err(|e| e.to_string())?;
            let lb = avg_rate_lower_bound(&fit, r, eps).map_err(|e| e.to_string())?;
            if lb > exact {
                bound_violations.push(format!("{} N={n}", phase.label()));
            }
            if !(64..=1024).contains(&n) {
                continue;
            }
            sc.mc.realizations = RATE_REALIZATIONS;
            sc.mc = sc.mc.with_stream(stream);
            stream += 1;
            let samples = sc.sample_snr().map_err(|e| e.to_string())?;
            let mc = mc_avg_metrics(&samples, sc.packet.l(), r, eps).map_err(|e| e.to_string())?;
            let rel = ((mc.avg_rate - exact) / exact).abs();
            if rel > worst.0 {
                worst = (
                    rel,
                    format!(
                        "{} N={n} ({exact:.5} vs mc {:.5})",
                        phase.label(),
                        mc.avg_rate
                    ),
                );
            }
        }
    }
    let detail = format!(
        "max rel gap {:.3}% at {} with {RATE_REALIZATIONS} draws; lower bound violations: {}",
        100.0 * worst.0,
        worst.1,
        if bound_violations.is_empty() {
            "none".to_string()
        } else {
            bound_violations.join(", ")
        }
    );
    if worst.0 <= 0.01 && bound_violations.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn asymptotics() -> Check {
    let base = FigureId::Fig8.base();
    let gains = base.gains().map_err(|e| e.to_string())?;
    let grid = [256, 512, 1024, 2048, 4096];
    let mut ok = true;
    let mut parts = Vec::new();
    for phase in [PhaseModel::Perfect, SPREAD, BITS_1, BITS_2, BITS_3] {
        let t = asymptotic_trend(&gains, phase, &grid).map_err(|e| e.to_string())?;
        ok &= (t.mean_slope - 2.0).abs() <= 0.1 && (t.variance_slope - 3.0).abs() <= 0.15;
        parts.push(format!(
            "{} slopes {:.3}/{:.3}",
            phase.label(),
            t.mean_slope,
            t.variance_slope
        ));
    }
    for phase in [PhaseModel::Perfect, SPREAD] {
        let sc = sc_with(base.clone(), 1024, phase);
        let fit = sc.fit().map_err(|e| e.to_string())?;
        let c2 = c2_avg_sqrt_dispersion(&fit, &sc.policy).map_err(|e| e.to_string())?;
        let rel = (c2 / LOG2_E - 1.0).abs();
        ok &= rel <= 0.01;
        parts.push(format!(
            "{} sqrtV(1024) {:.5} ({:.3}% off)",
            phase.label(),
            c2,
            100.0 * rel
        ));
    }
    let detail = parts.join(", ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn blocklength_monotone() -> Check {
    let base = FigureId::Fig7.base();
    let mut curves = BTreeMap::new();
    for phase in [BITS_1, BITS_2, BITS_3, PhaseModel::Perfect, SPREAD] {
        let mut v = Vec::new();
        for &n in N_GRID {
            let m = sc_with(base.clone(), n, phase)
                .analyze()
                .map_err(|e| e.to_string())?;
            v.push(m.metrics.avg_blocklength);
        }
        curves.insert(phase.label(), v);
    }
    let mut problems = Vec::new();
    for (label, v) in &curves {
        if !v.windows(2).all(|w| w[1] < w[0]) {
            problems.push(format!("{label} not strictly decreasing"));
        }
    }
    let order = [BITS_1, BITS_2, BITS_3, PhaseModel::Perfect].map(|p| p.label());
    for (i, &n) in N_GRID.iter().enumerate() {
        if !order
            .windows(2)
            .all(|w| curves[&w[0]][i] > curves[&w[1]][i])
        {
            problems.push(format!("bit ordering broken at N={n}"));
        }
    }
    let detail = format!(
        "{} curves on {} points; 1bit {:.1} -> {:.1}, perfect {:.1} -> {:.1}",
        curves.len(),
        N_GRID.len(),
        curves[&order[0]][0],
        curves[&order[0]][N_GRID.len() - 1],
        curves[&order[3]][0],
        curves[&order[3]][N_GRID.len() - 1]
    );
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", problems.join(", ")))
    }
}

// MC columns are not under test in the geometry and determinism checks
const SHORT_REALIZATIONS: usize = 1000;

fn short_overrides() -> Overrides {
    let mut o = Overrides::new();
    o.insert("realizations".into(), SHORT_REALIZATIONS.into());
    o.insert("seed".into(), 99.into());
    o
}

fn run_all_figures(threads: usize) -> Vec<ResultTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| {
        FigureId::ALL
            .iter()
            .map(|&id| run_figure(id, &short_overrides()).unwrap_or_else(|e| panic!("{id}: {e}")))
            .collect()
    })
}

fn single_thread_tables() -> &'static [ResultTable] {
    static TABLES: OnceLock<Vec<ResultTable>> = OnceLock::new();
    TABLES.get_or_init(|| run_all_figures(1))
}

fn table(id: FigureId) -> &'static ResultTable {
    single_thread_tables()
        .iter()
        .find(|t| t.figure == id.name())
        .unwrap()
}

fn geometry_orderings() -> Check {
    let idx = |d: f64| D_GRID.iter().position(|&x| x == d).unwrap();
    let (i5, i50, i95) = (idx(5.0), idx(50.0), idx(95.0));
    let mut problems = Vec::new();
    let mut checked = 0;
    let t5 = table(FigureId::Fig5);
    for c in t5
        .columns
        .iter()
        .filter(|c| c.name.starts_with("bler_") && !c.name.contains("_mc_"))
    {
        checked += 1;
        if c.values.iter().any(|&v| v > c.values[i50]) {
            problems.push(format!("{} not maximal at d=50", c.name));
        }
    }
    for id in [FigureId::Fig6a, FigureId::Fig6b] {
        for c in table(id)
            .columns
            .iter()
            .filter(|c| c.name.starts_with("rate_exact_") || c.name.starts_with("rate_lb_"))
        {
            checked += 1;
            let v = &c.values;
            if !(v[i5] > v[i50] && v[i95] > v[i50]) {
                problems.push(format!(
                    "{id} {} edge {:.4}/{:.4} vs mid {:.4}",
                    c.name, v[i5], v[i95], v[i50]
                ));
            }
        }
    }
    let detail = format!("{checked} analytic curves checked");
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", problems.join(", ")))
    }
}

fn determinism() -> Check {
    let base = single_thread_tables();
    let again = run_all_figures(4);
    let third = run_all_figures(4);
    let mut problems = Vec::new();
    for ((a, b), c) in base.iter().zip(&again).zip(&third) {
        for (label, other) in [("4 threads", b), ("second 4-thread run", c)] {
            if a.to_csv() != other.to_csv()
                || a.to_json() != other.to_json()
                || a.sidecar_json() != other.sidecar_json()
            {
                problems.push(format!("{} differs on {label}", a.figure));
            }
        }
    }
    let detail = format!(
        "{} figures byte-identical over 1 vs 4 worker threads and repeat runs ({SHORT_REALIZATIONS} draws)",
        base.len()
    );
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(problems.join(", "))
    }
}

type Criterion = (u32, &'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "required elements at 1e-9 BLER", fig4_anchors),
        (2, "median SNR gaps of quantized phases", fig2a_anchors),
        (3, "Gamma fit KS distance", gamma_fit_fidelity),
        (
            4,
            "closed forms vs quadrature oracle",
            closed_forms_vs_oracle,
        ),
        (5, "SNR moments vs Monte Carlo", moments_vs_mc),
        (
            6,
            "average rate vs Monte Carlo and lower bound",
            rate_agreement,
        ),
        (7, "large-N scaling", asymptotics),
        (8, "blocklength monotone and ordered", blocklength_monotone),
        (9, "RIS placement orderings", geometry_orderings),
        (10, "figure determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n:2} {tag} [{secs:6.1}s] {name}: {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".into()
    }
}
