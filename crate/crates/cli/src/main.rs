//! `risfbl` command-line front end.
//!
//! Every subcommand resolves one scenario from defaults, an optional flat
//! JSON config file, repeated `--set key=value` overrides and the shortcut
//! flags, in that order. Failures print one JSON line on stderr.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use risfbl::experiments::{
    parse_assignment, required_elements, run_figure, FigureId, Overrides, ScenarioConfig,
};
use risfbl::fbl::{
    avg_bler_detailed, avg_blocklength, avg_rate_exact, avg_rate_lower_bound, c1_avg_capacity,
    c2_avg_sqrt_dispersion, jensen_capacity, linearization_params,
};
use risfbl::montecarlo::{empirical_stats, ks_distance, mc_avg_metrics};
use risfbl::Error;

#[derive(Parser)]
#[command(
    name = "risfbl",
    version,
    about = "Finite-blocklength analysis of RIS-aided links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Link gains, SNR moments and the fitted Gamma parameters.
    Fit(Common),
    /// Average achievable rate and its companions.
    Rate(Common),
    /// Average block error rate.
    Bler(Common),
    /// Average blocklength needed for the packet.
    Blocklength(Common),
    /// Monte Carlo estimates at one point.
    Mc(Common),
    /// Data table of one figure.
    Figure {
        /// Figure id, e.g. fig4.
        id: String,
        #[command(flatten)]
        common: Common,
    },
    /// Fewest elements meeting a target BLER.
    RequiredN {
        /// Target BLER; defaults to the configured target_bler.
        #[arg(long)]
        target: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Check a configuration and print it fully resolved.
    Validate(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Flat JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set bandwidth_hz=2e5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of RIS elements.
    #[arg(long = "N", value_name = "N")]
    n: Option<usize>,
    /// Drop the direct AP-AC path.
    #[arg(long)]
    no_direct: bool,
    /// Phase model: perfect, spread:<s> or bits:<b>.
    #[arg(long)]
    phase: Option<String>,
    /// Monte Carlo realizations.
    #[arg(long)]
    realizations: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Lib(Error),
    Io { path: String, detail: String },
    ConfigFile { path: String, detail: String },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io { .. } => 1,
            Failure::ConfigFile { .. } => 3,
            Failure::Lib(e) => match e {
                Error::NonConvergence { .. } | Error::Bracket { .. } => 4,
                Error::Config { .. }
                | Error::Domain { .. }
                | Error::DegenerateMoments { .. }
                | Error::Linearization { .. }
                | Error::InsufficientData { .. } => 3,
            },
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Failure::Io { path, detail } => json!({"error": "io", "path": path, "message": detail}),
            Failure::ConfigFile { path, detail } => {
                json!({"error": "config", "path": path, "message": detail})
            }
            Failure::Lib(e) => {
                let mut v = json!({"error": e.kind(), "message": e.to_string()});
                if let Error::Config { field, .. } = e {
                    v["field"] = field.clone().into();
                }
                v
            }
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn read_config(path: &Path) -> Outcome<Overrides> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Failure::Io {
        path: shown.clone(),
        detail: e.to_string(),
    })?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Failure::ConfigFile {
            path: shown,
            detail: "config file must hold a flat JSON object".into(),
        }),
        Err(e) => Err(Failure::ConfigFile {
            path: shown,
            detail: e.to_string(),
        }),
    }
}

impl Common {
    fn overrides(&self) -> Outcome<Overrides> {
        let mut m = match &self.config {
            Some(p) => read_config(p)?,
            None => Map::new(),
        };
        for s in &self.set {
            let (k, v) = parse_assignment(s)?;
            m.insert(k, v);
        }
        if let Some(n) = self.n {
            m.insert("n_elements".into(), n.into());
        }
        if self.no_direct {
            m.insert("direct_link".into(), false.into());
        }
        if let Some(p) = &self.phase {
            m.insert("phase".into(), p.clone().into());
        }
        if let Some(r) = self.realizations {
            m.insert("realizations".into(), r.into());
        }
        if let Some(s) = self.seed {
            m.insert("seed".into(), s.into());
        }
        Ok(m)
    }

    fn scenario(&self) -> Outcome<ScenarioConfig> {
        Ok(ScenarioConfig::from_overrides(&self.overrides()?)?)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Outcome<()> {
    let io_err = |p: &str, e: io::Error| Failure::Io {
        path: p.to_string(),
        detail: e.to_string(),
    };
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_err(&p.display().to_string(), e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| io_err("<stdout>", e))
        }
    }
}

/// One named value of a single-row result.
struct Field {
    name: &'static str,
    unit: &'static str,
    value: f64,
}

fn f(name: &'static str, unit: &'static str, value: f64) -> Field {
    Field { name, unit, value }
}

fn render_row(command: &str, sc: &ScenarioConfig, fields: &[Field], format: Format) -> String {
    match format {
        Format::Csv => {
            let header: Vec<String> = fields
                .iter()
                .map(|x| format!("{} [{}]", x.name, x.unit))
                .collect();
            let row: Vec<String> = fields.iter().map(|x| format!("{:.16e}", x.value)).collect();
            format!("{}\n{}\n", header.join(","), row.join(","))
        }
        Format::Json => {
            let values: Map<String, Value> = fields
                .iter()
                .map(|x| (x.name.to_string(), x.value.into()))
                .collect();
            let units: Map<String, Value> = fields
                .iter()
                .map(|x| (x.name.to_string(), x.unit.into()))
                .collect();
            let v = json!({
                "command": command,
                "seed": sc.mc.seed,
                "config": sc.to_flat(),
                "values": values,
                "units": units,
            });
            let mut s = serde_json::to_string_pretty(&v).expect("row serializes");
            s.push('\n');
            s
        }
    }
}

fn cmd_fit(sc: &ScenarioConfig) -> Outcome<Vec<Field>> {
    let gains = sc.gains()?;
    let rho = sc.rho()?;
    let m = sc.moments()?;
    let fit = sc.fit()?;
    Ok(vec![
        f("n_elements", "elements", sc.n_elements as f64),
        f("direct_gain", "1", gains.direct),
        f("ap_ris_gain", "1", gains.ap_ris),
        f("ris_ac_gain", "1", gains.ris_ac),
        f("rho", "1", rho),
        f("first_moment", "1", m.m1),
        f("second_moment", "1", m.m2),
        f("shape", "1", fit.shape()),
        f("rate", "1", fit.rate()),
        f("mean_snr", "1", fit.mean()),
        f("mean_snr_db", "dB", 10.0 * fit.mean().log10()),
    ])
}

fn cmd_rate(sc: &ScenarioConfig) -> Outcome<Vec<Field>> {
    let fit = sc.fit()?;
    let p = &sc.packet;
    Ok(vec![
        f(
            "avg_rate",
            "bpcu",
            avg_rate_exact(&fit, p.r(), p.target_bler, &sc.policy)?,
        ),
        f(
            "avg_rate_lb",
            "bpcu",
            avg_rate_lower_bound(&fit, p.r(), p.target_bler)?,
        ),
        f("avg_capacity", "bpcu", c1_avg_capacity(&fit, &sc.policy)?),
        f("jensen_capacity", "bpcu", jensen_capacity(&fit)),
        f(
            "avg_sqrt_dispersion",
            "bpcu",
            c2_avg_sqrt_dispersion(&fit, &sc.policy)?,
        ),
    ])
}

fn cmd_bler(sc: &ScenarioConfig) -> Outcome<Vec<Field>> {
    let fit = sc.fit()?;
    let p = &sc.packet;
    let lp = linearization_params(p.r(), p.l())?;
    let b = avg_bler_detailed(&fit, p.r(), p.l())?;
    Ok(vec![
        f("avg_bler", "1", b.value),
        f("closed_form", "1", b.closed_form),
        f("reference", "1", b.reference),
        f(
            "cancellation",
            "bool",
            if b.cancellation { 1.0 } else { 0.0 },
        ),
        f("kappa0", "1", lp.kappa0),
        f("kappa1", "1", lp.kappa1),
    ])
}

fn cmd_blocklength(sc: &ScenarioConfig) -> Outcome<Vec<Field>> {
    let fit = sc.fit()?;
    let p = &sc.packet;
    let c1 = c1_avg_capacity(&fit, &sc.policy)?;
    let c2 = c2_avg_sqrt_dispersion(&fit, &sc.policy)?;
    Ok(vec![
        f(
            "avg_blocklength",
            "channel uses",
            avg_blocklength(c1, c2, p.l(), p.target_bler)?,
        ),
        f("avg_capacity", "bpcu", c1),
        f("avg_sqrt_dispersion", "bpcu", c2),
    ])
}

fn cmd_mc(sc: &ScenarioConfig) -> Outcome<Vec<Field>> {
    let fit = sc.fit()?;
    let samples = sc.sample_snr()?;
    let stats = empirical_stats(&samples)?;
    let p = &sc.packet;
    let m = mc_avg_metrics(&samples, p.l(), p.r(), p.target_bler)?;
    let mut out = vec![
        f("realizations", "1", sc.mc.realizations as f64),
        f("seed", "1", sc.mc.seed as f64),
        f("stream_id", "1", sc.mc.stream_id as f64),
        f("mean_snr", "1", stats.mean),
        f("mean_snr_std_error", "1", stats.mean_std_error()),
        f("second_moment", "1", stats.second_moment),
        f("analytic_mean_snr", "1", fit.mean()),
    ];
    // KS needs a minimum sample count; skip it rather than fail the run
    if let Ok(ks) = ks_distance(&stats, &fit) {
        out.push(f("ks_distance", "1", ks));
    }
    out.extend([
        f("avg_capacity", "bpcu", m.avg_capacity),
        f("avg_rate", "bpcu", m.avg_rate),
        f("avg_bler", "1", m.avg_bler),
        f("avg_blocklength", "channel uses", m.avg_blocklength),
        f("avg_sqrt_dispersion", "bpcu", m.avg_sqrt_dispersion),
    ]);
    Ok(out)
}

fn sidecar_path(output: &Path) -> PathBuf {
    output.with_extension("sidecar.json")
}

fn cmd_figure(id: &str, common: &Common) -> Outcome<()> {
    let id: FigureId = id.parse()?;
    let table = run_figure(id, &common.overrides()?)?;
    let body = match common.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    write_out(common.output.as_deref(), &body)?;
    if let Some(out) = &common.output {
        write_out(Some(&sidecar_path(out)), &table.sidecar_json())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    let (name, common, fields) = match &cli.command {
        Command::Figure { id, common } => return cmd_figure(id, common),
        Command::Validate(c) => {
            let sc = c.scenario()?;
            let body = match c.format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&Value::Object(sc.to_flat()))
                        .expect("config serializes");
                    s.push('\n');
                    s
                }
                Format::Csv => {
                    sc.to_flat()
                        .iter()
                        .fold("key,value\n".to_string(), |mut s, (k, v)| {
                            let cell = v.as_str().map_or_else(|| v.to_string(), str::to_string);
                            s.push_str(&format!("{k},{cell}\n"));
                            s
                        })
                }
            };
            return write_out(c.output.as_deref(), &body);
        }
        Command::RequiredN { target, common } => {
            let sc = common.scenario()?;
            let target = target.unwrap_or(sc.packet.target_bler);
            let n = required_elements(target, &sc)?;
            let fields = vec![
                f("target_bler", "1", target),
                f("required_n", "elements", n as f64),
            ];
            ("required-n", common, fields)
        }
        Command::Fit(c) => ("fit", c, cmd_fit(&c.scenario()?)?),
        Command::Rate(c) => ("rate", c, cmd_rate(&c.scenario()?)?),
        Command::Bler(c) => ("bler", c, cmd_bler(&c.scenario()?)?),
        Command::Blocklength(c) => ("blocklength", c, cmd_blocklength(&c.scenario()?)?),
        Command::Mc(c) => ("mc", c, cmd_mc(&c.scenario()?)?),
    };
    let sc = common.scenario()?;
    write_out(
        common.output.as_deref(),
        &render_row(name, &sc, &fields, common.format),
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // help and version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("usage error")
                .trim_start_matches("error: ");
            eprintln!("{}", json!({"error": "usage", "message": first}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(fail) => {
            eprintln!("{}", fail.to_json());
            ExitCode::from(fail.exit_code())
        }
    }
}
