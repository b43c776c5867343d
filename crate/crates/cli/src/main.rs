//! `relayecon`: evaluate, sweep, solve and simulate the relay economy from the
//! command line.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 numeric
//! failure, 4 the solver reported a model finding (no crossing or a boundary
//! optimum) instead of a number.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use relayecon::config::{parse_assignment, PARAM_KEYS};
use relayecon::equilibrium::{compare_regimes, DensityBracket, Finding, DEFAULT_GRID_POINTS};
use relayecon::regimes::{utilities, UTILITY_CSV_HEADER};
use relayecon::sim::{estimate_vs_analytic, run_instant_traced, write_trace, SimConfig};
use relayecon::{channels_per_cell, path_loss, shannon_capacity, ModelParams, RadioParams, Regime};

#[derive(Parser, Debug)]
#[command(
    name = "relayecon",
    version,
    about = "Economics of peer-to-peer wireless relaying"
)]
struct Cli {
    /// Parameter file (`key = value` lines, or a JSON object).
    #[arg(long, env = "RELAYECON_CONFIG", global = true)]
    config: Option<PathBuf>,
    /// Override one parameter after the file is loaded. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Write here instead of stdout. Nothing is written on error.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Expected utilities by role for each regime.
    Eval {
        #[arg(long)]
        regime: Option<Regime>,
    },
    /// Utilities across a linear grid of one parameter.
    Sweep {
        #[arg(long)]
        axis: String,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Free-entry and club densities, congestion exponents, leapfrog profile.
    Equilibrium {
        /// Density bracket. Found automatically when omitted.
        #[arg(long, requires = "hi")]
        lo: Option<f64>,
        #[arg(long, requires = "lo")]
        hi: Option<f64>,
        /// Scan grid points inside the bracket.
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        steps: usize,
    },
    /// Lattice Monte Carlo held against the closed forms.
    Simulate(SimulateArgs),
    /// Capacity, channel count and path loss.
    Radio(RadioArgs),
    /// Check the parameters and print them back.
    Validate,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// One regime; all three when omitted.
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long, default_value_t = 40)]
    side: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Per-connection CSV trace. Needs a single `--regime`.
    #[arg(long, requires = "regime")]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RadioArgs {
    #[arg(long, default_value_t = 1.0)]
    snr: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Total bandwidth.
    #[arg(long, default_value_t = 1e6)]
    bt: f64,
    /// Bit rate per user.
    #[arg(long, default_value_t = 1e4)]
    rb: f64,
    /// Path-loss constant.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long, default_value_t = 1.0)]
    freq: f64,
    /// Path-loss exponent.
    #[arg(long, default_value_t = 2.0)]
    exp: f64,
    /// Distance for the path-loss figure.
    #[arg(long, default_value_t = 1.0)]
    distance: f64,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] relayecon::Error),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Read { .. } => 2,
            CliError::Lib(e) if e.is_model_finding() => 4,
            CliError::Lib(e) if e.is_config_error() => 2,
            CliError::Lib(_) | CliError::Write { .. } => 3,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// A command's output, plus whether it carries a model finding.
struct Rendered {
    body: String,
    finding: bool,
}

impl Rendered {
    fn plain(body: String) -> Self {
        Rendered {
            body,
            finding: false,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(rendered) => {
            if rendered.finding {
                eprintln!("note: the report contains model findings in place of some values");
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<Rendered> {
    let rendered = match &cli.command {
        Command::Radio(args) => Rendered::plain(cmd_radio(args, cli.format)?),
        command => {
            let params = load_params(cli)?;
            match command {
                Command::Eval { regime } => {
                    Rendered::plain(cmd_eval(&params, *regime, cli.format)?)
                }
                Command::Sweep {
                    axis,
                    lo,
                    hi,
                    steps,
                } => Rendered::plain(cmd_sweep(&params, axis, *lo, *hi, *steps, cli.format)?),
                Command::Equilibrium { lo, hi, steps } => {
                    cmd_equilibrium(&params, lo.zip(*hi), *steps, cli.format)?
                }
                Command::Simulate(args) => {
                    Rendered::plain(cmd_simulate(&params, args, cli.format)?)
                }
                Command::Validate => Rendered::plain(cmd_validate(&params, cli.format)?),
                Command::Radio(_) => unreachable!(),
            }
        }
    };
    emit(cli.output.as_deref(), &rendered.body)?;
    Ok(rendered)
}

fn load_params(cli: &Cli) -> CliResult<ModelParams> {
    let mut params = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            if text.trim_start().starts_with('{') {
                ModelParams::from_json_str(&text)?
            } else {
                ModelParams::from_kv_str(&text)?
            }
        }
        None => ModelParams::default(),
    };
    for raw in &cli.overrides {
        let (key, value) =
            parse_assignment(raw).map_err(|m| CliError::Usage(format!("--set: {m}")))?;
        params.set(&key, value)?;
    }
    Ok(params.validate().map_err(relayecon::Error::from)?)
}

/// Writes to a sibling temp file and renames it into place, so a failed run
/// never leaves a partial file behind.
fn write_atomic(path: &Path, body: &[u8]) -> CliResult<()> {
    let fail = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, body).map_err(fail)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        fail(e)
    })
}

fn emit(output: Option<&Path>, body: &str) -> CliResult<()> {
    match output {
        Some(path) => write_atomic(path, body.as_bytes()),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|source| CliError::Write {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn csv_text(
    header: &[&str],
    rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> CliResult<()>,
) -> CliResult<String> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    wtr.write_record(header)?;
    rows(&mut wtr)?;
    let bytes = wtr.into_inner().map_err(|e| CliError::Write {
        path: PathBuf::from("<buffer>"),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Shortest round-trip form, switching to exponent notation for tiny and huge values.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn selected(regime: Option<Regime>) -> Vec<Regime> {
    regime.map_or_else(|| Regime::ALL.to_vec(), |r| vec![r])
}

#[derive(Serialize)]
struct EvalReport {
    params: ModelParams,
    regimes: Vec<relayecon::RegimeUtilities>,
}

fn cmd_eval(params: &ModelParams, regime: Option<Regime>, format: Format) -> CliResult<String> {
    let regimes = selected(regime)
        .into_iter()
        .map(|r| utilities(params, r))
        .collect::<relayecon::Result<Vec<_>>>()?;
    match format {
        Format::Json => Ok(to_json(&EvalReport {
            params: *params,
            regimes,
        })),
        Format::Csv => csv_text(&UTILITY_CSV_HEADER, |w| {
            for u in &regimes {
                w.serialize(u.csv_row())?;
            }
            Ok(())
        }),
    }
}

#[derive(Serialize)]
struct SweepRow {
    axis: String,
    value: f64,
    regime: Regime,
    n: f64,
    eu_orig: f64,
    eu_int: f64,
    eu_out: f64,
    total: f64,
}

const SWEEP_CSV_HEADER: [&str; 8] = [
    "axis", "value", "regime", "n", "eu_orig", "eu_int", "eu_out", "total",
];

fn cmd_sweep(
    params: &ModelParams,
    axis: &str,
    lo: f64,
    hi: f64,
    steps: usize,
    format: Format,
) -> CliResult<String> {
    if !PARAM_KEYS.contains(&axis) {
        return Err(CliError::Usage(format!(
            "unknown sweep axis `{axis}` (expected one of {})",
            PARAM_KEYS.join(", ")
        )));
    }
    if steps < 2 {
        return Err(CliError::Usage(format!(
            "--steps must be at least 2, got {steps}"
        )));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CliError::Usage(format!(
            "sweep needs finite lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut points = Vec::with_capacity(steps);
    for i in 0..steps {
        let value = if i == steps - 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (steps - 1) as f64
        };
        let mut p = *params;
        p.set(axis, value)?;
        let p = p.validate().map_err(|e| {
            CliError::Usage(format!(
                "sweep point {i} ({axis} = {value}) is invalid: {e}"
            ))
        })?;
        points.push((value, p));
    }
    let mut rows = Vec::with_capacity(steps * Regime::ALL.len());
    for (value, p) in &points {
        for regime in Regime::ALL {
            let u = utilities(p, regime)?;
            rows.push(SweepRow {
                axis: axis.to_string(),
                value: *value,
                regime,
                n: p.n,
                eu_orig: u.eu_originator,
                eu_int: u.eu_intermediate,
                eu_out: u.eu_outsider,
                total: u.total,
            });
        }
    }
    match format {
        Format::Json => Ok(to_json(&rows)),
        Format::Csv => csv_text(&SWEEP_CSV_HEADER, |w| {
            for row in &rows {
                w.serialize(row)?;
            }
            Ok(())
        }),
    }
}

const EQUILIBRIUM_CSV_HEADER: [&str; 6] =
    ["quantity", "regime", "status", "n", "total_eu", "exponent"];

fn finding_status<T>(f: &Finding<T>) -> &'static str {
    match f {
        Finding::Solved { .. } => "SOLVED",
        Finding::NoCrossing { .. } => "NO_CROSSING",
        Finding::BoundaryOptimum { .. } => "BOUNDARY_OPTIMUM",
        Finding::Undefined { .. } => "UNDEFINED",
    }
}

fn cmd_equilibrium(
    params: &ModelParams,
    range: Option<(f64, f64)>,
    steps: usize,
    format: Format,
) -> CliResult<Rendered> {
    let bracket = match range {
        Some((lo, hi)) => DensityBracket {
            grid_points: steps,
            ..DensityBracket::new(lo, hi)
        },
        None => DensityBracket {
            grid_points: steps,
            ..DensityBracket::auto(params)?
        },
    };
    let report = compare_regimes(params, &bracket)?;
    let body = match format {
        Format::Json => to_json(&report),
        Format::Csv => csv_text(&EQUILIBRIUM_CSV_HEADER, |w| {
            let densities = [
                (
                    "free_entry",
                    Regime::NoPeering,
                    &report.free_entry_no_peering,
                ),
                (
                    "free_entry",
                    Regime::PeeringPerfectCompetition,
                    &report.free_entry_perfcomp,
                ),
                ("club", Regime::PeeringPerfectCompetition, &report.club),
            ];
            for (quantity, regime, finding) in densities {
                let (n, eu) = match finding {
                    Finding::Solved { value } => (num(value.n_star), num(value.total_eu_at_n_star)),
                    Finding::BoundaryOptimum { n, value } => (num(*n), num(*value)),
                    _ => (String::new(), String::new()),
                };
                w.write_record([
                    quantity,
                    regime.as_str(),
                    finding_status(finding),
                    &n,
                    &eu,
                    "",
                ])?;
            }
            let exponents = [
                (Regime::NoPeering, &report.scaling_no_peering),
                (Regime::PeeringPerfectCompetition, &report.scaling_perfcomp),
            ];
            for (regime, finding) in exponents {
                let exponent = finding.solved().map(|&e| num(e)).unwrap_or_default();
                w.write_record([
                    "scaling",
                    regime.as_str(),
                    finding_status(finding),
                    "",
                    "",
                    &exponent,
                ])?;
            }
            Ok(())
        })?,
    };
    Ok(Rendered {
        body,
        finding: report.has_findings(),
    })
}

const SIMULATE_CSV_HEADER: [&str; 13] = [
    "regime",
    "side",
    "trials",
    "seed",
    "role",
    "simulated",
    "std_error",
    "analytic",
    "bias",
    "relative_bias",
    "z",
    "lattice_exact",
    "lattice_z",
];

fn cmd_simulate(params: &ModelParams, args: &SimulateArgs, format: Format) -> CliResult<String> {
    let configs: Vec<SimConfig> = selected(args.regime)
        .into_iter()
        .map(|regime| SimConfig {
            side: args.side,
            params: *params,
            regime,
            trials: args.trials,
            seed: args.seed,
        })
        .collect();
    let comparisons = configs
        .iter()
        .map(estimate_vs_analytic)
        .collect::<relayecon::Result<Vec<_>>>()?;
    if let (Some(path), [config]) = (&args.trace, configs.as_slice()) {
        let (_, events) = run_instant_traced(config)?;
        let mut buf = Vec::new();
        write_trace(&events, &mut buf)?;
        write_atomic(path, &buf)?;
    }
    match format {
        Format::Json => Ok(to_json(&comparisons)),
        Format::Csv => csv_text(&SIMULATE_CSV_HEADER, |w| {
            for c in &comparisons {
                for (role, lattice) in c.roles.iter().zip(&c.lattice_roles) {
                    w.write_record([
                        c.regime.as_str().to_string(),
                        args.side.to_string(),
                        args.trials.to_string(),
                        args.seed.to_string(),
                        role.role.clone(),
                        num(role.simulated),
                        num(role.std_error),
                        num(role.analytic),
                        num(role.bias),
                        num(role.relative_bias),
                        num(role.z),
                        num(lattice.analytic),
                        num(lattice.z),
                    ])?;
                }
            }
            Ok(())
        }),
    }
}

#[derive(Serialize)]
struct RadioReport {
    #[serde(flatten)]
    inputs: RadioParams,
    distance: f64,
    capacity: f64,
    channels_per_cell: f64,
    path_loss: f64,
}

const RADIO_CSV_HEADER: [&str; 11] = [
    "snr",
    "alpha",
    "bandwidth_total",
    "user_bit_rate",
    "path_loss_constant",
    "carrier_frequency",
    "path_loss_exponent",
    "distance",
    "capacity",
    "channels_per_cell",
    "path_loss",
];

fn cmd_radio(args: &RadioArgs, format: Format) -> CliResult<String> {
    let inputs = RadioParams {
        snr: args.snr,
        alpha: args.alpha,
        bandwidth_total: args.bt,
        user_bit_rate: args.rb,
        path_loss_constant: args.k,
        carrier_frequency: args.freq,
        path_loss_exponent: args.exp,
    };
    let report = RadioReport {
        inputs,
        distance: args.distance,
        capacity: shannon_capacity(inputs.snr)?,
        channels_per_cell: channels_per_cell(&inputs)?,
        path_loss: path_loss(&inputs, args.distance)?,
    };
    match format {
        Format::Json => Ok(to_json(&report)),
        Format::Csv => csv_text(&RADIO_CSV_HEADER, |w| {
            let values = [
                inputs.snr,
                inputs.alpha,
                inputs.bandwidth_total,
                inputs.user_bit_rate,
                inputs.path_loss_constant,
                inputs.carrier_frequency,
                inputs.path_loss_exponent,
                report.distance,
                report.capacity,
                report.channels_per_cell,
                report.path_loss,
            ];
            w.write_record(values.iter().map(|&v| num(v)))?;
            Ok(())
        }),
    }
}

fn cmd_validate(params: &ModelParams, format: Format) -> CliResult<String> {
    match format {
        Format::Json => {
            let mut s = params.to_json_string();
            s.push('\n');
            Ok(s)
        }
        Format::Csv => csv_text(&PARAM_KEYS, |w| {
            let values = PARAM_KEYS
                .iter()
                .map(|k| params.get(k).map(num))
                .collect::<relayecon::Result<Vec<_>>>()?;
            w.write_record(values)?;
            Ok(())
        }),
    }
}
