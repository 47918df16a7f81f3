//! `qscissors` command-line driver: parameter sweeps for the linear scheme,
//! kicked trajectories for the nonlinear one, and the verification suites.
//!
//! Exit codes: 0 success, 1 run or verification failure, 2 usage error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::fock::C64;
use crate::lqs::{fidelity_closed_form, fidelity_ppb, LqsParams};
use crate::nqs::{evolve_kicked, NqsParams, Stage};
use crate::verify::{self, SUITES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failure(m) => write!(f, "error: {m}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn failure(e: impl fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

/// Swept parameter: a single value or `start:stop:count` (inclusive ends).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn single(v: f64) -> Self {
        Self { start: v, stop: v, count: 1 }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 })
            .collect()
    }

    pub fn is_swept(&self) -> bool {
        self.count > 1
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| {
            let v: f64 = t.trim().parse().map_err(|_| format!("malformed range '{s}': '{t}' is not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("malformed range '{s}': values must be finite"))
            }
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => Ok(Range::single(num(v)?)),
            [a, b, n] => {
                let count: usize = n
                    .trim()
                    .parse()
                    .map_err(|_| format!("malformed range '{s}': count '{n}' is not a non-negative integer"))?;
                if count == 0 {
                    return Err(format!("malformed range '{s}': count must be >= 1"));
                }
                let (start, stop) = (num(a)?, num(b)?);
                if count == 1 && start != stop {
                    return Err(format!("malformed range '{s}': count 1 needs start == stop"));
                }
                Ok(Range { start, stop, count })
            }
            _ => Err(format!("malformed range '{s}': expected VALUE or START:STOP:COUNT")),
        }
    }
}

/// Config-file form of a range: a bare number or a range string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RangeSpec {
    Value(f64),
    Text(String),
}

impl RangeSpec {
    fn resolve(&self, key: &str) -> CliResult<Range> {
        match self {
            RangeSpec::Value(v) => Ok(Range::single(*v)),
            RangeSpec::Text(s) => s.parse().map_err(|e| CliError::Usage(format!("config key '{key}': {e}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "qscissors", version, about = "Lossy linear and nonlinear quantum scissors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fidelity table for the linear scheme with lossy splitters and detectors
    Lqs(LqsArgs),
    /// Kicked Kerr-cavity trajectory
    Nqs(NqsArgs),
    /// Run the oracle-equivalence suites
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file; stdout if absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// JSON file with default values; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LqsArgs {
    /// Coherent amplitude |α|
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<Range>,
    /// Detector efficiency
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<Range>,
    /// Beam-splitter absorption Γ = 1 − t² − |r|²
    #[arg(long, allow_hyphen_values = true)]
    gamma_bs: Option<Range>,
    /// Reflectance |r|²
    #[arg(long, allow_hyphen_values = true)]
    r_sq: Option<Range>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct NqsArgs {
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    /// Scaled damping γ/κ
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    nbar: Option<f64>,
    /// Scaled time between kicks κT
    #[arg(long, allow_hyphen_values = true)]
    tau_k: Option<f64>,
    #[arg(long)]
    kicks: Option<usize>,
    #[arg(long)]
    cutoff: Option<usize>,
    /// Raw Kerr coupling; with --gamma and --period replaces --lambda and --tau-k
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    /// Raw damping rate
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Raw kick period
    #[arg(long, allow_hyphen_values = true)]
    period: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Suite to run; repeat for several, omit for all
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
    suite: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    alpha: Option<RangeSpec>,
    eta: Option<RangeSpec>,
    gamma_bs: Option<RangeSpec>,
    r_sq: Option<RangeSpec>,
    epsilon: Option<f64>,
    lambda: Option<f64>,
    nbar: Option<f64>,
    tau_k: Option<f64>,
    kicks: Option<usize>,
    cutoff: Option<usize>,
    kappa: Option<f64>,
    gamma: Option<f64>,
    period: Option<f64>,
    suite: Option<Vec<String>>,
    seed: Option<u64>,
    format: Option<Format>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
}

fn load_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

struct Output {
    format: Format,
    out: Option<PathBuf>,
    jobs: usize,
}

impl Output {
    fn resolve(args: &OutputArgs, file: &FileConfig) -> Self {
        Self {
            format: args.format.or(file.format).unwrap_or(Format::Csv),
            out: args.out.clone().or_else(|| file.out.clone()),
            jobs: args.jobs.or(file.jobs).unwrap_or(0),
        }
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new().num_threads(self.jobs).build().map_err(failure)
    }
}

#[derive(Debug, Clone)]
enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Bool(bool),
    Empty,
}

struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

/// Decimal rendering rounded to 15 significant digits, trailing zeros trimmed.
pub fn format_sig15(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.0".to_string();
    }
    let sci = format!("{x:.14e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let s = format!("{:.*}", (14 - exp).max(0) as usize, x);
        let s = if s.contains('.') { s.trim_end_matches('0').to_string() } else { s };
        if s.ends_with('.') {
            format!("{s}0")
        } else {
            s
        }
    } else {
        let m = mantissa.trim_end_matches('0');
        let m = if m.ends_with('.') { format!("{m}0") } else { m.to_string() };
        format!("{m}e{exp}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_sig15(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(format_sig15(*x).parse::<f64>().unwrap_or(*x)),
            Cell::Num(x) => json!(x.to_string()),
            Cell::Int(n) => json!(n),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

impl Table {
    fn render(&self, format: Format, meta: &Value) -> CliResult<Vec<u8>> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.headers).map_err(failure)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).map_err(failure)?;
                }
                w.into_inner().map_err(failure)
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> =
                            self.headers.iter().zip(row).map(|(h, c)| (h.to_string(), c.json())).collect();
                        Value::Object(obj)
                    })
                    .collect();
                let mut bytes = serde_json::to_vec_pretty(&json!({ "meta": meta, "rows": rows })).map_err(failure)?;
                bytes.push(b'\n');
                Ok(bytes)
            }
        }
    }
}

fn emit(bytes: &[u8], out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(failure)
        }
    }
}

fn meta(command: &str, config: Value) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
    })
}

const LQS_AXES: [&str; 4] = ["alpha", "eta", "gamma_bs", "r_sq"];

fn cmd_lqs(args: &LqsArgs) -> CliResult<()> {
    let file = load_config(args.output.config.as_deref())?;
    let output = Output::resolve(&args.output, &file);
    let pick = |flag: Option<Range>, spec: &Option<RangeSpec>, key: &str, default: f64| -> CliResult<Range> {
        match (flag, spec) {
            (Some(r), _) => Ok(r),
            (None, Some(s)) => s.resolve(key),
            (None, None) => Ok(Range::single(default)),
        }
    };
    let axes = [
        pick(args.alpha, &file.alpha, "alpha", 1.0)?,
        pick(args.eta, &file.eta, "eta", 1.0)?,
        pick(args.gamma_bs, &file.gamma_bs, "gamma_bs", 0.0)?,
        pick(args.r_sq, &file.r_sq, "r_sq", 0.5)?,
    ];
    if axes[0].values().iter().any(|a| *a < 0.0) {
        return Err(CliError::Usage("alpha is the amplitude |alpha| and must be >= 0".into()));
    }

    // the first swept axis forms the table; every other swept axis splits output into files
    let table_axis = axes.iter().position(Range::is_swept).unwrap_or(0);
    let values: Vec<Vec<f64>> = axes.iter().map(Range::values).collect();
    let split_axes: Vec<usize> = (0..4).filter(|&i| i != table_axis && axes[i].is_swept()).collect();
    let mut combos: Vec<Vec<f64>> = vec![values.iter().map(|v| v[0]).collect()];
    for &i in &split_axes {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values[i].iter().map(move |&v| {
                    let mut c = c.clone();
                    c[i] = v;
                    c
                })
            })
            .collect();
    }
    if combos.len() > 1 && output.out.is_none() {
        return Err(CliError::Usage(format!(
            "more than one swept axis ({}) writes one file per combination; pass --out",
            std::iter::once(table_axis).chain(split_axes.iter().copied()).map(|i| LQS_AXES[i]).collect::<Vec<_>>().join(", ")
        )));
    }

    let mut points = Vec::new();
    for combo in &combos {
        let mut table = Vec::new();
        for &v in &values[table_axis] {
            let mut point = combo.clone();
            point[table_axis] = v;
            let p = LqsParams::from_r_sq_gamma(C64::new(point[0], 0.0), point[3], point[2], point[1]).map_err(usage)?;
            table.push((point, p));
        }
        points.push(table);
    }

    let pool = output.pool()?;
    let tables: Vec<Table> = pool.install(|| {
        points
            .par_iter()
            .map(|table| Table {
                headers: vec!["alpha_abs", "eta", "gamma_bs", "r_sq", "f_closed", "f_ppb"],
                rows: table
                    .par_iter()
                    .map(|(pt, p)| {
                        let ppb_applies = pt[2] == 0.0 && pt[3] == 0.5;
                        vec![
                            Cell::Num(pt[0]),
                            Cell::Num(pt[1]),
                            Cell::Num(pt[2]),
                            Cell::Num(pt[3]),
                            Cell::Num(fidelity_closed_form(p)),
                            if ppb_applies { Cell::Num(fidelity_ppb(p.alpha, p.eta)) } else { Cell::Empty },
                        ]
                    })
                    .collect(),
            })
            .collect()
    });

    let config = json!({
        "alpha": axes[0],
        "eta": axes[1],
        "gamma_bs": axes[2],
        "r_sq": axes[3],
        "table_axis": LQS_AXES[table_axis],
        "format": output.format,
    });
    for (combo, table) in combos.iter().zip(&tables) {
        let mut fixed = Map::new();
        for &i in &split_axes {
            fixed.insert(LQS_AXES[i].to_string(), json!(combo[i]));
        }
        let mut m = meta("lqs", config.clone());
        m["split"] = Value::Object(fixed);
        let bytes = table.render(output.format, &m)?;
        let path = output.out.as_ref().map(|base| {
            if split_axes.is_empty() {
                base.clone()
            } else {
                let suffix: String = split_axes.iter().map(|&i| format!("_{}-{}", LQS_AXES[i], combo[i])).collect();
                split_path(base, &suffix)
            }
        });
        emit(&bytes, path.as_deref())?;
    }
    Ok(())
}

/// `dir/name.ext` → `dir/name{suffix}.ext`
fn split_path(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    base.with_file_name(name)
}

fn cmd_nqs(args: &NqsArgs) -> CliResult<()> {
    let file = load_config(args.output.config.as_deref())?;
    let output = Output::resolve(&args.output, &file);
    let defaults = NqsParams::default();

    let lambda_flag = args.lambda.or(file.lambda);
    let tau_flag = args.tau_k.or(file.tau_k);
    let kappa = args.kappa.or(file.kappa);
    let gamma = args.gamma.or(file.gamma);
    let period = args.period.or(file.period);
    let (lambda, tau_k, conversion) = match kappa {
        None => {
            if gamma.is_some() || period.is_some() {
                return Err(CliError::Usage("--gamma and --period need --kappa".into()));
            }
            (lambda_flag.unwrap_or(defaults.lambda), tau_flag.unwrap_or(defaults.tau_k), Value::Null)
        }
        Some(kappa) => {
            if !(kappa > 0.0) {
                return Err(CliError::Usage(format!("kappa must be > 0, got {kappa}")));
            }
            let lambda = match (gamma, lambda_flag) {
                (Some(_), Some(_)) => return Err(CliError::Usage("give either --gamma or --lambda, not both".into())),
                (Some(g), None) => g / kappa,
                (None, l) => l.unwrap_or(defaults.lambda),
            };
            let tau_k = match (period, tau_flag) {
                (Some(_), Some(_)) => return Err(CliError::Usage("give either --period or --tau-k, not both".into())),
                (Some(t), None) => kappa * t,
                (None, t) => t.unwrap_or(defaults.tau_k),
            };
            let conv = json!({ "kappa": kappa, "gamma": gamma, "period": period, "lambda": lambda, "tau_k": tau_k });
            (lambda, tau_k, conv)
        }
    };
    let p = NqsParams {
        lambda,
        nbar: args.nbar.or(file.nbar).unwrap_or(defaults.nbar),
        epsilon: args.epsilon.or(file.epsilon).unwrap_or(defaults.epsilon),
        tau_k,
        kicks: args.kicks.or(file.kicks).unwrap_or(defaults.kicks),
        cutoff: args.cutoff.or(file.cutoff).unwrap_or(defaults.cutoff),
        leakage_tolerance: defaults.leakage_tolerance,
    };
    p.validate().map_err(usage)?;
    let warnings = p.warnings();
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let records = output.pool()?.install(|| evolve_kicked(&p, None)).map_err(failure)?;
    let table = Table {
        headers: vec![
            "kick_index", "tau", "fidelity", "trace", "purity", "mean_n", "rho_00", "re_rho_01", "im_rho_01", "rho_11", "stage",
        ],
        rows: records
            .iter()
            .map(|r| {
                let stage = match r.stage {
                    Stage::Initial => "initial",
                    Stage::AfterKick => "after_kick",
                    Stage::AfterFreeEvolution => "after_free_evolution",
                };
                vec![
                    Cell::Int(r.kick_index),
                    Cell::Num(r.tau),
                    Cell::Num(r.fidelity),
                    Cell::Num(r.trace),
                    Cell::Num(r.purity),
                    Cell::Num(r.mean_n),
                    Cell::Num(r.rho.get(0, 0).re),
                    Cell::Num(r.rho.get(0, 1).re),
                    Cell::Num(r.rho.get(0, 1).im),
                    Cell::Num(r.rho.get(1, 1).re),
                    Cell::Text(stage.into()),
                ]
            })
            .collect(),
    };
    let mut config = serde_json::to_value(p).map_err(failure)?;
    config["format"] = json!(output.format);
    let mut m = meta("nqs", config);
    m["conversion"] = conversion;
    m["warnings"] = json!(warnings);
    emit(&table.render(output.format, &m)?, output.out.as_deref())
}

/// Returns whether every suite passed.
fn cmd_verify(args: &VerifyArgs) -> CliResult<bool> {
    let file = load_config(args.output.config.as_deref())?;
    let output = Output::resolve(&args.output, &file);
    let suites = if args.suite.is_empty() { file.suite.clone().unwrap_or_default() } else { args.suite.clone() };
    let seed = args.seed.or(file.seed).unwrap_or(verify::DEFAULT_SEED);
    let reports = output.pool()?.install(|| verify::run_suites(&suites, seed)).map_err(usage)?;

    for r in &reports {
        eprintln!(
            "{} {:<15} max deviation {:.3e} (tolerance {:.0e}, {} checks){}",
            if r.passed { "PASS" } else { "FAIL" },
            r.suite,
            r.max_deviation,
            r.tolerance,
            r.checks,
            if r.detail.is_empty() { String::new() } else { format!(" [{}]", r.detail) }
        );
    }
    let table = Table {
        headers: vec!["suite", "passed", "max_deviation", "tolerance", "checks", "detail"],
        rows: reports
            .iter()
            .map(|r| {
                vec![
                    Cell::Text(r.suite.clone()),
                    Cell::Bool(r.passed),
                    Cell::Num(r.max_deviation),
                    Cell::Num(r.tolerance),
                    Cell::Int(r.checks),
                    Cell::Text(r.detail.clone()),
                ]
            })
            .collect(),
    };
    let config = json!({ "suites": reports.iter().map(|r| r.suite.clone()).collect::<Vec<_>>(), "seed": seed, "format": output.format });
    emit(&table.render(output.format, &meta("verify", config))?, output.out.as_deref())?;
    Ok(reports.iter().all(|r| r.passed))
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Lqs(a) => cmd_lqs(a).map(|_| true),
        Command::Nqs(a) => cmd_nqs(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILURE,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::Failure(_) => EXIT_FAILURE,
            }
        }
    }
}
