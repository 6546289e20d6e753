//! Batch command-line driver. Every subcommand resolves a JSON configuration
//! (file plus `--set key=value` overrides), validates it before computing and
//! echoes it as `effective_config.json` into its output directory.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dynamics::{self, FloquetParams, FloquetPropagator, RecordSchedule};
use crate::ensemble::{self, SweepConfig};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{coherent_state, BlochAngles};
use crate::scaling::{self, FitOptions, FitReport, Observable, SearchBox};
use crate::theory;

/// Version of the CSV and JSON layouts written by this tool.
pub const SCHEMA_VERSION: u32 = 1;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (schema 1)");

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kicktop", version = VERSION, about = "Disordered quantum kicked top: exact dynamics, ensembles and finite-size scaling")]
struct Cli {
    /// Worker threads for ensemble sweeps and fits (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key; the value is parsed as JSON when possible.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Validate and print the effective configuration without computing.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One disorder realization, recorded on a log-spaced schedule.
    Evolve(Common),
    /// Disorder ensembles over a grid of sizes and widths.
    Sweep(Common),
    /// Crossings and collapse fit of a runs CSV.
    Analyze(Common),
    /// Closed-form baselines as JSON.
    Theory {
        /// One of rmt-j2, pss-j2, pss-entropy, page-entropy, unkicked-j2,
        /// heisenberg-times, saturation-time, lyapunov, all.
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Classical phase portrait CSV.
    Classical(Common),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub n_qubits: usize,
    pub w: f64,
    pub k: f64,
    #[serde(default = "half_pi")]
    pub p: f64,
    pub theta: f64,
    pub phi: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub realization: u64,
    pub n_max: u64,
    /// Entropy on every this-many recorded samples; 0 disables it.
    #[serde(default = "default_entropy_every")]
    pub entropy_every: usize,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub runs: PathBuf,
    #[serde(default = "default_observable")]
    pub observable: Observable,
    pub search_box: SearchBox,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_min_overlap")]
    pub min_overlap: f64,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    #[serde(rename = "N", default = "default_n")]
    pub n_qubits: usize,
    #[serde(rename = "Q", default)]
    pub q: Option<usize>,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "one")]
    pub w: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_phi")]
    pub phi: f64,
    #[serde(default)]
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "default_portrait_grid")]
    pub grid: usize,
    #[serde(default = "default_portrait_steps")]
    pub steps: usize,
    pub output: PathBuf,
}

fn half_pi() -> f64 {
    std::f64::consts::FRAC_PI_2
}
fn default_entropy_every() -> usize {
    10
}
fn default_observable() -> Observable {
    Observable::J2
}
fn default_grid() -> usize {
    21
}
fn default_bootstrap() -> usize {
    100
}
fn default_min_overlap() -> f64 {
    0.5
}
fn default_n() -> usize {
    12
}
fn one() -> f64 {
    1.0
}
fn default_theta() -> f64 {
    2.25
}
fn default_phi() -> f64 {
    1.1
}
fn default_portrait_grid() -> usize {
    12
}
fn default_portrait_steps() -> usize {
    200
}

/// Usage failures exit with 2, runtime failures with 1.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage<T>(msg: impl Into<String>) -> std::result::Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

/// Reads the config file (or `{}`) and applies the overrides. Giving the same
/// key twice with different values is a conflict.
fn resolve_value(common: &Common) -> std::result::Result<Value, Failure> {
    let mut value = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("config {} is not valid JSON: {e}", path.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if !value.is_object() {
        return usage("config must be a JSON object");
    }
    let mut seen: Vec<(String, Value)> = Vec::new();
    for raw in &common.overrides {
        let Some((key, text)) = raw.split_once('=') else {
            return usage(format!("override `{raw}` is not KEY=VALUE"));
        };
        let key = key.trim();
        if key.is_empty() {
            return usage(format!("override `{raw}` has an empty key"));
        }
        let parsed = serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_owned()));
        if let Some((_, earlier)) = seen.iter().find(|(k, _)| k == key) {
            if *earlier != parsed {
                return usage(format!("conflicting overrides for `{key}`: {earlier} vs {parsed}"));
            }
            continue;
        }
        seen.push((key.to_owned(), parsed.clone()));
        let mut slot = &mut value;
        let parts: Vec<&str> = key.split('.').collect();
        for part in &parts[..parts.len() - 1] {
            let obj = slot.as_object_mut().ok_or_else(|| Failure::Usage(format!("`{key}` does not name an object field")))?;
            slot = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        }
        let obj = slot.as_object_mut().ok_or_else(|| Failure::Usage(format!("`{key}` does not name an object field")))?;
        obj.insert(parts[parts.len() - 1].to_owned(), parsed);
    }
    Ok(value)
}

fn resolve<T: DeserializeOwned>(common: &Common) -> std::result::Result<T, Failure> {
    let value = resolve_value(common)?;
    serde_json::from_value(value).map_err(|e| Failure::Usage(format!("invalid configuration: {e}")))
}

fn validated<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure::Usage(format!("invalid configuration: {e}")))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn write_effective<T: Serialize>(dir: &Path, config: &T) -> Result<()> {
    fs::create_dir_all(dir)?;
    let body = json!({ "schema_version": SCHEMA_VERSION, "config": config });
    ensemble::write_atomically(&dir.join("effective_config.json"), |f| {
        serde_json::to_writer_pretty(&mut *f, &body)?;
        Ok(())
    })
}

impl EvolveConfig {
    fn validate(&self) -> Result<()> {
        FloquetParams::new(self.n_qubits, self.k, self.p)?;
        BlochAngles::new(self.theta, self.phi)?;
        if !(self.w.is_finite() && self.w >= 0.0) {
            return invalid("w must be finite and >= 0");
        }
        Ok(())
    }
}

fn baselines(n: usize, k: f64, w: f64) -> Result<Value> {
    let (t_pss, t_fhs) = theory::heisenberg_times(n);
    let q = n / 2;
    let tstar = theory::saturation_time_estimate(n, k, w)?;
    Ok(json!({
        "N": n,
        "rmt_j2": theory::rmt_j_squared(n),
        "pss_j2": theory::pss_j_squared(n),
        "page_entropy": theory::page_entropy(n, q),
        "pss_entropy": theory::pss_entropy_avg(n, q),
        "heisenberg_pss": t_pss,
        "heisenberg_fhs": t_fhs,
        "saturation_time": if tstar.is_finite() { json!(tstar) } else { json!("inf") },
    }))
}

fn evolve(common: &Common) -> std::result::Result<(), Failure> {
    let config: EvolveConfig = resolve(common)?;
    validated(config.validate())?;
    if common.dry_run {
        return Ok(print_json(&config)?);
    }
    let n = config.n_qubits;
    let seed = dynamics::realization_seed(config.master_seed, n, config.w, config.realization);
    let disorder = dynamics::sample_disorder(n, config.w, seed)?;
    let params = FloquetParams::new(n, config.k, config.p)?;
    let propagator = FloquetPropagator::from_disorder(&params, &disorder)?;
    let initial = coherent_state(n, BlochAngles::new(config.theta, config.phi)?)?;
    let schedule = RecordSchedule::log_spaced(config.n_max, config.entropy_every, n / 2);
    let samples = dynamics::evolve_with(&propagator, &initial, config.n_max, &schedule)?;
    write_effective(&config.output, &config)?;
    ensemble::write_atomically(&config.output.join("trajectory.csv"), |f| ensemble::write_trajectory_csv(&samples, f))?;
    print_json(&json!({ "seed": seed, "samples": samples.len(), "baselines": baselines(n, config.k, config.w)? }))?;
    Ok(())
}

fn sweep(common: &Common) -> std::result::Result<(), Failure> {
    let config: SweepConfig = resolve(common)?;
    validated(config.validate())?;
    let Some(dir) = config.output.clone() else {
        return usage("sweep needs an `output` directory");
    };
    if common.dry_run {
        return Ok(print_json(&config)?);
    }
    let out = ensemble::sweep(&config)?;
    write_effective(&dir, &config)?;
    ensemble::write_sweep(&out, &dir)?;
    print_json(&out.aggregates)?;
    Ok(())
}

fn analyze(common: &Common) -> std::result::Result<(), Failure> {
    let config: AnalyzeConfig = resolve(common)?;
    if !(0.0..=1.0).contains(&config.min_overlap) || config.grid < 2 {
        return usage("invalid configuration: need grid >= 2 and min_overlap in [0, 1]");
    }
    if common.dry_run {
        return Ok(print_json(&config)?);
    }
    let file = fs::File::open(&config.runs).map_err(|e| Failure::Usage(format!("cannot read runs {}: {e}", config.runs.display())))?;
    let runs = ensemble::read_runs_csv(file)?;
    let options = FitOptions {
        grid: config.grid,
        bootstrap: config.bootstrap,
        min_overlap: config.min_overlap,
        ..FitOptions::default()
    };
    let fit = scaling::fit_collapse_bootstrap(&runs, config.observable, &config.search_box, &options, config.seed)?;
    let points = scaling::points_from_runs(&runs, config.observable)?;
    let crossings = scaling::find_crossings(&points, fit.zeta / fit.nu)?;
    let report = FitReport::new(config.observable, &fit, crossings);
    write_effective(&config.output, &config)?;
    ensemble::write_atomically(&config.output.join("fit.json"), |f| {
        serde_json::to_writer_pretty(&mut *f, &report)?;
        Ok(())
    })?;
    ensemble::write_atomically(&config.output.join("collapsed.csv"), |f| scaling::write_collapsed_csv(&points, fit.params(), f))?;
    print_json(&report)?;
    Ok(())
}

fn theory_value(name: &str, c: &TheoryConfig) -> std::result::Result<Value, Failure> {
    let n = c.n_qubits;
    let q = c.q.unwrap_or(n / 2);
    if q == 0 || q >= n {
        return usage(format!("Q = {q} must satisfy 1 <= Q < N"));
    }
    let unkicked = || -> std::result::Result<Value, Failure> {
        let params = validated(theory::UnkickedParams::new(n, c.k, c.w, validated(BlochAngles::new(c.theta, c.phi))?))?;
        let values = c.t.iter().map(|&t| theory::unkicked_j2(t, &params)).collect::<Result<Vec<f64>>>();
        Ok(json!({
            "t": c.t,
            "j2": validated(values)?,
            "saturation": theory::unkicked_j2_saturation(&params),
            "in_validity_regime": params.in_validity_regime(),
        }))
    };
    let value = match name {
        "rmt-j2" => json!(theory::rmt_j_squared(n)),
        "pss-j2" => json!(theory::pss_j_squared(n)),
        "pss-entropy" => json!(theory::pss_entropy_avg(n, q)),
        "page-entropy" => json!(theory::page_entropy(n, q)),
        "heisenberg-times" => {
            let (a, b) = theory::heisenberg_times(n);
            json!({ "pss": a, "fhs": b })
        }
        "saturation-time" => {
            let t = validated(theory::saturation_time_estimate(n, c.k, c.w))?;
            if t.is_finite() { json!(t) } else { json!("inf") }
        }
        "lyapunov" => json!(validated(theory::lyapunov_estimate(c.k))?),
        "unkicked-j2" => unkicked()?,
        "all" => {
            let mut all = validated(baselines(n, c.k, c.w))?;
            all["lyapunov"] = json!(theory::lyapunov_estimate(c.k).ok());
            all["unkicked_j2"] = unkicked()?;
            all
        }
        other => return usage(format!("unknown theory quantity `{other}`")),
    };
    Ok(json!({ "name": name, "params": c, "value": value }))
}

fn classical(common: &Common) -> std::result::Result<(), Failure> {
    let config: ClassicalConfig = resolve(common)?;
    if !(config.k.is_finite() && config.k >= 0.0) || config.grid == 0 {
        return usage("invalid configuration: need k >= 0 and grid >= 1");
    }
    if common.dry_run {
        return Ok(print_json(&config)?);
    }
    let points = theory::phase_portrait(config.k, config.grid, config.steps)?;
    write_effective(&config.output, &config)?;
    ensemble::write_atomically(&config.output.join("portrait.csv"), |f| Ok(theory::write_portrait_csv(&points, f)?))?;
    Ok(())
}

fn dispatch(cli: Cli) -> std::result::Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return usage("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(Error::Invalid(e.to_string())))?;
    }
    match &cli.command {
        Command::Evolve(c) => evolve(c),
        Command::Sweep(c) => sweep(c),
        Command::Analyze(c) => analyze(c),
        Command::Theory { name, common } => {
            let config: TheoryConfig = resolve(common)?;
            let value = theory_value(name, &config)?;
            Ok(print_json(&value)?)
        }
        Command::Classical(c) => classical(c),
    }
}

/// Parses `args` (including the program name) and runs the command, returning
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
