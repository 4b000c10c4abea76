//! Command-line front end.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 runtime error.
//! Every output file is written to a temporary sibling and renamed into place,
//! and each command leaves a `<output>.manifest.json` recording its inputs
//! (with SHA-256 digests), configuration, seed and outputs.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{run_baseline_with, BaselineKind, BaselineOptions};
use crate::error::Error;
use crate::estimator::{run_with, EstimationTrace, EstimatorConfig, RunOptions, DEFAULT_WARMUP};
use crate::evaluation::{
    baseline_schema, compare, default_tune_range, random_search, random_search_baseline, BaselineShape, CompareOptions,
    Method, MethodSpec, SearchIntervals, Trial,
};
use crate::ingestion::{load_dataset, write_query_csv, write_uptake_csv};
use crate::synthgen::{self, Scenario};
use crate::timeseries::Dataset;
use crate::tree::TreeParams;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "atse",
    version,
    about = "Adaptive time-series estimation with windowed tree experts"
)]
struct Cli {
    /// Seed for every random stream; overrides seeds in config or scenario files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Observations consumed before the first estimate [default: 24].
    #[arg(long, global = true)]
    warmup: Option<usize>,
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Run the adaptive estimator walk-forward.
    Run(RunArgs),
    /// Run a lasso or elastic-net baseline walk-forward.
    Baseline(BaselineArgs),
    /// Random hyperparameter search.
    Tune(TuneArgs),
    /// Score several methods on several series.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct Inputs {
    /// Monthly uptake CSV.
    #[arg(long)]
    uptake: PathBuf,
    /// Monthly query-frequency CSV.
    #[arg(long)]
    queries: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Preset name or path to a scenario TOML file.
    #[arg(long)]
    scenario: String,
    /// Writes `<P>.uptake.csv` and `<P>.queries.csv`.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Estimator config TOML; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace CSV.
    #[arg(long)]
    out: PathBuf,
    /// Append the post-update weight of every expert to each trace row.
    #[arg(long)]
    dump_weights: bool,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    kind: BaselineKind,
    /// Config TOML; only `n_lags`, `n_web` and `warmup` are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_lags: Option<usize>,
    #[arg(long)]
    n_web: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Method to tune.
    #[arg(long, default_value = "atse")]
    method: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Steps `a:b` scored during the search [default: first half after warm-up].
    #[arg(long, value_parser = parse_range)]
    tune_range: Option<(usize, usize)>,
    /// TOML overriding the search intervals.
    #[arg(long)]
    intervals: Option<PathBuf>,
    /// Base config for settings that are not searched.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Winning config TOML; the trial log goes to `<out>.trials.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Comparison spec TOML.
    #[arg(long)]
    spec: PathBuf,
    /// Report CSV; `.json` and `.md` siblings are written too.
    #[arg(long)]
    out: PathBuf,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected a:b")?;
    let a = a.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<usize>().map_err(|e| e.to_string())?;
    if a >= b {
        return Err(format!("empty range {a}:{b}"));
    }
    Ok((a, b))
}

/// Failure of a command, with its exit status.
#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_data_error() { EXIT_DATA } else { EXIT_RUNTIME },
            msg: e.to_string(),
        }
    }
}

fn data_failure(msg: String) -> Failure {
    Failure { code: EXIT_DATA, msg }
}

fn runtime_failure(msg: String) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        msg,
    }
}

type CmdResult<T = ()> = std::result::Result<T, Failure>;

/// Flat config file. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trees: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_interval: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_lags: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_web: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_samples_leaf: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_impurity_decrease: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> crate::Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parameter(format!("config: {}", e.message())))
    }

    pub fn to_config(&self) -> EstimatorConfig {
        let d = EstimatorConfig::default();
        let dt = TreeParams::default();
        EstimatorConfig {
            eta: self.eta.unwrap_or(d.eta),
            n_trees: self.n_trees.unwrap_or(d.n_trees),
            warmup: self.warmup.unwrap_or(d.warmup),
            window_interval: self.window_interval.unwrap_or(d.window_interval),
            n_lags: self.n_lags.unwrap_or(d.n_lags),
            n_web: self.n_web.unwrap_or(d.n_web),
            tree_params: TreeParams {
                max_depth: self.max_depth.or(dt.max_depth),
                min_samples_leaf: self.min_samples_leaf.unwrap_or(dt.min_samples_leaf),
                min_impurity_decrease: self.min_impurity_decrease.unwrap_or(dt.min_impurity_decrease),
            },
            master_seed: self.master_seed.unwrap_or(d.master_seed),
        }
    }

    pub fn from_config(c: &EstimatorConfig) -> Self {
        ConfigFile {
            eta: Some(c.eta),
            n_trees: Some(c.n_trees),
            warmup: Some(c.warmup),
            window_interval: Some(c.window_interval),
            n_lags: Some(c.n_lags),
            n_web: Some(c.n_web),
            max_depth: c.tree_params.max_depth,
            min_samples_leaf: Some(c.tree_params.min_samples_leaf),
            min_impurity_decrease: Some(c.tree_params.min_impurity_decrease),
            master_seed: Some(c.master_seed),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

/// Run record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// Input path -> SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub rmse: Option<f64>,
}

impl RunManifest {
    fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            rmse: None,
        }
    }
}

fn read_input(path: &Path, manifest: &mut RunManifest) -> CmdResult<String> {
    let bytes = std::fs::read(path).map_err(|e| data_failure(format!("cannot read {}: {e}", path.display())))?;
    manifest
        .inputs
        .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
    String::from_utf8(bytes).map_err(|_| data_failure(format!("{} is not UTF-8", path.display())))
}

/// Writes `contents` to a temporary file in the target directory, then
/// renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn write_output(path: &Path, contents: &str, manifest: &mut RunManifest) -> CmdResult {
    write_atomic(path, contents.as_bytes())
        .map_err(|e| runtime_failure(format!("cannot write {}: {e}", path.display())))?;
    manifest.outputs.push(path.display().to_string());
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn finish(path: &Path, manifest: &RunManifest) -> CmdResult {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    let target = with_suffix(path, ".manifest.json");
    write_atomic(&target, text.as_bytes())
        .map_err(|e| runtime_failure(format!("cannot write {}: {e}", target.display())))
}

fn load(inputs: &Inputs, manifest: &mut RunManifest) -> CmdResult<Dataset> {
    let uptake = read_input(&inputs.uptake, manifest)?;
    let queries = read_input(&inputs.queries, manifest)?;
    let (ds, report) = load_dataset(&uptake, &queries)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(ds)
}

fn read_config(path: Option<&Path>, manifest: &mut RunManifest) -> CmdResult<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => Ok(ConfigFile::parse(&read_input(p, manifest)?)?),
    }
}

struct Globals {
    seed: Option<u64>,
    warmup: Option<usize>,
}

impl Globals {
    fn apply(&self, mut cfg: EstimatorConfig) -> EstimatorConfig {
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(w) = self.warmup {
            cfg.warmup = w;
        }
        cfg
    }
}

fn trace_csv(ds: &Dataset, trace: &EstimationTrace, weights: bool) -> String {
    let mut out = String::from("t,month,prediction,observation,abs_error");
    let history = trace.weights_history.as_ref().filter(|_| weights);
    if let Some(first) = history.and_then(|h| h.first()) {
        for n in 0..first.len() {
            let _ = write!(out, ",w_{n}");
        }
    }
    out.push('\n');
    for (i, s) in trace.steps.iter().enumerate() {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            s.t,
            ds.month_of(s.t),
            s.prediction,
            s.observation,
            (s.prediction - s.observation).abs()
        );
        if let Some(h) = history {
            for w in h[i].as_slice() {
                let _ = write!(out, ",{w}");
            }
        }
        out.push('\n');
    }
    out
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable")
}

fn cmd_synth(g: &Globals, a: &SynthArgs) -> CmdResult {
    let mut manifest = RunManifest::new("synth", g.seed, serde_json::Value::Null);
    let path = Path::new(&a.scenario);
    let mut sc = if path.is_file() {
        let text = read_input(path, &mut manifest)?;
        toml::from_str::<Scenario>(&text)
            .map_err(|e| Failure::from(Error::Parameter(format!("scenario: {}", e.message()))))?
    } else {
        synthgen::preset(&a.scenario)?
    };
    if let Some(s) = g.seed {
        sc.seed = s;
    }
    manifest.config = to_json(&sc);
    manifest.seed = Some(sc.seed);
    let ds = synthgen::generate(&sc)?;
    let uptake = with_suffix(&a.out_prefix, ".uptake.csv");
    let queries = with_suffix(&a.out_prefix, ".queries.csv");
    write_output(&uptake, &write_uptake_csv(ds.uptake()), &mut manifest)?;
    write_output(&queries, &write_query_csv(ds.panel()), &mut manifest)?;
    log::info!(
        "wrote {} months to {} and {}",
        ds.len(),
        uptake.display(),
        queries.display()
    );
    finish(&a.out_prefix, &manifest)
}

fn cmd_run(g: &Globals, a: &RunArgs) -> CmdResult {
    let mut manifest = RunManifest::new("run", None, serde_json::Value::Null);
    let cfg = g.apply(read_config(a.config.as_deref(), &mut manifest)?.to_config());
    manifest.seed = Some(cfg.master_seed);
    manifest.config = to_json(&ConfigFile::from_config(&cfg));
    let ds = load(&a.inputs, &mut manifest)?;
    let trace = run_with(
        &ds,
        &cfg,
        RunOptions {
            record_weights: a.dump_weights,
            until: None,
        },
    )?;
    manifest.rmse = finite(trace.rmse);
    log::info!("{} estimates, RMSE {:.4}", trace.steps.len(), trace.rmse);
    write_output(&a.out, &trace_csv(&ds, &trace, a.dump_weights), &mut manifest)?;
    finish(&a.out, &manifest)
}

#[derive(Serialize)]
struct BaselineManifestConfig {
    kind: BaselineKind,
    n_lags: usize,
    n_web: usize,
    warmup: usize,
    terms: Vec<String>,
}

fn cmd_baseline(g: &Globals, a: &BaselineArgs) -> CmdResult {
    let mut manifest = RunManifest::new("baseline", None, serde_json::Value::Null);
    let file = read_config(a.config.as_deref(), &mut manifest)?;
    let defaults = EstimatorConfig::default();
    let n_lags = a.n_lags.or(file.n_lags).unwrap_or(defaults.n_lags);
    let n_web = a.n_web.or(file.n_web).unwrap_or(defaults.n_web);
    let warmup = g.warmup.or(file.warmup).unwrap_or(DEFAULT_WARMUP);
    let ds = load(&a.inputs, &mut manifest)?;
    let schema = baseline_schema(&ds, n_lags, n_web, warmup)?;
    let run = run_baseline_with(&ds, a.kind, &schema, warmup, &BaselineOptions::default())?;
    manifest.config = to_json(&BaselineManifestConfig {
        kind: a.kind,
        n_lags,
        n_web,
        warmup,
        terms: schema
            .term_indices()
            .iter()
            .map(|&k| ds.panel().terms()[k].clone())
            .collect(),
    });
    manifest.rmse = finite(run.trace.rmse);
    log::info!("{} estimates, RMSE {:.4}", run.trace.steps.len(), run.trace.rmse);
    write_output(&a.out, &trace_csv(&ds, &run.trace, false), &mut manifest)?;
    finish(&a.out, &manifest)
}

fn trial_log<C>(trials: &[Trial<C>], describe: impl Fn(&C) -> String, header: &str) -> String {
    let mut out = format!("trial,{header},rmse,n_predictions,error\n");
    for t in trials {
        let err = t.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t.index,
            describe(&t.config),
            t.rmse,
            t.n_predictions,
            err
        );
    }
    out
}

#[derive(Serialize)]
struct TuneManifestConfig {
    method: String,
    trials: usize,
    tune_range: (usize, usize),
    intervals: SearchIntervals,
    best_trial: usize,
    best_rmse: f64,
}

fn cmd_tune(g: &Globals, a: &TuneArgs) -> CmdResult {
    let seed = g.seed.unwrap_or(0);
    let mut manifest = RunManifest::new("tune", Some(seed), serde_json::Value::Null);
    let intervals = match &a.intervals {
        None => SearchIntervals::default(),
        Some(p) => {
            let text = read_input(p, &mut manifest)?;
            toml::from_str(&text).map_err(|e| Failure::from(Error::Parameter(format!("intervals: {}", e.message()))))?
        }
    };
    let base = g.apply(read_config(a.config.as_deref(), &mut manifest)?.to_config());
    let ds = load(&a.inputs, &mut manifest)?;
    let range = a
        .tune_range
        .unwrap_or_else(|| default_tune_range(ds.len(), base.warmup));
    let trials_path = with_suffix(&a.out, ".trials.csv");
    let (best_trial, best_rmse, config_text, log_text) = match a.method.as_str() {
        "atse" => {
            let base = EstimatorConfig {
                master_seed: seed,
                ..base
            };
            let out = random_search(&ds, &intervals, a.trials, range, seed, &base)?;
            let log_text = trial_log(
                &out.trials,
                |c| {
                    format!(
                        "{},{},{},{},{}",
                        c.window_interval.1, c.n_lags, c.n_web, c.n_trees, c.eta
                    )
                },
                "window_hi,n_lags,n_web,n_trees,eta",
            );
            let best = &out.trials[out.best_index];
            (
                best.index,
                best.rmse,
                ConfigFile::from_config(&out.best).to_toml(),
                log_text,
            )
        }
        other => {
            let kind: BaselineKind = other
                .parse()
                .map_err(|_| Failure::from(Error::Parameter(format!("unknown method '{other}'"))))?;
            let out = random_search_baseline(&ds, kind, &intervals, a.trials, range, seed, base.warmup)?;
            let log_text = trial_log(
                &out.trials,
                |s: &BaselineShape| format!("{},{}", s.n_lags, s.n_web),
                "n_lags,n_web",
            );
            let best = &out.trials[out.best_index];
            let cfg = ConfigFile {
                n_lags: Some(out.best.n_lags),
                n_web: Some(out.best.n_web),
                warmup: Some(base.warmup),
                ..ConfigFile::default()
            };
            (best.index, best.rmse, cfg.to_toml(), log_text)
        }
    };
    log::info!(
        "best trial {best_trial} of {}: RMSE {best_rmse:.4} on {}:{}",
        a.trials,
        range.0,
        range.1
    );
    manifest.config = to_json(&TuneManifestConfig {
        method: a.method.clone(),
        trials: a.trials,
        tune_range: range,
        intervals,
        best_trial,
        best_rmse,
    });
    manifest.rmse = finite(best_rmse);
    write_output(&a.out, &config_text, &mut manifest)?;
    write_output(&trials_path, &log_text, &mut manifest)?;
    finish(&a.out, &manifest)
}

/// Comparison spec file.
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct CompareSpec {
    eval_from: Option<usize>,
    #[serde(default)]
    series: Vec<SeriesEntry>,
    #[serde(default)]
    method: Vec<MethodEntry>,
    /// Series name -> reference RMSE, marked with `*` in the table.
    references: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SeriesEntry {
    name: String,
    uptake: PathBuf,
    queries: PathBuf,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct MethodEntry {
    name: String,
    kind: String,
    /// Config TOML, resolved relative to the spec file.
    config: Option<PathBuf>,
    n_lags: Option<usize>,
    n_web: Option<usize>,
}

fn cmd_compare(g: &Globals, a: &CompareArgs) -> CmdResult {
    let mut manifest = RunManifest::new("compare", g.seed, serde_json::Value::Null);
    let text = read_input(&a.spec, &mut manifest)?;
    let spec: CompareSpec =
        toml::from_str(&text).map_err(|e| Failure::from(Error::Parameter(format!("spec: {}", e.message()))))?;
    let root = a.spec.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut methods = Vec::new();
    for m in &spec.method {
        let file = read_config(m.config.as_ref().map(|p| root.join(p)).as_deref(), &mut manifest)?;
        let cfg = g.apply(file.to_config());
        let shape = BaselineShape {
            n_lags: m.n_lags.unwrap_or(cfg.n_lags),
            n_web: m.n_web.unwrap_or(cfg.n_web),
        };
        let method = match m.kind.as_str() {
            "atse" => Method::Atse(EstimatorConfig {
                n_lags: shape.n_lags,
                n_web: shape.n_web,
                ..cfg
            }),
            "lasso" => Method::Lasso(shape),
            "enet" => Method::Enet(shape),
            other => {
                return Err(Error::Parameter(format!("method '{}': unknown kind '{other}'", m.name)).into());
            }
        };
        methods.push(MethodSpec::new(m.name.clone(), method));
    }
    let mut datasets = Vec::new();
    for s in &spec.series {
        let inputs = Inputs {
            uptake: root.join(&s.uptake),
            queries: root.join(&s.queries),
        };
        let ds = load(&inputs, &mut manifest).map_err(|f| Failure {
            msg: format!("series '{}': {}", s.name, f.msg),
            ..f
        })?;
        datasets.push((s.name.clone(), ds));
    }
    let opts = CompareOptions {
        warmup: g.warmup.unwrap_or(DEFAULT_WARMUP),
        eval_from: spec.eval_from,
    };
    manifest.config = to_json(&spec);
    let report = compare(&datasets, &methods, &opts)?;
    write_output(&a.out, &report.to_csv(), &mut manifest)?;
    write_output(&a.out.with_extension("json"), &(report.to_json() + "\n"), &mut manifest)?;
    write_output(
        &a.out.with_extension("md"),
        &report.to_table(spec.references.as_ref()),
        &mut manifest,
    )?;
    finish(&a.out, &manifest)
}

fn init_logging(quiet: bool) {
    let level = if quiet {
        log::LevelFilter::Error
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    log::set_max_level(level);
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.quiet);
    let g = Globals {
        seed: cli.seed,
        warmup: cli.warmup,
    };
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(&g, a),
        Command::Run(a) => cmd_run(&g, a),
        Command::Baseline(a) => cmd_baseline(&g, a),
        Command::Tune(a) => cmd_tune(&g, a),
        Command::Compare(a) => cmd_compare(&g, a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_defaults() {
        let c = EstimatorConfig {
            eta: 0.125,
            window_interval: (2, 9),
            ..EstimatorConfig::default()
        };
        let text = ConfigFile::from_config(&c).to_toml();
        assert_eq!(ConfigFile::parse(&text).unwrap().to_config(), c);
        assert_eq!(ConfigFile::parse("").unwrap().to_config(), EstimatorConfig::default());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = ConfigFile::parse("etta = 0.1").unwrap_err();
        assert!(err.to_string().contains("etta"), "{err}");
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("25:52"), Ok((25, 52)));
        assert!(parse_range("5:5").is_err());
        assert!(parse_range("7").is_err());
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(main_with_args(["atse", "run", "--bogus"]), EXIT_USAGE);
        assert_eq!(main_with_args(["atse"]), EXIT_USAGE);
        assert_eq!(main_with_args(["atse", "--help"]), 0);
    }
}
