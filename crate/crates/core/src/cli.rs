//! Command-line harness: `run`, `compliance`, `hv` and `merge`.
//!
//! A run writes three files to its output directory:
//!
//! - `trace.csv`: a `# config_hash=... seed=... status=...` line, then the
//!   columns `run,t,phase,x_0..x_{n-1},y_0..y_{m-1},s_x,acquisition,hv`, one
//!   row per evaluated point (objectives in user units, empty cells for
//!   values that do not apply).
//! - `pareto.json`: the non-dominated points with per-tuple probabilities.
//! - `summary.json`: compliance, final hypervolume, seeds, status and the
//!   effective configuration.
//!
//! Wall-clock timings go to `timings.csv` so the other files stay
//! reproducible. Exit status is 0 on success, 2 for an invalid configuration
//! and 1 for runtime failures (outputs of an aborted run are still written and
//! flagged `partial`).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::{AcquisitionSettings, SearchBudget, SearchSpace};
use crate::benchmarks::{get_benchmark, load_tabular, BenchmarkSpec, TabularDataset, TabularSchema};
use crate::design::Bounds;
use crate::error::{Error, Result};
use crate::gp::FitOptions;
use crate::hypervolume::{dominant_indices, hypervolume};
use crate::optimizer::{
    self, compliance, execute, Combine, Compliance, ConstraintMode, Direction, Gradients, Objective, ParetoSet,
    Phase, RunConfig, RunOutcome, RunStatus, RunTrace,
};

#[derive(Parser, Debug)]
#[command(name = "mobo-pc", version, about = "Multi-objective Bayesian optimisation with preference-order constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run an optimisation described by a TOML config file.
    Run(RunArgs),
    /// Recompute compliance of the Pareto points stored in a trace.
    Compliance(ComplianceArgs),
    /// Hypervolume of a point file (pareto.json or CSV).
    Hv(HvArgs),
    /// Merge the archives of several runs into one Pareto set.
    Merge(MergeArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ComplianceArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Use the analytic gradients of this benchmark.
    #[arg(long, conflicts_with = "gp")]
    pub benchmark: Option<String>,
    /// Use posterior mean gradients of GPs fitted to the trace.
    #[arg(long)]
    pub gp: bool,
    /// Preference tuple as comma-separated objective indices; repeatable.
    #[arg(long = "tuple", required = true, value_parser = parse_indices)]
    pub tuples: Vec<Vec<usize>>,
    /// One direction per objective (default: minimise every objective).
    #[arg(long = "direction")]
    pub directions: Vec<Direction>,
    #[arg(long, default_value = "all")]
    pub combine: Combine,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct HvArgs {
    /// A pareto.json file or a CSV whose columns are the objectives.
    #[arg(long)]
    pub points: PathBuf,
    /// Reference point (defaults to the one stored in pareto.json).
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub z: Option<Vec<f64>>,
    /// One direction per objective for CSV input (default: maximise).
    #[arg(long = "direction")]
    pub directions: Vec<Direction>,
}

#[derive(Args, Debug)]
pub struct MergeArgs {
    /// Output directories of the runs to merge.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::constraint_prob::DEFAULT_PROB_SAMPLES)]
    pub prob_samples: usize,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "maximise" | "maximize" | "max" => Ok(Direction::Maximise),
            "minimise" | "minimize" | "min" => Ok(Direction::Minimise),
            _ => Err(format!("unknown direction `{s}` (expected maximise or minimise)")),
        }
    }
}

impl std::str::FromStr for Combine {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" => Ok(Combine::All),
            "any" => Ok(Combine::Any),
            _ => Err(format!("unknown combination `{s}` (expected all or any)")),
        }
    }
}

fn parse_indices(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',').map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}"))).collect()
}

/// The `run` config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub objective: ObjectiveConfig,
    /// Design box; defaults to the benchmark's bounds.
    #[serde(default)]
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Defaults to the benchmark's or dataset's directions.
    #[serde(default)]
    pub directions: Option<Vec<Direction>>,
    #[serde(default)]
    pub preferences: Vec<Vec<usize>>,
    #[serde(default)]
    pub compliance_preferences: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub constraint_mode: ConstraintMode,
    pub iterations: usize,
    #[serde(default)]
    pub initial_design: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reference_point: Option<Vec<f64>>,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default = "default_gp_restarts")]
    pub gp_restarts: usize,
    #[serde(default)]
    pub allow_degenerate_bounds: bool,
    /// Output directory, relative to the config file.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_gp_restarts() -> usize {
    FitOptions::default().restarts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    #[serde(default)]
    pub benchmark: Option<String>,
    /// CSV file relative to the config file.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub inputs: Option<Vec<String>>,
    #[serde(default)]
    pub objectives: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub acquisition_samples: usize,
    pub prob_samples: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let s = AcquisitionSettings::default();
        Self { acquisition_samples: s.acquisition_samples, prob_samples: s.prob_samples }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub screen_count: usize,
    pub local_restarts: usize,
    pub local_evals: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let b = SearchBudget::default();
        Self { screen_count: b.screen_count, local_restarts: b.local_restarts, local_evals: b.local_evals }
    }
}

enum Problem {
    Benchmark(BenchmarkSpec),
    Dataset(TabularDataset),
}

impl Problem {
    fn objective(&self) -> &dyn Objective {
        match self {
            Problem::Benchmark(b) => b,
            Problem::Dataset(d) => d,
        }
    }
}

/// A parsed config with its problem loaded and paths resolved.
pub struct Experiment {
    pub file: ConfigFile,
    pub config: RunConfig,
    pub space: SearchSpace,
    pub out: PathBuf,
    pub config_hash: String,
    problem: Problem,
}

impl Experiment {
    pub fn objective(&self) -> &dyn Objective {
        self.problem.objective()
    }
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Reads and validates a config file, applying command-line overrides.
pub fn load_experiment(path: &Path, seed: Option<u64>, iterations: Option<usize>, out: Option<PathBuf>) -> Result<Experiment> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let mut file: ConfigFile = toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        file.seed = s;
    }
    if let Some(t) = iterations {
        file.iterations = t;
    }
    let base = path.parent().unwrap_or(Path::new("."));

    let problem = match (&file.objective.benchmark, &file.objective.dataset) {
        (Some(name), None) => {
            if file.objective.inputs.is_some() || file.objective.objectives.is_some() {
                return Err(config_error("column names only apply to datasets"));
            }
            Problem::Benchmark(get_benchmark(name)?)
        }
        (None, Some(dataset)) => {
            let defaults = TabularSchema::crash_study();
            let objectives = file.objective.objectives.clone().unwrap_or(defaults.objectives);
            let directions = file.directions.clone().unwrap_or_else(|| vec![Direction::Minimise; objectives.len()]);
            let schema = TabularSchema {
                inputs: file.objective.inputs.clone().unwrap_or(defaults.inputs),
                objectives,
                directions,
            };
            let path = base.join(dataset);
            Problem::Dataset(load_tabular(&path, &schema).map_err(|e| match e {
                Error::Io(_) | Error::Csv(_) => config_error(format!("{}: {e}", path.display())),
                e => e,
            })?)
        }
        _ => return Err(config_error("objective needs exactly one of `benchmark` or `dataset`")),
    };

    let directions = match (&file.directions, &problem) {
        (Some(d), _) => d.clone(),
        (None, Problem::Benchmark(b)) => vec![b.direction; b.num_objectives],
        (None, Problem::Dataset(d)) => d.directions.clone(),
    };
    let space = match &problem {
        Problem::Benchmark(b) => {
            let intervals = file.bounds.clone().unwrap_or_else(|| b.bounds.clone());
            SearchSpace::Box(Bounds::new(intervals).map_err(config_error)?)
        }
        Problem::Dataset(d) => {
            if file.bounds.is_some() {
                return Err(config_error("bounds do not apply to datasets"));
            }
            SearchSpace::Candidates(d.inputs.clone())
        }
    };

    let config = RunConfig {
        directions,
        preferences: file.preferences.clone(),
        compliance_preferences: file.compliance_preferences.clone(),
        iterations: file.iterations,
        initial_design: file.initial_design,
        seed: file.seed,
        reference_point: file.reference_point.clone(),
        acquisition: AcquisitionSettings {
            acquisition_samples: file.sampling.acquisition_samples,
            prob_samples: file.sampling.prob_samples,
            ..AcquisitionSettings::default()
        },
        search: SearchBudget {
            screen_count: file.search.screen_count,
            local_restarts: file.search.local_restarts,
            local_evals: file.search.local_evals,
        },
        constraint_mode: file.constraint_mode,
        gp_restarts: file.gp_restarts,
        allow_degenerate_bounds: file.allow_degenerate_bounds,
    };
    config.validate(problem.objective(), &space)?;

    let out = match (out, &file.out) {
        (Some(o), _) => o,
        (None, Some(o)) => base.join(o),
        (None, None) => base.join("out"),
    };
    let config_hash = hex::encode(Sha256::digest(serde_json::to_vec(&file)?));
    Ok(Experiment { file, config, space, out, config_hash, problem })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn status_name(s: &RunStatus) -> &'static str {
    match s {
        RunStatus::Completed => "completed",
        RunStatus::Exhausted => "exhausted",
        RunStatus::Aborted { .. } => "aborted",
    }
}

/// Renders the runs as `trace.csv` content.
pub fn render_trace(runs: &[RunTrace], config_hash: &str, seed: u64, status: &RunStatus) -> String {
    let n = runs.iter().flat_map(|r| r.records.first()).next().map_or(0, |r| r.x.len());
    let m = runs.first().map_or(0, |r| r.directions.len());
    let mut out = format!("# config_hash={config_hash} seed={seed} status={}\n", status_name(status));
    let mut header = vec!["run".to_string(), "t".into(), "phase".into()];
    header.extend((0..n).map(|j| format!("x_{j}")));
    header.extend((0..m).map(|i| format!("y_{i}")));
    header.extend(["s_x".into(), "acquisition".into(), "hv".into()]);
    out.push_str(&header.join(","));
    out.push('\n');
    for (k, run) in runs.iter().enumerate() {
        for r in &run.records {
            let mut row = vec![
                k.to_string(),
                r.t.to_string(),
                match r.phase {
                    Phase::Initial => "initial".into(),
                    Phase::Search => "search".into(),
                },
            ];
            row.extend(r.x.iter().map(|v| v.to_string()));
            row.extend(r.y.iter().map(|v| v.to_string()));
            row.extend([fmt_opt(r.s_x), fmt_opt(r.acquisition), r.hv.to_string()]);
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

/// One row of a stored trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub run: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Reads the rows of a `trace.csv`.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let headers = reader.headers()?.clone();
    let cols = |prefix: &str| -> Vec<usize> {
        headers.iter().enumerate().filter(|(_, h)| h.starts_with(prefix)).map(|(i, _)| i).collect()
    };
    let (xc, yc) = (cols("x_"), cols("y_"));
    let run_col = headers.iter().position(|h| h == "run").ok_or_else(|| Error::Parse {
        path: display.clone(),
        row: 2,
        column: "run".into(),
        message: "missing column".into(),
    })?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 3;
        let num = |c: usize| -> Result<f64> {
            rec.get(c).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                path: display.clone(),
                row: line,
                column: headers[c].to_string(),
                message: "expected a number".into(),
            })
        };
        rows.push(TraceRow {
            run: num(run_col)? as usize,
            x: xc.iter().map(|&c| num(c)).collect::<Result<_>>()?,
            y: yc.iter().map(|&c| num(c)).collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct ParetoFile<'a> {
    config_hash: &'a str,
    seed: u64,
    partial: bool,
    #[serde(flatten)]
    pareto: &'a ParetoSet,
}

#[derive(Deserialize)]
struct StoredPareto {
    #[serde(flatten)]
    pareto: ParetoSet,
}

#[derive(Serialize)]
struct FailureEntry<'a> {
    run: usize,
    t: usize,
    x: &'a [f64],
    message: &'a str,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config_hash: &'a str,
    seed: u64,
    run_seeds: Vec<u64>,
    status: &'a RunStatus,
    partial: bool,
    evaluations: usize,
    pareto_size: usize,
    final_hypervolume: f64,
    compliance: Option<&'a Compliance>,
    failures: Vec<FailureEntry<'a>>,
    config: &'a ConfigFile,
}

/// Writes trace.csv, pareto.json, summary.json and timings.csv.
pub fn write_outputs(exp: &Experiment, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(&exp.out)?;
    let seed = exp.config.seed;
    let partial = !matches!(outcome.status, RunStatus::Completed);
    fs::write(exp.out.join("trace.csv"), render_trace(&outcome.runs, &exp.config_hash, seed, &outcome.status))?;

    let pareto = ParetoFile { config_hash: &exp.config_hash, seed, partial, pareto: &outcome.pareto };
    fs::write(exp.out.join("pareto.json"), serde_json::to_string_pretty(&pareto)? + "\n")?;

    let summary = SummaryFile {
        config_hash: &exp.config_hash,
        seed,
        run_seeds: outcome.runs.iter().map(|r| r.seed).collect(),
        status: &outcome.status,
        partial,
        evaluations: outcome.runs.iter().map(|r| r.records.len()).sum(),
        pareto_size: outcome.pareto.points.len(),
        final_hypervolume: outcome.pareto.hypervolume,
        compliance: outcome.compliance.as_ref(),
        failures: outcome
            .runs
            .iter()
            .enumerate()
            .flat_map(|(k, r)| {
                r.failures.iter().map(move |f| FailureEntry { run: k, t: f.t, x: &f.x, message: &f.message })
            })
            .collect(),
        config: &exp.file,
    };
    fs::write(exp.out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;

    let mut timings = format!("# config_hash={} seed={seed}\nrun,t,wall_seconds\n", exp.config_hash);
    for (k, r) in outcome.runs.iter().enumerate() {
        for (t, w) in r.wall_times.iter().enumerate() {
            timings.push_str(&format!("{k},{t},{w}\n"));
        }
    }
    fs::write(exp.out.join("timings.csv"), timings)?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let exp = load_experiment(&args.config, args.seed, args.iterations, args.out)?;
    eprintln!(
        "running {} iterations (seed {}, config {}) -> {}",
        exp.config.iterations,
        exp.config.seed,
        &exp.config_hash[..12],
        exp.out.display()
    );
    let outcome = execute(exp.objective(), &exp.space, &exp.config)?;
    for (k, r) in outcome.runs.iter().enumerate() {
        eprintln!(
            "run {k}: {} evaluations, {} failures, hypervolume {}, {}",
            r.records.len(),
            r.failures.len(),
            r.final_hypervolume(),
            status_name(&r.status)
        );
    }
    write_outputs(&exp, &outcome)?;
    if let Some(c) = &outcome.compliance {
        eprintln!("compliance {:.3} ({}/{})", c.fraction, c.satisfied, c.total);
    }
    match &outcome.status {
        RunStatus::Aborted { reason } => {
            eprintln!("aborted: {reason}; partial outputs written");
            Ok(ExitCode::from(1))
        }
        _ => Ok(ExitCode::SUCCESS),
    }
}

fn to_internal(y: &[f64], dirs: &[Direction]) -> Vec<f64> {
    y.iter()
        .zip(dirs)
        .map(|(v, d)| match d {
            Direction::Maximise => *v,
            Direction::Minimise => -v,
        })
        .collect()
}

fn cmd_compliance(args: ComplianceArgs) -> Result<ExitCode> {
    let rows = read_trace(&args.trace)?;
    let m = rows.first().map_or(0, |r| r.y.len());
    let dirs = if args.directions.is_empty() { vec![Direction::Minimise; m] } else { args.directions.clone() };
    if dirs.len() != m {
        return Err(config_error(format!("{} directions for {m} objectives", dirs.len())));
    }
    let internal: Vec<Vec<f64>> = rows.iter().map(|r| to_internal(&r.y, &dirs)).collect();
    let xs: Vec<Vec<f64>> = dominant_indices(&internal).into_iter().map(|i| rows[i].x.clone()).collect();
    let result = match (&args.benchmark, args.gp) {
        (Some(name), false) => {
            let b = get_benchmark(name)?;
            compliance(&xs, &args.tuples, &dirs, &Gradients::Analytic(&b), args.combine)?
        }
        (None, true) => {
            let config = RunConfig::new(dirs.clone(), 1, args.seed);
            let all_x: Vec<Vec<f64>> = rows.iter().map(|r| r.x.clone()).collect();
            let ys: Vec<Vec<f64>> = rows.iter().map(|r| r.y.clone()).collect();
            let pareto = ParetoSet {
                directions: dirs.clone(),
                preferences: args.tuples.clone(),
                reference_point: vec![],
                hypervolume: 0.0,
                points: xs.iter().map(|x| optimizer::ParetoPoint { x: x.clone(), y: vec![], probs: vec![] }).collect(),
            };
            optimizer::pareto_compliance(&NoGradient, &pareto, &args.tuples, args.combine, (&all_x, &ys), &config)?
        }
        _ => return Err(config_error("pass exactly one of --benchmark or --gp")),
    };
    emit(&serde_json::to_string_pretty(&result)?);
    Ok(ExitCode::SUCCESS)
}

/// Stand-in objective that forces GP gradients.
struct NoGradient;

impl Objective for NoGradient {
    fn num_inputs(&self) -> usize {
        0
    }

    fn num_objectives(&self) -> usize {
        0
    }

    fn evaluate(&self, _x: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Evaluation("not evaluable".into()))
    }
}

/// Hypervolume of the points in `path` (pareto.json or CSV).
pub fn file_hypervolume(path: &Path, z: Option<&[f64]>, directions: &[Direction]) -> Result<f64> {
    let is_json = path.extension().is_some_and(|e| e == "json");
    let (ys, dirs, stored_z) = if is_json {
        let stored: StoredPareto = serde_json::from_str(&fs::read_to_string(path)?)?;
        let ys: Vec<Vec<f64>> = stored.pareto.points.iter().map(|p| p.y.clone()).collect();
        (ys, stored.pareto.directions, Some(stored.pareto.reference_point))
    } else {
        let mut reader = csv::Reader::from_path(path)?;
        let mut ys = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        path: path.display().to_string(),
                        row: i + 2,
                        column: c.to_string(),
                        message: format!("`{v}` is not a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ys.push(row);
        }
        let m = ys.first().map_or(0, |y| y.len());
        let dirs = if directions.is_empty() { vec![Direction::Maximise; m] } else { directions.to_vec() };
        (ys, dirs, None)
    };
    let z = z.map(<[f64]>::to_vec).or(stored_z).ok_or_else(|| config_error("a reference point is required (--z)"))?;
    if z.len() != dirs.len() || ys.iter().any(|y| y.len() != z.len()) {
        return Err(config_error("points, directions and reference point disagree on the number of objectives"));
    }
    let internal: Vec<Vec<f64>> = ys.iter().map(|y| to_internal(y, &dirs)).collect();
    if internal.is_empty() {
        return Ok(0.0);
    }
    hypervolume(&internal, &to_internal(&z, &dirs))
}

fn cmd_hv(args: HvArgs) -> Result<ExitCode> {
    emit(&file_hypervolume(&args.points, args.z.as_deref(), &args.directions)?.to_string());
    Ok(ExitCode::SUCCESS)
}

fn cmd_merge(args: MergeArgs) -> Result<ExitCode> {
    let mut traces = Vec::new();
    let mut preferences: Vec<Vec<usize>> = Vec::new();
    for dir in &args.runs {
        let stored: StoredPareto = serde_json::from_str(&fs::read_to_string(dir.join("pareto.json"))?)?;
        for t in &stored.pareto.preferences {
            if !preferences.contains(t) {
                preferences.push(t.clone());
            }
        }
        let rows = read_trace(&dir.join("trace.csv"))?;
        traces.push(RunTrace {
            seed: 0,
            directions: stored.pareto.directions.clone(),
            preferences: stored.pareto.preferences.clone(),
            records: rows
                .into_iter()
                .enumerate()
                .map(|(t, r)| optimizer::IterationRecord {
                    t,
                    phase: Phase::Search,
                    x: r.x,
                    y: r.y,
                    s_x: None,
                    acquisition: None,
                    hv: 0.0,
                })
                .collect(),
            wall_times: vec![],
            failures: vec![],
            reference_point: stored.pareto.reference_point.clone(),
            status: RunStatus::Completed,
        });
    }
    let mut config = RunConfig::new(traces[0].directions.clone(), 1, args.seed);
    config.acquisition.prob_samples = args.prob_samples;
    let pareto = optimizer::merge_runs(&traces, &preferences, &config)?;
    fs::create_dir_all(&args.out)?;
    let hash = hex::encode(Sha256::digest(serde_json::to_vec(&pareto)?));
    let file = ParetoFile { config_hash: &hash, seed: args.seed, partial: false, pareto: &pareto };
    fs::write(args.out.join("pareto.json"), serde_json::to_string_pretty(&file)? + "\n")?;
    eprintln!("merged {} runs: {} Pareto points", traces.len(), pareto.points.len());
    Ok(ExitCode::SUCCESS)
}

/// Writes a result line to stdout; a closed pipe is not an error.
fn emit(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::UnknownBenchmark { .. } | Error::Parse { .. })
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compliance(a) => cmd_compliance(a),
        Command::Hv(a) => cmd_hv(a),
        Command::Merge(a) => cmd_merge(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
