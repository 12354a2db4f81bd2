//! Command-line front end.
//!
//! Settings resolve as command-line flag, then `--config` file, then builtin
//! default. Every output file is rendered in memory first and written once
//! the command has succeeded.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use perfpipe_core::aggregate::{prepare_pooled, Imputation, WindowKind, WindowPolicy};
use perfpipe_core::evaluate::{cross_eval, loocv, EvalOptions, EvalReport, RocSource};
use perfpipe_core::learners::{ClassifierKind, ClassifierSpec, ParamMap};
use perfpipe_core::record::{build_trial, Trial, TrialId};
use perfpipe_core::synth::{generate, TrialConfig};
use perfpipe_core::tune::{builtin_best, builtin_grid, cost_weight_search, grid_search, minority_label, Axis, Dataset, ParamGrid};
use perfpipe_core::vote::{vote_outcome, vote_pipeline, TieRule, VoteOutcome};
use perfpipe_core::AggregatedSample;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result, StageExt};
use crate::io::{self, Bundle, PredictionRow};
use crate::parallel::Pool;
use crate::report::{Envelope, InputFile};

#[derive(Debug, Parser)]
#[command(name = "perfpipe", version, about = "Student-performance classification from daily behavioral records")]
pub struct Cli {
    /// Worker threads; overrides PERFPIPE_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate daily and grade CSV files into a trial bundle.
    Ingest(IngestArgs),
    /// Write labeled window samples as CSV.
    Aggregate(AggregateArgs),
    /// Leave-one-out evaluation of one classifier.
    Eval(EvalArgs),
    /// Grid search, or search for a minority-class cost weight.
    Tune(TuneArgs),
    /// Median voting of per-window predictions per student.
    Vote(VoteArgs),
    /// Train on one bundle and test on another.
    Cross(CrossArgs),
    /// Generate a synthetic trial.
    Synth(SynthArgs),
    /// Summarize a report file.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub daily: PathBuf,
    pub grades: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Trial the files belong to; inferred when they name exactly one.
    #[arg(long)]
    pub trial: Option<String>,
    /// First day of the trial; defaults to the earliest record.
    #[arg(long)]
    pub start: Option<NaiveDate>,
    /// Last day of the trial; defaults to the latest record.
    #[arg(long)]
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowArg {
    Weekly,
    Monthly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationArg {
    DropMissing,
    TrialMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocArg {
    LastRun,
    MeanScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieArg {
    Ge,
    Gt,
}

#[derive(Debug, Clone, Default, Args)]
pub struct WindowFlags {
    #[arg(long, value_enum)]
    pub window: Option<WindowArg>,
    /// Drop windows with fewer contributing days.
    #[arg(long)]
    pub min_days: Option<usize>,
    #[arg(long, value_enum)]
    pub imputation: Option<ImputationArg>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    /// JSON file with default settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// dt, rf, svm, nb, knn, adaboost or gradboost.
    #[arg(long)]
    pub model: Option<String>,
    /// JSON file of hyperparameters, or builtin-best:<2018|2021|joined>.
    #[arg(long)]
    pub params: Option<String>,
    /// Weight of the minority class.
    #[arg(long)]
    pub cost_weight: Option<f64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// z-score features with training-fold statistics.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, value_enum)]
    pub roc_source: Option<RocArg>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(required = true)]
    pub bundles: Vec<PathBuf>,
    #[command(flatten)]
    pub window: WindowFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One bundle, or several to pool.
    #[arg(required = true)]
    pub bundles: Vec<PathBuf>,
    #[command(flatten)]
    pub window: WindowFlags,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// ROC points as CSV; defaults to `<out>.roc.csv` when `--out` is set.
    #[arg(long)]
    pub roc: Option<PathBuf>,
    /// Last-run predictions as CSV.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(required = true)]
    pub bundles: Vec<PathBuf>,
    #[command(flatten)]
    pub window: WindowFlags,
    #[command(flatten)]
    pub model: ModelFlags,
    /// `builtin` or a JSON grid file.
    #[arg(long, default_value = "builtin")]
    pub grid: String,
    /// Runs for the report of the winning cell.
    #[arg(long, default_value_t = 10)]
    pub final_runs: usize,
    /// Search these minority-class weights instead of a grid; must include 1.
    #[arg(long, value_delimiter = ',')]
    pub cost_weights: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VoteArgs {
    /// Bundles to evaluate and vote on.
    pub bundles: Vec<PathBuf>,
    /// Vote on an existing predictions file instead.
    #[arg(long, conflicts_with = "bundles")]
    pub predictions_in: Option<PathBuf>,
    #[command(flatten)]
    pub window: WindowFlags,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long, value_enum)]
    pub tie: Option<TieArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Predictions with their `voted` column as CSV.
    #[arg(long)]
    pub predictions_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrossArgs {
    pub train: PathBuf,
    pub test: PathBuf,
    #[command(flatten)]
    pub window: WindowFlags,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub roc: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator settings as JSON; omitted fields take their defaults.
    pub config: Option<PathBuf>,
    /// Daily and grades CSV paths.
    #[arg(long, num_args = 2, value_names = ["DAILY", "GRADES"], required = true)]
    pub out: Vec<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the trial bundle.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Also write the ground truth as JSON.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
    /// Extract the ROC points as CSV.
    #[arg(long)]
    pub roc: Option<PathBuf>,
}

/// Hyperparameters in a config file: a source string as on the command
/// line, or an inline object.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ParamsConfig {
    Source(String),
    Inline(ParamMap),
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub window: Option<WindowArg>,
    pub min_days: Option<usize>,
    pub imputation: Option<ImputationArg>,
    pub model: Option<String>,
    pub params: Option<ParamsConfig>,
    pub cost_weight: Option<f64>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub standardize: Option<bool>,
    pub roc_source: Option<RocArg>,
    pub tie: Option<TieArg>,
}

/// A grid file: ordered axes, optionally naming the classifier.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub kind: Option<ClassifierKind>,
    pub axes: Vec<Axis>,
}

struct Settings {
    policy: WindowPolicy,
    spec: Option<ClassifierSpec>,
    cost_weight: Option<f64>,
    options: EvalOptions,
    seed: u64,
    tie: TieRule,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_kind(s: &str) -> Result<ClassifierKind> {
    ClassifierKind::from_str(s).map_err(|_| usage(format!("unknown model {s:?}")))
}

fn resolve_params(kind: ClassifierKind, source: &ParamsConfig, base: &Path) -> Result<ParamMap> {
    match source {
        ParamsConfig::Inline(map) => Ok(map.clone()),
        ParamsConfig::Source(s) => match s.strip_prefix("builtin-best:") {
            Some(d) => {
                let dataset = Dataset::from_str(d).map_err(|e| usage(e.to_string()))?;
                Ok(builtin_best(kind, dataset))
            }
            None => io::read_json(&base.join(s)),
        },
    }
}

fn resolve(window: &WindowFlags, model: &ModelFlags, default_runs: usize, tie: Option<TieArg>) -> Result<Settings> {
    let config: RunConfig = match &model.config {
        Some(p) => io::read_json(p)?,
        None => RunConfig::default(),
    };
    let config_dir = model
        .config
        .as_ref()
        .and_then(|p| p.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    let kind = match window.window.or(config.window).unwrap_or(WindowArg::Weekly) {
        WindowArg::Weekly => WindowKind::Weekly,
        WindowArg::Monthly => WindowKind::Monthly,
    };
    let policy = WindowPolicy {
        kind,
        min_days: window.min_days.or(config.min_days).unwrap_or(1),
        imputation: match window.imputation.or(config.imputation).unwrap_or(ImputationArg::DropMissing) {
            ImputationArg::DropMissing => Imputation::DropMissing,
            ImputationArg::TrialMean => Imputation::TrialMean,
        },
    };
    let seed = model.seed.or(config.seed).unwrap_or(0);
    let spec = match model.model.as_deref().or(config.model.as_deref()) {
        Some(m) => {
            let kind = parse_kind(m)?;
            let params = match (&model.params, &config.params) {
                (Some(s), _) => resolve_params(kind, &ParamsConfig::Source(s.clone()), Path::new(""))?,
                (None, Some(p)) => resolve_params(kind, p, &config_dir)?,
                (None, None) => ParamMap::new(),
            };
            Some(ClassifierSpec::new(kind).with_params(params).with_seed(seed))
        }
        None => None,
    };
    let options = EvalOptions {
        n_runs: model.runs.or(config.runs).unwrap_or(default_runs),
        standardize: model.standardize || config.standardize.unwrap_or(false),
        roc_source: match model.roc_source.or(config.roc_source).unwrap_or(RocArg::LastRun) {
            RocArg::LastRun => RocSource::LastRun,
            RocArg::MeanScore => RocSource::MeanScore,
        },
    };
    let tie = match tie.or(config.tie).unwrap_or(TieArg::Ge) {
        TieArg::Ge => TieRule::Ge,
        TieArg::Gt => TieRule::Gt,
    };
    Ok(Settings {
        policy,
        spec,
        cost_weight: model.cost_weight.or(config.cost_weight),
        options,
        seed,
        tie,
    })
}

impl Settings {
    fn spec(&self) -> Result<ClassifierSpec> {
        self.spec.clone().ok_or_else(|| usage("--model is required"))
    }

    /// The spec with the cost weight applied to the minority class of
    /// `samples`.
    fn weighted_spec(&self, samples: &[AggregatedSample]) -> Result<ClassifierSpec> {
        let spec = self.spec()?;
        Ok(match self.cost_weight {
            Some(w) => spec.with_class_weight(minority_label(samples), w),
            None => spec,
        })
    }
}

fn load(paths: &[PathBuf]) -> Result<(Vec<Trial>, Vec<InputFile>)> {
    let mut trials = Vec::with_capacity(paths.len());
    let mut inputs = Vec::with_capacity(paths.len());
    for p in paths {
        trials.push(io::read_bundle(p)?);
        inputs.push(InputFile::of(p)?);
    }
    Ok((trials, inputs))
}

/// Files to write once the command succeeds; `None` means stdout.
#[derive(Default)]
struct Outputs(Vec<(Option<PathBuf>, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, path: Option<&Path>, bytes: Vec<u8>) {
        self.0.push((path.map(Path::to_path_buf), bytes));
    }

    fn flush(self) -> Result<()> {
        for (path, bytes) in self.0 {
            match path {
                Some(p) => io::write_atomic(&p, &bytes)?,
                None => {
                    let mut out = std::io::stdout().lock();
                    out.write_all(&bytes).map_err(|e| CliError::io("<stdout>", e))?;
                }
            }
        }
        Ok(())
    }
}

fn roc_path(roc: &Option<PathBuf>, out: &Option<PathBuf>) -> Option<PathBuf> {
    roc.clone().or_else(|| out.as_ref().map(|o| o.with_extension("roc.csv")))
}

fn prediction_rows(report: &EvalReport, with_trial: bool) -> Vec<PredictionRow> {
    report
        .predictions
        .iter()
        .map(|p| PredictionRow {
            student_id: p.student_id.clone(),
            trial_id: with_trial.then(|| p.trial_id.clone()),
            window_index: p.window_index,
            truth: p.truth,
            predicted: p.predicted,
            voted: None,
        })
        .collect()
}

fn ingest(a: &IngestArgs) -> Result<Outputs> {
    let records = io::read_daily_csv(&a.daily)?;
    let grades = io::read_grades_csv(&a.grades)?;
    let trial_id = match &a.trial {
        Some(t) => TrialId::parse(t),
        None => {
            let ids = io::trial_ids(&records, &grades);
            let mut it = ids.into_iter();
            match (it.next(), it.next()) {
                (Some(t), None) => t,
                (None, _) => return Err(usage("input files hold no rows")),
                (Some(a), Some(b)) => {
                    return Err(CliError::Core(perfpipe_core::Error::TrialMismatch {
                        expected: a.to_string(),
                        found: b.to_string(),
                    }))
                }
            }
        }
    };
    let first = records.iter().map(|r| r.date).min();
    let last = records.iter().map(|r| r.date).max();
    let (start, end) = match (a.start.or(first), a.end.or(last)) {
        (Some(s), Some(e)) => (s, e),
        _ => return Err(usage("no daily records; pass --start and --end")),
    };
    let trial = build_trial(records, grades, trial_id, start, end).stage("ingest")?;
    eprintln!(
        "trial {}: {} records, {} students, {start}..={end}",
        trial.trial_id,
        trial.records.len(),
        trial.grades.len()
    );
    let mut out = Outputs::default();
    out.add(Some(&a.out), io::to_json(&Bundle::new(trial)));
    Ok(out)
}

fn aggregate(a: &AggregateArgs) -> Result<Outputs> {
    let s = resolve(&a.window, &ModelFlags::default(), 1, None)?;
    let (trials, _) = load(&a.bundles)?;
    let samples = prepare_pooled(&trials, &s.policy).stage("aggregate")?;
    let mut out = Outputs::default();
    out.add(a.out.as_deref(), io::csv_bytes(|b| io::write_samples(b, &samples)));
    Ok(out)
}

fn eval(a: &EvalArgs, pool: &Pool) -> Result<Outputs> {
    let s = resolve(&a.window, &a.model, 10, None)?;
    let (trials, inputs) = load(&a.bundles)?;
    let samples = prepare_pooled(&trials, &s.policy).stage("aggregate")?;
    let spec = s.weighted_spec(&samples)?;
    let report = loocv(&samples, &spec, s.options, pool).stage("evaluate")?;
    let mut out = Outputs::default();
    if let Some(p) = roc_path(&a.roc, &a.out) {
        out.add(Some(&p), io::csv_bytes(|b| io::write_roc(b, &report.roc_points)));
    }
    if let Some(p) = &a.predictions {
        let rows = prediction_rows(&report, trials.len() > 1);
        out.add(Some(p), io::csv_bytes(|b| io::write_predictions(b, &rows)));
    }
    let env = Envelope::new("eval", s.seed, Some(s.policy), inputs, report);
    out.add(a.out.as_deref(), io::to_json(&env));
    Ok(out)
}

#[derive(Debug, Serialize)]
struct TuneOutput {
    search: perfpipe_core::tune::TuneResult,
    final_report: EvalReport,
}

fn load_grid(source: &str, kind: Option<ClassifierKind>) -> Result<ParamGrid> {
    if source == "builtin" {
        let kind = kind.ok_or_else(|| usage("--model is required with the builtin grid"))?;
        return builtin_grid(kind).map_err(|e| usage(e.to_string()));
    }
    let file: GridFile = io::read_json(Path::new(source))?;
    let kind = match (kind, file.kind) {
        (Some(a), Some(b)) if a != b => return Err(usage(format!("grid file is for {b}, not {a}"))),
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => return Err(usage("--model is required when the grid file names no kind")),
    };
    Ok(ParamGrid { kind, axes: file.axes })
}

fn tune(a: &TuneArgs, pool: &Pool) -> Result<Outputs> {
    let s = resolve(&a.window, &a.model, 3, None)?;
    let (trials, inputs) = load(&a.bundles)?;
    let samples = prepare_pooled(&trials, &s.policy).stage("aggregate")?;
    let mut out = Outputs::default();
    if let Some(weights) = &a.cost_weights {
        let spec = s.spec()?;
        let result = cost_weight_search(&samples, &spec, weights, s.options, pool).stage("tune")?;
        let env = Envelope::new("tune", s.seed, Some(s.policy), inputs, result);
        out.add(a.out.as_deref(), io::to_json(&env));
        return Ok(out);
    }
    let kind = s.spec.as_ref().map(|sp| sp.kind);
    let grid = load_grid(&a.grid, kind)?;
    let base = match &s.spec {
        Some(_) => s.weighted_spec(&samples)?,
        None => ClassifierSpec::new(grid.kind).with_seed(s.seed),
    };
    let base = match s.cost_weight {
        Some(w) if s.spec.is_none() => base.with_class_weight(minority_label(&samples), w),
        _ => base,
    };
    let search = grid_search(&samples, &base, &grid, s.options, pool).stage("tune")?;
    let final_options = EvalOptions {
        n_runs: a.final_runs,
        ..s.options
    };
    let final_report = loocv(&samples, &search.best_spec, final_options, pool).stage("evaluate")?;
    let env = Envelope::new("tune", s.seed, Some(s.policy), inputs, TuneOutput { search, final_report });
    out.add(a.out.as_deref(), io::to_json(&env));
    Ok(out)
}

#[derive(Debug, Serialize)]
struct FileVoteReport {
    tie_rule: TieRule,
    n_samples: usize,
    n_students: usize,
    #[serde(flatten)]
    outcome: VoteOutcomeMetrics,
}

#[derive(Debug, Serialize)]
struct VoteOutcomeMetrics {
    raw: perfpipe_core::evaluate::RunMetrics,
    weekly: perfpipe_core::evaluate::RunMetrics,
    by_student: perfpipe_core::evaluate::RunMetrics,
}

impl From<&VoteOutcome> for VoteOutcomeMetrics {
    fn from(o: &VoteOutcome) -> Self {
        VoteOutcomeMetrics {
            raw: o.raw,
            weekly: o.voted,
            by_student: o.by_student,
        }
    }
}

fn vote(a: &VoteArgs, pool: &Pool) -> Result<Outputs> {
    let s = resolve(&a.window, &a.model, 10, a.tie)?;
    let mut out = Outputs::default();
    if let Some(path) = &a.predictions_in {
        let mut rows = io::read_predictions_csv(path)?;
        let keys: Vec<(Option<TrialId>, perfpipe_core::StudentId)> =
            rows.iter().map(|r| (r.trial_id.clone(), r.student_id.clone())).collect();
        let truth: Vec<_> = rows.iter().map(|r| r.truth).collect();
        let pred: Vec<_> = rows.iter().map(|r| r.predicted).collect();
        if rows.is_empty() {
            return Err(usage("predictions file holds no rows"));
        }
        let outcome = vote_outcome(&truth, &pred, &keys, s.tie).stage("vote")?;
        for (r, v) in rows.iter_mut().zip(&outcome.predictions) {
            r.voted = Some(*v);
        }
        let n_students = keys.iter().collect::<std::collections::BTreeSet<_>>().len();
        let report = FileVoteReport {
            tie_rule: s.tie,
            n_samples: rows.len(),
            n_students,
            outcome: VoteOutcomeMetrics::from(&outcome),
        };
        if let Some(p) = &a.predictions_out {
            out.add(Some(p), io::csv_bytes(|b| io::write_predictions(b, &rows)));
        }
        let env = Envelope::new("vote", s.seed, None, vec![InputFile::of(path)?], report);
        out.add(a.out.as_deref(), io::to_json(&env));
        return Ok(out);
    }
    if a.bundles.is_empty() {
        return Err(usage("pass bundles or --predictions-in"));
    }
    let (trials, inputs) = load(&a.bundles)?;
    let samples = prepare_pooled(&trials, &s.policy).stage("aggregate")?;
    let spec = s.weighted_spec(&samples)?;
    let report = vote_pipeline(&samples, &spec, s.options, s.tie, pool).stage("vote")?;
    if let Some(p) = &a.predictions_out {
        let with_trial = trials.len() > 1;
        let rows: Vec<PredictionRow> = report
            .predictions
            .iter()
            .map(|p| PredictionRow {
                student_id: p.student_id.clone(),
                trial_id: with_trial.then(|| p.trial_id.clone()),
                window_index: p.window_index,
                truth: p.truth,
                predicted: p.predicted,
                voted: Some(p.voted),
            })
            .collect();
        out.add(Some(p), io::csv_bytes(|b| io::write_predictions(b, &rows)));
    }
    let env = Envelope::new("vote", s.seed, Some(s.policy), inputs, report);
    out.add(a.out.as_deref(), io::to_json(&env));
    Ok(out)
}

fn cross(a: &CrossArgs, pool: &Pool) -> Result<Outputs> {
    let s = resolve(&a.window, &a.model, 10, None)?;
    let (train, mut inputs) = load(std::slice::from_ref(&a.train))?;
    let (test, test_inputs) = load(std::slice::from_ref(&a.test))?;
    inputs.extend(test_inputs);
    let train = prepare_pooled(&train, &s.policy).stage("aggregate")?;
    let test = prepare_pooled(&test, &s.policy).stage("aggregate")?;
    let spec = s.weighted_spec(&train)?;
    let report = cross_eval(&train, &test, &spec, s.options, pool).stage("evaluate")?;
    let mut out = Outputs::default();
    if let Some(p) = roc_path(&a.roc, &a.out) {
        out.add(Some(&p), io::csv_bytes(|b| io::write_roc(b, &report.roc_points)));
    }
    let env = Envelope::new("cross", s.seed, Some(s.policy), inputs, report);
    out.add(a.out.as_deref(), io::to_json(&env));
    Ok(out)
}

fn synth(a: &SynthArgs) -> Result<Outputs> {
    let mut cfg: TrialConfig = match &a.config {
        Some(p) => io::read_json(p)?,
        None => TrialConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let (trial, truth) = generate(&cfg).stage("synth")?;
    let mut out = Outputs::default();
    out.add(Some(&a.out[0]), io::csv_bytes(|b| io::write_daily(b, &trial.records)));
    out.add(Some(&a.out[1]), io::csv_bytes(|b| io::write_grades(b, &trial.grades)));
    if let Some(p) = &a.truth {
        out.add(Some(p), io::to_json(&truth));
    }
    if let Some(p) = &a.bundle {
        out.add(Some(p), io::to_json(&Bundle::new(trial)));
    }
    Ok(out)
}

fn fmt_metric(v: &serde_json::Value) -> String {
    v.as_f64().map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn metrics_line(label: &str, m: &serde_json::Value) -> Option<String> {
    m.get("accuracy")?;
    Some(format!(
        "{label}: accuracy {} sensitivity {} specificity {}",
        fmt_metric(&m["accuracy"]),
        fmt_metric(&m["sensitivity"]),
        fmt_metric(&m["specificity"]),
    ))
}

fn report(a: &ReportArgs) -> Result<Outputs> {
    let v: serde_json::Value = io::read_json(&a.report)?;
    if v.get("tool").and_then(|t| t.as_str()) != Some(crate::report::TOOL) {
        return Err(CliError::format(&a.report, "not a perfpipe report"));
    }
    let r = &v["result"];
    let mut lines = vec![
        format!("command: {}", v["command"].as_str().unwrap_or("?")),
        format!("seed: {}", v["seed"]),
    ];
    if let Some(w) = v.get("window") {
        lines.push(format!(
            "window: {} (min_days {}, {})",
            w["kind"].as_str().unwrap_or("?"),
            w["min_days"],
            w["imputation"].as_str().unwrap_or("?")
        ));
    }
    for i in v["inputs"].as_array().into_iter().flatten() {
        lines.push(format!(
            "input: {} sha256 {}",
            i["name"].as_str().unwrap_or("?"),
            i["sha256"].as_str().unwrap_or("?")
        ));
    }
    let mut roc = None;
    let mut eval_lines = |label: &str, e: &serde_json::Value, lines: &mut Vec<String>| {
        if let Some(l) = metrics_line(label, &e["mean_metrics"]) {
            lines.push(format!("{l} auc {}", fmt_metric(&e["auc"])));
            roc = roc.take().or_else(|| e.get("roc_points").cloned());
        }
    };
    eval_lines("mean", r, &mut lines);
    if let Some(best) = r.get("search") {
        lines.push(format!("best score: {}", fmt_metric(&best["best_score"])));
        lines.push(format!("best params: {}", best["best_spec"]["params"]));
        eval_lines("winner", &r["final_report"], &mut lines);
    }
    if let Some(w) = r.get("best_weight") {
        lines.push(format!("best cost weight: {w} (score {})", fmt_metric(&r["best_score"])));
    }
    for key in ["raw", "weekly", "by_student"] {
        let m = &r[key];
        let m = m.get("mean_metrics").unwrap_or(m);
        if let Some(l) = metrics_line(key, m) {
            lines.push(l);
        }
    }
    if let Some(ws) = r["warnings"].as_array() {
        lines.extend(ws.iter().map(|w| format!("warning: {}", w.as_str().unwrap_or("?"))));
    }
    let mut out = Outputs::default();
    if let Some(p) = &a.roc {
        let points: Vec<perfpipe_core::evaluate::RocPoint> = match roc {
            Some(v) => serde_json::from_value(v).map_err(|e| CliError::format(&a.report, e))?,
            None => return Err(usage("report holds no ROC points")),
        };
        out.add(Some(p), io::csv_bytes(|b| io::write_roc(b, &points)));
    }
    let mut text = lines.join("\n");
    text.push('\n');
    out.add(None, text.into_bytes());
    Ok(out)
}

/// Run a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let pool = || Pool::from_env(cli.threads);
    let outputs = match &cli.command {
        Command::Ingest(a) => ingest(a)?,
        Command::Aggregate(a) => aggregate(a)?,
        Command::Eval(a) => eval(a, &pool()?)?,
        Command::Tune(a) => tune(a, &pool()?)?,
        Command::Vote(a) => vote(a, &pool()?)?,
        Command::Cross(a) => cross(a, &pool()?)?,
        Command::Synth(a) => synth(a)?,
        Command::Report(a) => report(a)?,
    };
    outputs.flush()
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
