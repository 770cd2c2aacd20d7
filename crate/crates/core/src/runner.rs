//! Annotation trials, temperature/top-p sweeps and run-directory output.
//!
//! A run directory looks like
//!
//! ```text
//! <run>/trial-1/responses.jsonl
//! <run>/trial-1/report.json
//! <run>/trial-1/report.txt
//! ...
//! <run>/summary.json
//! <run>/summary.txt
//! ```
//!
//! Nothing written there depends on timing, so deterministic providers give
//! byte-identical directories.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GoldInstance, LabelHistogram};
use crate::metrics::{evaluate, AgreementReport, Annotation, AnnotationFailure, MetricError};
use crate::parse::{parse_judgment, Judgment};
use crate::prompt::{PromptBuilder, PromptError, Strategy};
use crate::provider::{ModelConfig, Provider, ProviderError};
use crate::scale::Label;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("at least one trial is required")]
    NoTrials,
    #[error("nothing to summarize")]
    EmptyInput,
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("instance `{instance_id}`: {source}")]
    Provider { instance_id: String, source: ProviderError },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub trials: usize,
    /// Maximum requests in flight within a trial.
    pub concurrency: usize,
    /// When set, every trial is persisted under this directory.
    pub run_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { trials: 1, concurrency: 4, run_dir: None }
    }
}

/// What came back for one instance, as written to `responses.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub instance_id: String,
    pub response: Option<String>,
    pub attempts: Option<u32>,
    pub judgment: Option<Label>,
    pub failure: Option<AnnotationFailure>,
}

impl ResponseRecord {
    pub fn annotation(&self) -> Annotation {
        let outcome = match (self.judgment, &self.failure) {
            (Some(j), _) => Ok(j),
            (None, Some(f)) => Err(f.clone()),
            (None, None) => Err(AnnotationFailure::Provider { message: "no outcome recorded".into() }),
        };
        Annotation { instance_id: self.instance_id.clone(), outcome }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: usize,
    pub responses: Vec<ResponseRecord>,
    pub report: AgreementReport,
    pub config: ModelConfig,
    pub strategy: Strategy,
}

impl TrialResult {
    pub fn annotations(&self) -> Vec<Annotation> {
        self.responses.iter().map(ResponseRecord::annotation).collect()
    }
}

/// Per-trial JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub strategy: Strategy,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(flatten)]
    pub report: AgreementReport,
}

impl TrialReport {
    pub fn from_trial(trial: &TrialResult) -> Self {
        TrialReport {
            trial: trial.trial_index,
            strategy: trial.strategy,
            model: trial.config.model_name.clone(),
            temperature: trial.config.temperature,
            top_p: trial.config.top_p,
            report: trial.report.clone(),
        }
    }

    /// Flat `key=value` rendering, one field per line.
    pub fn to_key_value(&self) -> String {
        let r = &self.report;
        let mut out = String::new();
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| v.to_string());
        let _ = writeln!(out, "trial={}", self.trial);
        let _ = writeln!(out, "strategy={}", self.strategy);
        let _ = writeln!(out, "model={}", self.model);
        let _ = writeln!(out, "temperature={}", self.temperature);
        let _ = writeln!(out, "top_p={}", self.top_p);
        let _ = writeln!(out, "alpha={}", opt(r.alpha));
        let _ = writeln!(out, "alpha_degenerate={}", r.alpha_degenerate);
        let _ = writeln!(out, "percent={}", opt(r.percent));
        let _ = writeln!(out, "n_items={}", r.n_items);
        let _ = writeln!(out, "n_missing={}", r.n_missing);
        for label in Label::ALL {
            let _ = writeln!(out, "pred_histogram.{label}={}", r.pred_histogram.count(label));
        }
        for label in Label::ALL {
            let _ = writeln!(out, "gold_histogram.{label}={}", r.gold_histogram.count(label));
        }
        out
    }
}

fn annotate_one(
    provider: &dyn Provider,
    prompt: &crate::prompt::PromptSpec,
    config: &ModelConfig,
) -> Result<ResponseRecord, ProviderError> {
    let instance_id = prompt.instance_id.clone();
    match provider.complete(prompt, config) {
        Ok(result) => {
            let (judgment, failure) = match parse_judgment(&result.text) {
                Ok(j) => (Some(j), None),
                Err(reason) => (None, Some(AnnotationFailure::Parse { reason })),
            };
            Ok(ResponseRecord {
                instance_id,
                response: Some(result.text),
                attempts: Some(result.attempt_count),
                judgment,
                failure,
            })
        }
        Err(e) if e.is_fatal() => Err(e),
        Err(e) => Ok(ResponseRecord {
            instance_id,
            response: None,
            attempts: None,
            judgment: None,
            failure: Some(AnnotationFailure::Provider { message: e.to_string() }),
        }),
    }
}

fn run_trial(
    split: &[GoldInstance],
    prompts: &[crate::prompt::PromptSpec],
    config: &ModelConfig,
    provider: &dyn Provider,
    concurrency: usize,
) -> Result<Vec<ResponseRecord>, RunError> {
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<Result<ResponseRecord, ProviderError>>>> =
        prompts.iter().map(|_| Mutex::new(None)).collect();
    let workers = concurrency.clamp(1, prompts.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(AtomicOrdering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, AtomicOrdering::Relaxed);
                let Some(prompt) = prompts.get(i) else { break };
                let outcome = annotate_one(provider, prompt, config);
                if outcome.is_err() {
                    abort.store(true, AtomicOrdering::Relaxed);
                }
                *slots[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });

    let mut records = Vec::with_capacity(split.len());
    for (slot, gold) in slots.into_iter().zip(split) {
        match slot.into_inner().expect("slot lock") {
            Some(Ok(record)) => records.push(record),
            Some(Err(source)) => {
                return Err(RunError::Provider { instance_id: gold.instance_id().to_string(), source })
            }
            // Skipped after another instance failed fatally.
            None => continue,
        }
    }
    if records.len() != split.len() {
        return Err(RunError::Provider {
            instance_id: String::new(),
            source: ProviderError::Protocol("trial aborted".into()),
        });
    }
    Ok(records)
}

/// Annotates `split` once per trial. Instances within a trial run on up to
/// `options.concurrency` threads; results keep split order.
pub fn annotate_split(
    split: &[GoldInstance],
    builder: &PromptBuilder,
    config: &ModelConfig,
    provider: &dyn Provider,
    options: &RunOptions,
) -> Result<Vec<TrialResult>, RunError> {
    if options.trials == 0 {
        return Err(RunError::NoTrials);
    }
    config.validate().map_err(|source| RunError::Provider { instance_id: String::new(), source })?;
    let prompts = split.iter().map(|g| builder.build(&g.pair)).collect::<Result<Vec<_>, _>>()?;

    let mut results = Vec::with_capacity(options.trials);
    for trial_index in 1..=options.trials {
        let responses = run_trial(split, &prompts, config, provider, options.concurrency)?;
        let annotations: Vec<Annotation> = responses.iter().map(ResponseRecord::annotation).collect();
        let report = evaluate(split, &annotations)?;
        let trial = TrialResult {
            trial_index,
            responses,
            report,
            config: config.clone(),
            strategy: builder.strategy(),
        };
        if let Some(dir) = &options.run_dir {
            write_trial(dir, &trial)?;
        }
        results.push(trial);
    }
    if let Some(dir) = &options.run_dir {
        write_summary(dir, &results)?;
    }
    Ok(results)
}

/// Mean over trials. Trials with an undefined value are left out of that
/// value's mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub alpha: Option<f64>,
    pub percent: Option<f64>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(reports: &[AgreementReport]) -> Result<MeanRow, RunError> {
    if reports.is_empty() {
        return Err(RunError::EmptyInput);
    }
    Ok(MeanRow {
        alpha: mean(reports.iter().map(|r| r.alpha)),
        percent: mean(reports.iter().map(|r| r.percent)),
    })
}

pub fn summarize_trials(results: &[TrialResult]) -> Result<MeanRow, RunError> {
    let reports: Vec<AgreementReport> = results.iter().map(|t| t.report.clone()).collect();
    summarize(&reports)
}

/// Two-decimal presentation used in summary tables.
pub fn format_score(value: Option<f64>) -> String {
    match value {
        Some(v) => {
            let s = format!("{v:.2}");
            if s == "-0.00" { "0.00".to_string() } else { s }
        }
        None => "n/a".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub strategy: Strategy,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub trials: Vec<TrialReport>,
    pub mean: MeanRow,
}

impl Summary {
    pub fn from_reports(trials: Vec<TrialReport>) -> Result<Summary, RunError> {
        let first = trials.first().ok_or(RunError::EmptyInput)?;
        let reports: Vec<AgreementReport> = trials.iter().map(|t| t.report.clone()).collect();
        Ok(Summary {
            strategy: first.strategy,
            model: first.model.clone(),
            temperature: first.temperature,
            top_p: first.top_p,
            mean: summarize(&reports)?,
            trials,
        })
    }

    /// Trial table in the `Trial | α | %` layout, followed by label counts.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "strategy: {}  model: {}  temperature: {}  top_p: {}",
            self.strategy, self.model, self.temperature, self.top_p
        );
        let _ = writeln!(out, "{:<6} | {:>6} | {:>6} | {:>7}", "Trial", "alpha", "%", "missing");
        let _ = writeln!(out, "{}", "-".repeat(34));
        for t in &self.trials {
            let _ = writeln!(
                out,
                "{:<6} | {:>6} | {:>6} | {:>7}",
                t.trial,
                format_score(t.report.alpha),
                format_score(t.report.percent),
                t.report.n_missing
            );
        }
        let _ = writeln!(out, "{}", "-".repeat(34));
        let _ = writeln!(
            out,
            "{:<6} | {:>6} | {:>6} |",
            "Mean",
            format_score(self.mean.alpha),
            format_score(self.mean.percent)
        );
        out.push('\n');
        let gold = self.trials[0].report.gold_histogram;
        let pred = self.trials.iter().fold(LabelHistogram::default(), |mut acc, t| {
            for (a, b) in acc.0.iter_mut().zip(t.report.pred_histogram.0) {
                *a += b;
            }
            acc
        });
        out.push_str(&histogram_table(&gold, &pred, self.trials.len()));
        out
    }
}

/// Side-by-side label distribution: gold counts against predicted counts
/// summed over `trials` trials.
pub fn histogram_table(gold: &LabelHistogram, pred: &LabelHistogram, trials: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<6} | {:>6} | {:>10}", "Label", "gold", "predicted");
    for label in Label::ALL {
        let share = |n: usize, total: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
        let _ = writeln!(
            out,
            "{:<6} | {:>6} | {:>10}  gold {:>5.1}% pred {:>5.1}%",
            label,
            gold.count(label),
            pred.count(label),
            100.0 * share(gold.count(label), gold.total()),
            100.0 * share(pred.count(label), pred.total())
        );
    }
    let _ = writeln!(out, "(predicted counts summed over {trials} trial(s))");
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn trial_dir(run_dir: &Path, trial_index: usize) -> PathBuf {
    run_dir.join(format!("trial-{trial_index}"))
}

pub fn write_trial(run_dir: &Path, trial: &TrialResult) -> Result<(), RunError> {
    let dir = trial_dir(run_dir, trial.trial_index);
    let mut responses = String::new();
    for record in &trial.responses {
        responses.push_str(&serde_json::to_string(record).expect("serializable"));
        responses.push('\n');
    }
    write_file(&dir.join("responses.jsonl"), &responses)?;
    let report = TrialReport::from_trial(trial);
    write_file(&dir.join("report.json"), &to_json(&report))?;
    write_file(&dir.join("report.txt"), &report.to_key_value())
}

pub fn write_summary(run_dir: &Path, results: &[TrialResult]) -> Result<Summary, RunError> {
    let summary = Summary::from_reports(results.iter().map(TrialReport::from_trial).collect())?;
    write_file(&run_dir.join("summary.json"), &to_json(&summary))?;
    write_file(&run_dir.join("summary.txt"), &summary.to_table())?;
    Ok(summary)
}

/// Reads back the per-trial reports of a run directory, ordered by trial.
pub fn load_run(run_dir: &Path) -> Result<Vec<TrialReport>, RunError> {
    let entries = fs::read_dir(run_dir).map_err(io_err(run_dir))?;
    let mut trials = Vec::new();
    for entry in entries {
        let entry = entry.map_err(io_err(run_dir))?;
        let name = entry.file_name();
        let Some(index) = name.to_str().and_then(|n| n.strip_prefix("trial-")).and_then(|n| n.parse::<usize>().ok())
        else {
            continue;
        };
        let path = entry.path().join("report.json");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let report: TrialReport = serde_json::from_str(&text)
            .map_err(|e| RunError::Format { path: path.clone(), message: e.to_string() })?;
        trials.push((index, report));
    }
    if trials.is_empty() {
        return Err(RunError::EmptyInput);
    }
    trials.sort_by_key(|(i, _)| *i);
    Ok(trials.into_iter().map(|(_, r)| r).collect())
}

/// Sampling values to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub temperatures: Vec<f64>,
    pub top_ps: Vec<f64>,
}

impl Grid {
    /// 0.1 to 1.0 in steps of 0.1 on both axes.
    pub fn full() -> Grid {
        let tenths: Vec<f64> = (1..=10).map(|i| f64::from(i) / 10.0).collect();
        Grid { temperatures: tenths.clone(), top_ps: tenths }
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.temperatures.iter().flat_map(move |&t| self.top_ps.iter().map(move |&p| (t, p)))
    }

    pub fn is_empty(&self) -> bool {
        self.temperatures.is_empty() || self.top_ps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub temperature: f64,
    pub top_p: f64,
    pub mean_alpha: Option<f64>,
    pub mean_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: Vec<SweepCell>,
    pub best: ModelConfig,
}

fn score_cmp(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Greater,
        (None, Some(_)) => Ordering::Less,
        (None, None) => Ordering::Equal,
    }
}

/// Selection order: higher mean α, then higher mean percent, then lower
/// temperature, then lower top-p. `Ordering::Greater` means `a` is better.
pub fn cell_preference(a: &SweepCell, b: &SweepCell) -> Ordering {
    score_cmp(a.mean_alpha, b.mean_alpha)
        .then_with(|| score_cmp(a.mean_percent, b.mean_percent))
        .then_with(|| b.temperature.total_cmp(&a.temperature))
        .then_with(|| b.top_p.total_cmp(&a.top_p))
}

pub fn select_best(cells: &[SweepCell]) -> Option<&SweepCell> {
    cells.iter().max_by(|a, b| cell_preference(a, b))
}

fn cell_dir_name(temperature: f64, top_p: f64) -> String {
    format!("t{temperature}-p{top_p}")
}

/// Evaluates every grid cell with `options.trials` trials and picks the best.
/// With a run directory, each cell is persisted in its own subdirectory.
pub fn sweep(
    dev: &[GoldInstance],
    builder: &PromptBuilder,
    base: &ModelConfig,
    provider: &dyn Provider,
    grid: &Grid,
    options: &RunOptions,
) -> Result<SweepResult, RunError> {
    if grid.is_empty() {
        return Err(RunError::EmptyGrid);
    }
    let mut cells = Vec::new();
    for (temperature, top_p) in grid.cells() {
        let config = base.with_sampling(temperature, top_p);
        let cell_options = RunOptions {
            run_dir: options.run_dir.as_ref().map(|d| d.join(cell_dir_name(temperature, top_p))),
            ..options.clone()
        };
        let trials = annotate_split(dev, builder, &config, provider, &cell_options)?;
        let mean = summarize_trials(&trials)?;
        cells.push(SweepCell { temperature, top_p, mean_alpha: mean.alpha, mean_percent: mean.percent });
    }
    let best = select_best(&cells).expect("grid is non-empty");
    let result = SweepResult { best: base.with_sampling(best.temperature, best.top_p), grid: cells };
    if let Some(dir) = &options.run_dir {
        write_file(&dir.join("sweep.json"), &to_json(&result))?;
        write_file(&dir.join("sweep.txt"), &sweep_table(&result))?;
    }
    Ok(result)
}

pub fn sweep_table(result: &SweepResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>11} | {:>5} | {:>6} | {:>6}", "temperature", "top_p", "alpha", "%");
    for c in &result.grid {
        let _ = writeln!(
            out,
            "{:>11} | {:>5} | {:>6} | {:>6}",
            c.temperature,
            c.top_p,
            format_score(c.mean_alpha),
            format_score(c.mean_percent)
        );
    }
    let _ = writeln!(out, "best: temperature {} top_p {}", result.best.temperature, result.best.top_p);
    out
}

/// Judgments of a trial in split order, `None` where missing.
pub fn judgments(trial: &TrialResult) -> Vec<Option<Judgment>> {
    trial.responses.iter().map(|r| r.judgment).collect()
}
