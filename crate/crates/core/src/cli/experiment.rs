//! Experiment configs and the sweep runner.
//!
//! A sweep is a grid of cells `(rule, sweep value, trial)`. Trial `t` draws
//! its profile from the seed `derive_seed(seed, [TRIAL, t])` and its target
//! project from the stream `(seed, [TARGET, t])`, so every rule is evaluated
//! on the same instances. Work is split into units `(rule, trial)` which
//! cover every sweep value at once, since the attack curves share a single
//! greedy path across increases.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{self, Aggregate, StatusCount, TrialRecord, SUMMARY_FILE, TRIALS_FILE};
use crate::attacks::{
    bribery_curve, control_curve, robustness_probe, voter_extractable_value, AttackResult,
    BriberyOptions, ControlMode,
};
use crate::axioms::{
    expected_property, matrix_rule, property_cell_for, replay_appendix_suite, Axiom, AxiomVerdict,
    ExampleResult, SearchConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{gini_index, ground_truth_alignment, welfare_report};
use crate::model::{
    load_ballots_csv, Profile, RuleKind, RuleSpec, DEFAULT_K1, DEFAULT_K2, DEFAULT_Q1, DEFAULT_Q2,
};
use crate::rules::allocate;
use crate::votegen::{derive_seed, generate_profile_with_budget, stream, tags, GenSpec};

pub const ARTIFACT_VERSION: &str = concat!("retrofund ", env!("CARGO_PKG_VERSION"));

/// Units computed between two checkpoints of the trial file.
const BATCH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Bribery,
    Control,
    Robustness,
    Vev,
    WelfareGiniAlignment,
    Axioms,
}

impl ExperimentKind {
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Bribery => &["baseline_share", "final_share", "cost", "mass", "cost_tokens"],
            ExperimentKind::Control => &["baseline_share", "final_share", "cost", "token_mass"],
            ExperimentKind::Robustness => &["mean_deviation", "max_deviation"],
            ExperimentKind::Vev => &["vev", "vev_tokens", "voter", "project"],
            ExperimentKind::WelfareGiniAlignment => {
                &["gini", "utilitarian", "egalitarian", "ground_truth_distance"]
            }
            ExperimentKind::Axioms => &[],
        }
    }

    /// Default sweep grid; `None` for experiments without a sweep axis.
    pub fn default_sweep(self) -> Option<Vec<f64>> {
        match self {
            ExperimentKind::Bribery | ExperimentKind::Control => {
                Some(vec![0.01, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30])
            }
            ExperimentKind::Vev => Some(vec![0.90, 0.93, 0.96, 0.99]),
            _ => None,
        }
    }

    fn sweep_range(self) -> Option<(f64, f64, &'static str)> {
        match self {
            ExperimentKind::Bribery | ExperimentKind::Control => {
                Some((f64::MIN_POSITIVE, 1.0, "target increases must lie in (0, 1]"))
            }
            ExperimentKind::Vev => Some((0.0, 1.0, "concentrations must lie in [0, 1]")),
            _ => None,
        }
    }
}

/// A rule given by name (default parameters) or as a full parameter object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RuleEntry {
    Name(RuleKind),
    Spec(RuleSpec),
}

impl RuleEntry {
    pub fn spec(self) -> RuleSpec {
        match self {
            RuleEntry::Name(kind) => RuleSpec::new(kind),
            RuleEntry::Spec(spec) => spec,
        }
    }

    /// Parameters for the property matrix: bare names get the matrix
    /// parameters, explicit objects are used as given.
    pub fn matrix_spec(self) -> RuleSpec {
        match self {
            RuleEntry::Name(kind) => matrix_rule(kind),
            RuleEntry::Spec(spec) => spec,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_mix")]
    pub mix_weight: f64,
    #[serde(default = "default_alpha")]
    pub dirichlet_alpha: f64,
}

fn default_mix() -> f64 {
    0.5
}
fn default_alpha() -> f64 {
    1.0
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            n: 20,
            m: 30,
            mix_weight: default_mix(),
            dirichlet_alpha: default_alpha(),
        }
    }
}

impl GenerationConfig {
    pub fn spec(&self, seed: u64) -> GenSpec {
        GenSpec {
            n: self.n,
            m: self.m,
            mix_weight: self.mix_weight,
            dirichlet_alpha: self.dirichlet_alpha,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// `trials.csv` plus `summary.json`.
    #[default]
    Both,
    /// Only `trials.csv`.
    Csv,
    /// Only `summary.json`, with the per-trial rows embedded.
    Json,
}

fn all_rules() -> Vec<RuleEntry> {
    RuleKind::ALL.into_iter().map(RuleEntry::Name).collect()
}
fn default_trials() -> usize {
    100
}
fn default_budget() -> f64 {
    8_000_000.0
}
fn default_control_mode() -> ControlMode {
    ControlMode::Delete
}
fn default_perturbations() -> usize {
    10
}
fn default_search_trials() -> usize {
    SearchConfig::default().trials
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "all_rules")]
    pub rules: Vec<RuleEntry>,
    /// Synthetic profiles, one per trial. Used when `input` is absent.
    #[serde(default)]
    pub generation: Option<GenerationConfig>,
    /// A fixed ballot file evaluated in every trial.
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// One-row ground-truth file for a fixed `input`.
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget_tokens: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
    #[serde(default = "default_control_mode")]
    pub control_mode: ControlMode,
    /// Resampled ballots per robustness trial.
    #[serde(default = "default_perturbations")]
    pub perturbations: usize,
    /// Search trials per matrix cell for the axioms experiment.
    #[serde(default = "default_search_trials")]
    pub search_trials: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        serde_json::from_value(serde_json::json!({ "experiment": experiment }))
            .expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn rule_specs(&self) -> Vec<RuleSpec> {
        self.rules.iter().map(|r| r.spec()).collect()
    }

    /// The sweep values in ascending order, or `[None]` without a sweep axis.
    pub fn sweep_values(&self) -> Vec<Option<f64>> {
        match self.sweep.clone().or_else(|| self.experiment.default_sweep()) {
            Some(mut v) => {
                v.sort_by(f64::total_cmp);
                v.into_iter().map(Some).collect()
            }
            None => vec![None],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.rules.is_empty() {
            return bad("rule list is empty".into());
        }
        let specs = self.rule_specs();
        let mut labels = HashSet::new();
        for spec in &specs {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
            if !labels.insert(spec.label()) {
                return bad(format!("rule {} is listed twice", spec.label()));
            }
        }
        if self.input.is_some() && self.generation.is_some() {
            return bad("give either 'generation' or 'input', not both".into());
        }
        if self.ground_truth.is_some() && self.input.is_none() {
            return bad("'ground_truth' needs an 'input' ballot file".into());
        }
        if let Some(g) = &self.generation {
            g.spec(0).validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(self.budget_tokens.is_finite() && self.budget_tokens > 0.0) {
            return bad(format!("budget_tokens must be positive, got {}", self.budget_tokens));
        }
        match (self.experiment.sweep_range(), &self.sweep) {
            (None, Some(_)) => {
                return bad(format!("{:?} experiments take no sweep", self.experiment));
            }
            (Some((lo, hi, msg)), Some(values)) => {
                if values.is_empty() {
                    return bad("sweep is empty".into());
                }
                if values.iter().any(|v| !(lo..=hi).contains(v)) {
                    return bad(format!("{msg}, got {values:?}"));
                }
                let distinct: HashSet<u64> = values.iter().map(|v| v.to_bits()).collect();
                if distinct.len() != values.len() {
                    return bad("sweep values must be distinct".into());
                }
            }
            _ => {}
        }
        if self.experiment == ExperimentKind::Robustness && self.perturbations == 0 {
            return bad("perturbations must be at least 1".into());
        }
        if self.experiment == ExperimentKind::Axioms && self.search_trials == 0 {
            return bad("search_trials must be at least 1".into());
        }
        Ok(())
    }

    fn notes(&self) -> Vec<String> {
        let mut notes = Vec::new();
        match self.experiment {
            ExperimentKind::Bribery => notes.push(
                "bribery costs are greedy upper bounds, not certified minima; cost is the l1 ballot change and cost_tokens scales it by budget_tokens / n".into(),
            ),
            ExperimentKind::Control => {
                notes.push("control costs are greedy upper bounds, not certified minima; cost counts voters".into());
                notes.push(match self.control_mode {
                    ControlMode::Add => "add mode: token_mass is the endowment of the added voters at budget_tokens / n each".into(),
                    ControlMode::Delete => "delete mode: unreachable cells carry no cost; at least one voter always remains".into(),
                });
            }
            ExperimentKind::Robustness => notes.push(format!(
                "each trial resamples one uniformly chosen voter's ballot from Dirichlet(1, ..., 1), {} times, and records the l1 shift of the outcome",
                self.perturbations
            )),
            ExperimentKind::Vev => notes.push(
                "vev is the largest l1 outcome shift from one voter moving the given fraction of their tokens onto one project, the rest kept in proportion; vev_tokens scales it by budget_tokens".into(),
            ),
            ExperimentKind::WelfareGiniAlignment => notes.push(
                "utilitarian and egalitarian are welfare costs (mean and max voter l1 distance, lower is better); ground_truth_distance is empty without a ground truth".into(),
            ),
            ExperimentKind::Axioms => notes.push(
                "a passing cell means no counterexample was found, not a proof".into(),
            ),
        }
        for spec in self.rule_specs() {
            let placeholder = match spec.rule {
                RuleKind::QuorumMedian => spec.q1 == DEFAULT_Q1 && spec.q2 == DEFAULT_Q2,
                RuleKind::CappedMedian => spec.k1 == DEFAULT_K1 && spec.k2 == DEFAULT_K2,
                _ => false,
            };
            if placeholder {
                notes.push(format!(
                    "{} uses placeholder default parameters; the production values are unknown",
                    spec.label()
                ));
            }
        }
        if self.input.is_none() {
            notes.push(
                "profiles mix a Dirichlet base vote with independent Dirichlet noise per voter".into(),
            );
        }
        notes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub artifact_version: String,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub metrics: Vec<String>,
    pub notes: Vec<String>,
    pub aggregates: Vec<Aggregate>,
    pub statuses: Vec<StatusCount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<TrialRecord>>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

enum Source {
    Fixed(Profile, Option<Vec<f64>>),
    Generated(GenerationConfig),
}

impl Source {
    fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let Some(path) = &cfg.input else {
            return Ok(Source::Generated(cfg.generation.unwrap_or_default()));
        };
        let profile = load_ballots_csv(path, cfg.budget_tokens)?;
        let truth = match &cfg.ground_truth {
            Some(t) => {
                let row = load_ballots_csv(t, 1.0)?;
                if row.n() != 1 || row.m() != profile.m() {
                    return Err(Error::Config(format!(
                        "ground truth must be one row of {} values",
                        profile.m()
                    )));
                }
                Some(row.ballot(0).weights().to_vec())
            }
            None => None,
        };
        Ok(Source::Fixed(profile, truth))
    }

    fn instance(&self, seed: u64, budget: f64) -> Result<(Profile, Option<Vec<f64>>)> {
        match self {
            Source::Fixed(p, t) => Ok((p.clone(), t.clone())),
            Source::Generated(g) => {
                let (p, base) = generate_profile_with_budget(&g.spec(seed), budget)?;
                Ok((p, Some(base.into_inner())))
            }
        }
    }
}

fn status_of(e: &Error) -> String {
    match e {
        Error::TargetUnreachable(_) => "unreachable".into(),
        other => other.code().to_ascii_lowercase(),
    }
}

struct Unit {
    rule: usize,
    trial: usize,
}

fn run_unit(cfg: &ExperimentConfig, source: &Source, rule: &RuleSpec, trial: usize, sweep: &[Option<f64>]) -> Vec<TrialRecord> {
    let seed = derive_seed(cfg.seed, &[tags::TRIAL, trial as u64]);
    let width = cfg.experiment.metrics().len();
    let record = |sweep: Option<f64>, outcome: Result<Vec<Option<f64>>>| match outcome {
        Ok(values) => TrialRecord {
            rule: rule.label(),
            sweep,
            trial,
            seed,
            status: "ok".into(),
            values,
        },
        Err(e) => TrialRecord {
            rule: rule.label(),
            sweep,
            trial,
            seed,
            status: status_of(&e),
            values: vec![None; width],
        },
    };
    let (profile, truth) = match source.instance(seed, cfg.budget_tokens) {
        Ok(x) => x,
        Err(e) => return sweep.iter().map(|&s| record(s, Err(e.clone()))).collect(),
    };
    let budget = profile.budget_tokens();
    let per_voter = budget / profile.n() as f64;
    let target = stream(cfg.seed, &[tags::TARGET, trial as u64]).random_range(0..profile.m());
    let increases: Vec<f64> = sweep.iter().filter_map(|s| *s).collect();
    let attack_rows = |results: Vec<Result<AttackResult>>, token_scale: f64, bribery: bool| {
        sweep
            .iter()
            .zip(results)
            .map(|(&s, r)| {
                record(
                    s,
                    r.map(|a| {
                        let mut v = vec![Some(a.baseline_share), Some(a.final_share), Some(a.cost)];
                        if bribery {
                            v.extend([Some(a.mass), Some(a.cost * token_scale)]);
                        } else {
                            v.push(Some(a.mass));
                        }
                        v
                    }),
                )
            })
            .collect()
    };
    match cfg.experiment {
        ExperimentKind::Bribery => attack_rows(
            bribery_curve(&profile, rule, target, &increases, BriberyOptions::default()),
            per_voter,
            true,
        ),
        ExperimentKind::Control => attack_rows(
            control_curve(&profile, rule, target, &increases, cfg.control_mode),
            per_voter,
            false,
        ),
        ExperimentKind::Robustness => {
            let probe = robustness_probe(&profile, rule, cfg.perturbations, derive_seed(seed, &[tags::PERTURB]));
            vec![record(None, probe.map(|r| vec![Some(r.mean), Some(r.max)]))]
        }
        ExperimentKind::Vev => sweep
            .iter()
            .map(|&s| {
                let c = s.expect("vev has a sweep");
                record(
                    s,
                    voter_extractable_value(&profile, rule, c).map(|v| {
                        vec![
                            Some(v.value),
                            Some(v.value * budget),
                            Some(v.voter as f64),
                            Some(v.project as f64),
                        ]
                    }),
                )
            })
            .collect(),
        ExperimentKind::WelfareGiniAlignment => {
            let outcome = (|| -> Result<Vec<Option<f64>>> {
                let a = allocate(&profile, rule)?;
                let w = welfare_report(&profile, a.shares())?;
                let d = truth
                    .as_deref()
                    .map(|t| ground_truth_alignment(a.shares(), t))
                    .transpose()?;
                Ok(vec![Some(gini_index(a.shares())?), Some(w.utilitarian), Some(w.egalitarian), d])
            })();
            vec![record(None, outcome)]
        }
        ExperimentKind::Axioms => unreachable!("axioms are not run per trial"),
    }
}

/// Runs a sweep experiment in memory, without touching the filesystem.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    execute(cfg, Vec::new(), &mut |_| Ok(()))
}

/// Runs the sweep, reusing complete units found in `existing` and calling
/// `checkpoint` with all rows so far after every batch.
fn execute(
    cfg: &ExperimentConfig,
    existing: Vec<TrialRecord>,
    checkpoint: &mut dyn FnMut(&[TrialRecord]) -> Result<()>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.experiment == ExperimentKind::Axioms {
        return Err(Error::Config("the axioms experiment writes a property matrix; use run_axioms".into()));
    }
    let source = Source::from_config(cfg)?;
    let specs = cfg.rule_specs();
    let labels: Vec<String> = specs.iter().map(RuleSpec::label).collect();
    let sweep = cfg.sweep_values();
    let metrics = cfg.experiment.metrics();

    let wanted = |r: &TrialRecord| {
        labels.contains(&r.rule)
            && r.trial < cfg.trials
            && sweep.iter().any(|s| s.map(f64::to_bits) == r.sweep.map(f64::to_bits))
            && r.seed == derive_seed(cfg.seed, &[tags::TRIAL, r.trial as u64])
            && r.values.len() == metrics.len()
    };
    let mut seen = HashSet::new();
    let mut kept: Vec<TrialRecord> = existing
        .into_iter()
        .filter(|r| wanted(r) && seen.insert(r.key()))
        .collect();
    // A unit counts as done only when every sweep value is present.
    let done: HashSet<(String, usize)> = {
        let mut counts = std::collections::HashMap::new();
        for r in &kept {
            *counts.entry((r.rule.clone(), r.trial)).or_insert(0usize) += 1;
        }
        counts
            .into_iter()
            .filter(|(_, c)| *c == sweep.len())
            .map(|(k, _)| k)
            .collect()
    };
    kept.retain(|r| done.contains(&(r.rule.clone(), r.trial)));

    let pending: Vec<Unit> = (0..specs.len())
        .flat_map(|rule| (0..cfg.trials).map(move |trial| Unit { rule, trial }))
        .filter(|u| !done.contains(&(labels[u.rule].clone(), u.trial)))
        .collect();
    let mut rows = kept;
    for batch in pending.chunks(BATCH) {
        let fresh: Vec<Vec<TrialRecord>> = batch
            .par_iter()
            .map(|u| run_unit(cfg, &source, &specs[u.rule], u.trial, &sweep))
            .collect();
        rows.extend(fresh.into_iter().flatten());
        report::sort_records(&mut rows, &labels);
        checkpoint(&rows)?;
    }
    report::sort_records(&mut rows, &labels);
    let (aggregates, statuses) = report::aggregate(&rows, metrics);
    Ok(ExperimentReport {
        artifact_version: ARTIFACT_VERSION.into(),
        experiment: cfg.experiment,
        config: cfg.clone(),
        metrics: metrics.iter().map(|m| m.to_string()).collect(),
        notes: cfg.notes(),
        aggregates,
        statuses,
        records: Some(rows),
    })
}

/// Runs a sweep into `dir`, resuming from a `trials.csv` already there.
///
/// The trial file is rewritten after every batch, so an interrupted run
/// keeps its finished units. The summary is written at the end.
pub fn run_experiment_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.experiment == ExperimentKind::Axioms {
        run_axioms_to_dir(cfg, dir)?;
        return Ok(ExperimentReport {
            artifact_version: ARTIFACT_VERSION.into(),
            experiment: cfg.experiment,
            config: cfg.clone(),
            metrics: Vec::new(),
            notes: cfg.notes(),
            aggregates: Vec::new(),
            statuses: Vec::new(),
            records: None,
        });
    }
    fs::create_dir_all(dir)?;
    let metrics = cfg.experiment.metrics();
    let trials_path = dir.join(TRIALS_FILE);
    let existing = if trials_path.exists() {
        report::read_records(fs::File::open(&trials_path)?, metrics)?
    } else {
        Vec::new()
    };
    let mut save = |rows: &[TrialRecord]| -> Result<()> {
        let mut buf = Vec::new();
        report::write_records(rows, metrics, &mut buf)?;
        report::write_atomic(&trials_path, &buf)
    };
    let mut rep = execute(cfg, existing, &mut save)?;
    let rows = rep.records.take().unwrap_or_default();
    match cfg.format {
        ReportFormat::Both | ReportFormat::Csv => save(&rows)?,
        ReportFormat::Json => {
            if trials_path.exists() {
                fs::remove_file(&trials_path)?;
            }
            rep.records = Some(rows.clone());
        }
    }
    if cfg.format != ReportFormat::Csv {
        report::write_atomic(&dir.join(SUMMARY_FILE), rep.to_json()?.as_bytes())?;
    }
    rep.records = Some(rows);
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Property matrix.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub verdict: AxiomVerdict,
    /// The expected entry for this cell: `true` when the property holds.
    pub expected_holds: bool,
}

impl MatrixCell {
    pub fn agrees(&self) -> bool {
        self.expected_holds != self.verdict.is_counterexample()
    }

    pub fn witness_file(&self) -> Option<String> {
        self.verdict
            .is_counterexample()
            .then(|| format!("{}__{}.json", self.verdict.rule.rule, self.verdict.axiom))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomsReport {
    pub artifact_version: String,
    pub search: SearchConfig,
    pub examples: Vec<ExampleResult>,
    pub cells: Vec<MatrixCell>,
}

impl AxiomsReport {
    /// Rule rows by axiom columns; `!` marks a cell that disagrees with the
    /// expected entry.
    pub fn table(&self) -> String {
        let mut out = String::from("rule");
        for a in Axiom::ALL {
            out.push('\t');
            out.push_str(a.name());
        }
        out.push('\n');
        let mut current: Option<String> = None;
        for cell in &self.cells {
            let label = cell.verdict.rule.label();
            if current.as_deref() != Some(label.as_str()) {
                if current.is_some() {
                    out.push('\n');
                }
                out.push_str(&label);
                current = Some(label);
            }
            out.push('\t');
            out.push_str(cell.verdict.mark());
            if !cell.agrees() {
                out.push('!');
            }
        }
        out.push('\n');
        out
    }

    pub fn matrix_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["rule", "axiom", "status", "expected", "agrees", "trials_run", "witness"])
            .map_err(err)?;
        for c in &self.cells {
            w.write_record([
                c.verdict.rule.label(),
                c.verdict.axiom.to_string(),
                c.verdict.mark().to_string(),
                if c.expected_holds { "✓" } else { "✗" }.to_string(),
                c.agrees().to_string(),
                c.verdict.trials_run.to_string(),
                c.witness_file().unwrap_or_default(),
            ])
            .map_err(err)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Replays the worked examples, then searches every (rule, axiom) cell.
pub fn run_axioms(rules: &[RuleSpec], search: &SearchConfig) -> Result<AxiomsReport> {
    let examples = replay_appendix_suite()?;
    let mut cells = Vec::new();
    for rule in rules {
        for axiom in Axiom::ALL {
            cells.push(MatrixCell {
                verdict: property_cell_for(rule, axiom, search, &examples)?,
                expected_holds: expected_property(rule.rule, axiom),
            });
        }
    }
    Ok(AxiomsReport {
        artifact_version: ARTIFACT_VERSION.into(),
        search: *search,
        examples,
        cells,
    })
}

/// Writes `matrix.csv`, `axioms.json` and one file per witness under
/// `witnesses/`.
pub fn write_axioms_report(rep: &AxiomsReport, dir: &Path) -> Result<()> {
    let wdir = dir.join("witnesses");
    fs::create_dir_all(&wdir)?;
    report::write_atomic(&dir.join("matrix.csv"), &rep.matrix_csv()?)?;
    let mut json = serde_json::to_string_pretty(rep).map_err(|e| Error::Io(e.to_string()))?;
    json.push('\n');
    report::write_atomic(&dir.join("axioms.json"), json.as_bytes())?;
    for cell in &rep.cells {
        if let Some(name) = cell.witness_file() {
            let mut body =
                serde_json::to_string_pretty(&cell.verdict).map_err(|e| Error::Io(e.to_string()))?;
            body.push('\n');
            report::write_atomic(&wdir.join(name), body.as_bytes())?;
        }
    }
    Ok(())
}

fn run_axioms_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<AxiomsReport> {
    let rules: Vec<RuleSpec> = cfg.rules.iter().map(|r| r.matrix_spec()).collect();
    let search = SearchConfig {
        trials: cfg.search_trials,
        seed: cfg.seed,
        ..SearchConfig::default()
    };
    let rep = run_axioms(&rules, &search)?;
    write_axioms_report(&rep, dir)?;
    Ok(rep)
}
