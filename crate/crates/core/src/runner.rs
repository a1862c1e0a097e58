//! The closed control loop and multi-episode experiments.
//!
//! Every step runs five phases in a fixed order, each finishing before the
//! next begins:
//!
//! 1. the controller reads the composed prompt and asks a visual question;
//! 2. one monitor per enabled camera answers it (in parallel);
//! 3. the controller picks an admissible action;
//! 4. the action is dispatched through the [`RobotAdapter`];
//! 5. the memory curator rewrites the environment memory.
//!
//! A step's curation always completes before the next step's prompt is
//! composed. Episodes end on success, at the step cap, or on the first
//! unrecoverable error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ActionHistory, EmbodimentConfig};
use crate::controller::{compose_system_prompt, resolve_parameters, Controller, ControllerError};
use crate::llm::ChatBackend;
use crate::memory::{curate, reference_curate, EnvironmentMemory, DEFAULT_SIZE_BUDGET};
use crate::monitor::{oracle_describe, Monitor, MonitorConfig, MonitorError, MonitorObservation};
use crate::record::{DecisionRecord, FrameLog, StepRecord};
use crate::sim::{random_policy_step, scenario_from_str, RobotAdapter, SimError};
use crate::stats::{self, TTestKind};

/// Step cap for random-action baselines.
pub const RANDOM_STEP_CAP: u32 = 25;
/// Step cap for agent runs.
pub const AGENT_STEP_CAP: u32 = 60;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("controller: {0}")]
    Controller(#[from] ControllerError),
    #[error("monitor `{camera}`: {source}")]
    Monitor { camera: String, source: MonitorError },
    #[error("dispatch: {0}")]
    Dispatch(#[from] SimError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

/// Model backends for the three agent roles. `None` selects the
/// deterministic stand-in: [`oracle_describe`] for monitors,
/// [`reference_curate`] for the curator.
#[derive(Clone)]
pub struct Backends {
    pub controller: Arc<dyn ChatBackend>,
    pub monitor: Option<Arc<dyn ChatBackend>>,
    pub curator: Option<Arc<dyn ChatBackend>>,
}

impl Backends {
    pub fn controller_only(controller: Arc<dyn ChatBackend>) -> Self {
        Backends { controller, monitor: None, curator: None }
    }
}

#[derive(Clone)]
pub enum Policy {
    Agent(Backends),
    /// Uniformly random actions; no queries, no perception.
    Random,
}

#[derive(Debug, Clone)]
pub struct EpisodeOptions {
    pub step_cap: u32,
    pub seed: u64,
    pub memory_budget: usize,
    pub monitor: MonitorConfig,
}

impl EpisodeOptions {
    pub fn new(step_cap: u32, seed: u64) -> Self {
        EpisodeOptions { step_cap, seed, memory_budget: DEFAULT_SIZE_BUDGET, monitor: MonitorConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Success,
    StepCap,
    Error,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Success => "success",
            Termination::StepCap => "step_cap",
            Termination::Error => "error",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Termination::Success, Termination::StepCap, Termination::Error].into_iter().find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub steps: u32,
    pub success: bool,
    pub termination: Termination,
    pub seed: u64,
    pub wall_time_ms: u64,
    pub error: Option<String>,
}

impl EpisodeResult {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        (self.steps, self.success, self.termination, self.seed, &self.error)
            == (other.steps, other.success, other.termination, other.seed, &other.error)
    }
}

pub struct EpisodeRun {
    pub result: EpisodeResult,
    pub steps: Vec<StepRecord>,
}

impl EpisodeRun {
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for s in &self.steps {
            writeln!(w, "{}", s.to_json_line())?;
        }
        w.flush()
    }
}

/// Advances the logical clock and stamps the phase that just completed.
fn stamp(rec: &mut StepRecord, clock: &mut u64) {
    *clock += 1;
    rec.phase_clock.push(*clock);
}

fn observe(
    frames: &[crate::monitor::CameraFrame],
    query: &crate::controller::VisualQuery,
    monitor: &Monitor,
    backend: Option<&Arc<dyn ChatBackend>>,
) -> Result<Vec<MonitorObservation>, StepError> {
    let Some(backend) = backend else {
        return Ok(frames.iter().map(|f| oracle_describe(f, query)).collect());
    };
    std::thread::scope(|scope| {
        let handles: Vec<_> = frames
            .iter()
            .map(|f| scope.spawn(move || monitor.describe_scene(f, query, &**backend)))
            .collect();
        handles
            .into_iter()
            .zip(frames)
            .map(|(h, f)| {
                h.join()
                    .expect("monitor thread panicked")
                    .map_err(|source| StepError::Monitor { camera: f.camera_id.clone(), source })
            })
            .collect()
    })
}

struct Loop<'a> {
    config: &'a EmbodimentConfig,
    adapter: &'a mut dyn RobotAdapter,
    memory: EnvironmentMemory,
    history: ActionHistory,
    clock: u64,
}

impl Loop<'_> {
    fn agent_step(&mut self, t: u32, b: &Backends, monitor: &Monitor, rec: &mut StepRecord) -> Result<(), StepError> {
        let controller = Controller::new(b.controller.clone());

        let prompt = compose_system_prompt(self.config, &self.memory, &self.adapter.proprio(), &self.history);
        rec.prompt_digest = prompt.digest();
        let (query, reprompted) = controller.query(&prompt, t)?;
        rec.query = Some(query.text().to_string());
        rec.flags.query_reprompted = reprompted;
        stamp(rec, &mut self.clock);

        let frames = self.adapter.sense(t);
        rec.frames = frames.iter().map(FrameLog::from_frame).collect();
        rec.observations = observe(&frames, &query, monitor, b.monitor.as_ref())?;
        stamp(rec, &mut self.clock);

        let decision = controller.decide(&prompt, &query, &rec.observations, &self.config.interface)?;
        rec.flags.action_reprompted = decision.reprompted;
        rec.flags.adjustments = decision.adjustments.clone();
        rec.decision = Some(DecisionRecord {
            reasoning: decision.reasoning,
            action: decision.action,
            params: decision.parameters,
        });
        stamp(rec, &mut self.clock);

        self.dispatch(rec)?;

        let outcome = match &b.curator {
            Some(c) => curate(&self.memory, rec, &**c),
            None => crate::memory::CurationOutcome { memory: reference_curate(&self.memory, rec), fell_back: false },
        };
        rec.flags.curator_fallback = outcome.fell_back;
        self.memory = outcome.memory;
        rec.memory = Some(self.memory.clone());
        stamp(rec, &mut self.clock);
        Ok(())
    }

    fn random_step(&mut self, rng: &mut ChaCha8Rng, rec: &mut StepRecord) -> Result<(), StepError> {
        stamp(rec, &mut self.clock);
        stamp(rec, &mut self.clock);
        let def = random_policy_step(&self.config.interface, rng);
        rec.decision = Some(DecisionRecord {
            reasoning: "random baseline".into(),
            action: def.name.clone(),
            params: resolve_parameters(def, &[]).0,
        });
        stamp(rec, &mut self.clock);
        self.dispatch(rec)?;
        self.memory = reference_curate(&self.memory, rec);
        stamp(rec, &mut self.clock);
        Ok(())
    }

    fn dispatch(&mut self, rec: &mut StepRecord) -> Result<(), StepError> {
        let d = rec.decision.as_ref().expect("decision precedes dispatch");
        let def = crate::config::validate_action(&d.action, &self.config.interface)
            .map_err(ControllerError::UnknownAction)?;
        rec.motion = def.motion_event();
        let ack = self.adapter.dispatch(def, &d.params)?;
        rec.ack = Some(ack);
        rec.proprio = Some(self.adapter.proprio());
        self.history.push(rec.step, d.action.clone(), d.params.clone());
        stamp(rec, &mut self.clock);
        Ok(())
    }
}

/// Runs one episode from `adapter.reset(seed)`.
pub fn run_episode(
    config: &EmbodimentConfig,
    adapter: &mut dyn RobotAdapter,
    policy: &Policy,
    options: &EpisodeOptions,
) -> EpisodeRun {
    let started = Instant::now();
    adapter.reset(options.seed);
    let memory = EnvironmentMemory::new(options.memory_budget)
        .with_task(&config.task.objective, config.task.target_label.as_deref());
    let monitor = Monitor::new(options.monitor.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut lp = Loop { config, adapter, memory, history: ActionHistory::new(), clock: 0 };
    let mut log = Vec::new();
    let mut termination = if lp.adapter.success() { Termination::Success } else { Termination::StepCap };
    let mut error = None;
    let mut steps = 0;

    if termination != Termination::Success {
        for t in 1..=options.step_cap {
            let mut rec = StepRecord::new(t, config.robot.cameras.clone());
            let result = match policy {
                Policy::Agent(b) => lp.agent_step(t, b, &monitor, &mut rec),
                Policy::Random => lp.random_step(&mut rng, &mut rec),
            };
            steps = t;
            if let Err(e) = result {
                rec.flags.error = Some(e.to_string());
                error = Some(e.to_string());
                termination = Termination::Error;
                log.push(rec);
                break;
            }
            log.push(rec);
            if lp.adapter.success() {
                termination = Termination::Success;
                break;
            }
        }
    }

    EpisodeRun {
        result: EpisodeResult {
            steps,
            success: termination == Termination::Success,
            termination,
            seed: options.seed,
            wall_time_ms: started.elapsed().as_millis() as u64,
            error,
        },
        steps: log,
    }
}

/// One arm of an experiment.
#[derive(Clone)]
pub struct Condition {
    pub name: String,
    pub policy: Policy,
    pub step_cap: u32,
}

impl Condition {
    pub fn random() -> Self {
        Condition { name: "random".into(), policy: Policy::Random, step_cap: RANDOM_STEP_CAP }
    }

    pub fn agent(name: impl Into<String>, backends: Backends) -> Self {
        Condition { name: name.into(), policy: Policy::Agent(backends), step_cap: AGENT_STEP_CAP }
    }
}

#[derive(Clone)]
pub struct ExperimentSpec {
    pub conditions: Vec<Condition>,
    pub episodes: usize,
    pub base_seed: u64,
    /// Maximum episodes run at once. Use 1 for replay and rate-limited
    /// HTTP backends.
    pub parallelism: usize,
    pub t_test: TTestKind,
    pub memory_budget: usize,
}

impl ExperimentSpec {
    pub fn new(conditions: Vec<Condition>, episodes: usize, base_seed: u64) -> Self {
        ExperimentSpec {
            conditions,
            episodes,
            base_seed,
            parallelism: rayon::current_num_threads(),
            t_test: TTestKind::Pooled,
            memory_budget: DEFAULT_SIZE_BUDGET,
        }
    }
}

/// Seed of the `episode`-th run. Conditions share seeds, so arms are paired.
pub fn episode_seed(base_seed: u64, episode: usize) -> u64 {
    base_seed.wrapping_add(episode as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub condition: String,
    pub episode: usize,
    pub seed: u64,
    pub steps: u32,
    pub success: bool,
    pub termination: String,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub n: usize,
    pub mean_steps: f64,
    pub se_steps: f64,
    /// `"m.mm ± s.ss"`.
    pub table_entry: String,
    pub success_rate: f64,
    pub min_steps: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub adjusted_p: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub conditions: Vec<ConditionSummary>,
    pub comparisons: Vec<Comparison>,
    pub min_steps: Option<u32>,
}

impl ExperimentSummary {
    pub fn condition(&self, name: &str) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.condition == name)
    }
}

/// Aggregates episode rows. Every episode counts with the steps it used,
/// including those that hit the cap; success rate is reported separately.
pub fn summarize(rows: &[EpisodeRow], min_steps: Option<u32>, kind: TTestKind) -> ExperimentSummary {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.condition.as_str()) {
            names.push(&r.condition);
        }
    }
    let samples: Vec<Vec<f64>> = names
        .iter()
        .map(|n| rows.iter().filter(|r| r.condition == *n).map(|r| r.steps as f64).collect())
        .collect();
    let conditions = names
        .iter()
        .zip(&samples)
        .map(|(n, xs)| {
            let succ = rows.iter().filter(|r| r.condition == *n && r.success).count();
            ConditionSummary {
                condition: n.to_string(),
                n: xs.len(),
                mean_steps: stats::mean(xs),
                se_steps: stats::standard_error(xs),
                table_entry: stats::format_mean_se(xs),
                success_rate: succ as f64 / xs.len() as f64,
                min_steps,
            }
        })
        .collect();

    let mut pairs = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            if samples[i].len() >= 2 && samples[j].len() >= 2 {
                pairs.push((i, j));
            }
        }
    }
    let inputs: Vec<(&[f64], &[f64])> = pairs.iter().map(|&(i, j)| (&samples[i][..], &samples[j][..])).collect();
    let comparisons = stats::t_test_holm(&inputs, kind)
        .into_iter()
        .zip(&pairs)
        .map(|(r, &(i, j))| Comparison {
            a: names[i].to_string(),
            b: names[j].to_string(),
            t: r.test.t,
            df: r.test.df,
            p: r.test.p,
            adjusted_p: r.adjusted_p,
            degenerate: r.test.degenerate,
        })
        .collect();
    ExperimentSummary { conditions, comparisons, min_steps }
}

pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    pub rows: Vec<EpisodeRow>,
}

/// Runs every condition for `spec.episodes` seeds on fresh instances of the
/// scenario. With `out_dir`, writes `episodes.csv`, `summary.csv`,
/// `comparisons.csv` and one `steps.jsonl` per episode.
pub fn run_experiment(
    config: &EmbodimentConfig,
    scenario: &str,
    spec: &ExperimentSpec,
    out_dir: Option<&Path>,
) -> Result<ExperimentOutput, RunError> {
    if spec.episodes == 0 || spec.conditions.is_empty() {
        return Err(RunError::Invalid("need at least one condition and one episode".into()));
    }
    let probe = scenario_from_str(scenario)?;
    probe.check_interface(&config.interface)?;
    let min_steps = probe.min_steps(&config.interface).ok();

    let jobs: Vec<(usize, usize)> =
        (0..spec.conditions.len()).flat_map(|c| (0..spec.episodes).map(move |e| (c, e))).collect();
    let run_job = |&(c, e): &(usize, usize)| -> Result<(EpisodeRow, EpisodeRun), RunError> {
        let cond = &spec.conditions[c];
        let mut adapter = scenario_from_str(scenario)?;
        let mut opts = EpisodeOptions::new(cond.step_cap, episode_seed(spec.base_seed, e));
        opts.memory_budget = spec.memory_budget;
        let run = run_episode(config, &mut *adapter, &cond.policy, &opts);
        let row = EpisodeRow {
            condition: cond.name.clone(),
            episode: e,
            seed: run.result.seed,
            steps: run.result.steps,
            success: run.result.success,
            termination: run.result.termination.name().into(),
            wall_time_ms: run.result.wall_time_ms,
        };
        Ok((row, run))
    };
    let results: Vec<Result<(EpisodeRow, EpisodeRun), RunError>> = if spec.parallelism <= 1 {
        jobs.iter().map(run_job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.parallelism)
            .build()
            .map_err(|e| RunError::Invalid(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(run_job).collect())
    };

    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let (row, run) = r?;
        if let Some(dir) = out_dir {
            let ep_dir = episode_dir(dir, &row.condition, row.episode);
            fs::create_dir_all(&ep_dir)?;
            run.write_jsonl(ep_dir.join("steps.jsonl"))?;
        }
        rows.push(row);
    }
    let summary = summarize(&rows, min_steps, spec.t_test);
    if let Some(dir) = out_dir {
        write_outputs(dir, &rows, &summary)?;
    }
    Ok(ExperimentOutput { summary, rows })
}

pub fn episode_dir(out_dir: &Path, condition: &str, episode: usize) -> PathBuf {
    out_dir.join(condition).join(format!("episode_{episode:03}"))
}

pub fn write_outputs(dir: &Path, rows: &[EpisodeRow], summary: &ExperimentSummary) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("episodes.csv"))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    for c in &summary.conditions {
        w.serialize(c)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("comparisons.csv"))?;
    for c in &summary.comparisons {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_episodes_csv(path: impl AsRef<Path>) -> Result<Vec<EpisodeRow>, RunError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<EpisodeRow>, _>>()?;
    for row in &rows {
        if Termination::from_name(&row.termination).is_none() {
            return Err(RunError::Invalid(format!("unknown termination `{}`", row.termination)));
        }
    }
    Ok(rows)
}
