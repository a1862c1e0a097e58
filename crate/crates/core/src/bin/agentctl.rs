use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use agentic_control::blackjack::{self, ChatPlayer, ExperimentConfig, MemoryMode};
use agentic_control::config::{load_embodiment_config, EmbodimentConfig};
use agentic_control::llm::{record_session, ChatBackend, HttpBackend, HttpConfig, ReplayBackend, ScriptedBackend};
use agentic_control::runner::{
    self, read_episodes_csv, run_episode, run_experiment, write_outputs, Backends, Condition, EpisodeOptions,
    ExperimentSpec, Policy, AGENT_STEP_CAP, RANDOM_STEP_CAP,
};
use agentic_control::sim::{load_scenario, scenario_from_str};
use agentic_control::stats::TTestKind;

type AnyError = Box<dyn std::error::Error>;

#[derive(Parser)]
#[command(name = "agentctl", about = "Run the agentic control loop on simulated robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single episode and write its step log.
    Run(RunArgs),
    /// Run several conditions for many seeded episodes and compare them.
    Experiment(ExperimentArgs),
    /// Hidden-target blackjack memory experiment.
    Blackjack(BlackjackArgs),
    /// Print the minimum number of steps to success for a scenario.
    Oracle(OracleArgs),
    /// Recompute summary statistics from an episodes.csv.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Scripted,
    Replay,
    Http,
}

#[derive(Args)]
struct EmbodimentArgs {
    /// Directory holding robot.txt, actions.json, task.txt (and optionally
    /// context.txt). Individual file flags override it.
    #[arg(long)]
    config_dir: Option<PathBuf>,
    #[arg(long)]
    robot_config: Option<PathBuf>,
    #[arg(long)]
    actions: Option<PathBuf>,
    #[arg(long)]
    task: Option<PathBuf>,
    /// Scenario TOML; defaults to scenario.toml in --config-dir.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

impl EmbodimentArgs {
    fn load(&self) -> Result<(EmbodimentConfig, String), AnyError> {
        let pick = |explicit: &Option<PathBuf>, name: &str, flag: &str| -> Result<PathBuf, AnyError> {
            explicit
                .clone()
                .or_else(|| self.config_dir.as_ref().map(|d| d.join(name)))
                .ok_or_else(|| format!("missing --{flag} (or --config-dir)").into())
        };
        let mut config = load_embodiment_config(
            pick(&self.robot_config, "robot.txt", "robot-config")?,
            pick(&self.actions, "actions.json", "actions")?,
            pick(&self.task, "task.txt", "task")?,
        )?;
        if let Some(ctx) = self.config_dir.as_ref().map(|d| d.join("context.txt")).filter(|p| p.exists()) {
            config = config.with_environment_context_file(ctx)?;
        }
        let scenario = fs::read_to_string(pick(&self.scenario, "scenario.toml", "scenario")?)?;
        Ok((config, scenario))
    }
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "scripted")]
    backend: BackendKind,
    /// Scripted rules JSON; defaults to rules.json in --config-dir.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Transcript to replay (with --backend replay).
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Record every model exchange to this JSONL transcript.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long, default_value = "https://api.openai.com/v1")]
    base_url: String,
    #[arg(long, default_value = "gpt-4.1-mini")]
    model: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = agentic_control::llm::DEFAULT_API_KEY_ENV)]
    api_key_env: String,
    /// Also route monitor calls through the backend instead of the
    /// symbolic oracle.
    #[arg(long)]
    model_monitors: bool,
    /// Also route memory curation through the backend instead of the
    /// deterministic curator.
    #[arg(long)]
    model_curator: bool,
}

impl BackendArgs {
    fn build(&self, config_dir: Option<&Path>) -> Result<Arc<dyn ChatBackend>, AnyError> {
        let backend: Arc<dyn ChatBackend> = match self.backend {
            BackendKind::Scripted => {
                let rules = self
                    .rules
                    .clone()
                    .or_else(|| config_dir.map(|d| d.join("rules.json")))
                    .ok_or("--backend scripted needs --rules")?;
                Arc::new(ScriptedBackend::from_path(rules)?)
            }
            BackendKind::Replay => {
                Arc::new(ReplayBackend::from_path(self.replay.as_ref().ok_or("--backend replay needs --replay")?)?)
            }
            BackendKind::Http => {
                let mut cfg = HttpConfig::new(&self.base_url, &self.model);
                cfg.api_key_env = self.api_key_env.clone();
                Arc::new(HttpBackend::new(cfg)?)
            }
        };
        Ok(match &self.record {
            Some(path) => record_session(path)?.wrap(backend),
            None => backend,
        })
    }

    fn backends(&self, config_dir: Option<&Path>) -> Result<Backends, AnyError> {
        let b = self.build(config_dir)?;
        Ok(Backends {
            controller: b.clone(),
            monitor: self.model_monitors.then(|| b.clone()),
            curator: self.model_curator.then_some(b),
        })
    }

    /// Replay queues and remote APIs are consumed in order; run those serially.
    fn serial(&self) -> bool {
        !matches!(self.backend, BackendKind::Scripted) || self.record.is_some()
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    embodiment: EmbodimentArgs,
    #[command(flatten)]
    backend: BackendArgs,
    /// Use the uniformly random baseline instead of the agent.
    #[arg(long)]
    random: bool,
    #[arg(long)]
    max_steps: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    embodiment: EmbodimentArgs,
    #[command(flatten)]
    backend: BackendArgs,
    /// Comma-separated conditions: `agent`, `random`.
    #[arg(long, default_value = "agent,random", value_delimiter = ',')]
    conditions: Vec<String>,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    /// Overrides the per-condition step cap (25 random, 60 agent).
    #[arg(long)]
    max_steps: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Welch's unequal-variance test instead of Student's.
    #[arg(long)]
    welch: bool,
}

#[derive(Args)]
struct BlackjackArgs {
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = blackjack::DEFAULT_TARGET)]
    target: i32,
    /// Comma-separated: curated, appended, no_memory, random.
    #[arg(long, default_value = "curated,appended,no_memory,random", value_delimiter = ',')]
    modes: Vec<String>,
    #[arg(long, default_value_t = blackjack::DEFAULT_LOG_BUDGET)]
    log_budget: usize,
    /// Let a model play (and curate) instead of the reference player.
    #[arg(long)]
    model_player: bool,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    embodiment: EmbodimentArgs,
}

#[derive(Args)]
struct StatsArgs {
    /// episodes.csv written by `experiment`.
    #[arg(long)]
    episodes_csv: PathBuf,
    #[arg(long)]
    min_steps: Option<u32>,
    #[arg(long)]
    welch: bool,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn t_kind(welch: bool) -> TTestKind {
    if welch {
        TTestKind::Welch
    } else {
        TTestKind::Pooled
    }
}

fn print_summary(s: &runner::ExperimentSummary) {
    if let Some(m) = s.min_steps {
        println!("min steps (oracle): {m}");
    }
    for c in &s.conditions {
        println!("{:<12} n={:<3} steps {}  success {:.0}%", c.condition, c.n, c.table_entry, 100.0 * c.success_rate);
    }
    for c in &s.comparisons {
        println!(
            "{} vs {}: t={:.3} df={:.1} p={:.3e} holm={:.3e}{}",
            c.a,
            c.b,
            c.t,
            c.df,
            c.p,
            c.adjusted_p,
            if c.degenerate { " (degenerate)" } else { "" }
        );
    }
}

fn cmd_run(a: RunArgs) -> Result<(), AnyError> {
    let (config, scenario) = a.embodiment.load()?;
    let mut adapter = scenario_from_str(&scenario)?;
    adapter.check_interface(&config.interface)?;
    let (policy, default_cap) = if a.random {
        (Policy::Random, RANDOM_STEP_CAP)
    } else {
        (Policy::Agent(a.backend.backends(a.embodiment.config_dir.as_deref())?), AGENT_STEP_CAP)
    };
    let opts = EpisodeOptions::new(a.max_steps.unwrap_or(default_cap), a.seed);
    let run = run_episode(&config, &mut *adapter, &policy, &opts);
    fs::create_dir_all(&a.out_dir)?;
    run.write_jsonl(a.out_dir.join("steps.jsonl"))?;
    let r = &run.result;
    println!("termination={} steps={} success={}", r.termination.name(), r.steps, r.success);
    if let Some(e) = &r.error {
        println!("error: {e}");
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<(), AnyError> {
    let (config, scenario) = a.embodiment.load()?;
    let mut conditions = Vec::new();
    for name in &a.conditions {
        let mut c = match name.as_str() {
            "random" => Condition::random(),
            "agent" => Condition::agent("agent", a.backend.backends(a.embodiment.config_dir.as_deref())?),
            other => return Err(format!("unknown condition `{other}`").into()),
        };
        if let Some(cap) = a.max_steps {
            c.step_cap = cap;
        }
        conditions.push(c);
    }
    let mut spec = ExperimentSpec::new(conditions, a.episodes, a.seed);
    spec.t_test = t_kind(a.welch);
    if a.backend.serial() {
        spec.parallelism = 1;
    }
    let out = run_experiment(&config, &scenario, &spec, Some(&a.out_dir))?;
    print_summary(&out.summary);
    Ok(())
}

fn cmd_blackjack(a: BlackjackArgs) -> Result<(), AnyError> {
    let cfg = ExperimentConfig { target: a.target, episodes: a.episodes, seed: a.seed, log_budget: a.log_budget };
    let player = if a.model_player { Some(a.backend.build(None)?) } else { None };
    let mut all = Vec::new();
    let mut runs = Vec::new();
    for name in &a.modes {
        let mode = MemoryMode::from_name(name).ok_or_else(|| format!("unknown mode `{name}`"))?;
        let scores = match &player {
            Some(p) => {
                let chat = ChatPlayer { player: &**p, curator: a.backend.model_curator.then_some(&**p) };
                let (scores, stats) = chat.run(mode, &cfg)?;
                if stats != Default::default() {
                    eprintln!("{}: {stats:?}", mode.name());
                }
                scores
            }
            None => blackjack::run_memory_experiment(mode, &cfg)?,
        };
        all.extend(scores.iter().cloned());
        runs.push((mode, scores));
    }
    fs::create_dir_all(&a.out_dir)?;
    blackjack::write_scores_csv(a.out_dir.join("blackjack.csv"), &all)?;
    blackjack::summarize(&mut std::io::stdout(), &runs)?;
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<(), AnyError> {
    let (config, _) = a.embodiment.load()?;
    let path = a
        .embodiment
        .scenario
        .clone()
        .or_else(|| a.embodiment.config_dir.as_ref().map(|d| d.join("scenario.toml")))
        .ok_or("missing --scenario")?;
    let world = load_scenario(path)?;
    world.check_interface(&config.interface)?;
    println!("{}", world.min_steps(&config.interface)?);
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Result<(), AnyError> {
    let rows = read_episodes_csv(&a.episodes_csv)?;
    let summary = runner::summarize(&rows, a.min_steps, t_kind(a.welch));
    write_outputs(&a.out_dir, &rows, &summary)?;
    print_summary(&summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Blackjack(a) => cmd_blackjack(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
