//! Blackjack with a hidden target: a small testbed for memory across episodes.
//!
//! The usual 21 is replaced by an unknown target `X ∈ [12, 100]`. There is no
//! dealer: sticking with a sum in `(X − 10, X]` scores +1, sticking lower
//! scores 0 and going over `X` scores −1. The player never sees `X`, only
//! outcomes, so doing well requires carrying what earlier episodes revealed
//! into later ones. Four memory regimes are compared:
//!
//! * `curated`: a compact belief `[low, high]` rewritten after every episode;
//! * `appended`: raw outcome lines concatenated into a bounded log that keeps
//!   the oldest lines and drops new ones once full;
//! * `no_memory`: every episode starts from scratch;
//! * `random`: hit or stick with equal probability.
//!
//! Cards are ranks 1..=13 drawn with replacement and worth `min(rank, 10)`;
//! aces always count 1.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{self, ChatBackend, ChatMessage};

pub const TARGET_MIN: i32 = 12;
pub const TARGET_MAX: i32 = 100;
/// Width of the winning band below the target.
pub const WIN_BAND: i32 = 10;
pub const DEFAULT_TARGET: i32 = 42;
/// Default character budget of the appended log.
pub const DEFAULT_LOG_BUDGET: usize = 240;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BlackjackError {
    #[error("the episode is already finished")]
    ActionOnFinishedEpisode,
    #[error("outcomes are inconsistent: low {low} > high {high}")]
    InconsistentOutcome { low: i32, high: i32 },
    #[error("target {0} outside [12, 100]")]
    InvalidTarget(i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Move {
    Hit,
    Stick,
}

impl Move {
    pub fn name(self) -> &'static str {
        match self {
            Move::Hit => "hit",
            Move::Stick => "stick",
        }
    }
}

/// How a finished episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub final_sum: i32,
    pub busted: bool,
    pub reward: i32,
}

impl Outcome {
    /// Outcome report for the player. Never mentions the target.
    pub fn text(&self) -> String {
        if self.busted {
            format!("Busted at {} (score -1).", self.final_sum)
        } else {
            let score = if self.reward > 0 { "+1" } else { "0" };
            format!("Stuck at {} without busting (score {score}).", self.final_sum)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepResult {
    /// A card was drawn and the episode continues.
    Drew { card: i32, sum: i32 },
    Finished(Outcome),
}

pub fn card_value(rank: i32) -> i32 {
    rank.min(10)
}

#[derive(Debug, Clone)]
pub struct BlackjackState {
    target: i32,
    pub player_sum: i32,
    pub episode_done: bool,
    rng: ChaCha8Rng,
}

impl BlackjackState {
    pub fn new(target: i32, seed: u64) -> Result<Self, BlackjackError> {
        if !(TARGET_MIN..=TARGET_MAX).contains(&target) {
            return Err(BlackjackError::InvalidTarget(target));
        }
        Ok(BlackjackState { target, player_sum: 0, episode_done: false, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    /// Starts a new episode against the same hidden target.
    pub fn new_episode(&mut self) {
        self.player_sum = 0;
        self.episode_done = false;
    }

    /// Only for oracles and tests; players must not look.
    pub fn hidden_target(&self) -> i32 {
        self.target
    }

    pub fn draw(&mut self) -> i32 {
        card_value(self.rng.gen_range(1..=13))
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Text rendering of the visible game state.
    pub fn render(&self) -> String {
        format!("Your current sum is {}. Choose hit or stick.", self.player_sum)
    }
}

/// Reward for sticking at `sum` against `target`.
pub fn stick_reward(target: i32, sum: i32) -> i32 {
    if sum > target {
        -1
    } else if sum > target - WIN_BAND {
        1
    } else {
        0
    }
}

pub fn blackjack_step(state: &mut BlackjackState, mv: Move) -> Result<StepResult, BlackjackError> {
    if state.episode_done {
        return Err(BlackjackError::ActionOnFinishedEpisode);
    }
    match mv {
        Move::Hit => {
            let card = state.draw();
            Ok(apply_card(state, card))
        }
        Move::Stick => {
            state.episode_done = true;
            let sum = state.player_sum;
            Ok(StepResult::Finished(Outcome { final_sum: sum, busted: false, reward: stick_reward(state.target, sum) }))
        }
    }
}

/// Adds a known card; the deterministic half of a hit.
pub fn apply_card(state: &mut BlackjackState, card: i32) -> StepResult {
    state.player_sum += card;
    if state.player_sum > state.target {
        state.episode_done = true;
        StepResult::Finished(Outcome { final_sum: state.player_sum, busted: true, reward: -1 })
    } else {
        StepResult::Drew { card, sum: state.player_sum }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetBelief {
    pub low: i32,
    pub high: i32,
}

impl Default for TargetBelief {
    fn default() -> Self {
        TargetBelief { low: TARGET_MIN, high: TARGET_MAX }
    }
}

impl TargetBelief {
    pub fn width(&self) -> i32 {
        self.high - self.low
    }
}

impl fmt::Display for TargetBelief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.low, self.high)
    }
}

/// Narrows the belief with one outcome: a bust at `s` means `X < s`, a clean
/// stick at `s` means `X ≥ s`.
pub fn belief_update(belief: TargetBelief, final_sum: i32, busted: bool) -> Result<TargetBelief, BlackjackError> {
    let mut next = belief;
    if busted {
        next.high = next.high.min(final_sum - 1);
    } else {
        next.low = next.low.max(final_sum);
    }
    if next.low > next.high {
        return Err(BlackjackError::InconsistentOutcome { low: next.low, high: next.high });
    }
    Ok(next)
}

/// Deterministic stand-in player: hit while the sum is at most `high − 10`.
///
/// Sticking above `high − 10` is inside the win band for every target the
/// belief still allows, so a clean stick always scores; a bust lowers `high`.
/// Once the belief has collapsed onto the target the player never busts.
pub fn reference_strategy(belief: TargetBelief, player_sum: i32) -> Move {
    if player_sum <= belief.high - WIN_BAND {
        Move::Hit
    } else {
        Move::Stick
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryMode {
    Curated,
    Appended,
    NoMemory,
    Random,
}

impl MemoryMode {
    pub const ALL: [MemoryMode; 4] = [MemoryMode::Curated, MemoryMode::Appended, MemoryMode::NoMemory, MemoryMode::Random];

    pub fn name(self) -> &'static str {
        match self {
            MemoryMode::Curated => "curated",
            MemoryMode::Appended => "appended",
            MemoryMode::NoMemory => "no_memory",
            MemoryMode::Random => "random",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub target: i32,
    pub episodes: usize,
    pub seed: u64,
    pub log_budget: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { target: DEFAULT_TARGET, episodes: 200, seed: 0, log_budget: DEFAULT_LOG_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeScore {
    pub episode: usize,
    pub mode: MemoryMode,
    pub score: i32,
    pub cumulative_average: f64,
    pub final_sum: i32,
    pub busted: bool,
    /// Belief the player started the episode with, when it keeps one.
    pub belief_low: Option<i32>,
    pub belief_high: Option<i32>,
}

/// Bounded raw log: lines that would overflow the budget are dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AppendedLog {
    lines: Vec<String>,
    budget: usize,
    used: usize,
}

impl AppendedLog {
    pub fn new(budget: usize) -> Self {
        AppendedLog { lines: Vec::new(), budget, used: 0 }
    }

    /// Returns whether the line was kept.
    pub fn push(&mut self, line: String) -> bool {
        let cost = line.len() + 1;
        if self.used + cost > self.budget {
            return false;
        }
        self.used += cost;
        self.lines.push(line);
        true
    }

    pub fn text(&self) -> String {
        self.lines.join("\n")
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

static OUTCOME_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(Busted|Stuck) at (\d+)").expect("valid regex"));

/// Belief implied by whatever outcome lines `text` contains.
pub fn belief_from_log(text: &str) -> Result<TargetBelief, BlackjackError> {
    OUTCOME_LINE.captures_iter(text).try_fold(TargetBelief::default(), |b, c| {
        let sum: i32 = c[2].parse().expect("digits");
        belief_update(b, sum, &c[1] == "Busted")
    })
}

/// Renders the curated memory for the player.
pub fn curated_memory_text(belief: TargetBelief, last: Option<&Outcome>) -> String {
    let mut s = format!("Target estimate: between {} and {}.", belief.low, belief.high);
    if let Some(o) = last {
        s.push_str(&format!(" Last episode: {}", o.text()));
    }
    s
}

static BELIEF_TEXT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"between (\d+) and (\d+)").expect("valid regex"));

pub fn parse_curated_memory(text: &str) -> Option<TargetBelief> {
    let c = BELIEF_TEXT.captures(text)?;
    let (low, high) = (c[1].parse().ok()?, c[2].parse().ok()?);
    (TARGET_MIN <= low && low <= high && high <= TARGET_MAX).then_some(TargetBelief { low, high })
}

fn play_episode(
    state: &mut BlackjackState,
    mut choose: impl FnMut(&mut BlackjackState) -> Move,
) -> Result<Outcome, BlackjackError> {
    state.new_episode();
    loop {
        let mv = choose(state);
        if let StepResult::Finished(o) = blackjack_step(state, mv)? {
            return Ok(o);
        }
    }
}

/// Runs one memory regime with the reference player.
pub fn run_memory_experiment(mode: MemoryMode, config: &ExperimentConfig) -> Result<Vec<EpisodeScore>, BlackjackError> {
    let mut state = BlackjackState::new(config.target, config.seed)?;
    let mut memory = curated_memory_text(TargetBelief::default(), None);
    let mut log = AppendedLog::new(config.log_budget);
    let mut scores = Vec::with_capacity(config.episodes);
    let mut total = 0i64;
    for episode in 1..=config.episodes {
        let belief = match mode {
            MemoryMode::Curated => Some(parse_curated_memory(&memory).unwrap_or_default()),
            MemoryMode::Appended => Some(belief_from_log(&log.text())?),
            MemoryMode::NoMemory => Some(TargetBelief::default()),
            MemoryMode::Random => None,
        };
        let outcome = match belief {
            Some(b) => play_episode(&mut state, |s| reference_strategy(b, s.player_sum))?,
            None => play_episode(&mut state, |s| if s.rng().gen_bool(0.5) { Move::Hit } else { Move::Stick })?,
        };
        match mode {
            MemoryMode::Curated => {
                let b = belief_update(belief.unwrap_or_default(), outcome.final_sum, outcome.busted)?;
                memory = curated_memory_text(b, Some(&outcome));
            }
            MemoryMode::Appended => {
                log.push(format!("Episode {episode}: {}", outcome.text()));
            }
            _ => {}
        }
        total += outcome.reward as i64;
        scores.push(EpisodeScore {
            episode,
            mode,
            score: outcome.reward,
            cumulative_average: total as f64 / episode as f64,
            final_sum: outcome.final_sum,
            busted: outcome.busted,
            belief_low: belief.map(|b| b.low),
            belief_high: belief.map(|b| b.high),
        });
    }
    Ok(scores)
}

static ACTION_REPLY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)ACTION:\s*(hit|stick)\b").expect("valid regex"));

const PLAYER_SYSTEM: &str = "You are playing a modified blackjack game. There is no dealer. \
The target sum is a hidden integer between 12 and 100. Hitting draws a card worth 1 to 10. \
Going over the target scores -1; sticking within 10 below the target (inclusive of the target) scores +1; \
sticking lower scores 0. Use your memory of previous episodes. Reply with one line: ACTION: hit or ACTION: stick.";

const CURATOR_SYSTEM: &str = "You maintain the memory of a blackjack player across episodes. \
Rewrite the memory to include what the latest outcome reveals about the hidden target. \
Keep it short and state the current estimate as 'between L and H'. Reply with the new memory only.";

/// Chat-model player: a backend chooses moves; in curated mode a second
/// backend (or the same one) rewrites the memory between episodes.
pub struct ChatPlayer<'a> {
    pub player: &'a dyn ChatBackend,
    pub curator: Option<&'a dyn ChatBackend>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChatPlayStats {
    /// Replies without a parsable move; treated as stick.
    pub unparsed_moves: usize,
    /// Curator replies without a usable estimate; replaced by the reference update.
    pub curator_fallbacks: usize,
}

impl ChatPlayer<'_> {
    fn choose(&self, memory: &str, state: &BlackjackState, stats: &mut ChatPlayStats) -> Result<Move, BlackjackError> {
        let user = format!("Memory:\n{}\n\n{}", if memory.is_empty() { "(empty)" } else { memory }, state.render());
        let messages = [ChatMessage::system(PLAYER_SYSTEM), ChatMessage::user(user)];
        let reply = llm::complete(&messages, self.player).map(|e| e.response_text).unwrap_or_default();
        Ok(match ACTION_REPLY.captures(&reply) {
            Some(c) if c[1].eq_ignore_ascii_case("hit") => Move::Hit,
            Some(_) => Move::Stick,
            None => {
                stats.unparsed_moves += 1;
                Move::Stick
            }
        })
    }

    fn curate(&self, memory: &str, outcome: &Outcome, stats: &mut ChatPlayStats) -> String {
        let reference = || {
            let b = parse_curated_memory(memory).unwrap_or_default();
            let b = belief_update(b, outcome.final_sum, outcome.busted).unwrap_or(b);
            curated_memory_text(b, Some(outcome))
        };
        let Some(curator) = self.curator else { return reference() };
        let messages = [
            ChatMessage::system(CURATOR_SYSTEM),
            ChatMessage::user(format!("Memory:\n{memory}\n\nLatest outcome: {}", outcome.text())),
        ];
        match llm::complete(&messages, curator) {
            Ok(e) if parse_curated_memory(&e.response_text).is_some() => e.response_text.trim().to_string(),
            _ => {
                stats.curator_fallbacks += 1;
                reference()
            }
        }
    }

    /// Same protocol as [`run_memory_experiment`] with model decisions.
    /// `random` mode ignores the backends.
    pub fn run(&self, mode: MemoryMode, config: &ExperimentConfig) -> Result<(Vec<EpisodeScore>, ChatPlayStats), BlackjackError> {
        if mode == MemoryMode::Random {
            return Ok((run_memory_experiment(mode, config)?, ChatPlayStats::default()));
        }
        let mut state = BlackjackState::new(config.target, config.seed)?;
        let mut stats = ChatPlayStats::default();
        let mut memory = match mode {
            MemoryMode::Curated => curated_memory_text(TargetBelief::default(), None),
            _ => String::new(),
        };
        let mut log = AppendedLog::new(config.log_budget);
        let mut scores = Vec::new();
        let mut total = 0i64;
        for episode in 1..=config.episodes {
            let shown = match mode {
                MemoryMode::Appended => log.text(),
                MemoryMode::NoMemory => String::new(),
                _ => memory.clone(),
            };
            state.new_episode();
            let outcome = loop {
                let mv = self.choose(&shown, &state, &mut stats)?;
                if let StepResult::Finished(o) = blackjack_step(&mut state, mv)? {
                    break o;
                }
            };
            match mode {
                MemoryMode::Curated => memory = self.curate(&memory, &outcome, &mut stats),
                MemoryMode::Appended => {
                    log.push(format!("Episode {episode}: {}", outcome.text()));
                }
                _ => {}
            }
            total += outcome.reward as i64;
            let belief = parse_curated_memory(&shown);
            scores.push(EpisodeScore {
                episode,
                mode,
                score: outcome.reward,
                cumulative_average: total as f64 / episode as f64,
                final_sum: outcome.final_sum,
                busted: outcome.busted,
                belief_low: belief.map(|b| b.low),
                belief_high: belief.map(|b| b.high),
            });
        }
        Ok((scores, stats))
    }
}

/// Writes `episode,mode,score,cumulative_average,...` rows.
pub fn write_scores_csv(path: impl AsRef<Path>, scores: &[EpisodeScore]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["episode", "mode", "score", "cumulative_average", "final_sum", "busted", "belief_low", "belief_high"])?;
    for s in scores {
        w.write_record([
            s.episode.to_string(),
            s.mode.name().to_string(),
            s.score.to_string(),
            format!("{:.6}", s.cumulative_average),
            s.final_sum.to_string(),
            s.busted.to_string(),
            s.belief_low.map(|v| v.to_string()).unwrap_or_default(),
            s.belief_high.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean reward of a policy that hits or sticks with probability ½, computed
/// exactly by recursion over the sum.
pub fn random_policy_value(target: i32) -> f64 {
    let n = target as usize;
    let mut v = vec![0.0; n + 1];
    for s in (0..=n).rev() {
        let stick = stick_reward(target, s as i32) as f64;
        let hit: f64 = (1..=13)
            .map(|rank| {
                let next = s + card_value(rank) as usize;
                if next > n {
                    -1.0
                } else {
                    v[next]
                }
            })
            .sum::<f64>()
            / 13.0;
        v[s] = 0.5 * stick + 0.5 * hit;
    }
    v[0]
}

/// Prints a short summary table of final cumulative averages.
pub fn summarize(out: &mut impl Write, runs: &[(MemoryMode, Vec<EpisodeScore>)]) -> std::io::Result<()> {
    writeln!(out, "{:<10} {:>8} {:>12}", "mode", "episodes", "cum. avg")?;
    for (mode, scores) in runs {
        let last = scores.last().map(|s| s.cumulative_average).unwrap_or(0.0);
        writeln!(out, "{:<10} {:>8} {:>12.4}", mode.name(), scores.len(), last)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedBackend;

    fn state(target: i32, sum: i32) -> BlackjackState {
        let mut s = BlackjackState::new(target, 0).unwrap();
        s.player_sum = sum;
        s
    }

    #[test]
    fn step_examples() {
        let mut s = state(42, 40);
        assert_eq!(apply_card(&mut s, 5), StepResult::Finished(Outcome { final_sum: 45, busted: true, reward: -1 }));
        let mut s = state(42, 38);
        assert!(matches!(blackjack_step(&mut s, Move::Stick), Ok(StepResult::Finished(Outcome { reward: 1, .. }))));
        let mut s = state(42, 20);
        assert!(matches!(blackjack_step(&mut s, Move::Stick), Ok(StepResult::Finished(Outcome { reward: 0, .. }))));
        assert_eq!(blackjack_step(&mut s, Move::Hit), Err(BlackjackError::ActionOnFinishedEpisode));
    }

    #[test]
    fn outcome_text_hides_target() {
        for o in [
            Outcome { final_sum: 45, busted: true, reward: -1 },
            Outcome { final_sum: 38, busted: false, reward: 1 },
        ] {
            assert!(!o.text().contains("42"));
        }
    }

    #[test]
    fn belief_examples() {
        let b = belief_update(TargetBelief::default(), 45, true).unwrap();
        assert_eq!(b, TargetBelief { low: 12, high: 44 });
        assert_eq!(belief_update(b, 40, false).unwrap(), TargetBelief { low: 40, high: 44 });
        let b = belief_update(TargetBelief::default(), 30, true).unwrap();
        assert!(matches!(belief_update(b, 35, false), Err(BlackjackError::InconsistentOutcome { .. })));
    }

    #[test]
    fn strategy_examples() {
        let b = TargetBelief { low: 40, high: 44 };
        assert_eq!(reference_strategy(b, 28), Move::Hit);
        assert_eq!(reference_strategy(b, 35), Move::Stick);
        assert_eq!(reference_strategy(TargetBelief::default(), 1), Move::Hit);
    }

    #[test]
    fn invalid_target_rejected() {
        assert!(BlackjackState::new(11, 0).is_err());
        assert!(BlackjackState::new(101, 0).is_err());
    }

    #[test]
    fn curated_memory_round_trips() {
        let b = TargetBelief { low: 31, high: 47 };
        let o = Outcome { final_sum: 48, busted: true, reward: -1 };
        assert_eq!(parse_curated_memory(&curated_memory_text(b, Some(&o))), Some(b));
    }

    #[test]
    fn appended_log_keeps_oldest() {
        let mut log = AppendedLog::new(30);
        assert!(log.push("Episode 1: Busted at 50.".into()));
        assert!(!log.push("Episode 2: Stuck at 40.".into()));
        assert_eq!(log.len(), 1);
        assert_eq!(belief_from_log(&log.text()).unwrap(), TargetBelief { low: 12, high: 49 });
    }

    #[test]
    fn no_memory_always_starts_wide() {
        let cfg = ExperimentConfig { episodes: 30, ..Default::default() };
        let scores = run_memory_experiment(MemoryMode::NoMemory, &cfg).unwrap();
        assert!(scores.iter().all(|s| s.belief_low == Some(12) && s.belief_high == Some(100)));
    }

    #[test]
    fn curated_belief_narrows() {
        for seed in 0..5 {
            let cfg = ExperimentConfig { seed, ..Default::default() };
            let scores = run_memory_experiment(MemoryMode::Curated, &cfg).unwrap();
            let widths: Vec<i32> = scores.iter().map(|s| s.belief_high.unwrap() - s.belief_low.unwrap()).collect();
            assert!(widths.windows(2).all(|w| w[1] <= w[0]));
            assert!(*widths.last().unwrap() < 88);
        }
    }

    #[test]
    fn chat_player_follows_backend() {
        let player = ScriptedBackend::from_pairs(
            "bj",
            &[(r"sum is ([0-9]|[12][0-9]|3[0-5])\.", "ACTION: hit"), ("(?s).*", "ACTION: stick")],
        )
        .unwrap();
        let cfg = ExperimentConfig { episodes: 20, ..Default::default() };
        let (scores, stats) = ChatPlayer { player: &player, curator: None }.run(MemoryMode::Curated, &cfg).unwrap();
        assert_eq!(stats.unparsed_moves, 0);
        assert!(scores.iter().all(|s| s.busted || s.final_sum >= 36));
    }

    #[test]
    fn chat_curator_falls_back_on_garbage() {
        let player = ScriptedBackend::from_pairs("p", &[("(?s).*", "ACTION: stick")]).unwrap();
        let curator = ScriptedBackend::from_pairs("c", &[("(?s).*", "no idea")]).unwrap();
        let cfg = ExperimentConfig { episodes: 3, ..Default::default() };
        let (_, stats) =
            ChatPlayer { player: &player, curator: Some(&curator) }.run(MemoryMode::Curated, &cfg).unwrap();
        assert_eq!(stats.curator_fallbacks, 3);
    }
}
