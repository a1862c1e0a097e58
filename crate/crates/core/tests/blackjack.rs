//! The memory experiment against independent simulations.

use agentic_control::blackjack::{
    belief_update, blackjack_step, random_policy_value, run_memory_experiment, ExperimentConfig, MemoryMode, Move,
    BlackjackState, StepResult, TargetBelief, TARGET_MAX, TARGET_MIN,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Plays `n` episodes of coin-flip hit/stick with its own RNG and card model;
/// returns (mean, standard error).
fn monte_carlo_random(target: i32, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let mut total = 0;
        let reward = loop {
            if rng.gen::<f64>() < 0.5 {
                let reward = if total > target { -1.0 } else if total > target - 10 { 1.0 } else { 0.0 };
                break reward;
            }
            total += rng.gen_range(1..=13).min(10);
            if total > target {
                break -1.0;
            }
        };
        sum += reward;
        sum_sq += reward * reward;
    }
    let mean = sum / n as f64;
    let var = (sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

fn mean(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn exact_random_value_matches_monte_carlo() {
    for target in [21, 42, 77] {
        let (m, se) = monte_carlo_random(target, 100_000, target as u64);
        let exact = random_policy_value(target);
        assert!((m - exact).abs() <= 2.0 * se, "target {target}: MC {m} ± {se} vs exact {exact}");
    }
}

#[test]
fn random_mode_matches_monte_carlo() {
    let cfg = ExperimentConfig { seed: 7, ..ExperimentConfig::default() };
    let scores = run_memory_experiment(MemoryMode::Random, &cfg).unwrap();
    let (m, se) = mean(scores.iter().map(|s| s.score as f64));
    let (oracle, oracle_se) = monte_carlo_random(cfg.target, 100_000, 1);
    let sigma = (se * se + oracle_se * oracle_se).sqrt();
    assert!((m - oracle).abs() <= 2.0 * sigma, "{m} vs {oracle} (σ {sigma})");
}

#[test]
fn curated_memory_dominates_and_narrows_the_belief() {
    for seed in [0, 1, 2, 3, 4] {
        let cfg = ExperimentConfig { seed, ..ExperimentConfig::default() };
        let last = |mode| run_memory_experiment(mode, &cfg).unwrap().last().unwrap().cumulative_average;
        let curated = run_memory_experiment(MemoryMode::Curated, &cfg).unwrap();
        let final_avg = curated.last().unwrap().cumulative_average;
        assert!(final_avg > last(MemoryMode::NoMemory), "seed {seed}");
        assert!(final_avg > last(MemoryMode::Random), "seed {seed}");
        let first = &curated[0];
        assert_eq!(first.belief_high.unwrap() - first.belief_low.unwrap(), TARGET_MAX - TARGET_MIN);
        let end = curated.last().unwrap();
        assert!(end.belief_high.unwrap() - end.belief_low.unwrap() < 20, "seed {seed}");
        assert!((end.belief_low.unwrap()..=end.belief_high.unwrap()).contains(&cfg.target));
    }
}

#[test]
fn appended_log_never_beats_curation() {
    let cfg = ExperimentConfig { seed: 3, ..ExperimentConfig::default() };
    let appended = run_memory_experiment(MemoryMode::Appended, &cfg).unwrap();
    let curated = run_memory_experiment(MemoryMode::Curated, &cfg).unwrap();
    // The log keeps only what fits its budget, so it cannot beat rewriting.
    assert!(curated.last().unwrap().cumulative_average >= appended.last().unwrap().cumulative_average);
}

#[test]
fn modes_are_deterministic_per_seed() {
    for mode in MemoryMode::ALL {
        let cfg = ExperimentConfig { seed: 11, episodes: 80, ..ExperimentConfig::default() };
        assert_eq!(run_memory_experiment(mode, &cfg).unwrap(), run_memory_experiment(mode, &cfg).unwrap());
    }
}

proptest! {
    // With truthful outcomes, the belief always brackets the hidden target.
    #[test]
    fn belief_is_sound(target in TARGET_MIN..=TARGET_MAX, seed in any::<u64>(), episodes in 1usize..60) {
        let mut state = BlackjackState::new(target, seed).unwrap();
        let mut moves = ChaCha20Rng::seed_from_u64(seed ^ 0xA5);
        let mut belief = TargetBelief::default();
        for _ in 0..episodes {
            state.new_episode();
            let outcome = loop {
                let mv = if moves.gen_bool(0.7) { Move::Hit } else { Move::Stick };
                if let StepResult::Finished(o) = blackjack_step(&mut state, mv).unwrap() {
                    break o;
                }
            };
            belief = belief_update(belief, outcome.final_sum, outcome.busted).unwrap();
            prop_assert!(belief.low <= target && target <= belief.high);
            prop_assert!(blackjack_step(&mut state, Move::Hit).is_err());
        }
    }
}
