//! The memory-regime experiment on blackjack with a hidden target.
//!
//! ```text
//! cargo run --example blackjack_memory -- 42 200
//! ```

use agentic_control::blackjack::{random_policy_value, run_memory_experiment, summarize, ExperimentConfig, MemoryMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let target = args.next().map_or(Ok(42), |s| s.parse())?;
    let episodes = args.next().map_or(Ok(200), |s| s.parse())?;
    let config = ExperimentConfig { target, episodes, ..ExperimentConfig::default() };

    let mut runs = Vec::new();
    for mode in MemoryMode::ALL {
        runs.push((mode, run_memory_experiment(mode, &config)?));
    }
    summarize(&mut std::io::stdout(), &runs)?;

    let curated = &runs[0].1;
    for e in curated.iter().filter(|e| [1, 2, 5, 10, 20].contains(&e.episode)) {
        println!(
            "episode {:>3}: belief [{}, {}], {} at {}",
            e.episode,
            e.belief_low.unwrap_or_default(),
            e.belief_high.unwrap_or_default(),
            if e.busted { "bust" } else { "stick" },
            e.final_sum
        );
    }
    println!("expected reward of coin-flip play: {:.4}", random_policy_value(target));
    Ok(())
}
