//! One runner, three robots: only the config directory changes.
//!
//! ```text
//! cargo run --example cross_embodiment
//! ```

use std::path::Path;
use std::sync::Arc;

use agentic_control::llm::ScriptedBackend;
use agentic_control::runner::{run_episode, Backends, EpisodeOptions, Policy, AGENT_STEP_CAP};
use agentic_control::{load_scenario, EmbodimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["dingo", "limb", "rov"] {
        let dir = configs.join(name);
        let config = EmbodimentConfig::load_dir(&dir)?;
        let mut robot = load_scenario(dir.join("scenario.toml"))?;
        let min = robot.min_steps(&config.interface)?;
        let controller = Arc::new(ScriptedBackend::from_path(dir.join("rules.json"))?);
        let policy = Policy::Agent(Backends::controller_only(controller));
        let run = run_episode(&config, robot.as_mut(), &policy, &EpisodeOptions::new(AGENT_STEP_CAP, 0));
        println!(
            "{name:<6} {} actions, {} cameras: {} in {} steps (shortest possible {min})",
            config.interface.len(),
            robot.enabled_cameras().len(),
            run.result.termination.name(),
            run.result.steps,
        );
        if let Some(last) = run.steps.last() {
            let d = last.decision.as_ref().map_or("-", |d| d.action.as_str());
            println!("       last query {:?} -> {d}", last.query.as_deref().unwrap_or("-"));
        }
    }
    Ok(())
}
