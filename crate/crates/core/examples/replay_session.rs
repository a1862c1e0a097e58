//! Record a session's model traffic, then replay it offline and compare the
//! step logs byte for byte.

use std::path::Path;
use std::sync::Arc;

use agentic_control::llm::{record_session, ReplayBackend, ScriptedBackend};
use agentic_control::runner::{run_episode, Backends, EpisodeOptions, Policy, AGENT_STEP_CAP};
use agentic_control::{load_scenario, EmbodimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/rov");
    let config = EmbodimentConfig::load_dir(&dir)?;
    let work = tempfile::tempdir()?;
    let transcript = work.path().join("session.jsonl");
    let options = EpisodeOptions::new(AGENT_STEP_CAP, 7);

    let live = Arc::new(ScriptedBackend::from_path(dir.join("rules.json"))?);
    let recorder = record_session(&transcript)?.wrap(live);
    let mut robot = load_scenario(dir.join("scenario.toml"))?;
    let recorded = run_episode(&config, robot.as_mut(), &Policy::Agent(Backends::controller_only(recorder)), &options);
    recorded.write_jsonl(work.path().join("recorded.jsonl"))?;

    let replay = Arc::new(ReplayBackend::from_path(&transcript)?);
    let mut robot = load_scenario(dir.join("scenario.toml"))?;
    let replayed = run_episode(&config, robot.as_mut(), &Policy::Agent(Backends::controller_only(replay.clone())), &options);
    replayed.write_jsonl(work.path().join("replayed.jsonl"))?;

    let a = std::fs::read(work.path().join("recorded.jsonl"))?;
    let b = std::fs::read(work.path().join("replayed.jsonl"))?;
    println!("transcript: {} exchanges", std::fs::read_to_string(&transcript)?.lines().count());
    println!("recorded {} steps, replayed {} steps", recorded.result.steps, replayed.result.steps);
    println!("logs identical: {} ({} bytes); unused replies: {}", a == b, a.len(), replay.remaining());
    Ok(())
}
