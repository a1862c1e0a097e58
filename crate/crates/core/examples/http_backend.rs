//! Drive the controller through an OpenAI-compatible endpoint.
//!
//! Without arguments a local stub server answers with the shipped scripted
//! rules, so the example runs offline. With a base URL and model it talks to
//! a real endpoint, reading the key from `OPENAI_API_KEY`:
//!
//! ```text
//! cargo run --example http_backend
//! cargo run --example http_backend -- https://api.openai.com/v1 gpt-4.1-mini
//! ```

use std::path::Path;
use std::sync::Arc;

use agentic_control::llm::stub::StubServer;
use agentic_control::llm::{ChatBackend, ChatMessage, HttpBackend, HttpConfig, ScriptedBackend};
use agentic_control::runner::{run_episode, Backends, EpisodeOptions, Policy, AGENT_STEP_CAP};
use agentic_control::{load_scenario, EmbodimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/limb");
    let config = EmbodimentConfig::load_dir(&dir)?;
    let mut args = std::env::args().skip(1);

    let (stub, http) = match (args.next(), args.next()) {
        (Some(url), Some(model)) => (None, HttpConfig::new(url, model)),
        _ => {
            let rules = ScriptedBackend::from_path(dir.join("rules.json"))?;
            let stub = StubServer::start_with(move |body| {
                let text = body["messages"].as_array().and_then(|m| m.last()).and_then(|m| m["content"].as_str());
                let msgs = [ChatMessage::system("stub"), ChatMessage::user(text.unwrap_or_default())];
                rules.complete(&msgs).unwrap_or_default()
            })?;
            stub.fail_next(1); // exercise the retry path once
            let url = stub.base_url();
            println!("stub server at {url}");
            (Some(stub), HttpConfig { backoff_ms: 50, ..HttpConfig::new(url, "stub") })
        }
    };

    let backend = Arc::new(HttpBackend::new(http)?);
    let mut robot = load_scenario(dir.join("scenario.toml"))?;
    let run = run_episode(&config, robot.as_mut(), &Policy::Agent(Backends::controller_only(backend)), &EpisodeOptions::new(AGENT_STEP_CAP, 0));
    for s in &run.steps {
        let d = s.decision.as_ref().map_or("-", |d| d.action.as_str());
        println!("step {}: {:?} -> {d}", s.step, s.query.as_deref().unwrap_or("-"));
    }
    println!("{} after {} steps", run.result.termination.name(), run.result.steps);
    if let Some(stub) = &stub {
        println!("stub accepted {} well-formed requests", stub.received().len());
    }
    Ok(())
}
