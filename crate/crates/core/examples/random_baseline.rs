//! Agent versus uniformly random actions in the warehouse, with the
//! summary statistics and a pooled t-test.
//!
//! ```text
//! cargo run --example random_baseline -- 20
//! ```

use std::path::Path;
use std::sync::Arc;

use agentic_control::llm::ScriptedBackend;
use agentic_control::runner::{run_experiment, Backends, Condition, ExperimentSpec};
use agentic_control::EmbodimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes: usize = std::env::args().nth(1).map_or(Ok(10), |s| s.parse())?;
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/dingo");
    let config = EmbodimentConfig::load_dir(&dir)?;
    let scenario = std::fs::read_to_string(dir.join("scenario.toml"))?;
    let controller = Arc::new(ScriptedBackend::from_path(dir.join("rules.json"))?);

    let spec = ExperimentSpec::new(
        vec![Condition::agent("agent", Backends::controller_only(controller)), Condition::random()],
        episodes,
        1000,
    );
    let out = run_experiment(&config, &scenario, &spec, None)?;
    println!("shortest path: {:?} steps", out.summary.min_steps);
    for c in &out.summary.conditions {
        println!("{:<8} {}  success {:.0}%", c.condition, c.table_entry, 100.0 * c.success_rate);
    }
    for cmp in &out.summary.comparisons {
        let note = if cmp.degenerate { " (both samples constant)" } else { "" };
        println!("{} vs {}: t = {:.2}, Holm-adjusted p = {:.3e}{note}", cmp.a, cmp.b, cmp.t, cmp.adjusted_p);
    }
    Ok(())
}
