//! Embodiment-agnostic closed-loop robot control with language-model agents.
//!
//! A controller, per-camera monitors and a memory curator cooperate through
//! plain text. Robots are described by three files (robot description,
//! action interface, task), so moving to a new body means writing new files,
//! not new code. See the crate's `examples/` directory for one runnable
//! program per capability.

pub mod blackjack;
pub mod config;
pub mod controller;
pub mod llm;
pub mod memory;
pub mod monitor;
pub mod record;
pub mod runner;
pub mod sim;
pub mod stats;

pub use config::{load_embodiment_config, ActionDef, ActionInterface, EmbodimentConfig};
pub use controller::Controller;
pub use llm::{BackendConfig, ChatBackend, ChatMessage};
pub use memory::EnvironmentMemory;
pub use runner::{run_episode, run_experiment, Backends, Condition, EpisodeOptions, ExperimentSpec, Policy};
pub use sim::{load_scenario, RobotAdapter};
