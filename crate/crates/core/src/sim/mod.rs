//! Hardware abstraction layer and simulated embodiments.
//!
//! The loop only talks to robots through [`RobotAdapter`]. Three discrete
//! simulated embodiments implement it:
//!
//! | adapter     | actions | cameras (enabled) |
//! |-------------|---------|-------------------|
//! | [`GridWorld`] | 4     | forward, left, right |
//! | [`LimbWorld`] | 9     | 4 of 6            |
//! | [`TankWorld`] | 6     | 1                 |
//!
//! Worlds are built from TOML scenario files via [`load_scenario`].

mod grid;
mod limb;
mod tank;

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::hash::Hash;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{GridCamera, GridWorld, Heading};
pub use limb::{Joint, LimbEntity, LimbRegion, LimbWorld};
pub use tank::TankWorld;

use crate::config::{ActionDef, ActionInterface, ProprioState};
use crate::monitor::CameraFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AckStatus {
    Ok,
    /// Movement prevented by an obstacle or workspace boundary.
    Blocked,
    /// Joint already at its range limit.
    Limit,
}

impl AckStatus {
    pub fn name(self) -> &'static str {
        match self {
            AckStatus::Ok => "ok",
            AckStatus::Blocked => "blocked",
            AckStatus::Limit => "limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub status: AckStatus,
    pub message: String,
}

impl Ack {
    pub fn ok(message: impl Into<String>) -> Self {
        Ack { status: AckStatus::Ok, message: message.into() }
    }

    pub fn blocked(message: impl Into<String>) -> Self {
        Ack { status: AckStatus::Blocked, message: message.into() }
    }

    pub fn limit(message: impl Into<String>) -> Self {
        Ack { status: AckStatus::Limit, message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("adapter `{adapter}` does not implement action `{action}`")]
    UnsupportedAction { adapter: &'static str, action: String },
    #[error("no success state is reachable")]
    Unreachable,
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Contract between the control loop and a robot.
pub trait RobotAdapter: Send {
    fn kind(&self) -> &'static str;

    /// Names of every action this adapter can execute.
    fn supported_actions(&self) -> &'static [&'static str];

    fn reset(&mut self, seed: u64);

    fn dispatch(&mut self, action: &ActionDef, params: &BTreeMap<String, f64>) -> Result<Ack, SimError>;

    /// One frame per enabled camera, in camera order.
    fn sense(&self, timestamp: u32) -> Vec<CameraFrame>;

    fn proprio(&self) -> ProprioState;

    fn success(&self) -> bool;

    fn enabled_cameras(&self) -> Vec<String>;

    /// Length of the shortest action sequence from the current state to success.
    fn min_steps(&self, interface: &ActionInterface) -> Result<u32, SimError>;

    /// Checks that every action in `interface` is executable here.
    fn check_interface(&self, interface: &ActionInterface) -> Result<(), SimError> {
        let supported = self.supported_actions();
        for a in &interface.actions {
            if !supported.contains(&a.name.as_str()) {
                return Err(SimError::UnsupportedAction { adapter: self.kind(), action: a.name.clone() });
            }
        }
        Ok(())
    }
}

/// A world whose full state is a small hashable value.
pub trait DiscreteWorld: RobotAdapter + Clone {
    type State: Clone + Eq + Hash;

    fn state(&self) -> Self::State;

    fn set_state(&mut self, state: &Self::State);
}

/// Breadth-first search over world states under `interface`'s actions.
pub fn min_steps_oracle<W: DiscreteWorld>(world: &W, interface: &ActionInterface) -> Result<u32, SimError> {
    if world.success() {
        return Ok(0);
    }
    let params = BTreeMap::new();
    let mut probe = world.clone();
    let start = world.state();
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0u32)]);
    while let Some((state, depth)) = queue.pop_front() {
        for action in &interface.actions {
            probe.set_state(&state);
            probe.dispatch(action, &params)?;
            let next = probe.state();
            if !seen.insert(next.clone()) {
                continue;
            }
            if probe.success() {
                return Ok(depth + 1);
            }
            queue.push_back((next, depth + 1));
        }
    }
    Err(SimError::Unreachable)
}

/// Uniform choice over the admissible actions.
pub fn random_policy_step<'a, R: Rng + ?Sized>(interface: &'a ActionInterface, rng: &mut R) -> &'a ActionDef {
    &interface.actions[rng.gen_range(0..interface.actions.len())]
}

type Builder = fn(&toml::Table) -> Result<Box<dyn RobotAdapter>, SimError>;

/// Scenario `kind` to adapter constructor.
pub const ADAPTERS: &[(&str, Builder)] = &[
    ("gridworld", |t| Ok(Box::new(GridWorld::from_table(t)?))),
    ("limb", |t| Ok(Box::new(LimbWorld::from_table(t)?))),
    ("tank", |t| Ok(Box::new(TankWorld::from_table(t)?))),
];

pub fn scenario_from_str(source: &str) -> Result<Box<dyn RobotAdapter>, SimError> {
    let table: toml::Table = source.parse().map_err(|e: toml::de::Error| SimError::Scenario(e.to_string()))?;
    let kind = table
        .get("kind")
        .and_then(toml::Value::as_str)
        .ok_or_else(|| SimError::Scenario("missing `kind`".into()))?;
    let (_, build) = ADAPTERS
        .iter()
        .find(|(k, _)| *k == kind)
        .ok_or_else(|| SimError::Scenario(format!("unknown kind `{kind}`")))?;
    build(&table)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Box<dyn RobotAdapter>, SimError> {
    scenario_from_str(&std::fs::read_to_string(path)?)
}

/// Deserializes a scenario table into a typed spec.
fn parse_spec<T: serde::de::DeserializeOwned>(table: &toml::Table) -> Result<T, SimError> {
    let mut t = table.clone();
    t.remove("kind");
    toml::Value::Table(t)
        .try_into()
        .map_err(|e: toml::de::Error| SimError::Scenario(e.to_string()))
}

fn unsupported(adapter: &'static str, action: &str) -> SimError {
    SimError::UnsupportedAction { adapter, action: action.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn iface(n: usize) -> ActionInterface {
        ActionInterface {
            actions: (0..n)
                .map(|i| ActionDef { name: format!("a{i}"), description: "x".into(), parameters: vec![], motion: None })
                .collect(),
        }
    }

    #[test]
    fn random_policy_is_seeded() {
        let i = iface(4);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| random_policy_step(&i, &mut rng).name.clone()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn random_policy_is_uniform() {
        let i = iface(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 4];
        let n = 10_000;
        for _ in 0..n {
            let a = random_policy_step(&i, &mut rng);
            counts[a.name[1..].parse::<usize>().unwrap()] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.25).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn singleton_interface() {
        let i = iface(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..50).all(|_| random_policy_step(&i, &mut rng).name == "a0"));
    }

    #[test]
    fn unknown_scenario_kind() {
        assert!(matches!(scenario_from_str("kind = \"boat\""), Err(SimError::Scenario(_))));
        assert!(matches!(scenario_from_str("x = 1"), Err(SimError::Scenario(_))));
    }
}
