#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use agentic_control::config::EmbodimentConfig;
use agentic_control::llm::{ChatBackend, ScriptedBackend};
use agentic_control::runner::{Backends, Policy};

pub const EMBODIMENTS: [&str; 3] = ["dingo", "limb", "rov"];

pub fn config_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn config(name: &str) -> EmbodimentConfig {
    EmbodimentConfig::load_dir(config_dir(name)).expect("shipped config loads")
}

pub fn scenario(name: &str) -> String {
    std::fs::read_to_string(config_dir(name).join("scenario.toml")).expect("shipped scenario")
}

pub fn scripted(name: &str) -> Arc<dyn ChatBackend> {
    Arc::new(ScriptedBackend::from_path(config_dir(name).join("rules.json")).expect("shipped rules"))
}

pub fn scripted_agent(name: &str) -> Policy {
    Policy::Agent(Backends::controller_only(scripted(name)))
}

use agentic_control::config::{CameraSpec, ProprioState};
use agentic_control::memory::{Bearing, MotionEvent, MotionKind};
use agentic_control::monitor::MonitorObservation;
use agentic_control::record::{DecisionRecord, StepRecord};
use agentic_control::sim::Ack;
use rand::Rng;

const LABELS: [&str; 12] = [
    "fire extinguisher",
    "pallet stack",
    "forklift",
    "loading door",
    "ladder",
    "red hose",
    "storage shelf",
    "workbench",
    "green box",
    "cable drum",
    "traffic cone",
    "screwdriver",
];
const ACTIONS: [&str; 6] = ["forward", "backward", "rotate_left", "rotate_right", "move_left", "move_right"];

/// A plausible but random control step, for exercising the curator.
pub fn synthetic_record<R: Rng>(rng: &mut R, step: u32) -> StepRecord {
    let cameras = vec![
        CameraSpec { id: "front".into(), facing: Bearing::FRONT },
        CameraSpec { id: "left".into(), facing: Bearing::LEFT },
        CameraSpec { id: "right".into(), facing: Bearing::RIGHT },
    ];
    let mut rec = StepRecord::new(step, cameras.clone());
    rec.query = Some(format!("Is the {} visible?", LABELS[rng.gen_range(0..LABELS.len())]));
    for cam in &cameras {
        if rng.gen_bool(0.3) {
            continue;
        }
        let mut parts = Vec::new();
        for k in 0..rng.gen_range(0..4) {
            let label = LABELS[rng.gen_range(0..LABELS.len())];
            let side = ["left", "center", "right"][rng.gen_range(0..3)];
            let size = ["small", "medium", "large"][rng.gen_range(0..3)];
            let lead = if k == 0 { "Yes" } else { "Also" };
            parts.push(format!("{lead}: {label} visible, {side} of frame, {size}"));
        }
        if parts.is_empty() {
            parts.push("No: nothing matching the query in view.".into());
        }
        let filler: String = (0..rng.gen_range(0..40)).map(|_| ['a', 'b', ' ', 'x'][rng.gen_range(0..4)]).collect();
        rec.observations.push(MonitorObservation { camera_id: cam.id.clone(), text: format!("{}. {filler}", parts.join("; ")) });
    }
    let action = ACTIONS[rng.gen_range(0..ACTIONS.len())];
    rec.decision = Some(DecisionRecord { reasoning: "synthetic".into(), action: action.into(), params: Default::default() });
    let kind = MotionKind::ALL[rng.gen_range(0..MotionKind::ALL.len())];
    rec.motion = match kind {
        MotionKind::RotateLeft => MotionEvent::rotate_left(rng.gen_range(1..3)),
        MotionKind::RotateRight => MotionEvent::rotate_right(rng.gen_range(1..3)),
        _ => MotionEvent::translate(kind),
    };
    rec.ack = Some(match rng.gen_range(0..3) {
        0 => Ack::ok("moved"),
        1 => Ack::blocked("blocked"),
        _ => Ack::limit("at limit"),
    });
    let mut p = ProprioState::default();
    for axis in ["x", "y", "heading"] {
        p.joint_displacements.insert(axis.into(), rng.gen_range(-50..50));
    }
    rec.proprio = Some(p);
    rec
}

/// Every header present exactly once, in the fixed order.
pub fn has_four_sections(text: &str) -> bool {
    let mut last = 0;
    for h in agentic_control::memory::SECTION_HEADERS {
        if text.matches(h).count() != 1 {
            return false;
        }
        let at = text.find(h).unwrap();
        if at < last {
            return false;
        }
        last = at;
    }
    true
}
