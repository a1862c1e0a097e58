//! How the curated memory tracks objects while the robot moves.
//!
//! A box is seen by the front camera; the robot then steps left and turns.
//! The memory rewrites the box's bearing after each move instead of
//! appending new facts.

use agentic_control::config::{CameraSpec, ProprioState};
use agentic_control::memory::{reference_curate, render_memory_text, Bearing, EnvironmentMemory, MotionEvent, MotionKind};
use agentic_control::monitor::MonitorObservation;
use agentic_control::record::{DecisionRecord, StepRecord};
use agentic_control::sim::Ack;

fn step(n: u32, action: &str, motion: MotionEvent, seen: Option<&str>) -> StepRecord {
    let mut rec = StepRecord::new(n, vec![CameraSpec { id: "front".into(), facing: Bearing::FRONT }]);
    rec.observations.push(MonitorObservation {
        camera_id: "front".into(),
        text: seen.map_or("No: nothing visible.".into(), |s| format!("Yes: {s} visible, center of frame, medium.")),
    });
    rec.decision = Some(DecisionRecord { reasoning: String::new(), action: action.into(), params: Default::default() });
    rec.motion = motion;
    rec.ack = Some(Ack::ok("done"));
    rec.proprio = Some(ProprioState::default());
    rec
}

fn main() {
    let mut memory = EnvironmentMemory::new(1200).with_task("Reach the green box.", Some("green box"));
    let script = [
        step(1, "strafe_left", MotionEvent::translate(MotionKind::TranslateLeft), Some("green box")),
        step(2, "rotate_left", MotionEvent::rotate_left(2), None),
        step(3, "rotate_left", MotionEvent::rotate_left(2), None),
        step(4, "rotate_left", MotionEvent::rotate_left(2), None),
    ];
    for rec in &script {
        memory = reference_curate(&memory, rec);
        let b = memory.object("green box").map(|o| o.bearing.to_string()).unwrap_or_default();
        println!("after step {} ({}): green box is {b}", rec.step, rec.decision.as_ref().unwrap().action);
    }
    println!("\n{}", render_memory_text(&memory));
}
