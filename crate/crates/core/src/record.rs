//! Per-step log records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{CameraSpec, ProprioState};
use crate::memory::{Bearing, EnvironmentMemory, MotionEvent};
use crate::monitor::{FrameContent, MonitorObservation, SceneEntity};
use crate::sim::{Ack, AckStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub reasoning: String,
    pub action: String,
    pub params: BTreeMap<String, f64>,
}

/// What a camera delivered this step. Symbolic scenes are logged in full;
/// raster frames only by size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FrameLog {
    Symbolic { camera_id: String, entities: Vec<SceneEntity> },
    Raster { camera_id: String, width: u32, height: u32 },
}

impl FrameLog {
    pub fn from_frame(frame: &crate::monitor::CameraFrame) -> Self {
        match &frame.content {
            FrameContent::Symbolic(e) => FrameLog::Symbolic { camera_id: frame.camera_id.clone(), entities: e.clone() },
            FrameContent::Raster(r) => {
                FrameLog::Raster { camera_id: frame.camera_id.clone(), width: r.width, height: r.height }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepFlags {
    pub query_reprompted: bool,
    pub action_reprompted: bool,
    pub curator_fallback: bool,
    pub adjustments: Vec<String>,
    pub error: Option<String>,
}

/// Loop phases in execution order.
pub const PHASES: [&str; 5] = ["query", "perceive", "decide", "dispatch", "curate"];

/// One iteration of the control loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub prompt_digest: String,
    pub query: Option<String>,
    pub frames: Vec<FrameLog>,
    pub observations: Vec<MonitorObservation>,
    pub decision: Option<DecisionRecord>,
    /// Relative-motion class of the chosen action, from the action interface.
    pub motion: MotionEvent,
    pub ack: Option<Ack>,
    pub proprio: Option<ProprioState>,
    pub memory: Option<EnvironmentMemory>,
    pub flags: StepFlags,
    /// Logical clock value at which each phase in [`PHASES`] completed.
    pub phase_clock: Vec<u64>,
    pub cameras: Vec<CameraSpec>,
}

impl StepRecord {
    pub fn new(step: u32, cameras: Vec<CameraSpec>) -> Self {
        StepRecord {
            step,
            prompt_digest: String::new(),
            query: None,
            frames: Vec::new(),
            observations: Vec::new(),
            decision: None,
            motion: MotionEvent::NONE,
            ack: None,
            proprio: None,
            memory: None,
            flags: StepFlags::default(),
            phase_clock: Vec::new(),
            cameras,
        }
    }

    /// The motion that actually happened: none if the dispatch was refused.
    pub fn effective_motion(&self) -> MotionEvent {
        match &self.ack {
            Some(a) if a.status == AckStatus::Ok => self.motion,
            _ => MotionEvent::NONE,
        }
    }

    pub fn camera_facing(&self, camera_id: &str) -> Option<Bearing> {
        self.cameras.iter().find(|c| c.id == camera_id).map(|c| c.facing)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("step record serializes")
    }
}
