use std::collections::BTreeMap;

use serde::Deserialize;

use super::{min_steps_oracle, parse_spec, unsupported, Ack, DiscreteWorld, RobotAdapter, SimError};
use crate::config::{ActionDef, ActionInterface, ProprioState};
use crate::monitor::{ApparentSize, CameraFrame, FrameBearing, SceneEntity};

const ACTIONS: &[&str] = &[
    "move_left",
    "move_right",
    "move_up",
    "move_down",
    "rotate_cw",
    "rotate_ccw",
    "finger_bend",
    "finger_extend",
    "reset",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Joint {
    Horizontal,
    Vertical,
    Rotational,
    Finger,
}

impl Joint {
    pub const ALL: [Joint; 4] = [Joint::Horizontal, Joint::Vertical, Joint::Rotational, Joint::Finger];

    pub fn name(self) -> &'static str {
        match self {
            Joint::Horizontal => "horizontal",
            Joint::Vertical => "vertical",
            Joint::Rotational => "rotational",
            Joint::Finger => "finger",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointRange {
    pub min: i32,
    pub max: i32,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointRanges {
    horizontal: JointRange,
    vertical: JointRange,
    rotational: JointRange,
    finger: JointRange,
}

/// Joint configurations from which `camera` sees an entity. An omitted
/// joint bound matches any value.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimbRegion {
    pub camera: String,
    #[serde(default)]
    pub horizontal: Option<[i32; 2]>,
    #[serde(default)]
    pub vertical: Option<[i32; 2]>,
    #[serde(default)]
    pub rotational: Option<[i32; 2]>,
    #[serde(default)]
    pub finger: Option<[i32; 2]>,
    pub bearing: FrameBearing,
    pub size: ApparentSize,
    #[serde(default)]
    pub occluded: bool,
}

impl LimbRegion {
    pub fn contains(&self, joints: &[i32; 4]) -> bool {
        [self.horizontal, self.vertical, self.rotational, self.finger]
            .iter()
            .zip(joints)
            .all(|(bound, v)| bound.is_none_or(|[lo, hi]| (lo..=hi).contains(v)))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimbEntity {
    pub label: String,
    pub regions: Vec<LimbRegion>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimbCamera {
    id: String,
    #[serde(default = "yes")]
    enabled: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimbSpec {
    #[serde(default)]
    name: Option<String>,
    joints: JointRanges,
    cameras: Vec<LimbCamera>,
    target: String,
    entities: Vec<LimbEntity>,
}

/// Four-axis servo arm with a camera cluster at the wrist.
///
/// What each camera sees is a lookup table from joint configuration to
/// entities, so success is exact and cheap to search.
#[derive(Debug, Clone)]
pub struct LimbWorld {
    pub name: String,
    ranges: [JointRange; 4],
    joints: [i32; 4],
    cameras: Vec<LimbCamera>,
    target: String,
    entities: Vec<LimbEntity>,
}

impl LimbWorld {
    pub fn from_table(table: &toml::Table) -> Result<Self, SimError> {
        let spec: LimbSpec = parse_spec(table)?;
        let j = spec.joints;
        let world = LimbWorld {
            name: spec.name.unwrap_or_else(|| "limb".into()),
            ranges: [j.horizontal, j.vertical, j.rotational, j.finger],
            joints: [0; 4],
            cameras: spec.cameras,
            target: spec.target,
            entities: spec.entities,
        };
        world.validate()?;
        Ok(world)
    }

    fn validate(&self) -> Result<(), SimError> {
        for (joint, r) in Joint::ALL.iter().zip(&self.ranges) {
            if !(r.min <= 0 && 0 <= r.max) {
                return Err(SimError::Scenario(format!("{} range must contain the reset position 0", joint.name())));
            }
        }
        if !self.entities.iter().any(|e| e.label == self.target) {
            return Err(SimError::Scenario(format!("target `{}` is not among the entities", self.target)));
        }
        for e in &self.entities {
            for r in &e.regions {
                if !self.cameras.iter().any(|c| c.id == r.camera) {
                    return Err(SimError::Scenario(format!("region of `{}` names unknown camera `{}`", e.label, r.camera)));
                }
            }
        }
        Ok(())
    }

    pub fn joint(&self, joint: Joint) -> i32 {
        self.joints[joint.index()]
    }

    pub fn joints(&self) -> [i32; 4] {
        self.joints
    }

    pub fn set_joints(&mut self, joints: [i32; 4]) {
        for (i, v) in joints.iter().enumerate() {
            assert!(
                (self.ranges[i].min..=self.ranges[i].max).contains(v),
                "{} out of range",
                Joint::ALL[i].name()
            );
        }
        self.joints = joints;
    }

    pub fn set_camera_enabled(&mut self, id: &str, enabled: bool) {
        for c in self.cameras.iter_mut().filter(|c| c.id == id) {
            c.enabled = enabled;
        }
    }

    pub fn camera_ids(&self) -> Vec<String> {
        self.cameras.iter().map(|c| c.id.clone()).collect()
    }

    fn nudge(&mut self, joint: Joint, delta: i32) -> Ack {
        let i = joint.index();
        let next = self.joints[i] + delta;
        if next < self.ranges[i].min || next > self.ranges[i].max {
            return Ack::limit(format!("{} at limit {}", joint.name(), self.joints[i]));
        }
        self.joints[i] = next;
        Ack::ok(format!("{} = {}", joint.name(), next))
    }

    pub fn step(&mut self, action: &str) -> Result<Ack, SimError> {
        Ok(match action {
            "move_left" => self.nudge(Joint::Horizontal, -1),
            "move_right" => self.nudge(Joint::Horizontal, 1),
            "move_up" => self.nudge(Joint::Vertical, 1),
            "move_down" => self.nudge(Joint::Vertical, -1),
            "rotate_cw" => self.nudge(Joint::Rotational, 1),
            "rotate_ccw" => self.nudge(Joint::Rotational, -1),
            "finger_bend" => self.nudge(Joint::Finger, 1),
            "finger_extend" => self.nudge(Joint::Finger, -1),
            "reset" => {
                self.joints = [0; 4];
                Ack::ok("all joints at reset position")
            }
            other => return Err(unsupported("limb", other)),
        })
    }

    fn visible_from(&self, camera: &str) -> Vec<SceneEntity> {
        self.entities
            .iter()
            .filter_map(|e| {
                e.regions.iter().find(|r| r.camera == camera && r.contains(&self.joints)).map(|r| SceneEntity {
                    label: e.label.clone(),
                    bearing_in_frame: r.bearing,
                    apparent_size: r.size,
                    occluded: r.occluded,
                })
            })
            .collect()
    }
}

impl RobotAdapter for LimbWorld {
    fn kind(&self) -> &'static str {
        "limb"
    }

    fn supported_actions(&self) -> &'static [&'static str] {
        ACTIONS
    }

    fn reset(&mut self, _seed: u64) {
        self.joints = [0; 4];
    }

    fn dispatch(&mut self, action: &ActionDef, _params: &BTreeMap<String, f64>) -> Result<Ack, SimError> {
        self.step(&action.name)
    }

    fn sense(&self, timestamp: u32) -> Vec<CameraFrame> {
        self.cameras
            .iter()
            .filter(|c| c.enabled)
            .map(|c| CameraFrame::symbolic(c.id.clone(), self.visible_from(&c.id), timestamp))
            .collect()
    }

    fn proprio(&self) -> ProprioState {
        let mut p = ProprioState::default();
        for j in Joint::ALL {
            p.joint_displacements.insert(j.name().to_string(), self.joint(j) as i64);
        }
        p
    }

    fn success(&self) -> bool {
        self.cameras.iter().filter(|c| c.enabled).any(|c| {
            self.visible_from(&c.id).iter().any(|e| e.label == self.target && !e.occluded)
        })
    }

    fn enabled_cameras(&self) -> Vec<String> {
        self.cameras.iter().filter(|c| c.enabled).map(|c| c.id.clone()).collect()
    }

    fn min_steps(&self, interface: &ActionInterface) -> Result<u32, SimError> {
        min_steps_oracle(self, interface)
    }
}

impl DiscreteWorld for LimbWorld {
    type State = [i32; 4];

    fn state(&self) -> Self::State {
        self.joints
    }

    fn set_state(&mut self, state: &Self::State) {
        self.joints = *state;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::AckStatus;

    const SCENARIO: &str = r#"
        kind = "limb"
        target = "tool"
        [joints]
        horizontal = { min = -2, max = 2 }
        vertical = { min = 0, max = 2 }
        rotational = { min = -3, max = 3 }
        finger = { min = 0, max = 1 }
        [[cameras]]
        id = "front"
        [[cameras]]
        id = "side"
        enabled = false
        [[entities]]
        label = "tool"
        regions = [
            { camera = "front", rotational = [2, 2], vertical = [1, 1], bearing = "center", size = "medium" },
            { camera = "side", rotational = [-1, -1], bearing = "left", size = "small" },
        ]
    "#;

    fn world() -> LimbWorld {
        LimbWorld::from_table(&SCENARIO.parse().unwrap()).unwrap()
    }

    fn iface() -> ActionInterface {
        ActionInterface {
            actions: ACTIONS
                .iter()
                .map(|n| ActionDef { name: n.to_string(), description: "x".into(), parameters: vec![], motion: None })
                .collect(),
        }
    }

    #[test]
    fn unit_step_and_clamp() {
        let mut w = world();
        assert_eq!(w.step("move_up").unwrap().status, AckStatus::Ok);
        assert_eq!(w.joint(Joint::Vertical), 1);
        w.step("move_up").unwrap();
        let ack = w.step("move_up").unwrap();
        assert_eq!(ack.status, AckStatus::Limit);
        assert_eq!(w.joint(Joint::Vertical), 2);
    }

    #[test]
    fn reset_zeroes_everything() {
        let mut w = world();
        w.set_joints([2, 2, -3, 1]);
        w.step("reset").unwrap();
        assert_eq!(w.joints(), [0; 4]);
    }

    #[test]
    fn success_is_table_lookup() {
        let mut w = world();
        assert!(!w.success());
        w.set_joints([0, 1, 2, 0]);
        assert!(w.success());
        w.set_joints([1, 1, 2, 1]);
        assert!(w.success());
    }

    #[test]
    fn disabled_side_camera_does_not_count() {
        let mut w = world();
        w.set_joints([0, 0, -1, 0]);
        assert!(!w.success());
        assert_eq!(w.sense(0).len(), 1);
        w.set_camera_enabled("side", true);
        assert!(w.success());
        assert_eq!(w.sense(0).len(), 2);
    }

    #[test]
    fn three_primitives_from_reset() {
        assert_eq!(world().min_steps(&iface()).unwrap(), 3);
    }

    #[test]
    fn rejects_range_without_zero() {
        let bad = SCENARIO.replace("vertical = { min = 0, max = 2 }", "vertical = { min = 1, max = 2 }");
        assert!(LimbWorld::from_table(&bad.parse().unwrap()).is_err());
    }
}
