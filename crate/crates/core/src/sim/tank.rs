use std::collections::BTreeMap;

use serde::Deserialize;

use super::grid::wrap_degrees;
use super::{min_steps_oracle, parse_spec, unsupported, Ack, DiscreteWorld, RobotAdapter, SimError};
use crate::config::{ActionDef, ActionInterface, ProprioState};
use crate::monitor::{ApparentSize, CameraFrame, FrameBearing, SceneEntity};

const ACTIONS: &[&str] = &["surge_forward", "surge_backward", "yaw_left", "yaw_right", "heave_up", "heave_down"];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TankCamera {
    id: String,
    /// Horizontal half field of view in degrees.
    #[serde(default = "default_half_fov")]
    half_fov: f64,
    /// How many layers below the vehicle the (cropped) image still reaches.
    #[serde(default = "default_below")]
    reach_below: i32,
    #[serde(default = "default_above")]
    reach_above: i32,
}

fn default_half_fov() -> f64 {
    45.0
}

fn default_below() -> i32 {
    2
}

fn default_above() -> i32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Placed {
    label: String,
    cell: [i32; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Start {
    x: i32,
    y: i32,
    /// Heading in 45° steps clockwise from +y.
    yaw: i32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TankSpec {
    #[serde(default)]
    name: Option<String>,
    size: [i32; 3],
    #[serde(default = "default_radius")]
    success_radius: f64,
    #[serde(default = "default_view")]
    view_distance: f64,
    start: Start,
    target: Placed,
    #[serde(default)]
    entities: Vec<Placed>,
    camera: TankCamera,
}

fn default_radius() -> f64 {
    1.2
}

fn default_view() -> f64 {
    8.0
}

/// Pose on the tank lattice: x, y, z (0 = floor) and yaw in 0..8.
pub type TankPose = (i32, i32, i32, u8);

/// Water tank on a 3D lattice. Episodes start at the surface.
#[derive(Debug, Clone)]
pub struct TankWorld {
    pub name: String,
    pub size: [i32; 3],
    /// Success distance in cells.
    pub success_radius: f64,
    pub view_distance: f64,
    start: TankPose,
    pose: TankPose,
    target: (String, [i32; 3]),
    entities: Vec<(String, [i32; 3])>,
    camera: TankCamera,
}

impl TankWorld {
    pub fn from_table(table: &toml::Table) -> Result<Self, SimError> {
        let spec: TankSpec = parse_spec(table)?;
        if spec.size.iter().any(|&s| s <= 0) {
            return Err(SimError::Scenario("tank size must be positive".into()));
        }
        let start = (spec.start.x, spec.start.y, spec.size[2] - 1, spec.start.yaw.rem_euclid(8) as u8);
        let world = TankWorld {
            name: spec.name.unwrap_or_else(|| "tank".into()),
            size: spec.size,
            success_radius: spec.success_radius,
            view_distance: spec.view_distance,
            start,
            pose: start,
            target: (spec.target.label, spec.target.cell),
            entities: spec.entities.into_iter().map(|p| (p.label, p.cell)).collect(),
            camera: spec.camera,
        };
        if !world.in_bounds(start.0, start.1, start.2) || !world.in_bounds_cell(world.target.1) {
            return Err(SimError::Scenario("start or target outside the tank".into()));
        }
        Ok(world)
    }

    fn in_bounds(&self, x: i32, y: i32, z: i32) -> bool {
        (0..self.size[0]).contains(&x) && (0..self.size[1]).contains(&y) && (0..self.size[2]).contains(&z)
    }

    fn in_bounds_cell(&self, c: [i32; 3]) -> bool {
        self.in_bounds(c[0], c[1], c[2])
    }

    pub fn pose(&self) -> TankPose {
        self.pose
    }

    pub fn set_pose(&mut self, pose: TankPose) {
        assert!(self.in_bounds(pose.0, pose.1, pose.2) && pose.3 < 8, "pose out of bounds");
        self.pose = pose;
    }

    /// Unit lattice step for a yaw index; diagonals move one cell on both axes.
    pub fn yaw_step(yaw: u8) -> (i32, i32) {
        let a = (yaw as f64 * 45.0).to_radians();
        (a.sin().round() as i32, a.cos().round() as i32)
    }

    fn shift(&mut self, dx: i32, dy: i32, dz: i32) -> Ack {
        let (x, y, z, yaw) = self.pose;
        let (nx, ny, nz) = (x + dx, y + dy, z + dz);
        if self.in_bounds(nx, ny, nz) {
            self.pose = (nx, ny, nz, yaw);
            Ack::ok(format!("at ({nx}, {ny}, {nz})"))
        } else {
            Ack::blocked(format!("({nx}, {ny}, {nz}) is outside the tank"))
        }
    }

    pub fn step(&mut self, action: &str) -> Result<Ack, SimError> {
        let (dx, dy) = Self::yaw_step(self.pose.3);
        Ok(match action {
            "surge_forward" => self.shift(dx, dy, 0),
            "surge_backward" => self.shift(-dx, -dy, 0),
            "heave_up" => self.shift(0, 0, 1),
            "heave_down" => self.shift(0, 0, -1),
            "yaw_left" | "yaw_right" => {
                let d = if action == "yaw_left" { 7 } else { 1 };
                self.pose.3 = (self.pose.3 + d) % 8;
                Ack::ok(format!("yaw {}°", self.pose.3 as u32 * 45))
            }
            other => return Err(unsupported("tank", other)),
        })
    }

    fn distance(&self, c: [i32; 3]) -> f64 {
        let (x, y, z, _) = self.pose;
        let d = [(c[0] - x) as f64, (c[1] - y) as f64, (c[2] - z) as f64];
        d.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn visible(&self) -> Vec<SceneEntity> {
        let (x, y, z, yaw) = self.pose;
        std::iter::once(&self.target)
            .chain(&self.entities)
            .filter_map(|(label, c)| {
                let (dx, dy, dz) = (c[0] - x, c[1] - y, c[2] - z);
                if (dx, dy) == (0, 0) || dz < -self.camera.reach_below || dz > self.camera.reach_above {
                    return None;
                }
                let dist = self.distance(*c);
                let rel = wrap_degrees((dx as f64).atan2(dy as f64).to_degrees() - yaw as f64 * 45.0);
                if dist > self.view_distance || rel.abs() > self.camera.half_fov + 1e-9 {
                    return None;
                }
                Some(SceneEntity {
                    label: label.clone(),
                    bearing_in_frame: if rel < -15.0 {
                        FrameBearing::Left
                    } else if rel > 15.0 {
                        FrameBearing::Right
                    } else {
                        FrameBearing::Center
                    },
                    apparent_size: if dist <= 1.5 {
                        ApparentSize::Large
                    } else if dist <= 3.0 {
                        ApparentSize::Medium
                    } else {
                        ApparentSize::Small
                    },
                    occluded: false,
                })
            })
            .collect()
    }
}

impl RobotAdapter for TankWorld {
    fn kind(&self) -> &'static str {
        "tank"
    }

    fn supported_actions(&self) -> &'static [&'static str] {
        ACTIONS
    }

    fn reset(&mut self, _seed: u64) {
        self.pose = self.start;
    }

    fn dispatch(&mut self, action: &ActionDef, _params: &BTreeMap<String, f64>) -> Result<Ack, SimError> {
        self.step(&action.name)
    }

    fn sense(&self, timestamp: u32) -> Vec<CameraFrame> {
        vec![CameraFrame::symbolic(self.camera.id.clone(), self.visible(), timestamp)]
    }

    fn proprio(&self) -> ProprioState {
        let (x, y, z, yaw) = self.pose;
        let (sx, sy, sz, _) = self.start;
        let mut p = ProprioState::default();
        p.joint_displacements.insert("surge_x".into(), (x - sx) as i64);
        p.joint_displacements.insert("surge_y".into(), (y - sy) as i64);
        p.joint_displacements.insert("depth".into(), (sz - z) as i64);
        p.joint_displacements.insert("yaw".into(), yaw as i64 * 45);
        p.pose_estimate = Some(((x - sx) as i64, (y - sy) as i64, yaw as i64 * 45));
        p
    }

    fn success(&self) -> bool {
        self.distance(self.target.1) <= self.success_radius + 1e-9
    }

    fn enabled_cameras(&self) -> Vec<String> {
        vec![self.camera.id.clone()]
    }

    fn min_steps(&self, interface: &ActionInterface) -> Result<u32, SimError> {
        min_steps_oracle(self, interface)
    }
}

impl DiscreteWorld for TankWorld {
    type State = TankPose;

    fn state(&self) -> Self::State {
        self.pose
    }

    fn set_state(&mut self, state: &Self::State) {
        self.pose = *state;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::AckStatus;

    const SCENARIO: &str = r#"
        kind = "tank"
        size = [8, 4, 4]
        start = { x = 1, y = 2, yaw = 2 }
        target = { label = "green box", cell = [4, 2, 0] }
        camera = { id = "main" }
    "#;

    fn world() -> TankWorld {
        TankWorld::from_table(&SCENARIO.parse().unwrap()).unwrap()
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
    fn heave_down_from_surface() {
        let mut w = world();
        assert_eq!(w.pose().2, 3);
        w.step("heave_down").unwrap();
        assert_eq!(w.pose().2, 2);
        let mut w = world();
        assert_eq!(w.step("heave_up").unwrap().status, AckStatus::Blocked);
        assert_eq!(w.pose(), world().pose());
    }

    #[test]
    fn eight_yaws_restore_heading() {
        let mut w = world();
        for _ in 0..8 {
            w.step("yaw_left").unwrap();
        }
        assert_eq!(w.pose(), world().pose());
    }

    #[test]
    fn surge_into_wall_is_blocked() {
        let mut w = world();
        w.set_pose((7, 2, 3, 2));
        assert_eq!(w.step("surge_forward").unwrap().status, AckStatus::Blocked);
        assert_eq!(w.pose(), (7, 2, 3, 2));
    }

    #[test]
    fn floor_hidden_from_surface() {
        let w = world();
        assert!(w.sense(0)[0].content == crate::monitor::FrameContent::Symbolic(vec![]));
        let mut w = world();
        w.step("heave_down").unwrap();
        match &w.sense(0)[0].content {
            crate::monitor::FrameContent::Symbolic(e) => {
                assert_eq!(e.len(), 1);
                assert_eq!(e[0].bearing_in_frame, FrameBearing::Center);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn diagonal_yaw_moves_both_axes() {
        assert_eq!(TankWorld::yaw_step(0), (0, 1));
        assert_eq!(TankWorld::yaw_step(1), (1, 1));
        assert_eq!(TankWorld::yaw_step(2), (1, 0));
        assert_eq!(TankWorld::yaw_step(6), (-1, 0));
    }

    #[test]
    fn minimum_is_five() {
        assert_eq!(world().min_steps(&iface()).unwrap(), 5);
    }
}
