use std::collections::{BTreeMap, HashSet};

use serde::Deserialize;

use super::{min_steps_oracle, parse_spec, unsupported, Ack, DiscreteWorld, RobotAdapter, SimError};
use crate::config::{ActionDef, ActionInterface, ProprioState};
use crate::monitor::{ApparentSize, CameraFrame, FrameBearing, SceneEntity};

const ACTIONS: &[&str] = &["forward", "backward", "rotate_left", "rotate_right"];

/// Half of the 90° horizontal field of view.
pub const HALF_FOV_DEG: f64 = 45.0;
/// Entities within this many degrees of the optical axis are "center".
pub const CENTER_BAND_DEG: f64 = 15.0;
/// Distance bands in cells for apparent size.
pub const LARGE_WITHIN: f64 = 2.0;
pub const MEDIUM_WITHIN: f64 = 6.0;

/// Heading in degrees clockwise from +y: 0, 90, 180 or 270.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Heading(u16);

impl Heading {
    pub fn from_degrees(deg: i64) -> Option<Self> {
        let d = deg.rem_euclid(360);
        (d % 90 == 0).then_some(Heading(d as u16))
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    pub fn left(self) -> Self {
        Heading((self.0 + 270) % 360)
    }

    pub fn right(self) -> Self {
        Heading((self.0 + 90) % 360)
    }

    fn step(self) -> (i32, i32) {
        match self.0 {
            0 => (0, 1),
            90 => (1, 0),
            180 => (0, -1),
            _ => (-1, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCamera {
    pub id: String,
    /// Optical axis relative to the heading, degrees clockwise.
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "yes")]
    pub enabled: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entity {
    label: String,
    cell: [i32; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Start {
    x: i32,
    y: i32,
    #[serde(default)]
    heading: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Rect {
    from: [i32; 2],
    to: [i32; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    #[serde(default)]
    name: Option<String>,
    width: i32,
    height: i32,
    cell_size: f64,
    #[serde(default = "default_radius")]
    success_radius: f64,
    view_distance: f64,
    #[serde(default)]
    blocked: Vec<[i32; 2]>,
    #[serde(default)]
    walls: Vec<Rect>,
    start: Start,
    target: Entity,
    #[serde(default)]
    entities: Vec<Entity>,
    cameras: Vec<GridCamera>,
}

fn default_radius() -> f64 {
    1.0
}

/// Planar warehouse on a square lattice with 90° headings.
#[derive(Debug, Clone)]
pub struct GridWorld {
    pub name: String,
    pub width: i32,
    pub height: i32,
    /// Meters per cell.
    pub cell_size: f64,
    /// Success distance in meters.
    pub success_radius: f64,
    /// Camera range in cells.
    pub view_distance: f64,
    blocked: HashSet<(i32, i32)>,
    start: (i32, i32, Heading),
    pose: (i32, i32, Heading),
    target: (String, (i32, i32)),
    entities: Vec<(String, (i32, i32))>,
    cameras: Vec<GridCamera>,
}

impl GridWorld {
    /// Obstacle-free world with forward/left/right cameras.
    pub fn open(width: i32, height: i32, start: (i32, i32, Heading), target: (i32, i32)) -> Self {
        GridWorld {
            name: "open".into(),
            width,
            height,
            cell_size: 0.5,
            success_radius: 1.0,
            view_distance: 30.0,
            blocked: HashSet::new(),
            start,
            pose: start,
            target: ("target".into(), target),
            entities: Vec::new(),
            cameras: vec![
                GridCamera { id: "front".into(), offset: 0.0, enabled: true },
                GridCamera { id: "left".into(), offset: -90.0, enabled: true },
                GridCamera { id: "right".into(), offset: 90.0, enabled: true },
            ],
        }
    }

    pub fn from_table(table: &toml::Table) -> Result<Self, SimError> {
        let spec: GridSpec = parse_spec(table)?;
        let mut blocked: HashSet<(i32, i32)> = spec.blocked.iter().map(|c| (c[0], c[1])).collect();
        for r in &spec.walls {
            for x in r.from[0].min(r.to[0])..=r.from[0].max(r.to[0]) {
                for y in r.from[1].min(r.to[1])..=r.from[1].max(r.to[1]) {
                    blocked.insert((x, y));
                }
            }
        }
        let heading = Heading::from_degrees(spec.start.heading)
            .ok_or_else(|| SimError::Scenario(format!("heading {} is not a multiple of 90", spec.start.heading)))?;
        let start = (spec.start.x, spec.start.y, heading);
        let world = GridWorld {
            name: spec.name.unwrap_or_else(|| "gridworld".into()),
            width: spec.width,
            height: spec.height,
            cell_size: spec.cell_size,
            success_radius: spec.success_radius,
            view_distance: spec.view_distance,
            blocked,
            start,
            pose: start,
            target: (spec.target.label, (spec.target.cell[0], spec.target.cell[1])),
            entities: spec.entities.into_iter().map(|e| (e.label, (e.cell[0], e.cell[1]))).collect(),
            cameras: spec.cameras,
        };
        world.validate()?;
        Ok(world)
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.width <= 0 || self.height <= 0 || self.cell_size <= 0.0 {
            return Err(SimError::Scenario("grid dimensions must be positive".into()));
        }
        let (sx, sy, _) = self.start;
        if !self.is_free(sx, sy) {
            return Err(SimError::Scenario("robot starts on a blocked or out-of-bounds cell".into()));
        }
        let (tx, ty) = self.target.1;
        if !self.is_free(tx, ty) {
            return Err(SimError::Scenario("target is on a blocked or out-of-bounds cell".into()));
        }
        if self.cameras.is_empty() {
            return Err(SimError::Scenario("at least one camera required".into()));
        }
        Ok(())
    }

    pub fn with_blocked(mut self, cells: impl IntoIterator<Item = (i32, i32)>) -> Self {
        self.blocked.extend(cells);
        self
    }

    pub fn with_entity(mut self, label: &str, cell: (i32, i32)) -> Self {
        self.entities.push((label.to_string(), cell));
        self
    }

    pub fn with_cameras(mut self, cameras: Vec<GridCamera>) -> Self {
        self.cameras = cameras;
        self
    }

    pub fn pose(&self) -> (i32, i32, Heading) {
        self.pose
    }

    pub fn set_pose(&mut self, pose: (i32, i32, Heading)) {
        self.pose = pose;
    }

    pub fn target_cell(&self) -> (i32, i32) {
        self.target.1
    }

    pub fn is_free(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && x < self.width && y < self.height && !self.blocked.contains(&(x, y))
    }

    fn translate(&mut self, sign: i32) -> Ack {
        let (x, y, h) = self.pose;
        let (dx, dy) = h.step();
        let (nx, ny) = (x + sign * dx, y + sign * dy);
        if self.is_free(nx, ny) {
            self.pose = (nx, ny, h);
            Ack::ok(format!("moved to ({nx}, {ny})"))
        } else {
            Ack::blocked(format!("cell ({nx}, {ny}) is blocked"))
        }
    }

    /// Apply one of the four primitives.
    pub fn step(&mut self, action: &str) -> Result<Ack, SimError> {
        let (x, y, h) = self.pose;
        Ok(match action {
            "forward" => self.translate(1),
            "backward" => self.translate(-1),
            "rotate_left" => {
                self.pose = (x, y, h.left());
                Ack::ok(format!("heading {}", h.left().degrees()))
            }
            "rotate_right" => {
                self.pose = (x, y, h.right());
                Ack::ok(format!("heading {}", h.right().degrees()))
            }
            other => return Err(unsupported("gridworld", other)),
        })
    }

    fn line_of_sight(&self, from: (i32, i32), to: (i32, i32)) -> bool {
        let (dx, dy) = ((to.0 - from.0) as f64, (to.1 - from.1) as f64);
        let n = ((dx.abs().max(dy.abs())) * 4.0).ceil() as i32;
        (1..n).all(|i| {
            let t = i as f64 / n as f64;
            let cx = (from.0 as f64 + dx * t).round() as i32;
            let cy = (from.1 as f64 + dy * t).round() as i32;
            (cx, cy) == from || (cx, cy) == to || !self.blocked.contains(&(cx, cy))
        })
    }

    fn visible_from(&self, camera: &GridCamera) -> Vec<SceneEntity> {
        let (x, y, h) = self.pose;
        std::iter::once(&self.target)
            .chain(self.entities.iter())
            .filter_map(|(label, (ex, ey))| {
                let (dx, dy) = ((ex - x) as f64, (ey - y) as f64);
                let dist = dx.hypot(dy);
                if dist == 0.0 || dist > self.view_distance {
                    return None;
                }
                let world = dx.atan2(dy).to_degrees();
                let rel = wrap_degrees(world - h.degrees() as f64 - camera.offset);
                if rel.abs() > HALF_FOV_DEG + 1e-9 || !self.line_of_sight((x, y), (*ex, *ey)) {
                    return None;
                }
                Some(SceneEntity {
                    label: label.clone(),
                    bearing_in_frame: if rel < -CENTER_BAND_DEG {
                        FrameBearing::Left
                    } else if rel > CENTER_BAND_DEG {
                        FrameBearing::Right
                    } else {
                        FrameBearing::Center
                    },
                    apparent_size: if dist <= LARGE_WITHIN {
                        ApparentSize::Large
                    } else if dist <= MEDIUM_WITHIN {
                        ApparentSize::Medium
                    } else {
                        ApparentSize::Small
                    },
                    occluded: false,
                })
            })
            .collect()
    }

    pub fn distance_to_target_m(&self) -> f64 {
        let (x, y, _) = self.pose;
        let (tx, ty) = self.target.1;
        ((tx - x) as f64).hypot((ty - y) as f64) * self.cell_size
    }
}

/// Maps degrees into (-180, 180].
pub(crate) fn wrap_degrees(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

impl RobotAdapter for GridWorld {
    fn kind(&self) -> &'static str {
        "gridworld"
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
        self.cameras
            .iter()
            .filter(|c| c.enabled)
            .map(|c| CameraFrame::symbolic(c.id.clone(), self.visible_from(c), timestamp))
            .collect()
    }

    fn proprio(&self) -> ProprioState {
        let (x, y, h) = self.pose;
        let (sx, sy, _) = self.start;
        let mut p = ProprioState::default();
        p.joint_displacements.insert("x".into(), (x - sx) as i64);
        p.joint_displacements.insert("y".into(), (y - sy) as i64);
        p.joint_displacements.insert("heading".into(), h.degrees() as i64);
        p.pose_estimate = Some(((x - sx) as i64, (y - sy) as i64, h.degrees() as i64));
        p
    }

    fn success(&self) -> bool {
        self.distance_to_target_m() <= self.success_radius + 1e-9
    }

    fn enabled_cameras(&self) -> Vec<String> {
        self.cameras.iter().filter(|c| c.enabled).map(|c| c.id.clone()).collect()
    }

    fn min_steps(&self, interface: &ActionInterface) -> Result<u32, SimError> {
        min_steps_oracle(self, interface)
    }
}

impl DiscreteWorld for GridWorld {
    type State = (i32, i32, Heading);

    fn state(&self) -> Self::State {
        self.pose
    }

    fn set_state(&mut self, state: &Self::State) {
        self.pose = *state;
    }
}
