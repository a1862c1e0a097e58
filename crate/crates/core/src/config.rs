//! Declarative embodiment configuration.
//!
//! A robot is described entirely by three files:
//!
//! * a robot description (plain UTF-8 text),
//! * an action interface (JSON document, see [`ActionInterface`]),
//! * a task description (plain UTF-8 text).
//!
//! An optional fourth file carries free-form environment context.
//!
//! The robot description may start with declaration lines that the loader
//! strips from the prose:
//!
//! ```text
//! cameras: front=front, left=left, right=right
//! axes: x, y, heading
//! ```
//!
//! `cameras` is required. Each entry is `id` or `id=facing`, where `facing` is
//! one of the eight bearing names (`front`, `front-right`, ... `front-left`);
//! the facing defaults to `front`. `axes` lists the proprioceptive axis names.
//!
//! The task file may contain `target:` and `success:` lines; everything else
//! is the objective.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::{Bearing, MotionEvent, MotionKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("schema violation in `{field}`: {reason}")]
    SchemaViolation { field: String, reason: String },
    #[error("duplicate action name `{0}`")]
    DuplicateActionName(String),
    #[error("unknown action `{name}` (admissible: {})", admissible.join(", "))]
    UnknownAction { name: String, admissible: Vec<String> },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::SchemaViolation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Returns true when `s` matches `[a-z][a-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub id: String,
    pub facing: Bearing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDescription {
    pub text: String,
    pub cameras: Vec<CameraSpec>,
    pub axes: Vec<String>,
}

impl RobotDescription {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let mut cameras = None;
        let mut axes = Vec::new();
        let mut prose = Vec::new();
        let mut in_header = true;
        for line in source.lines() {
            let trimmed = line.trim();
            if in_header {
                if trimmed.is_empty() && prose.is_empty() {
                    continue;
                }
                if let Some(rest) = trimmed.strip_prefix("cameras:") {
                    cameras = Some(parse_cameras(rest)?);
                    continue;
                }
                if let Some(rest) = trimmed.strip_prefix("axes:") {
                    axes = split_list(rest);
                    continue;
                }
                in_header = false;
            }
            prose.push(line);
        }
        let text = prose.join("\n").trim().to_string();
        let cameras = cameras.ok_or_else(|| ConfigError::schema("cameras", "missing `cameras:` line"))?;
        let desc = RobotDescription { text, cameras, axes };
        desc.validate()?;
        Ok(desc)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.text.is_empty() {
            return Err(ConfigError::schema("robot.text", "description is empty"));
        }
        if self.cameras.is_empty() {
            return Err(ConfigError::schema("cameras", "at least one camera required"));
        }
        let mut seen = BTreeSet::new();
        for cam in &self.cameras {
            if !is_identifier(&cam.id) {
                return Err(ConfigError::schema("cameras", format!("invalid camera id `{}`", cam.id)));
            }
            if !seen.insert(cam.id.as_str()) {
                return Err(ConfigError::schema("cameras", format!("duplicate camera id `{}`", cam.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for axis in &self.axes {
            if !seen.insert(axis.as_str()) {
                return Err(ConfigError::schema("axes", format!("duplicate axis `{axis}`")));
            }
        }
        Ok(())
    }

    pub fn camera_ids(&self) -> impl Iterator<Item = &str> {
        self.cameras.iter().map(|c| c.id.as_str())
    }

    pub fn camera_facing(&self, id: &str) -> Option<Bearing> {
        self.cameras.iter().find(|c| c.id == id).map(|c| c.facing)
    }

    /// Inverse of [`RobotDescription::parse`].
    pub fn to_file_text(&self) -> String {
        let cams: Vec<String> = self
            .cameras
            .iter()
            .map(|c| format!("{}={}", c.id, c.facing.name()))
            .collect();
        let mut out = format!("cameras: {}\n", cams.join(", "));
        if !self.axes.is_empty() {
            out.push_str(&format!("axes: {}\n", self.axes.join(", ")));
        }
        out.push('\n');
        out.push_str(&self.text);
        out.push('\n');
        out
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_cameras(s: &str) -> Result<Vec<CameraSpec>, ConfigError> {
    split_list(s)
        .into_iter()
        .map(|entry| match entry.split_once('=') {
            Some((id, facing)) => {
                let facing = Bearing::from_name(facing.trim())
                    .ok_or_else(|| ConfigError::schema("cameras", format!("unknown facing `{facing}`")))?;
                Ok(CameraSpec { id: id.trim().to_string(), facing })
            }
            None => Ok(CameraSpec { id: entry, facing: Bearing::FRONT }),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDef {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub min: f64,
    pub max: f64,
    pub default: f64,
}

/// How an action moves the robot relative to objects around it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSpec {
    pub kind: MotionKind,
    #[serde(default)]
    pub sectors: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDef {
    pub name: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<ParamDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionSpec>,
}

impl ActionDef {
    pub fn param(&self, name: &str) -> Option<&ParamDef> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Relative-motion class of this action; `none` when undeclared.
    pub fn motion_event(&self) -> MotionEvent {
        match self.motion {
            Some(MotionSpec { kind, sectors }) => MotionEvent { kind, rotation_sectors: sectors },
            None => MotionEvent::NONE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionInterface {
    pub actions: Vec<ActionDef>,
}

impl ActionInterface {
    pub fn parse_json(source: &str) -> Result<Self, ConfigError> {
        let iface: ActionInterface = serde_json::from_str(source).map_err(|e| {
            let msg = e.to_string();
            // serde reports the offending field name inside backticks
            let field = msg
                .split('`')
                .nth(1)
                .unwrap_or("actions")
                .to_string();
            ConfigError::schema(field, msg)
        })?;
        iface.validate()?;
        Ok(iface)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.actions.is_empty() {
            return Err(ConfigError::schema("actions", "at least one action required"));
        }
        let mut seen = BTreeSet::new();
        for a in &self.actions {
            if !is_identifier(&a.name) {
                return Err(ConfigError::schema(
                    "actions.name",
                    format!("`{}` is not a lowercase snake_case identifier", a.name),
                ));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(ConfigError::DuplicateActionName(a.name.clone()));
            }
            if a.description.trim().is_empty() {
                return Err(ConfigError::schema("actions.description", format!("empty for `{}`", a.name)));
            }
            let mut pnames = BTreeSet::new();
            for p in &a.parameters {
                if !is_identifier(&p.name) || !pnames.insert(p.name.as_str()) {
                    return Err(ConfigError::schema(
                        "actions.parameters.name",
                        format!("bad or duplicate parameter `{}` on `{}`", p.name, a.name),
                    ));
                }
                if p.min.partial_cmp(&p.max) != Some(std::cmp::Ordering::Less) || !(p.min..=p.max).contains(&p.default) {
                    return Err(ConfigError::schema(
                        "actions.parameters",
                        format!("degenerate range or default for `{}.{}`", a.name, p.name),
                    ));
                }
            }
            if let Some(m) = a.motion {
                let rotates = matches!(m.kind, MotionKind::RotateLeft | MotionKind::RotateRight);
                if rotates != (m.sectors > 0) {
                    return Err(ConfigError::schema(
                        "actions.motion.sectors",
                        format!("`{}`: sectors must be > 0 exactly for rotations", a.name),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.actions.iter().map(|a| a.name.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("action interface serializes")
    }
}

/// Looks up `name` in `interface`. Matching is exact and case-sensitive.
pub fn validate_action<'a>(name: &str, interface: &'a ActionInterface) -> Result<&'a ActionDef, ConfigError> {
    interface
        .actions
        .iter()
        .find(|a| a.name == name)
        .ok_or_else(|| ConfigError::UnknownAction {
            name: name.to_string(),
            admissible: interface.names(),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub objective: String,
    pub target_label: Option<String>,
    pub success_hint: Option<String>,
}

impl TaskSpec {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let mut target_label = None;
        let mut success_hint = None;
        let mut prose = Vec::new();
        for line in source.lines() {
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix("target:") {
                target_label = Some(rest.trim().to_string()).filter(|s| !s.is_empty());
            } else if let Some(rest) = trimmed.strip_prefix("success:") {
                success_hint = Some(rest.trim().to_string()).filter(|s| !s.is_empty());
            } else {
                prose.push(line);
            }
        }
        let objective = prose.join("\n").trim().to_string();
        if objective.is_empty() {
            return Err(ConfigError::schema("task.objective", "objective is empty"));
        }
        Ok(TaskSpec { objective, target_label, success_hint })
    }

    pub fn to_file_text(&self) -> String {
        let mut out = String::new();
        if let Some(t) = &self.target_label {
            out.push_str(&format!("target: {t}\n"));
        }
        if let Some(s) = &self.success_hint {
            out.push_str(&format!("success: {s}\n"));
        }
        out.push_str(&self.objective);
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProprioState {
    pub joint_displacements: BTreeMap<String, i64>,
    pub pose_estimate: Option<(i64, i64, i64)>,
}

impl ProprioState {
    pub fn check_axes(&self, robot: &RobotDescription) -> Result<(), ConfigError> {
        for key in self.joint_displacements.keys() {
            if !robot.axes.iter().any(|a| a == key) {
                return Err(ConfigError::schema("axes", format!("undeclared axis `{key}`")));
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut parts: Vec<String> = self
            .joint_displacements
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        if let Some((x, y, h)) = self.pose_estimate {
            parts.push(format!("pose=({x}, {y}, {h})"));
        }
        if parts.is_empty() {
            "no displacement recorded".to_string()
        } else {
            parts.join(", ")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: u32,
    pub action: String,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionHistory {
    entries: Vec<HistoryEntry>,
}

impl ActionHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry; the step index must be strictly greater than the last one.
    pub fn push(&mut self, step: u32, action: impl Into<String>, params: BTreeMap<String, f64>) {
        let last = self.entries.last().map_or(0, |e| e.step);
        assert!(step > last, "history steps must increase (got {step} after {last})");
        self.entries.push(HistoryEntry { step, action: action.into(), params });
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbodimentConfig {
    pub robot: RobotDescription,
    pub interface: ActionInterface,
    pub task: TaskSpec,
    pub environment_context: Option<String>,
}

pub const ROBOT_FILE: &str = "robot.txt";
pub const ACTIONS_FILE: &str = "actions.json";
pub const TASK_FILE: &str = "task.txt";
pub const CONTEXT_FILE: &str = "context.txt";

fn read(path: &Path) -> Result<String, ConfigError> {
    if !path.exists() {
        return Err(ConfigError::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

pub fn load_embodiment_config(
    robot_path: impl AsRef<Path>,
    actions_path: impl AsRef<Path>,
    task_path: impl AsRef<Path>,
) -> Result<EmbodimentConfig, ConfigError> {
    let robot = RobotDescription::parse(&read(robot_path.as_ref())?)?;
    let interface = ActionInterface::parse_json(&read(actions_path.as_ref())?)?;
    let task = TaskSpec::parse(&read(task_path.as_ref())?)?;
    Ok(EmbodimentConfig { robot, interface, task, environment_context: None })
}

impl EmbodimentConfig {
    /// Loads `robot.txt`, `actions.json`, `task.txt` and, when present,
    /// `context.txt` from one directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let dir = dir.as_ref();
        let mut cfg = load_embodiment_config(dir.join(ROBOT_FILE), dir.join(ACTIONS_FILE), dir.join(TASK_FILE))?;
        let ctx = dir.join(CONTEXT_FILE);
        if ctx.exists() {
            cfg = cfg.with_environment_context_file(ctx)?;
        }
        Ok(cfg)
    }

    pub fn with_environment_context_file(mut self, path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = read(path.as_ref())?.trim().to_string();
        self.environment_context = Some(text).filter(|s| !s.is_empty());
        Ok(self)
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), ConfigError> {
        let dir = dir.as_ref();
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|source| ConfigError::Io { path, source })
        };
        write(ROBOT_FILE, self.robot.to_file_text())?;
        write(ACTIONS_FILE, self.interface.to_json())?;
        write(TASK_FILE, self.task.to_file_text())?;
        if let Some(ctx) = &self.environment_context {
            write(CONTEXT_FILE, format!("{ctx}\n"))?;
        }
        Ok(())
    }
}
