//! Bounded, four-category environment memory and its curators.
//!
//! The memory is rewritten after every step rather than appended to. Two
//! curators produce it: a model-backed one ([`curate`]) and a deterministic
//! one ([`reference_curate`]) that also serves as the fallback when the
//! model's output cannot be parsed or overflows the budget.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::llm::{ChatBackend, ChatMessage};
use crate::record::StepRecord;

/// Relative direction as one of eight 45° sectors, clockwise from the front.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bearing(u8);

const BEARING_NAMES: [&str; 8] = [
    "front",
    "front-right",
    "right",
    "back-right",
    "back",
    "back-left",
    "left",
    "front-left",
];

impl Bearing {
    pub const FRONT: Bearing = Bearing(0);
    pub const FRONT_RIGHT: Bearing = Bearing(1);
    pub const RIGHT: Bearing = Bearing(2);
    pub const BACK_RIGHT: Bearing = Bearing(3);
    pub const BACK: Bearing = Bearing(4);
    pub const BACK_LEFT: Bearing = Bearing(5);
    pub const LEFT: Bearing = Bearing(6);
    pub const FRONT_LEFT: Bearing = Bearing(7);

    pub fn new(sector: u8) -> Option<Self> {
        (sector < 8).then_some(Bearing(sector))
    }

    pub fn sector(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Bearing> {
        (0..8).map(Bearing)
    }

    pub fn name(self) -> &'static str {
        BEARING_NAMES[self.0 as usize]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        BEARING_NAMES.iter().position(|n| *n == name).map(|i| Bearing(i as u8))
    }

    /// Shifts clockwise by `delta` sectors (negative is counter-clockwise).
    pub fn shifted(self, delta: i32) -> Self {
        Bearing((self.0 as i32 + delta).rem_euclid(8) as u8)
    }
}

impl fmt::Debug for Bearing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bearing({})", self.name())
    }
}

impl fmt::Display for Bearing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Bearing {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Bearing {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Bearing::from_name(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown bearing `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    RotateLeft,
    RotateRight,
    TranslateLeft,
    TranslateRight,
    TranslateForward,
    TranslateBackward,
    None,
}

impl MotionKind {
    pub const ALL: [MotionKind; 7] = [
        MotionKind::RotateLeft,
        MotionKind::RotateRight,
        MotionKind::TranslateLeft,
        MotionKind::TranslateRight,
        MotionKind::TranslateForward,
        MotionKind::TranslateBackward,
        MotionKind::None,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotionEvent {
    pub kind: MotionKind,
    pub rotation_sectors: u8,
}

impl MotionEvent {
    pub const NONE: MotionEvent = MotionEvent { kind: MotionKind::None, rotation_sectors: 0 };

    pub fn rotate_left(sectors: u8) -> Self {
        MotionEvent { kind: MotionKind::RotateLeft, rotation_sectors: sectors }
    }

    pub fn rotate_right(sectors: u8) -> Self {
        MotionEvent { kind: MotionKind::RotateRight, rotation_sectors: sectors }
    }

    pub fn translate(kind: MotionKind) -> Self {
        debug_assert!(!matches!(kind, MotionKind::RotateLeft | MotionKind::RotateRight));
        MotionEvent { kind, rotation_sectors: 0 }
    }

    pub fn inverse(self) -> Self {
        let kind = match self.kind {
            MotionKind::RotateLeft => MotionKind::RotateRight,
            MotionKind::RotateRight => MotionKind::RotateLeft,
            MotionKind::TranslateLeft => MotionKind::TranslateRight,
            MotionKind::TranslateRight => MotionKind::TranslateLeft,
            MotionKind::TranslateForward => MotionKind::TranslateBackward,
            MotionKind::TranslateBackward => MotionKind::TranslateForward,
            MotionKind::None => MotionKind::None,
        };
        MotionEvent { kind, ..self }
    }
}

/// Bearing of a static object after the robot performs `e`.
///
/// Turning left swings objects clockwise around the robot, turning right
/// counter-clockwise. A lateral step shifts the bearing by one sector away
/// from the direction of travel; forward and backward steps leave it
/// unchanged (objects are assumed to be far relative to one step).
pub fn update_bearing(b: Bearing, e: MotionEvent) -> Bearing {
    let k = e.rotation_sectors as i32;
    match e.kind {
        MotionKind::RotateLeft => b.shifted(k),
        MotionKind::RotateRight => b.shifted(-k),
        MotionKind::TranslateLeft => b.shifted(1),
        MotionKind::TranslateRight => b.shifted(-1),
        MotionKind::TranslateForward | MotionKind::TranslateBackward | MotionKind::None => b,
    }
}

/// Bearing, relative to the pose before `last_motion`, of an object that a
/// camera facing `camera_facing` saw right after `last_motion`.
pub fn infer_position_from_detection(camera_facing: Bearing, last_motion: MotionEvent) -> Bearing {
    update_bearing(camera_facing, last_motion.inverse())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceClass {
    Near,
    Mid,
    Far,
    Unknown,
}

impl DistanceClass {
    pub fn from_apparent_size(size: &str) -> Self {
        match size {
            "large" => DistanceClass::Near,
            "medium" => DistanceClass::Mid,
            "small" => DistanceClass::Far,
            _ => DistanceClass::Unknown,
        }
    }

    fn name(self) -> &'static str {
        match self {
            DistanceClass::Near => "near",
            DistanceClass::Mid => "mid",
            DistanceClass::Far => "far",
            DistanceClass::Unknown => "unknown",
        }
    }

    fn rank(self) -> u8 {
        match self {
            DistanceClass::Near => 0,
            DistanceClass::Mid => 1,
            DistanceClass::Far => 2,
            DistanceClass::Unknown => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub label: String,
    pub properties: String,
    pub bearing: Bearing,
    pub distance: DistanceClass,
    pub last_seen_step: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryNote {
    pub step: u32,
    pub text: String,
    /// `(action, outcome class)`; absent for notes written by a model.
    pub key: Option<(String, String)>,
    pub repeats: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhysicalEnvironment {
    pub scene: String,
    pub objects: Vec<ObjectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentMemory {
    pub physical_environment: PhysicalEnvironment,
    pub robot_state: String,
    pub curated_history: Vec<HistoryNote>,
    pub task_state: String,
    pub size_budget: usize,
    pub target_label: Option<String>,
    pub last_motion: MotionEvent,
    pub step: u32,
}

pub const DEFAULT_SIZE_BUDGET: usize = 8000;
/// Budgets below this cannot hold the four headers plus sentinels.
pub const MIN_SIZE_BUDGET: usize = 256;

pub const SECTION_HEADERS: [&str; 4] = [
    "[PHYSICAL ENVIRONMENT]",
    "[ROBOT STATE]",
    "[CURATED HISTORY]",
    "[TASK STATE]",
];
pub const EMPTY_SENTINEL: &str = "(empty)";

const SCENE_LIMIT: usize = 600;

impl EnvironmentMemory {
    pub fn new(size_budget: usize) -> Self {
        assert!(size_budget >= MIN_SIZE_BUDGET, "size budget {size_budget} below minimum {MIN_SIZE_BUDGET}");
        EnvironmentMemory {
            physical_environment: PhysicalEnvironment::default(),
            robot_state: String::new(),
            curated_history: Vec::new(),
            task_state: String::new(),
            size_budget,
            target_label: None,
            last_motion: MotionEvent::NONE,
            step: 0,
        }
    }

    pub fn with_task(mut self, objective: &str, target_label: Option<&str>) -> Self {
        self.target_label = target_label.map(str::to_string);
        self.task_state = format!("Objective: {objective}\nStatus: in progress");
        self.enforce_budget();
        self
    }

    pub fn object(&self, label: &str) -> Option<&ObjectEntry> {
        self.physical_environment.objects.iter().find(|o| o.label == label)
    }

    pub fn rendered_len(&self) -> usize {
        render_memory_text(self).chars().count()
    }

    /// Evicts oldest history, then the stalest/farthest objects, then
    /// truncates free text until the rendering fits the budget.
    pub fn enforce_budget(&mut self) {
        while self.rendered_len() > self.size_budget && !self.curated_history.is_empty() {
            self.curated_history.remove(0);
        }
        while self.rendered_len() > self.size_budget && !self.physical_environment.objects.is_empty() {
            let idx = self
                .physical_environment
                .objects
                .iter()
                .enumerate()
                .min_by_key(|(_, o)| (o.last_seen_step, std::cmp::Reverse(o.distance.rank())))
                .map(|(i, _)| i)
                .expect("non-empty");
            self.physical_environment.objects.remove(idx);
        }
        for field in 0..3 {
            let over = self.rendered_len().saturating_sub(self.size_budget);
            if over == 0 {
                break;
            }
            let text = match field {
                0 => &mut self.physical_environment.scene,
                1 => &mut self.robot_state,
                _ => &mut self.task_state,
            };
            let keep = text.chars().count().saturating_sub(over + 1);
            *text = truncate_chars(text, keep);
        }
        if self.rendered_len() > self.size_budget {
            self.physical_environment.scene.clear();
            self.robot_state.clear();
            self.task_state.clear();
        }
    }
}

fn truncate_chars(s: &str, keep: usize) -> String {
    if s.chars().count() <= keep {
        return s.to_string();
    }
    if keep == 0 {
        return String::new();
    }
    let mut out: String = s.chars().take(keep.saturating_sub(1)).collect();
    out.push('…');
    out
}

fn or_sentinel(s: &str) -> &str {
    if s.trim().is_empty() {
        EMPTY_SENTINEL
    } else {
        s
    }
}

pub fn render_memory_text(memory: &EnvironmentMemory) -> String {
    let mut out = String::new();
    let env = &memory.physical_environment;
    out.push_str(SECTION_HEADERS[0]);
    out.push('\n');
    if env.scene.trim().is_empty() && env.objects.is_empty() {
        out.push_str(EMPTY_SENTINEL);
        out.push('\n');
    } else {
        if !env.scene.trim().is_empty() {
            out.push_str(&format!("Scene: {}\n", env.scene));
        }
        if !env.objects.is_empty() {
            out.push_str("Objects:\n");
            for o in &env.objects {
                out.push_str(&format!(
                    "- {} | bearing {} | distance {} | last seen step {}",
                    o.label,
                    o.bearing,
                    o.distance.name(),
                    o.last_seen_step
                ));
                if !o.properties.is_empty() {
                    out.push_str(&format!(" | {}", o.properties));
                }
                out.push('\n');
            }
        }
    }
    out.push_str(SECTION_HEADERS[1]);
    out.push('\n');
    out.push_str(or_sentinel(&memory.robot_state));
    out.push('\n');
    out.push_str(SECTION_HEADERS[2]);
    out.push('\n');
    if memory.curated_history.is_empty() {
        out.push_str(EMPTY_SENTINEL);
        out.push('\n');
    } else {
        for note in &memory.curated_history {
            out.push_str("- ");
            out.push_str(&note.text);
            if note.repeats > 0 {
                out.push_str(&format!(" (repeated {}x, last at step {})", note.repeats, note.step));
            }
            out.push('\n');
        }
    }
    out.push_str(SECTION_HEADERS[3]);
    out.push('\n');
    out.push_str(or_sentinel(&memory.task_state));
    out
}

static DETECTION_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?:Yes|Also): ([^,;:.]+?) visible(?: \(partially occluded\))?, (left|center|right) of frame, (small|medium|large)",
    )
    .expect("valid regex")
});

#[derive(Debug, Clone, PartialEq)]
struct Detection {
    camera: String,
    label: String,
    size: String,
}

fn detections(record: &StepRecord) -> Vec<Detection> {
    record
        .observations
        .iter()
        .flat_map(|obs| {
            DETECTION_RE.captures_iter(&obs.text).map(move |c| Detection {
                camera: obs.camera_id.clone(),
                label: c[1].trim().to_string(),
                size: c[3].to_string(),
            })
        })
        .collect()
}

/// Deterministic rewrite of `memory` with the step in `record`.
pub fn reference_curate(memory: &EnvironmentMemory, record: &StepRecord) -> EnvironmentMemory {
    let mut next = memory.clone();
    let step = record.step;
    let executed = record.effective_motion();

    // Existing objects move with the robot.
    for obj in &mut next.physical_environment.objects {
        obj.bearing = update_bearing(obj.bearing, executed);
    }

    // Detections were made before this step's action executed.
    let found = detections(record);
    for det in &found {
        let facing = record.camera_facing(&det.camera).unwrap_or(Bearing::FRONT);
        let before_last = infer_position_from_detection(facing, memory.last_motion);
        let entry = ObjectEntry {
            label: det.label.clone(),
            properties: format!(
                "seen by {} camera; {} of the pose before the previous move",
                det.camera, before_last
            ),
            bearing: update_bearing(facing, executed),
            distance: DistanceClass::from_apparent_size(&det.size),
            last_seen_step: step,
        };
        let objects = &mut next.physical_environment.objects;
        match objects.iter_mut().find(|o| o.label == entry.label) {
            // Several cameras may see the same label in one step; keep the first.
            Some(existing) if existing.last_seen_step == step => {}
            Some(existing) => *existing = entry,
            None => objects.push(entry),
        }
    }

    let mut scene: Vec<String> = record
        .observations
        .iter()
        .map(|o| format!("[{}] {}", o.camera_id, o.text))
        .collect();
    if scene.is_empty() {
        scene.push("no observations this step".to_string());
    }
    next.physical_environment.scene = truncate_chars(&format!("step {step}: {}", scene.join(" ")), SCENE_LIMIT);

    // History is keyed on (action, outcome class) and rewritten in place on repeats.
    if let Some(decision) = &record.decision {
        let sighted = next
            .target_label
            .as_ref()
            .is_some_and(|t| found.iter().any(|d| d.label.eq_ignore_ascii_case(t)));
        let class = match (record.ack.as_ref().map(|a| a.status), sighted) {
            (Some(status), true) => format!("{}+target_seen", status.name()),
            (Some(status), false) => status.name().to_string(),
            (None, _) => "not_dispatched".to_string(),
        };
        let key = (decision.action.clone(), class.clone());
        match next.curated_history.iter_mut().find(|n| n.key.as_ref() == Some(&key)) {
            Some(note) => {
                note.repeats += 1;
                note.step = step;
            }
            None => next.curated_history.push(HistoryNote {
                step,
                text: format!("step {step}: {} -> {class}", decision.action),
                key: Some(key),
                repeats: 0,
            }),
        }
    }

    next.robot_state = format!(
        "After step {step}: {}",
        record.proprio.as_ref().map_or_else(|| "unknown".to_string(), |p| p.render())
    );

    if let Some(target) = next.target_label.clone() {
        let objective = next
            .task_state
            .lines()
            .next()
            .filter(|l| l.starts_with("Objective:"))
            .map(str::to_string)
            .unwrap_or_else(|| format!("Objective: locate the {target}"));
        let status = match next.object(&target) {
            Some(o) => format!(
                "Status: in progress; {target} last seen {} ({}) at step {}",
                o.bearing,
                o.distance.name(),
                o.last_seen_step
            ),
            None => format!("Status: in progress; {target} not yet located"),
        };
        next.task_state = format!("{objective}\n{status}");
    }

    next.last_motion = executed;
    next.step = step;
    next.enforce_budget();
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationOutcome {
    pub memory: EnvironmentMemory,
    pub fell_back: bool,
}

const CURATOR_SYSTEM: &str = "You are the memory curator of a robot control system. \
You maintain a structured environment memory. After each control step you receive the \
previous memory and the latest interaction record, and you REWRITE the memory: merge \
redundant facts, resolve contradictions in favour of the newest observation, drop details \
that no longer matter for the task, and keep object bearings relative to the robot's \
current pose (an object in front becomes front-right after the robot moves left). \
Answer with exactly four sections, each introduced by its header on its own line: \
[PHYSICAL ENVIRONMENT], [ROBOT STATE], [CURATED HISTORY], [TASK STATE]. \
List objects as `- label | bearing <bearing> | distance <near|mid|far|unknown> | last seen step <n>` \
and history notes as `- <note>`.";

fn curator_request(memory: &EnvironmentMemory, record: &StepRecord) -> Vec<ChatMessage> {
    let mut user = format!(
        "Previous memory:\n{}\n\nInteraction record for step {}:\n",
        render_memory_text(memory),
        record.step
    );
    if let Some(q) = &record.query {
        user.push_str(&format!("Visual query: {q}\n"));
    }
    for o in &record.observations {
        user.push_str(&format!("Observation [{}]: {}\n", o.camera_id, o.text));
    }
    if let Some(d) = &record.decision {
        user.push_str(&format!("Executed action: {}\n", d.action));
    }
    if let Some(a) = &record.ack {
        user.push_str(&format!("Outcome: {} ({})\n", a.status.name(), a.message));
    }
    if let Some(p) = &record.proprio {
        user.push_str(&format!("Proprioception: {}\n", p.render()));
    }
    user.push_str(&format!(
        "\nRewrite the memory now. The whole answer must stay under {} characters.",
        memory.size_budget
    ));
    vec![ChatMessage::system(CURATOR_SYSTEM), ChatMessage::user(user)]
}

static OBJECT_LINE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^- (.+?) \| bearing ([a-z-]+) \| distance (near|mid|far|unknown) \| last seen step (\d+)(?: \| (.*))?$")
        .expect("valid regex")
});

/// Parses model output into the four categories. `None` unless every header
/// is present exactly once and in order.
pub fn parse_memory_text(text: &str, template: &EnvironmentMemory) -> Option<EnvironmentMemory> {
    let mut positions = Vec::with_capacity(4);
    for header in SECTION_HEADERS {
        if text.matches(header).count() != 1 {
            return None;
        }
        positions.push(text.find(header)?);
    }
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        return None;
    }
    let body = |i: usize| -> &str {
        let start = positions[i] + SECTION_HEADERS[i].len();
        let end = positions.get(i + 1).copied().unwrap_or(text.len());
        text[start..end].trim()
    };
    let strip = |s: &str| if s == EMPTY_SENTINEL { String::new() } else { s.to_string() };

    let mut memory = template.clone();
    let mut scene = Vec::new();
    let mut objects = Vec::new();
    for line in body(0).lines().map(str::trim) {
        if line == "Objects:" || line == EMPTY_SENTINEL || line.is_empty() {
            continue;
        }
        if let Some(c) = OBJECT_LINE_RE.captures(line) {
            let dist = match &c[3] {
                "near" => DistanceClass::Near,
                "mid" => DistanceClass::Mid,
                "far" => DistanceClass::Far,
                _ => DistanceClass::Unknown,
            };
            objects.push(ObjectEntry {
                label: c[1].to_string(),
                properties: c.get(5).map_or(String::new(), |m| m.as_str().to_string()),
                bearing: Bearing::from_name(&c[2]).unwrap_or(Bearing::FRONT),
                distance: dist,
                last_seen_step: c[4].parse::<u32>().ok()?.min(template.step.max(1)),
            });
        } else {
            scene.push(line.strip_prefix("Scene: ").unwrap_or(line).to_string());
        }
    }
    memory.physical_environment = PhysicalEnvironment { scene: scene.join(" "), objects };
    memory.robot_state = strip(body(1));
    memory.curated_history = body(2)
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && *l != EMPTY_SENTINEL)
        .map(|l| HistoryNote {
            step: template.step,
            text: l.strip_prefix("- ").unwrap_or(l).to_string(),
            key: None,
            repeats: 0,
        })
        .collect();
    memory.task_state = strip(body(3));
    Some(memory)
}

/// Model-backed curation. Falls back to [`reference_curate`] when the reply
/// cannot be parsed after one reprompt, overflows the budget, or the backend
/// fails.
pub fn curate(memory: &EnvironmentMemory, record: &StepRecord, backend: &dyn ChatBackend) -> CurationOutcome {
    let mut template = memory.clone();
    template.step = record.step;
    template.last_motion = record.effective_motion();

    let mut messages = curator_request(memory, record);
    for attempt in 0..2 {
        let Ok(reply) = backend.complete(&messages) else {
            break;
        };
        if let Some(parsed) = parse_memory_text(&reply, &template) {
            if parsed.rendered_len() <= parsed.size_budget {
                return CurationOutcome { memory: parsed, fell_back: false };
            }
        }
        if attempt == 0 {
            messages.push(ChatMessage::assistant(reply));
            messages.push(ChatMessage::user(format!(
                "That answer was not usable. Reply with exactly the four sections {} in that order, \
                 under {} characters in total.",
                SECTION_HEADERS.join(", "),
                memory.size_budget
            )));
        }
    }
    CurationOutcome { memory: reference_curate(memory, record), fell_back: true }
}
