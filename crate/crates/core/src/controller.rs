//! The controller: prompt composition, visual query generation and action
//! selection.
//!
//! The controller keeps no state between steps. Every call receives a
//! freshly composed system prompt made of six labeled sections, see
//! [`SECTION_LABELS`].
//!
//! Model replies are parsed with single-line markers:
//!
//! ```text
//! ...free-form reasoning...
//! QUERY: <one question>
//! ```
//!
//! ```text
//! ...free-form reasoning...
//! ACTION: <name>
//! PARAMS: key=value, key=value      (optional)
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{validate_action, ActionDef, ActionHistory, ActionInterface, ConfigError, EmbodimentConfig, ProprioState};
use crate::llm::{self, BackendError, ChatBackend, ChatMessage};
use crate::memory::{render_memory_text, EnvironmentMemory};
use crate::monitor::MonitorObservation;

pub const SECTION_LABELS: [&str; 6] = [
    "## ROBOT DESCRIPTION",
    "## ACTION INTERFACE",
    "## ENVIRONMENT MEMORY",
    "## PROPRIOCEPTIVE STATE",
    "## ACTION HISTORY",
    "## TASK",
];

pub const QUERY_MARKER: &str = "QUERY:";
pub const ACTION_MARKER: &str = "ACTION:";
pub const PARAMS_MARKER: &str = "PARAMS:";

pub const NO_HISTORY_SENTINEL: &str = "No actions taken yet.";

const PREAMBLE: &str = "You are the controller of a robot. You cannot see; camera monitors answer \
your questions in natural language. Each step you first ask one targeted visual question, then \
read the monitors' answers and choose exactly one admissible action. Think step by step before \
answering. Use the context below.";

pub const QUERY_INSTRUCTION: &str = "Step {step}. Decide what you need to know from the cameras now. \
Reason briefly, then finish with one line of the form `QUERY: <one question for the camera monitors>`.";

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("no `QUERY:` line in the reply, even after a reprompt")]
    QueryParseFailure,
    #[error("no `ACTION:` line in the reply, even after a reprompt")]
    ActionParseFailure,
    #[error(transparent)]
    UnknownAction(ConfigError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualQuery(String);

impl VisualQuery {
    /// Trims `text`; `None` when empty or spanning several lines.
    pub fn new(text: &str) -> Option<Self> {
        let t = text.trim();
        (!t.is_empty() && !t.contains('\n')).then(|| VisualQuery(t.to_string()))
    }

    pub fn text(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedPrompt {
    pub sections: Vec<(String, String)>,
}

impl ComposedPrompt {
    pub fn render(&self) -> String {
        let mut out = String::from(PREAMBLE);
        for (label, body) in &self.sections {
            out.push_str("\n\n");
            out.push_str(label);
            out.push('\n');
            out.push_str(body);
        }
        out
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }

    pub fn section(&self, label: &str) -> Option<&str> {
        self.sections.iter().find(|(l, _)| l == label).map(|(_, b)| b.as_str())
    }
}

fn render_interface(interface: &ActionInterface) -> String {
    let mut out = String::new();
    for a in &interface.actions {
        out.push_str(&format!("- {}: {}", a.name, a.description));
        if !a.parameters.is_empty() {
            let params: Vec<String> = a
                .parameters
                .iter()
                .map(|p| {
                    let unit = if p.unit.is_empty() { String::new() } else { format!(" {}", p.unit) };
                    format!("{} in [{}, {}]{unit}, default {}", p.name, p.min, p.max, p.default)
                })
                .collect();
            out.push_str(&format!(" (parameters: {})", params.join("; ")));
        }
        out.push('\n');
    }
    out.push_str("Emit exactly one action per step.");
    out
}

fn render_history(history: &ActionHistory) -> String {
    if history.is_empty() {
        return NO_HISTORY_SENTINEL.to_string();
    }
    history
        .entries()
        .iter()
        .map(|e| {
            if e.params.is_empty() {
                format!("{}. {}", e.step, e.action)
            } else {
                let p: Vec<String> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("{}. {} ({})", e.step, e.action, p.join(", "))
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_task(config: &EmbodimentConfig) -> String {
    let task = &config.task;
    let mut out = task.objective.clone();
    if let Some(t) = &task.target_label {
        out.push_str(&format!("\nTarget: {t}"));
    }
    if let Some(s) = &task.success_hint {
        out.push_str(&format!("\nDone when: {s}"));
    }
    out
}

pub fn compose_system_prompt(
    config: &EmbodimentConfig,
    memory: &EnvironmentMemory,
    proprio: &ProprioState,
    history: &ActionHistory,
) -> ComposedPrompt {
    let mut robot = config.robot.text.clone();
    let cams: Vec<String> = config
        .robot
        .cameras
        .iter()
        .map(|c| format!("{} (facing {})", c.id, c.facing))
        .collect();
    robot.push_str(&format!("\nCameras: {}", cams.join(", ")));
    if let Some(ctx) = &config.environment_context {
        robot.push_str(&format!("\nEnvironment: {ctx}"));
    }
    let bodies = [
        robot,
        render_interface(&config.interface),
        render_memory_text(memory),
        proprio.render(),
        render_history(history),
        render_task(config),
    ];
    ComposedPrompt {
        sections: SECTION_LABELS
            .iter()
            .zip(bodies)
            .map(|(l, b)| (l.to_string(), b))
            .collect(),
    }
}

/// Text after the last `marker` line; an empty remainder takes the next line.
fn extract_marked(reply: &str, marker: &str) -> Option<(usize, String)> {
    let lines: Vec<&str> = reply.lines().collect();
    let idx = lines.iter().rposition(|l| l.trim_start().starts_with(marker))?;
    let rest = lines[idx].trim_start()[marker.len()..].trim();
    if !rest.is_empty() {
        return Some((idx, rest.to_string()));
    }
    lines
        .get(idx + 1)
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .map(|l| (idx, l.to_string()))
}

pub fn parse_query(reply: &str) -> Option<VisualQuery> {
    extract_marked(reply, QUERY_MARKER).and_then(|(_, q)| VisualQuery::new(&q))
}

pub fn generate_visual_query(
    prompt: &ComposedPrompt,
    step: u32,
    backend: &dyn ChatBackend,
) -> Result<(VisualQuery, bool), ControllerError> {
    let mut messages = vec![
        ChatMessage::system(prompt.render()),
        ChatMessage::user(QUERY_INSTRUCTION.replace("{step}", &step.to_string())),
    ];
    for attempt in 0..2 {
        let reply = llm::complete(&messages, backend)?.response_text;
        if let Some(q) = parse_query(&reply) {
            return Ok((q, attempt > 0));
        }
        messages.push(ChatMessage::assistant(reply));
        messages.push(ChatMessage::user(
            "Your reply did not contain a line starting with `QUERY:`. Answer again and end with \
             `QUERY: <one question>`.",
        ));
    }
    Err(ControllerError::QueryParseFailure)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerDecision {
    pub reasoning: String,
    pub action: String,
    pub parameters: BTreeMap<String, f64>,
    /// Notes about clamped, defaulted-away or ignored parameters.
    pub adjustments: Vec<String>,
    pub reprompted: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct RawDecision {
    reasoning: String,
    action: String,
    params: Vec<(String, String)>,
}

fn parse_raw_decision(reply: &str) -> Option<RawDecision> {
    let (idx, action) = extract_marked(reply, ACTION_MARKER)?;
    let action = action
        .split_whitespace()
        .next()?
        .trim_matches(|c: char| c == '`' || c == '"' || c == '\'' || c == '.' || c == ',')
        .to_string();
    let params = extract_marked(reply, PARAMS_MARKER)
        .filter(|(pidx, _)| *pidx > idx)
        .map(|(_, p)| {
            p.split(',')
                .filter_map(|kv| kv.split_once('='))
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .collect()
        })
        .unwrap_or_default();
    let reasoning: Vec<&str> = reply.lines().take(idx).collect();
    let reasoning = reasoning.join("\n").trim().to_string();
    Some(RawDecision {
        reasoning: if reasoning.is_empty() { "(no reasoning given)".to_string() } else { reasoning },
        action,
        params,
    })
}

/// Fills omitted parameters with defaults and clamps out-of-range values.
pub fn resolve_parameters(def: &ActionDef, given: &[(String, String)]) -> (BTreeMap<String, f64>, Vec<String>) {
    let mut values = BTreeMap::new();
    let mut notes = Vec::new();
    for (k, v) in given {
        match (def.param(k), v.parse::<f64>()) {
            (Some(p), Ok(x)) if x.is_finite() => {
                let clamped = x.clamp(p.min, p.max);
                if clamped != x {
                    notes.push(format!("{}.{k}={x} clamped to {clamped}", def.name));
                }
                values.insert(k.clone(), clamped);
            }
            (Some(_), _) => notes.push(format!("{}.{k}: unparseable value `{v}` replaced by default", def.name)),
            (None, _) => notes.push(format!("{}: ignored unknown parameter `{k}`", def.name)),
        }
    }
    for p in &def.parameters {
        values.entry(p.name.clone()).or_insert(p.default);
    }
    (values, notes)
}

fn action_instruction(query: &VisualQuery, observations: &[MonitorObservation], interface: &ActionInterface) -> String {
    let mut out = format!("Visual query: {}\nMonitor observations:\n", query.text());
    for o in observations {
        out.push_str(&format!("[{}] {}\n", o.camera_id, o.text));
    }
    out.push_str(&format!(
        "Admissible actions: {}.\nReason over the observations, then finish with `ACTION: <name>` \
         and optionally `PARAMS: key=value, ...`.",
        interface.names().join(", ")
    ));
    out
}

pub fn select_action(
    prompt: &ComposedPrompt,
    query: &VisualQuery,
    observations: &[MonitorObservation],
    backend: &dyn ChatBackend,
    interface: &ActionInterface,
) -> Result<ControllerDecision, ControllerError> {
    let mut messages = vec![
        ChatMessage::system(prompt.render()),
        ChatMessage::user(action_instruction(query, observations, interface)),
    ];
    let mut last_err = ControllerError::ActionParseFailure;
    for attempt in 0..2 {
        let reply = llm::complete(&messages, backend)?.response_text;
        let problem = match parse_raw_decision(&reply) {
            Some(raw) => match validate_action(&raw.action, interface) {
                Ok(def) => {
                    let (parameters, adjustments) = resolve_parameters(def, &raw.params);
                    return Ok(ControllerDecision {
                        reasoning: raw.reasoning,
                        action: def.name.clone(),
                        parameters,
                        adjustments,
                        reprompted: attempt > 0,
                    });
                }
                Err(e) => {
                    let msg = format!("`{}` is not an admissible action.", raw.action);
                    last_err = ControllerError::UnknownAction(e);
                    msg
                }
            },
            None => {
                last_err = ControllerError::ActionParseFailure;
                "Your reply did not contain a line starting with `ACTION:`.".to_string()
            }
        };
        messages.push(ChatMessage::assistant(reply));
        messages.push(ChatMessage::user(format!(
            "{problem} Choose exactly one of: {}. End with `ACTION: <name>`.",
            interface.names().join(", ")
        )));
    }
    Err(last_err)
}

/// Thin handle bundling the controller's backend. Holds no per-step state.
#[derive(Clone)]
pub struct Controller {
    backend: Arc<dyn ChatBackend>,
}

impl Controller {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Controller { backend }
    }

    pub fn query(&self, prompt: &ComposedPrompt, step: u32) -> Result<(VisualQuery, bool), ControllerError> {
        generate_visual_query(prompt, step, &*self.backend)
    }

    pub fn decide(
        &self,
        prompt: &ComposedPrompt,
        query: &VisualQuery,
        observations: &[MonitorObservation],
        interface: &ActionInterface,
    ) -> Result<ControllerDecision, ControllerError> {
        select_action(prompt, query, observations, &*self.backend, interface)
    }
}
