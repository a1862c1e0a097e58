use std::path::Path;

use regex::Regex;
use serde::Deserialize;

use super::{final_user_text, BackendError, ChatBackend, ChatMessage};

/// A regex over the final user message and a reply template. The template
/// may reference captures as `$1` or `${name}`.
#[derive(Debug, Clone)]
pub struct ScriptedRule {
    pub matcher: Regex,
    pub response_template: String,
}

impl ScriptedRule {
    pub fn new(pattern: &str, response_template: impl Into<String>) -> Result<Self, BackendError> {
        let matcher = Regex::new(pattern).map_err(|e| BackendError::Config(format!("rule `{pattern}`: {e}")))?;
        Ok(ScriptedRule { matcher, response_template: response_template.into() })
    }

    fn apply(&self, text: &str) -> Option<String> {
        let caps = self.matcher.captures(text)?;
        let mut out = String::new();
        caps.expand(&self.response_template, &mut out);
        Some(out)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    id: Option<String>,
    rules: Vec<RuleEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    #[serde(rename = "match")]
    pattern: String,
    respond: String,
}

/// Deterministic stand-in for a model. Rules are tried in order; the first
/// one that matches the final user message produces the reply.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    id: String,
    rules: Vec<ScriptedRule>,
}

impl ScriptedBackend {
    pub fn new(id: impl Into<String>, rules: Vec<ScriptedRule>) -> Self {
        ScriptedBackend { id: id.into(), rules }
    }

    /// Builds from `(pattern, template)` pairs.
    pub fn from_pairs(id: impl Into<String>, pairs: &[(&str, &str)]) -> Result<Self, BackendError> {
        let rules = pairs
            .iter()
            .map(|(p, t)| ScriptedRule::new(p, *t))
            .collect::<Result<_, _>>()?;
        Ok(Self::new(id, rules))
    }

    /// Parses a rules document: `{"id": "...", "rules": [{"match": "...", "respond": "..."}]}`.
    pub fn from_json(source: &str) -> Result<Self, BackendError> {
        let file: RuleFile = serde_json::from_str(source).map_err(|e| BackendError::Config(e.to_string()))?;
        let rules = file
            .rules
            .iter()
            .map(|r| ScriptedRule::new(&r.pattern, r.respond.clone()))
            .collect::<Result<_, _>>()?;
        Ok(Self::new(file.id.unwrap_or_else(|| "scripted".to_string()), rules))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl ChatBackend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let text = final_user_text(messages).unwrap_or("");
        self.rules
            .iter()
            .find_map(|r| r.apply(text))
            .ok_or(BackendError::NoRuleMatched)
    }
}
