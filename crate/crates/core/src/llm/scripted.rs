use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatRequest, ChatResponse, LlmError};

/// What a script entry produces when it fires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptReply {
    Text(String),
    RateLimited,
    Transport,
    ProviderError(u16),
}

/// One canned exchange. `match_text` is a substring the prompt must contain;
/// the empty string matches every prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEntry {
    pub match_text: String,
    pub reply: ScriptReply,
}

impl ScriptEntry {
    pub fn text(match_text: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            match_text: match_text.into(),
            reply: ScriptReply::Text(response.into()),
        }
    }

    pub fn error(match_text: impl Into<String>, reply: ScriptReply) -> Self {
        Self {
            match_text: match_text.into(),
            reply,
        }
    }
}

/// On-disk form: `{"match": "...", "response": "..."}`, or
/// `{"match": "...", "error": "rate_limited" | "transport" | 503}`.
#[derive(Debug, Serialize, Deserialize)]
struct ScriptFileEntry {
    #[serde(rename = "match", default)]
    match_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<serde_json::Value>,
}

#[derive(Debug, Default)]
struct ScriptState {
    pending: Vec<ScriptEntry>,
    call_log: Vec<ChatRequest>,
}

/// Deterministic replay backend.
///
/// Each call consumes the first pending entry whose matcher occurs in the
/// prompt. Calls are serialized behind a mutex, so the same request sequence
/// always yields the same response sequence.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    state: Mutex<ScriptState>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self {
            state: Mutex::new(ScriptState {
                pending: entries,
                call_log: Vec::new(),
            }),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        Self::parse_entries(text).map(Self::new)
    }

    /// Script file entries without building a backend, e.g. to replay one
    /// script several times.
    pub fn parse_entries(text: &str) -> Result<Vec<ScriptEntry>, String> {
        let raw: Vec<ScriptFileEntry> =
            serde_json::from_str(text).map_err(|e| format!("invalid script: {e}"))?;
        let mut entries = Vec::with_capacity(raw.len());
        for (i, item) in raw.into_iter().enumerate() {
            let reply = match (item.response, item.error) {
                (Some(text), None) => ScriptReply::Text(text),
                (None, Some(serde_json::Value::String(kind))) => match kind.as_str() {
                    "rate_limited" => ScriptReply::RateLimited,
                    "transport" => ScriptReply::Transport,
                    other => return Err(format!("entry {i}: unknown error kind `{other}`")),
                },
                (None, Some(serde_json::Value::Number(n))) => {
                    let status = n
                        .as_u64()
                        .and_then(|s| u16::try_from(s).ok())
                        .ok_or_else(|| format!("entry {i}: bad status {n}"))?;
                    ScriptReply::ProviderError(status)
                }
                _ => {
                    return Err(format!(
                        "entry {i}: exactly one of `response` or `error` is required"
                    ))
                }
            };
            entries.push(ScriptEntry {
                match_text: item.match_text,
                reply,
            });
        }
        Ok(entries)
    }

    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read script {}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn to_json(entries: &[ScriptEntry]) -> String {
        let raw: Vec<ScriptFileEntry> = entries
            .iter()
            .map(|e| {
                let (response, error) = match &e.reply {
                    ScriptReply::Text(t) => (Some(t.clone()), None),
                    ScriptReply::RateLimited => (None, Some("rate_limited".into())),
                    ScriptReply::Transport => (None, Some("transport".into())),
                    ScriptReply::ProviderError(s) => (None, Some((*s).into())),
                };
                ScriptFileEntry {
                    match_text: e.match_text.clone(),
                    response,
                    error,
                }
            })
            .collect();
        serde_json::to_string_pretty(&raw).expect("script serializes")
    }

    pub fn push(&self, entry: ScriptEntry) {
        self.state.lock().expect("script lock").pending.push(entry);
    }

    pub fn call_log(&self) -> Vec<ChatRequest> {
        self.state.lock().expect("script lock").call_log.clone()
    }

    pub fn call_count(&self) -> usize {
        self.state.lock().expect("script lock").call_log.len()
    }

    pub fn remaining(&self) -> usize {
        self.state.lock().expect("script lock").pending.len()
    }
}

impl ChatProvider for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut state = self.state.lock().expect("script lock");
        state.call_log.push(request.clone());
        let Some(index) = state
            .pending
            .iter()
            .position(|e| request.prompt.contains(&e.match_text))
        else {
            return Err(LlmError::ScriptExhausted {
                prompt_head: request.prompt.chars().take(60).collect(),
            });
        };
        let entry = state.pending.remove(index);
        match entry.reply {
            ScriptReply::Text(text) => Ok(ChatResponse::for_prompt(&request.prompt, text)),
            ScriptReply::RateLimited => Err(LlmError::RateLimited("scripted".into())),
            ScriptReply::Transport => Err(LlmError::Transport("scripted".into())),
            ScriptReply::ProviderError(status) => Err(LlmError::Provider {
                status,
                body: "scripted".into(),
            }),
        }
    }

    fn name(&self) -> &str {
        "scripted"
    }
}
