use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatProvider, ChatRequest, ChatResponse, LlmError};

/// Endpoint settings for an OpenAI-compatible `/chat/completions` API.
#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    pub name: String,
    pub endpoint: String,
    pub api_key: String,
    pub timeout: Duration,
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self { config, agent }
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let body = json!({
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut response = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 {
            return Err(LlmError::RateLimited(format!("HTTP 429 from {}", self.config.name)));
        }
        if status >= 500 {
            // Gateways return 502/503 while a provider is flapping; retry those.
            return Err(LlmError::Transport(format!("HTTP {status} from {}", self.config.name)));
        }
        if status >= 400 {
            let body = response.body_mut().read_to_string().unwrap_or_default();
            return Err(LlmError::Provider { status, body });
        }
        let parsed: CompletionBody = response
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Provider {
                status,
                body: format!("unreadable completion body: {e}"),
            })?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Provider {
                status,
                body: "completion has no choices".into(),
            })?;
        Ok(ChatResponse::for_prompt(&request.prompt, text))
    }

    fn name(&self) -> &str {
        &self.config.name
    }
}
