//! Chat-completion client over HTTP.

use std::path::{Path, PathBuf};
use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};
use trig_core::pipeline::{ChatClient, ChatError, ChatRequest};
use ureq::Agent;

pub const TOKEN_ENV: &str = "TRIG_LLM_TOKEN";

#[derive(Clone)]
pub struct HttpChatClient {
    agent: Agent,
    url: String,
    model: String,
    token: Option<String>,
    image_root: PathBuf,
}

impl HttpChatClient {
    /// `endpoint` is the API base; `/chat/completions` is appended unless present.
    pub fn new(endpoint: &str, model: &str, timeout: Duration, token: Option<String>, image_root: &Path) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        Self {
            agent,
            url,
            model: model.to_string(),
            token,
            image_root: image_root.to_path_buf(),
        }
    }

    fn image_url(&self, path: &str) -> Result<String, ChatError> {
        let full = self.image_root.join(path);
        let bytes = std::fs::read(&full).map_err(|e| ChatError::fatal(format!("{}: {e}", full.display())))?;
        let mime = match full
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("jpg" | "jpeg") => "image/jpeg",
            Some("webp") => "image/webp",
            Some("gif") => "image/gif",
            _ => "image/png",
        };
        Ok(format!(
            "data:{mime};base64,{}",
            base64::engine::general_purpose::STANDARD.encode(bytes)
        ))
    }

    pub fn body(&self, req: &ChatRequest) -> Result<Value, ChatError> {
        let user = match &req.image {
            Some(path) => json!([
                {"type": "text", "text": req.user},
                {"type": "image_url", "image_url": {"url": self.image_url(path)?}},
            ]),
            None => json!(req.user),
        };
        Ok(json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": user},
            ],
        }))
    }
}

pub fn extract_content(body: &Value) -> Option<String> {
    let content = &body["choices"][0]["message"]["content"];
    match content {
        Value::String(s) => Some(s.clone()),
        // content-part arrays: concatenate the text parts
        Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p["text"].as_str())
                .collect::<Vec<_>>()
                .join(""),
        ),
        _ => None,
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&mut self, req: &ChatRequest) -> Result<String, ChatError> {
        let body = self.body(req)?;
        let mut call = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            call = call.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = call.send_json(&body).map_err(|e| match e {
            ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed => {
                ChatError::transient(e.to_string())
            }
            other => ChatError::fatal(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ChatError::transient(format!("reading response: {e}")))?;
        if status == 429 || status >= 500 {
            return Err(ChatError::transient(format!("HTTP {status}: {}", snippet(&text))));
        }
        if !(200..300).contains(&status) {
            return Err(ChatError::fatal(format!("HTTP {status}: {}", snippet(&text))));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ChatError::fatal(format!("bad JSON: {e}")))?;
        extract_content(&v).ok_or_else(|| ChatError::fatal(format!("no message content in {}", snippet(&text))))
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_and_body_shape() {
        let c = HttpChatClient::new("http://x/v1/", "m", Duration::from_secs(1), None, Path::new("."));
        assert_eq!(c.url, "http://x/v1/chat/completions");
        let req = ChatRequest {
            system: "s".into(),
            user: "u".into(),
            image: None,
        };
        let b = c.body(&req).unwrap();
        assert_eq!(b["messages"][1]["content"], "u");
        assert_eq!(b["model"], "m");
    }

    #[test]
    fn content_extraction() {
        let v = json!({"choices": [{"message": {"content": "3, 7"}}]});
        assert_eq!(extract_content(&v).as_deref(), Some("3, 7"));
        let parts = json!({"choices": [{"message": {"content": [{"type": "text", "text": "YES"}]}}]});
        assert_eq!(extract_content(&parts).as_deref(), Some("YES"));
        assert_eq!(extract_content(&json!({})), None);
    }
}
