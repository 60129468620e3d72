use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::ReasonerError;

use super::{ReasonerRequest, ReasonerResponse, TextReasoner};

pub const URL_ENV: &str = "HEXAR_REASONER_URL";
pub const MODEL_ENV: &str = "HEXAR_REASONER_MODEL";

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Base URL; `/chat/completions` is appended unless already present.
    pub base_url: String,
    pub model: String,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn from_env() -> Result<Self, ReasonerError> {
        let base_url = std::env::var(URL_ENV)
            .map_err(|_| ReasonerError::Config(format!("{URL_ENV} is not set")))?;
        let model = std::env::var(MODEL_ENV)
            .map_err(|_| ReasonerError::Config(format!("{MODEL_ENV} is not set")))?;
        Ok(RemoteConfig {
            base_url,
            model,
            timeout: Duration::from_secs(120),
        })
    }

    pub fn endpoint(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_owned()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct Usage {
    completion_tokens: Option<usize>,
}

/// Client for an OpenAI-style chat-completion endpoint. The underlying HTTP
/// client pools connections and is safe to share between threads.
pub struct RemoteReasoner {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteReasoner {
    pub fn new(config: RemoteConfig) -> Result<Self, ReasonerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ReasonerError::Config(e.to_string()))?;
        Ok(RemoteReasoner { config, client })
    }

    pub fn from_env() -> Result<Self, ReasonerError> {
        Self::new(RemoteConfig::from_env()?)
    }

    fn body<'a>(&'a self, request: &'a ReasonerRequest) -> ChatRequest<'a> {
        ChatRequest {
            model: &self.config.model,
            messages: vec![
                ChatMessage {
                    role: "system",
                    content: &request.system_prompt,
                },
                ChatMessage {
                    role: "user",
                    content: &request.user_prompt,
                },
            ],
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        }
    }
}

impl TextReasoner for RemoteReasoner {
    fn complete(&self, request: &ReasonerRequest) -> Result<ReasonerResponse, ReasonerError> {
        if request.system_prompt.trim().is_empty() && request.user_prompt.trim().is_empty() {
            return Err(ReasonerError::EmptyPrompt);
        }
        let start = Instant::now();
        let resp = self
            .client
            .post(self.config.endpoint())
            .json(&self.body(request))
            .send()
            .map_err(map_transport)?;
        let status = resp.status();
        let text = resp.text().map_err(map_transport)?;
        if !status.is_success() {
            return Err(ReasonerError::Status {
                status: status.as_u16(),
                message: text,
            });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| ReasonerError::Malformed(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ReasonerError::Malformed("response has no choices".into()))?
            .message
            .content;
        let token_count = parsed
            .usage
            .and_then(|u| u.completion_tokens)
            .unwrap_or_else(|| content.split_whitespace().count());
        Ok(ReasonerResponse {
            text: content.trim().to_owned(),
            latency: start.elapsed().as_secs_f64(),
            token_count,
        })
    }
}

fn map_transport(e: reqwest::Error) -> ReasonerError {
    if e.is_timeout() {
        ReasonerError::Timeout(e.to_string())
    } else {
        ReasonerError::Connection(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::thread;

    /// Serves one canned HTTP response and hands back the raw request.
    fn serve_once(status: &str, body: &str) -> (String, thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let response = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        let handle = thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                let text = String::from_utf8_lossy(&buf);
                if let Some(split) = text.find("\r\n\r\n") {
                    let len = text[..split]
                        .lines()
                        .find_map(|l| {
                            l.to_ascii_lowercase()
                                .strip_prefix("content-length:")
                                .map(|v| v.trim().parse::<usize>().unwrap())
                        })
                        .unwrap_or(0);
                    if buf.len() >= split + 4 + len {
                        break;
                    }
                }
                if n == 0 {
                    break;
                }
            }
            stream.write_all(response.as_bytes()).unwrap();
            String::from_utf8_lossy(&buf).into_owned()
        });
        (format!("http://{addr}/v1"), handle)
    }

    fn client(url: String) -> RemoteReasoner {
        RemoteReasoner::new(RemoteConfig {
            base_url: url,
            model: "phi4".into(),
            timeout: Duration::from_secs(5),
        })
        .unwrap()
    }

    #[test]
    fn parses_first_choice_and_keeps_temperature() {
        let (url, handle) = serve_once(
            "200 OK",
            r#"{"choices":[{"message":{"role":"assistant","content":" navigation "}}],"usage":{"completion_tokens":1}}"#,
        );
        let r = client(url);
        let resp = r.complete(&ReasonerRequest::new("sys", "user")).unwrap();
        assert_eq!(resp.text, "navigation");
        assert_eq!(resp.token_count, 1);
        assert!(resp.latency >= 0.0);

        let raw = handle.join().unwrap();
        assert!(raw.starts_with("POST /v1/chat/completions"));
        let body: serde_json::Value =
            serde_json::from_str(&raw[raw.find("\r\n\r\n").unwrap() + 4..]).unwrap();
        assert_eq!(body["model"], "phi4");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["max_tokens"], 512);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "user");
    }

    #[test]
    fn http_error_carries_endpoint_message() {
        let (url, handle) = serve_once("503 Service Unavailable", r#"{"error":"model loading"}"#);
        let err = client(url)
            .complete(&ReasonerRequest::new("sys", "user"))
            .unwrap_err();
        handle.join().unwrap();
        match err {
            ReasonerError::Status { status, message } => {
                assert_eq!(status, 503);
                assert!(message.contains("model loading"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn connection_refused_is_reported() {
        let port = TcpListener::bind("127.0.0.1:0")
            .unwrap()
            .local_addr()
            .unwrap()
            .port();
        let err = client(format!("http://127.0.0.1:{port}"))
            .complete(&ReasonerRequest::new("sys", "user"))
            .unwrap_err();
        assert!(matches!(err, ReasonerError::Connection(_)), "{err:?}");
    }

    #[test]
    fn endpoint_suffix_handling() {
        let mut cfg = RemoteConfig {
            base_url: "http://h:1/v1/".into(),
            model: "m".into(),
            timeout: Duration::from_secs(1),
        };
        assert_eq!(cfg.endpoint(), "http://h:1/v1/chat/completions");
        cfg.base_url = "http://h:1/v1/chat/completions".into();
        assert_eq!(cfg.endpoint(), "http://h:1/v1/chat/completions");
    }
}
