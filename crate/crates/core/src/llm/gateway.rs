use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::exchange::{ExchangeRecord, ExchangeRequest, FixtureStore};
use super::LlmError;

pub const DEFAULT_CREDENTIAL_ENV: &str = "ESAR_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Unreachable(String),
    Status(u16, String),
    Body(String),
}

/// HTTP POST of a JSON body; injected so tests can observe or forbid network use.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<Value, TransportError>;
}

/// Refuses every request.
#[derive(Debug, Default, Clone, Copy)]
pub struct OfflineTransport;

impl Transport for OfflineTransport {
    fn post_json(&self, url: &str, _: Option<&str>, _: &Value, _: Duration) -> Result<Value, TransportError> {
        Err(TransportError::Unreachable(format!("offline; refusing request to {url}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Live,
    Record,
    #[default]
    Replay,
}

/// Request/response shape of a provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderAdapter {
    /// `{model, prompt, attachment}` → `{text}`.
    #[default]
    Generic,
    /// `{model, messages: [{role, content}]}` → `choices[0].message.content`.
    ChatCompletion,
}

impl ProviderAdapter {
    pub fn request_body(self, req: &ExchangeRequest) -> Value {
        match self {
            ProviderAdapter::Generic => json!({
                "model": req.model,
                "prompt": req.prompt,
                "attachment": req.attachment,
            }),
            ProviderAdapter::ChatCompletion => {
                let mut content = req.prompt.clone();
                if let Some(a) = &req.attachment {
                    content.push_str(&format!("\n\n[attachment: {a}]"));
                }
                json!({
                    "model": req.model,
                    "messages": [{"role": "user", "content": content}],
                })
            }
        }
    }

    pub fn response_text(self, body: &Value) -> Result<String, LlmError> {
        let text = match self {
            ProviderAdapter::Generic => body.get("text"),
            ProviderAdapter::ChatCompletion => body.pointer("/choices/0/message/content"),
        };
        text.and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| LlmError::MalformedResponse(truncate(&body.to_string(), 200)))
    }
}

fn truncate(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        format!("{}…", s.chars().take(n).collect::<String>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub url: Option<String>,
    pub model: String,
    pub timeout_s: f64,
    pub mode: Mode,
    pub endpoint_id: String,
    /// Environment variable holding the bearer credential.
    pub credential_env: String,
    pub adapter: ProviderAdapter,
    pub fixtures_dir: Option<PathBuf>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            url: None,
            model: "default".into(),
            timeout_s: 300.0,
            mode: Mode::Replay,
            endpoint_id: "default".into(),
            credential_env: DEFAULT_CREDENTIAL_ENV.into(),
            adapter: ProviderAdapter::Generic,
            fixtures_dir: None,
        }
    }
}

type CredentialLookup = Box<dyn Fn(&str) -> Option<String> + Send + Sync>;
type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

/// Sends prompts according to the configured mode; one request in flight at a time.
pub struct Gateway {
    config: EndpointConfig,
    transport: Arc<dyn Transport>,
    store: Option<FixtureStore>,
    credential: CredentialLookup,
    clock: Clock,
    in_flight: Mutex<()>,
}

impl Gateway {
    pub fn new(config: EndpointConfig, transport: Arc<dyn Transport>) -> Self {
        let store = config.fixtures_dir.clone().map(FixtureStore::new);
        Self {
            config,
            transport,
            store,
            credential: Box::new(|name| std::env::var(name).ok().filter(|v| !v.is_empty())),
            clock: Box::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())),
            in_flight: Mutex::new(()),
        }
    }

    pub fn with_credential_lookup(mut self, f: impl Fn(&str) -> Option<String> + Send + Sync + 'static) -> Self {
        self.credential = Box::new(f);
        self
    }

    pub fn with_clock(mut self, f: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        self.clock = Box::new(f);
        self
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn request(&self, prompt: &str, attachment: Option<&str>) -> ExchangeRequest {
        ExchangeRequest {
            model: self.config.model.clone(),
            prompt: prompt.to_string(),
            attachment: attachment.map(str::to_string),
        }
    }

    fn store(&self) -> Result<&FixtureStore, LlmError> {
        self.store
            .as_ref()
            .ok_or_else(|| LlmError::Config("record/replay modes need a fixtures directory".into()))
    }

    pub fn send(&self, prompt_id: &str, prompt: &str, attachment: Option<&str>) -> Result<String, LlmError> {
        let req = self.request(prompt, attachment);
        let digest = req.digest();
        match self.config.mode {
            Mode::Replay => Ok(self.store()?.load(&digest)?.response),
            Mode::Live => self.call(&req),
            Mode::Record => {
                let store = self.store()?;
                let response = self.call(&req)?;
                store.save(&ExchangeRecord {
                    digest,
                    prompt_id: prompt_id.to_string(),
                    attachment: req.attachment.clone(),
                    response: response.clone(),
                    timestamp: (self.clock)(),
                    endpoint_id: self.config.endpoint_id.clone(),
                })?;
                Ok(response)
            }
        }
    }

    fn call(&self, req: &ExchangeRequest) -> Result<String, LlmError> {
        let url = self
            .config
            .url
            .as_deref()
            .ok_or_else(|| LlmError::Config("live/record modes need an endpoint url".into()))?;
        let key = (self.credential)(&self.config.credential_env)
            .ok_or_else(|| LlmError::MissingCredential(self.config.credential_env.clone()))?;
        let body = self.config.adapter.request_body(req);
        let timeout = Duration::from_secs_f64(self.config.timeout_s.max(0.001));
        let _guard = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        let response = self
            .transport
            .post_json(url, Some(&key), &body, timeout)
            .map_err(|e| match e {
                TransportError::Unreachable(m) => LlmError::EndpointUnreachable(m),
                TransportError::Status(code, m) => LlmError::EndpointUnreachable(format!("HTTP {code}: {}", truncate(&m, 200))),
                TransportError::Body(m) => LlmError::MalformedResponse(m),
            })?;
        self.config.adapter.response_text(&response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[derive(Default)]
    struct Canned {
        calls: AtomicUsize,
        seen_key: Mutex<Option<String>>,
    }

    impl Transport for Canned {
        fn post_json(&self, _: &str, bearer: Option<&str>, body: &Value, _: Duration) -> Result<Value, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            *self.seen_key.lock().unwrap() = bearer.map(str::to_string);
            Ok(json!({"text": format!("echo:{}", body["prompt"].as_str().unwrap())}))
        }
    }

    fn config(mode: Mode, dir: &std::path::Path) -> EndpointConfig {
        EndpointConfig {
            url: Some("http://127.0.0.1:9/v1".into()),
            mode,
            fixtures_dir: Some(dir.to_path_buf()),
            ..Default::default()
        }
    }

    fn key(_: &str) -> Option<String> {
        Some("secret".into())
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let t = Arc::new(Canned::default());
        let rec = Gateway::new(config(Mode::Record, dir.path()), t.clone())
            .with_credential_lookup(key)
            .with_clock(|| 7);
        let live = rec.send("a", "hello", Some("v.mp4")).unwrap();
        assert_eq!(live, "echo:hello");
        assert_eq!(t.seen_key.lock().unwrap().as_deref(), Some("secret"));

        let replay_t = Arc::new(Canned::default());
        let rep = Gateway::new(config(Mode::Replay, dir.path()), replay_t.clone());
        assert_eq!(rep.send("a", "hello", Some("v.mp4")).unwrap(), live);
        assert_eq!(replay_t.calls.load(Ordering::SeqCst), 0);
        assert!(matches!(rep.send("a", "other", None), Err(LlmError::FixtureMissing(_))));
    }

    #[test]
    fn live_errors() {
        let dir = tempfile::tempdir().unwrap();
        let g = Gateway::new(config(Mode::Live, dir.path()), Arc::new(OfflineTransport)).with_credential_lookup(|_| None);
        assert!(matches!(g.send("a", "p", None), Err(LlmError::MissingCredential(_))));
        let g = Gateway::new(config(Mode::Live, dir.path()), Arc::new(OfflineTransport)).with_credential_lookup(key);
        assert!(matches!(g.send("a", "p", None), Err(LlmError::EndpointUnreachable(_))));
    }

    #[test]
    fn adapters() {
        let req = ExchangeRequest {
            model: "m".into(),
            prompt: "p".into(),
            attachment: Some("v".into()),
        };
        let body = ProviderAdapter::ChatCompletion.request_body(&req);
        assert_eq!(body["messages"][0]["content"], "p\n\n[attachment: v]");
        let resp = json!({"choices": [{"message": {"content": "ok"}}]});
        assert_eq!(ProviderAdapter::ChatCompletion.response_text(&resp).unwrap(), "ok");
        assert!(matches!(
            ProviderAdapter::Generic.response_text(&resp),
            Err(LlmError::MalformedResponse(_))
        ));
    }
}
