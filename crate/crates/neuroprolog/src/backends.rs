//! Pluggable model backends behind one `generate` interface: a remote
//! chat-completions endpoint, a deterministic scripted table for tests, and
//! transcript record/replay for reproducing runs offline.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompts::PromptBundle;

/// Environment variable holding the remote API key.
pub const API_KEY_ENV: &str = "NEUROPROLOG_API_KEY";

/// Decoding controls. Faithful evaluation runs use greedy decoding
/// (temperature 0) so the pipeline is deterministic given the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 0.0,
            max_tokens: 1024,
        }
    }
}

/// One canned response keyed by (problem, attempt).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub problem_id: String,
    pub attempt: u32,
    pub response: String,
}

/// One recorded generate call, keyed by a content hash of the full prompt so
/// replays detect any pipeline drift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub problem_id: String,
    pub attempt: u32,
    pub prompt_digest: String,
    pub response: String,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempts: {detail}")]
    BackendUnavailable { attempts: u32, detail: String },
    #[error("no script entry for problem {problem_id:?} attempt {attempt}")]
    ScriptMiss { problem_id: String, attempt: u32 },
    #[error("no transcript record for prompt digest {digest} (problem {problem_id:?} attempt {attempt}); the pipeline diverged from the recorded run")]
    ReplayMismatch {
        digest: String,
        problem_id: String,
        attempt: u32,
    },
    #[error("transcript I/O failure: {0}")]
    TranscriptIo(String),
}

pub trait ModelBackend: Send + Sync {
    fn generate(&self, prompt: &PromptBundle, params: &DecodingParams)
        -> Result<String, BackendError>;
}

impl<B: ModelBackend + ?Sized> ModelBackend for Box<B> {
    fn generate(
        &self,
        prompt: &PromptBundle,
        params: &DecodingParams,
    ) -> Result<String, BackendError> {
        (**self).generate(prompt, params)
    }
}

/// Stable content hash of a prompt text (lowercase hex SHA-256).
pub fn prompt_digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex_encode(&hasher.finalize())
}

fn hex_encode(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Deterministic backend answering from a (problem_id, attempt) table.
pub struct ScriptedBackend {
    entries: HashMap<(String, u32), String>,
}

impl ScriptedBackend {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let entries = entries
            .into_iter()
            .map(|e| ((e.problem_id, e.attempt), e.response))
            .collect();
        ScriptedBackend { entries }
    }

    /// Load a JSON Lines script file.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let entry: ScriptEntry = serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            entries.push(entry);
        }
        Ok(ScriptedBackend::new(entries))
    }
}

impl ModelBackend for ScriptedBackend {
    fn generate(
        &self,
        prompt: &PromptBundle,
        _params: &DecodingParams,
    ) -> Result<String, BackendError> {
        self.entries
            .get(&(prompt.problem_id.clone(), prompt.attempt))
            .cloned()
            .ok_or_else(|| BackendError::ScriptMiss {
                problem_id: prompt.problem_id.clone(),
                attempt: prompt.attempt,
            })
    }
}

/// Remote OpenAI-compatible chat-completions backend. Sends the prompt as a
/// single user message; retries transient failures (transport errors and
/// 5xx) with exponential backoff, while 4xx responses are terminal.
pub struct HttpBackend {
    base_url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    max_attempts: u32,
    backoff: Duration,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key: std::env::var(API_KEY_ENV).ok(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("HTTP client construction"),
            max_attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }

    /// Shrink the retry backoff (tests exercising the retry path).
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn request_once(
        &self,
        prompt: &PromptBundle,
        params: &DecodingParams,
    ) -> Result<String, TransientOrFatal> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let mut request = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| TransientOrFatal::Transient(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(TransientOrFatal::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(TransientOrFatal::Fatal(format!("HTTP {status}: {detail}")));
        }
        let parsed: ChatCompletionResponse = response
            .json()
            .map_err(|e| TransientOrFatal::Fatal(format!("malformed response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| TransientOrFatal::Fatal("response held no choices".into()))
    }
}

enum TransientOrFatal {
    Transient(String),
    Fatal(String),
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl ModelBackend for HttpBackend {
    fn generate(
        &self,
        prompt: &PromptBundle,
        params: &DecodingParams,
    ) -> Result<String, BackendError> {
        let mut last_detail = String::new();
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.request_once(prompt, params) {
                Ok(text) => return Ok(text),
                Err(TransientOrFatal::Fatal(detail)) => {
                    return Err(BackendError::BackendUnavailable {
                        attempts: attempt + 1,
                        detail,
                    })
                }
                Err(TransientOrFatal::Transient(detail)) => last_detail = detail,
            }
        }
        Err(BackendError::BackendUnavailable {
            attempts: self.max_attempts,
            detail: last_detail,
        })
    }
}

/// Wraps another backend and appends every generate call to a JSON Lines
/// transcript for later replay.
pub struct RecordingBackend<B> {
    inner: B,
    sink: Mutex<std::io::BufWriter<std::fs::File>>,
}

impl<B: ModelBackend> RecordingBackend<B> {
    pub fn create(inner: B, transcript_path: &Path) -> std::io::Result<Self> {
        let file = std::fs::File::create(transcript_path)?;
        Ok(RecordingBackend {
            inner,
            sink: Mutex::new(std::io::BufWriter::new(file)),
        })
    }
}

impl<B: ModelBackend> ModelBackend for RecordingBackend<B> {
    fn generate(
        &self,
        prompt: &PromptBundle,
        params: &DecodingParams,
    ) -> Result<String, BackendError> {
        let start = Instant::now();
        let response = self.inner.generate(prompt, params)?;
        let record = TranscriptRecord {
            problem_id: prompt.problem_id.clone(),
            attempt: prompt.attempt,
            prompt_digest: prompt_digest(&prompt.text),
            response: response.clone(),
            latency_ms: start.elapsed().as_millis() as u64,
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| BackendError::TranscriptIo(e.to_string()))?;
        let mut sink = self
            .sink
            .lock()
            .map_err(|_| BackendError::TranscriptIo("transcript lock poisoned".into()))?;
        writeln!(sink, "{line}").map_err(|e| BackendError::TranscriptIo(e.to_string()))?;
        sink.flush()
            .map_err(|e| BackendError::TranscriptIo(e.to_string()))?;
        Ok(response)
    }
}

/// Replays a recorded transcript by prompt digest; any unseen prompt is a
/// hard mismatch, signaling pipeline nondeterminism.
pub struct ReplayBackend {
    by_digest: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut by_digest = HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let record: TranscriptRecord = serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            if let Some(previous) =
                by_digest.insert(record.prompt_digest.clone(), record.response.clone())
            {
                if previous != record.response {
                    return Err(std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!(
                            "transcript holds conflicting responses for digest {}",
                            record.prompt_digest
                        ),
                    ));
                }
            }
        }
        Ok(ReplayBackend { by_digest })
    }
}

impl ModelBackend for ReplayBackend {
    fn generate(
        &self,
        prompt: &PromptBundle,
        _params: &DecodingParams,
    ) -> Result<String, BackendError> {
        let digest = prompt_digest(&prompt.text);
        self.by_digest
            .get(&digest)
            .cloned()
            .ok_or(BackendError::ReplayMismatch {
                digest,
                problem_id: prompt.problem_id.clone(),
                attempt: prompt.attempt,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::PromptKind;

    fn bundle(problem_id: &str, attempt: u32, text: &str) -> PromptBundle {
        PromptBundle {
            text: text.to_string(),
            kind: if attempt == 1 {
                PromptKind::Initial
            } else {
                PromptKind::Repair
            },
            problem_id: problem_id.to_string(),
            attempt,
        }
    }

    #[test]
    fn scripted_backend_returns_entry() {
        let backend = ScriptedBackend::new([ScriptEntry {
            problem_id: "p1".into(),
            attempt: 1,
            response: "the program".into(),
        }]);
        let out = backend
            .generate(&bundle("p1", 1, "prompt"), &DecodingParams::default())
            .unwrap();
        assert_eq!(out, "the program");
    }

    #[test]
    fn scripted_backend_misses_unknown_key() {
        let backend = ScriptedBackend::new([]);
        let err = backend
            .generate(&bundle("p1", 4, "prompt"), &DecodingParams::default())
            .unwrap_err();
        assert!(matches!(err, BackendError::ScriptMiss { attempt: 4, .. }));
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = prompt_digest("same text");
        let b = prompt_digest("same text");
        let c = prompt_digest("same text!");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn record_then_replay_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let transcript = dir.path().join("transcript.jsonl");
        let inner = ScriptedBackend::new([
            ScriptEntry {
                problem_id: "p1".into(),
                attempt: 1,
                response: "resp one".into(),
            },
            ScriptEntry {
                problem_id: "p2".into(),
                attempt: 1,
                response: "resp two".into(),
            },
        ]);
        let recorder = RecordingBackend::create(inner, &transcript).unwrap();
        let params = DecodingParams::default();
        recorder.generate(&bundle("p1", 1, "prompt one"), &params).unwrap();
        recorder.generate(&bundle("p2", 1, "prompt two"), &params).unwrap();
        drop(recorder);

        let lines = std::fs::read_to_string(&transcript).unwrap();
        assert_eq!(lines.lines().count(), 2);

        let replay = ReplayBackend::load(&transcript).unwrap();
        assert_eq!(
            replay.generate(&bundle("p1", 1, "prompt one"), &params).unwrap(),
            "resp one"
        );
        assert_eq!(
            replay.generate(&bundle("p2", 1, "prompt two"), &params).unwrap(),
            "resp two"
        );
    }

    #[test]
    fn tampered_prompt_is_a_replay_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let transcript = dir.path().join("transcript.jsonl");
        let inner = ScriptedBackend::new([ScriptEntry {
            problem_id: "p1".into(),
            attempt: 1,
            response: "resp".into(),
        }]);
        let recorder = RecordingBackend::create(inner, &transcript).unwrap();
        let params = DecodingParams::default();
        recorder.generate(&bundle("p1", 1, "original prompt"), &params).unwrap();
        drop(recorder);

        let replay = ReplayBackend::load(&transcript).unwrap();
        let err = replay
            .generate(&bundle("p1", 1, "tampered prompt"), &params)
            .unwrap_err();
        assert!(matches!(err, BackendError::ReplayMismatch { .. }));
    }
}
