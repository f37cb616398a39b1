//! External-model provider interfaces and their deterministic stand-ins.
//!
//! The pipeline never runs a model in-process. Chat completions go through
//! [`ChatProvider`]; transcripts, frame text, face embeddings, speaker turns
//! and shot boundaries come from the per-episode providers below. Each has a
//! replayable offline implementation so a whole run can be reproduced from
//! fixture files.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::{debug, warn};

use super::result_block::ParseError;
use crate::model::{DialogueLine, EpisodeId, TimeInterval};

pub const API_KEY_ENV: &str = "HIVE_LLM_API_KEY";

/// Extra attempts after the first when a reply fails to parse.
pub const PARSE_RETRIES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("no fixture for request digest {0}")]
    FixtureMiss(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("provider data error: {0}")]
    Data(String),
}

/// A failed model call: either the provider failed or every attempt
/// produced an unparseable reply.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CallError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Wire body of a chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f32,
}

impl ChatRequest {
    /// Single user turn at temperature 0.
    pub fn user(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            messages: vec![ChatMessage::user(prompt)],
            temperature: 0.0,
        }
    }

    /// Hex SHA-256 of the canonical JSON body; the key used by fixtures and
    /// run logs.
    pub fn digest(&self) -> String {
        let body = serde_json::to_vec(self).expect("chat request serializes");
        hex::encode(Sha256::digest(&body))
    }

    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for Arc<P> {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

/// Sends `request` and parses the reply, retrying on parse failures.
pub fn call_parsed<T>(
    llm: &dyn ChatProvider,
    request: &ChatRequest,
    mut parse: impl FnMut(&str) -> Result<T, ParseError>,
) -> Result<T, CallError> {
    let mut attempt = 0;
    loop {
        let reply = llm.complete(request)?;
        match parse(&reply) {
            Ok(v) => return Ok(v),
            Err(e) if attempt < PARSE_RETRIES => {
                warn!(attempt, error = %e, "unparseable model reply, retrying");
                attempt += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
}

/// Canned replies keyed by request digest.
#[derive(Debug, Clone, Default)]
pub struct FixtureProvider {
    responses: HashMap<String, String>,
}

impl FixtureProvider {
    pub fn new(responses: HashMap<String, String>) -> Self {
        Self { responses }
    }

    /// Loads either a JSON object `{digest: response}` or a JSON-lines run
    /// log written by [`RecordingProvider`].
    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Data(format!("{}: {e}", path.display())))?;
        Self::from_text(&text).map_err(|e| ProviderError::Data(format!("{}: {e}", path.display())))
    }

    pub fn from_text(text: &str) -> Result<Self, String> {
        // A one-line run log is also a valid string map, so try the log first.
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let log: Result<Vec<RunLogEntry>, _> =
            lines.iter().map(|l| serde_json::from_str(l)).collect();
        if let (Ok(entries), false) = (log, lines.is_empty()) {
            return Ok(Self::new(
                entries
                    .into_iter()
                    .map(|e| (e.request_digest, e.response))
                    .collect(),
            ));
        }
        serde_json::from_str::<HashMap<String, String>>(text)
            .map(Self::new)
            .map_err(|e| format!("neither a digest map nor a run log: {e}"))
    }

    pub fn insert(&mut self, digest: String, response: String) {
        self.responses.insert(digest, response);
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatProvider for FixtureProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let digest = request.digest();
        self.responses
            .get(&digest)
            .cloned()
            .ok_or(ProviderError::FixtureMiss(digest))
    }
}

type Script = dyn Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync;

/// Replies computed by a closure; used to script mock behaviour in tests
/// and to seed fixture files.
#[derive(Clone)]
pub struct ScriptedProvider {
    script: Arc<Script>,
}

impl ScriptedProvider {
    pub fn new(
        script: impl Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            script: Arc::new(script),
        }
    }

    /// Always replies with the same text.
    pub fn constant(reply: impl Into<String>) -> Self {
        let reply = reply.into();
        Self::new(move |_| Ok(reply.clone()))
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        (self.script)(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLogEntry {
    pub request_digest: String,
    pub response_digest: String,
    pub model: String,
    pub response: String,
}

/// Wraps a provider and records every request/response pair.
pub struct RecordingProvider<P> {
    inner: P,
    log: Mutex<Vec<RunLogEntry>>,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Log entries sorted by request digest, duplicates removed.
    pub fn entries(&self) -> Vec<RunLogEntry> {
        let mut entries = self.log.lock().expect("run log lock").clone();
        entries.sort_by(|a, b| a.request_digest.cmp(&b.request_digest));
        entries.dedup();
        entries
    }

    pub fn to_jsonl(&self) -> String {
        self.entries()
            .iter()
            .map(|e| serde_json::to_string(e).expect("log entry serializes") + "\n")
            .collect()
    }

    /// Digest-to-response map suitable for [`FixtureProvider`].
    pub fn to_fixture_map(&self) -> BTreeMap<String, String> {
        self.entries()
            .into_iter()
            .map(|e| (e.request_digest, e.response))
            .collect()
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let response = self.inner.complete(request)?;
        let entry = RunLogEntry {
            request_digest: request.digest(),
            response_digest: hex::encode(Sha256::digest(response.as_bytes())),
            model: request.model.clone(),
            response: response.clone(),
        };
        self.log.lock().expect("run log lock").push(entry);
        Ok(response)
    }
}

/// Chat completions over HTTP: POST `{model, messages, temperature}`,
/// expects `{content}` back, bearer token from the environment.
pub struct HttpChatProvider {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpChatProvider {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: impl Into<String>,
    ) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            client,
        })
    }

    /// Reads the token from `key_env`.
    pub fn from_env(endpoint: impl Into<String>, key_env: &str) -> Result<Self, ProviderError> {
        let key = std::env::var(key_env)
            .map_err(|_| ProviderError::MissingCredential(key_env.to_string()))?;
        Self::new(endpoint, key)
    }
}

impl ChatProvider for HttpChatProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        debug!(endpoint = %self.endpoint, digest = %request.digest(), "chat request");
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(request)
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body,
            });
        }
        let body: ChatResponse = resp
            .json()
            .map_err(|e| ProviderError::Data(e.to_string()))?;
        Ok(body.content)
    }
}

/// On-frame text recognized at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrLine {
    pub timestamp_ms: u64,
    pub text: String,
    /// Normalized `[x, y, w, h]`.
    #[serde(default)]
    pub region: [f32; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceObservation {
    pub timestamp_ms: u64,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerTurn {
    pub start_ms: u64,
    pub end_ms: u64,
    pub speaker: String,
}

/// A detected shot with an optional colour histogram for the fusion mock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub start_ms: u64,
    pub end_ms: u64,
    #[serde(default)]
    pub histogram: Option<Vec<f32>>,
}

pub trait TranscriptProvider: Send + Sync {
    fn transcript(&self, episode: EpisodeId) -> Result<Vec<DialogueLine>, ProviderError>;
}

pub trait OcrProvider: Send + Sync {
    fn frame_text(&self, episode: EpisodeId) -> Result<Vec<OcrLine>, ProviderError>;
}

pub trait FaceEmbedder: Send + Sync {
    fn faces(&self, episode: EpisodeId) -> Result<Vec<FaceObservation>, ProviderError>;
}

pub trait Diarizer: Send + Sync {
    fn speaker_turns(&self, episode: EpisodeId) -> Result<Vec<SpeakerTurn>, ProviderError>;
}

pub trait ShotDetector: Send + Sync {
    fn shots(&self, episode: EpisodeId) -> Result<Vec<Shot>, ProviderError>;
}

pub trait ShotFusionClassifier: Send + Sync {
    /// Whether two adjacent shots belong to the same scene.
    fn same_scene(&self, left: &Shot, right: &Shot) -> Result<bool, ProviderError>;
}

/// Pre-computed per-episode provider output, e.g. loaded from files.
#[derive(Debug, Clone)]
pub struct EpisodeTable<T> {
    rows: BTreeMap<EpisodeId, Vec<T>>,
}

impl<T> Default for EpisodeTable<T> {
    fn default() -> Self {
        Self {
            rows: BTreeMap::new(),
        }
    }
}

impl<T: Clone> EpisodeTable<T> {
    pub fn insert(&mut self, episode: EpisodeId, rows: Vec<T>) {
        self.rows.insert(episode, rows);
    }

    fn get(&self, episode: EpisodeId) -> Vec<T> {
        self.rows.get(&episode).cloned().unwrap_or_default()
    }
}

impl<T: Clone> FromIterator<(EpisodeId, Vec<T>)> for EpisodeTable<T> {
    fn from_iter<I: IntoIterator<Item = (EpisodeId, Vec<T>)>>(iter: I) -> Self {
        Self {
            rows: iter.into_iter().collect(),
        }
    }
}

impl TranscriptProvider for EpisodeTable<DialogueLine> {
    fn transcript(&self, episode: EpisodeId) -> Result<Vec<DialogueLine>, ProviderError> {
        Ok(self.get(episode))
    }
}

impl OcrProvider for EpisodeTable<OcrLine> {
    fn frame_text(&self, episode: EpisodeId) -> Result<Vec<OcrLine>, ProviderError> {
        Ok(self.get(episode))
    }
}

impl FaceEmbedder for EpisodeTable<FaceObservation> {
    fn faces(&self, episode: EpisodeId) -> Result<Vec<FaceObservation>, ProviderError> {
        Ok(self.get(episode))
    }
}

impl Diarizer for EpisodeTable<SpeakerTurn> {
    fn speaker_turns(&self, episode: EpisodeId) -> Result<Vec<SpeakerTurn>, ProviderError> {
        Ok(self.get(episode))
    }
}

impl ShotDetector for EpisodeTable<Shot> {
    fn shots(&self, episode: EpisodeId) -> Result<Vec<Shot>, ProviderError> {
        Ok(self.get(episode))
    }
}

/// Fusion mock: two shots are the same scene when their colour histograms
/// overlap (histogram intersection) by at least `threshold`.
#[derive(Debug, Clone, Copy)]
pub struct HistogramFusion {
    pub threshold: f32,
}

impl HistogramFusion {
    pub fn intersection(a: &[f32], b: &[f32]) -> f32 {
        let norm = |h: &[f32]| h.iter().sum::<f32>().max(f32::EPSILON);
        let (na, nb) = (norm(a), norm(b));
        a.iter().zip(b).map(|(x, y)| (x / na).min(y / nb)).sum()
    }
}

impl ShotFusionClassifier for HistogramFusion {
    fn same_scene(&self, left: &Shot, right: &Shot) -> Result<bool, ProviderError> {
        match (&left.histogram, &right.histogram) {
            (Some(a), Some(b)) if a.len() == b.len() => {
                Ok(Self::intersection(a, b) >= self.threshold)
            }
            (Some(_), Some(_)) => Err(ProviderError::Data("histogram length mismatch".into())),
            _ => Ok(false),
        }
    }
}

/// Every external model the understanding stage talks to.
#[derive(Clone)]
pub struct ProviderSuite {
    pub llm: Arc<dyn ChatProvider>,
    pub asr: Arc<dyn TranscriptProvider>,
    pub ocr: Arc<dyn OcrProvider>,
    pub face_embedder: Arc<dyn FaceEmbedder>,
    pub diarizer: Arc<dyn Diarizer>,
    pub shot_detector: Arc<dyn ShotDetector>,
    pub shot_fusion_classifier: Arc<dyn ShotFusionClassifier>,
}

/// Interval helper for shots.
impl Shot {
    pub fn interval(&self, episode: EpisodeId) -> Option<TimeInterval> {
        TimeInterval::new(episode, self.start_ms, self.end_ms).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        let a = ChatRequest::user("m", "hello");
        assert_eq!(a.digest(), ChatRequest::user("m", "hello").digest());
        assert_ne!(a.digest(), ChatRequest::user("m", "hello!").digest());
        assert_ne!(a.digest(), ChatRequest::user("n", "hello").digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn fixture_replays_recorded_run() {
        let rec = RecordingProvider::new(ScriptedProvider::new(|r| {
            Ok(format!("echo {}", r.prompt_text()))
        }));
        let req = ChatRequest::user("m", "ping");
        assert_eq!(rec.complete(&req).unwrap(), "echo ping");
        let from_log = FixtureProvider::from_text(&rec.to_jsonl()).unwrap();
        assert_eq!(from_log.complete(&req).unwrap(), "echo ping");
        let map = serde_json::to_string(&rec.to_fixture_map()).unwrap();
        let from_map = FixtureProvider::from_text(&map).unwrap();
        assert_eq!(from_map.complete(&req).unwrap(), "echo ping");
        assert!(matches!(
            from_map.complete(&ChatRequest::user("m", "other")),
            Err(ProviderError::FixtureMiss(_))
        ));
    }

    #[test]
    fn call_parsed_retries_twice_then_surfaces() {
        let calls = Arc::new(Mutex::new(0));
        let counter = calls.clone();
        let llm = ScriptedProvider::new(move |_| {
            *counter.lock().unwrap() += 1;
            Ok("garbage".into())
        });
        let req = ChatRequest::user("m", "x");
        let res = call_parsed(&llm, &req, |_| Err::<(), _>(ParseError::NoResultBlock));
        assert!(matches!(
            res,
            Err(CallError::Parse(ParseError::NoResultBlock))
        ));
        assert_eq!(*calls.lock().unwrap(), 1 + PARSE_RETRIES);
    }

    #[test]
    fn call_parsed_recovers_on_later_attempt() {
        let calls = Arc::new(Mutex::new(0));
        let counter = calls.clone();
        let llm = ScriptedProvider::new(move |_| {
            let mut n = counter.lock().unwrap();
            *n += 1;
            Ok(if *n < 3 { "bad" } else { "good" }.into())
        });
        let res = call_parsed(&llm, &ChatRequest::user("m", "x"), |s| {
            if s == "good" {
                Ok(1)
            } else {
                Err(ParseError::NoResultBlock)
            }
        });
        assert_eq!(res.unwrap(), 1);
    }

    #[test]
    fn histogram_fusion_thresholds() {
        let fusion = HistogramFusion { threshold: 0.8 };
        let shot = |h: Vec<f32>| Shot {
            start_ms: 0,
            end_ms: 1,
            histogram: Some(h),
        };
        assert!(fusion
            .same_scene(&shot(vec![1.0, 1.0]), &shot(vec![2.0, 2.0]))
            .unwrap());
        assert!(!fusion
            .same_scene(&shot(vec![1.0, 0.0]), &shot(vec![0.0, 1.0]))
            .unwrap());
        let bare = Shot {
            start_ms: 0,
            end_ms: 1,
            histogram: None,
        };
        assert!(!fusion.same_scene(&bare, &bare).unwrap());
    }
}
