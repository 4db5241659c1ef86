//! Client for an OpenAI-style chat-completions endpoint with inline images.

use crate::action::Action;
use crate::perception::LdictEntry;
use crate::prompting::scores::{brace_spans, fenced_blocks};
use crate::prompting::{
    build_action_prompt, build_describe_prompt, build_localization_prompt, build_predict_prompt, parse_scored_response,
    PromptPacket, ScoredResponse,
};
use crate::topomap::{NodeId, TopoMap};
use base64::Engine;
use image::RgbImage;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Duration;

use super::{BackendError, Query, ReasoningBackend};

pub const API_KEY_ENV: &str = "HAMNAV_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_s: f64,
    pub retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff_ms: u64,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            temperature: 0.0,
            timeout_s: 60.0,
            retries: 3,
            backoff_ms: 500,
            api_key: None,
        }
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend").field("config", &self.config).finish()
    }
}

fn png_data_url(img: &RgbImage) -> Result<String, BackendError> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| BackendError::InvalidRequest(format!("png encode: {e}")))?;
    Ok(format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(buf.into_inner())))
}

/// Chat-completions request body for a packet.
pub fn request_body(config: &RemoteConfig, packet: &PromptPacket) -> Result<serde_json::Value, BackendError> {
    let mut content = vec![serde_json::json!({"type": "text", "text": packet.user_text})];
    if let Some(img) = &packet.image {
        content.push(serde_json::json!({"type": "image_url", "image_url": {"url": png_data_url(img)?}}));
    }
    Ok(serde_json::json!({
        "model": config.model,
        "temperature": config.temperature,
        "messages": [
            {"role": "system", "content": packet.system_text},
            {"role": "user", "content": content},
        ],
    }))
}

enum Attempt {
    Retry(BackendError),
    Fatal(BackendError),
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s.max(0.001)))
            .build()
            .map_err(|e| BackendError::BackendUnavailable(e.to_string()))?;
        let api_key = config.api_key.clone().or_else(|| std::env::var(API_KEY_ENV).ok());
        Ok(Self { config, api_key, client })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, Attempt> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            Attempt::Retry(if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::BackendUnavailable(e.to_string())
            })
        })?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(BackendError::BackendUnavailable(format!("HTTP {status}"))));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(BackendError::BackendUnavailable(format!("HTTP {status}"))));
        }
        let value: serde_json::Value = resp.json().map_err(|e| {
            Attempt::Retry(if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::BackendUnavailable(e.to_string())
            })
        })?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(BackendError::BackendUnavailable("response has no message content".into())))
    }

    /// Sends a packet, retrying transient failures with exponential backoff.
    pub fn complete(&self, packet: &PromptPacket) -> Result<String, BackendError> {
        let body = request_body(&self.config, packet)?;
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = BackendError::BackendUnavailable("no attempt made".into());
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    log::warn!("backend attempt {} failed: {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(match last {
            BackendError::Timeout => BackendError::Timeout,
            e => BackendError::BackendUnavailable(e.to_string()),
        })
    }
}

/// Parses `{"<node id>": ["label", ...], ...}` from a reply.
pub fn parse_predictions(raw: &str, topo: &TopoMap) -> Result<BTreeMap<NodeId, Vec<String>>, BackendError> {
    let parsed = fenced_blocks(raw)
        .into_iter()
        .chain(brace_spans(raw))
        .find_map(|t| serde_json::from_str::<BTreeMap<String, Vec<String>>>(t.trim()).ok())
        .ok_or_else(|| BackendError::MalformedPrediction("no id → labels object found".into()))?;
    let mut out = BTreeMap::new();
    for (k, labels) in parsed {
        let key = crate::prompting::scores::normalize_key(&k);
        let Ok(id) = key.parse::<NodeId>() else {
            return Err(BackendError::MalformedPrediction(format!("key {k:?} is not a node id")));
        };
        if topo.robot_index(id).is_none() {
            log::warn!("prediction for unknown node {id} dropped");
            continue;
        }
        out.insert(id, labels.into_iter().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect());
    }
    Ok(out)
}

impl ReasoningBackend for RemoteBackend {
    fn id(&self) -> &str {
        "remote"
    }

    fn describe_scene(&self, view: Option<&RgbImage>, entries: &[LdictEntry]) -> Result<String, BackendError> {
        Ok(self.complete(&build_describe_prompt(entries, view))?.trim().to_string())
    }

    fn predict_landmarks(
        &self,
        map_image: &RgbImage,
        topo: &TopoMap,
    ) -> Result<BTreeMap<NodeId, Vec<String>>, BackendError> {
        let raw = self.complete(&build_predict_prompt(topo, Some(map_image)))?;
        parse_predictions(&raw, topo)
    }

    fn localize(&self, q: Query<'_>) -> Result<(NodeId, ScoredResponse), BackendError> {
        if q.context.candidates.is_empty() {
            return Err(BackendError::InvalidRequest("empty candidate set".into()));
        }
        let packet = build_localization_prompt(q.context, Some(&q.svap.image));
        let raw = self.complete(&packet)?;
        let r = parse_scored_response(&raw, &packet.legal_answers)?;
        let id = r.chosen.parse().map_err(|_| BackendError::Unparseable)?;
        Ok((id, r))
    }

    fn select_action(&self, q: Query<'_>, position: NodeId) -> Result<(Action, ScoredResponse), BackendError> {
        let packet = build_action_prompt(q.context, position, Some(&q.svap.image));
        let raw = self.complete(&packet)?;
        let r = parse_scored_response(&raw, &packet.legal_answers)?;
        let action = r.chosen.parse().map_err(|_| BackendError::Unparseable)?;
        Ok((action, r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Serves canned HTTP responses, one per connection, and records bodies.
    fn mock(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let h = hits.clone();
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                h.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (url, hits, handle)
    }

    fn reply(content: &str) -> String {
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
    }

    fn backend(url: String, retries: u32) -> RemoteBackend {
        RemoteBackend::new(RemoteConfig {
            base_url: url,
            retries,
            backoff_ms: 1,
            timeout_s: 5.0,
            api_key: Some("k".into()),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn describe_round_trip_and_request_shape() {
        let (url, _, handle) = mock(vec![(200, reply("  A box on the left. "))]);
        let b = backend(url, 0);
        let view = RgbImage::new(4, 4);
        let text = b.describe_scene(Some(&view), &[]).unwrap();
        assert_eq!(text, "A box on the left.");
        let bodies = handle.join().unwrap();
        let body: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["messages"][0]["role"], "system");
        let url = body["messages"][1]["content"][1]["image_url"]["url"].as_str().unwrap();
        assert!(url.starts_with("data:image/png;base64,"));
    }

    #[test]
    fn retries_then_succeeds() {
        let (url, hits, handle) = mock(vec![(500, "{}".into()), (503, "{}".into()), (200, reply("ok"))]);
        let b = backend(url, 3);
        assert_eq!(b.describe_scene(None, &[]).unwrap(), "ok");
        handle.join().unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_retries() {
        let (url, hits, handle) = mock(vec![(500, "{}".into()), (500, "{}".into())]);
        let b = backend(url, 1);
        assert!(matches!(b.describe_scene(None, &[]), Err(BackendError::BackendUnavailable(_))));
        handle.join().unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn unreachable_host_is_unavailable() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        let b = backend(url, 1);
        assert!(matches!(b.describe_scene(None, &[]), Err(BackendError::BackendUnavailable(_))));
    }

    #[test]
    fn prediction_parsing() {
        let topo = TopoMap {
            robot_nodes: (0..3)
                .map(|id| crate::topomap::RobotNode {
                    id,
                    position: crate::geometry::Point::new(id as f64, 0.0),
                    is_junction: false,
                    floor: 0,
                    heading_change_deg: 0.0,
                })
                .collect(),
            landmark_nodes: vec![],
        };
        let p = parse_predictions("Sure:\n```json\n{\"1\": [\"chair\"], \"7\": [\"x\"]}\n```", &topo).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[&1], vec!["chair"]);
        assert!(matches!(parse_predictions("nothing", &topo), Err(BackendError::MalformedPrediction(_))));
    }
}
