//! HTTP client for remote semantic scorers.
//!
//! `POST /v1/score` takes `{"metric", "pairs": [{"candidate", "source"}]}`
//! and answers `{"scores": [...]}`; `GET /v1/health` answers
//! `{"status": "ok", "metrics": [...]}`. Requests carry at most 64 pairs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use summrank_core::error::ScorerFailure;
use summrank_core::semantic::{PairScorer, ScorerId, ScorerKind};

use crate::config::RemoteConfig;

pub const MAX_BATCH: usize = 64;

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    metric: &'a str,
    pairs: Vec<PairBody<'a>>,
}

#[derive(Debug, Serialize)]
struct PairBody<'a> {
    candidate: &'a str,
    source: &'a str,
}

#[derive(Debug, Deserialize)]
struct ScoreReply {
    scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Health {
    pub status: String,
    pub metrics: Vec<String>,
}

pub struct RemoteScorer {
    kind: ScorerKind,
    config: RemoteConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Transport(String),
    Protocol(String),
}

impl RemoteScorer {
    pub fn new(kind: ScorerKind, config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Self { kind, config, agent }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.config.endpoint.trim_end_matches('/'))
    }

    fn transport(&self, attempts: u32, message: String) -> ScorerFailure {
        ScorerFailure::Transport { scorer: self.kind.to_string(), attempts, message }
    }

    fn protocol(&self, message: String) -> ScorerFailure {
        ScorerFailure::Protocol { scorer: self.kind.to_string(), message }
    }

    /// `GET /v1/health`, retried like score requests.
    pub fn health(&self) -> Result<Health, ScorerFailure> {
        self.with_retries(|| {
            let mut response =
                self.agent.get(&self.url("/v1/health")).call().map_err(|e| Attempt::Transport(e.to_string()))?;
            let status = response.status().as_u16();
            if status != 200 {
                return Err(Attempt::Protocol(format!("health check answered HTTP {status}")));
            }
            let health: Health = response
                .body_mut()
                .read_json()
                .map_err(|e| Attempt::Protocol(format!("malformed health reply: {e}")))?;
            if health.status != "ok" {
                return Err(Attempt::Protocol(format!("health status `{}`", health.status)));
            }
            Ok(health)
        })
    }

    fn post_once(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, Attempt> {
        let body = ScoreRequest {
            metric: self.kind.as_str(),
            pairs: pairs.iter().map(|(c, s)| PairBody { candidate: c, source: s }).collect(),
        };
        let mut response =
            self.agent.post(&self.url("/v1/score")).send_json(&body).map_err(|e| Attempt::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if status != 200 {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Protocol(format!("HTTP {status}: {}", text.trim())));
        }
        let reply: ScoreReply =
            response.body_mut().read_json().map_err(|e| Attempt::Protocol(format!("malformed reply: {e}")))?;
        if reply.scores.len() != pairs.len() {
            return Err(Attempt::Protocol(format!("{} scores for {} pairs", reply.scores.len(), pairs.len())));
        }
        Ok(reply.scores)
    }

    /// Retries transport failures with exponential backoff; protocol
    /// errors are final.
    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, Attempt>) -> Result<T, ScorerFailure> {
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = String::new();
        for attempt in 1..=self.config.attempts {
            match call() {
                Ok(value) => return Ok(value),
                Err(Attempt::Protocol(message)) => return Err(self.protocol(message)),
                Err(Attempt::Transport(message)) => {
                    warn!("scorer `{}` attempt {attempt} failed: {message}", self.kind);
                    last = message;
                    if attempt < self.config.attempts {
                        thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(self.transport(self.config.attempts, last))
    }

    fn post_batch(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ScorerFailure> {
        self.with_retries(|| self.post_once(pairs))
    }
}

impl PairScorer for RemoteScorer {
    fn id(&self) -> ScorerId {
        ScorerId { name: self.kind.clone(), version: self.config.version.clone() }
    }

    /// Splits into batches and keeps up to `max_in_flight` requests open.
    /// Scores come back in input order.
    fn score_batch(&mut self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ScorerFailure> {
        let size = self.config.batch_size.clamp(1, MAX_BATCH);
        let chunks: Vec<&[(&str, &str)]> = pairs.chunks(size).collect();
        let results: Mutex<Vec<Option<Vec<f64>>>> = Mutex::new(vec![None; chunks.len()]);
        let failure: Mutex<Option<(usize, ScorerFailure)>> = Mutex::new(None);
        let next = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.max(1).min(chunks.len());
        debug!("scorer `{}`: {} pairs in {} requests", self.kind, pairs.len(), chunks.len());

        let this = &*self;
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if failure.lock().expect("lock").is_some() {
                        return;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(chunk) = chunks.get(i) else { return };
                    match this.post_batch(chunk) {
                        Ok(scores) => results.lock().expect("lock")[i] = Some(scores),
                        Err(e) => {
                            let mut slot = failure.lock().expect("lock");
                            // Report the earliest failing batch for a stable message.
                            if slot.as_ref().is_none_or(|(j, _)| i < *j) {
                                *slot = Some((i, e));
                            }
                            return;
                        }
                    }
                });
            }
        });

        if let Some((_, e)) = failure.into_inner().expect("lock") {
            return Err(e);
        }
        Ok(results.into_inner().expect("lock").into_iter().flat_map(|s| s.expect("every batch answered")).collect())
    }
}
