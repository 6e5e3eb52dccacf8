mod common;

use common::{fake_score, healthy, MockServer, Reply};
use serde_json::json;

use summrank::cache::{CachedScorer, ScoreCache};
use summrank::config::RemoteConfig;
use summrank::remote::RemoteScorer;
use summrank_core::error::ScorerFailure;
use summrank_core::semantic::{PairScorer, ScorerKind};

fn config(url: &str) -> RemoteConfig {
    RemoteConfig { endpoint: url.to_string(), backoff_ms: 5, timeout_ms: 5_000, ..RemoteConfig::default() }
}

fn texts(n: usize) -> Vec<(String, String)> {
    (0..n).map(|i| (format!("cand {i} word{}", i % 7), format!("source word{} {}", i % 3, i % 5))).collect()
}

fn as_pairs(t: &[(String, String)]) -> Vec<(&str, &str)> {
    t.iter().map(|(c, s)| (c.as_str(), s.as_str())).collect()
}

#[test]
fn scores_come_back_in_input_order() {
    let server = MockServer::start(healthy(&["bertscore"], 20));
    let mut scorer = RemoteScorer::new(ScorerKind::BertScore, config(&server.url));
    let t = texts(64 * 5 + 3);
    let pairs = as_pairs(&t);
    let scores = scorer.score_batch(&pairs).unwrap();
    let expected: Vec<f64> = pairs.iter().map(|(c, s)| fake_score(c, s)).collect();
    assert_eq!(scores, expected);

    let requests = server.requests.lock().unwrap();
    assert_eq!(requests.len(), 6);
    for r in requests.iter() {
        assert_eq!(r.method, "POST");
        assert_eq!(r.path, "/v1/score");
        assert_eq!(r.body["metric"], "bertscore");
        assert!(r.body["pairs"].as_array().unwrap().len() <= 64);
    }
    let peak = server.peak_in_flight.load(std::sync::atomic::Ordering::SeqCst);
    assert!((2..=4).contains(&peak), "peak in flight {peak}");
}

#[test]
fn a_full_batch_of_64_is_one_request() {
    let server = MockServer::start(healthy(&["bartscore"], 0));
    let mut scorer = RemoteScorer::new(ScorerKind::BartScore, config(&server.url));
    let t = texts(64);
    let scores = scorer.score_batch(&as_pairs(&t)).unwrap();
    assert_eq!(scores.len(), 64);
    assert_eq!(server.score_requests(), 1);
}

#[test]
fn dropped_connections_are_retried() {
    let inner = healthy(&["bertscore"], 0);
    let server = MockServer::start(move |n, req| if n < 2 { Reply::Drop } else { inner(n, req) });
    let mut scorer = RemoteScorer::new(ScorerKind::BertScore, config(&server.url));
    let t = texts(3);
    let scores = scorer.score_batch(&as_pairs(&t)).unwrap();
    assert_eq!(scores.len(), 3);
    assert_eq!(server.score_requests(), 3);
}

#[test]
fn gives_up_after_three_attempts() {
    let server = MockServer::start(|_, _| Reply::Drop);
    let mut scorer = RemoteScorer::new(ScorerKind::BertScore, config(&server.url));
    let t = texts(3);
    match scorer.score_batch(&as_pairs(&t)) {
        Err(ScorerFailure::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("expected a transport failure, got {other:?}"),
    }
    assert_eq!(server.score_requests(), 3);
}

#[test]
fn non_200_is_a_protocol_error_without_retry() {
    let server = MockServer::start(|_, _| Reply::Json(500, json!({"error": "boom"})));
    let mut scorer = RemoteScorer::new(ScorerKind::BertScore, config(&server.url));
    let t = texts(3);
    let err = scorer.score_batch(&as_pairs(&t)).unwrap_err();
    assert!(matches!(err, ScorerFailure::Protocol { .. }), "{err:?}");
    assert!(err.to_string().contains("500"));
    assert_eq!(server.score_requests(), 1);
}

#[test]
fn length_mismatch_is_a_protocol_error() {
    let server = MockServer::start(|_, _| Reply::Json(200, json!({"scores": [0.5]})));
    let mut scorer = RemoteScorer::new(ScorerKind::BertScore, config(&server.url));
    let t = texts(2);
    let err = scorer.score_batch(&as_pairs(&t)).unwrap_err();
    assert!(matches!(err, ScorerFailure::Protocol { .. }), "{err:?}");
    assert!(err.to_string().contains("1 scores for 2 pairs"));
}

#[test]
fn health_reports_metrics() {
    let server = MockServer::start(healthy(&["bertscore", "bartscore"], 0));
    let scorer = RemoteScorer::new(ScorerKind::BertScore, config(&server.url));
    let health = scorer.health().unwrap();
    assert_eq!(health.status, "ok");
    assert_eq!(health.metrics, vec!["bertscore", "bartscore"]);
    assert_eq!(server.requests.lock().unwrap()[0].method, "GET");

    let down = MockServer::start(|_, _| Reply::Json(200, json!({"status": "loading", "metrics": []})));
    let err = RemoteScorer::new(ScorerKind::BertScore, config(&down.url)).health().unwrap_err();
    assert!(err.to_string().contains("loading"));
}

#[test]
fn cache_avoids_repeat_requests() {
    let server = MockServer::start(healthy(&["bertscore"], 0));
    let dir = tempfile::tempdir().unwrap();
    let t = texts(100);
    let pairs = as_pairs(&t);
    let first = {
        let remote = RemoteScorer::new(ScorerKind::BertScore, config(&server.url));
        let cache = ScoreCache::open(dir.path(), &remote.id()).unwrap();
        CachedScorer::new(remote, cache).score_batch(&pairs).unwrap()
    };
    assert_eq!(server.score_requests(), 2);

    let remote = RemoteScorer::new(ScorerKind::BertScore, config(&server.url));
    let cache = ScoreCache::open(dir.path(), &remote.id()).unwrap();
    assert_eq!(cache.len(), 100);
    let mut cached = CachedScorer::new(remote, cache);
    assert_eq!(cached.score_batch(&pairs).unwrap(), first);
    assert_eq!(server.score_requests(), 2);

    // Only the unseen pair goes over the wire.
    let mut more = pairs.clone();
    more.push(("a brand new candidate", "source"));
    let scores = cached.score_batch(&more).unwrap();
    assert_eq!(scores[..100], first[..]);
    assert_eq!(server.score_requests(), 3);
    assert_eq!(server.requests.lock().unwrap().last().unwrap().body["pairs"].as_array().unwrap().len(), 1);

    // A version bump never reuses old scores.
    let bumped = RemoteScorer::new(ScorerKind::BertScore, RemoteConfig { version: "2".into(), ..config(&server.url) });
    assert!(ScoreCache::open(dir.path(), &bumped.id()).unwrap().is_empty());
}
