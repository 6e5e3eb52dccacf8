//! Persistent score cache: one append-only record log per scorer.
//!
//! Records are `<sha256 hex> <score>` lines. The key hashes the scorer
//! name, its version and both texts, so a version bump never reuses stale
//! scores. Unreadable lines are skipped with a warning.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::warn;
use sha2::{Digest, Sha256};

use summrank_core::error::ScorerFailure;
use summrank_core::semantic::{PairScorer, ScorerId};

pub const CACHE_ENV: &str = "SUMMRANK_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".summrank-cache";
const LOG_FILE: &str = "scores.log";

/// Cache root from the environment, else `./.summrank-cache`.
pub fn cache_root() -> PathBuf {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

pub fn cache_key(scorer: &ScorerId, candidate: &str, source: &str) -> String {
    let mut h = Sha256::new();
    for part in [scorer.name.as_str(), scorer.version.as_str(), candidate, source] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

pub struct ScoreCache {
    entries: HashMap<String, f64>,
    writer: File,
    path: PathBuf,
}

impl ScoreCache {
    pub fn open(root: &Path, scorer: &ScorerId) -> Result<Self> {
        let dir = root.join(format!("{}@{}", sanitize(scorer.name.as_str()), sanitize(&scorer.version)));
        fs::create_dir_all(&dir).with_context(|| format!("creating cache directory {}", dir.display()))?;
        let path = dir.join(LOG_FILE);
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            for (no, line) in BufReader::new(file).lines().enumerate() {
                let Ok(line) = line else {
                    warn!("{}:{}: unreadable cache line skipped", path.display(), no + 1);
                    continue;
                };
                match parse_record(&line) {
                    Some((key, value)) => {
                        entries.insert(key.to_string(), value);
                    }
                    None => warn!("{}:{}: corrupt cache record skipped", path.display(), no + 1),
                }
            }
        }
        let mut writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .with_context(|| format!("opening {} for append", path.display()))?;
        // A crash may have left a torn last record; start on a fresh line.
        let torn = fs::read(&path).map(|b| b.last().is_some_and(|&c| c != b'\n')).unwrap_or(false);
        if torn {
            writeln!(writer).with_context(|| format!("appending to {}", path.display()))?;
        }
        Ok(Self { entries, writer, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, key: &str) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn store(&mut self, key: String, value: f64) -> Result<()> {
        writeln!(self.writer, "{key} {value:?}").with_context(|| format!("appending to {}", self.path.display()))?;
        self.entries.insert(key, value);
        Ok(())
    }
}

fn parse_record(line: &str) -> Option<(&str, f64)> {
    let (key, value) = line.split_once(' ')?;
    if key.len() != 64 || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    let value: f64 = value.trim().parse().ok()?;
    value.is_finite().then_some((key, value))
}

fn sanitize(part: &str) -> String {
    part.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.+".contains(c) { c } else { '_' }).collect()
}

/// Serves known pairs from the cache and forwards the rest, in one batch,
/// to the wrapped scorer.
pub struct CachedScorer<S> {
    inner: S,
    cache: ScoreCache,
}

impl<S: PairScorer> CachedScorer<S> {
    pub fn new(inner: S, cache: ScoreCache) -> Self {
        Self { inner, cache }
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }
}

impl<S: PairScorer> PairScorer for CachedScorer<S> {
    fn id(&self) -> ScorerId {
        self.inner.id()
    }

    fn score_batch(&mut self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ScorerFailure> {
        let id = self.inner.id();
        let keys: Vec<String> = pairs.iter().map(|(c, s)| cache_key(&id, c, s)).collect();
        let mut out: Vec<Option<f64>> = keys.iter().map(|k| self.cache.lookup(k)).collect();
        let misses: Vec<usize> = (0..pairs.len()).filter(|&i| out[i].is_none()).collect();
        if !misses.is_empty() {
            let batch: Vec<(&str, &str)> = misses.iter().map(|&i| pairs[i]).collect();
            let scores = self.inner.score_batch(&batch)?;
            if scores.len() != batch.len() {
                return Err(ScorerFailure::Protocol {
                    scorer: id.name.to_string(),
                    message: format!("{} scores for {} pairs", scores.len(), batch.len()),
                });
            }
            for (&i, score) in misses.iter().zip(scores) {
                if let Err(e) = self.cache.store(keys[i].clone(), score) {
                    warn!("score cache write failed: {e:#}");
                }
                out[i] = Some(score);
            }
        }
        Ok(out.into_iter().map(|s| s.expect("every pair scored")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use summrank_core::semantic::ScorerKind;

    fn id(version: &str) -> ScorerId {
        ScorerId { name: ScorerKind::BertScore, version: version.into() }
    }

    #[test]
    fn store_then_lookup_persists() {
        let dir = tempfile::tempdir().unwrap();
        let key = cache_key(&id("1"), "cand", "src");
        {
            let mut c = ScoreCache::open(dir.path(), &id("1")).unwrap();
            assert_eq!(c.lookup(&key), None);
            c.store(key.clone(), -0.125).unwrap();
            assert_eq!(c.lookup(&key), Some(-0.125));
        }
        let c = ScoreCache::open(dir.path(), &id("1")).unwrap();
        assert_eq!(c.lookup(&key), Some(-0.125));
        let other = ScoreCache::open(dir.path(), &id("2")).unwrap();
        assert!(other.is_empty());
    }

    #[test]
    fn keys_separate_near_identical_inputs() {
        let texts = ["a b", "a c", "a  b", "a b ", "b a", ""];
        let mut keys: Vec<String> = Vec::new();
        for c in texts {
            for s in texts {
                keys.push(cache_key(&id("1"), c, s));
            }
        }
        // Moving the separator between the two texts changes the key too.
        keys.push(cache_key(&id("1"), "ab", "c"));
        keys.push(cache_key(&id("1"), "a", "bc"));
        let n = keys.len();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), n);
    }

    #[test]
    fn corrupt_lines_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let key = cache_key(&id("1"), "x", "y");
        {
            let mut c = ScoreCache::open(dir.path(), &id("1")).unwrap();
            c.store(key.clone(), 0.5).unwrap();
        }
        let path = ScoreCache::open(dir.path(), &id("1")).unwrap().path().to_path_buf();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        writeln!(f, "not a record").unwrap();
        writeln!(f, "{} NaN", "ab".repeat(32)).unwrap();
        write!(f, "{}", &key[..10]).unwrap();
        let mut c = ScoreCache::open(dir.path(), &id("1")).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.lookup(&key), Some(0.5));
        let fresh = cache_key(&id("1"), "x", "z");
        c.store(fresh.clone(), 0.25).unwrap();
        drop(c);
        assert_eq!(ScoreCache::open(dir.path(), &id("1")).unwrap().lookup(&fresh), Some(0.25));
    }
}
