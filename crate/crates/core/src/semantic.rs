//! Semantic-similarity features behind a single scorer interface.
//!
//! Neural scorers (BERTScore-, BARTScore- and BLEURT-class models) are
//! reached through the remote client of the `summrank` crate. The builtin
//! lexical scorer defined here is a deterministic stand-in: the cosine of
//! idf-weighted bag-of-words vectors.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ScorerFailure};
use crate::text::{tokenize_to_vec, TokenizerConfig};
use crate::util::fnv1a;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScorerKind {
    BuiltinLexical,
    BertScore,
    BartScore,
    Bleurt,
    /// Any other metric name understood by a remote scorer.
    Custom(String),
}

impl ScorerKind {
    pub fn as_str(&self) -> &str {
        match self {
            ScorerKind::BuiltinLexical => "builtin-lexical",
            ScorerKind::BertScore => "bertscore",
            ScorerKind::BartScore => "bartscore",
            ScorerKind::Bleurt => "bleurt",
            ScorerKind::Custom(name) => name,
        }
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self, ScorerKind::BuiltinLexical)
    }
}

impl FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "builtin-lexical" => ScorerKind::BuiltinLexical,
            "bertscore" => ScorerKind::BertScore,
            "bartscore" => ScorerKind::BartScore,
            "bleurt" => ScorerKind::Bleurt,
            "" => return Err(Error::param("empty scorer name")),
            other => ScorerKind::Custom(String::from(other)),
        })
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ScorerKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ScorerKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A scorer name plus the version that pins its semantics. Cache keys
/// embed both.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScorerId {
    pub name: ScorerKind,
    pub version: String,
}

/// Scores (candidate, source) pairs.
///
/// Implementations return one score per pair, in input order. Scores of
/// remote scorers are passed through unmodified and may be negative.
pub trait PairScorer {
    fn id(&self) -> ScorerId;

    fn score_batch(&mut self, pairs: &[(&str, &str)]) -> core::result::Result<Vec<f64>, ScorerFailure>;
}

/// Smoothed inverse document frequency: `ln((1 + D) / (1 + df)) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    documents: usize,
    doc_freq: BTreeMap<String, usize>,
    flat: bool,
}

impl IdfTable {
    pub fn from_documents<'a, I>(documents: I, config: &TokenizerConfig) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
        let mut count = 0;
        for text in documents {
            count += 1;
            let mut terms = tokenize_to_vec(text, config);
            terms.sort_unstable();
            terms.dedup();
            for term in terms {
                *doc_freq.entry(term).or_insert(0) += 1;
            }
        }
        Self { documents: count, doc_freq, flat: false }
    }

    /// Every term weighs 1.
    pub fn flat() -> Self {
        Self { documents: 0, doc_freq: BTreeMap::new(), flat: true }
    }

    pub fn weight(&self, term: &str) -> f64 {
        if self.flat {
            return 1.0;
        }
        let df = self.doc_freq.get(term).copied().unwrap_or(0);
        libm::log((1.0 + self.documents as f64) / (1.0 + df as f64)) + 1.0
    }

    /// Stable fingerprint of the table, used to version the builtin scorer.
    pub fn fingerprint(&self) -> u64 {
        if self.flat {
            return 0;
        }
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(self.documents as u64).to_le_bytes());
        for (term, df) in &self.doc_freq {
            bytes.extend_from_slice(term.as_bytes());
            bytes.push(0);
            bytes.extend_from_slice(&(*df as u64).to_le_bytes());
        }
        fnv1a(bytes)
    }
}

/// Cosine similarity of idf-weighted token-count vectors, in [0, 1].
pub fn builtin_lexical_score(candidate: &str, source: &str, idf: &IdfTable, config: &TokenizerConfig) -> f64 {
    let a = bag(candidate, config);
    let b = bag(source, config);
    weighted_cosine(&a, &b, idf)
}

fn bag(text: &str, config: &TokenizerConfig) -> BTreeMap<String, f64> {
    let mut counts = BTreeMap::new();
    for t in tokenize_to_vec(text, config) {
        *counts.entry(t).or_insert(0.0) += 1.0;
    }
    counts
}

fn weighted_cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>, idf: &IdfTable) -> f64 {
    let norm = |m: &BTreeMap<String, f64>| {
        m.iter()
            .map(|(t, c)| {
                let w = c * idf.weight(t);
                w * w
            })
            .sum::<f64>()
    };
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a
        .iter()
        .filter_map(|(t, ca)| {
            b.get(t).map(|cb| {
                let w = idf.weight(t);
                (ca * w) * (cb * w)
            })
        })
        .sum();
    (dot / libm::sqrt(na * nb)).clamp(0.0, 1.0)
}

/// The builtin lexical scorer. Its version embeds the idf fingerprint so
/// cached scores never leak across corpora.
#[derive(Debug, Clone)]
pub struct BuiltinLexical {
    idf: IdfTable,
    config: TokenizerConfig,
}

impl BuiltinLexical {
    pub const VERSION: &'static str = "1";

    pub fn new(idf: IdfTable, config: TokenizerConfig) -> Self {
        Self { idf, config }
    }

    /// Idf computed over the source documents of the corpus.
    pub fn for_sources<'a, I>(sources: I, config: &TokenizerConfig) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        Self::new(IdfTable::from_documents(sources, config), config.clone())
    }

    pub fn score(&self, candidate: &str, source: &str) -> f64 {
        builtin_lexical_score(candidate, source, &self.idf, &self.config)
    }
}

impl PairScorer for BuiltinLexical {
    fn id(&self) -> ScorerId {
        ScorerId {
            name: ScorerKind::BuiltinLexical,
            version: format!("{}+idf.{:016x}", Self::VERSION, self.idf.fingerprint()),
        }
    }

    fn score_batch(&mut self, pairs: &[(&str, &str)]) -> core::result::Result<Vec<f64>, ScorerFailure> {
        Ok(pairs.iter().map(|(c, s)| self.score(c, s)).collect())
    }
}
