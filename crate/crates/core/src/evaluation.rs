//! Reference-based evaluation: baseline selectors, mean-ROUGE tables,
//! recall@k against the oracle set, overlap with trivial selectors and
//! novel n-gram rates.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::features::DocumentFeatures;
use crate::metrics::RougeScores;
use crate::rerank::{argmax, argmin};
use crate::text::{tokenize_to_vec, NgramMultiset, TokenizedText, TokenizerConfig};
use crate::util::{doc_seed, rng};

/// Candidate thresholds of recall curves; the pool size is always added.
pub const RECALL_THRESHOLDS: [usize; 12] = [1, 2, 3, 4, 5, 7, 10, 15, 20, 30, 50, 100];

/// Orders used by the novel n-gram statistics.
pub const NOVELTY_ORDERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    First,
    Random,
    Minimum,
    Oracle,
    SummScore,
    Longest,
    MaxFeature(String),
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::First => String::from("first"),
            Strategy::Random => String::from("random"),
            Strategy::Minimum => String::from("minimum"),
            Strategy::Oracle => String::from("oracle"),
            Strategy::SummScore => String::from("summscore"),
            Strategy::Longest => String::from("longest"),
            Strategy::MaxFeature(f) => format!("max-feature:{f}"),
        }
    }

    pub fn needs_reference(&self) -> bool {
        matches!(self, Strategy::Oracle | Strategy::Minimum)
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "first" => Strategy::First,
            "random" => Strategy::Random,
            "minimum" => Strategy::Minimum,
            "oracle" => Strategy::Oracle,
            "summscore" => Strategy::SummScore,
            "longest" => Strategy::Longest,
            _ => match s.strip_prefix("max-feature:") {
                Some(f) if !f.is_empty() => Strategy::MaxFeature(String::from(f)),
                _ => return Err(Error::param(format!("unknown strategy `{s}`"))),
            },
        })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// ROUGE of every candidate against the document's reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceScores {
    pub per_document: Vec<Vec<RougeScores>>,
}

impl ReferenceScores {
    pub fn compute(corpus: &[Document], config: &TokenizerConfig) -> Result<Self> {
        let per_document = corpus
            .iter()
            .map(|doc| {
                let reference = doc.reference.as_deref().ok_or_else(|| Error::Validation {
                    id: doc.id.clone(),
                    reason: String::from("reference summary required for evaluation"),
                })?;
                let reference = TokenizedText::new(reference, config);
                Ok(doc
                    .candidates
                    .iter()
                    .map(|c| RougeScores::compute(&TokenizedText::new(c, config), &reference))
                    .collect())
            })
            .collect::<Result<Vec<Vec<RougeScores>>>>()?;
        Ok(Self { per_document })
    }
}

/// Inputs a selector may need for one document.
#[derive(Debug, Clone, Copy)]
pub struct SelectionContext<'a> {
    pub references: Option<&'a [RougeScores]>,
    pub features: Option<&'a DocumentFeatures>,
    pub feature_names: &'a [&'a str],
    pub summscore: Option<usize>,
    pub seed: u64,
    pub tokenizer: &'a TokenizerConfig,
}

/// Chosen candidate index of `strategy` on one document; ties go to the
/// lowest index.
pub fn baseline_select(strategy: &Strategy, doc: &Document, ctx: &SelectionContext<'_>) -> Result<usize> {
    let k = doc.candidates.len();
    if k == 0 {
        return Err(Error::Validation { id: doc.id.clone(), reason: String::from("document has no candidates") });
    }
    let references =
        || ctx.references.ok_or_else(|| Error::param(format!("strategy `{strategy}` requires references")));
    let index = match strategy {
        Strategy::First => Some(0),
        Strategy::Random => Some(rng(doc_seed(ctx.seed, &doc.id)).random_range(0..k)),
        Strategy::Oracle => argmax(&references()?.iter().map(RougeScores::mean).collect::<Vec<_>>()),
        Strategy::Minimum => argmin(&references()?.iter().map(RougeScores::mean).collect::<Vec<_>>()),
        Strategy::Longest => {
            argmax(&doc.candidates.iter().map(|c| tokenize_to_vec(c, ctx.tokenizer).len() as f64).collect::<Vec<_>>())
        }
        Strategy::SummScore => {
            Some(ctx.summscore.ok_or_else(|| Error::param("strategy `summscore` requires a selection"))?)
        }
        Strategy::MaxFeature(name) => {
            let j = ctx
                .feature_names
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| Error::param(format!("unknown feature `{name}`")))?;
            let features =
                ctx.features.ok_or_else(|| Error::param(format!("strategy `{strategy}` requires features")))?;
            argmax(&features.raw.iter().map(|r| r[j]).collect::<Vec<_>>())
        }
    };
    let index = index.ok_or_else(|| Error::Validation {
        id: doc.id.clone(),
        reason: format!("strategy `{strategy}` found no candidate"),
    })?;
    if index >= k {
        return Err(Error::Validation {
            id: doc.id.clone(),
            reason: format!("selection {index} outside a pool of {k}"),
        });
    }
    Ok(index)
}

/// Corpus means of one strategy's selections. `mean_rouge` is the mean of
/// the per-document (R-1 + R-2 + R-LSum) / 3 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: String,
    pub chosen: Vec<usize>,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_lsum: f64,
    pub mean_rouge: f64,
    pub gain_pct: Option<f64>,
}

pub fn score_selection(strategy: &str, chosen: Vec<usize>, references: &ReferenceScores) -> Result<StrategyResult> {
    let n = references.per_document.len();
    if chosen.len() != n {
        return Err(Error::param(format!("{} selections for {n} documents", chosen.len())));
    }
    if n == 0 {
        return Err(Error::param("cannot evaluate an empty corpus"));
    }
    let mut sums = [0.0; 4];
    for (scores, &c) in references.per_document.iter().zip(&chosen) {
        let s =
            scores.get(c).ok_or_else(|| Error::param(format!("selection {c} outside a pool of {}", scores.len())))?;
        sums[0] += s.rouge1;
        sums[1] += s.rouge2;
        sums[2] += s.rouge_lsum;
        sums[3] += s.mean();
    }
    let n = n as f64;
    Ok(StrategyResult {
        strategy: String::from(strategy),
        chosen,
        rouge1: sums[0] / n,
        rouge2: sums[1] / n,
        rouge_lsum: sums[2] / n,
        mean_rouge: sums[3] / n,
        gain_pct: None,
    })
}

/// Relative gain in percent: `100 * (selected - baseline) / baseline`.
pub fn gain(selected: f64, baseline: f64) -> Result<f64> {
    if baseline == 0.0 || !baseline.is_finite() {
        return Err(Error::UndefinedGain);
    }
    Ok(100.0 * (selected - baseline) / baseline)
}

/// Fills `gain_pct` of every row relative to the row named `baseline`.
pub fn attach_gains(results: &mut [StrategyResult], baseline: &str) -> Result<()> {
    let base = results
        .iter()
        .find(|r| r.strategy == baseline)
        .map(|r| r.mean_rouge)
        .ok_or_else(|| Error::param(format!("baseline strategy `{baseline}` is not in the report")))?;
    for r in results.iter_mut() {
        r.gain_pct = gain(r.mean_rouge, base).ok();
    }
    Ok(())
}

/// Indices of every candidate tied for the best mean ROUGE.
pub fn oracle_set(scores: &[RougeScores]) -> Vec<usize> {
    let means: Vec<f64> = scores.iter().map(RougeScores::mean).collect();
    match argmax(&means) {
        Some(best) => (0..means.len()).filter(|&c| means[c] == means[best]).collect(),
        None => Vec::new(),
    }
}

pub fn oracle_sets(references: &ReferenceScores) -> Vec<Vec<usize>> {
    (0..references.per_document.len()).map(|i| oracle_set(&references.per_document[i])).collect()
}

/// Candidate indices by decreasing score, ties by index; NaN last.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match (scores[a].is_nan(), scores[b].is_nan()) {
        (false, false) => scores[b].total_cmp(&scores[a]),
        (x, y) => x.cmp(&y),
    });
    order
}

/// Fraction of documents whose top-`k` candidates include an oracle one.
pub fn recall_at_k(rankings: &[Vec<usize>], oracle_sets: &[Vec<usize>], k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::param("recall@k needs k >= 1"));
    }
    if rankings.len() != oracle_sets.len() || rankings.is_empty() {
        return Err(Error::param("rankings and oracle sets must cover the same non-empty corpus"));
    }
    if oracle_sets.iter().any(Vec::is_empty) {
        return Err(Error::param("every document needs a non-empty oracle set"));
    }
    let hits = rankings
        .iter()
        .zip(oracle_sets)
        .filter(|(rank, oracle)| rank.iter().take(k).any(|c| oracle.contains(c)))
        .count();
    Ok(hits as f64 / rankings.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallCurve {
    pub points: Vec<(usize, f64)>,
}

/// Recall at the standard thresholds below the largest pool, and at the
/// largest pool size itself.
pub fn recall_curve(rankings: &[Vec<usize>], oracle_sets: &[Vec<usize>]) -> Result<RecallCurve> {
    let pool = rankings.iter().map(Vec::len).max().unwrap_or(0);
    let mut ks: Vec<usize> = RECALL_THRESHOLDS.iter().copied().filter(|&k| k < pool).collect();
    ks.push(pool.max(1));
    let points = ks.into_iter().map(|k| Ok((k, recall_at_k(rankings, oracle_sets, k)?))).collect::<Result<_>>()?;
    Ok(RecallCurve { points })
}

/// Percent of documents where `selection` agrees with each other selector.
pub fn overlap_diagnostics(selection: &[usize], others: &[(String, Vec<usize>)]) -> Result<Vec<(String, f64)>> {
    others
        .iter()
        .map(|(name, chosen)| {
            if chosen.len() != selection.len() {
                return Err(Error::param(format!("strategy `{name}` covers a different corpus")));
            }
            let same = selection.iter().zip(chosen).filter(|(a, b)| a == b).count();
            let pct = if selection.is_empty() { 0.0 } else { 100.0 * same as f64 / selection.len() as f64 };
            Ok((name.clone(), pct))
        })
        .collect()
}

/// Share of the candidate's `n`-gram occurrences that never occur in the
/// source; `None` when the candidate has no `n`-grams.
pub fn novel_fraction(candidate: &[String], source: &[String], n: usize) -> Option<f64> {
    let cand = NgramMultiset::of(candidate, n);
    if cand.total() == 0 {
        return None;
    }
    let source: BTreeSet<&[String]> = source.windows(n).collect();
    let novel: usize = cand.counts().iter().filter(|(gram, _)| !source.contains(*gram)).map(|(_, count)| count).sum();
    Some(novel as f64 / cand.total() as f64)
}

/// Corpus mean of the novel n-gram fraction for n = 1, 2, 3. Documents
/// whose selected summary has no n-grams of an order are left out of that
/// order's mean.
pub fn abstractiveness(selected: &[&str], sources: &[&str], config: &TokenizerConfig) -> Result<[f64; NOVELTY_ORDERS]> {
    if selected.len() != sources.len() {
        return Err(Error::param("selections and sources differ in length"));
    }
    let mut sums = [0.0; NOVELTY_ORDERS];
    let mut counts = [0usize; NOVELTY_ORDERS];
    for (cand, src) in selected.iter().zip(sources) {
        let cand = tokenize_to_vec(cand, config);
        let src = tokenize_to_vec(src, config);
        for n in 1..=NOVELTY_ORDERS {
            if let Some(f) = novel_fraction(&cand, &src, n) {
                sums[n - 1] += f;
                counts[n - 1] += 1;
            }
        }
    }
    let mut out = [0.0; NOVELTY_ORDERS];
    for n in 0..NOVELTY_ORDERS {
        if counts[n] > 0 {
            out[n] = sums[n] / counts[n] as f64;
        }
    }
    Ok(out)
}
