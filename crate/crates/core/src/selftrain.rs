//! Pseudo-label export for self-training.
//!
//! The selected candidate of every document becomes its training target.
//! The most extractive share of the records is flagged for an external
//! paraphrasing pass.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::evaluation::{novel_fraction, NOVELTY_ORDERS};
use crate::rerank::Selection;
use crate::text::{tokenize_to_vec, TokenizerConfig};
use crate::util::ceil_fraction;

/// Paraphrase shares commonly used for the flag.
pub const STANDARD_SHARES: [f64; 4] = [0.125, 0.25, 0.5, 1.0];

/// `1 - mean novel n-gram fraction` for n = 1..=3, over the orders the
/// candidate has n-grams of. An empty candidate scores 0.
pub fn extractiveness(candidate: &str, source: &str, config: &TokenizerConfig) -> f64 {
    let cand = tokenize_to_vec(candidate, config);
    let src = tokenize_to_vec(source, config);
    extractiveness_of_tokens(&cand, &src)
}

pub fn extractiveness_of_tokens(candidate: &[String], source: &[String]) -> f64 {
    let fractions: Vec<f64> = (1..=NOVELTY_ORDERS).filter_map(|n| novel_fraction(candidate, source, n)).collect();
    if fractions.is_empty() {
        return 0.0;
    }
    1.0 - fractions.iter().sum::<f64>() / fractions.len() as f64
}

/// One line of the label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudoLabelRecord {
    pub id: String,
    pub target: String,
    pub extractiveness: f64,
    pub paraphrase: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelExport {
    /// Sorted by document id.
    pub records: Vec<PseudoLabelRecord>,
    pub flagged: usize,
    pub mean_extractiveness: f64,
}

/// Builds the label records and flags the `ceil(share * N)` most
/// extractive ones (ties to the smaller id).
pub fn export_labels(
    corpus: &[Document],
    selections: &[Selection],
    share: f64,
    config: &TokenizerConfig,
) -> Result<LabelExport> {
    if !(share > 0.0 && share <= 1.0) {
        return Err(Error::param(format!("paraphrase share must be in (0, 1], got {share}")));
    }
    let by_id: BTreeMap<&str, &Selection> = selections.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut records = Vec::with_capacity(corpus.len());
    for doc in corpus {
        let sel = by_id.get(doc.id.as_str()).ok_or_else(|| Error::Validation {
            id: doc.id.clone(),
            reason: String::from("no selection for document"),
        })?;
        let target = doc.candidates.get(sel.chosen).ok_or_else(|| Error::Validation {
            id: doc.id.clone(),
            reason: format!("selection {} outside a pool of {}", sel.chosen, doc.candidates.len()),
        })?;
        records.push(PseudoLabelRecord {
            id: doc.id.clone(),
            target: target.clone(),
            extractiveness: extractiveness(target, &doc.source, config),
            paraphrase: false,
        });
    }
    if selections.len() != corpus.len() {
        return Err(Error::param(format!("{} selections for {} documents", selections.len(), corpus.len())));
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));

    let flagged = if records.is_empty() { 0 } else { ceil_fraction(share, records.len()).clamp(1, records.len()) };
    let mut order: Vec<usize> = (0..records.len()).collect();
    // Records are already in id order, so a stable sort settles ties by id.
    order.sort_by(|&a, &b| records[b].extractiveness.total_cmp(&records[a].extractiveness));
    for &i in order.iter().take(flagged) {
        records[i].paraphrase = true;
    }
    let mean_extractiveness = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.extractiveness).sum::<f64>() / records.len() as f64
    };
    Ok(LabelExport { records, flagged, mean_extractiveness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn extractiveness_examples() {
        let cfg = TokenizerConfig::default();
        let src = "the cat sat on the mat";
        assert_eq!(extractiveness(src, src, &cfg), 1.0);
        assert_eq!(extractiveness("sat on the", src, &cfg), 1.0);
        assert_eq!(extractiveness("dogs bark loudly", src, &cfg), 0.0);
        assert_eq!(extractiveness("", src, &cfg), 0.0);
        // Novel shares by hand: unigrams 0/3, bigrams 1/2 ("a a"), trigrams 1/1.
        assert_eq!(extractiveness_of_tokens(&words("a a b"), &words("a b c d e f")), 0.5);
    }

    fn corpus(n: usize) -> (Vec<Document>, Vec<Selection>) {
        let src = "a b c d e f g h";
        // Candidate i keeps i source tokens and replaces the rest, so
        // extractiveness increases with i.
        let docs: Vec<Document> = (0..n)
            .map(|i| {
                let kept: Vec<&str> = src.split(' ').take(i).collect();
                let novel: Vec<String> = (i..8).map(|j| format!("z{j}")).collect();
                let mut cand = kept.join(" ");
                cand.push(' ');
                cand.push_str(&novel.join(" "));
                Document::new(format!("doc{}", n - i), src, vec![cand.trim().into()])
            })
            .collect();
        let sels = docs
            .iter()
            .map(|d| Selection { id: d.id.clone(), strategy: "summscore".into(), chosen: 0, scores: vec![1.0] })
            .collect();
        (docs, sels)
    }

    #[test]
    fn quarter_share_flags_the_two_most_extractive_of_eight() {
        let (docs, sels) = corpus(8);
        let out = export_labels(&docs, &sels, 0.25, &TokenizerConfig::default()).unwrap();
        assert_eq!(out.flagged, 2);
        let flagged: Vec<&str> = out.records.iter().filter(|r| r.paraphrase).map(|r| r.id.as_str()).collect();
        // doc1 and doc2 keep 7 and 6 source tokens.
        assert_eq!(flagged, vec!["doc1", "doc2"]);
        assert!(out.records.windows(2).all(|w| w[0].id < w[1].id));
    }

    #[test]
    fn share_bounds() {
        let (docs, sels) = corpus(3);
        let cfg = TokenizerConfig::default();
        assert!(export_labels(&docs, &sels, 0.0, &cfg).is_err());
        assert!(export_labels(&docs, &sels, 1.01, &cfg).is_err());
        let all = export_labels(&docs, &sels, 1.0, &cfg).unwrap();
        assert!(all.records.iter().all(|r| r.paraphrase));
        let tiny = export_labels(&docs, &sels, 1e-9, &cfg).unwrap();
        assert_eq!(tiny.flagged, 1);
    }

    #[test]
    fn ties_go_to_smaller_id() {
        let docs: Vec<Document> =
            ["b", "a", "c"].iter().map(|id| Document::new(*id, "x y", vec!["x y".into()])).collect();
        let sels: Vec<Selection> = docs
            .iter()
            .map(|d| Selection { id: d.id.clone(), strategy: "first".into(), chosen: 0, scores: vec![0.0] })
            .collect();
        let out = export_labels(&docs, &sels, 0.5, &TokenizerConfig::default()).unwrap();
        let flagged: Vec<&str> = out.records.iter().filter(|r| r.paraphrase).map(|r| r.id.as_str()).collect();
        assert_eq!(flagged, vec!["a", "b"]);
    }

    #[test]
    fn missing_selection_is_reported() {
        let (docs, mut sels) = corpus(3);
        sels.pop();
        assert!(matches!(export_labels(&docs, &sels, 0.5, &TokenizerConfig::default()), Err(Error::Validation { .. })));
    }

    proptest! {
        #[test]
        fn flag_count_is_ceil(n in 1usize..40, share in 0.001f64..=1.0) {
            let (docs, sels) = corpus(n.min(8));
            let out = export_labels(&docs, &sels, share, &TokenizerConfig::default()).unwrap();
            let expected = ceil_fraction(share, docs.len()).max(1);
            prop_assert_eq!(out.records.iter().filter(|r| r.paraphrase).count(), expected);
            prop_assert_eq!(out.flagged, expected);
        }

        #[test]
        fn substituting_novel_tokens_never_raises_extractiveness(
            source in proptest::collection::vec("[a-e]", 3..12),
            positions in proptest::collection::vec(any::<prop::sample::Index>(), 1..6),
        ) {
            let mut cand = source.clone();
            let mut last = extractiveness_of_tokens(&cand, &source);
            prop_assert_eq!(last, 1.0);
            for (step, p) in positions.iter().enumerate() {
                let i = p.index(cand.len());
                if cand[i].starts_with('n') {
                    continue;
                }
                cand[i] = format!("n{step}");
                let now = extractiveness_of_tokens(&cand, &source);
                prop_assert!(now <= last + 1e-12);
                last = now;
            }
        }
    }
}
