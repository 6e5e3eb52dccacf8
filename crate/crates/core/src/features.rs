//! Per-candidate feature vectors and their normalization.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::metrics::{bleu, diversity, length_score, rouge_n};
use crate::semantic::{PairScorer, ScorerKind};
use crate::text::{tokenize_to_vec, TokenizerConfig};

pub const ROUGE1_SRC: &str = "rouge1_src";
pub const ROUGE2_SRC: &str = "rouge2_src";
pub const BLEU_SRC: &str = "bleu_src";
pub const DIVERSITY: &str = "diversity";
pub const LENGTH: &str = "length";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Overlap,
    Semantic,
    Quality,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureId {
    pub name: String,
    pub group: FeatureGroup,
}

/// Ordered feature ids: overlap features, one semantic feature per
/// configured scorer, then diversity and length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    ids: Vec<FeatureId>,
}

impl FeatureSpec {
    pub fn new(semantic: &[ScorerKind]) -> Self {
        let mut ids = Vec::with_capacity(5 + semantic.len());
        let mut push = |name: &str, group| ids.push(FeatureId { name: String::from(name), group });
        push(ROUGE1_SRC, FeatureGroup::Overlap);
        push(ROUGE2_SRC, FeatureGroup::Overlap);
        push(BLEU_SRC, FeatureGroup::Overlap);
        for kind in semantic {
            push(kind.as_str(), FeatureGroup::Semantic);
        }
        push(DIVERSITY, FeatureGroup::Quality);
        push(LENGTH, FeatureGroup::Quality);
        Self { ids }
    }

    /// Rebuilds a spec from its feature names (as stored in feature files).
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let names: Vec<&str> = names.iter().map(AsRef::as_ref).collect();
        let fixed_head = [ROUGE1_SRC, ROUGE2_SRC, BLEU_SRC];
        let fixed_tail = [DIVERSITY, LENGTH];
        let ok = names.len() >= 5 && names[..3] == fixed_head && names[names.len() - 2..] == fixed_tail;
        if !ok {
            return Err(Error::param(format!("unrecognized feature layout {names:?}")));
        }
        let semantic = names[3..names.len() - 2].iter().map(|n| n.parse()).collect::<Result<Vec<ScorerKind>>>()?;
        Ok(Self::new(&semantic))
    }

    pub fn ids(&self) -> &[FeatureId] {
        &self.ids
    }

    pub fn names(&self) -> Vec<&str> {
        self.ids.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.ids.iter().position(|f| f.name == name)
    }

    pub fn group_indices(&self, group: FeatureGroup) -> Vec<usize> {
        (0..self.ids.len()).filter(|&i| self.ids[i].group == group).collect()
    }

    pub fn semantic_kinds(&self) -> Vec<ScorerKind> {
        self.ids
            .iter()
            .filter(|f| f.group == FeatureGroup::Semantic)
            .map(|f| f.name.parse().expect("semantic ids are scorer names"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    #[default]
    PerInstanceMinmax,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::PerInstanceMinmax => "per_instance_minmax",
        }
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "per_instance_minmax" => Ok(Normalization::PerInstanceMinmax),
            other => Err(Error::param(format!("unknown normalization `{other}`"))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Feature rows of one document: `raw[c][j]` is feature `j` of candidate
/// `c`, `values` the same after normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentFeatures {
    pub id: String,
    pub raw: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl DocumentFeatures {
    pub fn k(&self) -> usize {
        self.raw.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub spec: FeatureSpec,
    pub normalization: Normalization,
    pub mu_len: f64,
    pub documents: Vec<DocumentFeatures>,
}

impl FeatureMatrix {
    /// Re-applies `mode` to the raw values.
    pub fn normalized(mut self, mode: Normalization) -> Self {
        for doc in &mut self.documents {
            doc.values = normalize_rows(&doc.raw, mode);
        }
        self.normalization = mode;
        self
    }

    pub fn check_shape(&self) -> Result<()> {
        let d = self.spec.len();
        for doc in &self.documents {
            let bad_row = doc.raw.iter().chain(&doc.values).any(|r| r.len() != d);
            if bad_row || doc.raw.len() != doc.values.len() || doc.raw.is_empty() {
                return Err(Error::Validation {
                    id: doc.id.clone(),
                    reason: format!("feature rows do not match a k x {d} layout"),
                });
            }
        }
        Ok(())
    }
}

/// Per-column min-max scaling of one document's rows; constant columns
/// map to 0.5.
pub fn normalize_rows(rows: &[Vec<f64>], mode: Normalization) -> Vec<Vec<f64>> {
    if mode == Normalization::None || rows.is_empty() {
        return rows.to_vec();
    }
    let d = rows[0].len();
    let mut out = vec![vec![0.0; d]; rows.len()];
    for j in 0..d {
        let (lo, hi) =
            rows.iter().map(|r| r[j]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        for (i, row) in rows.iter().enumerate() {
            out[i][j] = if span > 0.0 { ((row[j] - lo) / span).clamp(0.0, 1.0) } else { 0.5 };
        }
    }
    out
}

/// Mean candidate token count over the corpus.
pub fn corpus_mu_len(corpus: &[Document], config: &TokenizerConfig) -> f64 {
    let (sum, count) = corpus
        .iter()
        .flat_map(|d| &d.candidates)
        .fold((0usize, 0usize), |(s, c), cand| (s + tokenize_to_vec(cand, config).len(), c + 1));
    if count == 0 {
        0.0
    } else {
        sum as f64 / count as f64
    }
}

/// Raw feature rows for one document given its semantic scores
/// (`semantic[s][c]` = scorer `s` on candidate `c`).
pub fn document_raw_features(
    doc: &Document,
    spec: &FeatureSpec,
    semantic: &[Vec<f64>],
    mu_len: f64,
    config: &TokenizerConfig,
) -> Result<Vec<Vec<f64>>> {
    let n_semantic = spec.group_indices(FeatureGroup::Semantic).len();
    if semantic.len() != n_semantic || semantic.iter().any(|s| s.len() != doc.candidates.len()) {
        return Err(Error::param(format!(
            "document `{}`: expected {n_semantic} semantic score columns of length {}",
            doc.id,
            doc.candidates.len()
        )));
    }
    let source = tokenize_to_vec(&doc.source, config);
    let rows = doc
        .candidates
        .iter()
        .enumerate()
        .map(|(c, text)| {
            let cand = tokenize_to_vec(text, config);
            let mut row = Vec::with_capacity(spec.len());
            row.push(rouge_n(&cand, &source, 1).f1);
            row.push(rouge_n(&cand, &source, 2).f1);
            row.push(bleu(&cand, &source));
            row.extend(semantic.iter().map(|col| col[c]));
            row.push(diversity(&cand).value);
            row.push(length_score(cand.len(), mu_len).value);
            row
        })
        .collect();
    Ok(rows)
}

/// Features of a whole corpus. Each scorer is called once with every
/// (candidate, source) pair of the corpus; the scorers must match the
/// semantic part of `spec` in order.
pub fn compute_features(
    corpus: &[Document],
    spec: &FeatureSpec,
    scorers: &mut [&mut dyn PairScorer],
    mu_len: Option<f64>,
    normalization: Normalization,
    config: &TokenizerConfig,
) -> Result<FeatureMatrix> {
    let expected = spec.semantic_kinds();
    let actual: Vec<ScorerKind> = scorers.iter().map(|s| s.id().name).collect();
    if expected != actual {
        return Err(Error::param(format!("scorers {actual:?} do not match the semantic features {expected:?}")));
    }
    for doc in corpus {
        doc.validate()?;
    }
    let per_doc = semantic_columns(corpus, scorers)?;
    let mu_len = mu_len.unwrap_or_else(|| corpus_mu_len(corpus, config));

    let documents = corpus
        .iter()
        .zip(per_doc)
        .map(|(doc, semantic)| {
            let raw = document_raw_features(doc, spec, &semantic, mu_len, config)?;
            let values = normalize_rows(&raw, normalization);
            Ok(DocumentFeatures { id: doc.id.clone(), raw, values })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FeatureMatrix { spec: spec.clone(), normalization, mu_len, documents })
}

/// Runs every scorer over the corpus and regroups the flat score lists per
/// document: `out[doc][scorer][candidate]`.
pub fn semantic_columns(corpus: &[Document], scorers: &mut [&mut dyn PairScorer]) -> Result<Vec<Vec<Vec<f64>>>> {
    let pairs: Vec<(&str, &str)> =
        corpus.iter().flat_map(|d| d.candidates.iter().map(move |c| (c.as_str(), d.source.as_str()))).collect();
    let mut out: Vec<Vec<Vec<f64>>> = corpus.iter().map(|_| Vec::new()).collect();
    for scorer in scorers.iter_mut() {
        let scores = if pairs.is_empty() { Vec::new() } else { scorer.score_batch(&pairs)? };
        if scores.len() != pairs.len() {
            return Err(Error::param(format!(
                "scorer `{}` returned {} scores for {} pairs",
                scorer.id().name,
                scores.len(),
                pairs.len()
            )));
        }
        let mut rest = scores.as_slice();
        for (doc, slot) in corpus.iter().zip(out.iter_mut()) {
            let (head, tail) = rest.split_at(doc.candidates.len());
            slot.push(head.to_vec());
            rest = tail;
        }
    }
    Ok(out)
}
