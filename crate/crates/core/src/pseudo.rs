//! Pseudo-summaries extracted from the source document itself: LEAD-3,
//! Random-3 and the three salient-sentence variants.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{rouge_l, rouge_n};
use crate::text::{tokenize_to_vec, SentenceList, TokenizerConfig};
use crate::util::{ceil_fraction, rng};

/// Share of source sentences kept by the salient-sentence targets.
pub const DEFAULT_SALIENT_RATIO: f64 = 0.30;

const FIXED_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PseudoMethod {
    #[serde(rename = "random3")]
    Random3,
    #[serde(rename = "lead3")]
    Lead3,
    #[serde(rename = "salient-r1")]
    SalientR1,
    #[serde(rename = "salient-r2")]
    SalientR2,
    #[serde(rename = "salient-rl")]
    SalientRl,
}

impl PseudoMethod {
    pub const ALL: [PseudoMethod; 5] = [
        PseudoMethod::Random3,
        PseudoMethod::Lead3,
        PseudoMethod::SalientR1,
        PseudoMethod::SalientR2,
        PseudoMethod::SalientRl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PseudoMethod::Random3 => "random3",
            PseudoMethod::Lead3 => "lead3",
            PseudoMethod::SalientR1 => "salient-r1",
            PseudoMethod::SalientR2 => "salient-r2",
            PseudoMethod::SalientRl => "salient-rl",
        }
    }
}

impl FromStr for PseudoMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PseudoMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown pseudo-target method `{s}`")))
    }
}

impl fmt::Display for PseudoMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SalientVariant {
    R1,
    R2,
    Rl,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoTarget {
    pub method: PseudoMethod,
    pub text: String,
    /// Selected source sentence positions, strictly increasing.
    pub sentence_indices: Vec<usize>,
}

impl PseudoTarget {
    fn from_indices(method: PseudoMethod, doc: &SentenceList, indices: Vec<usize>) -> Self {
        let text = indices.iter().map(|&i| doc.sentences()[i].as_str()).collect::<Vec<_>>().join(" ");
        Self { method, text, sentence_indices: indices }
    }
}

fn non_empty(doc: &SentenceList) -> Result<()> {
    if doc.is_empty() {
        Err(Error::DegenerateInput(String::from("document has no sentences")))
    } else {
        Ok(())
    }
}

pub fn lead3(doc: &SentenceList) -> Result<PseudoTarget> {
    non_empty(doc)?;
    let n = doc.len().min(FIXED_COUNT);
    Ok(PseudoTarget::from_indices(PseudoMethod::Lead3, doc, (0..n).collect()))
}

/// Three sentences drawn without replacement, emitted in document order.
pub fn random3(doc: &SentenceList, seed: u64) -> Result<PseudoTarget> {
    non_empty(doc)?;
    let n = doc.len().min(FIXED_COUNT);
    let mut picked = index::sample(&mut rng(seed), doc.len(), n).into_vec();
    picked.sort_unstable();
    Ok(PseudoTarget::from_indices(PseudoMethod::Random3, doc, picked))
}

/// Scores every sentence independently by ROUGE F1 against the remaining
/// sentences concatenated, keeps the top `max(1, ceil(ratio * n))` (ties
/// to the earlier sentence) and returns them in document order.
pub fn salient(
    doc: &SentenceList,
    variant: SalientVariant,
    ratio: f64,
    config: &TokenizerConfig,
) -> Result<PseudoTarget> {
    non_empty(doc)?;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::param(format!("salient ratio must be in (0, 1], got {ratio}")));
    }
    let tokens: Vec<Vec<String>> = doc.sentences().iter().map(|s| tokenize_to_vec(s, config)).collect();
    let scores = salience_scores(&tokens, variant);

    let keep = ceil_fraction(ratio, doc.len()).max(1).min(doc.len());
    let mut order: Vec<usize> = (0..doc.len()).collect();
    // Stable sort keeps earlier sentences first among equal scores.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut chosen: Vec<usize> = order.into_iter().take(keep).collect();
    chosen.sort_unstable();

    let method = match variant {
        SalientVariant::R1 => PseudoMethod::SalientR1,
        SalientVariant::R2 => PseudoMethod::SalientR2,
        SalientVariant::Rl => PseudoMethod::SalientRl,
    };
    Ok(PseudoTarget::from_indices(method, doc, chosen))
}

/// Per-sentence F1 against the rest of the document.
pub fn salience_scores(sentences: &[Vec<String>], variant: SalientVariant) -> Vec<f64> {
    (0..sentences.len())
        .map(|i| {
            let rest: Vec<String> =
                sentences.iter().enumerate().filter(|&(j, _)| j != i).flat_map(|(_, s)| s.iter().cloned()).collect();
            let sent = &sentences[i];
            match variant {
                SalientVariant::R1 => rouge_n(sent, &rest, 1).f1,
                SalientVariant::R2 => rouge_n(sent, &rest, 2).f1,
                SalientVariant::Rl => rouge_l(sent, &rest).f1,
            }
        })
        .collect()
}

/// Builds the pseudo-target of one document. `seed` is only consumed by
/// Random-3; callers pass a per-document seed (see [`crate::doc_seed`]).
pub fn extract(
    method: PseudoMethod,
    doc: &SentenceList,
    seed: u64,
    salient_ratio: f64,
    config: &TokenizerConfig,
) -> Result<PseudoTarget> {
    match method {
        PseudoMethod::Lead3 => lead3(doc),
        PseudoMethod::Random3 => random3(doc, seed),
        PseudoMethod::SalientR1 => salient(doc, SalientVariant::R1, salient_ratio, config),
        PseudoMethod::SalientR2 => salient(doc, SalientVariant::R2, salient_ratio, config),
        PseudoMethod::SalientRl => salient(doc, SalientVariant::Rl, salient_ratio, config),
    }
}
