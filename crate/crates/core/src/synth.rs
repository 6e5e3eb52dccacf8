//! Synthetic corpora with a planted best candidate, for tests and
//! end-to-end fixtures.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::metrics::{bleu, mean_rouge};
use crate::pseudo::lead3;
use crate::text::{split_sentences, tokenize_to_vec, TokenizerConfig};
use crate::util::rng;

pub const DEFAULT_VOCAB_SIZE: usize = 40;

const WORDS: [&str; 96] = [
    "river", "stone", "market", "garden", "window", "engine", "letter", "mountain", "village", "harbor", "teacher",
    "doctor", "council", "bridge", "forest", "winter", "summer", "station", "island", "castle", "farmer", "pilot",
    "report", "budget", "museum", "signal", "voyage", "planet", "kitchen", "library", "storm", "valley", "crowd",
    "school", "railway", "orchard", "lantern", "factory", "harvest", "meadow", "painter", "soldier", "captain",
    "desert", "candle", "mirror", "compass", "tunnel", "palace", "canyon", "anchor", "basket", "blanket", "cottage",
    "diamond", "feather", "glacier", "hammer", "journal", "kettle", "ladder", "marble", "needle", "oyster", "pepper",
    "quarry", "ribbon", "saddle", "ticket", "umbrella", "velvet", "wagon", "yarn", "zipper", "arrow", "barrel",
    "cabin", "dragon", "falcon", "gravel", "helmet", "insect", "jacket", "kernel", "lemon", "magnet", "nectar",
    "olive", "parcel", "quiver", "rocket", "salmon", "timber", "violin", "walrus", "yogurt",
];

const FIXED: usize = 3;
const MAX_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plant {
    /// One candidate is a lightly edited lead; it has the highest BLEU
    /// against the source and the highest mean ROUGE against the lead.
    #[serde(rename = "bleu-oracle")]
    BleuOracle,
    /// One candidate is the lead verbatim; the others are later windows.
    #[serde(rename = "lead-bias")]
    LeadBias,
    /// Every candidate is the same text.
    #[serde(rename = "uniform")]
    Uniform,
}

impl Plant {
    pub fn as_str(self) -> &'static str {
        match self {
            Plant::BleuOracle => "bleu-oracle",
            Plant::LeadBias => "lead-bias",
            Plant::Uniform => "uniform",
        }
    }
}

impl FromStr for Plant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Plant::BleuOracle, Plant::LeadBias, Plant::Uniform]
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown plant `{s}`")))
    }
}

impl fmt::Display for Plant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_docs: usize,
    pub k: usize,
    pub vocab_size: usize,
    pub plant: Plant,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { seed: 0, n_docs: 20, k: 5, vocab_size: DEFAULT_VOCAB_SIZE, plant: Plant::BleuOracle }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantRecord {
    pub id: String,
    pub planted_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub plants: Vec<PlantRecord>,
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    if config.n_docs < 1 {
        return Err(Error::param("n_docs must be at least 1"));
    }
    if config.k < 2 {
        return Err(Error::param("k must be at least 2"));
    }
    if config.vocab_size < 8 {
        return Err(Error::param("vocab_size must be at least 8"));
    }
    let vocab: Vec<String> = (0..config.vocab_size)
        .map(|i| match WORDS.get(i) {
            Some(w) => String::from(*w),
            None => format!("{}{}", WORDS[i % WORDS.len()], i / WORDS.len()),
        })
        .collect();
    let mut gen = Generator { rng: rng(config.seed), vocab };
    let tokenizer = TokenizerConfig::default();

    let mut documents = Vec::with_capacity(config.n_docs);
    let mut plants = Vec::with_capacity(config.n_docs);
    for i in 0..config.n_docs {
        let id = format!("synth-{i:04}");
        let (doc, planted) = (0..MAX_ATTEMPTS)
            .find_map(|_| gen.document(&id, config, &tokenizer))
            .ok_or_else(|| Error::DegenerateInput(format!("could not plant document `{id}`")))?;
        documents.push(doc);
        plants.push(PlantRecord { id, planted_index: planted });
    }
    Ok(SynthCorpus { documents, plants })
}

struct Generator {
    rng: ChaCha8Rng,
    vocab: Vec<String>,
}

impl Generator {
    fn word(&mut self) -> String {
        let i = self.rng.random_range(0..self.vocab.len());
        self.vocab[i].clone()
    }

    fn sentence_words(&mut self) -> Vec<String> {
        let len = self.rng.random_range(4..=10);
        (0..len).map(|_| self.word()).collect()
    }

    /// Replaces `count` distinct positions with a different vocabulary word.
    fn substitute(&mut self, words: &[String], count: usize) -> Vec<String> {
        let mut out = words.to_vec();
        let picks = rand::seq::index::sample(&mut self.rng, out.len(), count.min(out.len()));
        for i in picks.iter() {
            loop {
                let w = self.word();
                if w != out[i] {
                    out[i] = w;
                    break;
                }
            }
        }
        out
    }

    fn noisy(&mut self, words: &[String], rate: f64) -> Vec<String> {
        words.iter().map(|w| if self.rng.random::<f64>() < rate { self.word() } else { w.clone() }).collect()
    }

    fn document(
        &mut self,
        id: &str,
        config: &SynthConfig,
        tokenizer: &TokenizerConfig,
    ) -> Option<(Document, Option<usize>)> {
        let n_sentences = self.rng.random_range(5..=12);
        let sentences: Vec<Vec<String>> = (0..n_sentences).map(|_| self.sentence_words()).collect();
        let source = join(&sentences);
        let reference: Vec<Vec<String>> = sentences[..FIXED].iter().map(|s| self.substitute(s, 2)).collect();

        let planted = match config.plant {
            Plant::Uniform => None,
            _ => Some(self.rng.random_range(0..config.k)),
        };
        let mut candidates = Vec::with_capacity(config.k);
        match config.plant {
            Plant::Uniform => {
                let text = join(&self.window(&sentences));
                candidates.resize(config.k, text);
            }
            Plant::LeadBias => {
                for c in 0..config.k {
                    let start = if Some(c) == planted { 0 } else { self.rng.random_range(1..=n_sentences - FIXED) };
                    candidates.push(join(&sentences[start..start + FIXED]));
                }
            }
            Plant::BleuOracle => {
                for c in 0..config.k {
                    let text = if Some(c) == planted {
                        let edited: Vec<Vec<String>> =
                            sentences[..FIXED].iter().map(|s| self.substitute(s, 1)).collect();
                        join(&edited)
                    } else {
                        let picked: Vec<Vec<String>> =
                            self.window(&sentences).iter().map(|s| self.noisy(s, 0.5)).collect();
                        join(&picked)
                    };
                    candidates.push(text);
                }
            }
        }

        let doc = Document::new(id, source, candidates).with_reference(join(&reference));
        if let Some(p) = planted {
            if !plant_holds(&doc, p, config.plant, tokenizer) {
                return None;
            }
        }
        Some((doc, planted))
    }

    /// Three sentences drawn from the document, in random order.
    fn window(&mut self, sentences: &[Vec<String>]) -> Vec<Vec<String>> {
        (0..FIXED).map(|_| sentences[self.rng.random_range(0..sentences.len())].clone()).collect()
    }
}

fn join(sentences: &[Vec<String>]) -> String {
    sentences
        .iter()
        .map(|s| {
            let mut text = s.join(" ");
            if let Some(first) = text.get(..1) {
                let upper = first.to_ascii_uppercase();
                text.replace_range(..1, &upper);
            }
            text.push('.');
            text
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Checks the planted candidate with the real metrics: strictly highest
/// mean ROUGE against the lead, and for the BLEU plant also strictly
/// highest BLEU against the source.
pub fn plant_holds(doc: &Document, planted: usize, plant: Plant, tokenizer: &TokenizerConfig) -> bool {
    let Ok(lead) = lead3(&split_sentences(&doc.source)) else {
        return false;
    };
    let rouge: Vec<f64> = doc.candidates.iter().map(|c| mean_rouge(c, &lead.text, tokenizer)).collect();
    if !strict_max(&rouge, planted) {
        return false;
    }
    if plant == Plant::BleuOracle {
        let source = tokenize_to_vec(&doc.source, tokenizer);
        let scores: Vec<f64> = doc.candidates.iter().map(|c| bleu(&tokenize_to_vec(c, tokenizer), &source)).collect();
        return strict_max(&scores, planted);
    }
    true
}

fn strict_max(scores: &[f64], planted: usize) -> bool {
    scores.iter().enumerate().all(|(c, &s)| c == planted || s < scores[planted])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(plant: Plant) -> SynthConfig {
        SynthConfig { seed: 11, n_docs: 12, k: 6, plant, ..Default::default() }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&cfg(Plant::BleuOracle)).unwrap(), generate(&cfg(Plant::BleuOracle)).unwrap());
        let other = SynthConfig { seed: 12, ..cfg(Plant::BleuOracle) };
        assert_ne!(generate(&cfg(Plant::BleuOracle)).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn shapes() {
        for plant in [Plant::BleuOracle, Plant::LeadBias, Plant::Uniform] {
            let out = generate(&cfg(plant)).unwrap();
            assert_eq!(out.documents.len(), 12);
            for (doc, rec) in out.documents.iter().zip(&out.plants) {
                assert_eq!(doc.id, rec.id);
                assert_eq!(doc.candidates.len(), 6);
                let n = split_sentences(&doc.source).len();
                assert!((5..=12).contains(&n), "{n}");
                assert!(doc.reference.is_some());
                assert_eq!(rec.planted_index.is_none(), plant == Plant::Uniform);
            }
        }
    }

    #[test]
    fn planted_candidate_uniquely_maximizes_bleu() {
        let tok = TokenizerConfig::default();
        let out = generate(&cfg(Plant::BleuOracle)).unwrap();
        for (doc, rec) in out.documents.iter().zip(&out.plants) {
            assert!(plant_holds(doc, rec.planted_index.unwrap(), Plant::BleuOracle, &tok));
        }
    }

    #[test]
    fn uniform_candidates_are_identical() {
        let out = generate(&cfg(Plant::Uniform)).unwrap();
        for doc in &out.documents {
            assert!(doc.candidates.iter().all(|c| *c == doc.candidates[0]));
        }
    }

    #[test]
    fn parameter_errors() {
        assert!(generate(&SynthConfig { n_docs: 0, ..Default::default() }).is_err());
        assert!(generate(&SynthConfig { k: 1, ..Default::default() }).is_err());
        assert!("planted".parse::<Plant>().is_err());
        assert_eq!("lead-bias".parse::<Plant>().unwrap(), Plant::LeadBias);
    }
}
