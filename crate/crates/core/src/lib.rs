//! Reference-free re-ranking of machine-generated summary candidates.
//!
//! Every candidate is scored by a simplex-weighted sum of features that
//! compare it with its source document (n-gram overlap, semantic
//! similarity) or look at the candidate alone (diversity, length). The
//! weights are tuned by stochastic local search against pseudo-summaries
//! extracted from the source documents, so no human reference is ever
//! consulted during estimation.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the on-disk
//! score cache, the remote scorer client and the command line driver live
//! in the `summrank` companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod estimate;
pub mod evaluation;
pub mod features;
pub mod metrics;
pub mod pseudo;
pub mod rerank;
pub mod selftrain;
pub mod semantic;
pub mod stem;
pub mod synth;
pub mod text;
mod util;

pub use corpus::Document;
pub use error::{Error, Result};
pub use estimate::{hierarchical_estimate, local_search, objective, EstimationConfig, ObjectiveTable};
pub use features::{compute_features, FeatureMatrix, FeatureSpec, Normalization};
pub use metrics::{bleu, diversity, length_score, mean_rouge, rouge_l, rouge_lsum, rouge_n, Prf};
pub use pseudo::{PseudoMethod, PseudoTarget};
pub use rerank::{combine, select, CoefficientSet, Selection};
pub use semantic::{PairScorer, ScorerId, ScorerKind};
pub use text::{ngrams, split_sentences, tokenize, SentenceList, TokenSequence, TokenizerConfig};
pub use util::doc_seed;
