//! Documents and their candidate pools.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A source document with its ordered candidate pool (generation rank
/// order). The reference summary is only ever read by evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    pub source: String,
    pub candidates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_origin: Option<Vec<String>>,
}

impl Document {
    pub fn new(id: impl Into<String>, source: impl Into<String>, candidates: Vec<String>) -> Self {
        Self { id: id.into(), source: source.into(), candidates, reference: None, candidate_origin: None }
    }

    pub fn with_reference(mut self, reference: impl Into<String>) -> Self {
        self.reference = Some(reference.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::Validation { id: self.id.clone(), reason });
        if self.id.is_empty() {
            return fail(String::from("empty document id"));
        }
        if self.candidates.is_empty() {
            return fail(String::from("document has no candidates"));
        }
        if let Some(origin) = &self.candidate_origin {
            if origin.len() != self.candidates.len() {
                return fail(format!(
                    "candidate_origin has {} entries for {} candidates",
                    origin.len(),
                    self.candidates.len()
                ));
            }
        }
        Ok(())
    }
}

/// Validates every document and rejects duplicate ids.
pub fn validate_corpus(documents: &[Document]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for doc in documents {
        doc.validate()?;
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::Validation { id: doc.id.clone(), reason: String::from("duplicate document id") });
        }
    }
    Ok(())
}

/// Concatenates the candidate pools of several corpora per document id,
/// labelling each candidate with the name of the corpus it came from.
///
/// Document order, sources and references are taken from the first corpus;
/// every other corpus must contain exactly the same ids. Duplicate
/// candidate strings are kept.
pub fn pool_candidates(corpora: &[(&str, &[Document])]) -> Result<Vec<Document>> {
    let Some(((first_label, first), rest)) = corpora.split_first() else {
        return Err(Error::param("no corpora to pool"));
    };
    let mut by_id: Vec<BTreeMap<&str, &Document>> = Vec::with_capacity(rest.len());
    for (label, docs) in rest {
        if docs.len() != first.len() {
            return Err(Error::param(format!(
                "corpus `{label}` has {} documents, expected {}",
                docs.len(),
                first.len()
            )));
        }
        by_id.push(docs.iter().map(|d| (d.id.as_str(), d)).collect());
    }

    let mut pooled = Vec::with_capacity(first.len());
    for doc in first.iter() {
        let mut merged = doc.clone();
        merged.candidate_origin = Some(origins(doc, first_label));
        for ((label, _), index) in rest.iter().zip(&by_id) {
            let other = index.get(doc.id.as_str()).ok_or_else(|| Error::Validation {
                id: doc.id.clone(),
                reason: format!("missing from pooled corpus `{label}`"),
            })?;
            merged.candidates.extend(other.candidates.iter().cloned());
            if let Some(origin) = merged.candidate_origin.as_mut() {
                origin.extend(origins(other, label));
            }
        }
        pooled.push(merged);
    }
    Ok(pooled)
}

fn origins(doc: &Document, label: &str) -> Vec<String> {
    match &doc.candidate_origin {
        Some(existing) => existing.iter().map(|o| format!("{label}/{o}")).collect(),
        None => doc.candidates.iter().map(|_| String::from(label)).collect(),
    }
}
