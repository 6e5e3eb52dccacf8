//! Simplex-weighted feature combination and argmax candidate selection.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Tolerance of the simplex and factorization invariants.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupWeight {
    pub group: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithinGroup {
    pub group: String,
    pub features: Vec<String>,
    pub weights: Vec<f64>,
}

/// How a coefficient set was estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationProvenance {
    pub pseudo_method: String,
    pub seed: u64,
    pub trials_per_search: usize,
    pub restart_probability: f64,
    pub steps: Vec<f64>,
    pub tuning_documents: usize,
    /// Objective evaluations spent by each search stage, in stage order.
    pub stage_evaluations: Vec<usize>,
    pub stage_objectives: Vec<f64>,
    pub uniform_objective: f64,
    pub final_objective: f64,
    /// Set when no searched point beat the uniform weights and those were
    /// kept instead.
    pub kept_uniform: bool,
}

/// Feature weights on the probability simplex.
///
/// `theta[j] == weight(group of j) * within-group weight of j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub feature_ids: Vec<String>,
    pub theta: Vec<f64>,
    pub group_weights: Vec<GroupWeight>,
    pub within_group: Vec<WithinGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimation: Option<EstimationProvenance>,
}

impl CoefficientSet {
    /// A set with every feature in its own group.
    pub fn from_theta(feature_ids: Vec<String>, theta: Vec<f64>) -> Result<Self> {
        if feature_ids.len() != theta.len() {
            return Err(Error::param("feature ids and weights differ in length"));
        }
        let group_weights =
            feature_ids.iter().zip(&theta).map(|(f, &w)| GroupWeight { group: f.clone(), weight: w }).collect();
        let within_group = feature_ids
            .iter()
            .map(|f| WithinGroup { group: f.clone(), features: alloc::vec![f.clone()], weights: alloc::vec![1.0] })
            .collect();
        let set = Self { feature_ids, theta, group_weights, within_group, estimation: None };
        set.check_invariants(SIMPLEX_TOLERANCE)?;
        Ok(set)
    }

    pub fn uniform(feature_ids: Vec<String>) -> Result<Self> {
        let d = feature_ids.len();
        if d == 0 {
            return Err(Error::param("no features"));
        }
        Self::from_theta(feature_ids, alloc::vec![1.0 / d as f64; d])
    }

    /// Simplex constraints on `theta`, on the group weights and on every
    /// within-group vector, plus the factorization of `theta`.
    pub fn check_invariants(&self, tolerance: f64) -> Result<()> {
        check_simplex("theta", &self.theta, tolerance)?;
        check_simplex("group weights", &self.group_weights.iter().map(|g| g.weight).collect::<Vec<_>>(), tolerance)?;
        let mut covered = 0;
        for within in &self.within_group {
            check_simplex(&within.group, &within.weights, tolerance)?;
            if within.features.len() != within.weights.len() {
                return Err(Error::param(format!("group `{}` is malformed", within.group)));
            }
            let group_weight = self
                .group_weights
                .iter()
                .find(|g| g.group == within.group)
                .ok_or_else(|| Error::param(format!("group `{}` has no weight", within.group)))?
                .weight;
            for (feature, w) in within.features.iter().zip(&within.weights) {
                let j = self
                    .feature_ids
                    .iter()
                    .position(|f| f == feature)
                    .ok_or_else(|| Error::param(format!("unknown feature `{feature}`")))?;
                if libm::fabs(self.theta[j] - group_weight * w) > tolerance {
                    return Err(Error::param(format!(
                        "theta[{feature}] = {} but group weight x within weight = {}",
                        self.theta[j],
                        group_weight * w
                    )));
                }
                covered += 1;
            }
        }
        if covered != self.feature_ids.len() {
            return Err(Error::param("groups do not partition the features"));
        }
        Ok(())
    }

    /// Rounds every weight vector to `decimals` places, folding the
    /// rounding residual into its largest coordinate so each still sums to 1.
    pub fn rounded(&self, decimals: i32) -> Self {
        let mut out = self.clone();
        out.theta = round_on_simplex(&self.theta, decimals);
        let gw = round_on_simplex(&self.group_weights.iter().map(|g| g.weight).collect::<Vec<_>>(), decimals);
        for (g, w) in out.group_weights.iter_mut().zip(gw) {
            g.weight = w;
        }
        for within in &mut out.within_group {
            within.weights = round_on_simplex(&within.weights, decimals);
        }
        out
    }
}

fn check_simplex(name: &str, weights: &[f64], tolerance: f64) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::param(format!("{name}: empty weight vector")));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::param(format!("{name}: weight {w} is not a non-negative number")));
    }
    let sum: f64 = weights.iter().sum();
    if libm::fabs(sum - 1.0) > tolerance {
        return Err(Error::param(format!("{name}: weights sum to {sum}, not 1")));
    }
    Ok(())
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = libm::pow(10.0, f64::from(decimals));
    libm::round(x * scale) / scale
}

/// Rounds a simplex vector, then sets its largest coordinate to one minus
/// the rest.
pub fn round_on_simplex(weights: &[f64], decimals: i32) -> Vec<f64> {
    let mut out: Vec<f64> = weights.iter().map(|&w| round_to(w, decimals)).collect();
    let Some(largest) = argmax(&out) else {
        return out;
    };
    let rest: f64 = out.iter().enumerate().filter(|&(i, _)| i != largest).map(|(_, w)| w).sum();
    out[largest] = round_to(1.0 - rest, decimals).max(0.0);
    out
}

/// Chosen candidate of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub id: String,
    pub strategy: String,
    pub chosen: usize,
    pub scores: Vec<f64>,
}

/// `score[c] = Σ_j theta[j] * features[c][j]`.
pub fn combine(features: &[Vec<f64>], theta: &[f64]) -> Result<Vec<f64>> {
    features
        .iter()
        .map(|row| {
            if row.len() != theta.len() {
                return Err(Error::param(format!("feature row has {} values for {} weights", row.len(), theta.len())));
            }
            Ok(row.iter().zip(theta).map(|(x, w)| x * w).sum())
        })
        .collect()
}

/// First index attaining the maximum; NaN never wins.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            _ if s.is_nan() => {}
            None => best = Some(i),
            Some(b) if s > scores[b] => best = Some(i),
            _ => {}
        }
    }
    best.or(if scores.is_empty() { None } else { Some(0) })
}

/// First index attaining the minimum; NaN never wins.
pub fn argmin(scores: &[f64]) -> Option<usize> {
    let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
    argmax(&negated)
}

/// Argmax with ties going to the lowest (best generator rank) index.
pub fn select(scores: &[f64]) -> Result<usize> {
    argmax(scores).ok_or_else(|| Error::param("cannot select from an empty candidate pool"))
}

/// Applies `coefficients` to every document of `matrix`.
pub fn rerank(matrix: &FeatureMatrix, coefficients: &CoefficientSet) -> Result<Vec<Selection>> {
    let names = matrix.spec.names();
    if names != coefficients.feature_ids {
        return Err(Error::param(format!(
            "coefficients are for features {:?}, matrix has {:?}",
            coefficients.feature_ids, names
        )));
    }
    matrix
        .documents
        .iter()
        .map(|doc| {
            let scores = combine(&doc.values, &coefficients.theta)?;
            Ok(Selection { id: doc.id.clone(), strategy: String::from("summscore"), chosen: select(&scores)?, scores })
        })
        .collect()
}
