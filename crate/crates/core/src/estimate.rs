//! Coefficient estimation by hierarchical stochastic local search.
//!
//! Every candidate is first scored against its document's pseudo-target
//! (the [`ObjectiveTable`]). A weight vector is then judged by the mean
//! table value of the candidates it selects. Overlap and semantic weights
//! are searched first, each group on its own; a second search then mixes
//! the two composite scores with diversity and length.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::features::{FeatureGroup, FeatureMatrix, DIVERSITY, LENGTH};
use crate::metrics::RougeScores;
use crate::pseudo::PseudoTarget;
use crate::rerank::{argmax, CoefficientSet, EstimationProvenance, GroupWeight, WithinGroup};
use crate::text::{TokenizedText, TokenizerConfig};
use crate::util::{rng, stream_seed};

pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_TUNING_SUBSET: usize = 1000;
pub const DEFAULT_RESTART_PROBABILITY: f64 = 0.2;
pub const DEFAULT_STEPS: [f64; 5] = [0.01, 0.02, 0.05, 0.1, 0.2];

/// Stream index of the tuning-subset sampler; search stages use 0, 1, 2.
const SUBSET_STREAM: u64 = 0xffff;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    /// Objective evaluations allowed per search stage.
    pub trials_per_search: usize,
    /// Larger corpora are tuned on a seeded subset of this many documents.
    pub tuning_subset_size: usize,
    pub seed: u64,
    pub restart_probability: f64,
    pub perturbation_steps: Vec<f64>,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            trials_per_search: DEFAULT_TRIALS,
            tuning_subset_size: DEFAULT_TUNING_SUBSET,
            seed: 0,
            restart_probability: DEFAULT_RESTART_PROBABILITY,
            perturbation_steps: DEFAULT_STEPS.to_vec(),
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_search < 1 {
            return Err(Error::param("trials_per_search must be at least 1"));
        }
        if self.tuning_subset_size < 1 {
            return Err(Error::param("tuning_subset_size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.restart_probability) {
            return Err(Error::param(format!(
                "restart_probability must be in [0, 1], got {}",
                self.restart_probability
            )));
        }
        if self.perturbation_steps.is_empty() || self.perturbation_steps.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::param("perturbation_steps must be non-empty and positive"));
        }
        Ok(())
    }
}

/// `values[i][c]`: mean ROUGE of candidate `c` of document `i` against the
/// document's pseudo-target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTable {
    pub pseudo_method: String,
    pub ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ObjectiveTable {
    pub fn build(corpus: &[Document], targets: &[PseudoTarget], config: &TokenizerConfig) -> Result<Self> {
        if corpus.len() != targets.len() {
            return Err(Error::param(format!("{} documents but {} pseudo-targets", corpus.len(), targets.len())));
        }
        let pseudo_method = targets.first().map(|t| String::from(t.method.as_str())).unwrap_or_default();
        if targets.iter().any(|t| t.method.as_str() != pseudo_method) {
            return Err(Error::param("pseudo-targets mix several methods"));
        }
        let values = corpus
            .iter()
            .zip(targets)
            .map(|(doc, target)| {
                let target = TokenizedText::new(&target.text, config);
                doc.candidates
                    .iter()
                    .map(|c| RougeScores::compute(&TokenizedText::new(c, config), &target).mean())
                    .collect()
            })
            .collect();
        let ids = corpus.iter().map(|d| d.id.clone()).collect();
        Self::from_rows(pseudo_method, ids, values)
    }

    pub fn from_rows(pseudo_method: String, ids: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(Error::param("objective table ids and rows differ in length"));
        }
        for (id, row) in ids.iter().zip(&values) {
            if row.is_empty() || row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Validation {
                    id: id.clone(),
                    reason: String::from("objective values must be non-empty and within [0, 1]"),
                });
            }
        }
        Ok(Self { pseudo_method, ids, values })
    }

    fn check_against(&self, matrix: &FeatureMatrix) -> Result<()> {
        if self.ids.len() != matrix.documents.len() {
            return Err(Error::param(format!(
                "objective table covers {} documents, feature matrix {}",
                self.ids.len(),
                matrix.documents.len()
            )));
        }
        for ((id, row), doc) in self.ids.iter().zip(&self.values).zip(&matrix.documents) {
            if *id != doc.id || row.len() != doc.values.len() {
                return Err(Error::param(format!(
                    "objective table entry `{id}` does not match feature document `{}`",
                    doc.id
                )));
            }
        }
        Ok(())
    }
}

/// Mean over documents of the table value of the candidate that `theta`
/// selects from the normalized feature values.
pub fn objective(theta: &[f64], matrix: &FeatureMatrix, table: &ObjectiveTable) -> Result<f64> {
    table.check_against(matrix)?;
    if theta.len() != matrix.spec.len() {
        return Err(Error::param(format!("{} weights for {} features", theta.len(), matrix.spec.len())));
    }
    let docs = id_order(matrix, (0..matrix.documents.len()).collect());
    Ok(Problem::new(matrix, table, &docs, |row| row.to_vec()).evaluate(theta))
}

/// One objective evaluation of a search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub objective: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub evaluations: usize,
    pub trace: Vec<TrialRecord>,
}

/// Hill climbing with random restarts over the `dim`-simplex, starting at
/// the uniform point. At most `config.trials_per_search` calls of
/// `objective_fn`, the first one on the start point; a proposal replaces
/// the incumbent only if it scores strictly higher.
pub fn local_search<F>(dim: usize, mut objective_fn: F, config: &EstimationConfig) -> Result<SearchOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    if dim < 1 {
        return Err(Error::param("search dimension must be at least 1"));
    }
    config.validate()?;
    let mut best = vec![1.0 / dim as f64; dim];
    let mut best_value = objective_fn(&best);
    let mut trace = vec![TrialRecord { index: 0, objective: best_value, accepted: true }];
    if dim == 1 {
        return Ok(SearchOutcome { weights: best, objective: best_value, evaluations: 1, trace });
    }

    let mut rng = rng(config.seed);
    for index in 1..config.trials_per_search {
        let proposal = if rng.random::<f64>() < config.restart_probability {
            random_simplex_point(&mut rng, dim)
        } else {
            perturb(&mut rng, &best, &config.perturbation_steps)
        };
        let value = objective_fn(&proposal);
        let accepted = value > best_value;
        if accepted {
            best = proposal;
            best_value = value;
        }
        trace.push(TrialRecord { index, objective: value, accepted });
    }
    Ok(SearchOutcome { weights: best, objective: best_value, evaluations: trace.len(), trace })
}

/// Normalized exponentials: uniform on the simplex.
fn random_simplex_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| -libm::log(1.0 - rng.random::<f64>())).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|x| x / total).collect();
        }
    }
}

fn perturb(rng: &mut ChaCha8Rng, point: &[f64], steps: &[f64]) -> Vec<f64> {
    let j = rng.random_range(0..point.len());
    let step = steps[rng.random_range(0..steps.len())];
    let signed = if rng.random::<bool>() { step } else { -step };
    let mut out = point.to_vec();
    out[j] = (out[j] + signed).max(0.0);
    let total: f64 = out.iter().sum();
    if total <= 0.0 {
        return random_simplex_point(rng, point.len());
    }
    out.iter_mut().for_each(|w| *w /= total);
    out
}

/// Feature rows of the tuning documents projected onto a stage's columns,
/// with their objective rows.
struct Problem<'a> {
    rows: Vec<Vec<Vec<f64>>>,
    table: Vec<&'a [f64]>,
}

impl<'a> Problem<'a> {
    fn new<P>(matrix: &FeatureMatrix, table: &'a ObjectiveTable, docs: &[usize], project: P) -> Self
    where
        P: Fn(&[f64]) -> Vec<f64>,
    {
        let rows = docs.iter().map(|&i| matrix.documents[i].values.iter().map(|r| project(r)).collect()).collect();
        let table = docs.iter().map(|&i| table.values[i].as_slice()).collect();
        Self { rows, table }
    }

    fn evaluate(&self, weights: &[f64]) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for (rows, values) in self.rows.iter().zip(&self.table) {
            let scores: Vec<f64> = rows.iter().map(|r| r.iter().zip(weights).map(|(x, w)| x * w).sum()).collect();
            if let Some(c) = argmax(&scores) {
                total += values[c];
            }
        }
        total / self.rows.len() as f64
    }
}

/// One search stage of [`hierarchical_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub name: String,
    pub coordinates: Vec<String>,
    pub outcome: SearchOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub coefficients: CoefficientSet,
    pub stages: Vec<StageReport>,
    /// Ids of the documents the objective was evaluated on.
    pub tuning_ids: Vec<String>,
}

const OVERLAP: &str = "overlap";
const SEMANTIC: &str = "semantic";

/// Estimates a [`CoefficientSet`] from normalized features and pseudo-target
/// scores.
///
/// Stage 1 searches the overlap weights and the semantic weights on their
/// own (every other feature weighted 0). Stage 2 searches group weights
/// over the two stage-1 composites plus diversity and length. If the flat
/// uniform weighting scores higher than the searched one, it is returned
/// instead, so the result never does worse than uniform on the tuning set.
pub fn hierarchical_estimate(
    matrix: &FeatureMatrix,
    table: &ObjectiveTable,
    config: &EstimationConfig,
) -> Result<Estimate> {
    config.validate()?;
    matrix.check_shape()?;
    table.check_against(matrix)?;
    if matrix.documents.is_empty() {
        return Err(Error::param("cannot estimate coefficients on an empty corpus"));
    }
    let spec = &matrix.spec;
    let names: Vec<String> = spec.names().into_iter().map(String::from).collect();
    let overlap = spec.group_indices(FeatureGroup::Overlap);
    let semantic = spec.group_indices(FeatureGroup::Semantic);
    let diversity = spec.index_of(DIVERSITY).ok_or_else(|| Error::param("no diversity feature"))?;
    let length = spec.index_of(LENGTH).ok_or_else(|| Error::param("no length feature"))?;
    if overlap.is_empty() {
        return Err(Error::param("no overlap features"));
    }

    let docs = tuning_subset(matrix, config);
    let tuning_ids = docs.iter().map(|&i| matrix.documents[i].id.clone()).collect();
    let stage_config = |stage: u64| EstimationConfig { seed: stream_seed(config.seed, stage), ..config.clone() };
    let pick = |cols: &[usize]| {
        let cols = cols.to_vec();
        move |row: &[f64]| cols.iter().map(|&j| row[j]).collect::<Vec<f64>>()
    };
    let coordinate_names = |cols: &[usize]| cols.iter().map(|&j| names[j].clone()).collect::<Vec<_>>();

    let mut stages = Vec::with_capacity(3);
    let problem = Problem::new(matrix, table, &docs, pick(&overlap));
    let overlap_search = local_search(overlap.len(), |w| problem.evaluate(w), &stage_config(0))?;
    stages.push(StageReport {
        name: String::from("overlap"),
        coordinates: coordinate_names(&overlap),
        outcome: overlap_search.clone(),
    });

    let semantic_weights = if semantic.is_empty() {
        None
    } else {
        let problem = Problem::new(matrix, table, &docs, pick(&semantic));
        let search = local_search(semantic.len(), |w| problem.evaluate(w), &stage_config(1))?;
        stages.push(StageReport {
            name: String::from("semantic"),
            coordinates: coordinate_names(&semantic),
            outcome: search.clone(),
        });
        Some(search.weights)
    };

    // Stage 2 coordinates: F_overlap, [F_semantic], diversity, length.
    let mut groups: Vec<(&str, Vec<usize>, Vec<f64>)> =
        vec![(OVERLAP, overlap.clone(), overlap_search.weights.clone())];
    if let Some(w) = &semantic_weights {
        groups.push((SEMANTIC, semantic.clone(), w.clone()));
    }
    groups.push((DIVERSITY, vec![diversity], vec![1.0]));
    groups.push((LENGTH, vec![length], vec![1.0]));

    let composite = |row: &[f64]| {
        groups.iter().map(|(_, cols, w)| cols.iter().zip(w).map(|(&j, w)| row[j] * w).sum()).collect::<Vec<f64>>()
    };
    let problem = Problem::new(matrix, table, &docs, composite);
    let group_search = local_search(groups.len(), |w| problem.evaluate(w), &stage_config(2))?;
    stages.push(StageReport {
        name: String::from("groups"),
        coordinates: groups.iter().map(|(g, _, _)| String::from(*g)).collect(),
        outcome: group_search.clone(),
    });

    let searched = factorize(&names, &groups, &group_search.weights)?;
    let d = names.len() as f64;
    let uniform_groups: Vec<(&str, Vec<usize>, Vec<f64>)> =
        groups.iter().map(|(g, cols, _)| (*g, cols.clone(), vec![1.0 / cols.len() as f64; cols.len()])).collect();
    let uniform_group_weights: Vec<f64> = groups.iter().map(|(_, cols, _)| cols.len() as f64 / d).collect();
    let uniform = factorize(&names, &uniform_groups, &uniform_group_weights)?;

    let full = Problem::new(matrix, table, &docs, |row| row.to_vec());
    let final_objective = full.evaluate(&searched.theta);
    let uniform_objective = full.evaluate(&vec![1.0 / d; names.len()]);
    let kept_uniform = uniform_objective > final_objective;
    let mut coefficients = if kept_uniform { uniform } else { searched };
    coefficients.check_invariants(crate::rerank::SIMPLEX_TOLERANCE)?;
    coefficients.estimation = Some(EstimationProvenance {
        pseudo_method: table.pseudo_method.clone(),
        seed: config.seed,
        trials_per_search: config.trials_per_search,
        restart_probability: config.restart_probability,
        steps: config.perturbation_steps.clone(),
        tuning_documents: docs.len(),
        stage_evaluations: stages.iter().map(|s| s.outcome.evaluations).collect(),
        stage_objectives: stages.iter().map(|s| s.outcome.objective).collect(),
        uniform_objective,
        final_objective: final_objective.max(uniform_objective),
        kept_uniform,
    });
    Ok(Estimate { coefficients, stages, tuning_ids })
}

/// Document indices to tune on, in document-id order.
fn tuning_subset(matrix: &FeatureMatrix, config: &EstimationConfig) -> Vec<usize> {
    let n = matrix.documents.len();
    let docs: Vec<usize> = if n > config.tuning_subset_size {
        let mut rng = rng(stream_seed(config.seed, SUBSET_STREAM));
        index::sample(&mut rng, n, config.tuning_subset_size).into_vec()
    } else {
        (0..n).collect()
    };
    id_order(matrix, docs)
}

/// Sums over documents always run in id order.
fn id_order(matrix: &FeatureMatrix, mut docs: Vec<usize>) -> Vec<usize> {
    docs.sort_by(|&a, &b| matrix.documents[a].id.cmp(&matrix.documents[b].id).then(a.cmp(&b)));
    docs
}

fn factorize(
    names: &[String],
    groups: &[(&str, Vec<usize>, Vec<f64>)],
    group_weights: &[f64],
) -> Result<CoefficientSet> {
    let mut theta = vec![0.0; names.len()];
    for ((_, cols, within), gw) in groups.iter().zip(group_weights) {
        for (&j, w) in cols.iter().zip(within) {
            theta[j] = gw * w;
        }
    }
    Ok(CoefficientSet {
        feature_ids: names.to_vec(),
        theta,
        group_weights: groups
            .iter()
            .zip(group_weights)
            .map(|((g, _, _), &weight)| GroupWeight { group: String::from(*g), weight })
            .collect(),
        within_group: groups
            .iter()
            .map(|(g, cols, within)| WithinGroup {
                group: String::from(*g),
                features: cols.iter().map(|&j| names[j].clone()).collect(),
                weights: within.clone(),
            })
            .collect(),
        estimation: None,
    })
}
