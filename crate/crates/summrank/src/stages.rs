//! Pipeline stages. Each stage reads its inputs from files and writes its
//! outputs to files, so running `pipeline` and running the stages one by
//! one produce the same bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use summrank_core::error::{Error as CoreError, ScorerFailure};
use summrank_core::estimate::{hierarchical_estimate, ObjectiveTable};
use summrank_core::evaluation::{
    abstractiveness, attach_gains, baseline_select, oracle_sets, overlap_diagnostics, ranking, recall_curve,
    score_selection, ReferenceScores, SelectionContext, Strategy, StrategyResult,
};
use summrank_core::features::{
    corpus_mu_len, document_raw_features, normalize_rows, semantic_columns, DocumentFeatures, FeatureMatrix,
};
use summrank_core::metrics::RougeScores;
use summrank_core::pseudo::extract;
use summrank_core::rerank::{rerank, CoefficientSet, Selection, SIMPLEX_TOLERANCE};
use summrank_core::selftrain::export_labels;
use summrank_core::semantic::{BuiltinLexical, PairScorer, ScorerId, ScorerKind};
use summrank_core::text::{split_sentences_with, TokenizedText};
use summrank_core::{doc_seed, Document};

use crate::cache::{cache_root, CachedScorer, ScoreCache};
use crate::config::{invalid, RunConfig};
use crate::formats::{self, file_digest, LabelSummary, Provenance, PseudoTargetRecord, STORED_TOLERANCE};
use crate::remote::RemoteScorer;
use crate::report;

/// An internal consistency check failed (exit code 4).
#[derive(Debug, thiserror::Error)]
#[error("internal invariant violated: {0}")]
pub struct InvariantViolation(pub String);

/// File names used by `pipeline` inside its output directory.
#[derive(Debug, Clone)]
pub struct PipelinePaths {
    pub features: PathBuf,
    pub pseudo_targets: PathBuf,
    pub coefficients: PathBuf,
    pub estimation_log: PathBuf,
    pub selection: PathBuf,
    pub report_dir: PathBuf,
    pub labels: PathBuf,
}

impl PipelinePaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            features: dir.join("features.jsonl"),
            pseudo_targets: dir.join("pseudo_targets.jsonl"),
            coefficients: dir.join("coefficients.json"),
            estimation_log: dir.join("estimation_log.csv"),
            selection: dir.join("selection.jsonl"),
            report_dir: dir.to_path_buf(),
            labels: dir.join("labels.jsonl"),
        }
    }
}

fn build_scorers(config: &RunConfig, docs: &[Document]) -> Result<Vec<Box<dyn PairScorer + Send>>> {
    let spec = config.feature_spec()?;
    spec.semantic_kinds()
        .into_iter()
        .map(|kind| -> Result<Box<dyn PairScorer + Send>> {
            if kind == ScorerKind::BuiltinLexical {
                let sources = docs.iter().map(|d| d.source.as_str());
                return Ok(Box::new(BuiltinLexical::for_sources(sources, &config.tokenizer)));
            }
            let remote_config = config
                .scorers
                .get(kind.as_str())
                .cloned()
                .ok_or_else(|| invalid(format!("no endpoint configured for scorer `{kind}`")))?;
            let cached = remote_config.cache;
            let remote = RemoteScorer::new(kind.clone(), remote_config);
            let health = remote.health()?;
            if !health.metrics.iter().any(|m| m == kind.as_str()) {
                return Err(ScorerFailure::Protocol {
                    scorer: kind.to_string(),
                    message: format!("service does not offer `{kind}` (offers {:?})", health.metrics),
                }
                .into());
            }
            if cached {
                let cache = ScoreCache::open(&cache_root(), &remote.id())?;
                Ok(Box::new(CachedScorer::new(remote, cache)))
            } else {
                Ok(Box::new(remote))
            }
        })
        .collect()
}

/// Computes the feature matrix of a corpus; documents are processed in
/// parallel and merged in input order.
pub fn compute_matrix(config: &RunConfig, docs: &[Document]) -> Result<(FeatureMatrix, Vec<ScorerId>)> {
    let spec = config.feature_spec()?;
    let mut scorers = build_scorers(config, docs)?;
    let ids: Vec<ScorerId> = scorers.iter().map(|s| s.id()).collect();
    let mut refs: Vec<&mut dyn PairScorer> = scorers.iter_mut().map(|s| s.as_mut() as &mut dyn PairScorer).collect();
    let columns = semantic_columns(docs, &mut refs)?;
    let mu_len = corpus_mu_len(docs, &config.tokenizer);
    let normalization = config.features.normalization;
    let documents = docs
        .par_iter()
        .zip(columns.par_iter())
        .map(|(doc, semantic)| {
            let raw = document_raw_features(doc, &spec, semantic, mu_len, &config.tokenizer)?;
            let values = normalize_rows(&raw, normalization);
            Ok(DocumentFeatures { id: doc.id.clone(), raw, values })
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    Ok((FeatureMatrix { spec, normalization, mu_len, documents }, ids))
}

pub fn run_features(config: &RunConfig, corpus: &Path, out: &Path) -> Result<()> {
    let docs = formats::read_corpus(corpus)?;
    let (matrix, ids) = compute_matrix(config, &docs)?;
    let prov = Provenance::new("features", config, vec![file_digest("corpus", corpus)?]);
    formats::write_features(out, &prov, &matrix, &ids)?;
    info!("features: {} documents -> {}", docs.len(), out.display());
    Ok(())
}

pub fn pseudo_targets(config: &RunConfig, docs: &[Document]) -> Result<Vec<PseudoTargetRecord>> {
    let records = docs
        .par_iter()
        .map(|doc| {
            let sentences = split_sentences_with(&doc.source, &config.tokenizer.abbreviations);
            let seed = doc_seed(config.pseudo.seed, &doc.id);
            let target =
                extract(config.pseudo.method, &sentences, seed, config.pseudo.salient_ratio, &config.tokenizer)
                    .map_err(|e| CoreError::Validation { id: doc.id.clone(), reason: e.to_string() })?;
            Ok(PseudoTargetRecord { id: doc.id.clone(), target })
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    Ok(records)
}

pub fn run_pseudo_targets(config: &RunConfig, corpus: &Path, out: &Path) -> Result<()> {
    let docs = formats::read_corpus(corpus)?;
    let records = pseudo_targets(config, &docs)?;
    let prov = Provenance::new("pseudo-targets", config, vec![file_digest("corpus", corpus)?]);
    formats::write_pseudo_targets(out, &prov, &records)?;
    info!("pseudo-targets ({}): {} documents -> {}", config.pseudo.method, records.len(), out.display());
    Ok(())
}

/// Checks that two per-document files list the same ids in the same order.
fn same_ids<'a>(what: &str, left: impl Iterator<Item = &'a str>, right: impl Iterator<Item = &'a str>) -> Result<()> {
    let left: Vec<&str> = left.collect();
    let right: Vec<&str> = right.collect();
    if left.len() != right.len() {
        return Err(invalid(format!("{what}: {} vs {} documents", left.len(), right.len())));
    }
    if let Some((a, b)) = left.iter().zip(&right).find(|(a, b)| a != b) {
        return Err(invalid(format!("{what}: document `{a}` does not line up with `{b}`")));
    }
    Ok(())
}

pub fn objective_table(
    config: &RunConfig,
    docs: &[Document],
    targets: &[PseudoTargetRecord],
) -> Result<ObjectiveTable> {
    same_ids("corpus vs pseudo-targets", docs.iter().map(|d| d.id.as_str()), targets.iter().map(|t| t.id.as_str()))?;
    let method = targets.first().map(|t| t.target.method.as_str().to_string()).unwrap_or_default();
    if targets.iter().any(|t| t.target.method.as_str() != method) {
        return Err(invalid("pseudo-targets mix several methods"));
    }
    let values: Vec<Vec<f64>> = docs
        .par_iter()
        .zip(targets.par_iter())
        .map(|(doc, t)| {
            let target = TokenizedText::new(&t.target.text, &config.tokenizer);
            doc.candidates
                .iter()
                .map(|c| RougeScores::compute(&TokenizedText::new(c, &config.tokenizer), &target).mean())
                .collect()
        })
        .collect();
    Ok(ObjectiveTable::from_rows(method, docs.iter().map(|d| d.id.clone()).collect(), values)?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LogRow {
    pub stage: String,
    pub trial: usize,
    pub objective: f64,
    pub accepted: bool,
}

pub fn run_estimate(
    config: &RunConfig,
    corpus: &Path,
    features: &Path,
    targets: &Path,
    coefficients_out: &Path,
    log_out: &Path,
) -> Result<()> {
    let docs = formats::read_corpus(corpus)?;
    let matrix = formats::read_features(features)?;
    let targets_read = formats::read_pseudo_targets(targets)?;
    same_ids("corpus vs features", docs.iter().map(|d| d.id.as_str()), matrix.documents.iter().map(|d| d.id.as_str()))?;
    let table = objective_table(config, &docs, &targets_read)?;
    let estimate = hierarchical_estimate(&matrix, &table, &config.estimation)?;
    let coefficients = estimate.coefficients;
    check(&coefficients, SIMPLEX_TOLERANCE)?;
    check(&coefficients.rounded(formats::COEFFICIENT_DECIMALS), STORED_TOLERANCE)?;

    let inputs = vec![
        file_digest("corpus", corpus)?,
        file_digest("features", features)?,
        file_digest("pseudo_targets", targets)?,
    ];
    let prov = Provenance::new("estimate", config, inputs);
    let rows: Vec<LogRow> = estimate
        .stages
        .iter()
        .flat_map(|s| {
            s.outcome.trace.iter().map(|t| LogRow {
                stage: s.name.clone(),
                trial: t.index,
                objective: t.objective,
                accepted: t.accepted,
            })
        })
        .collect();
    formats::write_coefficients(coefficients_out, &prov, &coefficients)?;
    formats::write_csv(log_out, &prov, &rows)?;
    if let Some(p) = &coefficients.estimation {
        info!(
            "estimate: objective {:.6} (uniform {:.6}) over {} documents -> {}",
            p.final_objective,
            p.uniform_objective,
            p.tuning_documents,
            coefficients_out.display()
        );
    }
    Ok(())
}

fn check(set: &CoefficientSet, tolerance: f64) -> Result<()> {
    set.check_invariants(tolerance).map_err(|e| InvariantViolation(e.to_string()).into())
}

pub fn run_rerank(config: &RunConfig, features: &Path, coefficients: &Path, out: &Path) -> Result<()> {
    let matrix = formats::read_features(features)?;
    let set = formats::read_coefficients(coefficients)?;
    let selections = rerank(&matrix, &set)?;
    let inputs = vec![file_digest("features", features)?, file_digest("coefficients", coefficients)?];
    let prov = Provenance::new("rerank", config, inputs);
    formats::write_selections(out, &prov, &selections)?;
    info!("rerank: {} selections -> {}", selections.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportRow {
    pub strategy: String,
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
    pub mean: f64,
    pub gain_pct: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecallRow {
    pub k: usize,
    pub recall: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OverlapRow {
    pub strategy: String,
    pub percent: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AbstractivenessRow {
    pub n: usize,
    pub fraction: f64,
}

/// Everything the evaluate stage writes, before formatting.
#[derive(Debug)]
pub struct Evaluation {
    pub results: Vec<StrategyResult>,
    pub recall: summrank_core::evaluation::RecallCurve,
    pub overlap: Vec<(String, f64)>,
    pub abstractiveness: [f64; 3],
}

pub fn evaluate(
    config: &RunConfig,
    docs: &[Document],
    matrix: &FeatureMatrix,
    selections: &[Selection],
) -> Result<Evaluation> {
    same_ids("corpus vs features", docs.iter().map(|d| d.id.as_str()), matrix.documents.iter().map(|d| d.id.as_str()))?;
    let by_id: BTreeMap<&str, &Selection> = selections.iter().map(|s| (s.id.as_str(), s)).collect();
    let summscore: Vec<&Selection> = docs
        .iter()
        .map(|d| {
            by_id.get(d.id.as_str()).copied().ok_or_else(|| {
                anyhow::Error::from(CoreError::Validation {
                    id: d.id.clone(),
                    reason: "no selection for document".into(),
                })
            })
        })
        .collect::<Result<_>>()?;
    for (d, s) in docs.iter().zip(&summscore) {
        if s.chosen >= d.candidates.len() || s.scores.len() != d.candidates.len() {
            return Err(
                CoreError::Validation { id: d.id.clone(), reason: "selection does not match the pool".into() }.into()
            );
        }
    }

    let per_document = docs
        .par_iter()
        .map(|d| {
            ReferenceScores::compute(std::slice::from_ref(d), &config.tokenizer)
                .map(|r| r.per_document.into_iter().next().unwrap_or_default())
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    let references = ReferenceScores { per_document };
    let names = matrix.spec.names();

    let choose = |strategy: &Strategy| -> Result<Vec<usize>> {
        docs.iter()
            .enumerate()
            .map(|(i, doc)| {
                let ctx = SelectionContext {
                    references: Some(&references.per_document[i]),
                    features: Some(&matrix.documents[i]),
                    feature_names: &names,
                    summscore: Some(summscore[i].chosen),
                    seed: config.evaluation.seed,
                    tokenizer: &config.tokenizer,
                };
                Ok(baseline_select(strategy, doc, &ctx)?)
            })
            .collect()
    };

    let strategies = config.strategies()?;
    let mut results = strategies
        .iter()
        .map(|s| Ok(score_selection(&s.name(), choose(s)?, &references)?))
        .collect::<Result<Vec<_>>>()?;
    let baseline: Strategy = config.evaluation.baseline.parse()?;
    if !strategies.contains(&baseline) {
        let base = score_selection(&baseline.name(), choose(&baseline)?, &references)?;
        results.push(base);
        attach_gains(&mut results, &baseline.name())?;
        results.pop();
    } else {
        attach_gains(&mut results, &baseline.name())?;
    }

    let rankings: Vec<Vec<usize>> = summscore.iter().map(|s| ranking(&s.scores)).collect();
    let recall = recall_curve(&rankings, &oracle_sets(&references))?;

    let mut trivial: Vec<Strategy> = names.iter().map(|n| Strategy::MaxFeature(n.to_string())).collect();
    trivial.extend([Strategy::First, Strategy::Oracle, Strategy::Minimum, Strategy::Longest]);
    let others = trivial.iter().map(|s| Ok((s.name(), choose(s)?))).collect::<Result<Vec<_>>>()?;
    let chosen: Vec<usize> = summscore.iter().map(|s| s.chosen).collect();
    let overlap = overlap_diagnostics(&chosen, &others)?;

    let selected: Vec<&str> = docs.iter().zip(&chosen).map(|(d, &c)| d.candidates[c].as_str()).collect();
    let sources: Vec<&str> = docs.iter().map(|d| d.source.as_str()).collect();
    let abstractiveness = abstractiveness(&selected, &sources, &config.tokenizer)?;
    Ok(Evaluation { results, recall, overlap, abstractiveness })
}

pub fn run_evaluate(
    config: &RunConfig,
    corpus: &Path,
    features: &Path,
    selection: &Path,
    out_dir: &Path,
) -> Result<()> {
    let docs = formats::read_corpus(corpus)?;
    let matrix = formats::read_features(features)?;
    let selections = formats::read_selections(selection)?;
    let eval = evaluate(config, &docs, &matrix, &selections)?;

    let inputs =
        vec![file_digest("corpus", corpus)?, file_digest("features", features)?, file_digest("selection", selection)?];
    let prov = Provenance::new("evaluate", config, inputs);
    let rows: Vec<ReportRow> = eval
        .results
        .iter()
        .map(|r| ReportRow {
            strategy: r.strategy.clone(),
            r1: r.rouge1,
            r2: r.rouge2,
            rl: r.rouge_lsum,
            mean: r.mean_rouge,
            gain_pct: r.gain_pct,
        })
        .collect();
    formats::write_csv(&out_dir.join("report.csv"), &prov, &rows)?;
    let recall: Vec<RecallRow> = eval.recall.points.iter().map(|&(k, recall)| RecallRow { k, recall }).collect();
    formats::write_csv(&out_dir.join("recall.csv"), &prov, &recall)?;
    let overlap: Vec<OverlapRow> =
        eval.overlap.iter().map(|(s, p)| OverlapRow { strategy: s.clone(), percent: *p }).collect();
    formats::write_csv(&out_dir.join("overlap.csv"), &prov, &overlap)?;
    let abstr: Vec<AbstractivenessRow> = eval
        .abstractiveness
        .iter()
        .enumerate()
        .map(|(i, &fraction)| AbstractivenessRow { n: i + 1, fraction })
        .collect();
    formats::write_csv(&out_dir.join("abstractiveness.csv"), &prov, &abstr)?;

    let mut text = report::strategy_table(&eval.results, &config.evaluation.baseline);
    text.push('\n');
    text.push_str(&report::recall_table(&eval.recall));
    text.push('\n');
    text.push_str(&report::overlap_table(&eval.overlap));
    text.push('\n');
    text.push_str(&report::abstractiveness_table(&eval.abstractiveness));
    formats::write_text(&out_dir.join("report.txt"), &prov, &text)?;
    info!("evaluate: {} strategies -> {}", eval.results.len(), out_dir.display());
    Ok(())
}

pub const EXTRACTIVENESS_DEFINITION: &str =
    "1 - mean over n=1..3 of the share of candidate n-grams absent from the source";

pub fn run_export(config: &RunConfig, corpus: &Path, selection: &Path, out: &Path) -> Result<()> {
    let docs = formats::read_corpus(corpus)?;
    let selections = formats::read_selections(selection)?;
    let export = export_labels(&docs, &selections, config.export.share, &config.tokenizer)?;
    let inputs = vec![file_digest("corpus", corpus)?, file_digest("selection", selection)?];
    let prov = Provenance::new("export-labels", config, inputs);
    let summary = LabelSummary {
        share: config.export.share,
        flagged: export.flagged,
        records: export.records.len(),
        mean_extractiveness: export.mean_extractiveness,
        extractiveness: EXTRACTIVENESS_DEFINITION.to_string(),
    };
    formats::write_labels(out, &prov, summary, &export.records)?;
    info!("export-labels: {} records, {} flagged -> {}", export.records.len(), export.flagged, out.display());
    Ok(())
}

/// Runs every stage in order through files in `out_dir`. Evaluation is
/// skipped when no document carries a reference.
pub fn run_pipeline(config: &RunConfig, corpus: &Path, out_dir: &Path, export: bool) -> Result<()> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let paths = PipelinePaths::in_dir(out_dir);
    run_features(config, corpus, &paths.features)?;
    run_pseudo_targets(config, corpus, &paths.pseudo_targets)?;
    run_estimate(config, corpus, &paths.features, &paths.pseudo_targets, &paths.coefficients, &paths.estimation_log)?;
    run_rerank(config, &paths.features, &paths.coefficients, &paths.selection)?;
    let docs = formats::read_corpus(corpus)?;
    if docs.iter().any(|d| d.reference.is_some()) {
        run_evaluate(config, corpus, &paths.features, &paths.selection, &paths.report_dir)?;
    } else {
        warn!("no references in {}; evaluation skipped", corpus.display());
    }
    if export {
        run_export(config, corpus, &paths.selection, &paths.labels)?;
    }
    Ok(())
}
