use std::time::Instant;

use summrank_core::estimate::{hierarchical_estimate, EstimationConfig, ObjectiveTable};
use summrank_core::features::{compute_features, corpus_mu_len, FeatureSpec, Normalization};
use summrank_core::pseudo::{extract, PseudoMethod, DEFAULT_SALIENT_RATIO};
use summrank_core::rerank::rerank;
use summrank_core::semantic::{BuiltinLexical, PairScorer, ScorerKind};
use summrank_core::synth::{generate, Plant, SynthConfig};
use summrank_core::text::{split_sentences, TokenizerConfig};
use summrank_core::Document;

fn features(docs: &[Document], mu_len: f64, scorer: &mut BuiltinLexical) -> summrank_core::FeatureMatrix {
    let spec = FeatureSpec::new(&[ScorerKind::BuiltinLexical]);
    let mut scorers: Vec<&mut dyn PairScorer> = vec![scorer];
    compute_features(
        docs,
        &spec,
        &mut scorers,
        Some(mu_len),
        Normalization::PerInstanceMinmax,
        &TokenizerConfig::default(),
    )
    .unwrap()
}

#[test]
fn estimated_weights_pick_the_planted_candidate_on_held_out_documents() {
    let start = Instant::now();
    let tok = TokenizerConfig::default();
    let corpus =
        generate(&SynthConfig { seed: 7, n_docs: 200, k: 10, plant: Plant::BleuOracle, ..Default::default() }).unwrap();
    let (train, test) = corpus.documents.split_at(100);
    let mu_len = corpus_mu_len(train, &tok);
    let mut scorer = BuiltinLexical::for_sources(train.iter().map(|d| d.source.as_str()), &tok);

    let train_matrix = features(train, mu_len, &mut scorer);
    let targets: Vec<_> = train
        .iter()
        .map(|d| extract(PseudoMethod::Lead3, &split_sentences(&d.source), 0, DEFAULT_SALIENT_RATIO, &tok).unwrap())
        .collect();
    let table = ObjectiveTable::build(train, &targets, &tok).unwrap();
    let estimate =
        hierarchical_estimate(&train_matrix, &table, &EstimationConfig { seed: 7, ..Default::default() }).unwrap();

    let test_matrix = features(test, mu_len, &mut scorer);
    let selections = rerank(&test_matrix, &estimate.coefficients).unwrap();
    let hits = selections.iter().zip(&corpus.plants[100..]).filter(|(s, p)| Some(s.chosen) == p.planted_index).count();
    assert!(hits >= 90, "planted candidate chosen on {hits}/100 held-out documents");
    assert!(start.elapsed().as_secs() < 60);
}
