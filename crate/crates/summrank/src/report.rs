//! Human-readable evaluation tables.

use std::fmt::Write;

use summrank_core::evaluation::{RecallCurve, StrategyResult};

/// Strategy rows with R-1 / R-2 / R-L / mean in percent and the relative
/// gain column.
pub fn strategy_table(results: &[StrategyResult], baseline: &str) -> String {
    let width = results.iter().map(|r| r.strategy.len()).max().unwrap_or(0).max("strategy".len());
    let mut out = String::new();
    writeln!(out, "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>8}", "strategy", "R-1", "R-2", "R-L", "mean", "gain")
        .unwrap();
    for r in results {
        let gain = match r.gain_pct {
            Some(g) => format!("{g:+.2}%"),
            None => String::from("n/a"),
        };
        writeln!(
            out,
            "{:<width$}  {:>7.2}  {:>7.2}  {:>7.2}  {:>7.2}  {:>8}",
            r.strategy,
            100.0 * r.rouge1,
            100.0 * r.rouge2,
            100.0 * r.rouge_lsum,
            100.0 * r.mean_rouge,
            gain
        )
        .unwrap();
    }
    writeln!(out, "R-L is the summary-level LSum variant; gain is relative to `{baseline}`.").unwrap();
    out
}

pub fn recall_table(curve: &RecallCurve) -> String {
    let mut out = String::from("recall of an oracle candidate within the top k\n");
    for (k, r) in &curve.points {
        writeln!(out, "  k={k:<4} {:>6.2}%", 100.0 * r).unwrap();
    }
    out
}

pub fn overlap_table(rows: &[(String, f64)]) -> String {
    let mut out = String::from("documents where the selection matches a trivial choice\n");
    for (name, pct) in rows {
        writeln!(out, "  {name:<28} {pct:>6.2}%").unwrap();
    }
    out
}

pub fn abstractiveness_table(fractions: &[f64]) -> String {
    let mut out = String::from("novel n-grams in the selected summaries\n");
    for (n, f) in fractions.iter().enumerate() {
        writeln!(out, "  n={}  {:>6.2}%", n + 1, 100.0 * f).unwrap();
    }
    out
}
