//! Closed-form lexical metrics: ROUGE-1/2/L/LSum, sentence-pair BLEU,
//! n-gram diversity and length proximity.
//!
//! All functions work on lowercased token slices produced by
//! [`crate::text`]. ROUGE values used as features or objectives are F1.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::text::{NgramMultiset, TokenizedText, TokenizerConfig};

/// Order of the diversity feature: unique-n-gram ratios for n = 1..=3.
pub const DIVERSITY_ORDER: usize = 3;

/// Maximum n-gram order of BLEU.
pub const BLEU_MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { precision, recall, f1 }
    }

    /// Precision `hits / candidate_total`, recall `hits / reference_total`;
    /// an empty denominator yields 0.
    pub fn from_counts(hits: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self::new(ratio(hits, candidate_total), ratio(hits, reference_total))
    }
}

/// Clipped n-gram overlap.
pub fn rouge_n(candidate: &[String], reference: &[String], n: usize) -> Prf {
    let cand = NgramMultiset::of(candidate, n);
    let refs = NgramMultiset::of(reference, n);
    Prf::from_counts(cand.clipped_overlap(&refs), cand.total(), refs.total())
}

/// Sequence-level ROUGE-L.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> Prf {
    let table = LcsTable::new(reference, candidate);
    Prf::from_counts(table.len(), candidate.len(), reference.len())
}

/// Summary-level ROUGE-LSum.
///
/// For each reference sentence the union of its LCS positions against every
/// candidate sentence is taken; each unioned token is credited only while
/// both the global candidate and reference token budgets allow it.
pub fn rouge_lsum<C, R>(candidate: &[C], reference: &[R]) -> Prf
where
    C: AsRef<[String]>,
    R: AsRef<[String]>,
{
    let cand_total: usize = candidate.iter().map(|s| s.as_ref().len()).sum();
    let ref_total: usize = reference.iter().map(|s| s.as_ref().len()).sum();
    if cand_total == 0 || ref_total == 0 {
        return Prf::default();
    }

    let mut cand_budget = token_counts(candidate.iter().flat_map(|s| s.as_ref()));
    let mut ref_budget = token_counts(reference.iter().flat_map(|s| s.as_ref()));

    let mut hits = 0;
    for ref_sent in reference {
        let ref_sent = ref_sent.as_ref();
        let union: BTreeSet<usize> =
            candidate.iter().flat_map(|c| LcsTable::new(ref_sent, c.as_ref()).reference_positions()).collect();
        for pos in union {
            let token = ref_sent[pos].as_str();
            let (Some(r), Some(c)) = (ref_budget.get_mut(token), cand_budget.get_mut(token)) else {
                continue;
            };
            if *r > 0 && *c > 0 {
                *r -= 1;
                *c -= 1;
                hits += 1;
            }
        }
    }
    Prf::from_counts(hits, cand_total, ref_total)
}

fn token_counts<'a>(tokens: impl Iterator<Item = &'a String>) -> BTreeMap<&'a str, usize> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Dynamic-programming LCS table; `cells[i][j]` is the LCS length of
/// `reference[..i]` and `candidate[..j]`.
struct LcsTable<'a> {
    reference: &'a [String],
    candidate: &'a [String],
    width: usize,
    cells: Vec<u32>,
}

impl<'a> LcsTable<'a> {
    fn new(reference: &'a [String], candidate: &'a [String]) -> Self {
        let width = candidate.len() + 1;
        let mut cells = vec![0u32; (reference.len() + 1) * width];
        for i in 1..=reference.len() {
            for j in 1..=candidate.len() {
                cells[i * width + j] = if reference[i - 1] == candidate[j - 1] {
                    cells[(i - 1) * width + j - 1] + 1
                } else {
                    cells[(i - 1) * width + j].max(cells[i * width + j - 1])
                };
            }
        }
        Self { reference, candidate, width, cells }
    }

    fn at(&self, i: usize, j: usize) -> u32 {
        self.cells[i * self.width + j]
    }

    fn len(&self) -> usize {
        self.at(self.reference.len(), self.candidate.len()) as usize
    }

    /// Reference positions of one LCS. On a mismatch the traceback moves
    /// along the candidate only when that strictly keeps a longer prefix.
    fn reference_positions(&self) -> Vec<usize> {
        let (mut i, mut j) = (self.reference.len(), self.candidate.len());
        let mut positions = Vec::new();
        while i > 0 && j > 0 {
            if self.reference[i - 1] == self.candidate[j - 1] {
                positions.push(i - 1);
                i -= 1;
                j -= 1;
            } else if self.at(i, j - 1) > self.at(i - 1, j) {
                j -= 1;
            } else {
                i -= 1;
            }
        }
        positions.reverse();
        positions
    }
}

/// F1 of ROUGE-1, ROUGE-2 and ROUGE-LSum for one candidate/reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RougeScores {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_lsum: f64,
}

impl RougeScores {
    pub fn compute(candidate: &TokenizedText, reference: &TokenizedText) -> Self {
        Self {
            rouge1: rouge_n(&candidate.tokens, &reference.tokens, 1).f1,
            rouge2: rouge_n(&candidate.tokens, &reference.tokens, 2).f1,
            rouge_lsum: rouge_lsum(&candidate.sentences, &reference.sentences).f1,
        }
    }

    pub fn mean(&self) -> f64 {
        (self.rouge1 + self.rouge2 + self.rouge_lsum) / 3.0
    }
}

/// Mean of ROUGE-1, ROUGE-2 and ROUGE-LSum F1.
pub fn mean_rouge(candidate: &str, reference: &str, config: &TokenizerConfig) -> f64 {
    RougeScores::compute(&TokenizedText::new(candidate, config), &TokenizedText::new(reference, config)).mean()
}

/// Single-reference BLEU with uniform weights up to 4-grams.
///
/// An order whose clipped match count is zero is smoothed to
/// `1 / (total + 1)` for n >= 2; a zero unigram precision gives 0. Orders
/// for which the candidate has no n-grams are left out of the geometric
/// mean.
pub fn bleu(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=BLEU_MAX_ORDER {
        let cand = NgramMultiset::of(candidate, n);
        let total = cand.total();
        if total == 0 {
            continue;
        }
        let matches = cand.clipped_overlap(&NgramMultiset::of(reference, n));
        let precision = match (matches, n) {
            (0, 1) => return 0.0,
            (0, _) => 1.0 / (total as f64 + 1.0),
            _ => matches as f64 / total as f64,
        };
        log_sum += libm::log(precision);
        orders += 1;
    }
    let geo_mean = libm::exp(log_sum / orders as f64);
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let brevity = if c < r { libm::exp(1.0 - r / c) } else { 1.0 };
    (geo_mean * brevity).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityScore {
    pub value: f64,
    pub per_order: [f64; DIVERSITY_ORDER],
}

/// Mean over n = 1..=3 of unique/total n-grams; an order with no n-grams
/// counts as 1.0.
pub fn diversity(tokens: &[String]) -> DiversityScore {
    let mut per_order = [1.0; DIVERSITY_ORDER];
    for (slot, n) in per_order.iter_mut().zip(1..) {
        let grams = NgramMultiset::of(tokens, n);
        if grams.total() > 0 {
            *slot = grams.unique() as f64 / grams.total() as f64;
        }
    }
    let value = per_order.iter().sum::<f64>() / DIVERSITY_ORDER as f64;
    DiversityScore { value, per_order }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthScore {
    pub value: f64,
    pub candidate_len: usize,
    pub mu_len: f64,
}

/// `1 / max(1, |candidate_len - mu_len|)`.
pub fn length_score(candidate_len: usize, mu_len: f64) -> LengthScore {
    let gap = libm::fabs(candidate_len as f64 - mu_len);
    LengthScore { value: 1.0 / gap.max(1.0), candidate_len, mu_len }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn t(text: &str) -> Vec<String> {
        text.split_whitespace().map(|s| s.to_string()).collect()
    }

    const EPS: f64 = 1e-4;

    #[test]
    fn rouge_cat_mat() {
        let (c, r) = (t("the cat sat on the mat"), t("the cat is on the mat"));
        let r1 = rouge_n(&c, &r, 1);
        assert!((r1.precision - 5.0 / 6.0).abs() < 1e-12);
        assert!((r1.recall - 5.0 / 6.0).abs() < 1e-12);
        assert!((r1.f1 - 0.8333).abs() < EPS);
        let r2 = rouge_n(&c, &r, 2);
        assert!((r2.precision - 0.6).abs() < 1e-12 && (r2.recall - 0.6).abs() < 1e-12);
        assert!((r2.f1 - 0.6).abs() < EPS);
        let rl = rouge_l(&c, &r);
        assert!((rl.f1 - 0.8333).abs() < EPS);
        let same = rouge_n(&c, &c, 1);
        assert_eq!((same.precision, same.recall, same.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn rouge_l_degenerate() {
        assert_eq!(rouge_l(&t("a b c"), &t("a b c")).f1, 1.0);
        assert_eq!(rouge_l(&t("a b c"), &t("x y z")).f1, 0.0);
        assert_eq!(rouge_l(&[], &t("x y z")), Prf::default());
    }

    #[test]
    fn rouge_lsum_union_example() {
        let cand = [t("the cat sat"), t("dogs bark")];
        let refs = [t("the cat sat"), t("birds sing")];
        let s = rouge_lsum(&cand, &refs);
        assert!((s.precision - 0.6).abs() < 1e-12);
        assert!((s.recall - 0.6).abs() < 1e-12);
        assert!((s.f1 - 0.6).abs() < 1e-12);

        let one_c = [t("the cat sat on the mat")];
        let one_r = [t("the cat is on the mat")];
        assert_eq!(rouge_lsum(&one_c, &one_r), rouge_l(&one_c[0], &one_r[0]));
        assert_eq!(rouge_lsum(&cand, &cand).f1, 1.0);
    }

    #[test]
    fn rouge_lsum_union_credits_across_candidate_sentences() {
        // The reference sentence is covered by two different candidate
        // sentences; the union credits both halves.
        let cand = [t("a b"), t("c d")];
        let refs = [t("a b c d")];
        let s = rouge_lsum(&cand, &refs);
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        // Token budgets stop a single candidate token from being credited
        // by two reference sentences.
        let cand = [t("a")];
        let refs = [t("a"), t("a")];
        let s = rouge_lsum(&cand, &refs);
        assert_eq!((s.precision, s.recall), (1.0, 0.5));
    }

    #[test]
    fn mean_rouge_examples() {
        let cfg = TokenizerConfig::default();
        let m = mean_rouge("the cat sat on the mat", "the cat is on the mat", &cfg);
        assert!((m - (5.0 / 6.0 + 0.6 + 5.0 / 6.0) / 3.0).abs() < 1e-12);
        assert!((m - 0.7556).abs() < EPS);
        assert_eq!(mean_rouge("A b c. D e.", "A b c. D e.", &cfg), 1.0);
        assert_eq!(mean_rouge("a b c", "x y z", &cfg), 0.0);
    }

    #[test]
    fn bleu_examples() {
        assert_eq!(bleu(&t("a b c d e"), &t("a b c d e")), 1.0);
        let b = bleu(&t("the cat the cat"), &t("the cat sat"));
        let expected = libm::pow(1.0 / 36.0, 0.25);
        assert!((b - expected).abs() < 1e-12);
        assert!((b - 0.4082).abs() < EPS);
        assert_eq!(bleu(&[], &t("a")), 0.0);
        assert_eq!(bleu(&t("x y z"), &t("a b c")), 0.0);
    }

    #[test]
    fn bleu_brevity_penalty() {
        // Exact 2-token match against a 4-token reference: BP = exp(1 - 4/2).
        let b = bleu(&t("a b"), &t("a b c d"));
        assert!((b - libm::exp(-1.0)).abs() < 1e-12);
    }

    #[test]
    fn diversity_examples() {
        let d = diversity(&t("a a b a"));
        assert_eq!(d.per_order, [0.5, 1.0, 1.0]);
        assert!((d.value - 0.8333).abs() < EPS);
        assert_eq!(diversity(&t("a b c d")).value, 1.0);
        assert_eq!(diversity(&t("a")).value, 1.0);
        assert_eq!(diversity(&[]).value, 1.0);
    }

    #[test]
    fn length_examples() {
        assert_eq!(length_score(10, 10.0).value, 1.0);
        assert!((length_score(7, 10.0).value - 1.0 / 3.0).abs() < 1e-12);
        assert!((length_score(0, 30.0).value - 1.0 / 30.0).abs() < 1e-12);
        assert_eq!(length_score(10, 10.5).value, 1.0);
    }

    #[test]
    fn prf_f1_zero_when_both_zero() {
        assert_eq!(Prf::new(0.0, 0.0).f1, 0.0);
        assert!((Prf::new(0.5, 0.25).f1 - 2.0 * 0.125 / 0.75).abs() < 1e-12);
    }
}
