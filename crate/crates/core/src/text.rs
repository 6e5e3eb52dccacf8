//! Tokenization, sentence segmentation and n-gram extraction.
//!
//! Every metric in the crate goes through these functions, so they are
//! deliberately simple and fully deterministic: NFKC normalization,
//! lowercasing, a split on anything that is not alphanumeric, and a
//! rule-based sentence splitter with an abbreviation allowlist.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::{Deref, Range};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::stem::porter_stem;

/// Abbreviations (lowercase, without their final period) after which a
/// period never ends a sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "rev", "gen", "col", "lt", "capt", "sgt", "cpl",
    "maj", "gov", "sen", "rep", "pres", "supt", "insp", "det", "hon", "messrs", "inc", "ltd", "co", "corp", "bros",
    "vs", "etc", "no", "nos", "vol", "fig", "figs", "approx", "dept", "est", "e.g", "i.e", "cf", "al", "u.s", "u.k",
    "u.n", "a.m", "p.m", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "ave",
    "blvd", "rd",
];

/// Function words dropped when `remove_stopwords` is set.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has", "he", "in", "is", "it", "its", "of", "on",
    "or", "she", "that", "the", "their", "they", "this", "to", "was", "were", "will", "with",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub stem: bool,
    pub remove_stopwords: bool,
    pub abbreviations: Vec<String>,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            stem: false,
            remove_stopwords: false,
            abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Lowercased tokens of a text, with the text they came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<String>,
    source_text: String,
}

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

impl Deref for TokenSequence {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.tokens
    }
}

pub fn tokenize(text: &str, config: &TokenizerConfig) -> TokenSequence {
    TokenSequence { tokens: tokenize_to_vec(text, config), source_text: String::from(text) }
}

/// Like [`tokenize`] without keeping a copy of the input.
pub fn tokenize_to_vec(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.nfkc() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            push_token(&mut tokens, core::mem::take(&mut current), config);
        }
    }
    if !current.is_empty() {
        push_token(&mut tokens, current, config);
    }
    tokens
}

fn push_token(tokens: &mut Vec<String>, token: String, config: &TokenizerConfig) {
    // Lowercasing can emit combining marks (e.g. U+0130); keep only the
    // alphanumeric pieces so tokens stay stable under re-tokenization.
    let pieces = token.split(|c: char| !c.is_alphanumeric()).filter(|p| !p.is_empty());
    for piece in pieces {
        if config.remove_stopwords && STOPWORDS.contains(&piece) {
            continue;
        }
        if config.stem {
            tokens.push(porter_stem(piece));
        } else {
            tokens.push(String::from(piece));
        }
    }
}

/// Sentences of a text with their byte spans in the original string.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SentenceList {
    sentences: Vec<String>,
    offsets: Vec<Range<usize>>,
}

impl SentenceList {
    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    /// Byte ranges into the segmented text.
    pub fn offsets(&self) -> &[Range<usize>] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Builds a list from already-segmented sentences; offsets index into
    /// the sentences joined with single spaces.
    pub fn from_sentences<S: AsRef<str>>(sentences: &[S]) -> Self {
        let mut list = SentenceList::default();
        let mut pos = 0;
        for s in sentences {
            let s = s.as_ref().trim();
            if s.is_empty() {
                continue;
            }
            list.offsets.push(pos..pos + s.len());
            list.sentences.push(String::from(s));
            pos += s.len() + 1;
        }
        list
    }

    fn push(&mut self, text: &str, span: Range<usize>) {
        let raw = &text[span.clone()];
        let trimmed_start = raw.len() - raw.trim_start().len();
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return;
        }
        let start = span.start + trimmed_start;
        self.offsets.push(start..start + trimmed.len());
        self.sentences.push(String::from(trimmed));
    }
}

/// Splits with the default abbreviation allowlist.
pub fn split_sentences(text: &str) -> SentenceList {
    split_sentences_with(text, &TokenizerConfig::default().abbreviations)
}

/// Sentence boundaries: every newline, and every `.`, `!` or `?`
/// (optionally followed by closing quotes or brackets) that is followed by
/// whitespace and then an uppercase letter or an opening quote or bracket.
/// A period closing a word from `abbreviations` is not a boundary.
pub fn split_sentences_with<S: AsRef<str>>(text: &str, abbreviations: &[S]) -> SentenceList {
    let mut list = SentenceList::default();
    let mut line_start = 0;
    for line in text.split('\n') {
        let line_end = line_start + line.len();
        split_line(text, line_start..line_end, abbreviations, &mut list);
        line_start = line_end + 1;
    }
    list
}

fn split_line<S: AsRef<str>>(text: &str, line: Range<usize>, abbreviations: &[S], out: &mut SentenceList) {
    let chars: Vec<(usize, char)> = text[line.clone()].char_indices().map(|(i, c)| (i + line.start, c)).collect();
    let mut start = line.start;
    let mut i = 0;
    while i < chars.len() {
        let (pos, ch) = chars[i];
        if !matches!(ch, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut end = i + 1;
        while end < chars.len() && is_closing(chars[end].1) {
            end += 1;
        }
        let mut next = end;
        while next < chars.len() && chars[next].1.is_whitespace() {
            next += 1;
        }
        let boundary = next > end
            && next < chars.len()
            && (chars[next].1.is_uppercase() || is_opening(chars[next].1))
            && !(ch == '.' && is_abbreviation(text, start, pos, abbreviations));
        if boundary {
            let cut = chars[end].0;
            out.push(text, start..cut);
            start = cut;
            i = next;
        } else {
            i = end;
        }
    }
    out.push(text, start..line.end);
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}' | '\u{bb}')
}

fn is_opening(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}' | '\u{ab}')
}

/// Whether the word ending just before the period at `period` is an
/// allowlisted abbreviation. Words may contain inner periods (`U.S.`).
fn is_abbreviation<S: AsRef<str>>(text: &str, floor: usize, period: usize, abbreviations: &[S]) -> bool {
    let before = &text[floor..period];
    let word_start = before
        .char_indices()
        .rev()
        .find(|&(_, c)| !(c.is_alphanumeric() || c == '.'))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let word = before[word_start..].trim_matches('.');
    if word.is_empty() {
        return false;
    }
    let word = word.to_lowercase();
    abbreviations.iter().any(|a| a.as_ref() == word)
}

/// Multiset of the n-grams of a token slice, keyed by sub-slices of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramMultiset<'a> {
    n: usize,
    counts: BTreeMap<&'a [String], usize>,
}

impl<'a> NgramMultiset<'a> {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &BTreeMap<&'a [String], usize> {
        &self.counts
    }

    pub fn get(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn unique(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Σ min(self[g], other[g]).
    pub fn clipped_overlap(&self, other: &NgramMultiset<'_>) -> usize {
        self.counts.iter().map(|(g, &c)| c.min(other.get(g))).sum()
    }

    pub(crate) fn of(tokens: &'a [String], n: usize) -> Self {
        let mut counts = BTreeMap::new();
        if n > 0 && tokens.len() >= n {
            for window in tokens.windows(n) {
                *counts.entry(window).or_insert(0) += 1;
            }
        }
        NgramMultiset { n, counts }
    }
}

/// N-grams of order `n` (1..=4).
pub fn ngrams(tokens: &[String], n: usize) -> Result<NgramMultiset<'_>> {
    if !(1..=4).contains(&n) {
        return Err(Error::param(alloc::format!("n-gram order must be in 1..=4, got {n}")));
    }
    Ok(NgramMultiset::of(tokens, n))
}

/// A text tokenized both as a whole and sentence by sentence, the two views
/// needed by ROUGE-1/2 and ROUGE-LSum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedText {
    pub tokens: Vec<String>,
    pub sentences: Vec<Vec<String>>,
}

impl TokenizedText {
    pub fn new(text: &str, config: &TokenizerConfig) -> Self {
        let sentences: Vec<Vec<String>> = split_sentences_with(text, &config.abbreviations)
            .sentences()
            .iter()
            .map(|s| tokenize_to_vec(s, config))
            .filter(|t| !t.is_empty())
            .collect();
        Self { tokens: tokenize_to_vec(text, config), sentences }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(text: &str) -> Vec<String> {
        tokenize(text, &TokenizerConfig::default()).into_tokens()
    }

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(toks("The cat sat."), strs(&["the", "cat", "sat"]));
        assert!(toks("").is_empty());
        assert_eq!(toks("Dr. Smith's 2nd test"), strs(&["dr", "smith", "s", "2nd", "test"]));
    }

    #[test]
    fn tokenize_normalizes_compatibility_forms() {
        // Fullwidth letters and the "fi" ligature fold under NFKC.
        assert_eq!(toks("ＡＢＣ ﬁne"), strs(&["abc", "fine"]));
    }

    #[test]
    fn tokenize_with_stemming_and_stopwords() {
        let config = TokenizerConfig { stem: true, remove_stopwords: true, ..TokenizerConfig::default() };
        let t = tokenize("The ponies were running to the meadows", &config);
        assert_eq!(t.tokens(), strs(&["poni", "run", "meadow"]).as_slice());
        assert_eq!(t.source_text(), "The ponies were running to the meadows");
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_sentences("A b. C d.").sentences(), strs(&["A b.", "C d."]).as_slice());
        assert_eq!(split_sentences("One sentence").sentences(), strs(&["One sentence"]).as_slice());
        assert_eq!(
            split_sentences("He met Dr. Smith. Then left.").sentences(),
            strs(&["He met Dr. Smith.", "Then left."]).as_slice()
        );
    }

    #[test]
    fn split_handles_quotes_newlines_and_lowercase_continuations() {
        let s = split_sentences("He said \"stop.\" Then he left.\nNew line here\n\n  ");
        assert_eq!(s.sentences(), strs(&["He said \"stop.\"", "Then he left.", "New line here"]).as_slice());
        let s = split_sentences("Pi is approx. three. it continues e.g. here. U.S. Army won.");
        assert_eq!(s.sentences(), strs(&["Pi is approx. three. it continues e.g. here.", "U.S. Army won."]).as_slice());
        assert!(split_sentences("").is_empty());
        assert!(split_sentences(" \n\t ").is_empty());
    }

    #[test]
    fn split_offsets_point_into_text() {
        let text = "  First one!  Second? \nThird.";
        let s = split_sentences(text);
        for (sent, span) in s.sentences().iter().zip(s.offsets()) {
            assert_eq!(&text[span.clone()], sent);
        }
    }

    #[test]
    fn ngram_examples() {
        let t = strs(&["a", "a", "b", "a"]);
        let m = ngrams(&t, 2).unwrap();
        assert_eq!(m.unique(), 3);
        assert_eq!(m.get(&strs(&["a", "a"])), 1);
        assert_eq!(m.get(&strs(&["a", "b"])), 1);
        assert_eq!(m.get(&strs(&["b", "a"])), 1);

        let short = strs(&["a"]);
        assert!(ngrams(&short, 2).unwrap().is_empty());

        let ab = strs(&["a", "b"]);
        let m = ngrams(&ab, 1).unwrap();
        assert_eq!((m.get(&strs(&["a"])), m.get(&strs(&["b"])), m.total()), (1, 1, 2));

        assert!(matches!(ngrams(&ab, 0), Err(Error::Parameter(_))));
        assert!(matches!(ngrams(&ab, 5), Err(Error::Parameter(_))));
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        proptest::string::string_regex("[A-Za-z0-9 .,!?'\"\\n\u{e9}\u{fb01}\u{130}-]{0,80}").unwrap()
    }

    proptest! {
        #[test]
        fn tokenization_is_idempotent(text in text_strategy()) {
            let config = TokenizerConfig::default();
            let first = tokenize(&text, &config);
            prop_assert!(first.iter().all(|t| !t.is_empty()));
            let again = tokenize(&first.join(" "), &config);
            prop_assert_eq!(first.tokens(), again.tokens());
            prop_assert_eq!(tokenize(&text, &config), first);
        }

        #[test]
        fn sentence_spans_cover_text(text in text_strategy()) {
            let s = split_sentences(&text);
            let mut last_end = 0;
            for (sent, span) in s.sentences().iter().zip(s.offsets()) {
                prop_assert!(span.start >= last_end);
                prop_assert!(span.start < span.end);
                prop_assert_eq!(&text[span.clone()], sent.as_str());
                last_end = span.end;
            }
            let strip = |x: &str| x.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            let joined: String = s.sentences().concat();
            prop_assert_eq!(strip(&joined), strip(&text));
        }

        #[test]
        fn ngram_total_matches_window_count(
            tokens in proptest::collection::vec("[a-c]", 0..12),
            n in 1usize..=4,
        ) {
            let m = ngrams(&tokens, n).unwrap();
            prop_assert_eq!(m.total(), tokens.len().saturating_sub(n - 1).min(tokens.len()));
            prop_assert!(m.counts().values().all(|&c| c >= 1));
        }
    }
}
