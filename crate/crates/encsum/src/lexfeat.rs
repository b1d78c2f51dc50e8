//! Lexical similarity feature bank: six matching formulas, each reported as
//! recall, precision, and F-measure, computed over configurable pairs of
//! document sides (expert summary, paragraphs, lead sentences, generated
//! summary).
//!
//! Recall is always normalized by the first (query) sequence, precision by
//! the second (candidate) sequence. N-gram style formulas use clipped
//! multiset counting.

use std::collections::HashMap;
use std::hash::Hash;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CaseDocument, Token};

#[derive(Debug, Error)]
pub enum LexfeatError {
    #[error("document {doc}: side {side:?} cannot be resolved")]
    UnresolvableSide { doc: String, side: Side },
}

/// Recall/precision/F triple, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchScore {
    pub recall: f64,
    pub precision: f64,
    pub f_measure: f64,
}

impl MatchScore {
    pub const ZERO: MatchScore = MatchScore { recall: 0.0, precision: 0.0, f_measure: 0.0 };

    /// F = 2PR/(P+R) when the denominator is positive, else 0.
    pub fn from_pr(precision: f64, recall: f64) -> MatchScore {
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        MatchScore { recall, precision, f_measure }
    }

    fn from_counts(intersection: f64, query_total: f64, candidate_total: f64) -> MatchScore {
        let recall = if query_total > 0.0 { intersection / query_total } else { 0.0 };
        let precision = if candidate_total > 0.0 { intersection / candidate_total } else { 0.0 };
        MatchScore::from_pr(precision, recall)
    }
}

fn clipped_intersection<K: Eq + Hash>(a: &HashMap<K, usize>, b: &HashMap<K, usize>) -> usize {
    a.iter().map(|(k, &ca)| ca.min(b.get(k).copied().unwrap_or(0))).sum()
}

fn ngram_counts(tokens: &[Token], n: usize) -> HashMap<&[Token], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap. Either side shorter than n scores zero.
pub fn ngram_match(a: &[Token], b: &[Token], n: usize) -> MatchScore {
    assert!(n >= 1, "n-gram order must be at least 1");
    if a.len() < n || b.len() < n {
        return MatchScore::ZERO;
    }
    let ca = ngram_counts(a, n);
    let cb = ngram_counts(b, n);
    let intersection = clipped_intersection(&ca, &cb) as f64;
    MatchScore::from_counts(intersection, (a.len() - n + 1) as f64, (b.len() - n + 1) as f64)
}

/// Ordered pairs (t_i, t_j) with i < j and, when `window` is bounded,
/// j − i ≤ window + 1 (at most `window` tokens skipped between the two).
fn skip_pair_counts(
    tokens: &[Token],
    window: Option<usize>,
) -> HashMap<(&Token, &Token), usize> {
    let mut counts = HashMap::new();
    for i in 0..tokens.len() {
        let hi = match window {
            None => tokens.len(),
            Some(w) => tokens.len().min(i.saturating_add(w).saturating_add(2)),
        };
        for j in (i + 1)..hi {
            *counts.entry((&tokens[i], &tokens[j])).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped skip-bigram overlap. A side with fewer than two tokens scores
/// zero.
pub fn skip_bigram_match(a: &[Token], b: &[Token], skip_window: Option<usize>) -> MatchScore {
    if a.len() < 2 || b.len() < 2 {
        return MatchScore::ZERO;
    }
    let ca = skip_pair_counts(a, skip_window);
    let cb = skip_pair_counts(b, skip_window);
    let intersection = clipped_intersection(&ca, &cb) as f64;
    let total = |c: &HashMap<(&Token, &Token), usize>| c.values().sum::<usize>() as f64;
    MatchScore::from_counts(intersection, total(&ca), total(&cb))
}

#[derive(PartialEq, Eq, Hash)]
enum SuKey<'a> {
    Uni(&'a Token),
    Pair(&'a Token, &'a Token),
}

fn su_counts<'a>(tokens: &'a [Token], window: Option<usize>) -> HashMap<SuKey<'a>, usize> {
    let mut counts = HashMap::new();
    for t in tokens {
        *counts.entry(SuKey::Uni(t)).or_insert(0) += 1;
    }
    for ((l, r), c) in skip_pair_counts(tokens, window) {
        *counts.entry(SuKey::Pair(l, r)).or_insert(0) += c;
    }
    counts
}

/// Unigrams and skip-bigrams pooled into one clipped multiset.
pub fn unigram_skip_match(a: &[Token], b: &[Token], skip_window: Option<usize>) -> MatchScore {
    let ca = su_counts(a, skip_window);
    let cb = su_counts(b, skip_window);
    let intersection = clipped_intersection(&ca, &cb) as f64;
    let total = |c: &HashMap<SuKey, usize>| c.values().sum::<usize>() as f64;
    MatchScore::from_counts(intersection, total(&ca), total(&cb))
}

fn lcs_len(a: &[Token], b: &[Token]) -> usize {
    let n = b.len();
    let mut prev = vec![0usize; n + 1];
    let mut curr = vec![0usize; n + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            curr[j + 1] = if ai == bj { prev[j] + 1 } else { prev[j + 1].max(curr[j]) };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[n]
}

/// Longest common subsequence length L, reported as R = L/|a|, P = L/|b|.
pub fn lcs_match(a: &[Token], b: &[Token]) -> MatchScore {
    if a.is_empty() || b.is_empty() {
        return MatchScore::ZERO;
    }
    let l = lcs_len(a, b) as f64;
    MatchScore::from_counts(l, a.len() as f64, b.len() as f64)
}

/// Weighted LCS value with consecutive-run weight f(k) = k^alpha: a run of
/// k consecutive matches contributes f(k), accumulated incrementally as
/// f(k+1) − f(k) per extension.
fn wlcs_raw(a: &[Token], b: &[Token], alpha: f64) -> f64 {
    let f = |k: usize| (k as f64).powf(alpha);
    let n = b.len();
    let mut c_prev = vec![0.0f64; n + 1];
    let mut c_curr = vec![0.0f64; n + 1];
    let mut w_prev = vec![0usize; n + 1];
    let mut w_curr = vec![0usize; n + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            if ai == bj {
                let k = w_prev[j];
                c_curr[j + 1] = c_prev[j] + f(k + 1) - f(k);
                w_curr[j + 1] = k + 1;
            } else if c_prev[j + 1] >= c_curr[j] {
                c_curr[j + 1] = c_prev[j + 1];
                w_curr[j + 1] = 0;
            } else {
                c_curr[j + 1] = c_curr[j];
                w_curr[j + 1] = 0;
            }
        }
        std::mem::swap(&mut c_prev, &mut c_curr);
        std::mem::swap(&mut w_prev, &mut w_curr);
    }
    c_prev[n]
}

/// Weighted LCS favoring contiguous matches; scores are f⁻¹(WLCS)
/// normalized by each side's length (then clamped against rounding noise).
pub fn weighted_lcs_match(a: &[Token], b: &[Token], alpha: f64) -> MatchScore {
    assert!(alpha > 1.0, "wlcs alpha must exceed 1");
    if a.is_empty() || b.is_empty() {
        return MatchScore::ZERO;
    }
    let inv = wlcs_raw(a, b, alpha).powf(1.0 / alpha);
    let recall = (inv / a.len() as f64).min(1.0);
    let precision = (inv / b.len() as f64).min(1.0);
    MatchScore::from_pr(precision, recall)
}

// ---------------------------------------------------------------------------
// Feature bank
// ---------------------------------------------------------------------------

/// One comparable side of a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Expert summary sentences.
    Summary,
    /// All paragraph sentences.
    Paragraphs,
    /// First sentence of each paragraph.
    Lead,
    /// Model-generated summary tokens, supplied by the caller.
    Generated,
}

impl Side {
    pub fn code(self) -> char {
        match self {
            Side::Summary => 's',
            Side::Paragraphs => 'p',
            Side::Lead => 'l',
            Side::Generated => 'e',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formula {
    Unigram,
    Bigram,
    SkipBigram,
    UnigramSkip,
    Lcs,
    WeightedLcs,
}

/// Fixed formula order within the feature vector.
pub const FORMULAS: [Formula; 6] = [
    Formula::Unigram,
    Formula::Bigram,
    Formula::SkipBigram,
    Formula::UnigramSkip,
    Formula::Lcs,
    Formula::WeightedLcs,
];

impl Formula {
    pub fn code(self) -> &'static str {
        match self {
            Formula::Unigram => "unigram",
            Formula::Bigram => "bigram",
            Formula::SkipBigram => "skip-bigram",
            Formula::UnigramSkip => "unigram-skip",
            Formula::Lcs => "lcs",
            Formula::WeightedLcs => "weighted-lcs",
        }
    }
}

fn default_alpha() -> f64 {
    1.2
}

/// Feature bank configuration: which (query side, candidate side) pairs to
/// compare and how the formulas are parameterized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalConfig {
    /// Ordered (query side, candidate side) pairs.
    pub options: Vec<(Side, Side)>,
    /// Maximum tokens skipped inside a skip-bigram; `None` is unlimited.
    #[serde(default)]
    pub skip_window: Option<usize>,
    #[serde(default = "default_alpha")]
    pub wlcs_alpha: f64,
    #[serde(default)]
    pub remove_stopwords: bool,
    #[serde(default)]
    pub stem: bool,
}

impl LexicalConfig {
    /// Four options: s-s, p-s, s-p, p-p.
    pub fn options_2018() -> LexicalConfig {
        use Side::{Paragraphs as P, Summary as S};
        LexicalConfig {
            options: vec![(S, S), (P, S), (S, P), (P, P)],
            skip_window: None,
            wlcs_alpha: default_alpha(),
            remove_stopwords: false,
            stem: false,
        }
    }

    /// Six options: candidate-summary comparisons replaced by lead and
    /// generated-summary sides: s-l, s-e, p-l, p-e, s-p, p-p.
    pub fn options_2019() -> LexicalConfig {
        use Side::{Generated as E, Lead as L, Paragraphs as P, Summary as S};
        LexicalConfig {
            options: vec![(S, L), (S, E), (P, L), (P, E), (S, P), (P, P)],
            skip_window: None,
            wlcs_alpha: default_alpha(),
            remove_stopwords: false,
            stem: false,
        }
    }

    pub fn feature_len(&self) -> usize {
        self.options.len() * FORMULAS.len() * 3
    }
}

impl Default for LexicalConfig {
    fn default() -> Self {
        LexicalConfig::options_2018()
    }
}

/// Generated-summary tokens by document id, for the `e` side.
pub type GeneratedTokens = HashMap<String, Vec<Token>>;

const STOPWORDS: [&str; 48] = [
    "a", "an", "and", "any", "are", "as", "at", "be", "been", "but", "by", "can", "did", "do",
    "for", "from", "had", "has", "have", "he", "her", "his", "if", "in", "into", "is", "it",
    "its", "may", "no", "not", "of", "on", "or", "shall", "she", "so", "such", "that", "the",
    "their", "there", "they", "this", "to", "was", "were", "with",
];

fn preprocess(mut tokens: Vec<Token>, cfg: &LexicalConfig) -> Vec<Token> {
    if cfg.remove_stopwords {
        tokens.retain(|t| !STOPWORDS.contains(&t.as_str()));
    }
    if cfg.stem {
        let stemmer = Stemmer::create(Algorithm::English);
        tokens = tokens
            .into_iter()
            .map(|t| Token::new(stemmer.stem(t.as_str()).as_ref()))
            .collect();
    }
    tokens
}

fn resolve_side(
    doc: &CaseDocument,
    side: Side,
    generated: &GeneratedTokens,
) -> Result<Vec<Token>, LexfeatError> {
    let unresolvable = || LexfeatError::UnresolvableSide { doc: doc.id.clone(), side };
    let tokens = match side {
        Side::Summary => doc
            .summary_sentences()
            .ok_or_else(unresolvable)?
            .iter()
            .flat_map(|s| s.iter().cloned())
            .collect(),
        Side::Paragraphs => doc.paragraph_sentences().flat_map(|s| s.iter().cloned()).collect(),
        Side::Lead => {
            doc.lead_sentences().iter().flat_map(|s| s.iter().cloned()).collect()
        }
        Side::Generated => generated.get(&doc.id).ok_or_else(unresolvable)?.clone(),
    };
    Ok(tokens)
}

fn formula_score(formula: Formula, a: &[Token], b: &[Token], cfg: &LexicalConfig) -> MatchScore {
    match formula {
        Formula::Unigram => ngram_match(a, b, 1),
        Formula::Bigram => ngram_match(a, b, 2),
        Formula::SkipBigram => skip_bigram_match(a, b, cfg.skip_window),
        Formula::UnigramSkip => unigram_skip_match(a, b, cfg.skip_window),
        Formula::Lcs => lcs_match(a, b),
        Formula::WeightedLcs => weighted_lcs_match(a, b, cfg.wlcs_alpha),
    }
}

/// The full feature vector for one (query, candidate) pair: options (outer,
/// in config order) × formulas (fixed order) × factors (R, P, F). Each side
/// concatenates its sentences into one token sequence.
pub fn lexical_features(
    query: &CaseDocument,
    candidate: &CaseDocument,
    cfg: &LexicalConfig,
    generated: &GeneratedTokens,
) -> Result<Vec<f64>, LexfeatError> {
    assert!(!cfg.options.is_empty(), "at least one matching option is required");
    let mut features = Vec::with_capacity(cfg.feature_len());
    for &(q_side, c_side) in &cfg.options {
        let a = preprocess(resolve_side(query, q_side, generated)?, cfg);
        let b = preprocess(resolve_side(candidate, c_side, generated)?, cfg);
        for formula in FORMULAS {
            let m = formula_score(formula, &a, &b, cfg);
            features.push(m.recall);
            features.push(m.precision);
            features.push(m.f_measure);
        }
    }
    Ok(features)
}

/// One name per feature, aligned with [`lexical_features`] output order:
/// "q-c:formula:factor".
pub fn feature_names(cfg: &LexicalConfig) -> Vec<String> {
    let mut names = Vec::with_capacity(cfg.feature_len());
    for &(q, c) in &cfg.options {
        for formula in FORMULAS {
            for factor in ["R", "P", "F"] {
                names.push(format!("{}-{}:{}:{}", q.code(), c.code(), formula.code(), factor));
            }
        }
    }
    names
}

#[derive(Serialize)]
struct FeatureLine<'a> {
    query: &'a str,
    candidate: &'a str,
    features: &'a [f64],
}

/// One JSONL record: {"query", "candidate", "features": [...]}.
pub fn features_jsonl_line(query: &str, candidate: &str, features: &[f64]) -> String {
    serde_json::to_string(&FeatureLine { query, candidate, features })
        .expect("feature line is always serializable")
}

#[derive(Serialize)]
struct Manifest {
    skip_window: Option<usize>,
    wlcs_alpha: f64,
    remove_stopwords: bool,
    stem: bool,
    features: Vec<String>,
}

/// Sidecar manifest describing the feature vector layout.
pub fn feature_manifest_json(cfg: &LexicalConfig) -> String {
    let manifest = Manifest {
        skip_window: cfg.skip_window,
        wlcs_alpha: cfg.wlcs_alpha,
        remove_stopwords: cfg.remove_stopwords,
        stem: cfg.stem,
        features: feature_names(cfg),
    };
    serde_json::to_string_pretty(&manifest).expect("manifest is always serializable")
}
