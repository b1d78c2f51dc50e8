//! Document vectors, generated extractive summaries, and top-sentence
//! selection, all driven by the phrase scorer.
//!
//! The document vector is the score-weighted mean of the per-phrase
//! concatenations [f_d; f_s; f_p] over paragraph phrases:
//! g(d) = Σ_ij P_ij · [f_d; f_s_i; f_p_ij] / Σ_ij P_ij.
//! Summary phrases never contribute, mirroring f_d which pools over
//! paragraph sentences only.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::container::params_fingerprint;
use crate::corpus::{CaseDocument, Sentence, Token};
use crate::embed::EmbeddingTable;
use crate::scorer::{score_document, ScorerParams};

/// Score-weighted document vector of length 3c.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentEncoding {
    pub vector: Vec<f64>,
    /// Fingerprint of the parameters that produced the vector.
    pub model_fingerprint: String,
}

/// Weighted mean over paragraph phrases. Weights are the phrase scores
/// normalized to sum to one, so a single-phrase document reproduces its
/// concatenation bit for bit.
pub fn encode_document(
    doc: &CaseDocument,
    table: &EmbeddingTable,
    params: &ScorerParams,
) -> DocumentEncoding {
    let scored = score_document(doc, table, params);
    let c = params.dims.filters;
    let f_d = &scored.features.doc_vector;
    let denom: f64 = scored.paragraph_scores.iter().flatten().sum();
    let mut vector = vec![0.0; 3 * c];
    for (sent, scores) in scored.features.sentences.iter().zip(&scored.paragraph_scores) {
        for (f_p, &score) in sent.phrase_features.iter().zip(scores) {
            let w = score / denom;
            for (out, &v) in vector[..c].iter_mut().zip(f_d) {
                *out += w * v;
            }
            for (out, &v) in vector[c..2 * c].iter_mut().zip(&sent.pooled) {
                *out += w * v;
            }
            for (out, &v) in vector[2 * c..].iter_mut().zip(f_p) {
                *out += w * v;
            }
        }
    }
    DocumentEncoding { vector, model_fingerprint: params_fingerprint(params) }
}

/// One selected token span: tokens `start..end` of the paragraph sentence
/// at index `sentence` in flattened document order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SummarySpan {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

/// Extractive summary: merged spans in document order. Spans within one
/// sentence never overlap or touch; merging already joined those.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSummary {
    pub phrases: Vec<SummarySpan>,
    pub total_tokens: usize,
    pub threshold_t: f64,
}

impl GeneratedSummary {
    /// Tokens covered by the spans, in document order.
    pub fn tokens<'d>(&self, doc: &'d CaseDocument) -> Vec<&'d Token> {
        let sentences: Vec<&Sentence> = doc.paragraph_sentences().collect();
        self.phrases
            .iter()
            .flat_map(|sp| sentences[sp.sentence][sp.start..sp.end].iter())
            .collect()
    }

    pub fn render(&self, doc: &CaseDocument) -> String {
        let mut out = String::new();
        for (i, token) in self.tokens(doc).into_iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(token.as_str());
        }
        out
    }
}

/// Merges `[start, end)` into a sorted list of disjoint spans, joining any
/// span it overlaps or touches. Returns how many new tokens were covered.
fn insert_merged(spans: &mut Vec<(usize, usize)>, mut start: usize, mut end: usize) -> usize {
    let mut absorbed = 0usize;
    spans.retain(|&(s, e)| {
        if s <= end && start <= e {
            start = start.min(s);
            end = end.max(e);
            absorbed += e - s;
            false
        } else {
            true
        }
    });
    let pos = spans.partition_point(|&(s, _)| s < start);
    spans.insert(pos, (start, end));
    (end - start) - absorbed
}

/// Greedy phrase selection: rank every paragraph phrase by score (ties by
/// document position, earlier first), merge each pick into the spans of its
/// sentence, and stop once the covered token count exceeds
/// `t · paragraph tokens`, keeping the pick that crossed the line.
pub fn generate_summary(
    doc: &CaseDocument,
    table: &EmbeddingTable,
    params: &ScorerParams,
    t: f64,
) -> GeneratedSummary {
    assert!(t > 0.0 && t <= 1.0, "length threshold must be in (0, 1]");
    let scored = score_document(doc, table, params);
    let budget = t * doc.paragraph_token_count() as f64;

    let mut ranked: Vec<(f64, usize, usize, usize)> = Vec::new();
    for (i, (sent, scores)) in
        scored.features.sentences.iter().zip(&scored.paragraph_scores).enumerate()
    {
        for (w, &score) in sent.windows.iter().zip(scores) {
            ranked.push((score, i, w.start, w.end()));
        }
    }
    ranked.sort_by(|a, b| {
        b.0.partial_cmp(&a.0).expect("scores are finite").then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });

    let mut per_sentence: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    let mut total = 0usize;
    for (_, sentence, start, end) in ranked {
        total += insert_merged(per_sentence.entry(sentence).or_default(), start, end);
        if total as f64 > budget {
            break;
        }
    }

    let phrases = per_sentence
        .iter()
        .flat_map(|(&sentence, spans)| {
            spans.iter().map(move |&(start, end)| SummarySpan { sentence, start, end })
        })
        .collect();
    GeneratedSummary { phrases, total_tokens: total, threshold_t: t }
}

/// Scores each paragraph sentence by the sum of its phrase scores and
/// returns the indices of the top ⌈top_fraction · #sentences⌉ sentences in
/// document order.
pub fn select_sentences(
    doc: &CaseDocument,
    table: &EmbeddingTable,
    params: &ScorerParams,
    top_fraction: f64,
) -> Vec<usize> {
    assert!(top_fraction > 0.0 && top_fraction <= 1.0, "fraction must be in (0, 1]");
    let scored = score_document(doc, table, params);
    let sums: Vec<f64> = scored.paragraph_scores.iter().map(|s| s.iter().sum()).collect();
    let k = (top_fraction * sums.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..sums.len()).collect();
    order.sort_by(|&a, &b| sums[b].partial_cmp(&sums[a]).expect("scores are finite").then(a.cmp(&b)));
    let mut chosen = order[..k.min(sums.len())].to_vec();
    chosen.sort_unstable();
    chosen
}

#[derive(Serialize)]
struct EncodingLine<'a> {
    id: &'a str,
    vector: &'a [f64],
}

/// One JSONL record: {"id": ..., "vector": [...]}.
pub fn encoding_jsonl_line(id: &str, encoding: &DocumentEncoding) -> String {
    serde_json::to_string(&EncodingLine { id, vector: &encoding.vector })
        .expect("encoding line is always serializable")
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    id: &'a str,
    threshold_t: f64,
    total_tokens: usize,
    spans: &'a [SummarySpan],
    text: String,
}

/// One JSONL record with the spans and the rendered text.
pub fn summary_jsonl_line(id: &str, summary: &GeneratedSummary, doc: &CaseDocument) -> String {
    serde_json::to_string(&SummaryLine {
        id,
        threshold_t: summary.threshold_t,
        total_tokens: summary.total_tokens,
        spans: &summary.phrases,
        text: summary.render(doc),
    })
    .expect("summary line is always serializable")
}
