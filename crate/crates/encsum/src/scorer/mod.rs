//! Phrase-scoring network.
//!
//! A single convolutional layer turns each l-token phrase window into a
//! feature vector; max pooling builds sentence vectors and a document
//! vector; a one-hidden-layer MLP scores every phrase in (0,1) from the
//! triple [phrase; sentence; document]. Training optimizes a margin loss
//! over per-document score statistics so that summary phrases outscore
//! document phrases on the right document and lose on the wrong one.
//!
//! All arithmetic is `f64`; checkpoints narrow to `f32` on disk.

mod gradcheck;
mod loss;
mod train;

pub use gradcheck::{tiny_model_check, finite_difference_check, GradCheckReport};
pub use loss::{gradients, loss, loss_breakdown, document_statistics, DocStats, LossBreakdown, NegativeTerms};
pub use train::{train, TrainConfig, TrainOutcome};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{CaseDocument, Sentence, Token};
use crate::embed::EmbeddingTable;
use crate::tensor::{dot, Matrix};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("document {id} has no summary")]
    MissingSummary { id: String },
    #[error("training needs at least {need} documents with summaries, found {have}")]
    InsufficientSummaryDocuments { have: usize, need: usize },
    #[error("embedding dimension {table} does not match model dimension {model}")]
    EmbeddingDimMismatch { table: usize, model: usize },
}

/// Model dimensions: embedding size d, phrase window l, convolution
/// filters c, MLP hidden width h.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ScorerDims {
    pub embed_dim: usize,
    pub window: usize,
    pub filters: usize,
    pub hidden: usize,
}

/// Loss coefficients (a1, a2, b1, b2, b3, b4) plus the hinge margin.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub margin: f64,
}

impl LossCoefficients {
    /// Coefficient set (i): (1.0, 1.0, 0.5, 0.1, 0.01, 0.02).
    pub fn set_i(margin: f64) -> LossCoefficients {
        assert!(margin > 0.0, "margin must be positive");
        LossCoefficients { a1: 1.0, a2: 1.0, b1: 0.5, b2: 0.1, b3: 0.01, b4: 0.02, margin }
    }

    /// Coefficient set (ii): (1.0, 1.7, 0.3, 0.7, 0, 0).
    pub fn set_ii(margin: f64) -> LossCoefficients {
        assert!(margin > 0.0, "margin must be positive");
        LossCoefficients { a1: 1.0, a2: 1.7, b1: 0.3, b2: 0.7, b3: 0.0, b4: 0.0, margin }
    }
}

impl Default for LossCoefficients {
    fn default() -> Self {
        LossCoefficients::set_i(1.0)
    }
}

/// All learned tensors. Also used as the gradient container since
/// gradients share every shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams {
    pub dims: ScorerDims,
    /// Convolution kernel, c × (d·l). No bias.
    pub conv_kernel: Matrix,
    /// MLP hidden layer, h × 3c.
    pub mlp_hidden_w: Matrix,
    pub mlp_hidden_b: Vec<f64>,
    /// Output layer, one row of h weights.
    pub mlp_out_w: Vec<f64>,
    pub mlp_out_b: f64,
}

impl ScorerParams {
    pub fn zeros(dims: ScorerDims) -> ScorerParams {
        ScorerParams {
            dims,
            conv_kernel: Matrix::zeros(dims.filters, dims.embed_dim * dims.window),
            mlp_hidden_w: Matrix::zeros(dims.hidden, 3 * dims.filters),
            mlp_hidden_b: vec![0.0; dims.hidden],
            mlp_out_w: vec![0.0; dims.hidden],
            mlp_out_b: 0.0,
        }
    }

    /// Seeded symmetric initialization: each tensor uniform(−r, r) with
    /// r = sqrt(6 / (fan_in + fan_out)) of its layer. Draw order is fixed
    /// (conv, hidden weights, hidden bias, out weights, out bias).
    pub fn init(dims: ScorerDims, seed: u64) -> ScorerParams {
        ScorerParams::init_with(dims, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// As [`ScorerParams::init`], drawing from a caller-owned stream so the
    /// trainer can keep initialization and sampling on one seed.
    pub(crate) fn init_with(dims: ScorerDims, rng: &mut ChaCha8Rng) -> ScorerParams {
        let mut params = ScorerParams::zeros(dims);
        let conv_r = glorot(dims.embed_dim * dims.window, dims.filters);
        for v in params.conv_kernel.data_mut() {
            *v = rng.gen_range(-conv_r..conv_r);
        }
        let hidden_r = glorot(3 * dims.filters, dims.hidden);
        for v in params.mlp_hidden_w.data_mut() {
            *v = rng.gen_range(-hidden_r..hidden_r);
        }
        for v in &mut params.mlp_hidden_b {
            *v = rng.gen_range(-hidden_r..hidden_r);
        }
        let out_r = glorot(dims.hidden, 1);
        for v in &mut params.mlp_out_w {
            *v = rng.gen_range(-out_r..out_r);
        }
        params.mlp_out_b = rng.gen_range(-out_r..out_r);
        params
    }

    /// Mutable views of every tensor, in the fixed serialization order.
    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.conv_kernel.data_mut(),
            self.mlp_hidden_w.data_mut(),
            &mut self.mlp_hidden_b,
            &mut self.mlp_out_w,
            std::slice::from_mut(&mut self.mlp_out_b),
        ]
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 5] {
        [
            self.conv_kernel.data(),
            self.mlp_hidden_w.data(),
            &self.mlp_hidden_b,
            &self.mlp_out_w,
            std::slice::from_ref(&self.mlp_out_b),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Reads one coordinate through the flattened tensor order.
    pub(crate) fn flat_get(&self, idx: usize) -> f64 {
        let mut offset = idx;
        for tensor in self.tensors() {
            if offset < tensor.len() {
                return tensor[offset];
            }
            offset -= tensor.len();
        }
        panic!("parameter index {idx} out of range");
    }

    pub(crate) fn flat_add(&mut self, idx: usize, delta: f64) {
        let mut offset = idx;
        for tensor in self.tensors_mut() {
            if offset < tensor.len() {
                tensor[offset] += delta;
                return;
            }
            offset -= tensor.len();
        }
        panic!("parameter index {idx} out of range");
    }

    /// Euclidean norm over all coordinates.
    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= factor;
            }
        }
    }
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

// ---------------------------------------------------------------------------
// Phrase extraction
// ---------------------------------------------------------------------------

/// A phrase window inside one sentence: tokens `start..start+len`. Windows
/// shorter than the model window l are padded at the end with zero-embedding
/// slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhraseWindow {
    pub start: usize,
    pub len: usize,
}

impl PhraseWindow {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// All stride-1 windows of l contiguous tokens; a sentence shorter than l
/// yields one padded window.
pub fn extract_phrases(sentence: &Sentence, l: usize) -> Vec<PhraseWindow> {
    assert!(l >= 1, "window must be at least 1");
    let n = sentence.len();
    if n < l {
        return vec![PhraseWindow { start: 0, len: n }];
    }
    (0..=n - l).map(|start| PhraseWindow { start, len: l }).collect()
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

/// Fills `x` (length d·l) with the concatenated embeddings of the window's
/// tokens; pad slots stay zero.
fn fill_phrase_input(tokens: &[Token], table: &EmbeddingTable, window: usize, x: &mut [f64]) {
    let d = table.dim();
    debug_assert_eq!(x.len(), d * window);
    x.fill(0.0);
    for (k, token) in tokens.iter().take(window).enumerate() {
        x[k * d..(k + 1) * d].copy_from_slice(table.lookup(token));
    }
}

/// f_p = ReLU(conv_kernel · [v(w_1); …; v(w_l)]), no bias. `tokens` holds
/// the window's real tokens (at most l); missing positions are padding.
pub fn conv_phrase_features(
    params: &ScorerParams,
    table: &EmbeddingTable,
    tokens: &[Token],
) -> Vec<f64> {
    let dims = params.dims;
    assert!(tokens.len() <= dims.window, "phrase longer than window");
    let mut x = vec![0.0; dims.embed_dim * dims.window];
    fill_phrase_input(tokens, table, dims.window, &mut x);
    let mut out = vec![0.0; dims.filters];
    params.conv_kernel.matvec(&x, &mut out);
    for v in &mut out {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Coordinate-wise max over the phrase features of one sentence.
pub fn pool_sentence(phrase_features: &[Vec<f64>]) -> Vec<f64> {
    pool_max_with_argmax(phrase_features).0
}

/// Coordinate-wise max over sentence vectors of paragraph sentences only.
pub fn pool_document(sentence_vectors: &[Vec<f64>]) -> Vec<f64> {
    pool_max_with_argmax(sentence_vectors).0
}

/// Max pooling that remembers, per coordinate, the first input achieving
/// the maximum (the backward pass routes gradients there).
fn pool_max_with_argmax(inputs: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    assert!(!inputs.is_empty(), "max pooling needs at least one input");
    let width = inputs[0].len();
    let mut pooled = inputs[0].clone();
    let mut argmax = vec![0usize; width];
    for (idx, input) in inputs.iter().enumerate().skip(1) {
        assert_eq!(input.len(), width);
        for (t, &v) in input.iter().enumerate() {
            if v > pooled[t] {
                pooled[t] = v;
                argmax[t] = idx;
            }
        }
    }
    (pooled, argmax)
}

fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// sigmoid(out_w · tanh(hidden_w · [f_p; f_ctx; f_d] + hidden_b) + out_b).
/// `f_ctx` is the enclosing sentence vector (f_s for paragraph phrases, f_c
/// for summary phrases). Strictly in (0,1).
pub fn score_phrase(params: &ScorerParams, f_p: &[f64], f_ctx: &[f64], f_d: &[f64]) -> f64 {
    let mut hidden = vec![0.0; params.dims.hidden];
    score_phrase_cached(params, f_p, f_ctx, f_d, &mut hidden)
}

/// As [`score_phrase`] but writes the tanh activations into `hidden` for
/// reuse by the backward pass.
pub(crate) fn score_phrase_cached(
    params: &ScorerParams,
    f_p: &[f64],
    f_ctx: &[f64],
    f_d: &[f64],
    hidden: &mut [f64],
) -> f64 {
    let c = params.dims.filters;
    debug_assert!(f_p.len() == c && f_ctx.len() == c && f_d.len() == c);
    let mut u = Vec::with_capacity(3 * c);
    u.extend_from_slice(f_p);
    u.extend_from_slice(f_ctx);
    u.extend_from_slice(f_d);
    params.mlp_hidden_w.matvec(&u, hidden);
    for (v, b) in hidden.iter_mut().zip(&params.mlp_hidden_b) {
        *v = (*v + b).tanh();
    }
    stable_sigmoid(dot(&params.mlp_out_w, hidden) + params.mlp_out_b)
}

/// Forward features of one sentence, with the pooling argmax cached.
#[derive(Debug, Clone)]
pub struct SentenceFeatures {
    pub windows: Vec<PhraseWindow>,
    /// Post-ReLU phrase features, one vector of length c per window.
    pub phrase_features: Vec<Vec<f64>>,
    /// f_s (paragraph sentence) or f_c (summary sentence).
    pub pooled: Vec<f64>,
    pool_argmax: Vec<usize>,
}

/// Forward features of a whole document. `sentences` holds the paragraph
/// sentences flattened in document order; the document vector f_d pools
/// over them only, so the summary never influences it.
#[derive(Debug, Clone)]
pub struct DocumentFeatures {
    pub sentences: Vec<SentenceFeatures>,
    pub summary: Option<Vec<SentenceFeatures>>,
    /// f_d.
    pub doc_vector: Vec<f64>,
    doc_argmax: Vec<usize>,
}

impl DocumentFeatures {
    pub fn compute(
        doc: &CaseDocument,
        table: &EmbeddingTable,
        params: &ScorerParams,
    ) -> DocumentFeatures {
        let dims = params.dims;
        let mut x = vec![0.0; dims.embed_dim * dims.window];
        let mut compute_side = |sentences: &mut dyn Iterator<Item = &Sentence>| {
            let mut out = Vec::new();
            for s in sentences {
                let windows = extract_phrases(s, dims.window);
                let mut phrase_features = Vec::with_capacity(windows.len());
                for w in &windows {
                    fill_phrase_input(&s[w.start..w.end()], table, dims.window, &mut x);
                    let mut f = vec![0.0; dims.filters];
                    params.conv_kernel.matvec(&x, &mut f);
                    for v in &mut f {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                    phrase_features.push(f);
                }
                let (pooled, pool_argmax) = pool_max_with_argmax(&phrase_features);
                out.push(SentenceFeatures { windows, phrase_features, pooled, pool_argmax });
            }
            out
        };

        let sentences = compute_side(&mut doc.paragraph_sentences());
        let summary = doc
            .summary_sentences()
            .map(|ss| compute_side(&mut ss.iter()));

        let pooled_inputs: Vec<Vec<f64>> = sentences.iter().map(|s| s.pooled.clone()).collect();
        let (doc_vector, doc_argmax) = pool_max_with_argmax(&pooled_inputs);
        DocumentFeatures { sentences, summary, doc_vector, doc_argmax }
    }

    pub(crate) fn doc_argmax(&self) -> &[usize] {
        &self.doc_argmax
    }
}

impl SentenceFeatures {
    pub(crate) fn pool_argmax(&self) -> &[usize] {
        &self.pool_argmax
    }
}

/// A fully scored document: features plus one score per phrase position.
#[derive(Debug, Clone)]
pub struct ScoredDocument {
    pub features: DocumentFeatures,
    /// Paragraph phrase scores, indexed [sentence][window].
    pub paragraph_scores: Vec<Vec<f64>>,
    /// Summary phrase scores when the document has a summary.
    pub summary_scores: Option<Vec<Vec<f64>>>,
}

/// Scores every phrase of the document. Paragraph phrases are scored with
/// (f_p, f_s, f_d); summary phrases (when a summary exists) with
/// (f_p, f_c, f_d). f_d is computed once from the paragraphs.
pub fn score_document(
    doc: &CaseDocument,
    table: &EmbeddingTable,
    params: &ScorerParams,
) -> ScoredDocument {
    let features = DocumentFeatures::compute(doc, table, params);
    let mut hidden = vec![0.0; params.dims.hidden];
    let score_side = |side: &[SentenceFeatures], hidden: &mut Vec<f64>| -> Vec<Vec<f64>> {
        side.iter()
            .map(|s| {
                s.phrase_features
                    .iter()
                    .map(|f_p| {
                        score_phrase_cached(params, f_p, &s.pooled, &features.doc_vector, hidden)
                    })
                    .collect()
            })
            .collect()
    };
    let paragraph_scores = score_side(&features.sentences, &mut hidden);
    let summary_scores = features.summary.as_ref().map(|s| score_side(s, &mut hidden));
    ScoredDocument { features, paragraph_scores, summary_scores }
}
