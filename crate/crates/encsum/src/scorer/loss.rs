//! Margin loss over phrase-score statistics, and its exact gradients.
//!
//! For a document d with summary c and negatives {d'}, the loss hinges on
//! the bracket
//!
//! ```text
//! a1·(E_c − E_s) + a2·mean_{d'}(E_{s'} − E_{c,d'})
//!   + b1·((E_c + std_c) − (E_s + std_s))
//!   + b2·((E_c − std_c) − E_s) − b3·std_c − b4·std_s
//! ```
//!
//! where E_c/std_c are the mean/std of d's summary phrase scores, E_s/std_s
//! those of its document phrase scores, E_{s'} the document-phrase mean of
//! the negative d', and E_{c,d'} the mean of d's summary phrases rescored
//! with d''s document vector swapped in (the summary's own sentence vectors
//! are reused; they do not depend on the document side).
//!
//! loss = max(0, margin − bracket). Standard deviations are population
//! ones. The backward pass takes subgradient 0 at ReLU, hinge, and
//! max-pooling kinks, and stabilizes the std derivative with
//! 1/sqrt(var + 1e-8) so single-phrase documents (variance exactly 0)
//! propagate a finite (zero) gradient instead of NaN.

use super::*;

/// Stabilizer inside the square root of the std *derivative*. The forward
/// std is the plain square root, so identical scores give exactly 0.
const EPS_STD: f64 = 1e-8;

/// Per-document score statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DocStats {
    /// Mean of summary phrase scores.
    pub e_c: f64,
    pub std_c: f64,
    /// Mean of document (paragraph) phrase scores.
    pub e_s: f64,
    pub std_s: f64,
}

/// Terms contributed by one negative document.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeTerms {
    pub id: String,
    /// Mean document-phrase score of the negative, within itself.
    pub e_s_prime: f64,
    /// Mean score of d's summary phrases against the negative's document vector.
    pub e_c_neg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub loss: f64,
    pub bracket: f64,
    pub stats: DocStats,
    pub negatives: Vec<NegativeTerms>,
}

// ---------------------------------------------------------------------------
// Forward state
// ---------------------------------------------------------------------------

/// Scores plus cached tanh activations for one scored side.
struct ScoredSide {
    scores: Vec<Vec<f64>>,
    hidden: Vec<Vec<Vec<f64>>>,
}

impl ScoredSide {
    fn flat_scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores.iter().flatten().copied()
    }

    fn count(&self) -> usize {
        self.scores.iter().map(Vec::len).sum()
    }
}

fn score_side(params: &ScorerParams, side: &[SentenceFeatures], f_d: &[f64]) -> ScoredSide {
    let h = params.dims.hidden;
    let mut scores = Vec::with_capacity(side.len());
    let mut hidden = Vec::with_capacity(side.len());
    for s in side {
        let mut srow = Vec::with_capacity(s.phrase_features.len());
        let mut hrow = Vec::with_capacity(s.phrase_features.len());
        for f_p in &s.phrase_features {
            let mut hbuf = vec![0.0; h];
            srow.push(score_phrase_cached(params, f_p, &s.pooled, f_d, &mut hbuf));
            hrow.push(hbuf);
        }
        scores.push(srow);
        hidden.push(hrow);
    }
    ScoredSide { scores, hidden }
}

struct NegState {
    feats: DocumentFeatures,
    para: ScoredSide,
    /// d's summary phrases scored against this negative's document vector.
    cross: ScoredSide,
}

struct ForwardState {
    feats: DocumentFeatures,
    para: ScoredSide,
    summ: ScoredSide,
    negs: Vec<NegState>,
}

fn forward(
    doc: &CaseDocument,
    negatives: &[&CaseDocument],
    table: &EmbeddingTable,
    params: &ScorerParams,
) -> Result<ForwardState, ScorerError> {
    if doc.summary.is_none() {
        return Err(ScorerError::MissingSummary { id: doc.id.clone() });
    }
    for neg in negatives {
        if neg.summary.is_none() {
            return Err(ScorerError::MissingSummary { id: neg.id.clone() });
        }
    }
    let feats = DocumentFeatures::compute(doc, table, params);
    let para = score_side(params, &feats.sentences, &feats.doc_vector);
    let summ_feats = feats.summary.as_ref().expect("summary checked above");
    let summ = score_side(params, summ_feats, &feats.doc_vector);
    let negs = negatives
        .iter()
        .map(|neg| {
            let nfeats = DocumentFeatures::compute(neg, table, params);
            let npara = score_side(params, &nfeats.sentences, &nfeats.doc_vector);
            let cross = score_side(params, summ_feats, &nfeats.doc_vector);
            NegState { feats: nfeats, para: npara, cross }
        })
        .collect();
    Ok(ForwardState { feats, para, summ, negs })
}

fn mean_of(side: &ScoredSide) -> f64 {
    side.flat_scores().sum::<f64>() / side.count() as f64
}

/// Population mean and std.
fn mean_std_of(side: &ScoredSide) -> (f64, f64) {
    let n = side.count() as f64;
    let mean = side.flat_scores().sum::<f64>() / n;
    let var = side.flat_scores().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn assemble(
    state: &ForwardState,
    negatives: &[&CaseDocument],
    coeffs: &LossCoefficients,
) -> LossBreakdown {
    let (e_c, std_c) = mean_std_of(&state.summ);
    let (e_s, std_s) = mean_std_of(&state.para);
    let negs: Vec<NegativeTerms> = state
        .negs
        .iter()
        .zip(negatives)
        .map(|(n, doc)| NegativeTerms {
            id: doc.id.clone(),
            e_s_prime: mean_of(&n.para),
            e_c_neg: mean_of(&n.cross),
        })
        .collect();
    let neg_term = if negs.is_empty() {
        0.0
    } else {
        negs.iter().map(|n| n.e_s_prime - n.e_c_neg).sum::<f64>() / negs.len() as f64
    };
    let bracket = coeffs.a1 * (e_c - e_s)
        + coeffs.a2 * neg_term
        + coeffs.b1 * ((e_c + std_c) - (e_s + std_s))
        + coeffs.b2 * ((e_c - std_c) - e_s)
        - coeffs.b3 * std_c
        - coeffs.b4 * std_s;
    let loss = (coeffs.margin - bracket).max(0.0);
    LossBreakdown {
        loss,
        bracket,
        stats: DocStats { e_c, std_c, e_s, std_s },
        negatives: negs,
    }
}

/// Loss with full term breakdown.
pub fn loss_breakdown(
    doc: &CaseDocument,
    negatives: &[&CaseDocument],
    table: &EmbeddingTable,
    params: &ScorerParams,
    coeffs: &LossCoefficients,
) -> Result<LossBreakdown, ScorerError> {
    let state = forward(doc, negatives, table, params)?;
    Ok(assemble(&state, negatives, coeffs))
}

/// Scalar hinge loss; see the module docs for the bracket.
pub fn loss(
    doc: &CaseDocument,
    negatives: &[&CaseDocument],
    table: &EmbeddingTable,
    params: &ScorerParams,
    coeffs: &LossCoefficients,
) -> Result<f64, ScorerError> {
    Ok(loss_breakdown(doc, negatives, table, params, coeffs)?.loss)
}

/// Discrete structure of one forward evaluation: ReLU activity per phrase
/// feature, every pooling argmax, and whether the hinge is active. A
/// parameter coordinate whose ±ε perturbation changes the signature sits on
/// a kink, where finite differences are meaningless.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct KinkSignature {
    hinge_active: bool,
    relu: Vec<bool>,
    argmax: Vec<usize>,
}

pub(crate) fn loss_with_signature(
    doc: &CaseDocument,
    negatives: &[&CaseDocument],
    table: &EmbeddingTable,
    params: &ScorerParams,
    coeffs: &LossCoefficients,
) -> Result<(f64, KinkSignature), ScorerError> {
    let state = forward(doc, negatives, table, params)?;
    let breakdown = assemble(&state, negatives, coeffs);
    let mut relu = Vec::new();
    let mut argmax = Vec::new();
    {
        let mut push_side = |side: &[SentenceFeatures]| {
            for s in side {
                for f in &s.phrase_features {
                    relu.extend(f.iter().map(|v| *v > 0.0));
                }
                argmax.extend_from_slice(s.pool_argmax());
            }
        };
        push_side(&state.feats.sentences);
        push_side(state.feats.summary.as_ref().expect("summary present"));
        for neg in &state.negs {
            push_side(&neg.feats.sentences);
        }
    }
    argmax.extend_from_slice(state.feats.doc_argmax());
    for neg in &state.negs {
        argmax.extend_from_slice(neg.feats.doc_argmax());
    }
    let signature = KinkSignature { hinge_active: breakdown.loss > 0.0, relu, argmax };
    Ok((breakdown.loss, signature))
}

/// Score statistics of one document with a summary, without negatives.
pub fn document_statistics(
    doc: &CaseDocument,
    table: &EmbeddingTable,
    params: &ScorerParams,
) -> Result<DocStats, ScorerError> {
    let state = forward(doc, &[], table, params)?;
    let (e_c, std_c) = mean_std_of(&state.summ);
    let (e_s, std_s) = mean_std_of(&state.para);
    Ok(DocStats { e_c, std_c, e_s, std_s })
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

/// Adjoint buffers mirroring one side's feature shapes.
struct SideAdjoints {
    phrase: Vec<Vec<Vec<f64>>>,
    sentence: Vec<Vec<f64>>,
}

impl SideAdjoints {
    fn zeros_like(side: &[SentenceFeatures], c: usize) -> SideAdjoints {
        SideAdjoints {
            phrase: side
                .iter()
                .map(|s| vec![vec![0.0; c]; s.phrase_features.len()])
                .collect(),
            sentence: side.iter().map(|_| vec![0.0; c]).collect(),
        }
    }
}

/// d(std)/d(score_k) = (score_k − mean) / (n · sqrt(var + EPS_STD)).
fn std_derivative(score: f64, mean: f64, std: f64, n: f64) -> f64 {
    (score - mean) / (n * (std * std + EPS_STD).sqrt())
}

/// Backprop through the MLP of one scored phrase; accumulates parameter
/// gradients and the adjoints of the three input feature vectors.
#[allow(clippy::too_many_arguments)]
fn backprop_phrase(
    params: &ScorerParams,
    grad: &mut ScorerParams,
    g_score: f64,
    score: f64,
    hidden: &[f64],
    f_p: &[f64],
    f_ctx: &[f64],
    f_d: &[f64],
    g_fp: &mut [f64],
    g_fctx: &mut [f64],
    g_fd: &mut [f64],
    gz1: &mut [f64],
) {
    let c = params.dims.filters;
    let gz2 = g_score * score * (1.0 - score);
    grad.mlp_out_b += gz2;
    for (gw, hv) in grad.mlp_out_w.iter_mut().zip(hidden) {
        *gw += gz2 * hv;
    }
    for (j, g) in gz1.iter_mut().enumerate() {
        *g = gz2 * params.mlp_out_w[j] * (1.0 - hidden[j] * hidden[j]);
    }
    for (j, &g) in gz1.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grad.mlp_hidden_b[j] += g;
        let grow = grad.mlp_hidden_w.row_mut(j);
        for k in 0..c {
            grow[k] += g * f_p[k];
            grow[c + k] += g * f_ctx[k];
            grow[2 * c + k] += g * f_d[k];
        }
        let prow = params.mlp_hidden_w.row(j);
        for k in 0..c {
            g_fp[k] += g * prow[k];
            g_fctx[k] += g * prow[c + k];
            g_fd[k] += g * prow[2 * c + k];
        }
    }
}

/// Routes sentence-level adjoints down to phrases through the max-pool
/// argmax, then through ReLU into the convolution kernel.
fn backprop_side_features<'a>(
    params: &ScorerParams,
    grad: &mut ScorerParams,
    table: &EmbeddingTable,
    sentences: impl Iterator<Item = &'a Sentence>,
    side: &[SentenceFeatures],
    adj: &mut SideAdjoints,
    x: &mut [f64],
) {
    let c = params.dims.filters;
    for (i, sentence) in sentences.enumerate() {
        let feats = &side[i];
        for t in 0..c {
            let g = adj.sentence[i][t];
            if g != 0.0 {
                adj.phrase[i][feats.pool_argmax()[t]][t] += g;
            }
        }
        for (k, window) in feats.windows.iter().enumerate() {
            let g_phrase = &mut adj.phrase[i][k];
            let mut any = false;
            for t in 0..c {
                // ReLU subgradient: zero where the activation is zero.
                if feats.phrase_features[k][t] <= 0.0 {
                    g_phrase[t] = 0.0;
                } else if g_phrase[t] != 0.0 {
                    any = true;
                }
            }
            if !any {
                continue;
            }
            fill_phrase_input(&sentence[window.start..window.end()], table, params.dims.window, x);
            grad.conv_kernel.add_outer(g_phrase, x);
        }
    }
}

/// Exact analytic gradient of [`loss`] w.r.t. every parameter tensor,
/// returned in a params-shaped container alongside the loss breakdown.
pub fn gradients(
    doc: &CaseDocument,
    negatives: &[&CaseDocument],
    table: &EmbeddingTable,
    params: &ScorerParams,
    coeffs: &LossCoefficients,
) -> Result<(LossBreakdown, ScorerParams), ScorerError> {
    let state = forward(doc, negatives, table, params)?;
    let breakdown = assemble(&state, negatives, coeffs);
    let mut grad = ScorerParams::zeros(params.dims);
    if breakdown.loss <= 0.0 {
        // Hinge inactive: subgradient 0 at the kink.
        return Ok((breakdown, grad));
    }

    let dims = params.dims;
    let c = dims.filters;
    let DocStats { e_c, std_c, e_s, std_s } = breakdown.stats;

    // d(loss)/d(statistic) = −d(bracket)/d(statistic) while the hinge is
    // active.
    let g_e_c = -(coeffs.a1 + coeffs.b1 + coeffs.b2);
    let g_std_c = -(coeffs.b1 - coeffs.b2 - coeffs.b3);
    let g_e_s = coeffs.a1 + coeffs.b1 + coeffs.b2;
    let g_std_s = coeffs.b1 + coeffs.b4;
    let k_negs = state.negs.len() as f64;

    let summ_feats = state.feats.summary.as_ref().expect("summary present");
    let mut adj_para = SideAdjoints::zeros_like(&state.feats.sentences, c);
    let mut adj_summ = SideAdjoints::zeros_like(summ_feats, c);
    let mut g_doc = vec![0.0; c];
    let mut gz1 = vec![0.0; dims.hidden];
    let mut x = vec![0.0; dims.embed_dim * dims.window];

    // Document (paragraph) phrase scores feed E_s and std_s.
    let n_s = state.para.count() as f64;
    for (i, feats) in state.feats.sentences.iter().enumerate() {
        for k in 0..feats.phrase_features.len() {
            let score = state.para.scores[i][k];
            let g_score = g_e_s / n_s + g_std_s * std_derivative(score, e_s, std_s, n_s);
            backprop_phrase(
                params,
                &mut grad,
                g_score,
                score,
                &state.para.hidden[i][k],
                &feats.phrase_features[k],
                &feats.pooled,
                &state.feats.doc_vector,
                &mut adj_para.phrase[i][k],
                &mut adj_para.sentence[i],
                &mut g_doc,
                &mut gz1,
            );
        }
    }

    // Summary phrase scores feed E_c and std_c.
    let n_c = state.summ.count() as f64;
    for (i, feats) in summ_feats.iter().enumerate() {
        for k in 0..feats.phrase_features.len() {
            let score = state.summ.scores[i][k];
            let g_score = g_e_c / n_c + g_std_c * std_derivative(score, e_c, std_c, n_c);
            backprop_phrase(
                params,
                &mut grad,
                g_score,
                score,
                &state.summ.hidden[i][k],
                &feats.phrase_features[k],
                &feats.pooled,
                &state.feats.doc_vector,
                &mut adj_summ.phrase[i][k],
                &mut adj_summ.sentence[i],
                &mut g_doc,
                &mut gz1,
            );
        }
    }

    // Negatives: their own phrase scores feed E_{s'}; d's summary phrases
    // rescored against them feed E_{c,d'}. Both touch the negative's
    // document vector; the cross scores also touch d's summary features.
    for (neg, neg_doc) in state.negs.iter().zip(negatives) {
        let mut adj_neg = SideAdjoints::zeros_like(&neg.feats.sentences, c);
        let mut g_neg_doc = vec![0.0; c];

        let g_e_sp = -coeffs.a2 / k_negs;
        let n_sp = neg.para.count() as f64;
        for (i, feats) in neg.feats.sentences.iter().enumerate() {
            for k in 0..feats.phrase_features.len() {
                backprop_phrase(
                    params,
                    &mut grad,
                    g_e_sp / n_sp,
                    neg.para.scores[i][k],
                    &neg.para.hidden[i][k],
                    &feats.phrase_features[k],
                    &feats.pooled,
                    &neg.feats.doc_vector,
                    &mut adj_neg.phrase[i][k],
                    &mut adj_neg.sentence[i],
                    &mut g_neg_doc,
                    &mut gz1,
                );
            }
        }

        let g_e_cd = coeffs.a2 / k_negs;
        for (i, feats) in summ_feats.iter().enumerate() {
            for k in 0..feats.phrase_features.len() {
                backprop_phrase(
                    params,
                    &mut grad,
                    g_e_cd / n_c,
                    neg.cross.scores[i][k],
                    &neg.cross.hidden[i][k],
                    &feats.phrase_features[k],
                    &feats.pooled,
                    &neg.feats.doc_vector,
                    &mut adj_summ.phrase[i][k],
                    &mut adj_summ.sentence[i],
                    &mut g_neg_doc,
                    &mut gz1,
                );
            }
        }

        for t in 0..c {
            if g_neg_doc[t] != 0.0 {
                adj_neg.sentence[neg.feats.doc_argmax()[t]][t] += g_neg_doc[t];
            }
        }
        backprop_side_features(
            params,
            &mut grad,
            table,
            neg_doc.paragraph_sentences(),
            &neg.feats.sentences,
            &mut adj_neg,
            &mut x,
        );
    }

    // The document vector pools over paragraph sentence vectors only.
    for t in 0..c {
        if g_doc[t] != 0.0 {
            adj_para.sentence[state.feats.doc_argmax()[t]][t] += g_doc[t];
        }
    }
    backprop_side_features(
        params,
        &mut grad,
        table,
        doc.paragraph_sentences(),
        &state.feats.sentences,
        &mut adj_para,
        &mut x,
    );
    backprop_side_features(
        params,
        &mut grad,
        table,
        doc.summary_sentences().expect("summary present").iter(),
        summ_feats,
        &mut adj_summ,
        &mut x,
    );

    Ok((breakdown, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_case_document;
    use crate::embed::OovPolicy;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_table(dim: usize, seed: u64) -> EmbeddingTable {
        let words = [
            "court", "appeal", "granted", "denied", "the", "judge", "found", "breach",
            "contract", "damages", "awarded", "plaintiff", "defendant", "claim", "tort",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors = words
            .iter()
            .map(|w| {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (w.to_string(), v)
            })
            .collect();
        EmbeddingTable::from_vectors(dim, vectors, OovPolicy::Zero)
    }

    fn toy_doc(id: &str) -> CaseDocument {
        let text = "Court granted the appeal. Damages awarded.\n\
                    [1] The judge found breach of contract. The plaintiff claim succeeded.\n\
                    [2] Defendant denied the tort claim. Court awarded damages to the plaintiff.\n";
        parse_case_document(id, text).unwrap()
    }

    fn toy_doc_b(id: &str) -> CaseDocument {
        let text = "Appeal denied by the court.\n\
                    [1] The defendant denied breach. The judge found no contract.\n\
                    [2] No damages awarded. The tort claim failed in court.\n";
        parse_case_document(id, text).unwrap()
    }

    #[test]
    fn zero_params_loss_is_exactly_margin() {
        let dims = ScorerDims { embed_dim: 4, window: 2, filters: 3, hidden: 3 };
        let table = toy_table(4, 11);
        let params = ScorerParams::zeros(dims);
        let coeffs = LossCoefficients::set_i(1.0);
        let doc = toy_doc("d0");
        let neg = toy_doc_b("d1");
        let value = loss(&doc, &[&neg], &table, &params, &coeffs).unwrap();
        assert_eq!(value, 1.0);
        let coeffs = LossCoefficients::set_ii(0.75);
        let value = loss(&doc, &[&neg], &table, &params, &coeffs).unwrap();
        assert_eq!(value, 0.75);
    }

    #[test]
    fn missing_summary_is_rejected() {
        let dims = ScorerDims { embed_dim: 4, window: 2, filters: 3, hidden: 3 };
        let table = toy_table(4, 11);
        let params = ScorerParams::zeros(dims);
        let coeffs = LossCoefficients::default();
        let bare = parse_case_document(
            "bare",
            "[1] The judge found breach of contract here today.\n",
        )
        .unwrap();
        let doc = toy_doc("d0");
        let err = loss(&bare, &[&doc], &table, &params, &coeffs).unwrap_err();
        assert!(matches!(err, ScorerError::MissingSummary { ref id } if id == "bare"));
        let err = loss(&doc, &[&bare], &table, &params, &coeffs).unwrap_err();
        assert!(matches!(err, ScorerError::MissingSummary { ref id } if id == "bare"));
    }

    /// Reassembles the loss from public scoring calls with explicit loops and
    /// compares against the library value.
    #[test]
    fn loss_matches_loop_oracle() {
        let dims = ScorerDims { embed_dim: 4, window: 2, filters: 3, hidden: 3 };
        let table = toy_table(4, 11);
        let params = ScorerParams::init(dims, 29);
        let coeffs = LossCoefficients::set_i(1.0);
        let doc = toy_doc("d0");
        let negs = [toy_doc_b("d1"), toy_doc_b("d2")];
        let neg_refs: Vec<&CaseDocument> = negs.iter().collect();

        let feats = DocumentFeatures::compute(&doc, &table, &params);
        let summ = feats.summary.as_ref().unwrap();
        let mut doc_scores = Vec::new();
        for s in &feats.sentences {
            for f_p in &s.phrase_features {
                doc_scores.push(score_phrase(&params, f_p, &s.pooled, &feats.doc_vector));
            }
        }
        let mut summ_scores = Vec::new();
        for s in summ.iter() {
            for f_p in &s.phrase_features {
                summ_scores.push(score_phrase(&params, f_p, &s.pooled, &feats.doc_vector));
            }
        }
        let stats = |scores: &[f64]| {
            let n = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / n;
            let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        let (e_c, std_c) = stats(&summ_scores);
        let (e_s, std_s) = stats(&doc_scores);
        let mut neg_term = 0.0;
        for neg in &negs {
            let nfeats = DocumentFeatures::compute(neg, &table, &params);
            let mut own = Vec::new();
            for s in &nfeats.sentences {
                for f_p in &s.phrase_features {
                    own.push(score_phrase(&params, f_p, &s.pooled, &nfeats.doc_vector));
                }
            }
            let mut cross = Vec::new();
            for s in summ.iter() {
                for f_p in &s.phrase_features {
                    cross.push(score_phrase(&params, f_p, &s.pooled, &nfeats.doc_vector));
                }
            }
            let (e_sp, _) = stats(&own);
            let (e_cd, _) = stats(&cross);
            neg_term += e_sp - e_cd;
        }
        neg_term /= negs.len() as f64;
        let bracket = coeffs.a1 * (e_c - e_s)
            + coeffs.a2 * neg_term
            + coeffs.b1 * ((e_c + std_c) - (e_s + std_s))
            + coeffs.b2 * ((e_c - std_c) - e_s)
            - coeffs.b3 * std_c
            - coeffs.b4 * std_s;
        let expected = (coeffs.margin - bracket).max(0.0);

        let got = loss_breakdown(&doc, &neg_refs, &table, &params, &coeffs).unwrap();
        assert!((got.loss - expected).abs() < 1e-12, "{} vs {expected}", got.loss);
        assert!((got.bracket - bracket).abs() < 1e-12);
        assert!((got.stats.e_c - e_c).abs() < 1e-12);
        assert!((got.stats.std_s - std_s).abs() < 1e-12);
    }

    #[test]
    fn inactive_hinge_gives_zero_gradient() {
        let dims = ScorerDims { embed_dim: 4, window: 2, filters: 3, hidden: 3 };
        let table = toy_table(4, 11);
        let doc = toy_doc("d0");
        let neg = toy_doc_b("d1");
        // A large a1 amplifies whatever E_c − E_s sign a given init produces;
        // scan seeds for one where the bracket clears the margin.
        let mut coeffs = LossCoefficients::set_i(1.0);
        coeffs.a1 = 500.0;
        let mut found = false;
        for seed in 0..200 {
            let params = ScorerParams::init(dims, seed);
            let (breakdown, grad) = gradients(&doc, &[&neg], &table, &params, &coeffs).unwrap();
            if breakdown.loss == 0.0 {
                assert!(breakdown.bracket >= coeffs.margin);
                assert_eq!(grad.global_norm(), 0.0);
                found = true;
                break;
            }
        }
        assert!(found, "no seed produced an inactive hinge");
    }

    #[test]
    fn doubling_a_positive_term_coefficient_never_increases_loss() {
        let dims = ScorerDims { embed_dim: 4, window: 2, filters: 3, hidden: 3 };
        let table = toy_table(4, 11);
        let doc = toy_doc("d0");
        let neg = toy_doc_b("d1");
        for seed in 0..20 {
            let params = ScorerParams::init(dims, seed);
            let base_coeffs = LossCoefficients::set_i(1.0);
            let b = loss_breakdown(&doc, &[&neg], &table, &params, &base_coeffs).unwrap();
            let s = b.stats;
            let neg_term = b
                .negatives
                .iter()
                .map(|n| n.e_s_prime - n.e_c_neg)
                .sum::<f64>()
                / b.negatives.len() as f64;
            let terms = [
                s.e_c - s.e_s,
                neg_term,
                (s.e_c + s.std_c) - (s.e_s + s.std_s),
                (s.e_c - s.std_c) - s.e_s,
            ];
            for (idx, term) in terms.iter().enumerate() {
                if *term < 0.0 {
                    continue;
                }
                let mut coeffs = base_coeffs;
                match idx {
                    0 => coeffs.a1 *= 2.0,
                    1 => coeffs.a2 *= 2.0,
                    2 => coeffs.b1 *= 2.0,
                    _ => coeffs.b2 *= 2.0,
                }
                let doubled = loss(&doc, &[&neg], &table, &params, &coeffs).unwrap();
                assert!(
                    doubled <= b.loss + 1e-12,
                    "seed {seed} term {idx}: {doubled} > {}",
                    b.loss
                );
            }
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let dims = ScorerDims { embed_dim: 3, window: 2, filters: 2, hidden: 2 };
        let table = toy_table(3, 7);
        let doc = toy_doc("d0");
        let neg = toy_doc_b("d1");
        let coeffs = LossCoefficients::set_i(1.0);
        let params = ScorerParams::init(dims, 3);
        let (breakdown, grad) = gradients(&doc, &[&neg], &table, &params, &coeffs).unwrap();
        assert!(breakdown.loss > 0.0, "hinge must be active for this check");

        let eps = 1e-5;
        let n_params = params.parameter_count();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..40 {
            let idx = rng.gen_range(0..n_params);
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus.flat_add(idx, eps);
            minus.flat_add(idx, -eps);
            let lp = loss(&doc, &[&neg], &table, &plus, &coeffs).unwrap();
            let lm = loss(&doc, &[&neg], &table, &minus, &coeffs).unwrap();
            let numeric = (lp - lm) / (2.0 * eps);
            let analytic = grad.flat_get(idx);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                rel < 1e-3,
                "param {idx}: analytic {analytic} vs numeric {numeric} (rel {rel})"
            );
        }
    }

    #[test]
    fn single_phrase_sides_have_finite_gradient() {
        let dims = ScorerDims { embed_dim: 4, window: 2, filters: 3, hidden: 3 };
        let table = toy_table(4, 11);
        // One short sentence per side: one padded phrase each, so both
        // variances are exactly zero.
        let doc = parse_case_document("tiny", "Damages awarded\n[1] Court granted\n").unwrap();
        let neg = toy_doc_b("d1");
        let coeffs = LossCoefficients::set_i(1.0);
        let params = ScorerParams::init(dims, 5);
        let (breakdown, grad) = gradients(&doc, &[&neg], &table, &params, &coeffs).unwrap();
        assert_eq!(breakdown.stats.std_c, 0.0);
        assert_eq!(breakdown.stats.std_s, 0.0);
        assert!(grad.global_norm().is_finite());
        for tensor in grad.tensors() {
            assert!(tensor.iter().all(|v| v.is_finite()));
        }
    }
}
