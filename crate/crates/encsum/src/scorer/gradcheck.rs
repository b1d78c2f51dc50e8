//! Finite-difference verification of the analytic gradients.

use super::*;

/// Floor of the relative-error denominator. Central differences at ε=1e-4
/// carry truncation noise around 1e-8 absolute, so coordinates whose
/// gradient sits below this floor are compared absolutely
/// (tolerance × floor) instead of drowning in that noise.
const DENOMINATOR_FLOOR: f64 = 1e-4;

/// Minimum score variance (per statistics side) for a generated check
/// model. Below this the sqrt in the std terms is so sharply curved that
/// central differences stop approximating the derivative; such models sit
/// next to the std kink and are rejected during construction.
const MIN_SIDE_VARIANCE: f64 = 4e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Largest relative error over all checked coordinates, where the error
    /// of one coordinate is
    /// |analytic − numeric| / max(|analytic|, |numeric|, floor).
    pub max_rel_error: f64,
    /// Number of parameter coordinates compared.
    pub checked: usize,
    /// Coordinates skipped because the ±ε perturbation crossed a
    /// ReLU/max-pool/hinge kink, where finite differences do not measure
    /// the one-sided derivative the backward pass reports.
    pub excluded: usize,
}

/// Compares the analytic gradient against central finite differences at
/// every parameter coordinate away from kinks.
pub fn finite_difference_check(
    doc: &CaseDocument,
    negatives: &[&CaseDocument],
    table: &EmbeddingTable,
    params: &ScorerParams,
    coeffs: &LossCoefficients,
    epsilon: f64,
) -> Result<GradCheckReport, ScorerError> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let (_, grad) = loss::gradients(doc, negatives, table, params, coeffs)?;
    let (_, base_sig) = loss::loss_with_signature(doc, negatives, table, params, coeffs)?;
    let n = params.parameter_count();
    let mut max_rel_error: f64 = 0.0;
    let mut checked = 0;
    let mut excluded = 0;
    for idx in 0..n {
        let mut plus = params.clone();
        let mut minus = params.clone();
        plus.flat_add(idx, epsilon);
        minus.flat_add(idx, -epsilon);
        let (lp, sig_p) = loss::loss_with_signature(doc, negatives, table, &plus, coeffs)?;
        let (lm, sig_m) = loss::loss_with_signature(doc, negatives, table, &minus, coeffs)?;
        if sig_p != base_sig || sig_m != base_sig {
            excluded += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * epsilon);
        let analytic = grad.flat_get(idx);
        let rel = (analytic - numeric).abs()
            / analytic.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR);
        max_rel_error = max_rel_error.max(rel);
        checked += 1;
    }
    Ok(GradCheckReport { max_rel_error, checked, excluded })
}

fn check_documents() -> (CaseDocument, CaseDocument, CaseDocument) {
    let doc = crate::corpus::parse_case_document(
        "g0",
        "Court granted the appeal. Damages awarded.\n\
         [1] The judge found breach of contract. The plaintiff claim succeeded.\n\
         [2] Court awarded damages to the plaintiff after the hearing.\n",
    )
    .expect("well-formed check document");
    let neg_a = crate::corpus::parse_case_document(
        "g1",
        "Appeal denied with costs.\n\
         [1] The defendant denied breach. The judge found no contract.\n\
         [2] No damages awarded. The tort claim failed in court.\n",
    )
    .expect("well-formed check document");
    let neg_b = crate::corpus::parse_case_document(
        "g2",
        "The tort claim succeeded on the evidence.\n\
         [1] The judge ruled the evidence proved the tort claim.\n\
         [2] The defendant must pay damages and costs by court order.\n",
    )
    .expect("well-formed check document");
    (doc, neg_a, neg_b)
}

fn check_table(dims: ScorerDims, seed: u64) -> EmbeddingTable {
    let words = [
        "court", "appeal", "granted", "denied", "the", "judge", "found", "breach",
        "contract", "damages", "awarded", "plaintiff", "defendant", "claim", "tort",
        "evidence", "ruled", "costs", "order", "hearing",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A_0F0F_F0F0);
    let vectors: std::collections::HashMap<String, Vec<f64>> = words
        .iter()
        .map(|w| {
            let v: Vec<f64> = (0..dims.embed_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (w.to_string(), v)
        })
        .collect();
    EmbeddingTable::from_vectors(dims.embed_dim, vectors, crate::embed::OovPolicy::Zero)
}

/// Runs the finite-difference check on a fixed tiny configuration
/// (d = 4, l = 2, c = 3, h = 3, two negatives) whose embeddings and
/// initialization derive from `seed`.
///
/// Construction skips candidate models whose score variance on either
/// statistics side is degenerate (below [`MIN_SIDE_VARIANCE`]): those sit
/// next to the sqrt kink of the std terms, where finite differences are
/// meaningless no matter how the backward pass resolves the kink.
/// Candidates are re-derived from the seed deterministically until one
/// lies in smooth territory.
pub fn tiny_model_check(seed: u64) -> GradCheckReport {
    let dims = ScorerDims { embed_dim: 4, window: 2, filters: 3, hidden: 3 };
    let (doc, neg_a, neg_b) = check_documents();
    let coeffs = LossCoefficients::default();
    for attempt in 0u64..64 {
        let candidate = seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let table = check_table(dims, candidate);
        let params = ScorerParams::init(dims, candidate);
        let breakdown = loss::loss_breakdown(&doc, &[&neg_a, &neg_b], &table, &params, &coeffs)
            .expect("check documents all carry summaries");
        let var_c = breakdown.stats.std_c * breakdown.stats.std_c;
        let var_s = breakdown.stats.std_s * breakdown.stats.std_s;
        if var_c < MIN_SIDE_VARIANCE || var_s < MIN_SIDE_VARIANCE {
            continue;
        }
        return finite_difference_check(&doc, &[&neg_a, &neg_b], &table, &params, &coeffs, 1e-4)
            .expect("check documents all carry summaries");
    }
    panic!("no smooth check model within 64 attempts of seed {seed}");
}
