//! Per-document Adam training of the phrase scorer.
//!
//! Each epoch shuffles the training documents, and every document visit
//! draws a fresh negative set, computes the margin loss gradient, clips it
//! to a global norm budget, and applies one Adam step. All randomness
//! (initialization, shuffling, negative sampling) comes from a single
//! seeded ChaCha8 stream, so a (corpus, config) pair fully determines the
//! trained model.

use rand::seq::SliceRandom;

use super::*;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Gradients with a larger global L2 norm are rescaled to this value
    /// before the optimizer sees them.
    pub grad_clip_max_norm: f64,
    /// Negatives drawn per document visit.
    pub negative_set_size: usize,
    /// Upper bound on epochs; training may stop earlier once the mean loss
    /// plateaus.
    pub epochs: usize,
    pub rng_seed: u64,
    pub coefficients: LossCoefficients,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            grad_clip_max_norm: 5.0,
            negative_set_size: 2,
            epochs: 30,
            rng_seed: 0,
            coefficients: LossCoefficients::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ScorerParams,
    /// Mean per-document loss of each completed epoch.
    pub epoch_losses: Vec<f64>,
}

/// Training stops once the mean loss improved by less than this fraction
/// over a three-epoch lookback.
const PLATEAU_REL_IMPROVEMENT: f64 = 1e-4;
const PLATEAU_LOOKBACK: usize = 3;

struct Adam {
    m: ScorerParams,
    v: ScorerParams,
    t: i32,
    lr: f64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(dims: ScorerDims, lr: f64) -> Adam {
        Adam { m: ScorerParams::zeros(dims), v: ScorerParams::zeros(dims), t: 0, lr }
    }

    /// One bias-corrected Adam step.
    fn step(&mut self, params: &mut ScorerParams, grad: &ScorerParams) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Rescales `grad` in place when its global norm exceeds `max_norm`.
pub(crate) fn clip_gradient(grad: &mut ScorerParams, max_norm: f64) {
    let norm = grad.global_norm();
    if norm > max_norm {
        grad.scale(max_norm / norm);
    }
}

/// Trains a scorer on the documents that carry summaries. Documents without
/// one are ignored; at least `negative_set_size + 1` eligible documents are
/// required so every visit can draw a full negative set.
pub fn train(
    documents: &[&CaseDocument],
    table: &EmbeddingTable,
    dims: ScorerDims,
    config: &TrainConfig,
) -> Result<TrainOutcome, ScorerError> {
    if table.dim() != dims.embed_dim {
        return Err(ScorerError::EmbeddingDimMismatch {
            table: table.dim(),
            model: dims.embed_dim,
        });
    }
    assert!(config.negative_set_size >= 1, "negative set must be non-empty");
    assert!(config.epochs >= 1, "need at least one epoch");

    let eligible: Vec<&CaseDocument> =
        documents.iter().copied().filter(|d| d.summary.is_some()).collect();
    let need = config.negative_set_size + 1;
    if eligible.len() < need {
        return Err(ScorerError::InsufficientSummaryDocuments { have: eligible.len(), need });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut params = ScorerParams::init_with(dims, &mut rng);
    let mut adam = Adam::new(dims, config.learning_rate);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..eligible.len()).collect();
    let mut negatives: Vec<&CaseDocument> = Vec::with_capacity(config.negative_set_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &doc_idx in &order {
            negatives.clear();
            // Draw distinct negatives among the other documents by sampling
            // from a range one short and skipping past the positive.
            let draw = rand::seq::index::sample(&mut rng, eligible.len() - 1, config.negative_set_size);
            for idx in draw {
                let idx = if idx >= doc_idx { idx + 1 } else { idx };
                negatives.push(eligible[idx]);
            }
            let (breakdown, mut grad) =
                gradients(eligible[doc_idx], &negatives, table, &params, &config.coefficients)?;
            epoch_loss += breakdown.loss;
            clip_gradient(&mut grad, config.grad_clip_max_norm);
            adam.step(&mut params, &grad);
        }
        epoch_losses.push(epoch_loss / eligible.len() as f64);

        if epoch >= PLATEAU_LOOKBACK {
            let prev = epoch_losses[epoch - PLATEAU_LOOKBACK];
            let cur = epoch_losses[epoch];
            let rel = if prev > 0.0 { (prev - cur) / prev } else { 0.0 };
            if rel < PLATEAU_REL_IMPROVEMENT {
                break;
            }
        }
    }

    Ok(TrainOutcome { params, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_case_document;
    use crate::embed::OovPolicy;
    use rand::Rng;

    fn table(dim: usize, seed: u64) -> EmbeddingTable {
        let words = [
            "court", "appeal", "granted", "denied", "the", "judge", "found", "breach",
            "contract", "damages", "awarded", "plaintiff", "defendant", "claim", "tort",
            "evidence", "ruled", "costs", "order", "hearing",
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

    fn corpus() -> Vec<CaseDocument> {
        let texts = [
            "Court granted the appeal. Damages awarded.\n\
             [1] The judge found breach of contract. The plaintiff claim succeeded.\n\
             [2] Court awarded damages to the plaintiff after the hearing.\n",
            "Appeal denied with costs.\n\
             [1] The defendant denied breach. The judge found no contract.\n\
             [2] No damages awarded. The tort claim failed in court.\n",
            "The tort claim succeeded on the evidence.\n\
             [1] The judge ruled the evidence proved the tort claim.\n\
             [2] The defendant must pay damages and costs by court order.\n",
            "Hearing adjourned pending evidence.\n\
             [1] The court ordered a new hearing on the contract claim.\n\
             [2] Costs of the appeal were reserved by the judge.\n",
        ];
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| parse_case_document(&format!("d{i}"), t).unwrap())
            .collect()
    }

    fn dims() -> ScorerDims {
        ScorerDims { embed_dim: 4, window: 2, filters: 3, hidden: 3 }
    }

    #[test]
    fn same_seed_reproduces_the_model_exactly() {
        let docs = corpus();
        let refs: Vec<&CaseDocument> = docs.iter().collect();
        let table = table(4, 1);
        let config = TrainConfig { epochs: 3, negative_set_size: 2, ..TrainConfig::default() };
        let a = train(&refs, &table, dims(), &config).unwrap();
        let b = train(&refs, &table, dims(), &config).unwrap();
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn different_seeds_differ() {
        let docs = corpus();
        let refs: Vec<&CaseDocument> = docs.iter().collect();
        let table = table(4, 1);
        let base = TrainConfig { epochs: 2, ..TrainConfig::default() };
        let other = TrainConfig { rng_seed: 1, ..base.clone() };
        let a = train(&refs, &table, dims(), &base).unwrap();
        let b = train(&refs, &table, dims(), &other).unwrap();
        assert_ne!(a.params, b.params);
    }

    #[test]
    fn too_few_summary_documents_is_an_error() {
        let docs = corpus();
        let refs: Vec<&CaseDocument> = docs.iter().take(2).collect();
        let table = table(4, 1);
        let config = TrainConfig { negative_set_size: 2, ..TrainConfig::default() };
        let err = train(&refs, &table, dims(), &config).unwrap_err();
        assert!(matches!(
            err,
            ScorerError::InsufficientSummaryDocuments { have: 2, need: 3 }
        ));
    }

    #[test]
    fn summaryless_documents_are_ignored_for_eligibility() {
        let mut docs = corpus();
        docs.push(
            parse_case_document("bare", "[1] The judge found breach of contract today.\n").unwrap(),
        );
        assert!(docs[4].summary.is_none());
        let refs: Vec<&CaseDocument> = docs.iter().collect();
        let table = table(4, 1);
        let config = TrainConfig { epochs: 2, ..TrainConfig::default() };
        let refs_with_summaries: Vec<&CaseDocument> = docs[..4].iter().collect();
        let a = train(&refs, &table, dims(), &config).unwrap();
        let b = train(&refs_with_summaries, &table, dims(), &config).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let docs = corpus();
        let refs: Vec<&CaseDocument> = docs.iter().collect();
        let table = table(5, 1);
        let err = train(&refs, &table, dims(), &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, ScorerError::EmbeddingDimMismatch { table: 5, model: 4 }));
    }

    #[test]
    fn training_reduces_the_mean_loss() {
        let docs = corpus();
        let refs: Vec<&CaseDocument> = docs.iter().collect();
        let table = table(4, 1);
        let config = TrainConfig {
            learning_rate: 3e-3,
            epochs: 25,
            rng_seed: 7,
            ..TrainConfig::default()
        };
        let outcome = train(&refs, &table, dims(), &config).unwrap();
        let first = outcome.epoch_losses[0];
        let last = *outcome.epoch_losses.last().unwrap();
        assert!(last < first, "loss went {first} -> {last}");
    }

    #[test]
    fn zero_learning_rate_plateaus_after_the_lookback() {
        let docs = corpus();
        let refs: Vec<&CaseDocument> = docs.iter().collect();
        let table = table(4, 1);
        // Frozen parameters plus exhaustive negative sets make every epoch's
        // mean loss identical, so the plateau check fires at the first
        // opportunity.
        let config = TrainConfig {
            learning_rate: 0.0,
            negative_set_size: refs.len() - 1,
            epochs: 30,
            ..TrainConfig::default()
        };
        let outcome = train(&refs, &table, dims(), &config).unwrap();
        assert_eq!(outcome.epoch_losses.len(), PLATEAU_LOOKBACK + 1);
    }

    #[test]
    fn clip_rescales_only_oversized_gradients() {
        let mut grad = ScorerParams::zeros(dims());
        grad.conv_kernel.data_mut()[0] = 3.0;
        grad.conv_kernel.data_mut()[1] = 4.0;
        clip_gradient(&mut grad, 2.5);
        assert!((grad.global_norm() - 2.5).abs() < 1e-12);
        assert!((grad.conv_kernel.data()[0] - 1.5).abs() < 1e-12);
        let mut small = ScorerParams::zeros(dims());
        small.mlp_out_b = 0.25;
        let before = small.clone();
        clip_gradient(&mut small, 2.5);
        assert_eq!(small, before);
    }

    #[test]
    fn adam_first_step_moves_by_roughly_the_learning_rate() {
        let dims = ScorerDims { embed_dim: 1, window: 1, filters: 1, hidden: 1 };
        let mut params = ScorerParams::zeros(dims);
        let mut grad = ScorerParams::zeros(dims);
        for t in grad.tensors_mut() {
            for v in t {
                *v = 0.5;
            }
        }
        let mut adam = Adam::new(dims, 0.1);
        adam.step(&mut params, &grad);
        // With bias correction the first step is lr·g/(|g| + eps) ≈ lr.
        for t in params.tensors() {
            for v in t {
                assert!((v + 0.1).abs() < 1e-6, "step was {v}");
            }
        }
    }
}
