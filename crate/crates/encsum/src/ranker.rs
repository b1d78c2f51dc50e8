//! Pairwise linear max-margin ranking over relevance vectors: difference
//! pair construction, a seeded primal subgradient (Pegasos-style) trainer,
//! ranked retrieval, and top-k selection.
//!
//! The objective over N pairs is mean hinge loss plus (λ/2)‖w‖² with
//! λ = 1/(reg_c · N). Pairs always come in exact-negation couples, so the
//! optimal bias is zero and the model trains without one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::dot;

#[derive(Debug, Error)]
pub enum RankerError {
    #[error("query {query}: group has no noticed or no un-noticed candidate")]
    DegenerateGroup { query: String },
    #[error("no training pairs")]
    NoPairs,
    #[error("vector has dimension {found}, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// One candidate of a query: its relevance vector and gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub vector: Vec<f64>,
    pub noticed: bool,
}

/// A query with its full candidate pool.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query_id: String,
    pub candidates: Vec<Candidate>,
}

impl QueryGroup {
    pub fn noticed_ids(&self) -> Vec<&str> {
        self.candidates.iter().filter(|c| c.noticed).map(|c| c.id.as_str()).collect()
    }
}

/// One difference example: x = x_noticed − x_unnoticed (label +1) or its
/// negation (label −1).
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Per-feature z-score parameters fitted on raw candidate vectors.
/// Zero-variance features get std 1 so standardization stays defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    pub fn identity(dim: usize) -> Standardization {
        Standardization { means: vec![0.0; dim], stds: vec![1.0; dim] }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }
}

/// Population mean and std per feature over the given vectors.
pub fn fit_standardization<'a>(vectors: impl Iterator<Item = &'a [f64]>) -> Standardization {
    let vectors: Vec<&[f64]> = vectors.collect();
    assert!(!vectors.is_empty(), "standardization needs at least one vector");
    let dim = vectors[0].len();
    let n = vectors.len() as f64;
    let mut means = vec![0.0; dim];
    for v in &vectors {
        assert_eq!(v.len(), dim, "vectors must share one dimension");
        for (m, &x) in means.iter_mut().zip(*v) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; dim];
    for v in &vectors {
        for ((s, &x), &m) in stds.iter_mut().zip(*v).zip(&means) {
            *s += (x - m) * (x - m);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    Standardization { means, stds }
}

/// For each noticed candidate, samples `pairs_per_positive` distinct
/// un-noticed candidates (capped at the pool size) and emits both the
/// difference example and its exact negation.
pub fn make_pairs(
    group: &QueryGroup,
    pairs_per_positive: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PairExample>, RankerError> {
    assert!(pairs_per_positive >= 1, "at least one pair per positive");
    let noticed: Vec<&Candidate> = group.candidates.iter().filter(|c| c.noticed).collect();
    let unnoticed: Vec<&Candidate> = group.candidates.iter().filter(|c| !c.noticed).collect();
    if noticed.is_empty() || unnoticed.is_empty() {
        return Err(RankerError::DegenerateGroup { query: group.query_id.clone() });
    }
    let take = pairs_per_positive.min(unnoticed.len());
    let mut pairs = Vec::with_capacity(2 * noticed.len() * take);
    for n in &noticed {
        for idx in rand::seq::index::sample(rng, unnoticed.len(), take) {
            let u = unnoticed[idx];
            let diff: Vec<f64> = n.vector.iter().zip(&u.vector).map(|(a, b)| a - b).collect();
            let neg: Vec<f64> = diff.iter().map(|v| -v).collect();
            pairs.push(PairExample { x: diff, y: 1.0 });
            pairs.push(PairExample { x: neg, y: -1.0 });
        }
    }
    Ok(pairs)
}

/// Linear ranking model with its feature standardization baked in. Scores
/// are w · standardize(x) + bias.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardization: Standardization,
    pub reg_c: f64,
}

impl RankingModel {
    pub fn score(&self, x: &[f64]) -> Result<f64, RankerError> {
        if x.len() != self.weights.len() {
            return Err(RankerError::DimensionMismatch {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        Ok(dot(&self.weights, &self.standardization.apply(x)) + self.bias)
    }
}

pub(crate) fn hinge(w: &[f64], x: &[f64], y: f64) -> f64 {
    (1.0 - y * dot(w, x)).max(0.0)
}

/// Mean hinge loss plus (λ/2)‖w‖² over already-standardized pairs.
pub fn objective(w: &[f64], pairs: &[PairExample], lambda: f64) -> f64 {
    let hinge_sum: f64 = pairs.iter().map(|p| hinge(w, &p.x, p.y)).sum();
    hinge_sum / pairs.len() as f64 + 0.5 * lambda * dot(w, w)
}

/// Seeded Pegasos-style subgradient descent. Pair vectors are differences
/// of raw candidate vectors, so standardizing them means dividing by the
/// stds only (the means cancel).
pub fn train_ranker(
    pairs: &[PairExample],
    standardization: Standardization,
    reg_c: f64,
    epochs: usize,
    seed: u64,
) -> Result<RankingModel, RankerError> {
    if pairs.is_empty() {
        return Err(RankerError::NoPairs);
    }
    assert!(reg_c > 0.0, "regularization constant must be positive");
    assert!(epochs >= 1, "at least one epoch");
    let dim = pairs[0].x.len();
    let scaled: Vec<PairExample> = pairs
        .iter()
        .map(|p| {
            assert_eq!(p.x.len(), dim, "pairs must share one dimension");
            let x = p.x.iter().zip(&standardization.stds).map(|(&v, &s)| v / s).collect();
            PairExample { x, y: p.y }
        })
        .collect();

    let n = scaled.len();
    let lambda = 1.0 / (reg_c * n as f64);
    let mut w = vec![0.0; dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0u64;
    for _ in 0..epochs {
        for _ in 0..n {
            t += 1;
            let p = &scaled[rng.gen_range(0..n)];
            let eta = 1.0 / (lambda * t as f64);
            let shrink = 1.0 - 1.0 / t as f64;
            for v in &mut w {
                *v *= shrink;
            }
            if p.y * dot(&w, &p.x) < 1.0 {
                for (v, &x) in w.iter_mut().zip(&p.x) {
                    *v += eta * p.y * x;
                }
            }
        }
    }
    Ok(RankingModel { weights: w, bias: 0.0, standardization, reg_c })
}

/// Outcome of training over several query groups: the model plus the ids of
/// groups that were skipped as degenerate.
#[derive(Debug, Clone)]
pub struct TrainedRanker {
    pub model: RankingModel,
    pub skipped_groups: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankerConfig {
    #[serde(default = "default_reg_c")]
    pub reg_c: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_pairs_per_positive")]
    pub pairs_per_positive: usize,
    #[serde(default)]
    pub rng_seed: u64,
    /// Fixed prediction cutoff; `None` selects k on validation folds.
    #[serde(default)]
    pub top_k: Option<usize>,
}

fn default_reg_c() -> f64 {
    1.0
}

fn default_epochs() -> usize {
    30
}

fn default_pairs_per_positive() -> usize {
    1
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            reg_c: default_reg_c(),
            epochs: default_epochs(),
            pairs_per_positive: default_pairs_per_positive(),
            rng_seed: 0,
            top_k: None,
        }
    }
}

/// Builds pairs from every non-degenerate group (degenerate ones are
/// skipped and reported), fits standardization on all candidate vectors,
/// and trains.
pub fn train_from_groups(
    groups: &[QueryGroup],
    config: &RankerConfig,
) -> Result<TrainedRanker, RankerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for group in groups {
        match make_pairs(group, config.pairs_per_positive, &mut rng) {
            Ok(mut p) => pairs.append(&mut p),
            Err(RankerError::DegenerateGroup { query }) => skipped.push(query),
            Err(other) => return Err(other),
        }
    }
    let standardization = fit_standardization(
        groups.iter().flat_map(|g| g.candidates.iter().map(|c| c.vector.as_slice())),
    );
    let model =
        train_ranker(&pairs, standardization, config.reg_c, config.epochs, config.rng_seed)?;
    Ok(TrainedRanker { model, skipped_groups: skipped })
}

/// All candidates of one query ordered by (score desc, id asc).
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<(String, f64)>,
}

impl RankedList {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }
}

/// Scores every candidate and sorts per the RankedList invariant.
pub fn rank(group: &QueryGroup, model: &RankingModel) -> Result<RankedList, RankerError> {
    let mut entries = Vec::with_capacity(group.candidates.len());
    for c in &group.candidates {
        entries.push((c.id.clone(), model.score(&c.vector)?));
    }
    entries.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).expect("scores are finite").then_with(|| a.0.cmp(&b.0))
    });
    Ok(RankedList { query_id: group.query_id.clone(), entries })
}

/// The first min(k, len) candidate ids.
pub fn select_top_k(ranked: &RankedList, k: usize) -> Vec<String> {
    ranked.entries.iter().take(k).map(|(id, _)| id.clone()).collect()
}
