//! Summarization metrics (ROUGE-1/2/SU6, selection F-score), retrieval
//! metrics (MAP and per-query-averaged precision/recall/F1), and the
//! leave-one-out validation driver.
//!
//! ROUGE reuses the lexical formulas with the roles fixed: the reference
//! summary is the recall side, the generated text the precision side.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::Token;
use crate::lexfeat::{ngram_match, unigram_skip_match, MatchScore};
use crate::ranker::{
    rank, select_top_k, train_from_groups, QueryGroup, RankerConfig, RankerError, RankingModel,
};

/// Skip-bigram window for the ROUGE-SU6 evaluation metric.
pub const ROUGE_SU_WINDOW: usize = 6;

/// Summary length thresholds reported in the ROUGE table, as fractions of
/// document length.
pub const ROUGE_TABLE_THRESHOLDS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("average precision needs a non-empty gold set")]
    EmptyGold,
    #[error("leave-one-out needs at least two queries, found {found}")]
    TooFewQueries { found: usize },
    #[error(transparent)]
    Ranker(#[from] RankerError),
}

/// Recall is normalized by the reference, precision by the candidate,
/// using clipped multiset n-gram counts.
pub fn rouge_n(candidate: &[Token], reference: &[Token], n: usize) -> MatchScore {
    ngram_match(reference, candidate, n)
}

/// Pooled unigram + skip-bigram matching with the fixed evaluation window.
pub fn rouge_su(candidate: &[Token], reference: &[Token]) -> MatchScore {
    unigram_skip_match(reference, candidate, Some(ROUGE_SU_WINDOW))
}

fn set_match<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> MatchScore {
    let intersection = predicted.intersection(gold).count() as f64;
    let precision =
        if predicted.is_empty() { 0.0 } else { intersection / predicted.len() as f64 };
    let recall = if gold.is_empty() { 0.0 } else { intersection / gold.len() as f64 };
    MatchScore::from_pr(precision, recall)
}

/// Set precision/recall/F over sentence ids; duplicates collapse.
pub fn selection_fscore(predicted: &[usize], gold: &[usize]) -> MatchScore {
    let predicted: BTreeSet<usize> = predicted.iter().copied().collect();
    let gold: BTreeSet<usize> = gold.iter().copied().collect();
    set_match(&predicted, &gold)
}

/// Mean over gold items of the precision at their rank; gold items absent
/// from the ranking contribute 0.
pub fn average_precision<'a>(
    ranked: impl IntoIterator<Item = &'a str>,
    gold: &BTreeSet<String>,
) -> Result<f64, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranked.into_iter().enumerate() {
        if gold.contains(id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / gold.len() as f64)
}

/// Everything retrieval evaluation needs from one query: the full ranking,
/// the predicted (top-k) set, and the gold noticed set.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub query_id: String,
    pub ranked: Vec<String>,
    pub predicted: Vec<String>,
    pub gold: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryEvaluation {
    pub query_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub average_precision: f64,
}

/// Retrieval metrics macro-averaged over queries: per-query F1 is computed
/// first, then averaged, so the reported F1 is not the harmonic mean of the
/// reported precision and recall.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalReport {
    pub map: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_query: Vec<QueryEvaluation>,
}

impl RetrievalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    /// Aligned-column text table: one row per query, then the macro line.
    pub fn render_text(&self) -> String {
        let id_width = self
            .per_query
            .iter()
            .map(|q| q.query_id.len())
            .chain(std::iter::once("query".len()))
            .max()
            .unwrap_or(5)
            + 2;
        let mut out = String::new();
        out.push_str(&format!(
            "{:<id_width$}{:>8}{:>8}{:>8}{:>8}\n",
            "query", "Pre", "Rec", "F1", "AP"
        ));
        for q in &self.per_query {
            out.push_str(&format!(
                "{:<id_width$}{:>8.3}{:>8.3}{:>8.3}{:>8.3}\n",
                q.query_id, q.precision, q.recall, q.f1, q.average_precision
            ));
        }
        out.push_str(&format!(
            "{:<id_width$}{:>8.3}{:>8.3}{:>8.3}{:>8.3}\n",
            "macro", self.precision, self.recall, self.f1, self.map
        ));
        out
    }
}

/// Per-query precision/recall/F over predicted sets plus average precision
/// over rankings, macro-averaged.
pub fn retrieval_report(outcomes: &[QueryOutcome]) -> Result<RetrievalReport, EvalError> {
    assert!(!outcomes.is_empty(), "retrieval report needs at least one query");
    let mut per_query = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let predicted: BTreeSet<&str> = outcome.predicted.iter().map(|s| s.as_str()).collect();
        let gold: BTreeSet<&str> = outcome.gold.iter().map(|s| s.as_str()).collect();
        let score = set_match(&predicted, &gold);
        let ap = average_precision(outcome.ranked.iter().map(|s| s.as_str()), &outcome.gold)?;
        per_query.push(QueryEvaluation {
            query_id: outcome.query_id.clone(),
            precision: score.precision,
            recall: score.recall,
            f1: score.f_measure,
            average_precision: ap,
        });
    }
    let n = per_query.len() as f64;
    Ok(RetrievalReport {
        map: per_query.iter().map(|q| q.average_precision).sum::<f64>() / n,
        precision: per_query.iter().map(|q| q.precision).sum::<f64>() / n,
        recall: per_query.iter().map(|q| q.recall).sum::<f64>() / n,
        f1: per_query.iter().map(|q| q.f1).sum::<f64>() / n,
        per_query,
    })
}

/// What one leave-one-out fold did, for instrumentation and tests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldTrace {
    pub held_out: String,
    pub training_queries: Vec<String>,
    pub seed: u64,
    pub k: usize,
}

/// Smallest cutoff maximizing macro-F1 over the fold's training queries.
fn auto_k(training: &[QueryGroup], model: &RankingModel) -> Result<usize, EvalError> {
    let mut ranked_lists = Vec::new();
    for group in training {
        if group.candidates.iter().any(|c| c.noticed) {
            let gold: BTreeSet<String> =
                group.noticed_ids().iter().map(|s| s.to_string()).collect();
            ranked_lists.push((rank(group, model)?, gold));
        }
    }
    if ranked_lists.is_empty() {
        return Ok(1);
    }
    let max_k = training.iter().map(|g| g.candidates.len()).max().unwrap_or(1).max(1);
    let mut best = (1, f64::NEG_INFINITY);
    for k in 1..=max_k {
        let mut f_sum = 0.0;
        for (ranked, gold) in &ranked_lists {
            let predicted: BTreeSet<&str> =
                ranked.entries.iter().take(k).map(|(id, _)| id.as_str()).collect();
            let gold: BTreeSet<&str> = gold.iter().map(|s| s.as_str()).collect();
            f_sum += set_match(&predicted, &gold).f_measure;
        }
        let f1 = f_sum / ranked_lists.len() as f64;
        if f1 > best.1 {
            best = (k, f1);
        }
    }
    Ok(best.0)
}

/// For every query: trains a ranker on all other queries, ranks the
/// held-out one, and accumulates a retrieval report. Per-fold seeds are
/// derived from the config seed, so folds are independent. A fixed `top_k`
/// is used as-is; otherwise each fold picks its own cutoff on its training
/// queries.
pub fn leave_one_out(
    groups: &[QueryGroup],
    config: &RankerConfig,
) -> Result<RetrievalReport, EvalError> {
    leave_one_out_observed(groups, config, |_| {})
}

pub fn leave_one_out_observed(
    groups: &[QueryGroup],
    config: &RankerConfig,
    mut observer: impl FnMut(&FoldTrace),
) -> Result<RetrievalReport, EvalError> {
    if groups.len() < 2 {
        return Err(EvalError::TooFewQueries { found: groups.len() });
    }
    let mut seed_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let fold_seeds: Vec<u64> = (0..groups.len()).map(|_| seed_rng.gen()).collect();
    let mut outcomes = Vec::with_capacity(groups.len());
    for (fold, held_out) in groups.iter().enumerate() {
        let training: Vec<QueryGroup> = groups
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != fold)
            .map(|(_, g)| g.clone())
            .collect();
        let fold_config = RankerConfig { rng_seed: fold_seeds[fold], ..*config };
        let trained = train_from_groups(&training, &fold_config)?;
        let k = match config.top_k {
            Some(k) => k,
            None => auto_k(&training, &trained.model)?,
        };
        let ranked = rank(held_out, &trained.model)?;
        observer(&FoldTrace {
            held_out: held_out.query_id.clone(),
            training_queries: training.iter().map(|g| g.query_id.clone()).collect(),
            seed: fold_seeds[fold],
            k,
        });
        outcomes.push(QueryOutcome {
            query_id: held_out.query_id.clone(),
            predicted: select_top_k(&ranked, k),
            ranked: ranked.ids().map(String::from).collect(),
            gold: held_out.noticed_ids().iter().map(|s| s.to_string()).collect(),
        });
    }
    retrieval_report(&outcomes)
}

/// One threshold row of the summarization ROUGE table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RougeRow {
    pub threshold: f64,
    pub rouge1: MatchScore,
    pub rouge2: MatchScore,
    pub rouge_su6: MatchScore,
}

/// Macro-averages per-document ROUGE-1/2/SU6 over (generated, reference)
/// token pairs; each of precision, recall, and F is averaged separately.
pub fn rouge_table_row<'a>(
    threshold: f64,
    pairs: impl IntoIterator<Item = (&'a [Token], &'a [Token])>,
) -> RougeRow {
    let mut n = 0.0;
    let mut sums = [[0.0; 3]; 3];
    for (candidate, reference) in pairs {
        let triple = [
            rouge_n(candidate, reference, 1),
            rouge_n(candidate, reference, 2),
            rouge_su(candidate, reference),
        ];
        for (sum, score) in sums.iter_mut().zip(triple) {
            sum[0] += score.precision;
            sum[1] += score.recall;
            sum[2] += score.f_measure;
        }
        n += 1.0;
    }
    assert!(n > 0.0, "rouge table row needs at least one document");
    let mean = |s: [f64; 3]| MatchScore { precision: s[0] / n, recall: s[1] / n, f_measure: s[2] / n };
    RougeRow {
        threshold,
        rouge1: mean(sums[0]),
        rouge2: mean(sums[1]),
        rouge_su6: mean(sums[2]),
    }
}

pub fn rouge_table_json(rows: &[RougeRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows are always serializable")
}

/// Aligned-column text table: thresholds down the side, Pre/Rec/F1 under
/// each of ROUGE-1, ROUGE-2, and ROUGE-SU6.
pub fn render_rouge_table(rows: &[RougeRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<20}{:<21}{:<21}{:<21}\n",
        "Length Threshold t", "ROUGE-1", "ROUGE-2", "ROUGE-SU6"
    ));
    out.push_str(&format!("{:<20}", ""));
    for _ in 0..3 {
        out.push_str(&format!("{:<7}{:<7}{:<7}", "Pre", "Rec", "F1"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{:<20}", format!("{:.0}%", row.threshold * 100.0)));
        for score in [row.rouge1, row.rouge2, row.rouge_su6] {
            out.push_str(&format!(
                "{:<7.3}{:<7.3}{:<7.3}",
                score.precision, score.recall, score.f_measure
            ));
        }
        out.push('\n');
    }
    out
}
