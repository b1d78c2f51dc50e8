//! Subcommand implementations: each one reads prior artifacts by path,
//! writes its own under the output directory, and copies the resolved
//! config beside them. Given identical inputs and seeds, every command
//! produces byte-identical outputs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use encsum::container::{
    ranker_checkpoint, ranker_from_checkpoint, scorer_checkpoint, scorer_from_checkpoint,
    TensorContainer,
};
use encsum::corpus::{CaseDocument, Dataset, Token};
use encsum::embed::{EmbeddingTable, OovPolicy};
use encsum::encoding::{generate_summary, summary_jsonl_line};
use encsum::eval::{
    leave_one_out, render_rouge_table, rouge_table_row, RetrievalReport, RougeRow,
    ROUGE_TABLE_THRESHOLDS,
};
use encsum::latent::{encode, relevance_vector, EncoderKind, LatentResources};
use encsum::lexfeat::{feature_names, features_jsonl_line, lexical_features, GeneratedTokens};
use encsum::ranker::{train_from_groups, Candidate, QueryGroup, RankingModel};
use encsum::scorer::{train, tiny_model_check, ScorerParams};
use encsum::synth::{generate, SynthConfig};

use crate::config::RunConfig;
use crate::CliError;

fn data(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Applies `f` to every item, preserving input order. With more than one
/// thread the items are processed in contiguous chunks, so the output is
/// identical to the single-threaded run.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|slice| scope.spawn(|| slice.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

fn load_dataset(config: &RunConfig) -> Result<Dataset, CliError> {
    Dataset::load(&config.paths.manifest).map_err(data)
}

fn load_table(config: &RunConfig) -> Result<EmbeddingTable, CliError> {
    let (table, _) =
        EmbeddingTable::load_path(&config.paths.embeddings, OovPolicy::Zero, None)
            .map_err(data)?;
    Ok(table)
}

fn load_scorer(config: &RunConfig) -> Result<ScorerParams, CliError> {
    let path = config.paths.scorer_checkpoint();
    if !path.exists() {
        return Err(CliError::Data(format!(
            "scorer checkpoint {} not found; run train-scorer first",
            path.display()
        )));
    }
    let container = TensorContainer::load_path(&path).map_err(data)?;
    let (params, _, _) = scorer_from_checkpoint(&container).map_err(data)?;
    Ok(params)
}

fn load_ranker(config: &RunConfig) -> Result<RankingModel, CliError> {
    let path = config.paths.ranker_checkpoint();
    if !path.exists() {
        return Err(CliError::Data(format!(
            "ranker checkpoint {} not found; run train-ranker first",
            path.display()
        )));
    }
    let container = TensorContainer::load_path(&path).map_err(data)?;
    ranker_from_checkpoint(&container).map_err(data)
}

// ---------------------------------------------------------------------------
// Artifact files
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct EncodingRow {
    id: String,
    vector: Vec<f64>,
}

fn encodings_path(config: &RunConfig) -> PathBuf {
    config.paths.output_dir.join("encodings.jsonl")
}

fn load_encodings(config: &RunConfig) -> Result<BTreeMap<String, Vec<f64>>, CliError> {
    let path = encodings_path(config);
    if !path.exists() {
        return Err(CliError::Data(format!(
            "encodings {} not found; run encode first",
            path.display()
        )));
    }
    let raw = fs::read_to_string(&path).map_err(data)?;
    let mut map = BTreeMap::new();
    for (number, line) in raw.lines().enumerate() {
        let row: EncodingRow = serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!("{}:{}: {e}", path.display(), number + 1))
        })?;
        map.insert(row.id, row.vector);
    }
    Ok(map)
}

#[derive(Deserialize)]
struct FeatureRow {
    query: String,
    candidate: String,
    features: Vec<f64>,
}

fn features_path(config: &RunConfig) -> PathBuf {
    config.paths.output_dir.join("features.jsonl")
}

/// Feature rows grouped by query in file order.
fn load_feature_groups(
    config: &RunConfig,
) -> Result<Vec<(String, Vec<(String, Vec<f64>)>)>, CliError> {
    let path = features_path(config);
    if !path.exists() {
        return Err(CliError::Data(format!(
            "features {} not found; run featurize first",
            path.display()
        )));
    }
    let raw = fs::read_to_string(&path).map_err(data)?;
    let mut groups: Vec<(String, Vec<(String, Vec<f64>)>)> = Vec::new();
    for (number, line) in raw.lines().enumerate() {
        let row: FeatureRow = serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!("{}:{}: {e}", path.display(), number + 1))
        })?;
        match groups.last_mut() {
            Some((query, rows)) if *query == row.query => {
                rows.push((row.candidate, row.features));
            }
            _ => groups.push((row.query, vec![(row.candidate, row.features)])),
        }
    }
    if groups.is_empty() {
        return Err(CliError::Data(format!("{} holds no feature rows", path.display())));
    }
    Ok(groups)
}

/// Joins feature rows with the manifest's noticed labels. Groups whose
/// manifest entry carries no gold get `noticed: false` throughout and are
/// reported in the second return value.
fn ranker_groups(
    config: &RunConfig,
    dataset: &Dataset,
) -> Result<(Vec<QueryGroup>, Vec<String>), CliError> {
    let gold: BTreeMap<&str, _> = dataset
        .groups
        .iter()
        .map(|g| (g.query_id.as_str(), g.noticed.as_ref()))
        .collect();
    let mut groups = Vec::new();
    let mut unlabeled = Vec::new();
    for (query, rows) in load_feature_groups(config)? {
        let noticed_set = match gold.get(query.as_str()) {
            Some(set) => *set,
            None => {
                return Err(CliError::Data(format!(
                    "feature file query {query} is not in the manifest"
                )))
            }
        };
        if noticed_set.is_none() {
            unlabeled.push(query.clone());
        }
        let candidates = rows
            .into_iter()
            .map(|(id, vector)| Candidate {
                noticed: noticed_set.is_some_and(|set| set.contains(&id)),
                id,
                vector,
            })
            .collect();
        groups.push(QueryGroup { query_id: query, candidates });
    }
    Ok((groups, unlabeled))
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

pub fn gen_corpus(
    config: Option<RunConfig>,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut synth = config.as_ref().map(|c| c.synth.clone()).unwrap_or_default();
    if let Some(seed) = seed {
        synth.seed = seed;
    }
    let out = match (out, &config) {
        (Some(dir), _) => dir,
        (None, Some(cfg)) => cfg
            .paths
            .manifest
            .parent()
            .map(Path::to_path_buf)
            .ok_or_else(|| CliError::Config("manifest path has no parent directory".into()))?,
        (None, None) => {
            return Err(CliError::Config(
                "gen-corpus needs --out or a config whose manifest names the corpus dir".into(),
            ))
        }
    };
    let corpus = generate_checked(&synth)?;
    corpus.write_to_dir(&out).map_err(data)?;
    println!(
        "wrote {} documents, {} embedding rows, {} query groups to {}",
        corpus.documents.len(),
        corpus.embedding_rows.len(),
        corpus.groups.len(),
        out.display()
    );
    Ok(())
}

/// `SynthConfig::validate` asserts; surface bad settings as config errors.
fn generate_checked(synth: &SynthConfig) -> Result<encsum::synth::SynthCorpus, CliError> {
    std::panic::catch_unwind(|| generate(synth)).map_err(|payload| {
        let reason = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "invalid synth settings".to_string());
        CliError::Config(format!("synth section rejected: {reason}"))
    })
}

pub struct ScorerOverrides {
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub learning_rate: Option<f64>,
}

fn load_split_documents(
    entries: &[encsum::synth::SplitEntry],
) -> Result<Vec<CaseDocument>, CliError> {
    entries
        .iter()
        .map(|entry| {
            let raw = fs::read_to_string(&entry.path).map_err(|e| {
                CliError::Data(format!("cannot read case {}: {e}", entry.path.display()))
            })?;
            encsum::corpus::parse_case_document(&entry.id, &raw).map_err(data)
        })
        .collect()
}

pub fn train_scorer(mut config: RunConfig, over: ScorerOverrides) -> Result<(), CliError> {
    if let Some(epochs) = over.epochs {
        config.scorer.epochs = epochs;
    }
    if let Some(seed) = over.seed {
        config.scorer.rng_seed = seed;
    }
    if let Some(lr) = over.learning_rate {
        config.scorer.learning_rate = lr;
    }
    config.require_inputs(true)?;
    config.write_resolved()?;
    let dataset = load_dataset(&config)?;
    let table = load_table(&config)?;

    let split_docs: Vec<CaseDocument>;
    let documents: Vec<&CaseDocument> = match config.paths.splits() {
        Some(path) => {
            let (train_entries, _) = encsum::synth::load_splits(&path).map_err(data)?;
            split_docs = load_split_documents(&train_entries)?;
            split_docs.iter().collect()
        }
        None => dataset.documents.values().collect(),
    };

    let train_config = config.scorer.train_config()?;
    let dims = config.scorer.dims(table.dim());
    let outcome = train(&documents, &table, dims, &train_config).map_err(data)?;
    if outcome.epoch_losses.iter().any(|l| !l.is_finite()) {
        return Err(CliError::Numeric("training produced a non-finite loss".into()));
    }

    let ckpt = scorer_checkpoint(&outcome.params, train_config.rng_seed, &train_config.coefficients);
    let ckpt_path = config.paths.scorer_checkpoint();
    ckpt.save_path(&ckpt_path).map_err(data)?;
    println!("wrote {} ({})", ckpt_path.display(), ckpt.fingerprint());

    let mut csv = String::from("epoch,mean_loss\n");
    for (epoch, loss) in outcome.epoch_losses.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", epoch + 1, loss);
    }
    write_file(&config.paths.output_dir.join("train-loss.csv"), &csv)?;
    println!(
        "trained on {} documents for {} epochs, final mean loss {:.6}",
        documents.len(),
        outcome.epoch_losses.len(),
        outcome.epoch_losses.last().expect("at least one epoch")
    );
    Ok(())
}

pub fn summarize(
    config: RunConfig,
    threshold: Option<f64>,
    threads: usize,
) -> Result<(), CliError> {
    let t = threshold.unwrap_or(config.summarize.threshold);
    if !(t > 0.0 && t <= 1.0) {
        return Err(CliError::Config(format!(
            "summarize threshold must be in (0, 1], got {t}"
        )));
    }
    config.require_inputs(true)?;
    config.write_resolved()?;
    let dataset = load_dataset(&config)?;
    let table = load_table(&config)?;
    let params = load_scorer(&config)?;

    let docs: Vec<&CaseDocument> = dataset.documents.values().collect();
    let lines = parallel_map(&docs, threads, |doc| {
        let summary = generate_summary(doc, &table, &params, t);
        summary_jsonl_line(&doc.id, &summary, doc)
    });
    let mut jsonl = lines.join("\n");
    jsonl.push('\n');
    write_file(&config.paths.output_dir.join("summaries.jsonl"), &jsonl)
}

pub fn encode_documents(config: RunConfig, threads: usize) -> Result<(), CliError> {
    config.require_inputs(config.encoder.kind != EncoderKind::ExternalImport)?;
    config.write_resolved()?;
    let dataset = load_dataset(&config)?;
    let spec = config.encoder.spec();

    let table;
    let params;
    let external;
    let mut resources = LatentResources::default();
    match spec.kind {
        EncoderKind::ExternalImport => {
            let path = config.paths.external_vectors.as_ref().ok_or_else(|| {
                CliError::Config("external-import encoder needs paths.external_vectors".into())
            })?;
            external = encsum::latent::import_external_vectors_path(path).map_err(data)?;
            resources.external = Some(&external);
        }
        EncoderKind::Encsum => {
            table = load_table(&config)?;
            params = load_scorer(&config)?;
            resources.table = Some(&table);
            resources.scorer = Some(&params);
        }
        _ => {
            table = load_table(&config)?;
            resources.table = Some(&table);
        }
    }

    let docs: Vec<&CaseDocument> = dataset.documents.values().collect();
    let rows = parallel_map(&docs, threads, |doc| {
        encode(doc, spec, resources).map(|vector| {
            serde_json::to_string(&serde_json::json!({ "id": doc.id, "vector": vector }))
                .expect("encoding line is always serializable")
        })
    });
    let mut jsonl = String::new();
    for row in rows {
        jsonl.push_str(&row.map_err(data)?);
        jsonl.push('\n');
    }
    write_file(&config.paths.output_dir.join("encodings.jsonl"), &jsonl)
}

pub fn featurize(config: RunConfig, threads: usize) -> Result<(), CliError> {
    config.require_inputs(false)?;
    config.write_resolved()?;
    let dataset = load_dataset(&config)?;
    let lexical = config.lexical.lexical_config()?;
    let encodings = load_encodings(&config)?;

    let generated = load_generated_tokens(&config, &lexical)?;
    let doc = |id: &str| -> Result<&CaseDocument, CliError> {
        dataset
            .documents
            .get(id)
            .ok_or_else(|| CliError::Data(format!("document {id} is not in the manifest")))
    };
    let encoding = |id: &str| -> Result<&Vec<f64>, CliError> {
        encodings
            .get(id)
            .ok_or_else(|| CliError::Data(format!("document {id} has no encoding; rerun encode")))
    };

    let groups: Vec<_> = dataset.groups.iter().collect();
    let blocks = parallel_map(&groups, threads, |group| -> Result<String, CliError> {
        let query = doc(&group.query_id)?;
        let query_encoding = encoding(&group.query_id)?;
        let mut block = String::new();
        for cid in &group.candidates {
            let lex = lexical_features(query, doc(cid)?, &lexical, &generated).map_err(data)?;
            let rv = relevance_vector(query_encoding, encoding(cid)?, lex).map_err(data)?;
            block.push_str(&features_jsonl_line(
                &group.query_id,
                cid,
                &rv.concatenated(),
            ));
            block.push('\n');
        }
        Ok(block)
    });

    let mut jsonl = String::new();
    let mut latent_len = 0;
    for block in blocks {
        jsonl.push_str(&block?);
    }
    if let Some(first) = encodings.values().next() {
        latent_len = first.len();
    }
    write_file(&features_path(&config), &jsonl)?;

    let mut names = feature_names(&lexical);
    names.extend((0..latent_len).map(|i| format!("latent_product_{i:03}")));
    let manifest = serde_json::json!({
        "lexical": {
            "options": lexical.options.len(),
            "skip_window": lexical.skip_window,
            "wlcs_alpha": lexical.wlcs_alpha,
            "remove_stopwords": lexical.remove_stopwords,
            "stem": lexical.stem,
        },
        "latent_product_len": latent_len,
        "features": names,
    });
    write_file(
        &config.paths.output_dir.join("feature-names.json"),
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )
}

/// The 2019 option bank compares against generated summaries; they come
/// from the summarize artifact.
fn load_generated_tokens(
    config: &RunConfig,
    lexical: &encsum::lexfeat::LexicalConfig,
) -> Result<GeneratedTokens, CliError> {
    use encsum::lexfeat::Side;
    let needs_generated =
        lexical.options.iter().any(|&(q, c)| q == Side::Generated || c == Side::Generated);
    if !needs_generated {
        return Ok(GeneratedTokens::new());
    }
    let path = config.paths.output_dir.join("summaries.jsonl");
    if !path.exists() {
        return Err(CliError::Data(format!(
            "lexical options use generated summaries but {} is missing; run summarize first",
            path.display()
        )));
    }
    #[derive(Deserialize)]
    struct SummaryRow {
        id: String,
        text: String,
    }
    let raw = fs::read_to_string(&path).map_err(data)?;
    let mut map = GeneratedTokens::new();
    for (number, line) in raw.lines().enumerate() {
        let row: SummaryRow = serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!("{}:{}: {e}", path.display(), number + 1))
        })?;
        let tokens: Vec<Token> = encsum::corpus::tokenize(&row.text)
            .iter()
            .flat_map(|s| s.iter().cloned())
            .collect();
        map.insert(row.id, tokens);
    }
    Ok(map)
}

pub struct RankerOverrides {
    pub seed: Option<u64>,
    pub reg_c: Option<f64>,
    pub epochs: Option<usize>,
}

pub fn train_ranker(mut config: RunConfig, over: RankerOverrides) -> Result<(), CliError> {
    if let Some(seed) = over.seed {
        config.ranker.rng_seed = seed;
    }
    if let Some(reg_c) = over.reg_c {
        config.ranker.reg_c = reg_c;
    }
    if let Some(epochs) = over.epochs {
        config.ranker.epochs = epochs;
    }
    config.require_inputs(false)?;
    config.write_resolved()?;
    let dataset = load_dataset(&config)?;
    let (groups, unlabeled) = ranker_groups(&config, &dataset)?;
    let labeled: Vec<QueryGroup> = groups
        .into_iter()
        .filter(|g| !unlabeled.contains(&g.query_id))
        .collect();
    if labeled.is_empty() {
        return Err(CliError::Data(
            "no query group carries noticed labels; cannot train a ranker".into(),
        ));
    }
    let trained = train_from_groups(&labeled, &config.ranker).map_err(data)?;
    if !trained.skipped_groups.is_empty() {
        println!(
            "skipped {} degenerate group(s): {}",
            trained.skipped_groups.len(),
            trained.skipped_groups.join(", ")
        );
    }
    let ckpt = ranker_checkpoint(&trained.model);
    let path = config.paths.ranker_checkpoint();
    ckpt.save_path(&path).map_err(data)?;
    println!("wrote {} ({})", path.display(), ckpt.fingerprint());
    println!("trained on {} labeled group(s)", labeled.len() - trained.skipped_groups.len());
    Ok(())
}

pub fn rank(mut config: RunConfig, top_k: Option<usize>) -> Result<(), CliError> {
    if top_k.is_some() {
        config.ranker.top_k = top_k;
    }
    config.require_inputs(false)?;
    config.write_resolved()?;
    let dataset = load_dataset(&config)?;
    let (groups, _) = ranker_groups(&config, &dataset)?;
    let model = load_ranker(&config)?;

    let k = config.ranker.top_k.unwrap_or(1);
    let mut tsv = String::from("query\tcandidate\trank\tscore\tpredicted\n");
    for group in &groups {
        let ranked = encsum::ranker::rank(group, &model).map_err(data)?;
        for (position, (candidate, score)) in ranked.entries.iter().enumerate() {
            let _ = writeln!(
                tsv,
                "{}\t{}\t{}\t{}\t{}",
                group.query_id,
                candidate,
                position + 1,
                score,
                u8::from(position < k)
            );
        }
    }
    write_file(&config.paths.output_dir.join("predictions.tsv"), &tsv)
}

pub fn evaluate(config: RunConfig, threads: usize) -> Result<(), CliError> {
    config.require_inputs(false)?;
    config.write_resolved()?;
    let dataset = load_dataset(&config)?;

    let retrieval = evaluate_retrieval(&config, &dataset)?;
    let rouge = evaluate_rouge(&config, &dataset, threads)?;
    if retrieval.is_none() && rouge.is_none() {
        return Err(CliError::Data(
            "nothing to evaluate: no noticed labels and no gold summaries with a trained scorer"
                .into(),
        ));
    }

    let json = serde_json::json!({
        "retrieval": retrieval,
        "rouge_table": rouge,
    });
    write_file(
        &config.paths.output_dir.join("report.json"),
        &(serde_json::to_string_pretty(&json).expect("report serializes") + "\n"),
    )?;

    let mut text = String::new();
    if let Some(report) = &retrieval {
        text.push_str(&report.render_text());
        text.push('\n');
        println!(
            "leave-one-out over {} queries: MAP {:.4}, macro F1 {:.4}",
            report.per_query.len(),
            report.map,
            report.f1
        );
    }
    if let Some(rows) = &rouge {
        text.push_str(&render_rouge_table(rows));
        text.push('\n');
    }
    write_file(&config.paths.output_dir.join("report.txt"), &text)
}

/// Leave-one-out retrieval metrics over the labeled groups; None when the
/// manifest carries no gold.
fn evaluate_retrieval(
    config: &RunConfig,
    dataset: &Dataset,
) -> Result<Option<RetrievalReport>, CliError> {
    if dataset.groups.iter().all(|g| g.noticed.is_none()) {
        return Ok(None);
    }
    let (groups, unlabeled) = ranker_groups(config, dataset)?;
    let labeled: Vec<QueryGroup> =
        groups.into_iter().filter(|g| !unlabeled.contains(&g.query_id)).collect();
    let report = leave_one_out(&labeled, &config.ranker).map_err(data)?;
    Ok(Some(report))
}

/// ROUGE table over generated summaries versus gold summaries; None when no
/// document has a gold summary or no scorer checkpoint exists yet.
fn evaluate_rouge(
    config: &RunConfig,
    dataset: &Dataset,
    threads: usize,
) -> Result<Option<Vec<RougeRow>>, CliError> {
    let with_gold: Vec<&CaseDocument> =
        dataset.documents.values().filter(|d| d.summary.is_some()).collect();
    if with_gold.is_empty() || !config.paths.scorer_checkpoint().exists() {
        return Ok(None);
    }
    let table = load_table(config)?;
    let params = load_scorer(config)?;

    let mut rows = Vec::with_capacity(ROUGE_TABLE_THRESHOLDS.len());
    for &threshold in &ROUGE_TABLE_THRESHOLDS {
        let pairs: Vec<(Vec<Token>, Vec<Token>)> = parallel_map(&with_gold, threads, |doc| {
            let generated = generate_summary(doc, &table, &params, threshold);
            let candidate: Vec<Token> =
                generated.tokens(doc).into_iter().cloned().collect();
            let reference: Vec<Token> = doc
                .summary_sentences()
                .expect("filtered to documents with summaries")
                .iter()
                .flat_map(|s| s.iter().cloned())
                .collect();
            (candidate, reference)
        });
        rows.push(rouge_table_row(
            threshold,
            pairs.iter().map(|(c, r)| (c.as_slice(), r.as_slice())),
        ));
    }
    Ok(Some(rows))
}

pub fn gradcheck(seeds: u64, tolerance: f64) -> Result<(), CliError> {
    if !(tolerance > 0.0) {
        return Err(CliError::Config(format!("tolerance must be positive, got {tolerance}")));
    }
    if seeds == 0 {
        return Err(CliError::Config("need at least one seed".into()));
    }
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut excluded = 0;
    for seed in 0..seeds {
        let report = tiny_model_check(seed);
        if !report.max_rel_error.is_finite() {
            return Err(CliError::Numeric(format!(
                "seed {seed}: non-finite gradient error"
            )));
        }
        println!(
            "seed {seed}: max relative error {:.3e} over {} coordinates ({} excluded at kinks)",
            report.max_rel_error, report.checked, report.excluded
        );
        worst = worst.max(report.max_rel_error);
        checked += report.checked;
        excluded += report.excluded;
    }
    println!(
        "max relative gradient error {worst:.3e} over {seeds} seeds ({checked} coordinates, {excluded} excluded)"
    );
    if worst > tolerance {
        return Err(CliError::Numeric(format!(
            "max relative gradient error {worst:.3e} exceeds tolerance {tolerance:.1e}"
        )));
    }
    Ok(())
}
