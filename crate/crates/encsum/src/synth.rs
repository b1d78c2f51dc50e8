//! Seeded synthetic corpus generator: documents with keyword-dense
//! summaries for scorer training, plus a retrieval overlay with planted
//! relevance of two kinds.
//!
//! Vocabulary: `topics × keywords_per_topic` keyword strings (`t03k07`)
//! plus `filler_words` filler strings (`f042`). Each topic's keywords sit
//! near a shared embedding centroid but split into two lexically disjoint
//! halves, A and B. Every keyword also carries a common component that
//! filler vectors lack, so summary phrases (keyword-dense) are separable
//! from document phrases (keyword-sparse).
//!
//! Retrieval overlay, two queries per topic: each A-flavor query document
//! runs against two same-topic B-flavor documents (noticed, visible only
//! through embeddings: zero keyword overlap) and the topic's different-topic
//! partner sharing a verbatim filler quote (noticed, visible only
//! lexically), plus distractors from other topics. Quote vocabulary is
//! reserved per topic and never used in ordinary text. Topics recur across
//! queries, so a ranker trained with any one query held out has still seen
//! that query's topic.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{parse_case_document, CaseDocument, QueryGroup};
use crate::embed::{EmbeddingTable, OovPolicy};

/// Tokens in each planted verbatim quote.
pub const QUOTE_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub documents: usize,
    pub topics: usize,
    pub keywords_per_topic: usize,
    pub filler_words: usize,
    pub embed_dim: usize,
    pub paragraphs_per_doc: usize,
    pub sentences_per_paragraph: usize,
    pub tokens_per_sentence: usize,
    pub summary_sentences: usize,
    pub paragraph_keyword_density: f64,
    pub summary_keyword_density: f64,
    pub candidates_per_query: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            documents: 200,
            topics: 20,
            keywords_per_topic: 15,
            filler_words: 200,
            embed_dim: 24,
            paragraphs_per_doc: 5,
            sentences_per_paragraph: 2,
            tokens_per_sentence: 10,
            summary_sentences: 2,
            paragraph_keyword_density: 0.3,
            summary_keyword_density: 0.95,
            candidates_per_query: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    /// Parsed form of exactly the files `write_to_dir` renders.
    pub documents: Vec<CaseDocument>,
    pub raw_files: BTreeMap<String, String>,
    /// Quantized embedding rows in file order.
    pub embedding_rows: Vec<(String, Vec<f64>)>,
    /// Two retrieval groups per topic, gold labels included.
    pub groups: Vec<QueryGroup>,
    pub scorer_train_ids: Vec<String>,
    pub scorer_holdout_ids: Vec<String>,
}

pub fn keyword(topic: usize, k: usize) -> String {
    format!("t{topic:02}k{k:02}")
}

pub fn filler(i: usize) -> String {
    format!("f{i:03}")
}

fn doc_id(i: usize) -> String {
    format!("case{i:03}")
}

fn quantize(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// Mutually orthogonal unit centroids (Gram-Schmidt over random draws) so
/// topics stay maximally separated; requires `count <= dim`.
fn orthonormal_centroids(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(count);
    while centroids.len() < count {
        let mut v = random_unit(rng, dim);
        for existing in &centroids {
            let proj: f64 = v.iter().zip(existing).map(|(a, b)| a * b).sum();
            for (x, e) in v.iter_mut().zip(existing) {
                *x -= proj * e;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            centroids.push(v.iter().map(|x| x / norm).collect());
        }
    }
    centroids
}

impl SynthConfig {
    fn validate(&self) {
        assert!(self.topics >= 2 && self.topics <= 99, "topics out of range");
        assert!(self.keywords_per_topic >= 2 && self.keywords_per_topic <= 99);
        assert!(self.documents >= 8 * self.topics, "too few documents for the overlay");
        assert!(self.filler_words <= 999);
        assert!(
            self.filler_words >= QUOTE_LEN * self.topics + 16,
            "filler pool too small for reserved quotes"
        );
        assert!(self.candidates_per_query >= 4);
        let per_topic = self.documents / self.topics;
        assert!(
            self.documents - per_topic - 1 >= self.candidates_per_query - 3,
            "not enough distractor documents"
        );
        assert!(self.embed_dim >= self.topics, "centroids need embed_dim >= topics");
        assert!(self.paragraphs_per_doc >= 1 && self.sentences_per_paragraph >= 1);
        assert!(self.tokens_per_sentence >= QUOTE_LEN);
        assert!(self.summary_sentences >= 1);
        for d in [self.paragraph_keyword_density, self.summary_keyword_density] {
            assert!((0.0..1.0).contains(&d) || d == 1.0);
        }
    }

    fn topic_of(&self, doc: usize) -> usize {
        doc % self.topics
    }

    fn is_flavor_a(&self, doc: usize) -> bool {
        (doc / self.topics) % 2 == 0
    }

    /// Keyword index range of the document's half: A-flavor documents use
    /// the first half, B-flavor the second; the halves share no strings.
    fn half_range(&self, doc: usize) -> std::ops::Range<usize> {
        let split = (self.keywords_per_topic + 1) / 2;
        if self.is_flavor_a(doc) {
            0..split
        } else {
            split..self.keywords_per_topic
        }
    }

    /// Fillers below this index appear in ordinary text; the rest are
    /// reserved for quotes.
    fn free_fillers(&self) -> usize {
        self.filler_words - QUOTE_LEN * self.topics
    }

    fn quote_tokens(&self, topic: usize) -> Vec<String> {
        (0..QUOTE_LEN).map(|k| filler(self.free_fillers() + topic * QUOTE_LEN + k)).collect()
    }

    /// The different-topic document that shares a topic's quote.
    fn quote_partner(&self, topic: usize) -> usize {
        let shift = 1 + self.topics / 3;
        5 * self.topics + (topic + shift) % self.topics
    }

    /// Each topic fields two query documents so that every query leaves
    /// a same-topic sibling behind in any leave-one-out training split.
    fn queries_of(&self, topic: usize) -> [usize; 2] {
        [topic, topic + 2 * self.topics]
    }

    /// B-flavor partners of a query document, disjoint between the two
    /// queries of a topic.
    fn latent_partners(&self, query_doc: usize) -> [usize; 2] {
        let topic = self.topic_of(query_doc);
        let k = query_doc / (2 * self.topics);
        [topic + (4 * k + 1) * self.topics, topic + (4 * k + 3) * self.topics]
    }
}

/// A sentence with exactly `round(density * len)` keyword tokens placed at
/// evenly spread positions. Identities are random but the count and layout
/// are fixed, which keeps window composition, and with it encoding norms,
/// homogeneous across documents.
fn draw_sentence(
    rng: &mut ChaCha8Rng,
    config: &SynthConfig,
    topic: usize,
    half: &std::ops::Range<usize>,
    density: f64,
) -> Vec<String> {
    let n = config.tokens_per_sentence;
    let keywords = ((density * n as f64).round() as usize).min(n);
    let mut is_keyword = vec![false; n];
    for j in 0..keywords {
        is_keyword[(2 * j + 1) * n / (2 * keywords)] = true;
    }
    is_keyword
        .iter()
        .map(|&kw| {
            if kw {
                keyword(topic, rng.gen_range(half.clone()))
            } else {
                filler(rng.gen_range(0..config.free_fillers()))
            }
        })
        .collect()
}

fn render_case(summary: &[Vec<String>], paragraphs: &[Vec<Vec<String>>]) -> String {
    let mut out = String::from("Summary:\n");
    for sentence in summary {
        out.push_str(&sentence.join(" "));
        out.push_str(".\n");
    }
    out.push_str("\nParagraphs:\n");
    for (p, sentences) in paragraphs.iter().enumerate() {
        let rendered: Vec<String> = sentences.iter().map(|s| format!("{}.", s.join(" "))).collect();
        out.push_str(&format!("[{}] {}\n", p + 1, rendered.join(" ")));
    }
    out
}

pub fn generate(config: &SynthConfig) -> SynthCorpus {
    config.validate();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.embed_dim;

    // Keywords share a common direction that fillers lack; each topic adds
    // its own orthogonal centroid so the two halves of a topic stay close
    // to each other and far from every other topic.
    let shared: Vec<f64> = vec![1.0 / (dim as f64).sqrt(); dim];
    let centroids = orthonormal_centroids(&mut rng, config.topics, dim);
    let mut embedding_rows: Vec<(String, Vec<f64>)> = Vec::new();
    for (topic, centroid) in centroids.iter().enumerate() {
        for k in 0..config.keywords_per_topic {
            let noise = random_unit(&mut rng, dim);
            let vector: Vec<f64> = (0..dim)
                .map(|i| quantize(centroid[i] + 0.10 * noise[i] + 0.12 * shared[i]))
                .collect();
            embedding_rows.push((keyword(topic, k), vector));
        }
    }
    for i in 0..config.filler_words {
        let noise = random_unit(&mut rng, dim);
        let vector: Vec<f64> = noise.iter().map(|x| quantize(0.22 * x)).collect();
        embedding_rows.push((filler(i), vector));
    }

    // Document bodies: keyword-dense summaries, keyword-sparse paragraphs.
    let mut summaries: Vec<Vec<Vec<String>>> = Vec::with_capacity(config.documents);
    let mut bodies: Vec<Vec<Vec<Vec<String>>>> = Vec::with_capacity(config.documents);
    for doc in 0..config.documents {
        let topic = config.topic_of(doc);
        let half = config.half_range(doc);
        let summary: Vec<Vec<String>> = (0..config.summary_sentences)
            .map(|_| {
                draw_sentence(&mut rng, config, topic, &half, config.summary_keyword_density)
            })
            .collect();
        let body: Vec<Vec<Vec<String>>> = (0..config.paragraphs_per_doc)
            .map(|_| {
                (0..config.sentences_per_paragraph)
                    .map(|_| {
                        draw_sentence(
                            &mut rng,
                            config,
                            topic,
                            &half,
                            config.paragraph_keyword_density,
                        )
                    })
                    .collect()
            })
            .collect();
        summaries.push(summary);
        bodies.push(body);
    }

    // Plant each topic's quote verbatim in both of its queries and their
    // shared partner, replacing the last sentence of the middle paragraph.
    for topic in 0..config.topics {
        let quote = config.quote_tokens(topic);
        let [q1, q2] = config.queries_of(topic);
        for doc in [q1, q2, config.quote_partner(topic)] {
            let body = &mut bodies[doc];
            let mid = body.len() / 2;
            let last = body[mid].len() - 1;
            body[mid][last] = quote.clone();
        }
    }

    let mut raw_files = BTreeMap::new();
    let mut documents = Vec::with_capacity(config.documents);
    for doc in 0..config.documents {
        let id = doc_id(doc);
        let raw = render_case(&summaries[doc], &bodies[doc]);
        documents.push(
            parse_case_document(&id, &raw).expect("generated case files always parse"),
        );
        raw_files.insert(id, raw);
    }

    // Retrieval overlay: two A-flavor queries per topic, each with three
    // noticed partners and sampled different-topic distractors.
    let mut groups = Vec::with_capacity(2 * config.topics);
    for topic in 0..config.topics {
        let quote_partner = config.quote_partner(topic);
        for query_doc in config.queries_of(topic) {
            let latent = config.latent_partners(query_doc);
            let mut candidates: Vec<String> =
                [latent[0], latent[1], quote_partner].iter().map(|&d| doc_id(d)).collect();
            let pool: Vec<usize> = (0..config.documents)
                .filter(|&d| config.topic_of(d) != topic && d != quote_partner)
                .collect();
            let picks =
                rand::seq::index::sample(&mut rng, pool.len(), config.candidates_per_query - 3);
            for p in picks.iter() {
                candidates.push(doc_id(pool[p]));
            }
            let noticed = candidates[..3].iter().cloned().collect();
            groups.push(QueryGroup {
                query_id: doc_id(query_doc),
                candidates,
                noticed: Some(noticed),
            });
        }
    }

    let mut scorer_train_ids = Vec::new();
    let mut scorer_holdout_ids = Vec::new();
    for doc in 0..config.documents {
        if doc % 5 == 4 {
            scorer_holdout_ids.push(doc_id(doc));
        } else {
            scorer_train_ids.push(doc_id(doc));
        }
    }

    SynthCorpus {
        config: config.clone(),
        documents,
        raw_files,
        embedding_rows,
        groups,
        scorer_train_ids,
        scorer_holdout_ids,
    }
}

/// One split member: the id plus where its case file lives, relative to the
/// splits file. The retrieval manifest only covers documents that appear in
/// query groups, so scorer splits carry their own paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub id: String,
    pub path: std::path::PathBuf,
}

#[derive(Serialize, Deserialize)]
struct SplitsFile {
    scorer_train: Vec<SplitEntry>,
    scorer_holdout: Vec<SplitEntry>,
}

fn split_entries(ids: &[String]) -> Vec<SplitEntry> {
    ids.iter()
        .map(|id| SplitEntry { id: id.clone(), path: format!("cases/{id}.txt").into() })
        .collect()
}

impl SynthCorpus {
    pub fn document(&self, id: &str) -> Option<&CaseDocument> {
        self.documents.iter().find(|d| d.id == id)
    }

    pub fn embedding_table(&self) -> EmbeddingTable {
        let vectors = self.embedding_rows.iter().cloned().collect();
        EmbeddingTable::from_vectors(self.config.embed_dim, vectors, OovPolicy::Zero)
    }

    /// Writes `cases/<id>.txt`, `embeddings.txt`, `manifest.json`,
    /// `splits.json`, and `synth-config.json` under `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> io::Result<()> {
        let cases = dir.join("cases");
        fs::create_dir_all(&cases)?;
        for (id, raw) in &self.raw_files {
            fs::write(cases.join(format!("{id}.txt")), raw)?;
        }

        let mut embeddings = String::new();
        for (word, vector) in &self.embedding_rows {
            embeddings.push_str(word);
            for v in vector {
                embeddings.push_str(&format!(" {v:.6}"));
            }
            embeddings.push('\n');
        }
        fs::write(dir.join("embeddings.txt"), embeddings)?;

        let queries: Vec<serde_json::Value> = self
            .groups
            .iter()
            .map(|g| {
                let candidates: Vec<serde_json::Value> = g
                    .candidates
                    .iter()
                    .map(|id| serde_json::json!({"id": id, "path": format!("cases/{id}.txt")}))
                    .collect();
                let noticed: Vec<&String> =
                    g.noticed.as_ref().map(|n| n.iter().collect()).unwrap_or_default();
                serde_json::json!({
                    "id": g.query_id,
                    "path": format!("cases/{}.txt", g.query_id),
                    "candidates": candidates,
                    "noticed": noticed,
                })
            })
            .collect();
        let manifest = serde_json::json!({ "queries": queries });
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        )?;

        let splits = SplitsFile {
            scorer_train: split_entries(&self.scorer_train_ids),
            scorer_holdout: split_entries(&self.scorer_holdout_ids),
        };
        fs::write(
            dir.join("splits.json"),
            serde_json::to_string_pretty(&splits).expect("splits serialize"),
        )?;
        fs::write(
            dir.join("synth-config.json"),
            serde_json::to_string_pretty(&self.config).expect("config serializes"),
        )?;
        Ok(())
    }
}

/// Reads `splits.json` as written by [`SynthCorpus::write_to_dir`] and
/// resolves the entries' relative paths against the file's directory.
pub fn load_splits(path: &Path) -> io::Result<(Vec<SplitEntry>, Vec<SplitEntry>)> {
    let raw = fs::read_to_string(path)?;
    let mut splits: SplitsFile = serde_json::from_str(&raw)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    if let Some(base) = path.parent() {
        for entry in splits.scorer_train.iter_mut().chain(&mut splits.scorer_holdout) {
            if entry.path.is_relative() {
                entry.path = base.join(&entry.path);
            }
        }
    }
    Ok((splits.scorer_train, splits.scorer_holdout))
}
