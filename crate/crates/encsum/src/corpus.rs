//! Case document parsing and dataset loading.
//!
//! A case file is plain text: an optional summary block above the first
//! numbered paragraph (`[1] ...`), then the numbered paragraphs themselves.
//! Unedited cases carry a literal notice instead of a summary. A dataset is
//! described by a JSON manifest listing query documents, their candidate
//! pools, and (for training/evaluation) the noticed candidate ids.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

/// Literal notice carried by cases that ship without an expert summary.
pub const UNEDITED_NOTICE: &str = "This case is unedited, therefore contains no summary";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing file: {path}")]
    MissingFile { path: PathBuf },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document {id}: {reason}")]
    MalformedDocument { id: String, reason: String },
    #[error("invalid manifest: {reason}")]
    InvalidManifest { reason: String },
    #[error("query {query}: noticed id {id} is not among its candidates")]
    GoldLabelNotInCandidates { query: String, id: String },
}

// ---------------------------------------------------------------------------
// Tokens and sentences
// ---------------------------------------------------------------------------

/// Lowercased surface token with no internal whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    /// Builds a token, lowercasing the input. Panics on empty or
    /// whitespace-carrying input; callers tokenize first.
    pub fn new(surface: impl AsRef<str>) -> Token {
        let s = surface.as_ref().to_lowercase();
        assert!(!s.is_empty(), "token must be non-empty");
        assert!(!s.chars().any(char::is_whitespace), "token must not contain whitespace");
        Token(s)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::ops::Deref for Token {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

/// Non-empty token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence(Vec<Token>);

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Sentence {
        assert!(!tokens.is_empty(), "sentence must contain at least one token");
        Sentence(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl std::ops::Deref for Sentence {
    type Target = [Token];

    fn deref(&self) -> &[Token] {
        &self.0
    }
}

/// Numbered paragraph: marker id plus at least one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

/// Parsed case document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseDocument {
    pub id: String,
    pub paragraphs: Vec<Paragraph>,
    /// Expert summary sentences; absent for unedited cases.
    pub summary: Option<Vec<Sentence>>,
}

impl CaseDocument {
    /// First sentence of each paragraph, exactly one entry per paragraph.
    pub fn lead_sentences(&self) -> Vec<&Sentence> {
        self.paragraphs.iter().map(|p| &p.sentences[0]).collect()
    }

    /// Paragraph sentences flattened in document order.
    pub fn paragraph_sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.paragraphs.iter().flat_map(|p| p.sentences.iter())
    }

    /// Total token count across paragraph sentences.
    pub fn paragraph_token_count(&self) -> usize {
        self.paragraph_sentences().map(|s| s.len()).sum()
    }

    pub fn summary_sentences(&self) -> Option<&[Sentence]> {
        self.summary.as_deref()
    }
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits raw text into sentences of lowercased tokens.
///
/// Sentences end at `.`, `!`, or `?` followed by whitespace (or end of
/// input). Tokens are whitespace-separated with leading and trailing ASCII
/// punctuation detached as their own tokens; internal punctuation (hyphens,
/// decimal points) stays attached. Empty sentences are dropped. The rule is
/// deliberately simple: abbreviations like "s. 44" split a sentence, and
/// that is accepted.
pub fn tokenize(text: &str) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    for raw in text.split_whitespace() {
        let lowered = raw.to_lowercase();
        split_punctuation(&lowered, &mut current);
        if lowered.chars().next_back().is_some_and(is_terminal) && !current.is_empty() {
            sentences.push(Sentence::new(std::mem::take(&mut current)));
        }
    }
    if !current.is_empty() {
        sentences.push(Sentence::new(current));
    }
    sentences
}

/// Appends the tokens of one whitespace-delimited word, peeling leading and
/// trailing ASCII punctuation characters into separate tokens.
fn split_punctuation(word: &str, out: &mut Vec<Token>) {
    let chars: Vec<char> = word.chars().collect();
    let mut start = 0;
    let mut end = chars.len();
    while start < end && chars[start].is_ascii_punctuation() {
        start += 1;
    }
    while end > start && chars[end - 1].is_ascii_punctuation() {
        end -= 1;
    }
    if start == end {
        // All punctuation: each character is its own token.
        for c in &chars {
            out.push(Token(c.to_string()));
        }
        return;
    }
    for c in &chars[..start] {
        out.push(Token(c.to_string()));
    }
    out.push(Token(chars[start..end].iter().collect()));
    for c in &chars[end..] {
        out.push(Token(c.to_string()));
    }
}

// ---------------------------------------------------------------------------
// Case document parser
// ---------------------------------------------------------------------------

/// Returns the paragraph id and the text after the marker for lines shaped
/// like `[12] remainder`.
fn paragraph_marker(line: &str) -> Option<(&str, &str)> {
    let trimmed = line.trim_start();
    let rest = trimmed.strip_prefix('[')?;
    let close = rest.find(']')?;
    let digits = &rest[..close];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((digits, &rest[close + 1..]))
}

fn is_section_label(line: &str) -> bool {
    matches!(line.trim(), "Summary:" | "Paragraphs:")
}

/// Parses one case file.
///
/// Text above the first numbered paragraph becomes the summary (section
/// labels like `Summary:` are dropped); documents carrying
/// [`UNEDITED_NOTICE`] get no summary. Paragraphs that tokenize to nothing
/// are dropped; a document without any surviving paragraph is malformed.
pub fn parse_case_document(id: &str, raw: &str) -> Result<CaseDocument, CorpusError> {
    let mut preamble: Vec<&str> = Vec::new();
    // (paragraph id, accumulated lines)
    let mut paragraphs_raw: Vec<(String, String)> = Vec::new();
    for line in raw.lines() {
        if let Some((pid, rest)) = paragraph_marker(line) {
            paragraphs_raw.push((pid.to_string(), rest.to_string()));
        } else if let Some((_, text)) = paragraphs_raw.last_mut() {
            text.push('\n');
            text.push_str(line);
        } else if !is_section_label(line) {
            preamble.push(line);
        }
    }

    let mut paragraphs = Vec::new();
    for (pid, text) in &paragraphs_raw {
        let sentences = tokenize(text);
        if !sentences.is_empty() {
            paragraphs.push(Paragraph { id: pid.clone(), sentences });
        }
    }
    if paragraphs.is_empty() {
        return Err(CorpusError::MalformedDocument {
            id: id.to_string(),
            reason: "no numbered paragraph with content".to_string(),
        });
    }

    let summary = if raw.contains(UNEDITED_NOTICE) {
        None
    } else {
        let sentences = tokenize(&preamble.join("\n"));
        if sentences.is_empty() {
            None
        } else {
            Some(sentences)
        }
    };

    Ok(CaseDocument { id: id.to_string(), paragraphs, summary })
}

// ---------------------------------------------------------------------------
// Manifest and dataset
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct ManifestFile {
    queries: Vec<ManifestQuery>,
}

#[derive(Debug, Deserialize)]
struct ManifestQuery {
    id: String,
    path: String,
    candidates: Vec<ManifestCandidate>,
    #[serde(default)]
    noticed: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
struct ManifestCandidate {
    id: String,
    path: String,
}

/// One query with its candidate pool.
#[derive(Debug, Clone)]
pub struct QueryGroup {
    pub query_id: String,
    /// Candidate ids in manifest order.
    pub candidates: Vec<String>,
    /// Noticed (relevant) candidate ids; `None` means inference mode.
    pub noticed: Option<BTreeSet<String>>,
}

/// Loaded dataset: every referenced document parsed once, keyed by id.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub documents: BTreeMap<String, CaseDocument>,
    pub groups: Vec<QueryGroup>,
}

impl Dataset {
    /// Loads a manifest and every document it references. Paths in the
    /// manifest are resolved relative to the manifest's directory.
    pub fn load(manifest_path: &Path) -> Result<Dataset, CorpusError> {
        let raw = read_file(manifest_path)?;
        let manifest: ManifestFile =
            serde_json::from_str(&raw).map_err(|e| CorpusError::InvalidManifest {
                reason: e.to_string(),
            })?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));

        let mut paths: BTreeMap<String, PathBuf> = BTreeMap::new();
        let mut groups = Vec::new();
        for query in &manifest.queries {
            if query.candidates.is_empty() {
                return Err(CorpusError::InvalidManifest {
                    reason: format!("query {} has an empty candidate list", query.id),
                });
            }
            record_path(&mut paths, &query.id, base.join(&query.path))?;
            let mut candidate_ids = Vec::new();
            for cand in &query.candidates {
                record_path(&mut paths, &cand.id, base.join(&cand.path))?;
                if candidate_ids.contains(&cand.id) {
                    return Err(CorpusError::InvalidManifest {
                        reason: format!(
                            "query {} lists candidate {} twice",
                            query.id, cand.id
                        ),
                    });
                }
                candidate_ids.push(cand.id.clone());
            }
            let noticed = match &query.noticed {
                None => None,
                Some(ids) => {
                    let mut set = BTreeSet::new();
                    for id in ids {
                        if !candidate_ids.contains(id) {
                            return Err(CorpusError::GoldLabelNotInCandidates {
                                query: query.id.clone(),
                                id: id.clone(),
                            });
                        }
                        set.insert(id.clone());
                    }
                    Some(set)
                }
            };
            groups.push(QueryGroup { query_id: query.id.clone(), candidates: candidate_ids, noticed });
        }

        let mut documents = BTreeMap::new();
        for (id, path) in &paths {
            let raw = read_file(path)?;
            documents.insert(id.clone(), parse_case_document(id, &raw)?);
        }
        Ok(Dataset { documents, groups })
    }

    pub fn document(&self, id: &str) -> Option<&CaseDocument> {
        self.documents.get(id)
    }

    /// Ids of documents that carry an expert summary, in id order.
    pub fn summary_document_ids(&self) -> Vec<&str> {
        self.documents
            .values()
            .filter(|d| d.summary.is_some())
            .map(|d| d.id.as_str())
            .collect()
    }
}

fn record_path(
    paths: &mut BTreeMap<String, PathBuf>,
    id: &str,
    path: PathBuf,
) -> Result<(), CorpusError> {
    match paths.get(id) {
        None => {
            paths.insert(id.to_string(), path);
            Ok(())
        }
        Some(existing) if *existing == path => Ok(()),
        Some(existing) => Err(CorpusError::InvalidManifest {
            reason: format!(
                "id {} maps to both {} and {}",
                id,
                existing.display(),
                path.display()
            ),
        }),
    }
}

fn read_file(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CorpusError::MissingFile { path: path.to_path_buf() }
        } else {
            CorpusError::Io { path: path.to_path_buf(), source: e }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toks(sentence: &Sentence) -> Vec<&str> {
        sentence.tokens().iter().map(|t| t.as_str()).collect()
    }

    #[test]
    fn tokenize_lowercases_and_detaches_terminal_punctuation() {
        let sents = tokenize("The Court ORDERS that the appeal be dismissed.");
        assert_eq!(sents.len(), 1);
        assert_eq!(
            toks(&sents[0]),
            vec!["the", "court", "orders", "that", "the", "appeal", "be", "dismissed", "."]
        );
    }

    #[test]
    fn tokenize_splits_on_terminal_punctuation_before_whitespace() {
        let sents = tokenize("First point. Second point? Third!");
        assert_eq!(sents.len(), 3);
        assert_eq!(toks(&sents[0]), vec!["first", "point", "."]);
        assert_eq!(toks(&sents[1]), vec!["second", "point", "?"]);
        assert_eq!(toks(&sents[2]), vec!["third", "!"]);
    }

    #[test]
    fn tokenize_oversplits_abbreviations_by_design() {
        let sents = tokenize("See s. 44 of the Act.");
        assert_eq!(sents.len(), 2);
        assert_eq!(toks(&sents[0]), vec!["see", "s", "."]);
        assert_eq!(toks(&sents[1]), vec!["44", "of", "the", "act", "."]);
    }

    #[test]
    fn tokenize_detaches_wrapping_punctuation_and_keeps_internal() {
        let sents = tokenize("(state-of-the-art), 3.5 holds");
        assert_eq!(sents.len(), 1);
        assert_eq!(toks(&sents[0]), vec!["(", "state-of-the-art", ")", ",", "3.5", "holds"]);
    }

    #[test]
    fn tokenize_empty_input_yields_no_sentences() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n\t ").is_empty());
    }

    const EDITED_CASE: &str = "Summary:\nThe appeal was dismissed. Costs follow.\n\nParagraphs:\n[1] The applicant sought review. The court declined.\n[2] Costs were awarded.\n";

    #[test]
    fn parse_extracts_summary_and_paragraphs() {
        let doc = parse_case_document("c1", EDITED_CASE).unwrap();
        let summary = doc.summary.as_ref().unwrap();
        assert_eq!(summary.len(), 2);
        assert_eq!(toks(&summary[0]), vec!["the", "appeal", "was", "dismissed", "."]);
        assert_eq!(doc.paragraphs.len(), 2);
        assert_eq!(doc.paragraphs[0].id, "1");
        assert_eq!(doc.paragraphs[0].sentences.len(), 2);
        assert_eq!(doc.paragraphs[1].id, "2");
    }

    #[test]
    fn parse_unedited_notice_means_no_summary() {
        let raw = format!("{UNEDITED_NOTICE}\n[1] The facts are brief.\n");
        let doc = parse_case_document("c2", &raw).unwrap();
        assert!(doc.summary.is_none());
        assert_eq!(doc.paragraphs.len(), 1);
    }

    #[test]
    fn parse_without_numbered_paragraphs_is_malformed() {
        let err = parse_case_document("c3", "Just prose without markers.").unwrap_err();
        assert!(matches!(err, CorpusError::MalformedDocument { .. }));
    }

    #[test]
    fn parse_multiline_paragraphs_and_missing_preamble() {
        let raw = "[1] A first sentence\nthat continues here. And ends.\n[2] Second paragraph.";
        let doc = parse_case_document("c4", raw).unwrap();
        assert!(doc.summary.is_none());
        assert_eq!(doc.paragraphs[0].sentences.len(), 2);
        assert_eq!(
            toks(&doc.paragraphs[0].sentences[0]),
            vec!["a", "first", "sentence", "that", "continues", "here", "."]
        );
    }

    #[test]
    fn lead_sentences_has_exactly_one_entry_per_paragraph() {
        let doc = parse_case_document("c5", EDITED_CASE).unwrap();
        let leads = doc.lead_sentences();
        assert_eq!(leads.len(), doc.paragraphs.len());
        assert_eq!(toks(leads[0]), vec!["the", "applicant", "sought", "review", "."]);
    }

    fn write_case(dir: &Path, name: &str, body: &str) -> String {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        name.to_string()
    }

    #[test]
    fn dataset_load_resolves_relative_paths_and_gold() {
        let dir = tempfile::tempdir().unwrap();
        write_case(dir.path(), "q.txt", EDITED_CASE);
        write_case(dir.path(), "a.txt", "[1] Candidate a text.");
        write_case(dir.path(), "b.txt", "[1] Candidate b text.");
        let manifest = serde_json::json!({
            "queries": [{
                "id": "q", "path": "q.txt",
                "candidates": [
                    {"id": "a", "path": "a.txt"},
                    {"id": "b", "path": "b.txt"}
                ],
                "noticed": ["b"]
            }]
        });
        let mpath = dir.path().join("manifest.json");
        fs::write(&mpath, serde_json::to_string(&manifest).unwrap()).unwrap();

        let dataset = Dataset::load(&mpath).unwrap();
        assert_eq!(dataset.documents.len(), 3);
        assert_eq!(dataset.groups.len(), 1);
        let group = &dataset.groups[0];
        assert_eq!(group.candidates, vec!["a", "b"]);
        assert!(group.noticed.as_ref().unwrap().contains("b"));
        assert_eq!(dataset.summary_document_ids(), vec!["q"]);
    }

    #[test]
    fn dataset_load_rejects_gold_outside_candidates() {
        let dir = tempfile::tempdir().unwrap();
        write_case(dir.path(), "q.txt", EDITED_CASE);
        write_case(dir.path(), "a.txt", "[1] Candidate a text.");
        let manifest = serde_json::json!({
            "queries": [{
                "id": "q", "path": "q.txt",
                "candidates": [{"id": "a", "path": "a.txt"}],
                "noticed": ["zz"]
            }]
        });
        let mpath = dir.path().join("manifest.json");
        fs::write(&mpath, serde_json::to_string(&manifest).unwrap()).unwrap();
        let err = Dataset::load(&mpath).unwrap_err();
        assert!(matches!(err, CorpusError::GoldLabelNotInCandidates { .. }));
    }

    #[test]
    fn dataset_load_reports_missing_document_file() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = serde_json::json!({
            "queries": [{
                "id": "q", "path": "nope.txt",
                "candidates": [{"id": "a", "path": "also-nope.txt"}]
            }]
        });
        let mpath = dir.path().join("manifest.json");
        fs::write(&mpath, serde_json::to_string(&manifest).unwrap()).unwrap();
        let err = Dataset::load(&mpath).unwrap_err();
        assert!(matches!(err, CorpusError::MissingFile { .. }));
    }

    #[test]
    fn dataset_load_without_noticed_is_inference_mode() {
        let dir = tempfile::tempdir().unwrap();
        write_case(dir.path(), "q.txt", EDITED_CASE);
        write_case(dir.path(), "a.txt", "[1] Candidate a text.");
        let manifest = serde_json::json!({
            "queries": [{
                "id": "q", "path": "q.txt",
                "candidates": [{"id": "a", "path": "a.txt"}]
            }]
        });
        let mpath = dir.path().join("manifest.json");
        fs::write(&mpath, serde_json::to_string(&manifest).unwrap()).unwrap();
        let dataset = Dataset::load(&mpath).unwrap();
        assert!(dataset.groups[0].noticed.is_none());
    }
}
