//! Baseline latent document encoders (embedding poolings, imported external
//! vectors, the score-weighted encoder), scope restriction to the expert
//! summary, and relevance-vector assembly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CaseDocument, Paragraph, Sentence, Token};
use crate::embed::EmbeddingTable;
use crate::encoding::encode_document;
use crate::scorer::ScorerParams;

#[derive(Debug, Error)]
pub enum LatentError {
    #[error("empty scope: no tokens to pool")]
    EmptyScope,
    #[error("line {line}: vector has dimension {found}, expected {expected}")]
    InconsistentDimension { line: usize, expected: usize, found: usize },
    #[error("duplicate vector id {id}")]
    DuplicateId { id: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("encoding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("encoder {kind:?} requires {what}")]
    MissingResource { kind: EncoderKind, what: &'static str },
    #[error("no imported vector for document {id}")]
    MissingExternalVector { id: String },
    #[error("vector file I/O failed")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    /// Coordinate-wise max over token embeddings.
    WordembMax,
    /// Coordinate-wise mean over token embeddings.
    WordembAvg,
    /// Hierarchical pooling: [avg; max; mean of per-sentence max], 3d.
    WordembHier,
    /// Vectors supplied externally as JSONL.
    ExternalImport,
    /// Score-weighted encoder over the phrase scorer.
    Encsum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderScope {
    /// Paragraph text.
    FullDocument,
    /// Expert summary text; absent summary is an EmptyScope error, never a
    /// silent fallback.
    SummaryOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub scope: EncoderScope,
}

fn scope_sentences<'d>(
    doc: &'d CaseDocument,
    scope: EncoderScope,
) -> Result<Vec<&'d Sentence>, LatentError> {
    match scope {
        EncoderScope::FullDocument => Ok(doc.paragraph_sentences().collect()),
        EncoderScope::SummaryOnly => {
            let summary = doc.summary_sentences().ok_or(LatentError::EmptyScope)?;
            Ok(summary.iter().collect())
        }
    }
}

fn scope_tokens<'d>(
    doc: &'d CaseDocument,
    scope: EncoderScope,
) -> Result<Vec<&'d Token>, LatentError> {
    let tokens: Vec<&Token> =
        scope_sentences(doc, scope)?.into_iter().flat_map(|s| s.iter()).collect();
    if tokens.is_empty() {
        return Err(LatentError::EmptyScope);
    }
    Ok(tokens)
}

/// Coordinate-wise max over the tokens' embedding vectors.
pub fn pool_max(tokens: &[&Token], table: &EmbeddingTable) -> Result<Vec<f64>, LatentError> {
    if tokens.is_empty() {
        return Err(LatentError::EmptyScope);
    }
    let mut out = table.lookup(tokens[0]).to_vec();
    for token in &tokens[1..] {
        for (o, &v) in out.iter_mut().zip(table.lookup(token)) {
            if v > *o {
                *o = v;
            }
        }
    }
    Ok(out)
}

/// Coordinate-wise mean over the tokens' embedding vectors.
pub fn pool_avg(tokens: &[&Token], table: &EmbeddingTable) -> Result<Vec<f64>, LatentError> {
    if tokens.is_empty() {
        return Err(LatentError::EmptyScope);
    }
    let mut out = vec![0.0; table.dim()];
    for token in tokens {
        for (o, &v) in out.iter_mut().zip(table.lookup(token)) {
            *o += v;
        }
    }
    let n = tokens.len() as f64;
    for o in &mut out {
        *o /= n;
    }
    Ok(out)
}

/// [avg over all tokens; max over all tokens; mean over sentences of the
/// per-sentence max], length 3d.
pub fn pool_hierarchical(
    doc: &CaseDocument,
    table: &EmbeddingTable,
    scope: EncoderScope,
) -> Result<Vec<f64>, LatentError> {
    let sentences = scope_sentences(doc, scope)?;
    let tokens: Vec<&Token> = sentences.iter().flat_map(|s| s.iter()).collect();
    let d = table.dim();
    let mut out = Vec::with_capacity(3 * d);
    out.extend(pool_avg(&tokens, table)?);
    out.extend(pool_max(&tokens, table)?);
    let mut sentence_mean = vec![0.0; d];
    for s in &sentences {
        let refs: Vec<&Token> = s.iter().collect();
        for (o, v) in sentence_mean.iter_mut().zip(pool_max(&refs, table)?) {
            *o += v;
        }
    }
    let n = sentences.len() as f64;
    for o in &mut sentence_mean {
        *o /= n;
    }
    out.extend(sentence_mean);
    Ok(out)
}

#[derive(Deserialize)]
struct VectorLine {
    id: String,
    vector: Vec<f64>,
}

/// Reads JSONL rows {"id", "vector": [...]} into an id → vector map,
/// enforcing one consistent dimension and unique ids.
pub fn import_external_vectors(
    reader: impl Read,
) -> Result<HashMap<String, Vec<f64>>, LatentError> {
    let mut map = HashMap::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let number = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: VectorLine = serde_json::from_str(&line)
            .map_err(|e| LatentError::Parse { line: number, reason: e.to_string() })?;
        let expected = *dim.get_or_insert(row.vector.len());
        if row.vector.len() != expected {
            return Err(LatentError::InconsistentDimension {
                line: number,
                expected,
                found: row.vector.len(),
            });
        }
        if map.contains_key(&row.id) {
            return Err(LatentError::DuplicateId { id: row.id });
        }
        map.insert(row.id, row.vector);
    }
    Ok(map)
}

pub fn import_external_vectors_path(
    path: impl AsRef<Path>,
) -> Result<HashMap<String, Vec<f64>>, LatentError> {
    import_external_vectors(File::open(path)?)
}

/// Everything an encoder might need; each spec uses only its own resource.
#[derive(Clone, Copy, Default)]
pub struct LatentResources<'a> {
    pub table: Option<&'a EmbeddingTable>,
    pub scorer: Option<&'a ScorerParams>,
    pub external: Option<&'a HashMap<String, Vec<f64>>>,
}

/// Reduces a document to the summary side so that scope-restricted encoders
/// see only summary text.
fn summary_view(doc: &CaseDocument) -> Result<CaseDocument, LatentError> {
    let summary = doc.summary_sentences().ok_or(LatentError::EmptyScope)?;
    Ok(CaseDocument {
        id: doc.id.clone(),
        paragraphs: vec![Paragraph { id: "summary".to_string(), sentences: summary.to_vec() }],
        summary: None,
    })
}

/// Runs one encoder spec over one document.
pub fn encode(
    doc: &CaseDocument,
    spec: EncoderSpec,
    resources: LatentResources<'_>,
) -> Result<Vec<f64>, LatentError> {
    let table = || {
        resources
            .table
            .ok_or(LatentError::MissingResource { kind: spec.kind, what: "an embedding table" })
    };
    match spec.kind {
        EncoderKind::WordembMax => pool_max(&scope_tokens(doc, spec.scope)?, table()?),
        EncoderKind::WordembAvg => pool_avg(&scope_tokens(doc, spec.scope)?, table()?),
        EncoderKind::WordembHier => pool_hierarchical(doc, table()?, spec.scope),
        EncoderKind::ExternalImport => {
            let map = resources.external.ok_or(LatentError::MissingResource {
                kind: spec.kind,
                what: "an imported vector file",
            })?;
            map.get(&doc.id)
                .cloned()
                .ok_or_else(|| LatentError::MissingExternalVector { id: doc.id.clone() })
        }
        EncoderKind::Encsum => {
            let params = resources.scorer.ok_or(LatentError::MissingResource {
                kind: spec.kind,
                what: "a scorer checkpoint",
            })?;
            let encoded = match spec.scope {
                EncoderScope::FullDocument => encode_document(doc, table()?, params),
                EncoderScope::SummaryOnly => encode_document(&summary_view(doc)?, table()?, params),
            };
            Ok(encoded.vector)
        }
    }
}

/// Lexical block followed by the element-wise product of the two latent
/// encodings.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceVector {
    pub lexical: Vec<f64>,
    pub latent_product: Vec<f64>,
}

impl RelevanceVector {
    /// lexical ++ latent_product.
    pub fn concatenated(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.lexical);
        out.extend_from_slice(&self.latent_product);
        out
    }

    pub fn len(&self) -> usize {
        self.lexical.len() + self.latent_product.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// h(q, c) = g(q) ⊙ g(c), appended after the lexical block. When several
/// encoders are active their outputs are concatenated in declared order on
/// both sides before calling this.
pub fn relevance_vector(
    query_encoding: &[f64],
    candidate_encoding: &[f64],
    lexical: Vec<f64>,
) -> Result<RelevanceVector, LatentError> {
    if query_encoding.len() != candidate_encoding.len() {
        return Err(LatentError::DimensionMismatch {
            left: query_encoding.len(),
            right: candidate_encoding.len(),
        });
    }
    let latent_product =
        query_encoding.iter().zip(candidate_encoding).map(|(&q, &c)| q * c).collect();
    Ok(RelevanceVector { lexical, latent_product })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_case_document;
    use crate::embed::OovPolicy;
    use crate::scorer::ScorerDims;
    use proptest::prelude::*;

    fn table_2d() -> EmbeddingTable {
        let vectors = [("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0]), ("c", vec![2.0, -1.0])]
            .into_iter()
            .map(|(w, v)| (w.to_string(), v))
            .collect();
        EmbeddingTable::from_vectors(2, vectors, OovPolicy::Zero)
    }

    fn toks(text: &str) -> Vec<Token> {
        text.split_whitespace().map(Token::new).collect()
    }

    fn refs(tokens: &[Token]) -> Vec<&Token> {
        tokens.iter().collect()
    }

    #[test]
    fn single_token_pools_to_its_vector() {
        let table = table_2d();
        let tokens = toks("a");
        assert_eq!(pool_max(&refs(&tokens), &table).unwrap(), vec![1.0, 0.0]);
        assert_eq!(pool_avg(&refs(&tokens), &table).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn max_and_avg_on_two_unit_vectors() {
        let table = table_2d();
        let tokens = toks("a b");
        assert_eq!(pool_max(&refs(&tokens), &table).unwrap(), vec![1.0, 1.0]);
        assert_eq!(pool_avg(&refs(&tokens), &table).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn pooling_is_permutation_invariant() {
        let table = table_2d();
        let forward = toks("a b c a");
        let backward = toks("a c b a");
        assert_eq!(
            pool_max(&refs(&forward), &table).unwrap(),
            pool_max(&refs(&backward), &table).unwrap()
        );
        assert_eq!(
            pool_avg(&refs(&forward), &table).unwrap(),
            pool_avg(&refs(&backward), &table).unwrap()
        );
    }

    #[test]
    fn empty_token_list_is_empty_scope() {
        let table = table_2d();
        assert!(matches!(pool_max(&[], &table), Err(LatentError::EmptyScope)));
        assert!(matches!(pool_avg(&[], &table), Err(LatentError::EmptyScope)));
    }

    #[test]
    fn hierarchical_single_sentence_repeats_the_max_block() {
        let table = table_2d();
        let doc = parse_case_document("d", "[1] a b c\n").unwrap();
        let v = pool_hierarchical(&doc, &table, EncoderScope::FullDocument).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v[2..4], v[4..6]);
    }

    #[test]
    fn hierarchical_single_token_repeats_everywhere() {
        let table = table_2d();
        let doc = parse_case_document("d", "[1] c\n").unwrap();
        let v = pool_hierarchical(&doc, &table, EncoderScope::FullDocument).unwrap();
        assert_eq!(v, vec![2.0, -1.0, 2.0, -1.0, 2.0, -1.0]);
    }

    #[test]
    fn hierarchical_matches_the_loop_oracle() {
        let table = table_2d();
        let doc = parse_case_document("d", "[1] a b c. c a.\n[2] b b a c\n").unwrap();
        let v = pool_hierarchical(&doc, &table, EncoderScope::FullDocument).unwrap();

        let sentences: Vec<&Sentence> = doc.paragraph_sentences().collect();
        let all: Vec<&Token> = sentences.iter().flat_map(|s| s.iter()).collect();
        let d = table.dim();
        for t in 0..d {
            let column: Vec<f64> = all.iter().map(|tok| table.lookup(tok)[t]).collect();
            let avg = column.iter().sum::<f64>() / column.len() as f64;
            let max = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sent_mean = sentences
                .iter()
                .map(|s| {
                    s.iter().map(|tok| table.lookup(tok)[t]).fold(f64::NEG_INFINITY, f64::max)
                })
                .sum::<f64>()
                / sentences.len() as f64;
            assert!((v[t] - avg).abs() < 1e-12);
            assert!((v[d + t] - max).abs() < 1e-12);
            assert!((v[2 * d + t] - sent_mean).abs() < 1e-12);
        }
    }

    #[test]
    fn summary_scope_without_summary_is_empty_scope() {
        let table = table_2d();
        let raw = format!("{}\n[1] a b\n", crate::corpus::UNEDITED_NOTICE);
        let doc = parse_case_document("d", &raw).unwrap();
        assert!(matches!(
            scope_tokens(&doc, EncoderScope::SummaryOnly),
            Err(LatentError::EmptyScope)
        ));
        assert!(matches!(
            pool_hierarchical(&doc, &table, EncoderScope::SummaryOnly),
            Err(LatentError::EmptyScope)
        ));
        let spec = EncoderSpec { kind: EncoderKind::Encsum, scope: EncoderScope::SummaryOnly };
        let dims = ScorerDims { embed_dim: 2, window: 2, filters: 2, hidden: 2 };
        let params = ScorerParams::init(dims, 3);
        let resources =
            LatentResources { table: Some(&table), scorer: Some(&params), external: None };
        assert!(matches!(encode(&doc, spec, resources), Err(LatentError::EmptyScope)));
    }

    #[test]
    fn import_reads_two_rows() {
        let data = "{\"id\":\"x\",\"vector\":[1,2,3,4]}\n{\"id\":\"y\",\"vector\":[5,6,7,8]}\n";
        let map = import_external_vectors(data.as_bytes()).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map["y"], vec![5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn import_rejects_inconsistent_dimensions() {
        let data = "{\"id\":\"x\",\"vector\":[1,2,3,4]}\n{\"id\":\"y\",\"vector\":[5]}\n";
        assert!(matches!(
            import_external_vectors(data.as_bytes()),
            Err(LatentError::InconsistentDimension { line: 2, expected: 4, found: 1 })
        ));
    }

    #[test]
    fn import_rejects_duplicate_ids() {
        let data = "{\"id\":\"x\",\"vector\":[1]}\n{\"id\":\"x\",\"vector\":[2]}\n";
        assert!(matches!(
            import_external_vectors(data.as_bytes()),
            Err(LatentError::DuplicateId { .. })
        ));
    }

    #[test]
    fn import_reports_malformed_lines() {
        let data = "{\"id\":\"x\"\n";
        assert!(matches!(
            import_external_vectors(data.as_bytes()),
            Err(LatentError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn self_product_is_the_squares() {
        let g = [0.5, -2.0, 0.0];
        let rv = relevance_vector(&g, &g, vec![0.1]).unwrap();
        assert_eq!(rv.latent_product, vec![0.25, 4.0, 0.0]);
        assert!(rv.latent_product.iter().all(|&v| v >= 0.0));
        assert_eq!(rv.concatenated(), vec![0.1, 0.25, 4.0, 0.0]);
    }

    #[test]
    fn product_is_symmetric() {
        let q = [0.5, -2.0, 3.0];
        let c = [1.5, 0.25, -1.0];
        let qc = relevance_vector(&q, &c, vec![]).unwrap();
        let cq = relevance_vector(&c, &q, vec![]).unwrap();
        assert_eq!(qc.latent_product, cq.latent_product);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        assert!(matches!(
            relevance_vector(&[1.0], &[1.0, 2.0], vec![]),
            Err(LatentError::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn relevance_dimensions_match_the_published_arithmetic() {
        let g = vec![0.5; 900];
        assert_eq!(relevance_vector(&g, &g, vec![0.0; 72]).unwrap().len(), 972);
        assert_eq!(relevance_vector(&g, &g, vec![0.0; 108]).unwrap().len(), 1008);
    }

    #[test]
    fn encoder_driver_matches_the_direct_calls() {
        let table = table_2d();
        let doc = parse_case_document("d", "a b.\n[1] a b c. c a.\n[2] b b a c\n").unwrap();
        let dims = ScorerDims { embed_dim: 2, window: 2, filters: 2, hidden: 2 };
        let params = ScorerParams::init(dims, 9);
        let resources =
            LatentResources { table: Some(&table), scorer: Some(&params), external: None };

        let spec = |kind| EncoderSpec { kind, scope: EncoderScope::FullDocument };
        let tokens = scope_tokens(&doc, EncoderScope::FullDocument).unwrap();
        assert_eq!(
            encode(&doc, spec(EncoderKind::WordembMax), resources).unwrap(),
            pool_max(&tokens, &table).unwrap()
        );
        assert_eq!(
            encode(&doc, spec(EncoderKind::WordembAvg), resources).unwrap(),
            pool_avg(&tokens, &table).unwrap()
        );
        assert_eq!(
            encode(&doc, spec(EncoderKind::WordembHier), resources).unwrap(),
            pool_hierarchical(&doc, &table, EncoderScope::FullDocument).unwrap()
        );
        assert_eq!(
            encode(&doc, spec(EncoderKind::Encsum), resources).unwrap(),
            encode_document(&doc, &table, &params).vector
        );

        let summary_spec =
            EncoderSpec { kind: EncoderKind::Encsum, scope: EncoderScope::SummaryOnly };
        let view = summary_view(&doc).unwrap();
        assert_eq!(
            encode(&doc, summary_spec, resources).unwrap(),
            encode_document(&view, &table, &params).vector
        );
    }

    #[test]
    fn external_encoder_looks_up_by_id() {
        let doc = parse_case_document("d", "[1] a b\n").unwrap();
        let mut external = HashMap::new();
        external.insert("d".to_string(), vec![1.0, 2.0]);
        let resources = LatentResources { external: Some(&external), ..Default::default() };
        let spec =
            EncoderSpec { kind: EncoderKind::ExternalImport, scope: EncoderScope::FullDocument };
        assert_eq!(encode(&doc, spec, resources).unwrap(), vec![1.0, 2.0]);

        let other = parse_case_document("missing", "[1] a\n").unwrap();
        assert!(matches!(
            encode(&other, spec, resources),
            Err(LatentError::MissingExternalVector { .. })
        ));
        assert!(matches!(
            encode(&doc, spec, LatentResources::default()),
            Err(LatentError::MissingResource { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn product_zeros_propagate(
            q in prop::collection::vec(-2.0f64..2.0, 1..8),
            mask in prop::collection::vec(prop::bool::ANY, 1..8),
        ) {
            let n = q.len().min(mask.len());
            let q = &q[..n];
            let c: Vec<f64> = mask[..n].iter().map(|&m| if m { 0.0 } else { 1.5 }).collect();
            let rv = relevance_vector(q, &c, vec![]).unwrap();
            for (i, &v) in rv.latent_product.iter().enumerate() {
                if c[i] == 0.0 {
                    prop_assert_eq!(v, 0.0);
                }
            }
        }
    }
}
