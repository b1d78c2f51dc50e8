//! Word embedding table with GloVe-style text loading.
//!
//! One line per token: the token followed by `d` floats, whitespace
//! separated. The dimension is inferred from the first line; later lines
//! with a different arity are skipped and counted. Lookup is total: unknown
//! tokens resolve through the out-of-vocabulary policy.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding stream contains no valid line")]
    EmptyEmbeddingFile,
    #[error("embedding dimension {dim} inferred from the first line matches no other line ({skipped} skipped)")]
    InconsistentDimension { dim: usize, skipped: usize },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Out-of-vocabulary handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OovPolicy {
    /// Unknown tokens embed to the zero vector (default).
    Zero,
    /// Unknown tokens share one random vector drawn once from the seed.
    FixedRandom { seed: u64 },
}

impl Default for OovPolicy {
    fn default() -> Self {
        OovPolicy::Zero
    }
}

/// Immutable token → vector map; concurrent lookups are safe.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    oov_vector: Vec<f64>,
}

/// Load statistics: how many lines were rejected for arity mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadStats {
    pub accepted: usize,
    pub skipped: usize,
}

impl EmbeddingTable {
    /// Builds a table from already-parsed vectors. Intended for tests and
    /// the synthetic corpus generator; all vectors must have length `dim`.
    pub fn from_vectors(
        dim: usize,
        vectors: HashMap<String, Vec<f64>>,
        policy: OovPolicy,
    ) -> EmbeddingTable {
        assert!(dim > 0, "embedding dimension must be positive");
        assert!(vectors.values().all(|v| v.len() == dim), "vector length mismatch");
        EmbeddingTable { dim, vectors, oov_vector: oov_vector(dim, policy) }
    }

    /// Reads a GloVe-style stream. `vocabulary` restricts which tokens are
    /// kept (to bound memory on large files); `None` keeps everything.
    pub fn load(
        reader: impl BufRead,
        policy: OovPolicy,
        vocabulary: Option<&HashSet<String>>,
    ) -> Result<(EmbeddingTable, LoadStats), EmbedError> {
        let mut dim: Option<usize> = None;
        let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
        let mut accepted = 0usize;
        let mut skipped = 0usize;
        for line in reader.lines() {
            let line = line.map_err(|e| EmbedError::Io { path: PathBuf::from("<stream>"), source: e })?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values: Option<Vec<f64>> = parts.map(|p| p.parse::<f64>().ok()).collect();
            let Some(values) = values else {
                skipped += 1;
                continue;
            };
            if values.is_empty() {
                skipped += 1;
                continue;
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if values.len() != d => {
                    skipped += 1;
                    continue;
                }
                Some(_) => {}
            }
            accepted += 1;
            if vocabulary.is_none_or(|v| v.contains(token)) {
                // Duplicate tokens: last occurrence wins.
                vectors.insert(token.to_string(), values);
            }
        }
        let Some(dim) = dim else {
            return Err(EmbedError::EmptyEmbeddingFile);
        };
        // Only the first line supports the inferred dimension: the file is
        // internally inconsistent (e.g. a count header was misread as a
        // vector), not merely corrupt in places.
        if skipped > 0 && accepted == 1 {
            return Err(EmbedError::InconsistentDimension { dim, skipped });
        }
        let table = EmbeddingTable { dim, vectors, oov_vector: oov_vector(dim, policy) };
        Ok((table, LoadStats { accepted, skipped }))
    }

    /// Opens and reads an embeddings file; see [`EmbeddingTable::load`].
    pub fn load_path(
        path: &Path,
        policy: OovPolicy,
        vocabulary: Option<&HashSet<String>>,
    ) -> Result<(EmbeddingTable, LoadStats), EmbedError> {
        let file = std::fs::File::open(path)
            .map_err(|e| EmbedError::Io { path: path.to_path_buf(), source: e })?;
        Self::load(BufReader::new(file), policy, vocabulary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// Total lookup: stored vector for known tokens, policy vector otherwise.
    pub fn lookup(&self, token: &str) -> &[f64] {
        self.vectors.get(token).map_or(&self.oov_vector, Vec::as_slice)
    }
}

fn oov_vector(dim: usize, policy: OovPolicy) -> Vec<f64> {
    match policy {
        OovPolicy::Zero => vec![0.0; dim],
        OovPolicy::FixedRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn load_str(text: &str) -> Result<(EmbeddingTable, LoadStats), EmbedError> {
        EmbeddingTable::load(Cursor::new(text), OovPolicy::Zero, None)
    }

    #[test]
    fn loads_two_lines_and_infers_dim() {
        let (table, stats) = load_str("alpha 0.1 0.2\nbeta 0.3 0.4\n").unwrap();
        assert_eq!(table.dim(), 2);
        assert_eq!(table.len(), 2);
        assert_eq!(stats, LoadStats { accepted: 2, skipped: 0 });
        assert_eq!(table.lookup("alpha"), &[0.1, 0.2]);
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(matches!(load_str("").unwrap_err(), EmbedError::EmptyEmbeddingFile));
        assert!(matches!(load_str("\n\n").unwrap_err(), EmbedError::EmptyEmbeddingFile));
    }

    #[test]
    fn short_line_among_valid_lines_is_skipped_and_counted() {
        let (table, stats) = load_str("a 1.0 2.0\nb 3.0\nc 5.0 6.0\n").unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(stats, LoadStats { accepted: 2, skipped: 1 });
        assert!(!table.contains("b"));
    }

    #[test]
    fn lone_first_line_disagreeing_with_all_others_is_inconsistent() {
        // Word2vec-style count header: parsed as a 1-dim vector that no
        // other line corroborates.
        let err = load_str("2 3\na 1.0 2.0 3.0\nb 4.0 5.0 6.0\n").unwrap_err();
        assert!(matches!(err, EmbedError::InconsistentDimension { dim: 1, skipped: 2 }));
    }

    #[test]
    fn oov_zero_policy_returns_zeros() {
        let (table, _) = load_str("a 1.0 2.0\n").unwrap();
        assert_eq!(table.lookup("missing"), &[0.0, 0.0]);
    }

    #[test]
    fn oov_fixed_random_is_deterministic_and_shared() {
        let make = || {
            EmbeddingTable::load(
                Cursor::new("a 1.0 2.0\n"),
                OovPolicy::FixedRandom { seed: 7 },
                None,
            )
            .unwrap()
            .0
        };
        let t1 = make();
        let t2 = make();
        assert_eq!(t1.lookup("x"), t2.lookup("y"));
        assert_ne!(t1.lookup("x"), &[0.0, 0.0]);
    }

    #[test]
    fn duplicate_tokens_last_wins() {
        let (table, _) = load_str("a 1.0 2.0\na 9.0 9.0\n").unwrap();
        assert_eq!(table.lookup("a"), &[9.0, 9.0]);
    }

    #[test]
    fn vocabulary_restriction_drops_other_tokens() {
        let vocab: HashSet<String> = ["keep".to_string()].into();
        let (table, stats) = EmbeddingTable::load(
            Cursor::new("keep 1.0\ndrop 2.0\n"),
            OovPolicy::Zero,
            Some(&vocab),
        )
        .unwrap();
        assert_eq!(stats.accepted, 2);
        assert!(table.contains("keep"));
        assert!(!table.contains("drop"));
        assert_eq!(table.lookup("drop"), &[0.0]);
    }

    #[test]
    fn lookup_always_has_length_d() {
        let (table, _) = load_str("a 1.0 2.0 3.0\n").unwrap();
        for token in ["a", "b", "", "zz"] {
            assert_eq!(table.lookup(token).len(), 3);
        }
    }
}
