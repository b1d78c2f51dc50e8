//! Legal case retrieval toolkit.
//!
//! The pipeline turns raw case files into ranked candidate lists:
//!
//! 1. [`corpus`] parses case documents (summary block plus numbered
//!    paragraphs) and retrieval manifests.
//! 2. [`embed`] loads pretrained word embeddings in the GloVe text format.
//! 3. [`scorer`] trains a convolutional phrase-scoring model with a
//!    margin-based constraint loss over summary/document phrase statistics.
//! 4. [`encoding`] turns phrase scores into document vectors, extractive
//!    summaries, and sentence selections.
//! 5. [`lexfeat`] computes surface matching features (n-gram, skip-gram,
//!    subsequence families) between document sides.
//! 6. [`latent`] builds latent document encoders and combines their
//!    interactions with lexical features into relevance vectors.
//! 7. [`ranker`] trains a pairwise linear ranker over relevance vectors.
//! 8. [`eval`] scores rankings and summaries (MAP, F-score, ROUGE-style
//!    tables) including a leave-one-out driver.
//!
//! [`container`] provides the binary tensor checkpoint format shared by the
//! scorer and ranker, and [`synth`] generates the seeded synthetic corpus
//! used by the test suite and the CLI demo.

pub mod container;
pub mod corpus;
pub mod embed;
pub mod encoding;
pub mod eval;
pub mod latent;
pub mod lexfeat;
pub mod ranker;
pub mod scorer;
pub mod synth;
pub mod tensor;
