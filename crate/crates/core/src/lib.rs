//! Semantic compression of knowledge-graph triples against a shared
//! probability graph, and the joint communication/computation energy model
//! built on top of it.
//!
//! The sender and receiver share a [`ProbabilityGraph`] built from a corpus of
//! per-sample knowledge graphs. The sender drops relations that the receiver
//! can recover as the unique most probable (possibly conditional) relation of
//! their `(head, tail)` pair; see [`compressor`]. The [`resource`] and
//! [`optimizer`] modules trade the resulting payload reduction against the
//! computation it costs, and [`experiments`] sweeps that tradeoff.

pub mod compressor;
pub mod config;
pub mod error;
pub mod experiments;
pub mod kg;
pub mod optimizer;
pub mod probgraph;
pub mod resource;

mod bytes;

pub use compressor::{
    compress, compress_with_vocab, decode_message, decompress, encode_message, message_vocabulary, CompressedMessage, CompressionReport,
    OmissionRecord, StageStats,
};
pub use error::{Error, Result};
pub use kg::{
    load_corpus, parse_corpus, Corpus, EntityId, Interner, KnowledgeGraph, RelationId, Triple,
    Vocabulary,
};
pub use optimizer::{solve, solve_simplified, solve_traditional, AllocationResult};
pub use probgraph::{GraphHash, Probability, ProbabilityGraph, Quadruple, SampleSet};
pub use resource::{estimate_q, LinkModel, OmissionProfile};
