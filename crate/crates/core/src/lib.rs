//! Translation-based embeddings for multi-relational data.
//!
//! Entities and relation labels live in the same `k`-dimensional space and a
//! fact `(head, label, tail)` is plausible when `head + label` lands close to
//! `tail`. The crate holds everything that is pure computation:
//!
//! - [`kb`]: integer-indexed triples, name dictionaries and closed train/valid/test splits.
//! - [`model`]: embedding tables, the three dissimilarities and unit-norm projection.
//! - [`training`]: corrupted-triple sampling, the margin hinge and its SGD update,
//!   epochs and validation-driven model selection.
//! - [`evaluation`]: raw link-prediction ranks, mean/median/hits@10 and top-k listings.
//!
//! File formats, parallel evaluation and the command-line runner live in the
//! `kge-translate` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod evaluation;
pub mod kb;
pub mod model;
pub mod training;

pub use error::{Error, Result};
pub use evaluation::{
    evaluate, predict_top_k, rank_entity, triple_ranks, CorruptSide, Evaluation, MetricSide,
    RankingMetrics, Scorer,
};
pub use kb::{Dictionary, EntityId, KnowledgeBase, RawTriple, RelationId, Split, Triple};
pub use model::{DissimilarityKind, EmbeddingModel, TripleScore};
pub use training::{
    train, EpochStats, Hyperparams, NoProgress, ProgressSink, SequentialRanker, TrainReport,
    ValidationRanker,
};
