//! Time-series snapshot networks and temporal biased walks.
//!
//! The pipeline turns a role-labelled interaction log into a layered
//! snapshot graph, samples second-order walks that are biased by structure,
//! time and role, learns skip-gram vertex embeddings from those walks and
//! scores candidate partner pairs with a logistic-regression link predictor.
//!
//! ```text
//! events ──ingest──▶ TemporalEdgeList ──tssn──▶ TssnGraph ──sampler──▶ Corpus
//!                                                                        │
//!                        EvalReport ◀──eval── EmbeddingMatrix ◀──embed───┘
//! ```

pub mod embed;
pub mod eval;
pub mod ingest;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod tssn;

pub use embed::{EmbedError, EmbeddingMatrix, TrainConfig};
pub use eval::{EvalError, EvalReport, SplitSpec};
pub use ingest::{IngestError, Role, RoleTable, TemporalEdgeList, VertexId};
pub use sampler::{SamplerError, Walk, WalkConfig};
pub use stats::StatsError;
pub use tssn::{TssnBuildConfig, TssnError, TssnGraph, TssnVertex};
