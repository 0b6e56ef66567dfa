//! Link-prediction evaluation of learned embeddings.
//!
//! Two protocols are supported: a random holdout of vertex pairs
//! ([`Protocol::Traditional`]) and a chronological prefix/suffix split of
//! the event stream ([`Protocol::TimePreserving`]). Test positives are
//! paired with as many sampled non-linked pairs, pairs are turned into edge
//! features, a logistic-regression scorer is fit on part of the labelled
//! pairs and AUC is measured on the rest.

pub mod auc;
pub mod experiment;
pub mod features;
pub mod logreg;
pub mod recommend;
pub mod split;

use thiserror::Error;

use crate::embed::EmbedError;
use crate::sampler::SamplerError;
use crate::tssn::TssnError;

pub use auc::{auc, auc_pairwise};
pub use experiment::{
    embed_corpus, evaluate_embeddings, parameter_sweep, run_experiment, run_experiment_with, score_pairs,
    write_sweep_table, CorpusSource, EvalReport, ExperimentConfig, PairScore, SeedResult, SweepCell, SweepGrid,
    TemporalBiasedWalks, TokenCorpus,
};
pub use features::{edge_feature, edge_features, FeatureOp, FeatureSet};
pub use logreg::{train_logreg, LogRegConfig, LogisticModel};
pub use recommend::{fit_link_scorer, recommend, LinkScorer, Recommendation};
pub use split::{make_split, sample_negatives, Protocol, Split, SplitSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need {needed} negative pairs but only {available} unconnected candidates exist")]
    TooFewNegatives { needed: usize, available: usize },
    #[error("the split produced no test positives")]
    NoPositives,
    #[error("both classes must be present (positives: {positives}, negatives: {negatives})")]
    SingleClass { positives: usize, negatives: usize },
    #[error("vertex {0} has no embedding")]
    NoEmbedding(crate::ingest::VertexId),
    #[error("invalid evaluation setting: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] TssnError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}
