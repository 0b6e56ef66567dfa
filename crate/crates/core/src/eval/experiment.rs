//! Repeated split/embed/score runs and parameter sweeps.

use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auc, edge_features, make_split, train_logreg, EvalError, FeatureOp, LogRegConfig, Protocol, SplitSpec};
use crate::embed::{sgd_train_tied, EmbeddingMatrix, TrainConfig};
use crate::ingest::{RoleTable, TemporalEdgeList, VertexId};
use crate::rng;
use crate::sampler::{
    generate_corpus_with_threads, snapshot_tie_partners, token_base, RoleMode, TokenMode, WalkConfig,
};
use crate::tssn::{build_tssn, Bucketing, TssnBuildConfig};

/// Everything a run needs besides the data and the seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub tssn: TssnBuildConfig,
    pub walk: WalkConfig,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub feature: FeatureOp,
    pub logreg: LogRegConfig,
    /// Share of the labelled pairs held out from the classifier and used
    /// for AUC.
    pub holdout_fraction: f64,
    /// Workers for corpus generation (0 = rayon's default). The corpus
    /// does not depend on it.
    pub walk_threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            tssn: TssnBuildConfig::default(),
            walk: WalkConfig::default(),
            train: TrainConfig::default(),
            split: SplitSpec::default(),
            feature: FeatureOp::Average,
            logreg: LogRegConfig::default(),
            holdout_fraction: 0.25,
            walk_threads: 0,
        }
    }
}

impl ExperimentConfig {
    /// The same pipeline reduced to a weighted first-order walk on the
    /// static graph: one snapshot, `r = q = 1`, no role bias.
    pub fn first_order(&self) -> ExperimentConfig {
        let mut cfg = self.clone();
        cfg.tssn.bucketing = Bucketing::FixedSpan {
            epsilon: u64::MAX,
            origin: None,
        };
        cfg.walk.r = 1.0;
        cfg.walk.q = 1.0;
        cfg.walk.role_mode = RoleMode::Unbiased;
        cfg.walk.token_mode = TokenMode::BaseId;
        cfg
    }
}

/// Walks ready for training, plus how to read their tokens back as
/// vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenCorpus {
    pub walks: Vec<Vec<u32>>,
    /// Base vertex of every token; `None` when tokens already are vertex ids.
    pub bases: Option<Vec<VertexId>>,
    /// `(later, earlier)` tokens to tie together during training.
    pub ties: Vec<(u32, u32)>,
}

/// Produces the training corpus of one seed. `walk.seed` is already
/// derived from the run seed.
pub trait CorpusSource: Sync {
    fn corpus(
        &self,
        train: &TemporalEdgeList,
        roles: &RoleTable,
        cfg: &ExperimentConfig,
        walk: &WalkConfig,
    ) -> Result<TokenCorpus, EvalError>;
}

/// Temporal biased walks over the snapshot network of the training events.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemporalBiasedWalks;

impl CorpusSource for TemporalBiasedWalks {
    fn corpus(
        &self,
        train: &TemporalEdgeList,
        roles: &RoleTable,
        cfg: &ExperimentConfig,
        walk: &WalkConfig,
    ) -> Result<TokenCorpus, EvalError> {
        let graph = build_tssn(train, roles, &cfg.tssn)?;
        let corpus = generate_corpus_with_threads(&graph, walk, cfg.walk_threads)?;
        let bases = match walk.token_mode {
            TokenMode::BaseId => None,
            TokenMode::SnapshotId => Some(
                (0..graph.state_count() as u32)
                    .map(|t| token_base(&graph, walk.token_mode, t))
                    .collect(),
            ),
        };
        let ties = match walk.token_mode {
            TokenMode::BaseId => Vec::new(),
            TokenMode::SnapshotId => snapshot_tie_partners(&graph),
        };
        Ok(TokenCorpus {
            walks: corpus.walks.into_iter().map(|w| w.tokens).collect(),
            bases,
            ties,
        })
    }
}

/// Trains embeddings on a corpus and returns one vector per base vertex
/// (snapshot tokens are averaged).
pub fn embed_corpus(corpus: &TokenCorpus, train: &TrainConfig) -> Result<EmbeddingMatrix, EvalError> {
    let (m, _) = sgd_train_tied(&corpus.walks, train, &corpus.ties)?;
    Ok(match &corpus.bases {
        None => m,
        Some(bases) => m.collapse(|t| bases[t as usize]),
    })
}

/// Outcome of scoring labelled pairs with a classifier fit on part of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub auc: f64,
    /// Pairs without an embedding for one endpoint.
    pub dropped: usize,
    pub fit_pairs: usize,
    pub scored_pairs: usize,
}

/// Fits the classifier on `1 - holdout` of each class and measures AUC on
/// the rest.
pub fn score_pairs<R: Rng + ?Sized>(
    m: &EmbeddingMatrix,
    positives: &[(VertexId, VertexId)],
    negatives: &[(VertexId, VertexId)],
    op: FeatureOp,
    logreg: &LogRegConfig,
    holdout: f64,
    rng: &mut R,
) -> Result<PairScore, EvalError> {
    if !(holdout > 0.0 && holdout < 1.0) {
        return Err(EvalError::Invalid(format!(
            "holdout fraction must lie in (0, 1), got {holdout}"
        )));
    }
    let pos = edge_features(m, positives, op);
    let neg = edge_features(m, negatives, op);
    let dropped = pos.dropped + neg.dropped;

    let mut fit = (Vec::new(), Vec::new());
    let mut held = (Vec::new(), Vec::new());
    for (rows, label) in [(pos.rows, true), (neg.rows, false)] {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.shuffle(rng);
        let n_held = (rows.len() as f64 * holdout).round() as usize;
        for (k, &i) in order.iter().enumerate() {
            let target = if k < n_held { &mut held } else { &mut fit };
            target.0.push(rows[i].clone());
            target.1.push(label);
        }
    }
    let model = train_logreg(&fit.0, &fit.1, logreg)?;
    let scores: Vec<f64> = held.0.iter().map(|x| model.decision(x)).collect();
    Ok(PairScore {
        auc: auc(&scores, &held.1)?,
        dropped,
        fit_pairs: fit.0.len(),
        scored_pairs: held.0.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub auc: Option<f64>,
    pub error: Option<String>,
    pub test_positives: usize,
    pub test_negatives: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub seeds: Vec<SeedResult>,
    /// Over the seeds that finished.
    pub mean: Option<f64>,
    /// Sample standard deviation over the seeds that finished.
    pub std: Option<f64>,
    pub complete: bool,
    pub config: ExperimentConfig,
}

impl EvalReport {
    pub fn aucs(&self) -> Vec<f64> {
        self.seeds.iter().filter_map(|s| s.auc).collect()
    }

    /// Tab-separated rows `protocol r q alpha beta role_mode seed auc`, one
    /// per seed, then `mean` and `std` summary rows.
    pub fn write_table<W: Write>(&self, mut sink: W) -> io::Result<()> {
        writeln!(sink, "protocol\tr\tq\talpha\tbeta\trole_mode\tseed\tauc")?;
        let w = &self.config.walk;
        let prefix = format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.protocol.as_str(),
            w.r,
            w.q,
            w.alpha,
            w.beta,
            w.role_mode.as_str()
        );
        let fmt = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.6}"));
        for s in &self.seeds {
            writeln!(sink, "{prefix}\t{}\t{}", s.seed, fmt(s.auc))?;
        }
        writeln!(sink, "{prefix}\tmean\t{}", fmt(self.mean))?;
        writeln!(sink, "{prefix}\tstd\t{}", fmt(self.std))
    }
}

const SPLIT_STREAM: u64 = 1;
const WALK_STREAM: u64 = 2;
const EMBED_STREAM: u64 = 3;
const HOLDOUT_STREAM: u64 = 4;

fn run_seed<S: CorpusSource>(
    edges: &TemporalEdgeList,
    roles: &RoleTable,
    cfg: &ExperimentConfig,
    source: &S,
    seed: u64,
) -> Result<SeedResult, EvalError> {
    let split = make_split(edges, roles, &cfg.split, &mut rng::stream(seed, &[SPLIT_STREAM]))?;
    let mut walk = cfg.walk.clone();
    walk.seed = rng::derive_seed(seed, &[WALK_STREAM]);
    let corpus = source.corpus(&split.train, roles, cfg, &walk)?;
    let mut train = cfg.train.clone();
    train.seed = rng::derive_seed(seed, &[EMBED_STREAM]);
    let m = embed_corpus(&corpus, &train)?;
    score_split(&m, &split.positives, &split.negatives, cfg, seed)
}

fn score_split(
    m: &EmbeddingMatrix,
    positives: &[(VertexId, VertexId)],
    negatives: &[(VertexId, VertexId)],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<SeedResult, EvalError> {
    let score = score_pairs(
        m,
        positives,
        negatives,
        cfg.feature,
        &cfg.logreg,
        cfg.holdout_fraction,
        &mut rng::stream(seed, &[HOLDOUT_STREAM]),
    )?;
    Ok(SeedResult {
        seed,
        auc: Some(score.auc),
        error: None,
        test_positives: positives.len(),
        test_negatives: negatives.len(),
        dropped: score.dropped,
    })
}

fn summarize(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

/// Split, embed and score once per seed with temporal biased walks.
pub fn run_experiment(
    edges: &TemporalEdgeList,
    roles: &RoleTable,
    cfg: &ExperimentConfig,
    seeds: &[u64],
) -> EvalReport {
    run_experiment_with(edges, roles, cfg, seeds, &TemporalBiasedWalks)
}

/// [`run_experiment`] with a custom corpus source. Seeds run in parallel;
/// a failing seed is recorded and the others continue.
pub fn run_experiment_with<S: CorpusSource>(
    edges: &TemporalEdgeList,
    roles: &RoleTable,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    source: &S,
) -> EvalReport {
    collect_report(cfg, seeds, |seed| run_seed(edges, roles, cfg, source, seed))
}

/// Scores fixed embeddings against a fresh split per seed, for embeddings
/// trained elsewhere. The split and holdout use the same per-seed streams
/// as [`run_experiment`].
pub fn evaluate_embeddings(
    edges: &TemporalEdgeList,
    roles: &RoleTable,
    m: &EmbeddingMatrix,
    cfg: &ExperimentConfig,
    seeds: &[u64],
) -> EvalReport {
    collect_report(cfg, seeds, |seed| {
        let split = make_split(edges, roles, &cfg.split, &mut rng::stream(seed, &[SPLIT_STREAM]))?;
        score_split(m, &split.positives, &split.negatives, cfg, seed)
    })
}

fn collect_report<F>(cfg: &ExperimentConfig, seeds: &[u64], run: F) -> EvalReport
where
    F: Fn(u64) -> Result<SeedResult, EvalError> + Sync,
{
    let results: Vec<SeedResult> = seeds
        .par_iter()
        .map(|&seed| {
            run(seed).unwrap_or_else(|e| {
                log::warn!("seed {seed} failed: {e}");
                SeedResult {
                    seed,
                    auc: None,
                    error: Some(e.to_string()),
                    test_positives: 0,
                    test_negatives: 0,
                    dropped: 0,
                }
            })
        })
        .collect();
    let aucs: Vec<f64> = results.iter().filter_map(|s| s.auc).collect();
    let (mean, std) = summarize(&aucs);
    EvalReport {
        protocol: cfg.split.protocol,
        complete: aucs.len() == results.len(),
        seeds: results,
        mean,
        std,
        config: cfg.clone(),
    }
}

/// Values to try for each walk parameter; an empty list keeps the base
/// configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub r: Vec<f64>,
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub role_mode: Vec<RoleMode>,
}

impl SweepGrid {
    /// Every walk configuration of the grid, varying `role_mode` fastest
    /// and `r` slowest.
    pub fn cells(&self, base: &WalkConfig) -> Vec<WalkConfig> {
        fn or_base<T: Clone>(v: &[T], b: T) -> Vec<T> {
            if v.is_empty() {
                vec![b]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for r in or_base(&self.r, base.r) {
            for q in or_base(&self.q, base.q) {
                for alpha in or_base(&self.alpha, base.alpha) {
                    for beta in or_base(&self.beta, base.beta) {
                        for role_mode in or_base(&self.role_mode, base.role_mode) {
                            out.push(WalkConfig {
                                r,
                                q,
                                alpha,
                                beta,
                                role_mode,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub walk: WalkConfig,
    pub report: EvalReport,
}

/// One report per grid cell, in [`SweepGrid::cells`] order.
pub fn parameter_sweep(
    edges: &TemporalEdgeList,
    roles: &RoleTable,
    base: &ExperimentConfig,
    grid: &SweepGrid,
    seeds: &[u64],
) -> Vec<SweepCell> {
    grid.cells(&base.walk)
        .into_par_iter()
        .map(|walk| {
            let cfg = ExperimentConfig {
                walk: walk.clone(),
                ..base.clone()
            };
            SweepCell {
                report: run_experiment(edges, roles, &cfg, seeds),
                walk,
            }
        })
        .collect()
}

/// Tab-separated, one row per cell.
pub fn write_sweep_table<W: Write>(cells: &[SweepCell], mut sink: W) -> io::Result<()> {
    writeln!(
        sink,
        "protocol\tr\tq\talpha\tbeta\trole_mode\tmean_auc\tstd_auc\tseeds\tfailed"
    )?;
    let fmt = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.6}"));
    for c in cells {
        let w = &c.walk;
        let failed = c.report.seeds.iter().filter(|s| s.auc.is_none()).count();
        writeln!(
            sink,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            c.report.protocol.as_str(),
            w.r,
            w.q,
            w.alpha,
            w.beta,
            w.role_mode.as_str(),
            fmt(c.report.mean),
            fmt(c.report.std),
            c.report.seeds.len(),
            failed
        )?;
    }
    Ok(())
}
