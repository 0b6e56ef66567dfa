//! Skip-gram embeddings trained with negative sampling and SGD.
//!
//! For a `(center, context)` pair and negatives `n_1..n_k` the loss is
//!
//! ```text
//! -log sigma(f(center) . g(context)) - sum_i log sigma(-f(center) . g(n_i))
//! ```
//!
//! with `f` the input vectors (the embeddings returned) and `g` the context
//! vectors. Negatives are drawn from unigram counts raised to
//! `noise_exponent`. Input vectors start uniform in `[-0.5/d, 0.5/d]`,
//! context vectors at zero, and the learning rate decays linearly from
//! `initial_lr` to `min_lr` over all pairs of all epochs.
//!
//! Parameters live in atomically accessed cells so that parallel workers
//! can apply unsynchronized sparse updates (lost updates are tolerated).
//! Deterministic mode processes the corpus as a single ordered stream.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::sampler::AliasTable;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value in epoch {epoch} while updating token {token} (lr {lr}, loss {loss})")]
    NonFinite {
        epoch: usize,
        token: u32,
        lr: f64,
        loss: f64,
    },
    #[error("embedding file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub noise_exponent: f64,
    pub seed: u64,
    /// Train as one ordered stream; results are bit-identical per seed.
    pub deterministic: bool,
    /// Worker count in parallel mode (0 = rayon's default).
    pub threads: usize,
    /// Strength of the L2 tie between consecutive snapshot tokens of the
    /// same vertex; only used by [`sgd_train_tied`].
    pub snapshot_tie: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            min_lr: 0.0001,
            noise_exponent: 0.75,
            seed: 0,
            deterministic: true,
            threads: 0,
            snapshot_tie: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if !(self.initial_lr > 0.0 && self.min_lr > 0.0 && self.min_lr < self.initial_lr) {
            return bad("learning rates must satisfy 0 < min_lr < initial_lr");
        }
        if !self.noise_exponent.is_finite() {
            return bad("noise_exponent must be finite");
        }
        if !(self.snapshot_tie >= 0.0 && self.snapshot_tie.is_finite()) {
            return bad("snapshot_tie must be a non-negative number");
        }
        Ok(())
    }
}

/// Distinct tokens in order of first appearance, with occurrence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    pub tokens: Vec<u32>,
    pub counts: Vec<u64>,
    index: HashMap<u32, usize>,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn row(&self, token: u32) -> Option<usize> {
        self.index.get(&token).copied()
    }

    pub fn count(&self, token: u32) -> u64 {
        self.row(token).map_or(0, |r| self.counts[r])
    }

    /// Negative-sampling distribution, proportional to `count^exponent`.
    pub fn noise_distribution(&self, exponent: f64) -> Vec<f64> {
        let weights: Vec<f64> = self.counts.iter().map(|&c| (c as f64).powf(exponent)).collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }
}

pub fn build_vocab<W: AsRef<[u32]>>(walks: &[W]) -> Result<Vocab, EmbedError> {
    let mut tokens = Vec::new();
    let mut counts = Vec::new();
    let mut index = HashMap::new();
    for walk in walks {
        for &t in walk.as_ref() {
            let row = *index.entry(t).or_insert_with(|| {
                tokens.push(t);
                counts.push(0);
                tokens.len() - 1
            });
            counts[row] += 1;
        }
    }
    if tokens.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    Ok(Vocab { tokens, counts, index })
}

/// Window bounds `[lo, hi]` of the contexts of position `i`.
fn window(i: usize, len: usize, k: usize) -> (usize, usize) {
    (i.saturating_sub(k), (i + k).min(len - 1))
}

/// Every `(center, context)` pair at distance at most `k`, in order of
/// center then context position. Repeated tokens pair with each other.
pub fn positive_pairs(tokens: &[u32], k: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for (i, &center) in tokens.iter().enumerate() {
        let (lo, hi) = window(i, tokens.len(), k);
        for j in (lo..=hi).filter(|&j| j != i) {
            out.push((center, tokens[j]));
        }
    }
    out
}

fn pair_count(len: usize, k: usize) -> u64 {
    (0..len)
        .map(|i| {
            let (lo, hi) = window(i, len, k);
            (hi - lo) as u64
        })
        .sum()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative-sampling loss of one positive pair.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    softplus(-dot(center, context)) + negatives.iter().map(|n| softplus(dot(center, n))).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Gradient of [`pair_loss`] with respect to every vector involved.
pub fn pair_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let scale = |v: &[f64], s: f64| v.iter().map(|x| x * s).collect::<Vec<f64>>();
    let pos = sigmoid(dot(center, context)) - 1.0;
    let mut grad_center = scale(context, pos);
    let mut grad_negs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let s = sigmoid(dot(center, n));
        for (g, x) in grad_center.iter_mut().zip(n.iter()) {
            *g += s * x;
        }
        grad_negs.push(scale(center, s));
    }
    PairGradient {
        center: grad_center,
        context: scale(center, pos),
        negatives: grad_negs,
    }
}

fn load(cell: &AtomicU64) -> f64 {
    f64::from_bits(cell.load(Ordering::Relaxed))
}

fn store(cell: &AtomicU64, v: f64) {
    cell.store(v.to_bits(), Ordering::Relaxed)
}

/// Input and context matrices shared between training workers.
pub struct SharedParams {
    dim: usize,
    input: Vec<AtomicU64>,
    context: Vec<AtomicU64>,
}

impl SharedParams {
    fn zeros(rows: usize, dim: usize) -> Self {
        let cells = |n: usize| (0..n).map(|_| AtomicU64::new(0f64.to_bits())).collect();
        SharedParams {
            dim,
            input: cells(rows * dim),
            context: cells(rows * dim),
        }
    }

    pub fn from_matrix(m: &EmbeddingMatrix) -> Self {
        let cells = |v: &[f64]| v.iter().map(|x| AtomicU64::new(x.to_bits())).collect();
        SharedParams {
            dim: m.dim,
            input: cells(&m.input),
            context: cells(&m.context),
        }
    }

    pub fn to_matrix(&self, tokens: Vec<u32>) -> EmbeddingMatrix {
        let read = |cells: &[AtomicU64]| cells.iter().map(load).collect();
        EmbeddingMatrix::from_parts(self.dim, tokens, read(&self.input), read(&self.context))
    }

    fn read_input(&self, row: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.input[row * self.dim..(row + 1) * self.dim]) {
            *o = load(c);
        }
    }

    fn all_finite(&self) -> bool {
        self.input.iter().chain(&self.context).all(|c| load(c).is_finite())
    }
}

/// Scratch buffers reused across steps.
struct StepBuffers {
    center: Vec<f64>,
    delta: Vec<f64>,
}

impl StepBuffers {
    fn new(dim: usize) -> Self {
        StepBuffers {
            center: vec![0.0; dim],
            delta: vec![0.0; dim],
        }
    }
}

fn pair_step(
    params: &SharedParams,
    bufs: &mut StepBuffers,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
) -> f64 {
    let d = params.dim;
    params.read_input(center, &mut bufs.center);
    bufs.delta.iter_mut().for_each(|x| *x = 0.0);
    let mut loss = 0.0;
    let targets = std::iter::once((context, true)).chain(negatives.iter().map(|&n| (n, false)));
    for (target, positive) in targets {
        let out = &params.context[target * d..(target + 1) * d];
        let score: f64 = out.iter().zip(&bufs.center).map(|(o, c)| load(o) * c).sum();
        loss += if positive { softplus(-score) } else { softplus(score) };
        let g = lr * (if positive { 1.0 } else { 0.0 } - sigmoid(score));
        for ((o, c), acc) in out.iter().zip(&bufs.center).zip(bufs.delta.iter_mut()) {
            let ov = load(o);
            *acc += g * ov;
            store(o, ov + g * c);
        }
    }
    let input = &params.input[center * d..(center + 1) * d];
    for (cell, acc) in input.iter().zip(&bufs.delta) {
        store(cell, load(cell) + acc);
    }
    loss
}

/// One SGD step on a positive pair and its negatives (rows, not tokens).
/// Returns the loss evaluated before the update. With distinct targets the
/// update is exactly `-lr` times [`pair_gradient`].
pub fn sgd_pair_step(params: &SharedParams, center: usize, context: usize, negatives: &[usize], lr: f64) -> f64 {
    pair_step(
        params,
        &mut StepBuffers::new(params.dim),
        center,
        context,
        negatives,
        lr,
    )
}

fn tie_step(params: &SharedParams, row: usize, partner: usize, rate: f64) {
    let d = params.dim;
    for i in 0..d {
        let (a, b) = (&params.input[row * d + i], &params.input[partner * d + i]);
        let diff = load(a) - load(b);
        store(a, load(a) - rate * diff);
        store(b, load(b) + rate * diff);
    }
}

/// Learned vectors, one row per vocabulary token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    tokens: Vec<u32>,
    index: HashMap<u32, usize>,
    input: Vec<f64>,
    context: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn from_parts(dim: usize, tokens: Vec<u32>, input: Vec<f64>, context: Vec<f64>) -> Self {
        assert_eq!(input.len(), tokens.len() * dim);
        assert_eq!(context.len(), tokens.len() * dim);
        let index = tokens.iter().enumerate().map(|(r, &t)| (t, r)).collect();
        EmbeddingMatrix {
            dim,
            tokens,
            index,
            input,
            context,
        }
    }

    /// Input vectors only; context vectors are zero.
    pub fn from_vectors(dim: usize, tokens: Vec<u32>, input: Vec<f64>) -> Self {
        let context = vec![0.0; input.len()];
        Self::from_parts(dim, tokens, input, context)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn row_of(&self, token: u32) -> Option<usize> {
        self.index.get(&token).copied()
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.input[row * self.dim..(row + 1) * self.dim]
    }

    pub fn context_row(&self, row: usize) -> &[f64] {
        &self.context[row * self.dim..(row + 1) * self.dim]
    }

    pub fn vector(&self, token: u32) -> Option<&[f64]> {
        self.row_of(token).map(|r| self.row(r))
    }

    /// Averages the input vectors of all tokens mapped to the same key.
    /// Keys are ordered by first appearance.
    pub fn collapse<F: Fn(u32) -> u32>(&self, key: F) -> EmbeddingMatrix {
        let mut keys: Vec<u32> = Vec::new();
        let mut slot: HashMap<u32, usize> = HashMap::new();
        let mut sums: Vec<f64> = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        for (r, &t) in self.tokens.iter().enumerate() {
            let k = key(t);
            let s = *slot.entry(k).or_insert_with(|| {
                keys.push(k);
                sums.extend(std::iter::repeat_n(0.0, self.dim));
                counts.push(0.0);
                keys.len() - 1
            });
            counts[s] += 1.0;
            for (acc, x) in sums[s * self.dim..(s + 1) * self.dim].iter_mut().zip(self.row(r)) {
                *acc += x;
            }
        }
        for (s, c) in counts.iter().enumerate() {
            sums[s * self.dim..(s + 1) * self.dim].iter_mut().for_each(|x| *x /= c);
        }
        EmbeddingMatrix::from_vectors(self.dim, keys, sums)
    }
}

/// Exact softmax probability of `context` given `center` over the whole
/// vocabulary, using input vectors for the center and context vectors for
/// the candidates.
pub fn softmax_context_probability(m: &EmbeddingMatrix, center: u32, context: u32) -> Option<f64> {
    let c = m.vector(center)?;
    let target = m.row_of(context)?;
    let scores: Vec<f64> = (0..m.len()).map(|r| dot(c, m.context_row(r))).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    Some((scores[target] - max).exp() / z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub vocab_size: usize,
    pub pairs_per_epoch: u64,
    /// Mean pair loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

/// Initial parameters for a vocabulary.
pub fn initial_params(vocab: &Vocab, cfg: &TrainConfig) -> EmbeddingMatrix {
    let params = SharedParams::zeros(vocab.len(), cfg.dim);
    let mut init = rng::stream(cfg.seed, &[u64::MAX]);
    let bound = 0.5 / cfg.dim as f64;
    for cell in &params.input {
        store(cell, init.gen_range(-bound..bound));
    }
    params.to_matrix(vocab.tokens.clone())
}

pub fn sgd_train<W: AsRef<[u32]> + Sync>(
    walks: &[W],
    cfg: &TrainConfig,
) -> Result<(EmbeddingMatrix, TrainReport), EmbedError> {
    sgd_train_tied(walks, cfg, &[])
}

/// Training that also pulls each `(later, earlier)` token pair in `ties`
/// together with strength `cfg.snapshot_tie` whenever the later token is a
/// center.
pub fn sgd_train_tied<W: AsRef<[u32]> + Sync>(
    walks: &[W],
    cfg: &TrainConfig,
    ties: &[(u32, u32)],
) -> Result<(EmbeddingMatrix, TrainReport), EmbedError> {
    cfg.validate()?;
    let vocab = build_vocab(walks)?;
    let noise = AliasTable::new(&vocab.noise_distribution(cfg.noise_exponent))
        .map_err(|e| EmbedError::InvalidConfig(e.to_string()))?;
    let params = SharedParams::from_matrix(&initial_params(&vocab, cfg));

    let rows: Vec<Vec<u32>> = walks
        .iter()
        .map(|w| w.as_ref().iter().map(|t| vocab.index[t] as u32).collect())
        .collect();
    let mut partner: Vec<Option<usize>> = vec![None; vocab.len()];
    if cfg.snapshot_tie > 0.0 {
        for &(later, earlier) in ties {
            if let (Some(a), Some(b)) = (vocab.row(later), vocab.row(earlier)) {
                partner[a] = Some(b);
            }
        }
    }

    let pairs_per_epoch: u64 = rows.iter().map(|w| pair_count(w.len(), cfg.window)).sum();
    let schedule = Schedule {
        initial: cfg.initial_lr,
        min: cfg.min_lr,
        total: (pairs_per_epoch * cfg.epochs as u64).max(1),
        done: AtomicU64::new(0),
    };

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let ctx = EpochContext {
            epoch,
            params: &params,
            noise: &noise,
            vocab: &vocab,
            partner: &partner,
            cfg,
            schedule: &schedule,
        };
        let (loss, pairs) = if cfg.deterministic || cfg.threads == 1 {
            ctx.run(&rows, &mut rng::stream(cfg.seed, &[epoch as u64, 0]))?
        } else {
            let workers = if cfg.threads == 0 {
                rayon::current_num_threads()
            } else {
                cfg.threads
            };
            let chunk = rows.len().div_ceil(workers).max(1);
            let parts: Vec<Result<(f64, u64), EmbedError>> = rows
                .par_chunks(chunk)
                .enumerate()
                .map(|(i, part)| ctx.run(part, &mut rng::stream(cfg.seed, &[epoch as u64, i as u64 + 1])))
                .collect();
            parts.into_iter().try_fold((0.0, 0u64), |acc, r| {
                let (l, p) = r?;
                Ok::<_, EmbedError>((acc.0 + l, acc.1 + p))
            })?
        };
        if !params.all_finite() {
            return Err(EmbedError::NonFinite {
                epoch,
                token: u32::MAX,
                lr: schedule.current(),
                loss,
            });
        }
        epoch_losses.push(if pairs > 0 { loss / pairs as f64 } else { 0.0 });
    }

    let report = TrainReport {
        vocab_size: vocab.len(),
        pairs_per_epoch,
        epoch_losses,
    };
    Ok((params.to_matrix(vocab.tokens.clone()), report))
}

struct Schedule {
    initial: f64,
    min: f64,
    total: u64,
    done: AtomicU64,
}

impl Schedule {
    fn next(&self) -> f64 {
        let done = self.done.fetch_add(1, Ordering::Relaxed);
        self.at(done)
    }

    fn current(&self) -> f64 {
        self.at(self.done.load(Ordering::Relaxed))
    }

    fn at(&self, done: u64) -> f64 {
        let frac = (done as f64 / self.total as f64).min(1.0);
        (self.initial - (self.initial - self.min) * frac).max(self.min)
    }
}

struct EpochContext<'a> {
    epoch: usize,
    params: &'a SharedParams,
    noise: &'a AliasTable,
    vocab: &'a Vocab,
    partner: &'a [Option<usize>],
    cfg: &'a TrainConfig,
    schedule: &'a Schedule,
}

impl EpochContext<'_> {
    /// Trains on `walks` (as vocabulary rows); returns summed loss and pair count.
    fn run<R: Rng>(&self, walks: &[Vec<u32>], rng: &mut R) -> Result<(f64, u64), EmbedError> {
        let mut bufs = StepBuffers::new(self.cfg.dim);
        let mut negatives = Vec::with_capacity(self.cfg.negatives);
        let (mut total, mut pairs) = (0.0, 0u64);
        for walk in walks {
            for i in 0..walk.len() {
                let center = walk[i] as usize;
                let (lo, hi) = window(i, walk.len(), self.cfg.window);
                for j in (lo..=hi).filter(|&j| j != i) {
                    let context = walk[j] as usize;
                    negatives.clear();
                    for _ in 0..self.cfg.negatives {
                        let mut n = self.noise.sample(rng);
                        let mut tries = 0;
                        while n == context && self.vocab.len() > 1 && tries < 16 {
                            n = self.noise.sample(rng);
                            tries += 1;
                        }
                        negatives.push(n);
                    }
                    let lr = self.schedule.next();
                    let loss = pair_step(self.params, &mut bufs, center, context, &negatives, lr);
                    if !loss.is_finite() {
                        return Err(EmbedError::NonFinite {
                            epoch: self.epoch,
                            token: self.vocab.tokens[center],
                            lr,
                            loss,
                        });
                    }
                    total += loss;
                    pairs += 1;
                }
                if let Some(p) = self.partner[center] {
                    tie_step(self.params, center, p, self.schedule.current() * self.cfg.snapshot_tie);
                }
            }
        }
        Ok((total, pairs))
    }
}

/// Writes `N d` followed by one `label v_1 .. v_d` line per row. Numbers
/// use the shortest representation that parses back to the same value.
pub fn export_embeddings<W: Write>(m: &EmbeddingMatrix, labels: &[String], mut sink: W) -> io::Result<()> {
    writeln!(sink, "{} {}", m.len(), m.dim)?;
    for (r, &t) in m.tokens.iter().enumerate() {
        sink.write_all(labels[t as usize].as_bytes())?;
        for x in m.row(r) {
            write!(sink, " {x}")?;
        }
        sink.write_all(b"\n")?;
    }
    Ok(())
}

/// An embedding file as read from disk, keyed by label.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportedEmbeddings {
    pub dim: usize,
    pub labels: Vec<String>,
    pub vectors: Vec<f64>,
}

impl ImportedEmbeddings {
    /// Maps labels to tokens; rows whose label does not resolve are skipped
    /// and counted.
    pub fn into_matrix<F: Fn(&str) -> Option<u32>>(self, resolve: F) -> (EmbeddingMatrix, usize) {
        let mut tokens = Vec::new();
        let mut input = Vec::new();
        let mut skipped = 0;
        for (r, label) in self.labels.iter().enumerate() {
            match resolve(label) {
                Some(t) => {
                    tokens.push(t);
                    input.extend_from_slice(&self.vectors[r * self.dim..(r + 1) * self.dim]);
                }
                None => skipped += 1,
            }
        }
        (EmbeddingMatrix::from_vectors(self.dim, tokens, input), skipped)
    }
}

pub fn import_embeddings<R: BufRead>(source: R) -> Result<ImportedEmbeddings, EmbedError> {
    let bad = |line: usize, message: String| EmbedError::Format { line, message };
    let mut lines = source.lines();
    let header = lines.next().ok_or_else(|| bad(1, "missing header".into()))??;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|f| f.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| bad(1, format!("bad header: {e}")))?;
    let [n, dim] = head[..] else {
        return Err(bad(1, "header must be `N d`".into()));
    };
    let mut labels = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * dim);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        // Labels may contain spaces; the last `dim` fields are the numbers.
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() < dim + 1 {
            return Err(bad(lineno, format!("expected a label and {dim} numbers")));
        }
        let split = fields.len() - dim;
        labels.push(fields[..split].join(" "));
        for f in &fields[split..] {
            vectors.push(f.parse::<f64>().map_err(|e| bad(lineno, format!("`{f}`: {e}")))?);
        }
    }
    if labels.len() != n {
        return Err(bad(1, format!("header announces {n} rows, found {}", labels.len())));
    }
    Ok(ImportedEmbeddings { dim, labels, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_counts() {
        let walks = vec![vec![0u32, 1], vec![0, 2]];
        let v = build_vocab(&walks).unwrap();
        assert_eq!(v.tokens, vec![0, 1, 2]);
        assert_eq!(v.counts, vec![2, 1, 1]);
        assert_eq!(v.noise_distribution(1.0), vec![0.5, 0.25, 0.25]);
        assert!(matches!(build_vocab::<Vec<u32>>(&[]), Err(EmbedError::EmptyCorpus)));
    }

    #[test]
    fn noise_distribution_with_exponent() {
        let walks = vec![vec![0u32, 0, 0, 0, 1]];
        let p = build_vocab(&walks).unwrap().noise_distribution(0.75);
        let big = 4f64.powf(0.75);
        assert!((p[0] - big / (big + 1.0)).abs() < 1e-12);
        assert!((p[0] - 0.7388).abs() < 1e-4);
        assert!((p[1] - 0.2612).abs() < 1e-4);
    }

    #[test]
    fn pairs_in_window() {
        assert_eq!(positive_pairs(&[0, 1], 5), vec![(0, 1), (1, 0)]);
        assert_eq!(positive_pairs(&[7, 7], 5), vec![(7, 7), (7, 7)]);
        assert_eq!(positive_pairs(&[0, 1, 2], 1), vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
        for len in 1..12 {
            let tokens: Vec<u32> = (0..len).collect();
            for k in 1..5 {
                assert_eq!(
                    positive_pairs(&tokens, k as usize).len() as u64,
                    pair_count(len as usize, k as usize)
                );
            }
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let walks = vec![vec![0u32, 1, 2, 1]];
        let cfg = TrainConfig {
            dim: 8,
            epochs: 0,
            ..Default::default()
        };
        let (m, report) = sgd_train(&walks, &cfg).unwrap();
        let init = initial_params(&build_vocab(&walks).unwrap(), &cfg);
        assert_eq!(m, init);
        assert!(report.epoch_losses.is_empty());
        let bound = 0.5 / 8.0;
        assert!((0..m.len()).all(|r| m.row(r).iter().all(|x| x.abs() <= bound)));
        assert!((0..m.len()).all(|r| m.context_row(r).iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn deterministic_training_is_reproducible() {
        let walks: Vec<Vec<u32>> = (0..20).map(|i| vec![i % 5, (i + 1) % 5, (i + 3) % 5, i % 5]).collect();
        let cfg = TrainConfig {
            dim: 6,
            epochs: 3,
            seed: 4,
            ..Default::default()
        };
        assert_eq!(sgd_train(&walks, &cfg).unwrap(), sgd_train(&walks, &cfg).unwrap());
        let other = TrainConfig { seed: 5, ..cfg.clone() };
        assert_ne!(sgd_train(&walks, &other).unwrap().0, sgd_train(&walks, &cfg).unwrap().0);
    }

    #[test]
    fn parallel_mode_trains() {
        let walks: Vec<Vec<u32>> = (0..200).map(|i| vec![i % 7, (i + 1) % 7, (i + 2) % 7]).collect();
        let cfg = TrainConfig {
            dim: 4,
            epochs: 2,
            deterministic: false,
            threads: 4,
            ..Default::default()
        };
        let (m, report) = sgd_train(&walks, &cfg).unwrap();
        assert_eq!(m.len(), 7);
        assert_eq!(report.epoch_losses.len(), 2);
        assert!(report.epoch_losses.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn divergence_is_reported() {
        let walks = vec![vec![0u32, 1, 0, 1, 0, 1]; 50];
        let cfg = TrainConfig {
            dim: 4,
            epochs: 50,
            initial_lr: 1e200,
            min_lr: 1e199,
            ..Default::default()
        };
        assert!(matches!(sgd_train(&walks, &cfg), Err(EmbedError::NonFinite { .. })));
    }

    #[test]
    fn tie_pulls_snapshot_vectors_together() {
        let walks: Vec<Vec<u32>> = (0..40)
            .map(|i| if i % 2 == 0 { vec![0, 2, 0, 2] } else { vec![1, 3, 1, 3] })
            .collect();
        let base = TrainConfig {
            dim: 8,
            epochs: 5,
            ..Default::default()
        };
        let dist = |m: &EmbeddingMatrix| -> f64 {
            m.vector(0)
                .unwrap()
                .iter()
                .zip(m.vector(1).unwrap())
                .map(|(a, b)| (a - b).powi(2))
                .sum()
        };
        let (free, _) = sgd_train_tied(&walks, &base, &[(1, 0)]).unwrap();
        let tied_cfg = TrainConfig {
            snapshot_tie: 5.0,
            ..base
        };
        let (tied, _) = sgd_train_tied(&walks, &tied_cfg, &[(1, 0)]).unwrap();
        assert!(dist(&tied) < dist(&free));
    }

    #[test]
    fn collapse_averages_rows() {
        let m = EmbeddingMatrix::from_vectors(2, vec![10, 11, 12], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let c = m.collapse(|t| if t == 12 { 1 } else { 0 });
        assert_eq!(c.tokens(), &[0, 1]);
        assert_eq!(c.vector(0).unwrap(), &[2.0, 3.0]);
        assert_eq!(c.vector(1).unwrap(), &[5.0, 6.0]);
    }

    #[test]
    fn export_then_import() {
        let m = EmbeddingMatrix::from_vectors(2, vec![1, 0], vec![0.1, -2.5e-7, 1.0 / 3.0, 7.0]);
        let labels = vec!["alice".to_string(), "bob smith".to_string()];
        let mut buf = Vec::new();
        export_embeddings(&m, &labels, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("2 2\nbob smith 0.1 -0.00000025\n"));
        let imported = import_embeddings(io::Cursor::new(buf)).unwrap();
        assert_eq!(imported.labels, vec!["bob smith", "alice"]);
        let (back, skipped) = imported.into_matrix(|l| labels.iter().position(|x| x == l).map(|p| p as u32));
        assert_eq!(skipped, 0);
        assert_eq!(back.vector(0).unwrap(), m.vector(0).unwrap());
        assert_eq!(back.vector(1).unwrap(), m.vector(1).unwrap());
    }

    #[test]
    fn malformed_embedding_files() {
        assert!(import_embeddings(io::Cursor::new("")).is_err());
        assert!(import_embeddings(io::Cursor::new("1 2\na 0.5\n")).is_err());
        assert!(import_embeddings(io::Cursor::new("2 1\na 0.5\n")).is_err());
        assert!(import_embeddings(io::Cursor::new("1 1\na x\n")).is_err());
    }
}
