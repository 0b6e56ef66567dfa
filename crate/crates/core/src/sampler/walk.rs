//! Walk simulation and corpus generation.

use std::io::{self, BufRead, Write};
use std::num::NonZeroUsize;

use lru::LruCache;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{step_probabilities, AliasTable, SamplerError, TokenMode, WalkConfig};
use crate::ingest::VertexId;
use crate::rng;
use crate::tssn::{StateId, TssnGraph, TssnVertex};

/// A temporal walk: the visited states and the tokens they emit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub tokens: Vec<u32>,
    pub states: Vec<TssnVertex>,
}

impl Walk {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl AsRef<[u32]> for Walk {
    fn as_ref(&self) -> &[u32] {
        &self.tokens
    }
}

type TransitionKey = (Option<StateId>, StateId);

/// Samples walks over one graph, caching the alias table of every
/// `(previous, current)` transition it has seen, up to the configured
/// capacity.
pub struct Walker<'g> {
    graph: &'g TssnGraph,
    cfg: WalkConfig,
    cache: Option<LruCache<TransitionKey, AliasTable>>,
    scratch: Vec<f64>,
}

impl<'g> Walker<'g> {
    pub fn new(graph: &'g TssnGraph, cfg: &WalkConfig) -> Self {
        Walker {
            graph,
            cfg: cfg.clone(),
            cache: NonZeroUsize::new(cfg.cache_capacity).map(LruCache::new),
            scratch: Vec::new(),
        }
    }

    fn table(graph: &TssnGraph, cfg: &WalkConfig, scratch: &mut Vec<f64>, key: TransitionKey) -> AliasTable {
        step_probabilities(graph, key.0, key.1, cfg, scratch);
        AliasTable::new(scratch).expect("step probabilities are normalized")
    }

    /// Index into `graph.arcs(current)` of the next arc.
    fn next_arc<R: Rng + ?Sized>(&mut self, previous: Option<StateId>, current: StateId, rng: &mut R) -> usize {
        let key = (previous, current);
        let Walker {
            graph,
            cfg,
            cache,
            scratch,
        } = self;
        match cache {
            Some(cache) => cache
                .get_or_insert(key, || Self::table(graph, cfg, scratch, key))
                .sample(rng),
            None => Self::table(graph, cfg, scratch, key).sample(rng),
        }
    }

    fn token(&self, state: StateId) -> u32 {
        match self.cfg.token_mode {
            TokenMode::BaseId => self.graph.vertex(state).base,
            TokenMode::SnapshotId => state,
        }
    }

    /// A walk of at most `walk_length + 1` states from `start`. It stops
    /// early at a state with no accessible edge.
    pub fn walk<R: Rng + ?Sized>(&mut self, start: StateId, rng: &mut R) -> Walk {
        let capacity = self.cfg.walk_length + 1;
        let mut tokens = Vec::with_capacity(capacity);
        let mut states = Vec::with_capacity(capacity);
        let (mut previous, mut current) = (None, start);
        tokens.push(self.token(current));
        states.push(self.graph.vertex(current));
        for _ in 0..self.cfg.walk_length {
            if self.graph.arcs(current).is_empty() {
                break;
            }
            let i = self.next_arc(previous, current, rng);
            let next = self.graph.arcs(current)[i].to;
            previous = Some(current);
            current = next;
            tokens.push(self.token(current));
            states.push(self.graph.vertex(current));
        }
        Walk { tokens, states }
    }
}

/// A single temporal biased walk from `start`.
pub fn temporal_biased_walk<R: Rng + ?Sized>(
    graph: &TssnGraph,
    start: TssnVertex,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<Walk, SamplerError> {
    cfg.validate()?;
    let state = graph.state_of(start).ok_or(crate::tssn::TssnError::UnknownVertex {
        base: start.base,
        snap: start.snap,
    })?;
    Ok(Walker::new(graph, cfg).walk(state, rng))
}

/// All walks generated for one graph and configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub walks: Vec<Walk>,
    pub token_mode: TokenMode,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Walk::len).sum()
    }
}

const SHUFFLE_STREAM: u64 = u64::MAX;

/// Starts `walks_per_vertex` walks from every state, visiting states in a
/// freshly shuffled order in each round. Walks with fewer than two tokens
/// are dropped.
///
/// Every walk draws from its own stream derived from `(seed, round,
/// state)`, so the corpus does not depend on how many threads produce it.
pub fn generate_corpus(graph: &TssnGraph, cfg: &WalkConfig) -> Result<Corpus, SamplerError> {
    cfg.validate()?;
    let n = graph.state_count() as StateId;
    let mut jobs: Vec<(u64, StateId)> = Vec::with_capacity(n as usize * cfg.walks_per_vertex);
    let mut order: Vec<StateId> = (0..n).collect();
    for round in 0..cfg.walks_per_vertex as u64 {
        order.shuffle(&mut rng::stream(cfg.seed, &[SHUFFLE_STREAM, round]));
        jobs.extend(order.iter().map(|&s| (round, s)));
    }
    let walks = jobs
        .par_iter()
        .map_init(
            || Walker::new(graph, cfg),
            |walker, &(round, state)| {
                let mut stream = rng::stream(cfg.seed, &[round, state as u64]);
                walker.walk(state, &mut stream)
            },
        )
        .filter(|w| w.len() >= 2)
        .collect();
    Ok(Corpus {
        walks,
        token_mode: cfg.token_mode,
    })
}

/// [`generate_corpus`] on a dedicated pool of `threads` workers
/// (0 = rayon's default).
pub fn generate_corpus_with_threads(
    graph: &TssnGraph,
    cfg: &WalkConfig,
    threads: usize,
) -> Result<Corpus, SamplerError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SamplerError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| generate_corpus(graph, cfg))
}

/// Human-readable label of every token, indexed by token: vertex keys in
/// base-id mode, `key@snapshot` in snapshot mode.
pub fn token_labels(graph: &TssnGraph, mode: TokenMode, keys: &[String]) -> Vec<String> {
    match mode {
        TokenMode::BaseId => keys.to_vec(),
        TokenMode::SnapshotId => graph
            .states()
            .iter()
            .map(|s| format!("{}@{}", keys[s.base as usize], s.snap))
            .collect(),
    }
}

/// The base vertex a token stands for.
pub fn token_base(graph: &TssnGraph, mode: TokenMode, token: u32) -> VertexId {
    match mode {
        TokenMode::BaseId => token,
        TokenMode::SnapshotId => graph.vertex(token).base,
    }
}

/// `(later, earlier)` snapshot-token pairs joined by a self-connection.
pub fn snapshot_tie_partners(graph: &TssnGraph) -> Vec<(u32, u32)> {
    (0..graph.state_count() as StateId)
        .flat_map(|s| {
            graph
                .arcs(s)
                .iter()
                .filter(|a| a.kind == crate::tssn::EdgeKind::SelfConnection)
                .map(move |a| (a.to, s))
        })
        .collect()
}

/// One walk per line, tokens separated by single spaces.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut sink: W) -> io::Result<()> {
    for walk in &corpus.walks {
        let mut first = true;
        for t in &walk.tokens {
            if !first {
                sink.write_all(b" ")?;
            }
            write!(sink, "{t}")?;
            first = false;
        }
        sink.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(source: R) -> io::Result<Vec<Vec<u32>>> {
    let mut walks = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let walk = line
            .split_whitespace()
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: bad token `{t}`", i + 1)))
            })
            .collect::<io::Result<Vec<u32>>>()?;
        walks.push(walk);
    }
    Ok(walks)
}
