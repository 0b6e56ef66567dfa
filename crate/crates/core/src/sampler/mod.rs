//! Transition probabilities and temporal biased walks over a [`TssnGraph`].
//!
//! A walk that sits at `c` after arriving from `t` picks its next edge `e`
//! out of the accessible edges of `c` with probability proportional to
//!
//! ```text
//! W(e) * psi_S(e) * psi_T(e) * psi_R(e)
//! ```
//!
//! where `psi_S` is `1/r`, `1` or `1/q` for candidates at distance 0, 1 or 2
//! from `t`, `psi_T` is `alpha` for a self-connection and `1 - alpha` for an
//! intra-snapshot edge, and `psi_R` is `beta` when the candidate has the
//! same role as `t` and `1 - beta` otherwise (or constant in unbiased role
//! mode). Normalizing each factor over the candidates, multiplying and
//! renormalizing gives the same distribution, since the per-factor
//! normalizers are shared by all candidates.
//!
//! The first step has no predecessor: the structural term is dropped and
//! the start vertex itself is the role reference.

pub mod alias;
pub mod walk;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tssn::{EdgeKind, StateId, TssnEdge, TssnError, TssnGraph, TssnVertex};

pub use alias::AliasTable;
pub use walk::{
    generate_corpus, generate_corpus_with_threads, read_corpus, snapshot_tie_partners, temporal_biased_walk,
    token_base, token_labels, write_corpus, Corpus, Walk, Walker,
};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid walk configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error(transparent)]
    Graph(#[from] TssnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleMode {
    /// Every accessible edge gets the same role factor.
    Unbiased,
    /// Same-role candidates get `beta`, opposite-role candidates `1 - beta`.
    Biased,
}

impl RoleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RoleMode::Unbiased => "unbiased",
            RoleMode::Biased => "biased",
        }
    }
}

impl std::str::FromStr for RoleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "unbiased" => Ok(RoleMode::Unbiased),
            "biased" => Ok(RoleMode::Biased),
            other => Err(format!("unknown role mode '{other}'")),
        }
    }
}

/// What a walk emits for each visited state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenMode {
    /// The base vertex id; a self-connection step repeats the token.
    BaseId,
    /// The [`StateId`] of the `(vertex, snapshot)` state.
    SnapshotId,
}

impl TokenMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenMode::BaseId => "base_id",
            TokenMode::SnapshotId => "snapshot_id",
        }
    }
}

impl std::str::FromStr for TokenMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "base_id" | "base" => Ok(TokenMode::BaseId),
            "snapshot_id" | "snapshot" => Ok(TokenMode::SnapshotId),
            other => Err(format!("unknown token mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Return parameter.
    pub r: f64,
    /// In-out parameter.
    pub q: f64,
    /// Temporal bias, in `[0.1, 0.9]`.
    pub alpha: f64,
    /// Role bias, in `[0.1, 0.9]`.
    pub beta: f64,
    pub role_mode: RoleMode,
    pub walks_per_vertex: usize,
    /// Number of steps; a walk visits at most `walk_length + 1` states.
    pub walk_length: usize,
    pub seed: u64,
    pub token_mode: TokenMode,
    /// Capacity of each walker's second-order alias-table cache; 0 disables it.
    pub cache_capacity: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            r: 1.0,
            q: 1.0,
            alpha: 0.5,
            beta: 0.5,
            role_mode: RoleMode::Unbiased,
            walks_per_vertex: 10,
            walk_length: 80,
            seed: 0,
            token_mode: TokenMode::BaseId,
            cache_capacity: 100_000,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: String| Err(SamplerError::InvalidConfig(m));
        if !(self.r.is_finite() && self.r > 0.0) {
            return bad(format!("r must be positive, got {}", self.r));
        }
        if !(self.q.is_finite() && self.q > 0.0) {
            return bad(format!("q must be positive, got {}", self.q));
        }
        if !(0.1..=0.9).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0.1, 0.9], got {}", self.alpha));
        }
        if !(0.1..=0.9).contains(&self.beta) {
            return bad(format!("beta must lie in [0.1, 0.9], got {}", self.beta));
        }
        if self.walks_per_vertex == 0 {
            return bad("walks_per_vertex must be at least 1".into());
        }
        if self.walk_length == 0 {
            return bad("walk_length must be at least 1".into());
        }
        Ok(())
    }
}

/// Where a walk is and where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepContext {
    pub current: TssnVertex,
    pub previous: Option<TssnVertex>,
}

/// Shortest-path distance (capped at 2) between the previous state and a
/// candidate reached from the current state.
fn distance(g: &TssnGraph, previous: StateId, candidate: StateId) -> u8 {
    if previous == candidate {
        0
    } else if g.adjacent(previous, candidate) {
        1
    } else {
        2
    }
}

fn psi_structural(cfg: &WalkConfig, d: u8) -> f64 {
    match d {
        0 => 1.0 / cfg.r,
        1 => 1.0,
        _ => 1.0 / cfg.q,
    }
}

fn lookup(g: &TssnGraph, v: TssnVertex) -> Result<StateId, SamplerError> {
    g.state_of(v).ok_or(SamplerError::Graph(TssnError::UnknownVertex {
        base: v.base,
        snap: v.snap,
    }))
}

/// `psi_S(e) * W(e)` for a candidate edge; `W(e)` alone on the first step.
pub fn structural_factor(
    g: &TssnGraph,
    ctx: &StepContext,
    e: &TssnEdge,
    cfg: &WalkConfig,
) -> Result<f64, SamplerError> {
    let Some(previous) = ctx.previous else {
        return Ok(e.weight);
    };
    let d = distance(g, lookup(g, previous)?, lookup(g, e.dst)?);
    Ok(psi_structural(cfg, d) * e.weight)
}

/// `alpha` for a self-connection, `1 - alpha` for an intra-snapshot edge.
pub fn temporal_factor(cfg: &WalkConfig, e: &TssnEdge) -> f64 {
    if e.time_accessibility() > 0 {
        cfg.alpha
    } else {
        1.0 - cfg.alpha
    }
}

/// The role factor of a candidate edge. The reference vertex is the
/// previous state, or the current one on the first step.
pub fn role_factor(g: &TssnGraph, ctx: &StepContext, e: &TssnEdge, cfg: &WalkConfig) -> f64 {
    match cfg.role_mode {
        RoleMode::Unbiased => 1.0,
        RoleMode::Biased => {
            let reference = ctx.previous.unwrap_or(ctx.current);
            if g.role(reference.base) == g.role(e.dst.base) {
                cfg.beta
            } else {
                1.0 - cfg.beta
            }
        }
    }
}

/// Accessible edges of the current vertex with their selection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    pub edges: Vec<TssnEdge>,
    pub probs: Vec<f64>,
}

/// The joint transition distribution out of `ctx.current`, or `None` when
/// the vertex has no accessible edge (the walk ends there).
pub fn joint_step_distribution(
    g: &TssnGraph,
    ctx: &StepContext,
    cfg: &WalkConfig,
) -> Result<Option<StepDistribution>, SamplerError> {
    let current = lookup(g, ctx.current)?;
    let previous = ctx.previous.map(|p| lookup(g, p)).transpose()?;
    let mut probs = Vec::new();
    if !step_probabilities(g, previous, current, cfg, &mut probs) {
        return Ok(None);
    }
    Ok(Some(StepDistribution {
        edges: g.edges_from_state(current),
        probs,
    }))
}

/// Fills `out` with the joint step distribution over `g.arcs(current)`,
/// in arc order. Returns false when there are no arcs.
///
/// Factors are taken relative to the intra-edge and same-role cases so
/// that degenerate parameters yield bit-identical weights: with `r = q = 1`
/// and no role bias every weight is exactly `W(e)`, `beta = 0.5` matches
/// unbiased mode, and `alpha` only touches self-connections.
pub(crate) fn step_probabilities(
    g: &TssnGraph,
    previous: Option<StateId>,
    current: StateId,
    cfg: &WalkConfig,
    out: &mut Vec<f64>,
) -> bool {
    out.clear();
    let arcs = g.arcs(current);
    if arcs.is_empty() {
        return false;
    }
    let crossing = cfg.alpha / (1.0 - cfg.alpha);
    let opposite = (1.0 - cfg.beta) / cfg.beta;
    let reference_role = g.role_of_state(previous.unwrap_or(current));

    let mut total = 0.0;
    for arc in arcs {
        let mut w = arc.weight;
        if let Some(prev) = previous {
            w *= psi_structural(cfg, distance(g, prev, arc.to));
        }
        if arc.kind == EdgeKind::SelfConnection {
            w *= crossing;
        }
        if cfg.role_mode == RoleMode::Biased && g.role_of_state(arc.to) != reference_role {
            w *= opposite;
        }
        out.push(w);
        total += w;
    }
    for w in out.iter_mut() {
        *w /= total;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Event, Role, RoleTable, TemporalEdgeList};
    use crate::tssn::{build_tssn, TssnBuildConfig};

    fn graph(events: &[(u32, u32, u64)], roles: &[Role], eps: u64) -> TssnGraph {
        let keys = (0..roles.len()).map(|i| format!("v{i}")).collect();
        let events = events
            .iter()
            .map(|&(src, dst, timestamp)| Event { src, dst, timestamp })
            .collect();
        let edges = TemporalEdgeList::from_parts(events, keys);
        build_tssn(
            &edges,
            &RoleTable::new(roles.to_vec()),
            &TssnBuildConfig::fixed_span(eps),
        )
        .unwrap()
    }

    fn cfg(r: f64, q: f64) -> WalkConfig {
        WalkConfig {
            r,
            q,
            ..Default::default()
        }
    }

    #[test]
    fn structural_factor_by_distance() {
        // Triangle 0-1-2 plus pendant 3 hanging off 1; walk came 0 -> 1.
        use Role::User as U;
        let g = graph(&[(0, 1, 0), (1, 2, 0), (0, 2, 0), (1, 3, 0)], &[U, U, U, U], 10);
        let ctx = StepContext {
            current: TssnVertex::new(1, 0),
            previous: Some(TssnVertex::new(0, 0)),
        };
        let c = cfg(2.0, 0.5);
        let f: Vec<(u32, f64)> = g
            .accessible_edges(ctx.current)
            .unwrap()
            .iter()
            .map(|e| (e.dst.base, structural_factor(&g, &ctx, e, &c).unwrap()))
            .collect();
        assert_eq!(f, vec![(0, 0.5), (2, 1.0), (3, 2.0)]);

        let identity = cfg(1.0, 1.0);
        for e in g.accessible_edges(ctx.current).unwrap() {
            assert_eq!(structural_factor(&g, &ctx, &e, &identity).unwrap(), e.weight);
        }
    }

    #[test]
    fn temporal_factor_values() {
        use Role::User as U;
        let g = graph(&[(0, 1, 0), (0, 1, 15)], &[U, U], 10);
        let c = WalkConfig {
            alpha: 0.3,
            ..Default::default()
        };
        let edges = g.accessible_edges(TssnVertex::new(0, 0)).unwrap();
        assert_eq!(edges.len(), 2);
        assert_eq!(temporal_factor(&c, &edges[0]), 0.7);
        assert_eq!(temporal_factor(&c, &edges[1]), 0.3);
        let half = WalkConfig::default();
        assert_eq!(temporal_factor(&half, &edges[0]), temporal_factor(&half, &edges[1]));
    }

    #[test]
    fn role_factor_values() {
        use Role::{Developer as D, User as U};
        let g = graph(&[(0, 1, 0), (1, 2, 0), (1, 3, 0)], &[U, U, D, D], 10);
        let ctx = StepContext {
            current: TssnVertex::new(1, 0),
            previous: Some(TssnVertex::new(0, 0)),
        };
        let biased = WalkConfig {
            role_mode: RoleMode::Biased,
            beta: 0.2,
            ..Default::default()
        };
        let f: Vec<f64> = g
            .accessible_edges(ctx.current)
            .unwrap()
            .iter()
            .map(|e| role_factor(&g, &ctx, e, &biased))
            .collect();
        assert_eq!(f, vec![0.2, 0.8, 0.8]);
        let d = joint_step_distribution(
            &g,
            &ctx,
            &WalkConfig {
                role_mode: RoleMode::Biased,
                beta: 0.2,
                r: 1.0,
                q: 1.0,
                ..Default::default()
            },
        )
        .unwrap()
        .unwrap();
        // Distance to 0 is 0, to 2 and 3 is 2; with r = q = 1 only roles matter.
        for (p, want) in d.probs.iter().zip([1.0 / 9.0, 4.0 / 9.0, 4.0 / 9.0]) {
            assert!((p - want).abs() < 1e-12);
        }
        let unbiased = WalkConfig::default();
        for e in g.accessible_edges(ctx.current).unwrap() {
            assert_eq!(role_factor(&g, &ctx, &e, &unbiased), 1.0);
        }
    }

    #[test]
    fn single_candidate_is_certain() {
        use Role::User as U;
        let g = graph(&[(0, 1, 0)], &[U, U], 10);
        let ctx = StepContext {
            current: TssnVertex::new(0, 0),
            previous: None,
        };
        let d = joint_step_distribution(&g, &ctx, &cfg(2.0, 0.5)).unwrap().unwrap();
        assert_eq!(d.probs, vec![1.0]);
    }

    #[test]
    fn unknown_vertex_is_a_lookup_error() {
        use Role::User as U;
        let g = graph(&[(0, 1, 0), (1, 2, 15)], &[U, U, U], 10);
        let ctx = StepContext {
            current: TssnVertex::new(0, 1),
            previous: None,
        };
        assert!(joint_step_distribution(&g, &ctx, &WalkConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(WalkConfig::default().validate().is_ok());
        for bad in [
            WalkConfig {
                r: 0.0,
                ..Default::default()
            },
            WalkConfig {
                q: -1.0,
                ..Default::default()
            },
            WalkConfig {
                alpha: 0.95,
                ..Default::default()
            },
            WalkConfig {
                beta: 0.05,
                ..Default::default()
            },
            WalkConfig {
                walk_length: 0,
                ..Default::default()
            },
            WalkConfig {
                walks_per_vertex: 0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
