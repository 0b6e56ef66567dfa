//! Time-series snapshot network construction and accessible-edge queries.
//!
//! Events are bucketed into snapshots; inside a snapshot every unordered
//! vertex pair with at least one event becomes an undirected edge whose
//! weight is the event count. A vertex present in snapshots `t` and `t+1`
//! additionally gets a directed self-connection `(v, t) -> (v, t+1)`.
//! Snapshots without events are kept as empty layers, and self-connections
//! never bridge across them.
//!
//! Every `(vertex, snapshot)` state gets a dense [`StateId`]. States are
//! ordered by snapshot, then by base vertex id.

use std::collections::BTreeMap;
use std::io::{self, Write};

use chrono::{DateTime, Datelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Role, RoleTable, TemporalEdgeList, VertexId};

/// Dense index of a `(vertex, snapshot)` state inside a [`TssnGraph`].
pub type StateId = u32;

#[derive(Debug, Error, PartialEq)]
pub enum TssnError {
    #[error("cannot build a snapshot network from an empty edge list")]
    EmptyEdgeList,
    #[error("invalid build configuration: {0}")]
    InvalidConfig(String),
    #[error("timestamp {timestamp} precedes the snapshot origin {origin}")]
    BeforeOrigin { timestamp: u64, origin: u64 },
    #[error("timestamp {0} cannot be mapped to a calendar month")]
    BadTimestamp(u64),
    #[error("vertex {base} is not present in snapshot {snap}")]
    UnknownVertex { base: VertexId, snap: u32 },
    #[error("vertex {0} has no role")]
    MissingRole(VertexId),
}

/// How events are assigned to snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Bucketing {
    /// `floor((timestamp - origin) / epsilon)`; the origin defaults to the
    /// first event's timestamp.
    FixedSpan { epsilon: u64, origin: Option<u64> },
    /// Consecutive blocks of `events_per_snapshot` events in time order.
    FixedCount { events_per_snapshot: usize },
    /// Calendar months (UTC), counted from the month of the first event.
    CalendarMonth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TssnBuildConfig {
    pub bucketing: Bucketing,
    /// Weight carried by every self-connection.
    pub self_weight: f64,
}

/// Thirty days, in seconds.
pub const MONTH_SECS: u64 = 30 * 24 * 3600;

impl Default for TssnBuildConfig {
    fn default() -> Self {
        TssnBuildConfig {
            bucketing: Bucketing::FixedSpan {
                epsilon: MONTH_SECS,
                origin: None,
            },
            self_weight: 1.0,
        }
    }
}

impl TssnBuildConfig {
    pub fn fixed_span(epsilon: u64) -> Self {
        TssnBuildConfig {
            bucketing: Bucketing::FixedSpan { epsilon, origin: None },
            ..Default::default()
        }
    }

    pub fn fixed_count(events_per_snapshot: usize) -> Self {
        TssnBuildConfig {
            bucketing: Bucketing::FixedCount { events_per_snapshot },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), TssnError> {
        match self.bucketing {
            Bucketing::FixedSpan { epsilon: 0, .. } => {
                return Err(TssnError::InvalidConfig("epsilon must be positive".into()))
            }
            Bucketing::FixedCount { events_per_snapshot: 0 } => {
                return Err(TssnError::InvalidConfig(
                    "events_per_snapshot must be at least 1".into(),
                ))
            }
            _ => {}
        }
        if !(self.self_weight.is_finite() && self.self_weight > 0.0) {
            return Err(TssnError::InvalidConfig("self_weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TssnVertex {
    pub base: VertexId,
    pub snap: u32,
}

impl TssnVertex {
    pub fn new(base: VertexId, snap: u32) -> Self {
        TssnVertex { base, snap }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Intra,
    SelfConnection,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Intra => "intra",
            EdgeKind::SelfConnection => "self",
        }
    }
}

/// An oriented edge of the snapshot network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TssnEdge {
    pub src: TssnVertex,
    pub dst: TssnVertex,
    pub weight: f64,
    pub kind: EdgeKind,
}

impl TssnEdge {
    /// Snapshot difference `dst.snap - src.snap`.
    pub fn time_accessibility(&self) -> i64 {
        self.dst.snap as i64 - self.src.snap as i64
    }
}

/// Outgoing arc stored in the state adjacency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub to: StateId,
    pub weight: f64,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotStats {
    pub snapshot: u32,
    pub vertices: usize,
    pub edges: usize,
    pub total_weight: f64,
}

/// The layered snapshot graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct TssnGraph {
    states: Vec<TssnVertex>,
    /// `states[offsets[t]..offsets[t + 1]]` are the states of snapshot `t`.
    offsets: Vec<usize>,
    /// Intra arcs sorted by target, followed by at most one self-connection.
    arcs: Vec<Vec<Arc>>,
    roles: Vec<Role>,
    base_count: usize,
    event_count: usize,
}

impl TssnGraph {
    pub fn snapshot_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Size of the base vertex dictionary (including vertices without states).
    pub fn base_count(&self) -> usize {
        self.base_count
    }

    /// Number of events aggregated into intra-snapshot weights.
    pub fn event_count(&self) -> usize {
        self.event_count
    }

    pub fn states(&self) -> &[TssnVertex] {
        &self.states
    }

    pub fn vertex(&self, state: StateId) -> TssnVertex {
        self.states[state as usize]
    }

    pub fn snapshot_states(&self, snap: u32) -> std::ops::Range<StateId> {
        let t = snap as usize;
        self.offsets[t] as StateId..self.offsets[t + 1] as StateId
    }

    pub fn state_of(&self, v: TssnVertex) -> Option<StateId> {
        let t = v.snap as usize;
        if t >= self.snapshot_count() {
            return None;
        }
        let (lo, hi) = (self.offsets[t], self.offsets[t + 1]);
        self.states[lo..hi]
            .binary_search_by_key(&v.base, |s| s.base)
            .ok()
            .map(|i| (lo + i) as StateId)
    }

    /// Outgoing arcs of a state: its accessible edges in stored form.
    pub fn arcs(&self, state: StateId) -> &[Arc] {
        &self.arcs[state as usize]
    }

    pub fn role(&self, base: VertexId) -> Role {
        self.roles[base as usize]
    }

    pub fn role_of_state(&self, state: StateId) -> Role {
        self.roles[self.states[state as usize].base as usize]
    }

    /// Whether two states are joined by any stored edge, in either
    /// direction. Self-connections count.
    pub fn adjacent(&self, a: StateId, b: StateId) -> bool {
        let (va, vb) = (self.vertex(a), self.vertex(b));
        if va.snap == vb.snap {
            self.arcs(a)
                .binary_search_by(|arc| {
                    if arc.kind == EdgeKind::SelfConnection {
                        std::cmp::Ordering::Greater
                    } else {
                        arc.to.cmp(&b)
                    }
                })
                .is_ok()
        } else if va.base == vb.base && va.snap.abs_diff(vb.snap) == 1 {
            // Self-connections exist exactly between consecutive copies.
            true
        } else {
            false
        }
    }

    /// Edges whose source is `v` and whose time accessibility is
    /// non-negative: the intra edges incident to `v`, oriented outward, plus
    /// the outgoing self-connection when one exists.
    pub fn accessible_edges(&self, v: TssnVertex) -> Result<Vec<TssnEdge>, TssnError> {
        let state = self.state_of(v).ok_or(TssnError::UnknownVertex {
            base: v.base,
            snap: v.snap,
        })?;
        Ok(self.edges_from_state(state))
    }

    pub fn edges_from_state(&self, state: StateId) -> Vec<TssnEdge> {
        let src = self.vertex(state);
        self.arcs(state)
            .iter()
            .map(|a| TssnEdge {
                src,
                dst: self.vertex(a.to),
                weight: a.weight,
                kind: a.kind,
            })
            .collect()
    }

    /// All stored self-connections, in state order.
    pub fn self_connections(&self) -> Vec<TssnEdge> {
        (0..self.state_count() as StateId)
            .flat_map(|s| self.edges_from_state(s))
            .filter(|e| e.kind == EdgeKind::SelfConnection)
            .collect()
    }

    pub fn snapshot_stats(&self) -> Vec<SnapshotStats> {
        (0..self.snapshot_count() as u32)
            .map(|t| {
                let range = self.snapshot_states(t);
                let (mut arcs, mut weight) = (0usize, 0.0);
                for s in range.clone() {
                    for a in self.arcs(s).iter().filter(|a| a.kind == EdgeKind::Intra) {
                        arcs += 1;
                        weight += a.weight;
                    }
                }
                SnapshotStats {
                    snapshot: t,
                    vertices: range.len(),
                    edges: arcs / 2,
                    total_weight: weight / 2.0,
                }
            })
            .collect()
    }

    /// Writes `src_base src_snap dst_base dst_snap weight kind`, one line per
    /// edge. Undirected intra edges are written once, smaller base first.
    pub fn write_dump<W: Write>(&self, mut sink: W) -> io::Result<()> {
        for state in 0..self.state_count() as StateId {
            let src = self.vertex(state);
            for arc in self.arcs(state) {
                let dst = self.vertex(arc.to);
                if arc.kind == EdgeKind::Intra && dst.base < src.base {
                    continue;
                }
                writeln!(
                    sink,
                    "{} {} {} {} {} {}",
                    src.base,
                    src.snap,
                    dst.base,
                    dst.snap,
                    arc.weight,
                    arc.kind.as_str()
                )?;
            }
        }
        Ok(())
    }
}

fn month_index(timestamp: u64) -> Result<i64, TssnError> {
    let dt = i64::try_from(timestamp)
        .ok()
        .and_then(|secs| DateTime::from_timestamp(secs, 0))
        .ok_or(TssnError::BadTimestamp(timestamp))?;
    Ok(dt.year() as i64 * 12 + dt.month0() as i64)
}

/// Snapshot index of every event, in event order.
fn assign_snapshots(edges: &TemporalEdgeList, cfg: &TssnBuildConfig) -> Result<Vec<u32>, TssnError> {
    let events = edges.events();
    let first = events[0].timestamp;
    match cfg.bucketing {
        Bucketing::FixedSpan { epsilon, origin } => {
            let origin = origin.unwrap_or(first);
            events
                .iter()
                .map(|e| {
                    if e.timestamp < origin {
                        Err(TssnError::BeforeOrigin {
                            timestamp: e.timestamp,
                            origin,
                        })
                    } else {
                        Ok(((e.timestamp - origin) / epsilon) as u32)
                    }
                })
                .collect()
        }
        Bucketing::FixedCount { events_per_snapshot } => {
            Ok((0..events.len()).map(|i| (i / events_per_snapshot) as u32).collect())
        }
        Bucketing::CalendarMonth => {
            let m0 = month_index(first)?;
            events
                .iter()
                .map(|e| Ok((month_index(e.timestamp)? - m0) as u32))
                .collect()
        }
    }
}

/// Builds the snapshot network. Every vertex touched by the edge list must
/// have a role.
pub fn build_tssn(edges: &TemporalEdgeList, roles: &RoleTable, cfg: &TssnBuildConfig) -> Result<TssnGraph, TssnError> {
    cfg.validate()?;
    if edges.is_empty() {
        return Err(TssnError::EmptyEdgeList);
    }
    let snaps = assign_snapshots(edges, cfg)?;
    let snapshot_count = *snaps.iter().max().expect("non-empty") as usize + 1;

    // Per snapshot: unordered pair -> event count.
    let mut layers: Vec<BTreeMap<(VertexId, VertexId), u64>> = vec![BTreeMap::new(); snapshot_count];
    for (e, &t) in edges.events().iter().zip(&snaps) {
        for v in [e.src, e.dst] {
            if roles.get(v).is_none() {
                return Err(TssnError::MissingRole(v));
            }
        }
        *layers[t as usize].entry(e.pair()).or_insert(0) += 1;
    }

    let mut states = Vec::new();
    let mut offsets = vec![0usize];
    for layer in &layers {
        let mut present: Vec<VertexId> = layer.keys().flat_map(|&(a, b)| [a, b]).collect();
        present.sort_unstable();
        present.dedup();
        states.extend(
            present
                .into_iter()
                .map(|base| TssnVertex::new(base, offsets.len() as u32 - 1)),
        );
        offsets.push(states.len());
    }

    let local = |t: usize, base: VertexId| -> StateId {
        let (lo, hi) = (offsets[t], offsets[t + 1]);
        let i = states[lo..hi]
            .binary_search_by_key(&base, |s| s.base)
            .expect("endpoint is present in its snapshot");
        (lo + i) as StateId
    };

    let mut arcs: Vec<Vec<Arc>> = vec![Vec::new(); states.len()];
    for (t, layer) in layers.iter().enumerate() {
        for (&(a, b), &count) in layer {
            let (sa, sb) = (local(t, a), local(t, b));
            let weight = count as f64;
            arcs[sa as usize].push(Arc {
                to: sb,
                weight,
                kind: EdgeKind::Intra,
            });
            arcs[sb as usize].push(Arc {
                to: sa,
                weight,
                kind: EdgeKind::Intra,
            });
        }
    }
    for list in &mut arcs {
        list.sort_by_key(|a| a.to);
    }

    // Self-connections: merge the sorted state lists of t and t+1.
    for t in 0..snapshot_count.saturating_sub(1) {
        let (mut i, mut j) = (offsets[t], offsets[t + 1]);
        let (end_i, end_j) = (offsets[t + 1], offsets[t + 2]);
        while i < end_i && j < end_j {
            match states[i].base.cmp(&states[j].base) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    arcs[i].push(Arc {
                        to: j as StateId,
                        weight: cfg.self_weight,
                        kind: EdgeKind::SelfConnection,
                    });
                    i += 1;
                    j += 1;
                }
            }
        }
    }

    Ok(TssnGraph {
        states,
        offsets,
        arcs,
        roles: roles.as_slice().to_vec(),
        base_count: edges.vertex_count(),
        event_count: edges.len(),
    })
}
