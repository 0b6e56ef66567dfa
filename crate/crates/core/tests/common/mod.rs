//! Random small logs and a brute-force reading of the transition rule
//! that does not go through `TssnGraph`.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use tssn_core::ingest::{clean_and_index, RawEvent};
use tssn_core::sampler::{RoleMode, WalkConfig};
use tssn_core::tssn::{build_tssn, Bucketing, TssnBuildConfig};
use tssn_core::{Role, RoleTable, TemporalEdgeList, TssnGraph};

pub const EPS: u64 = 100;

/// Up to `max_vertices` vertices spread over up to `max_snaps` snapshots
/// of width [`EPS`] starting at time 0. Roles are random.
pub fn random_log<R: Rng>(
    rng: &mut R,
    max_vertices: usize,
    max_snaps: u64,
    max_events: usize,
) -> (TemporalEdgeList, RoleTable) {
    let n = rng.gen_range(2..=max_vertices);
    let snaps = rng.gen_range(1..=max_snaps);
    let roles: HashMap<String, Role> = (0..n)
        .map(|i| {
            (
                format!("v{i}"),
                if rng.gen_bool(0.5) { Role::User } else { Role::Developer },
            )
        })
        .collect();
    let count = rng.gen_range(1..=max_events);
    let raw: Vec<RawEvent> = (0..count)
        .map(|_| {
            let a = rng.gen_range(0..n);
            let b = (a + rng.gen_range(1..n)) % n;
            let t = rng.gen_range(0..snaps) * EPS + rng.gen_range(0..EPS);
            RawEvent::new(format!("v{a}"), format!("v{b}"), t)
        })
        .collect();
    clean_and_index(raw, &roles).expect("every key has a role")
}

pub fn config(eps: u64) -> TssnBuildConfig {
    TssnBuildConfig {
        bucketing: Bucketing::FixedSpan {
            epsilon: eps,
            origin: Some(0),
        },
        self_weight: 1.0,
    }
}

pub fn graph(edges: &TemporalEdgeList, roles: &RoleTable, eps: u64) -> TssnGraph {
    build_tssn(edges, roles, &config(eps)).unwrap()
}

/// `(base, snapshot)`
pub type Node = (u32, u32);

/// The snapshot network as plain sets and maps, built straight from the
/// events.
pub struct Oracle {
    pub layers: Vec<BTreeMap<(u32, u32), f64>>,
    pub present: Vec<BTreeSet<u32>>,
    pub roles: Vec<Role>,
    pub self_weight: f64,
}

impl Oracle {
    pub fn new(edges: &TemporalEdgeList, roles: &RoleTable, eps: u64) -> Oracle {
        let snaps = edges.events().iter().map(|e| e.timestamp / eps).max().unwrap_or(0) as usize + 1;
        let mut layers = vec![BTreeMap::new(); snaps];
        let mut present = vec![BTreeSet::new(); snaps];
        for e in edges.events() {
            let t = (e.timestamp / eps) as usize;
            *layers[t].entry((e.src.min(e.dst), e.src.max(e.dst))).or_insert(0.0) += 1.0;
            present[t].insert(e.src);
            present[t].insert(e.dst);
        }
        Oracle {
            layers,
            present,
            roles: roles.as_slice().to_vec(),
            self_weight: 1.0,
        }
    }

    pub fn nodes(&self) -> Vec<Node> {
        self.present
            .iter()
            .enumerate()
            .flat_map(|(t, set)| set.iter().map(move |&b| (b, t as u32)))
            .collect()
    }

    fn pair_weight(&self, t: u32, a: u32, b: u32) -> Option<f64> {
        self.layers[t as usize].get(&(a.min(b), a.max(b))).copied()
    }

    /// `(target, weight, is_self_connection)` for every edge leaving `v`
    /// without going back in time.
    pub fn accessible(&self, v: Node) -> Vec<(Node, f64, bool)> {
        let (b, t) = v;
        let mut out: Vec<(Node, f64, bool)> = self.present[t as usize]
            .iter()
            .filter_map(|&x| self.pair_weight(t, b, x).map(|w| ((x, t), w, false)))
            .collect();
        if self.present.get(t as usize + 1).is_some_and(|next| next.contains(&b)) {
            out.push(((b, t + 1), self.self_weight, true));
        }
        out
    }

    pub fn adjacent(&self, a: Node, b: Node) -> bool {
        if a.1 == b.1 {
            a.0 != b.0 && self.pair_weight(a.1, a.0, b.0).is_some()
        } else {
            a.0 == b.0
                && a.1.abs_diff(b.1) == 1
                && self.present[a.1 as usize].contains(&a.0)
                && self.present[b.1 as usize].contains(&b.0)
        }
    }

    /// Each factor normalized over the candidates, multiplied, then
    /// renormalized.
    pub fn distribution(&self, previous: Option<Node>, current: Node, cfg: &WalkConfig) -> BTreeMap<Node, f64> {
        let cands = self.accessible(current);
        if cands.is_empty() {
            return BTreeMap::new();
        }
        let normalized = |v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let w = normalized(cands.iter().map(|c| c.1).collect());
        let structural = normalized(
            cands
                .iter()
                .map(|&(x, _, _)| match previous {
                    None => 1.0,
                    Some(p) if p == x => 1.0 / cfg.r,
                    Some(p) if self.adjacent(p, x) => 1.0,
                    Some(_) => 1.0 / cfg.q,
                })
                .collect(),
        );
        let temporal = normalized(
            cands
                .iter()
                .map(|&(_, _, is_self)| if is_self { cfg.alpha } else { 1.0 - cfg.alpha })
                .collect(),
        );
        let reference = self.roles[previous.unwrap_or(current).0 as usize];
        let role = normalized(
            cands
                .iter()
                .map(|&(x, _, _)| match cfg.role_mode {
                    RoleMode::Unbiased => 1.0,
                    RoleMode::Biased if self.roles[x.0 as usize] == reference => cfg.beta,
                    RoleMode::Biased => 1.0 - cfg.beta,
                })
                .collect(),
        );
        let joint = normalized(
            (0..cands.len())
                .map(|i| w[i] * structural[i] * temporal[i] * role[i])
                .collect(),
        );
        cands.iter().map(|c| c.0).zip(joint).collect()
    }
}

pub fn random_walk_config<R: Rng>(rng: &mut R) -> WalkConfig {
    WalkConfig {
        r: rng.gen_range(0.25..4.0),
        q: rng.gen_range(0.25..4.0),
        alpha: rng.gen_range(0.1..=0.9),
        beta: rng.gen_range(0.1..=0.9),
        role_mode: if rng.gen_bool(0.5) {
            RoleMode::Biased
        } else {
            RoleMode::Unbiased
        },
        ..WalkConfig::default()
    }
}

/// Weighted first-order walks on the static graph of `edges`, written
/// without the snapshot network. Jobs and random streams follow the
/// temporal walker's protocol: rounds over a reshuffled vertex order, one
/// stream per `(round, vertex)`.
pub fn plain_first_order_walks(edges: &TemporalEdgeList, walk: &WalkConfig) -> Vec<Vec<u32>> {
    use rand::seq::SliceRandom;
    use tssn_core::rng;
    use tssn_core::sampler::AliasTable;

    let mut adj: BTreeMap<u32, BTreeMap<u32, f64>> = BTreeMap::new();
    for e in edges.events() {
        *adj.entry(e.src).or_default().entry(e.dst).or_insert(0.0) += 1.0;
        *adj.entry(e.dst).or_default().entry(e.src).or_insert(0.0) += 1.0;
    }
    let vertices: Vec<u32> = adj.keys().copied().collect();
    let index: BTreeMap<u32, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let neighbours: Vec<Vec<usize>> = vertices
        .iter()
        .map(|v| adj[v].keys().map(|u| index[u]).collect())
        .collect();
    let tables: Vec<AliasTable> = vertices
        .iter()
        .map(|v| {
            let total: f64 = adj[v].values().sum();
            let probs: Vec<f64> = adj[v].values().map(|w| w / total).collect();
            AliasTable::new(&probs).unwrap()
        })
        .collect();

    let mut walks = Vec::new();
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    for round in 0..walk.walks_per_vertex as u64 {
        order.shuffle(&mut rng::stream(walk.seed, &[u64::MAX, round]));
        for &start in &order {
            let mut stream = rng::stream(walk.seed, &[round, start as u64]);
            let mut current = start;
            let mut tokens = vec![vertices[current]];
            for _ in 0..walk.walk_length {
                current = neighbours[current][tables[current].sample(&mut stream)];
                tokens.push(vertices[current]);
            }
            walks.push(tokens);
        }
    }
    walks
}
