//! Train/test splits and negative sampling.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingest::{Role, RoleTable, TemporalEdgeList, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Hide a random fraction of the distinct linked pairs.
    #[default]
    Traditional,
    /// Train on the earliest events; test on pairs first linked later.
    TimePreserving,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Traditional => "traditional",
            Protocol::TimePreserving => "time_preserving",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "traditional" => Ok(Protocol::Traditional),
            "time_preserving" | "timepreserving" => Ok(Protocol::TimePreserving),
            other => Err(format!("unknown protocol '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub protocol: Protocol,
    pub test_fraction: f64,
    /// Negatives sampled per test positive.
    pub negative_ratio: f64,
    /// Draw negatives from user-developer pairs only.
    pub restrict_cross_role: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            protocol: Protocol::Traditional,
            test_fraction: 0.25,
            negative_ratio: 1.0,
            restrict_cross_role: false,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(EvalError::Invalid(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if !(self.negative_ratio > 0.0 && self.negative_ratio.is_finite()) {
            return Err(EvalError::Invalid(format!(
                "negative_ratio must be positive, got {}",
                self.negative_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: TemporalEdgeList,
    pub positives: Vec<(VertexId, VertexId)>,
    pub negatives: Vec<(VertexId, VertexId)>,
}

pub fn make_split<R: Rng + ?Sized>(
    edges: &TemporalEdgeList,
    roles: &RoleTable,
    spec: &SplitSpec,
    rng: &mut R,
) -> Result<Split, EvalError> {
    spec.validate()?;
    let (train, positives) = match spec.protocol {
        Protocol::Traditional => {
            let mut pairs = edges.distinct_pairs();
            pairs.shuffle(rng);
            let n_test = (pairs.len() as f64 * spec.test_fraction).round() as usize;
            let hidden: HashSet<(VertexId, VertexId)> = pairs[..n_test].iter().copied().collect();
            let kept = edges
                .events()
                .iter()
                .filter(|e| !hidden.contains(&e.pair()))
                .copied()
                .collect();
            (edges.with_events(kept), pairs[..n_test].to_vec())
        }
        Protocol::TimePreserving => {
            let n_train = (edges.len() as f64 * (1.0 - spec.test_fraction)).round() as usize;
            let (head, tail) = edges.events().split_at(n_train);
            let seen: HashSet<(VertexId, VertexId)> = head.iter().map(|e| e.pair()).collect();
            let mut fresh = HashSet::new();
            let positives = tail
                .iter()
                .map(|e| e.pair())
                .filter(|p| !seen.contains(p) && fresh.insert(*p))
                .collect();
            (edges.with_events(head.to_vec()), positives)
        }
    };
    if positives.is_empty() {
        return Err(EvalError::NoPositives);
    }
    let needed = (positives.len() as f64 * spec.negative_ratio).round() as usize;
    let negatives = sample_negatives(edges, roles, needed, spec.restrict_cross_role, rng)?;
    Ok(Split {
        train,
        positives,
        negatives,
    })
}

/// `count` distinct vertex pairs never linked anywhere in `edges`, drawn
/// uniformly among the vertices that take part in at least one event.
pub fn sample_negatives<R: Rng + ?Sized>(
    edges: &TemporalEdgeList,
    roles: &RoleTable,
    count: usize,
    cross_role_only: bool,
    rng: &mut R,
) -> Result<Vec<(VertexId, VertexId)>, EvalError> {
    let linked: HashSet<(VertexId, VertexId)> = edges.events().iter().map(|e| e.pair()).collect();
    let mut active = vec![false; edges.vertex_count()];
    for e in edges.events() {
        active[e.src as usize] = true;
        active[e.dst as usize] = true;
    }
    let vertices: Vec<VertexId> = (0..active.len() as VertexId).filter(|&v| active[v as usize]).collect();
    let users: Vec<VertexId> = vertices
        .iter()
        .copied()
        .filter(|&v| roles.role(v) == Role::User)
        .collect();
    let developers: Vec<VertexId> = vertices
        .iter()
        .copied()
        .filter(|&v| roles.role(v) == Role::Developer)
        .collect();

    let candidates = if cross_role_only {
        users.len() * developers.len()
    } else {
        vertices.len() * vertices.len().saturating_sub(1) / 2
    };
    let linked_candidates = if cross_role_only {
        linked.iter().filter(|&&(u, v)| roles.role(u) != roles.role(v)).count()
    } else {
        linked.len()
    };
    let available = candidates - linked_candidates;
    if count > available {
        return Err(EvalError::TooFewNegatives {
            needed: count,
            available,
        });
    }

    let draw = |rng: &mut R| -> (VertexId, VertexId) {
        if cross_role_only {
            let u = users[rng.gen_range(0..users.len())];
            let d = developers[rng.gen_range(0..developers.len())];
            (u.min(d), u.max(d))
        } else {
            let a = rng.gen_range(0..vertices.len());
            let mut b = rng.gen_range(0..vertices.len() - 1);
            if b >= a {
                b += 1;
            }
            let (u, v) = (vertices[a], vertices[b]);
            (u.min(v), u.max(v))
        }
    };

    // Rejection sampling while candidates are plentiful; otherwise list
    // them all and take a random subset.
    if count * 2 <= available {
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let p = draw(rng);
            if !linked.contains(&p) && chosen.insert(p) {
                out.push(p);
            }
        }
        return Ok(out);
    }
    let mut all = Vec::with_capacity(available);
    if cross_role_only {
        for &u in &users {
            for &d in &developers {
                let p = (u.min(d), u.max(d));
                if !linked.contains(&p) {
                    all.push(p);
                }
            }
        }
    } else {
        for (i, &u) in vertices.iter().enumerate() {
            for &v in &vertices[i + 1..] {
                if !linked.contains(&(u, v)) {
                    all.push((u, v));
                }
            }
        }
    }
    let (picked, _) = all.partial_shuffle(rng, count);
    Ok(picked.to_vec())
}
