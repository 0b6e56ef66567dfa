//! Edge features from vertex embeddings.

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::ingest::VertexId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeatureOp {
    /// `(f(u) + f(v)) / 2`
    #[default]
    Average,
    /// `f(u) * f(v)`, elementwise
    Hadamard,
}

impl FeatureOp {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureOp::Average => "average",
            FeatureOp::Hadamard => "hadamard",
        }
    }
}

impl std::str::FromStr for FeatureOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "average" => Ok(FeatureOp::Average),
            "hadamard" => Ok(FeatureOp::Hadamard),
            other => Err(format!("unknown feature operator '{other}'")),
        }
    }
}

pub fn edge_feature(a: &[f64], b: &[f64], op: FeatureOp) -> Vec<f64> {
    match op {
        FeatureOp::Average => a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect(),
        FeatureOp::Hadamard => a.iter().zip(b).map(|(x, y)| x * y).collect(),
    }
}

/// Features of the pairs whose endpoints both have a vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub rows: Vec<Vec<f64>>,
    /// Index into the input pairs of every row.
    pub kept: Vec<usize>,
    /// Pairs skipped because an endpoint has no embedding.
    pub dropped: usize,
}

pub fn edge_features(m: &EmbeddingMatrix, pairs: &[(VertexId, VertexId)], op: FeatureOp) -> FeatureSet {
    let mut rows = Vec::with_capacity(pairs.len());
    let mut kept = Vec::with_capacity(pairs.len());
    for (i, &(u, v)) in pairs.iter().enumerate() {
        if let (Some(a), Some(b)) = (m.vector(u), m.vector(v)) {
            rows.push(edge_feature(a, b, op));
            kept.push(i);
        }
    }
    let dropped = pairs.len() - rows.len();
    if dropped > 0 {
        log::warn!("{dropped} pairs dropped: endpoint without embedding");
    }
    FeatureSet { rows, kept, dropped }
}
