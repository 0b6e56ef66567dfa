//! Partner recommendation with a fitted link scorer.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    edge_feature, edge_features, sample_negatives, train_logreg, EvalError, FeatureOp, LogRegConfig, LogisticModel,
};
use crate::embed::EmbeddingMatrix;
use crate::ingest::{RoleTable, TemporalEdgeList, VertexId};

/// A classifier over edge features, with the operator it was fit on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkScorer {
    pub op: FeatureOp,
    pub model: LogisticModel,
}

impl LinkScorer {
    pub fn score(&self, a: &[f64], b: &[f64]) -> f64 {
        self.model.predict(&edge_feature(a, b, self.op))
    }
}

/// Fits a scorer on every linked pair of `edges` against as many sampled
/// unlinked pairs.
pub fn fit_link_scorer<R: Rng + ?Sized>(
    edges: &TemporalEdgeList,
    roles: &RoleTable,
    m: &EmbeddingMatrix,
    op: FeatureOp,
    logreg: &LogRegConfig,
    cross_role_only: bool,
    rng: &mut R,
) -> Result<LinkScorer, EvalError> {
    let positives = edges.distinct_pairs();
    let negatives = sample_negatives(edges, roles, positives.len(), cross_role_only, rng)?;
    let pos = edge_features(m, &positives, op);
    let neg = edge_features(m, &negatives, op);
    let labels: Vec<bool> = std::iter::repeat_n(true, pos.rows.len())
        .chain(std::iter::repeat_n(false, neg.rows.len()))
        .collect();
    let rows: Vec<Vec<f64>> = pos.rows.into_iter().chain(neg.rows).collect();
    Ok(LinkScorer {
        op,
        model: train_logreg(&rows, &labels, logreg)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub vertex: VertexId,
    pub score: f64,
}

/// The `k` best-scoring candidates for `target`, skipping the target itself,
/// candidates without an embedding and pairs listed in `linked`. Ties go
/// to the smaller id.
pub fn recommend(
    m: &EmbeddingMatrix,
    scorer: &LinkScorer,
    target: VertexId,
    candidates: &[VertexId],
    linked: &HashSet<(VertexId, VertexId)>,
    k: usize,
) -> Result<Vec<Recommendation>, EvalError> {
    let t = m.vector(target).ok_or(EvalError::NoEmbedding(target))?;
    let mut out: Vec<Recommendation> = candidates
        .iter()
        .filter(|&&c| c != target && !linked.contains(&(c.min(target), c.max(target))))
        .filter_map(|&c| {
            m.vector(c).map(|v| Recommendation {
                vertex: c,
                score: scorer.score(t, v),
            })
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.vertex.cmp(&b.vertex)));
    out.truncate(k);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scorer() -> LinkScorer {
        // Scores grow with the average of the two 1-d embeddings.
        LinkScorer {
            op: FeatureOp::Average,
            model: LogisticModel {
                weights: vec![1.0],
                bias: 0.0,
                iterations: 0,
                gradient_norm: 0.0,
            },
        }
    }

    #[test]
    fn ranks_and_filters() {
        let m = EmbeddingMatrix::from_vectors(1, vec![0, 1, 2, 3], vec![0.0, 3.0, 1.0, 2.0]);
        let linked: HashSet<_> = [(0, 3)].into_iter().collect();
        let recs = recommend(&m, &scorer(), 0, &[0, 1, 2, 3, 9], &linked, 10).unwrap();
        let ids: Vec<VertexId> = recs.iter().map(|r| r.vertex).collect();
        assert_eq!(ids, vec![1, 2]);
        assert!(recs[0].score > recs[1].score);
        let top = recommend(&m, &scorer(), 0, &[1, 2, 3], &HashSet::new(), 1).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].vertex, 1);
    }

    #[test]
    fn unknown_target() {
        let m = EmbeddingMatrix::from_vectors(1, vec![0], vec![0.0]);
        assert!(matches!(
            recommend(&m, &scorer(), 4, &[0], &HashSet::new(), 1),
            Err(EvalError::NoEmbedding(4))
        ));
    }
}
