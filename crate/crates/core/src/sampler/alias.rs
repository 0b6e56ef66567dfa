//! Vose's alias method: O(n) construction, O(1) sampling.

use rand::Rng;

use super::SamplerError;

/// Allowed deviation of a distribution's total mass from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds a table from a probability vector that sums to one.
    pub fn new(dist: &[f64]) -> Result<Self, SamplerError> {
        if dist.is_empty() {
            return Err(SamplerError::InvalidDistribution("empty distribution".into()));
        }
        if let Some(p) = dist.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(SamplerError::InvalidDistribution(format!(
                "probability {p} is not a finite non-negative number"
            )));
        }
        let total: f64 = dist.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(SamplerError::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self::build(dist))
    }

    /// Builds a table from positive weights, normalizing them first.
    pub fn from_weights(weights: &[f64]) -> Result<Self, SamplerError> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(SamplerError::InvalidDistribution(format!("weights sum to {total}")));
        }
        let dist: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Self::new(&dist)
    }

    fn build(dist: &[f64]) -> Self {
        let n = dist.len();
        let mut scaled: Vec<f64> = dist.iter().map(|p| p * n as f64).collect();
        let mut prob = vec![0.0; n];
        let mut alias = vec![0u32; n];
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);

        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
            alias[i] = i as u32;
        }
        AliasTable { prob, alias }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }

    /// The probability of drawing each index, reconstructed from the table.
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.prob.len() as f64;
        let mut out = vec![0.0; self.prob.len()];
        for (i, (&p, &a)) in self.prob.iter().zip(&self.alias).enumerate() {
            out[i] += p / n;
            out[a as usize] += (1.0 - p) / n;
        }
        out
    }
}
