use crate::error::{Error, Result};

/// Tolerance on `Σ x_i = 1` accepted by [`ProbVector::new`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let mut sum = 0.0;
        for (i, &x) in entries.iter().enumerate() {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(Error::Domain(format!(
                    "entry {i} = {x} is not a nonnegative finite number"
                )));
            }
            sum += x;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Domain(format!("entries sum to {sum}, not 1")));
        }
        Ok(ProbVector(entries))
    }

    /// Scales nonnegative weights to sum to one.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::Domain(format!("weights sum to {sum}")));
        }
        ProbVector::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::EmptyDistribution);
        }
        Ok(ProbVector(vec![1.0 / k as f64; k]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
