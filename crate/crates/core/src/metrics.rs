//! Probability vectors over a finite domain and the distances between them.
//!
//! The workhorse is the root-sine distance
//!
//! ```text
//! d_RS(a, b) = sqrt(1/2 * sum_{i,j} (sqrt(a_i b_j) - sqrt(a_j b_i))^2)
//!            = sqrt(1 - C(a, b)^2),     C(a, b) = sum_i sqrt(a_i b_i),
//! ```
//!
//! where `C` is the Bhattacharyya coefficient. `d_RS` equals the sine of the
//! angle between the coordinatewise square roots of `a` and `b`, which makes
//! it a genuine metric on the probability simplex, and it converts exactly
//! into the classical distances:
//!
//! ```text
//! d_H  = sqrt(1 - sqrt(1 - d_RS^2))          (Hellinger)
//! d_B  = -1/2 * ln(1 - d_RS^2)               (Bhattacharyya)
//! d_TV <= sqrt(2s) * d_RS                    (total variation, s = domain size)
//! ```
//!
//! All types here are immutable values and all operations are pure functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `sum(weights) - 1` accepted at construction. Vectors outside
/// it are rejected rather than renormalized, so upstream normalization bugs
/// surface instead of being papered over.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("probability vectors have mismatched lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("weight {value} at index {index} is negative or not finite")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1 within {NORMALIZATION_TOL:e}")]
    NotNormalized { sum: f64 },
    #[error("probability vector must have at least one entry")]
    Empty,
}

/// A point on the probability simplex: non-negative weights summing to 1
/// within [`NORMALIZATION_TOL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector {
    weights: Vec<f64>,
}

impl ProbVector {
    pub fn new(weights: Vec<f64>) -> Result<Self, MetricsError> {
        if weights.is_empty() {
            return Err(MetricsError::Empty);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(MetricsError::InvalidWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(MetricsError::NotNormalized { sum });
        }
        Ok(Self { weights })
    }

    /// The uniform distribution on `len` outcomes.
    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution needs a non-empty domain");
        Self {
            weights: vec![1.0 / len as f64; len],
        }
    }

    /// The point mass on `index`.
    pub fn unit(len: usize, index: usize) -> Self {
        assert!(index < len, "unit index {index} out of range for length {len}");
        let mut weights = vec![0.0; len];
        weights[index] = 1.0;
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.weights.iter()
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = MetricsError;
    fn try_from(weights: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(weights)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(v: ProbVector) -> Vec<f64> {
        v.weights
    }
}

fn check_lengths(a: &ProbVector, b: &ProbVector) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Bhattacharyya coefficient `C(a, b) = sum_i sqrt(a_i b_i)`, in `[0, 1]`.
pub fn bhattacharyya_coeff(a: &ProbVector, b: &ProbVector) -> Result<f64, MetricsError> {
    check_lengths(a, b)?;
    Ok(a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x * y).sqrt())
        .sum())
}

/// Root-sine distance `d_RS(a, b) = sqrt(1 - C(a, b)^2)`, in `[0, 1]`.
///
/// `1 - C^2` is clamped into `[0, 1]` before the square root: rounding can
/// push it to `-1e-17` when `a` and `b` nearly coincide, and the metric's
/// zero must not turn into a NaN.
pub fn root_sine(a: &ProbVector, b: &ProbVector) -> Result<f64, MetricsError> {
    let c = bhattacharyya_coeff(a, b)?;
    Ok((1.0 - c * c).clamp(0.0, 1.0).sqrt())
}

/// Hellinger distance, computed through `d_RS`: `sqrt(1 - sqrt(1 - d_RS^2))`.
pub fn hellinger(a: &ProbVector, b: &ProbVector) -> Result<f64, MetricsError> {
    let d = root_sine(a, b)?;
    Ok((1.0 - (1.0 - d * d).clamp(0.0, 1.0).sqrt()).clamp(0.0, 1.0).sqrt())
}

/// Bhattacharyya distance, computed through `d_RS`: `-1/2 ln(1 - d_RS^2)`.
///
/// On disjoint supports (`d_RS = 1`) the distance is genuinely infinite; the
/// returned value is `f64::INFINITY`, which serializes as the string `inf`.
pub fn bhattacharyya_dist(a: &ProbVector, b: &ProbVector) -> Result<f64, MetricsError> {
    let d = root_sine(a, b)?;
    let one_minus_sq = (1.0 - d * d).clamp(0.0, 1.0);
    if one_minus_sq == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-0.5 * one_minus_sq.ln())
}

/// Total variation distance: half the l1 norm of `a - b`, in `[0, 1]`.
pub fn total_variation(a: &ProbVector, b: &ProbVector) -> Result<f64, MetricsError> {
    check_lengths(a, b)?;
    Ok(0.5
        * a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| (x - y).abs())
            .sum::<f64>())
}

/// Euclidean (l2) distance between the weight vectors.
pub fn euclidean(a: &ProbVector, b: &ProbVector) -> Result<f64, MetricsError> {
    check_lengths(a, b)?;
    Ok(a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}
