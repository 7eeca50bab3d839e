//! Checks that exact transition machinery must satisfy, shared by tests and
//! the experiment runner's manifest.

use nalgebra::DMatrix;

use super::{ChainProduct, ConditionalModel, DiscreteError, DiscreteModel};
use crate::metrics::{self, ProbVector};

/// Largest deviation of a row sum from 1.
pub fn max_row_sum_error(mat: &DMatrix<f64>) -> f64 {
    (0..mat.nrows())
        .map(|i| (mat.row(i).sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Whether every entry is strictly positive (the ergodic case in which the
/// constant-schedule chain provably drifts to the prior).
pub fn is_entrywise_positive(mat: &DMatrix<f64>) -> bool {
    mat.iter().all(|&v| v > 0.0)
}

/// Largest excess of an off-diagonal entry over its decay bound
/// `1/2 sqrt(p_j/p_i) exp(-d_ij^2 m / 2)`; non-positive means the bound
/// holds entrywise.
pub fn decay_bound_max_excess(
    model: &DiscreteModel,
    mat: &DMatrix<f64>,
    m: u64,
) -> Result<f64, DiscreteError> {
    let n = model.hypothesis_count();
    let mut excess = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                excess = excess.max(mat[(i, j)] - model.transition_bound(i, j, m)?);
            }
        }
    }
    Ok(excess)
}

/// Conditional-model variant of [`decay_bound_max_excess`].
pub fn cond_decay_bound_max_excess(
    model: &ConditionalModel,
    mat: &DMatrix<f64>,
    m: u64,
) -> Result<f64, DiscreteError> {
    let n = model.hypothesis_count();
    let mut excess = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                excess = excess.max(mat[(i, j)] - model.transition_bound(i, j, m)?);
            }
        }
    }
    Ok(excess)
}

/// Largest excess, over the chain prefixes, of the escaped mass
/// `sum_{j != target} P(<=t)[target, j]` over its cumulative bound
/// `1/2 sqrt(n (1 - p) / p) sum_{s <= t} exp(-d_target^2 m_s / 2)`.
pub fn cumulative_escape_max_excess(
    model: &DiscreteModel,
    chain: &ChainProduct,
    target: usize,
) -> Result<f64, DiscreteError> {
    let n = model.hypothesis_count();
    if target >= n {
        return Err(DiscreteError::HypothesisIndex { index: target, n });
    }
    let p = model.prior().get(target);
    let d = model.min_distance(target);
    let prefactor = 0.5 * (n as f64 * (1.0 - p) / p).sqrt();
    let mut tail_sum = 0.0;
    let mut excess = f64::NEG_INFINITY;
    for (mat, &m) in chain.matrices.iter().zip(chain.session_lengths.iter()) {
        tail_sum += (-0.5 * d * d * m as f64).exp();
        let escaped: f64 = (0..n)
            .filter(|&j| j != target)
            .map(|j| mat[(target, j)])
            .sum();
        excess = excess.max(escaped - prefactor * tail_sum);
    }
    Ok(excess)
}

/// Total variation between row `start` of a chain prefix and the prior.
pub fn tv_to_prior(
    model: &DiscreteModel,
    mat: &DMatrix<f64>,
    start: usize,
) -> Result<f64, DiscreteError> {
    let n = model.hypothesis_count();
    if start >= mat.nrows() {
        return Err(DiscreteError::HypothesisIndex { index: start, n });
    }
    let row = ProbVector::new(mat.row(start).iter().cloned().collect())
        .map_err(DiscreteError::from)?;
    metrics::total_variation(&row, model.prior()).map_err(DiscreteError::from)
}

#[cfg(test)]
mod tests {
    use super::super::tests::overlap_model;
    use super::*;
    use crate::schedules::{Schedule, ScheduleKind};

    #[test]
    fn bounds_hold_on_the_overlap_chain() {
        let model = overlap_model();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 4 });
        let chain = model.chain_product(&schedule, 20, 10_000).unwrap();
        for mat in &chain.matrices {
            assert!(max_row_sum_error(mat) <= 1e-10);
            assert!(is_entrywise_positive(mat));
        }
        let step = model.transition_matrix_exact(4, 10_000).unwrap();
        assert!(decay_bound_max_excess(&model, &step, 4).unwrap() <= 1e-12);
        assert!(cumulative_escape_max_excess(&model, &chain, 0).unwrap() <= 1e-12);
    }

    #[test]
    fn constant_schedule_drifts_to_the_prior() {
        let model = overlap_model();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 2 });
        let chain = model.chain_product(&schedule, 400, 10_000).unwrap();
        let tv = tv_to_prior(&model, chain.matrices.last().unwrap(), 0).unwrap();
        assert!(tv <= 1e-6, "tv = {tv}");
    }
}
