//! Exact per-session transition matrices and their running products.
//!
//! Entry `(i, j)` of the session matrix is the probability that a learner
//! trained on `m` sentences drawn from language `i` ends up sampling
//! hypothesis `j` from its posterior:
//!
//! ```text
//! P_ij = sum over data multisets d of P[h_j | d] * P[d | h_i].
//! ```
//!
//! Likelihoods depend on the data only through per-sentence counts, so the
//! sum runs over the `C(m + s - 1, s - 1)` multisets with multinomial weights
//! instead of the `s^m` ordered tuples — the difference between feasible and
//! hopeless for session lengths in the hundreds. Everything is accumulated in
//! log space.

use nalgebra::DMatrix;

use super::{normalized_from_log, DiscreteError, DiscreteModel, CHAIN_DRIFT_LIMIT, ROW_SUM_TOL};
use crate::schedules::Schedule;

/// Default ceiling on the number of multisets an exact computation may visit.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

/// `C(m + s - 1, s - 1)`: the number of size-`m` multisets over `s` symbols.
/// `None` on u128 overflow.
pub(crate) fn multiset_count(m: u64, s: usize) -> Option<u128> {
    // Stepwise-exact binomial: C(n, k) with n = m + s - 1, k = s - 1.
    let k = (s - 1) as u128;
    let m = m as u128;
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c.checked_mul(m + i)? / i;
    }
    Some(c)
}

/// Calls `f` with every composition of `m` into `slots` non-negative parts.
fn for_each_composition(m: u64, slots: usize, f: &mut impl FnMut(&[u64])) {
    fn rec(buf: &mut Vec<u64>, remaining: u64, slots: usize, f: &mut impl FnMut(&[u64])) {
        if slots == 1 {
            buf.push(remaining);
            f(buf);
            buf.pop();
            return;
        }
        for c in 0..=remaining {
            buf.push(c);
            rec(buf, remaining - c, slots - 1, f);
            buf.pop();
        }
    }
    let mut buf = Vec::with_capacity(slots);
    rec(&mut buf, m, slots, f);
}

/// Core of the exact transition computation, shared by the plain and the
/// meaning/utterance models: `log_table[k][j]` is the log-probability that
/// hypothesis `j` generates symbol `k`.
pub(crate) fn transition_from_log_table(
    log_table: &[Vec<f64>],
    log_prior: &[f64],
    m: u64,
    budget: u64,
) -> Result<DMatrix<f64>, DiscreteError> {
    let s = log_table.len();
    let n = log_prior.len();
    let count = multiset_count(m, s).unwrap_or(u128::MAX);
    if count > budget as u128 {
        return Err(DiscreteError::EnumerationBudget { count, budget });
    }

    // ln(i!) for i = 0..=m.
    let mut ln_fact = Vec::with_capacity(m as usize + 1);
    ln_fact.push(0.0);
    for i in 1..=m {
        ln_fact.push(ln_fact[i as usize - 1] + (i as f64).ln());
    }
    let ln_fact_m = ln_fact[m as usize];

    let mut rows = vec![vec![0.0f64; n]; n];
    let mut log_lik = vec![0.0f64; n];
    for_each_composition(m, s, &mut |counts| {
        // Per-hypothesis log-likelihood of this multiset, sans the shared
        // multinomial coefficient (which cancels in the posterior).
        log_lik.iter_mut().for_each(|v| *v = 0.0);
        let mut log_multinomial = ln_fact_m;
        for (k, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            log_multinomial -= ln_fact[c as usize];
            let row = &log_table[k];
            for (ll, &lt) in log_lik.iter_mut().zip(row.iter()) {
                *ll += c as f64 * lt;
            }
        }
        let log_post: Vec<f64> = log_lik
            .iter()
            .zip(log_prior.iter())
            .map(|(&ll, &lp)| ll + lp)
            .collect();
        let Some(posterior) = normalized_from_log(&log_post) else {
            return; // multiset impossible under every hypothesis
        };
        for (i, out) in rows.iter_mut().enumerate() {
            let weight = (log_multinomial + log_lik[i]).exp();
            if weight > 0.0 {
                for (o, &p) in out.iter_mut().zip(posterior.iter()) {
                    *o += weight * p;
                }
            }
        }
    });

    let mat = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let err = verify_row_sums(&mat);
    if err > ROW_SUM_TOL {
        return Err(DiscreteError::RowSumDrift { error: err });
    }
    Ok(mat)
}

fn verify_row_sums(mat: &DMatrix<f64>) -> f64 {
    (0..mat.nrows())
        .map(|i| (mat.row(i).sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// The product of per-session transition matrices `P_1 P_2 ... P_t` for
/// `t = 1..=t_max`, with rows renormalized after every multiplication.
#[derive(Debug, Clone)]
pub struct ChainProduct {
    /// `matrices[t - 1]` is the product up to session `t`.
    pub matrices: Vec<DMatrix<f64>>,
    /// The session lengths that produced each factor.
    pub session_lengths: Vec<u64>,
    /// Largest row-sum deviation absorbed by renormalization.
    pub max_drift: f64,
}

impl DiscreteModel {
    /// Exact transition matrix for one session of `m` samples. Errors with
    /// [`DiscreteError::EnumerationBudget`] when the multiset count exceeds
    /// `budget`, in which case Monte Carlo simulation is the way forward.
    pub fn transition_matrix_exact(
        &self,
        m: u64,
        budget: u64,
    ) -> Result<DMatrix<f64>, DiscreteError> {
        if m == 0 {
            return Err(DiscreteError::EmptyData);
        }
        transition_from_log_table(self.log_by_sentence(), self.log_prior(), m, budget)
    }

    /// Running products of the exact session matrices under `schedule`.
    /// Session matrices are cached by length, so constant schedules cost one
    /// enumeration.
    pub fn chain_product(
        &self,
        schedule: &Schedule,
        t_max: u64,
        budget: u64,
    ) -> Result<ChainProduct, DiscreteError> {
        let mut cache: std::collections::BTreeMap<u64, DMatrix<f64>> =
            std::collections::BTreeMap::new();
        let mut matrices = Vec::with_capacity(t_max as usize);
        let mut session_lengths = Vec::with_capacity(t_max as usize);
        let mut product: Option<DMatrix<f64>> = None;
        let mut max_drift = 0.0f64;
        for t in 1..=t_max {
            let m = schedule.eval(t)?;
            if !cache.contains_key(&m) {
                cache.insert(m, self.transition_matrix_exact(m, budget)?);
            }
            let step = &cache[&m];
            let mut next = match product {
                None => step.clone(),
                Some(p) => p * step,
            };
            for i in 0..next.nrows() {
                let sum: f64 = next.row(i).sum();
                max_drift = max_drift.max((sum - 1.0).abs());
                if max_drift > CHAIN_DRIFT_LIMIT {
                    return Err(DiscreteError::ChainDrift { drift: max_drift });
                }
                for j in 0..next.ncols() {
                    next[(i, j)] /= sum;
                }
            }
            matrices.push(next.clone());
            session_lengths.push(m);
            product = Some(next);
        }
        Ok(ChainProduct {
            matrices,
            session_lengths,
            max_drift,
        })
    }
}

/// `P(<=t)[target, target]` for every prefix product in `chain`: the
/// probability that learner `t` still samples the starting hypothesis when
/// the chain was seeded with the point mass on `target`.
pub fn sustain_mass(chain: &[DMatrix<f64>], target: usize) -> Result<Vec<f64>, DiscreteError> {
    chain
        .iter()
        .map(|p| {
            if target >= p.nrows() {
                return Err(DiscreteError::HypothesisIndex {
                    index: target,
                    n: p.nrows(),
                });
            }
            Ok(p[(target, target)])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::tests::{overlap_model, pv};
    use super::*;
    use crate::metrics::ProbVector;
    use crate::schedules::{Schedule, ScheduleKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn multiset_counts_are_binomials() {
        assert_eq!(multiset_count(2, 2), Some(3));
        assert_eq!(multiset_count(2, 4), Some(10));
        assert_eq!(multiset_count(6, 3), Some(28));
        assert_eq!(multiset_count(100, 4), Some(176_851));
    }

    #[test]
    fn composition_enumeration_is_complete() {
        let mut seen = Vec::new();
        for_each_composition(3, 2, &mut |c| seen.push(c.to_vec()));
        assert_eq!(
            seen,
            vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]
        );
        let mut count = 0u64;
        for_each_composition(5, 4, &mut |c| {
            assert_eq!(c.iter().sum::<u64>(), 5);
            count += 1;
        });
        assert_eq!(count as u128, multiset_count(5, 4).unwrap());
    }

    #[test]
    fn disjoint_supports_give_the_identity() {
        let model = DiscreteModel::from_columns(
            vec![pv(&[1.0, 0.0]), pv(&[0.0, 1.0])],
            pv(&[0.3, 0.7]),
        )
        .unwrap();
        for m in [1u64, 3, 10] {
            let p = model.transition_matrix_exact(m, 1000).unwrap();
            assert_abs_diff_eq!(p[(0, 0)], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p[(1, 1)], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p[(0, 1)], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_languages_give_prior_rows() {
        let model = DiscreteModel::from_columns_relaxed(
            vec![pv(&[0.4, 0.6]), pv(&[0.4, 0.6])],
            pv(&[0.2, 0.8]),
        )
        .unwrap();
        let p = model.transition_matrix_exact(4, 1000).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(p[(i, 0)], 0.2, epsilon = 1e-12);
            assert_abs_diff_eq!(p[(i, 1)], 0.8, epsilon = 1e-12);
        }
    }

    #[test]
    fn overlap_model_hand_value() {
        // P_12 at m = 1: 0.5 * 1/3 + 0.5 * 0.6 = 7/15.
        let p = overlap_model().transition_matrix_exact(1, 1000).unwrap();
        assert_abs_diff_eq!(p[(0, 1)], 7.0 / 15.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(0, 0)], 8.0 / 15.0, epsilon = 1e-12);
    }

    #[test]
    fn rows_are_stochastic() {
        let model = DiscreteModel::from_columns(
            vec![
                pv(&[0.7, 0.1, 0.1, 0.1]),
                pv(&[0.1, 0.7, 0.1, 0.1]),
                pv(&[0.1, 0.1, 0.7, 0.1]),
                pv(&[0.1, 0.1, 0.1, 0.7]),
            ],
            ProbVector::uniform(4),
        )
        .unwrap();
        let p = model.transition_matrix_exact(40, 1_000_000).unwrap();
        assert!(verify_row_sums(&p) <= ROW_SUM_TOL);
    }

    #[test]
    fn budget_excess_is_reported() {
        let model = overlap_model();
        match model.transition_matrix_exact(1000, 100) {
            Err(DiscreteError::EnumerationBudget { count, budget: 100 }) => {
                assert_eq!(count, 1001);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn exact_matrix_respects_transition_bound() {
        let model = overlap_model();
        for m in [1u64, 5, 10, 40] {
            let p = model.transition_matrix_exact(m, 100_000).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    if i != j {
                        assert!(
                            p[(i, j)] <= model.transition_bound(i, j, m).unwrap() + 1e-12,
                            "bound violated at m={m}, ({i},{j})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn chain_product_matches_direct_multiplication() {
        let model = overlap_model();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 1 });
        let chain = model.chain_product(&schedule, 2, 1000).unwrap();
        let p1 = model.transition_matrix_exact(1, 1000).unwrap();
        let direct = &p1 * &p1;
        assert_eq!(chain.matrices.len(), 2);
        assert_abs_diff_eq!(chain.matrices[0][(0, 1)], p1[(0, 1)], epsilon = 1e-15);
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(chain.matrices[1][(i, j)], direct[(i, j)], epsilon = 1e-10);
            }
        }
        assert!(chain.max_drift < 1e-12);
    }

    #[test]
    fn identity_transitions_keep_the_chain_at_identity() {
        let model = DiscreteModel::from_columns(
            vec![pv(&[1.0, 0.0]), pv(&[0.0, 1.0])],
            ProbVector::uniform(2),
        )
        .unwrap();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 2 });
        let chain = model.chain_product(&schedule, 5, 1000).unwrap();
        let masses = sustain_mass(&chain.matrices, 0).unwrap();
        assert_eq!(masses.len(), 5);
        for mass in masses {
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_languages_sustain_exactly_the_prior_mass() {
        let model = DiscreteModel::from_columns_relaxed(
            vec![pv(&[0.4, 0.6]), pv(&[0.4, 0.6])],
            pv(&[0.2, 0.8]),
        )
        .unwrap();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 3 });
        let chain = model.chain_product(&schedule, 4, 1000).unwrap();
        for mass in sustain_mass(&chain.matrices, 0).unwrap() {
            assert_abs_diff_eq!(mass, 0.2, epsilon = 1e-10);
        }
    }

    #[test]
    fn sustain_mass_checks_the_index() {
        let model = overlap_model();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 1 });
        let chain = model.chain_product(&schedule, 1, 1000).unwrap();
        assert!(matches!(
            sustain_mass(&chain.matrices, 7),
            Err(DiscreteError::HypothesisIndex { index: 7, .. })
        ));
    }
}
