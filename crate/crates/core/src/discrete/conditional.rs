//! Meaning/utterance models: data as (input, output) pairs.
//!
//! Each data item is a pair `(x, y)` of a *meaning* `x`, drawn from a fixed
//! input distribution `mu`, and an *utterance* `y`, drawn from
//! `P[y | x, h]`. The transition analysis carries over with the root-sine
//! distance taken between the joint distributions `P[y | x, h] * mu(x)`,
//! and the decay bound keeps the same form with that distance.

use nalgebra::DMatrix;

use super::transition::transition_from_log_table;
use super::{DiscreteError, DiscreteModel};
use crate::metrics::ProbVector;

/// A hypothesis space whose likelihood is conditional on a meaning:
/// `tables[x][j]` is the utterance distribution of hypothesis `j` given
/// meaning `x`, and `mu` is the meaning distribution.
#[derive(Debug, Clone)]
pub struct ConditionalModel {
    mu: ProbVector,
    tables: Vec<Vec<ProbVector>>,
    prior: ProbVector,
    log_prior: Vec<f64>,
    meanings: usize,
    utterances: usize,
    n: usize,
}

impl ConditionalModel {
    pub fn new(
        mu: ProbVector,
        tables: Vec<Vec<ProbVector>>,
        prior: ProbVector,
    ) -> Result<Self, DiscreteError> {
        let meanings = mu.len();
        if tables.len() != meanings {
            return Err(DiscreteError::Shape(format!(
                "{} conditional tables for {} meanings",
                tables.len(),
                meanings
            )));
        }
        let n = prior.len();
        for (index, &p) in prior.iter().enumerate() {
            if p <= 0.0 {
                return Err(DiscreteError::NonPositivePrior { index });
            }
        }
        let utterances = tables
            .first()
            .and_then(|t| t.first())
            .map(|pv| pv.len())
            .ok_or_else(|| DiscreteError::Shape("conditional tables are empty".into()))?;
        for (x, table) in tables.iter().enumerate() {
            if table.len() != n {
                return Err(DiscreteError::Shape(format!(
                    "meaning {x} has {} hypothesis columns, expected {n}",
                    table.len()
                )));
            }
            for (j, col) in table.iter().enumerate() {
                if col.len() != utterances {
                    return Err(DiscreteError::RaggedTable {
                        row: x * n + j,
                        got: col.len(),
                        expected: utterances,
                    });
                }
            }
        }
        let log_prior = prior.iter().map(|&p| p.ln()).collect();
        Ok(Self {
            mu,
            tables,
            prior,
            log_prior,
            meanings,
            utterances,
            n,
        })
    }

    pub fn hypothesis_count(&self) -> usize {
        self.n
    }

    pub fn meaning_count(&self) -> usize {
        self.meanings
    }

    pub fn utterance_count(&self) -> usize {
        self.utterances
    }

    pub fn prior(&self) -> &ProbVector {
        &self.prior
    }

    pub fn input_distribution(&self) -> &ProbVector {
        &self.mu
    }

    /// `P[y | x, h_j]`.
    pub fn conditional(&self, x: usize, j: usize) -> &ProbVector {
        &self.tables[x][j]
    }

    fn check_hypothesis(&self, index: usize) -> Result<(), DiscreteError> {
        if index >= self.n {
            return Err(DiscreteError::HypothesisIndex { index, n: self.n });
        }
        Ok(())
    }

    /// Root-sine distance between the joint pair distributions of `i` and
    /// `j`: `sqrt(1 - C'^2)` with
    /// `C' = sum_x mu(x) sum_y sqrt(P[y|x,i] P[y|x,j])`.
    pub fn cond_root_sine(&self, i: usize, j: usize) -> Result<f64, DiscreteError> {
        self.check_hypothesis(i)?;
        self.check_hypothesis(j)?;
        let mut coeff = 0.0;
        for (x, table) in self.tables.iter().enumerate() {
            let inner: f64 = table[i]
                .iter()
                .zip(table[j].iter())
                .map(|(&a, &b)| (a * b).sqrt())
                .sum();
            coeff += self.mu.get(x) * inner;
        }
        Ok((1.0 - coeff * coeff).clamp(0.0, 1.0).sqrt())
    }

    /// `min_{j != i}` of [`Self::cond_root_sine`].
    pub fn min_cond_distance(&self, i: usize) -> Result<f64, DiscreteError> {
        self.check_hypothesis(i)?;
        let mut best = f64::INFINITY;
        for j in 0..self.n {
            if j != i {
                best = best.min(self.cond_root_sine(i, j)?);
            }
        }
        Ok(best)
    }

    /// Decay bound on off-diagonal transitions, with the conditional
    /// distance in the exponent.
    pub fn transition_bound(&self, i: usize, j: usize, m: u64) -> Result<f64, DiscreteError> {
        if i == j {
            return Err(DiscreteError::Shape(
                "transition bound is defined for distinct hypotheses".into(),
            ));
        }
        let d = self.cond_root_sine(i, j)?;
        Ok(0.5 * (self.prior.get(j) / self.prior.get(i)).sqrt() * (-0.5 * d * d * m as f64).exp())
    }

    /// Log-probabilities of the joint pair alphabet: row `x * utterances + y`
    /// holds `ln(mu(x) P[y | x, h_j])` per hypothesis `j`.
    fn joint_log_table(&self) -> Vec<Vec<f64>> {
        let mut table = Vec::with_capacity(self.meanings * self.utterances);
        for (x, per_meaning) in self.tables.iter().enumerate() {
            let mu_x = self.mu.get(x);
            for y in 0..self.utterances {
                table.push(
                    (0..self.n)
                        .map(|j| {
                            let w = mu_x * per_meaning[j].get(y);
                            if w > 0.0 {
                                w.ln()
                            } else {
                                f64::NEG_INFINITY
                            }
                        })
                        .collect(),
                );
            }
        }
        table
    }

    /// Exact session transition matrix; the enumeration runs over multisets
    /// of `(x, y)` pairs, so the budget is counted on the pair alphabet.
    pub fn transition_matrix_cond(
        &self,
        m: u64,
        budget: u64,
    ) -> Result<DMatrix<f64>, DiscreteError> {
        if m == 0 {
            return Err(DiscreteError::EmptyData);
        }
        transition_from_log_table(&self.joint_log_table(), &self.log_prior, m, budget)
    }

    /// The equivalent plain model over the joint `(x, y)` alphabet. Fails if
    /// two hypotheses induce the same joint distribution.
    pub fn induced_model(&self) -> Result<DiscreteModel, DiscreteError> {
        let columns = (0..self.n)
            .map(|j| {
                let mut col = Vec::with_capacity(self.meanings * self.utterances);
                for (x, per_meaning) in self.tables.iter().enumerate() {
                    let mu_x = self.mu.get(x);
                    for y in 0..self.utterances {
                        col.push(mu_x * per_meaning[j].get(y));
                    }
                }
                ProbVector::new(col).map_err(DiscreteError::from)
            })
            .collect::<Result<Vec<_>, _>>()?;
        DiscreteModel::from_columns(columns, self.prior.clone())
    }
}
