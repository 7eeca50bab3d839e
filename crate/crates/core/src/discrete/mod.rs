//! Iterated learning over a finite hypothesis space.
//!
//! A [`DiscreteModel`] is a hypothesis space `h_1..h_n` with a shared prior
//! and, per hypothesis, a distribution over `s` sentences (its *language*).
//! Learner `t` samples a hypothesis from its predecessor's posterior, draws
//! `m_t` sentences from that language, and Bayes-updates the prior. The
//! module computes this process both ways:
//!
//! - exactly, through per-session transition matrices and their running
//!   product ([`DiscreteModel::transition_matrix_exact`],
//!   [`DiscreteModel::chain_product`]);
//! - by simulation, as a faithful agent chain
//!   ([`DiscreteModel::simulate_chain_mc`]).
//!
//! The decay of off-diagonal transitions is controlled by the root-sine
//! distance between languages: `P_ij <= 1/2 sqrt(p_j/p_i) exp(-d_ij^2 m / 2)`
//! for `i != j` ([`DiscreteModel::transition_bound`]), which is what the
//! growing schedules exploit.

mod conditional;
mod mc;
mod patterns;
mod transition;
pub mod verify;

pub use conditional::ConditionalModel;
pub use mc::{ChainInit, TrackTarget, Trajectory, TrajectoryStep};
pub use patterns::{pattern_language_model, PatternLanguageModel};
pub use transition::{sustain_mass, ChainProduct, DEFAULT_ENUMERATION_BUDGET};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, MetricsError, ProbVector};
use crate::schedules::ScheduleError;

/// Row-sum tolerance for exact transition matrices.
pub const ROW_SUM_TOL: f64 = 1e-10;
/// Accumulated renormalization drift allowed in a chain product.
pub const CHAIN_DRIFT_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscreteError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("training data must contain at least one sentence")]
    EmptyData,
    #[error("sentence index {index} out of range (s = {s})")]
    SentenceIndex { index: usize, s: usize },
    #[error("hypothesis index {index} out of range (n = {n})")]
    HypothesisIndex { index: usize, n: usize },
    #[error("every hypothesis assigns zero likelihood to the observed data")]
    ImpossibleData,
    #[error("prior weight of hypothesis {index} must be strictly positive")]
    NonPositivePrior { index: usize },
    #[error("hypotheses {i} and {j} define the same language; drop one or use the relaxed constructor")]
    DuplicateHypotheses { i: usize, j: usize },
    #[error("likelihood table is ragged: row {row} has {got} entries, expected {expected}")]
    RaggedTable { row: usize, got: usize, expected: usize },
    #[error("{count} multisets exceed the enumeration budget of {budget}; use Monte Carlo mode instead")]
    EnumerationBudget { count: u128, budget: u64 },
    #[error("exact transition matrix rows sum to 1 only within {error:e}, tolerance {ROW_SUM_TOL:e}")]
    RowSumDrift { error: f64 },
    #[error("chain product renormalization drift {drift:e} exceeds {CHAIN_DRIFT_LIMIT:e}")]
    ChainDrift { drift: f64 },
    #[error("pattern-language model with k={k}, m={m} is out of range (need m < k <= 20 and a table of at most {max} cells)", max = patterns::MAX_TABLE_CELLS)]
    PatternSize { k: u32, m: u32 },
    #[error("cluster radius must be positive and finite, got {rho}")]
    InvalidClusterRadius { rho: f64 },
    #[error("model shape mismatch: {0}")]
    Shape(String),
}

/// On-disk model schema: an `s x n` likelihood table (`likelihood[k][j]` is
/// the probability of sentence `k` under hypothesis `j`), the prior over the
/// `n` hypotheses, and optional hypothesis names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub likelihood: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

/// A finite hypothesis space: per-hypothesis sentence distributions, a
/// strictly positive prior, and the precomputed pairwise root-sine distances.
///
/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    /// `columns[j]` is the language of hypothesis `j`, a distribution over
    /// the `s` sentences.
    columns: Vec<ProbVector>,
    prior: ProbVector,
    log_prior: Vec<f64>,
    /// `log_by_sentence[k][j] = ln P[sentence k | hypothesis j]`, with
    /// `-inf` standing in for zero likelihood.
    log_by_sentence: Vec<Vec<f64>>,
    /// `dist[i][j]` is the root-sine distance between languages `i` and `j`.
    dist: Vec<Vec<f64>>,
    names: Option<Vec<String>>,
    s: usize,
    n: usize,
}

impl DiscreteModel {
    /// Builds a model from per-hypothesis language columns. Rejects
    /// duplicate languages: the retention guarantees divide by the minimum
    /// pairwise distance.
    pub fn from_columns(columns: Vec<ProbVector>, prior: ProbVector) -> Result<Self, DiscreteError> {
        let model = Self::from_columns_relaxed(columns, prior)?;
        for i in 0..model.n {
            for j in (i + 1)..model.n {
                if model.dist[i][j] == 0.0 {
                    return Err(DiscreteError::DuplicateHypotheses { i, j });
                }
            }
        }
        Ok(model)
    }

    /// Like [`Self::from_columns`] but allows coinciding languages, for
    /// models that are deliberately uninformative.
    pub fn from_columns_relaxed(
        columns: Vec<ProbVector>,
        prior: ProbVector,
    ) -> Result<Self, DiscreteError> {
        let n = columns.len();
        if n == 0 || prior.len() != n {
            return Err(DiscreteError::Shape(format!(
                "{} likelihood columns against a prior of length {}",
                n,
                prior.len()
            )));
        }
        let s = columns[0].len();
        for (j, col) in columns.iter().enumerate() {
            if col.len() != s {
                return Err(DiscreteError::RaggedTable {
                    row: j,
                    got: col.len(),
                    expected: s,
                });
            }
        }
        for (index, &p) in prior.iter().enumerate() {
            if p <= 0.0 {
                return Err(DiscreteError::NonPositivePrior { index });
            }
        }
        let mut dist = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = metrics::root_sine(&columns[i], &columns[j])?;
                dist[i][j] = d;
                dist[j][i] = d;
            }
        }
        Ok(Self::assemble(columns, prior, dist, None))
    }

    /// Internal constructor for builders that can compute the distance table
    /// in closed form; callers are responsible for its correctness.
    pub(crate) fn with_precomputed_distances(
        columns: Vec<ProbVector>,
        prior: ProbVector,
        dist: Vec<Vec<f64>>,
        names: Option<Vec<String>>,
    ) -> Self {
        Self::assemble(columns, prior, dist, names)
    }

    fn assemble(
        columns: Vec<ProbVector>,
        prior: ProbVector,
        dist: Vec<Vec<f64>>,
        names: Option<Vec<String>>,
    ) -> Self {
        let n = columns.len();
        let s = columns[0].len();
        let log_prior = prior.iter().map(|&p| p.ln()).collect();
        let log_by_sentence = (0..s)
            .map(|k| {
                columns
                    .iter()
                    .map(|col| {
                        let w = col.get(k);
                        if w > 0.0 {
                            w.ln()
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            columns,
            prior,
            log_prior,
            log_by_sentence,
            dist,
            names,
            s,
            n,
        }
    }

    /// Builds a model from the on-disk row layout (`likelihood[k][j]`).
    pub fn from_table(
        likelihood: Vec<Vec<f64>>,
        prior: Vec<f64>,
        names: Option<Vec<String>>,
    ) -> Result<Self, DiscreteError> {
        let s = likelihood.len();
        if s == 0 {
            return Err(DiscreteError::Shape("likelihood table is empty".into()));
        }
        let n = likelihood[0].len();
        for (row, r) in likelihood.iter().enumerate() {
            if r.len() != n {
                return Err(DiscreteError::RaggedTable {
                    row,
                    got: r.len(),
                    expected: n,
                });
            }
        }
        if let Some(ref names) = names {
            if names.len() != n {
                return Err(DiscreteError::Shape(format!(
                    "{} names for {} hypotheses",
                    names.len(),
                    n
                )));
            }
        }
        let columns = (0..n)
            .map(|j| ProbVector::new((0..s).map(|k| likelihood[k][j]).collect()))
            .collect::<Result<Vec<_>, _>>()?;
        let prior = ProbVector::new(prior)?;
        let mut model = Self::from_columns(columns, prior)?;
        model.names = names;
        Ok(model)
    }

    pub fn from_file(file: ModelFile) -> Result<Self, DiscreteError> {
        Self::from_table(file.likelihood, file.prior, file.names)
    }

    pub fn from_json_str(json: &str) -> Result<Self, DiscreteError> {
        let file: ModelFile = serde_json::from_str(json)
            .map_err(|e| DiscreteError::Shape(format!("model JSON: {e}")))?;
        Self::from_file(file)
    }

    /// Number of sentences.
    pub fn sentence_count(&self) -> usize {
        self.s
    }

    /// Number of hypotheses.
    pub fn hypothesis_count(&self) -> usize {
        self.n
    }

    pub fn prior(&self) -> &ProbVector {
        &self.prior
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// The language of hypothesis `j`.
    pub fn column(&self, j: usize) -> &ProbVector {
        &self.columns[j]
    }

    pub(crate) fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    pub(crate) fn log_by_sentence(&self) -> &[Vec<f64>] {
        &self.log_by_sentence
    }

    /// Root-sine distance between languages `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    /// `min_{j != i} d_ij`: the isolation radius of hypothesis `i`.
    pub fn min_distance(&self, i: usize) -> f64 {
        (0..self.n)
            .filter(|&j| j != i)
            .map(|j| self.dist[i][j])
            .fold(f64::INFINITY, f64::min)
    }

    fn check_hypothesis(&self, index: usize) -> Result<(), DiscreteError> {
        if index >= self.n {
            return Err(DiscreteError::HypothesisIndex { index, n: self.n });
        }
        Ok(())
    }

    /// Posterior over hypotheses given a multiset of observed sentences.
    ///
    /// Likelihood products are accumulated in log space and normalized with
    /// log-sum-exp, so arbitrarily long sessions cannot underflow.
    pub fn bayes_update(&self, data: &[usize]) -> Result<ProbVector, DiscreteError> {
        if data.is_empty() {
            return Err(DiscreteError::EmptyData);
        }
        let mut counts = vec![0u64; self.s];
        for &index in data {
            if index >= self.s {
                return Err(DiscreteError::SentenceIndex { index, s: self.s });
            }
            counts[index] += 1;
        }
        self.bayes_update_counts(&counts)
    }

    /// [`Self::bayes_update`] with the data already reduced to per-sentence
    /// counts (the likelihood depends on nothing else).
    pub fn bayes_update_counts(&self, counts: &[u64]) -> Result<ProbVector, DiscreteError> {
        if counts.len() != self.s {
            return Err(DiscreteError::Shape(format!(
                "{} sentence counts for {} sentences",
                counts.len(),
                self.s
            )));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(DiscreteError::EmptyData);
        }
        let mut log_post: Vec<f64> = self.log_prior.clone();
        for (k, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let row = &self.log_by_sentence[k];
            for (lp, &ll) in log_post.iter_mut().zip(row.iter()) {
                *lp += c as f64 * ll;
            }
        }
        normalized_from_log(&log_post).ok_or(DiscreteError::ImpossibleData)
    }

    /// The decay bound on off-diagonal transitions:
    /// `1/2 sqrt(p_j / p_i) exp(-d_ij^2 m / 2)` for `i != j`.
    pub fn transition_bound(&self, i: usize, j: usize, m: u64) -> Result<f64, DiscreteError> {
        self.check_hypothesis(i)?;
        self.check_hypothesis(j)?;
        if i == j {
            return Err(DiscreteError::Shape(
                "transition bound is defined for distinct hypotheses".into(),
            ));
        }
        let d = self.dist[i][j];
        Ok(0.5 * (self.prior.get(j) / self.prior.get(i)).sqrt() * (-0.5 * d * d * m as f64).exp())
    }

    /// Finds a cluster of hypotheses around `target` with a distance gap:
    /// every member lies within `rho * n` of the target and every non-member
    /// is at least `rho` away from every member.
    ///
    /// Scans the annuli `[k rho, (k+1) rho)` of the target's distance profile
    /// for the first empty one (one exists among `k = 1..n` by pigeonhole:
    /// there are only `n - 1` other hypotheses) and returns everything
    /// strictly inside the empty annulus' inner sphere.
    pub fn find_separated_cluster(
        &self,
        target: usize,
        rho: f64,
    ) -> Result<BTreeSet<usize>, DiscreteError> {
        self.check_hypothesis(target)?;
        if !rho.is_finite() || rho <= 0.0 {
            return Err(DiscreteError::InvalidClusterRadius { rho });
        }
        let dist_to_target = &self.dist[target];
        for k in 1..=self.n {
            let lo = k as f64 * rho;
            let hi = (k as f64 + 1.0) * rho;
            let annulus_empty = (0..self.n).all(|j| {
                let d = dist_to_target[j];
                d < lo || d >= hi
            });
            if !annulus_empty {
                continue;
            }
            let cluster: BTreeSet<usize> =
                (0..self.n).filter(|&j| dist_to_target[j] < lo).collect();
            // Defining properties, rechecked with floating-point slack.
            debug_assert!(cluster.contains(&target));
            for &j in &cluster {
                assert!(
                    dist_to_target[j] <= rho * self.n as f64 + 1e-9,
                    "cluster member {j} is {} from the target, beyond rho * n",
                    dist_to_target[j]
                );
            }
            for &i in &cluster {
                for j in 0..self.n {
                    if !cluster.contains(&j) {
                        assert!(
                            self.dist[i][j] >= rho - 1e-9,
                            "gap violated between cluster member {i} and outsider {j}"
                        );
                    }
                }
            }
            return Ok(cluster);
        }
        unreachable!("an empty annulus always exists by pigeonhole");
    }
}

/// Exponentiates and normalizes a log-weight vector; `None` when every
/// weight is zero.
pub(crate) fn normalized_from_log(log_weights: &[f64]) -> Option<ProbVector> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut weights: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Some(ProbVector::new(weights).expect("softmax output is a distribution"))
}
