//! Iterated Bayesian linear regression.
//!
//! Hypotheses are weight vectors `h` in R^d with prior `N(mu_bar,
//! sigma_bar^2 I)`; a session is a design matrix `X` (rows iid standard
//! Gaussian) and noisy responses `y = X h + noise`. Completing the square
//! gives the conjugate update
//!
//! ```text
//! Sigma_t = (sigma_bar^-2 I + sigma^-2 X'X)^-1
//! mu_t    = Sigma_t (sigma_bar^-2 mu_bar + sigma^-2 X'y),
//! ```
//!
//! and, conditional on the realized designs, the posterior means follow
//!
//! ```text
//! E mu_t = (I + M_t)^-1 (mu_bar + M_t E mu_{t-1}),   M_t = (sigma_bar/sigma)^2 X_t'X_t
//!        = Q_t mu0 + (I - Q_t) mu_bar,               Q_t = prod (I + M_s)^-1 M_s.
//! ```
//!
//! How much of the starting mean survives is a spectral question: with
//! `A_s = (I + M_s)^-1`,
//!
//! ```text
//! ||I - Q_t|| <= sum_s ||A_s||,      ||A_s|| <= ((sigma/sigma_bar) / sigma_min(X_s))^2,
//! ```
//!
//! and the smallest singular value of a tall Gaussian matrix concentrates
//! near `sqrt(m) - sqrt(d)`. [`qt_ledger`] keeps this bookkeeping and fails
//! hard if any of the identities or bounds is violated.
//!
//! All solves against `I + M` and the posterior precision go through a
//! symmetric positive-definite factorization, never a generic inverse.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use thiserror::Error;

use crate::exec::map_replicates;
use crate::sampling::standard_normal;
use crate::schedules::{Schedule, ScheduleError};
use crate::seed::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Hard cap on the hypothesis dimension; every spectral object here is a
/// dense `d x d` eigenproblem.
pub const MAX_DIMENSION: usize = 64;

/// Agreement tolerance for the product form of the conditional mean.
pub const MEAN_IDENTITY_TOL: f64 = 1e-8;
/// Slack on the spectral inequalities.
pub const SPECTRAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinregError {
    #[error("invalid configuration `{name}`: {reason}")]
    InvalidConfig { name: &'static str, reason: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not positive definite even after jitter")]
    NotSpd,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("run needs {required} scalar samples, over the budget of {budget}")]
    SampleBudget { required: u128, budget: u64 },
    #[error("{name} violated at t={t} by {excess:e}")]
    IdentityViolation {
        name: &'static str,
        t: u64,
        excess: f64,
    },
}

/// Distributional parameters of the regression chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionConfig {
    mu0: DVector<f64>,
    mu_bar: DVector<f64>,
    sigma_bar_sq: f64,
    sigma_sq: f64,
}

impl RegressionConfig {
    pub fn new(
        mu0: Vec<f64>,
        mu_bar: Vec<f64>,
        sigma_bar_sq: f64,
        sigma_sq: f64,
    ) -> Result<Self, LinregError> {
        if mu0.is_empty() || mu0.len() > MAX_DIMENSION {
            return Err(LinregError::InvalidConfig {
                name: "mu0",
                reason: format!("dimension must be in 1..={MAX_DIMENSION}, got {}", mu0.len()),
            });
        }
        if mu_bar.len() != mu0.len() {
            return Err(LinregError::InvalidConfig {
                name: "mu_bar",
                reason: format!("length {} does not match mu0 ({})", mu_bar.len(), mu0.len()),
            });
        }
        for (name, v) in [("sigma_bar_sq", sigma_bar_sq), ("sigma_sq", sigma_sq)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(LinregError::InvalidConfig {
                    name,
                    reason: format!("variance must be positive and finite, got {v}"),
                });
            }
        }
        if mu0.iter().chain(mu_bar.iter()).any(|v| !v.is_finite()) {
            return Err(LinregError::InvalidConfig {
                name: "mu0",
                reason: "means must be finite".into(),
            });
        }
        Ok(Self {
            mu0: DVector::from_vec(mu0),
            mu_bar: DVector::from_vec(mu_bar),
            sigma_bar_sq,
            sigma_sq,
        })
    }

    pub fn dimension(&self) -> usize {
        self.mu0.len()
    }

    pub fn mu0(&self) -> &DVector<f64> {
        &self.mu0
    }

    pub fn mu_bar(&self) -> &DVector<f64> {
        &self.mu_bar
    }

    pub fn sigma_bar_sq(&self) -> f64 {
        self.sigma_bar_sq
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    /// `(sigma_bar / sigma)^2`, the scale of `M_t`.
    fn gain(&self) -> f64 {
        self.sigma_bar_sq / self.sigma_sq
    }

    fn check_design(&self, x: &DMatrix<f64>) -> Result<(), LinregError> {
        if x.ncols() != self.dimension() {
            return Err(LinregError::Shape(format!(
                "design has {} columns for dimension {}",
                x.ncols(),
                self.dimension()
            )));
        }
        if x.nrows() == 0 {
            return Err(LinregError::Shape("design has no rows".into()));
        }
        Ok(())
    }
}

/// A learner's posterior `N(mu, Sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionPosterior {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

/// SPD factorization with a single 1e-12 jitter retry; the boolean reports
/// whether jitter was needed.
fn spd_cholesky(mat: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, bool), LinregError> {
    if let Some(chol) = Cholesky::new(mat.clone()) {
        return Ok((chol, false));
    }
    let jittered = mat + DMatrix::identity(mat.nrows(), mat.ncols()) * 1e-12;
    Cholesky::new(jittered)
        .map(|c| (c, true))
        .ok_or(LinregError::NotSpd)
}

fn symmetrize(mat: DMatrix<f64>) -> DMatrix<f64> {
    let t = mat.transpose();
    (mat + t) * 0.5
}

/// Spectral norm of a symmetric matrix.
fn sym_spectral_norm(mat: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(mat.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

/// Spectral norm of a general square matrix via the Gram matrix.
fn spectral_norm(mat: &DMatrix<f64>) -> f64 {
    let gram = symmetrize(mat.tr_mul(mat));
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v))
        .max(0.0)
        .sqrt()
}

/// Conjugate update for one session of designs `x` and responses `y`.
pub fn regression_update(
    cfg: &RegressionConfig,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<RegressionPosterior, LinregError> {
    cfg.check_design(x)?;
    if y.len() != x.nrows() {
        return Err(LinregError::Shape(format!(
            "{} responses for {} design rows",
            y.len(),
            x.nrows()
        )));
    }
    let d = cfg.dimension();
    let precision = DMatrix::identity(d, d) / cfg.sigma_bar_sq + x.tr_mul(x) / cfg.sigma_sq;
    let (chol, _) = spd_cholesky(&precision)?;
    let rhs = cfg.mu_bar() / cfg.sigma_bar_sq + x.tr_mul(y) / cfg.sigma_sq;
    let mu = chol.solve(&rhs);
    let sigma = symmetrize(chol.inverse());
    Ok(RegressionPosterior { mu, sigma })
}

/// Conditional expectation of the posterior means given a realized design
/// sequence: `E mu_t = (I + M_t)^-1 (mu_bar + M_t E mu_{t-1})`, `E mu_0 = mu0`.
pub fn conditional_mean_recursion(
    cfg: &RegressionConfig,
    designs: &[DMatrix<f64>],
) -> Result<Vec<DVector<f64>>, LinregError> {
    let d = cfg.dimension();
    let mut e = cfg.mu0().clone();
    let mut out = Vec::with_capacity(designs.len());
    for x in designs {
        cfg.check_design(x)?;
        let m = x.tr_mul(x) * cfg.gain();
        let (chol, _) = spd_cholesky(&(DMatrix::identity(d, d) + &m))?;
        e = chol.solve(&(cfg.mu_bar() + &m * &e));
        out.push(e.clone());
    }
    Ok(out)
}

/// Smallest singular value of a tall matrix, via the symmetric eigenproblem
/// of its Gram matrix.
pub fn min_singular_value(x: &DMatrix<f64>) -> Result<f64, LinregError> {
    if x.nrows() < x.ncols() {
        return Err(LinregError::Shape(format!(
            "need at least as many rows as columns, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let gram = symmetrize(x.tr_mul(x));
    let lambda_min = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v));
    Ok(lambda_min.max(0.0).sqrt())
}

/// Per-session spectral bookkeeping.
#[derive(Debug, Clone)]
pub struct LedgerStep {
    pub t: u64,
    pub m: u64,
    /// `||A_t|| = ||(I + M_t)^-1||`.
    pub a_norm: f64,
    pub q_norm: f64,
    pub i_minus_q_norm: f64,
    /// Running `sum_{s<=t} ||A_s||`.
    pub sum_a_norms: f64,
    /// Smallest singular value of the session design (`None` when the design
    /// is rank-deficient or wide, in which case the inverse-norm bound is
    /// skipped).
    pub sigma_min_x: Option<f64>,
    /// The bound `((sigma/sigma_bar)/sigma_min)^2` when available.
    pub a_norm_bound: Option<f64>,
    /// Conditional mean after this session.
    pub e_mu: DVector<f64>,
    /// Distance of the conditional mean from the starting mean.
    pub dist_to_mu0: f64,
}

/// Running state for the spectral ledger; one instance per design sequence.
struct LedgerState {
    q: DMatrix<f64>,
    e_rec: DVector<f64>,
    sum_a: f64,
}

impl LedgerState {
    fn new(cfg: &RegressionConfig) -> Self {
        let d = cfg.dimension();
        Self {
            q: DMatrix::identity(d, d),
            e_rec: cfg.mu0().clone(),
            sum_a: 0.0,
        }
    }

    fn step(
        &mut self,
        cfg: &RegressionConfig,
        x: &DMatrix<f64>,
        t: u64,
        m_len: u64,
    ) -> Result<LedgerStep, LinregError> {
        cfg.check_design(x)?;
        let d = cfg.dimension();
        let identity = DMatrix::identity(d, d);
        let m = x.tr_mul(x) * cfg.gain();
        let (chol, _) = spd_cholesky(&(&identity + &m))?;

        self.e_rec = chol.solve(&(cfg.mu_bar() + &m * &self.e_rec));

        let a = symmetrize(chol.inverse());
        let a_norm = sym_spectral_norm(&a);
        self.sum_a += a_norm;

        // Q_t = (I + M_t)^-1 M_t * Q_{t-1}.
        self.q = chol.solve(&(&m * &self.q));
        let q_norm = spectral_norm(&self.q);
        let i_minus_q = &identity - &self.q;
        let i_minus_q_norm = spectral_norm(&i_minus_q);

        // Product form of the conditional mean must match the recursion.
        let e_q = &self.q * cfg.mu0() + &i_minus_q * cfg.mu_bar();
        let mean_gap = (&e_q - &self.e_rec).amax();
        if mean_gap > MEAN_IDENTITY_TOL {
            return Err(LinregError::IdentityViolation {
                name: "conditional-mean product form",
                t,
                excess: mean_gap,
            });
        }
        if q_norm > 1.0 + SPECTRAL_TOL {
            return Err(LinregError::IdentityViolation {
                name: "survival-product contraction",
                t,
                excess: q_norm - 1.0,
            });
        }
        if i_minus_q_norm > self.sum_a + SPECTRAL_TOL {
            return Err(LinregError::IdentityViolation {
                name: "cumulative inverse-norm bound",
                t,
                excess: i_minus_q_norm - self.sum_a,
            });
        }

        let sigma_min_x = if x.nrows() >= x.ncols() {
            let s1 = min_singular_value(x)?;
            (s1 > 1e-7).then_some(s1)
        } else {
            None
        };
        let a_norm_bound = sigma_min_x.map(|s1| (cfg.sigma_sq / cfg.sigma_bar_sq) / (s1 * s1));
        if let Some(bound) = a_norm_bound {
            if a_norm > bound + SPECTRAL_TOL {
                return Err(LinregError::IdentityViolation {
                    name: "inverse-norm singular-value bound",
                    t,
                    excess: a_norm - bound,
                });
            }
        }

        let dist_to_mu0 = (&self.e_rec - cfg.mu0()).norm();
        // Information decay is capped by the accumulated inverse norms.
        let decay_cap = (cfg.mu_bar() - cfg.mu0()).norm() * self.sum_a + SPECTRAL_TOL;
        if dist_to_mu0 > decay_cap {
            return Err(LinregError::IdentityViolation {
                name: "information decay bound",
                t,
                excess: dist_to_mu0 - decay_cap,
            });
        }

        Ok(LedgerStep {
            t,
            m: m_len,
            a_norm,
            q_norm,
            i_minus_q_norm,
            sum_a_norms: self.sum_a,
            sigma_min_x,
            a_norm_bound,
            e_mu: self.e_rec.clone(),
            dist_to_mu0,
        })
    }
}

/// The full spectral ledger of a realized design sequence. Fails with
/// [`LinregError::IdentityViolation`] if any identity or bound breaks.
pub fn qt_ledger(
    cfg: &RegressionConfig,
    designs: &[DMatrix<f64>],
) -> Result<Vec<LedgerStep>, LinregError> {
    let mut state = LedgerState::new(cfg);
    designs
        .iter()
        .enumerate()
        .map(|(i, x)| state.step(cfg, x, i as u64 + 1, x.nrows() as u64))
        .collect()
}

/// Result of a smallest-singular-value tail experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheck {
    pub m: usize,
    pub d: usize,
    pub gamma: f64,
    pub draws: u64,
    /// `sqrt(m) - sqrt(d) - gamma`.
    pub threshold: f64,
    pub tail_count: u64,
    pub frequency: f64,
    /// The concentration bound `exp(-gamma^2 / 2)`.
    pub bound: f64,
    /// Bound plus Monte Carlo slack `3 sqrt(bound/draws) + 10/draws`.
    pub bound_with_slack: f64,
    pub passed: bool,
}

/// Empirical tail frequency of `sigma_min(X) < sqrt(m) - sqrt(d) - gamma`
/// over standard Gaussian `m x d` draws, against `exp(-gamma^2 / 2)`.
pub fn singular_tail_check(
    m: usize,
    d: usize,
    gamma: f64,
    draws: u64,
    seed: u64,
    threads: usize,
) -> Result<TailCheck, LinregError> {
    if m < d || d == 0 {
        return Err(LinregError::Shape(format!(
            "need m >= d >= 1, got m={m}, d={d}"
        )));
    }
    if draws == 0 {
        return Err(LinregError::InvalidConfig {
            name: "draws",
            reason: "need at least one draw".into(),
        });
    }
    let threshold = (m as f64).sqrt() - (d as f64).sqrt() - gamma;
    let hits = map_replicates(draws, threads, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r, "singular-tail"));
        let x = DMatrix::from_fn(m, d, |_, _| standard_normal(&mut rng));
        let s1 = min_singular_value(&x).expect("tall matrix by construction");
        u64::from(s1 < threshold)
    });
    let tail_count: u64 = hits.iter().sum();
    let frequency = tail_count as f64 / draws as f64;
    let bound = (-gamma * gamma / 2.0).exp();
    let bound_with_slack = bound + 3.0 * (bound / draws as f64).sqrt() + 10.0 / draws as f64;
    Ok(TailCheck {
        m,
        d,
        gamma,
        draws,
        threshold,
        tail_count,
        frequency,
        bound,
        bound_with_slack,
        passed: frequency <= bound_with_slack,
    })
}

/// One session row of a simulated replicate, in the output schema.
#[derive(Debug, Clone)]
pub struct LinregRow {
    pub t: u64,
    pub m: u64,
    pub dist_to_mu0: f64,
    pub i_minus_q_norm: f64,
    pub sum_a_norms: f64,
    pub sigma_min_x: f64,
}

/// One replicate: fresh designs per session, the exact conditional mean
/// given those designs, the spectral ledger, and a fully stochastic agent
/// chain over the same designs as a distributional sanity track.
#[derive(Debug, Clone)]
pub struct LinregReplicate {
    pub replicate: u64,
    pub seed: u64,
    pub rows: Vec<LinregRow>,
    /// Whether `max_t ||E mu_t - mu0||` stayed within the target distance.
    pub verdict: bool,
    /// Conditional posterior means per session.
    pub conditional_mu: Vec<DVector<f64>>,
    /// Agent-chain posterior means per session; their average across
    /// replicates estimates the same expectation as `conditional_mu`'s, but
    /// each trajectory carries the hypothesis-sampling randomness.
    pub agent_mu: Vec<DVector<f64>>,
    /// Largest posterior-covariance eigenvalue seen in the agent chain.
    pub max_cov_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct LinregRun {
    pub replicates: Vec<LinregReplicate>,
    /// Fraction of replicates whose verdict is true.
    pub verdict_fraction: f64,
    /// Session lengths used (after the `m_t >= d` floor).
    pub session_lengths: Vec<u64>,
}

/// Simulates `replicates` independent regression chains for `t_max`
/// sessions.
///
/// Per replicate and session, a fresh `m_t x d` standard Gaussian design is
/// drawn; the conditional mean recursion (exact in the hypothesis and noise
/// randomness) yields `dist_to_mu0` and the verdict against `delta`, while
/// an agent chain sampling `h` from the running posterior and observing
/// `y = X h + noise` runs alongside. Session lengths are floored at `d` so
/// the singular-value machinery always applies.
#[allow(clippy::too_many_arguments)]
pub fn simulate_linreg(
    cfg: &RegressionConfig,
    schedule: &Schedule,
    t_max: u64,
    replicates: u64,
    delta: f64,
    seed: u64,
    threads: usize,
    sample_budget: u64,
) -> Result<LinregRun, LinregError> {
    if replicates == 0 {
        return Err(LinregError::InvalidConfig {
            name: "replicates",
            reason: "need at least one replicate".into(),
        });
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(LinregError::InvalidConfig {
            name: "delta",
            reason: format!("target distance must be positive, got {delta}"),
        });
    }
    let d = cfg.dimension();
    let mut session_lengths = Vec::with_capacity(t_max as usize);
    let mut required: u128 = 0;
    for t in 1..=t_max {
        let m = schedule.eval(t)?.max(d as u64);
        required += m as u128 * d as u128 * replicates as u128;
        session_lengths.push(m);
    }
    if required > sample_budget as u128 {
        return Err(LinregError::SampleBudget {
            required,
            budget: sample_budget,
        });
    }

    let runs = map_replicates(replicates, threads, |r| -> Result<LinregReplicate, LinregError> {
        let rep_seed = derive_seed(seed, r, "linreg");
        let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
        let mut ledger = LedgerState::new(cfg);
        // Learner 0 of the agent chain: prior centered on mu0.
        let mut agent = RegressionPosterior {
            mu: cfg.mu0().clone(),
            sigma: DMatrix::identity(d, d) * cfg.sigma_bar_sq,
        };
        let mut rows = Vec::with_capacity(session_lengths.len());
        let mut conditional_mu = Vec::with_capacity(session_lengths.len());
        let mut agent_mu = Vec::with_capacity(session_lengths.len());
        let mut max_cov_eigenvalue = 0.0f64;
        for (idx, &m) in session_lengths.iter().enumerate() {
            let t = idx as u64 + 1;
            let x = DMatrix::from_fn(m as usize, d, |_, _| standard_normal(&mut rng));
            let step = ledger.step(cfg, &x, t, m)?;

            // Agent chain: sample a hypothesis from the teacher's posterior,
            // observe it through the session design, update.
            let (chol, _) = spd_cholesky(&agent.sigma)?;
            let z = DVector::from_fn(d, |_, _| standard_normal(&mut rng));
            let hypothesis = &agent.mu + chol.l() * z;
            let noise = DVector::from_fn(m as usize, |_, _| standard_normal(&mut rng))
                * cfg.sigma_sq.sqrt();
            let y = &x * hypothesis + noise;
            agent = regression_update(cfg, &x, &y)?;
            let cov_top = sym_spectral_norm(&agent.sigma);
            if cov_top > cfg.sigma_bar_sq + SPECTRAL_TOL {
                return Err(LinregError::IdentityViolation {
                    name: "posterior covariance ordering",
                    t,
                    excess: cov_top - cfg.sigma_bar_sq,
                });
            }
            max_cov_eigenvalue = max_cov_eigenvalue.max(cov_top);
            agent_dist.push((&agent.mu - cfg.mu0()).norm());

            rows.push(LinregRow {
                t,
                m,
                dist_to_mu0: step.dist_to_mu0,
                i_minus_q_norm: step.i_minus_q_norm,
                sum_a_norms: step.sum_a_norms,
                sigma_min_x: step.sigma_min_x.unwrap_or(f64::NAN),
            });
        }
        let verdict = rows.iter().all(|row| row.dist_to_mu0 <= delta);
        Ok(LinregReplicate {
            replicate: r,
            seed: rep_seed,
            rows,
            verdict,
            agent_dist,
            max_cov_eigenvalue,
        })
    });
    let mut replicate_results = Vec::with_capacity(runs.len());
    for run in runs {
        replicate_results.push(run?);
    }
    let verdict_fraction = replicate_results.iter().filter(|r| r.verdict).count() as f64
        / replicate_results.len() as f64;
    Ok(LinregRun {
        replicates: replicate_results,
        verdict_fraction,
        session_lengths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{posterior_update, GaussianConfig};
    use crate::schedules::ScheduleKind;
    use approx::assert_abs_diff_eq;

    fn cfg_d2() -> RegressionConfig {
        RegressionConfig::new(vec![1.0, 1.0], vec![0.0, 0.0], 1.0, 1.0).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(RegressionConfig::new(vec![], vec![], 1.0, 1.0).is_err());
        assert!(RegressionConfig::new(vec![0.0; 65], vec![0.0; 65], 1.0, 1.0).is_err());
        assert!(RegressionConfig::new(vec![1.0], vec![0.0, 0.0], 1.0, 1.0).is_err());
        assert!(RegressionConfig::new(vec![1.0], vec![0.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn update_with_zero_design_returns_the_prior() {
        let cfg = cfg_d2();
        let x = DMatrix::zeros(3, 2);
        let y = DVector::from_vec(vec![5.0, -1.0, 2.0]);
        let post = regression_update(&cfg, &x, &y).unwrap();
        assert_abs_diff_eq!(post.mu[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(post.mu[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(post.sigma[(0, 0)], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(post.sigma[(0, 1)], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn update_one_dimensional_hand_example() {
        let cfg = RegressionConfig::new(vec![0.0], vec![0.3], 1.0, 1.0).unwrap();
        let x = DMatrix::from_row_slice(1, 1, &[1.0]);
        let y = DVector::from_vec(vec![2.0]);
        let post = regression_update(&cfg, &x, &y).unwrap();
        assert_abs_diff_eq!(post.sigma[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(post.mu[0], (0.3 + 2.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn update_shrinks_toward_the_least_squares_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cfg = RegressionConfig::new(vec![0.0, 0.0], vec![2.0, -1.0], 1.0, 1.0).unwrap();
        let truth = DVector::from_vec(vec![0.7, -0.4]);
        let x = DMatrix::from_fn(60, 2, |_, _| standard_normal(&mut rng));
        let y = &x * &truth; // noiseless
        let post = regression_update(&cfg, &x, &y).unwrap();
        // Least-squares oracle on the same data recovers the truth exactly.
        let gram = x.tr_mul(&x);
        let ls = Cholesky::new(gram).unwrap().solve(&x.tr_mul(&y));
        assert_abs_diff_eq!((ls - &truth).norm(), 0.0, epsilon = 1e-10);
        assert!((&post.mu - &truth).norm() <= (cfg.mu_bar() - &truth).norm());
    }

    #[test]
    fn update_matches_one_dimensional_gaussian_with_unit_design() {
        // An all-ones design column makes the regression update coincide
        // with the scalar conjugate update.
        let g = GaussianConfig {
            mu0: 1.0,
            sigma0_sq: 1.0,
            mu_bar: 0.4,
            sigma_bar_sq: 2.0,
            sigma_sq: 0.5,
        };
        let cfg = RegressionConfig::new(vec![1.0], vec![0.4], 2.0, 0.5).unwrap();
        let data = [1.5, -0.2, 0.9, 2.2];
        let x = DMatrix::from_element(data.len(), 1, 1.0);
        let y = DVector::from_row_slice(&data);
        let got = regression_update(&cfg, &x, &y).unwrap();
        let expected = posterior_update(&g, &data).unwrap();
        assert_abs_diff_eq!(got.mu[0], expected.mu, epsilon = 1e-12);
        assert_abs_diff_eq!(got.sigma[(0, 0)], expected.sigma_sq(), epsilon = 1e-12);
    }

    #[test]
    fn recursion_trivial_cases() {
        let cfg = cfg_d2();
        // Zero designs: the mean jumps to the prior mean and stays.
        let designs = vec![DMatrix::zeros(2, 2); 4];
        let means = conditional_mean_recursion(&cfg, &designs).unwrap();
        for e in &means {
            assert_abs_diff_eq!(e.norm(), 0.0, epsilon = 1e-12);
        }
        // mu0 = mu_bar: nothing moves, any designs.
        let cfg_fixed = RegressionConfig::new(vec![0.5, 0.5], vec![0.5, 0.5], 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let designs: Vec<_> = (0..5)
            .map(|_| DMatrix::from_fn(6, 2, |_, _| standard_normal(&mut rng)))
            .collect();
        for e in conditional_mean_recursion(&cfg_fixed, &designs).unwrap() {
            assert_abs_diff_eq!((e - cfg_fixed.mu0()).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn scalar_recursion_halves_each_step() {
        // d = 1, unit design, sigma = sigma_bar: M = 1, so the surviving
        // fraction halves every session.
        let cfg = RegressionConfig::new(vec![1.0], vec![0.0], 1.0, 1.0).unwrap();
        let designs = vec![DMatrix::from_row_slice(1, 1, &[1.0]); 10];
        let means = conditional_mean_recursion(&cfg, &designs).unwrap();
        for (idx, e) in means.iter().enumerate() {
            assert_abs_diff_eq!(e[0], 0.5f64.powi(idx as i32 + 1), epsilon = 1e-12);
        }
        let ledger = qt_ledger(&cfg, &designs).unwrap();
        assert_abs_diff_eq!(ledger[1].q_norm, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(ledger[1].i_minus_q_norm, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(ledger[1].sum_a_norms, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn enormous_information_gain_pins_the_mean() {
        // M_t = 1e6 I: the survival product loses at most 1e-6 per step.
        let cfg = cfg_d2();
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![1000.0, 1000.0]));
        let designs = vec![x; 8];
        let ledger = qt_ledger(&cfg, &designs).unwrap();
        for (idx, step) in ledger.iter().enumerate() {
            assert!(step.i_minus_q_norm <= (idx as f64 + 1.0) * 1.1e-6);
        }
    }

    #[test]
    fn ledger_identities_on_random_designs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        let cfg = RegressionConfig::new(vec![1.0, -0.5, 0.25], vec![0.0, 0.0, 0.0], 1.0, 1.0)
            .unwrap();
        let designs: Vec<_> = (0..10)
            .map(|_| DMatrix::from_fn(20, 3, |_, _| standard_normal(&mut rng)))
            .collect();
        let ledger = qt_ledger(&cfg, &designs).unwrap();
        let means = conditional_mean_recursion(&cfg, &designs).unwrap();
        for (step, mean) in ledger.iter().zip(means.iter()) {
            assert!((&step.e_mu - mean).amax() < 1e-12);
            assert!(step.q_norm <= 1.0 + 1e-12);
            assert!(step.i_minus_q_norm <= step.sum_a_norms + 1e-10);
            assert!(step.a_norm <= step.a_norm_bound.unwrap() + 1e-10);
        }
    }

    #[test]
    fn min_singular_value_examples() {
        let eye = DMatrix::<f64>::identity(4, 4);
        assert_abs_diff_eq!(min_singular_value(&eye).unwrap(), 1.0, epsilon = 1e-12);

        let mut stacked = DMatrix::zeros(5, 2);
        stacked[(0, 0)] = 3.0;
        stacked[(1, 1)] = 2.0;
        assert_abs_diff_eq!(min_singular_value(&stacked).unwrap(), 2.0, epsilon = 1e-12);

        let wide = DMatrix::zeros(2, 5);
        assert!(min_singular_value(&wide).is_err());
    }

    #[test]
    fn min_singular_value_matches_characteristic_polynomial_bisection() {
        // Independent oracle for d <= 3: bisect det(G - lambda I) sign
        // changes on [0, trace].
        fn det3(g: &DMatrix<f64>, lambda: f64) -> f64 {
            let a = g[(0, 0)] - lambda;
            let b = g[(0, 1)];
            let c = g[(0, 2)];
            let d = g[(1, 1)] - lambda;
            let e = g[(1, 2)];
            let f = g[(2, 2)] - lambda;
            a * (d * f - e * e) - b * (b * f - c * e) + c * (b * e - c * d)
        }
        let mut rng = ChaCha8Rng::seed_from_u64(808);
        for _ in 0..20 {
            let x = DMatrix::from_fn(40, 3, |_, _| standard_normal(&mut rng));
            let g = symmetrize(x.tr_mul(&x));
            // det is positive at 0 (G is PD) and flips sign at lambda_min.
            let mut lo = 0.0f64;
            let mut hi = g.trace();
            assert!(det3(&g, lo) > 0.0);
            while det3(&g, hi) > 0.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if det3(&g, mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let oracle = (0.5 * (lo + hi)).sqrt();
            assert_abs_diff_eq!(min_singular_value(&x).unwrap(), oracle, epsilon = 1e-6);
        }
    }

    #[test]
    fn tail_check_trivial_threshold() {
        // Threshold below zero: the event is impossible.
        let check = singular_tail_check(4, 1, 5.0, 200, 3, 1).unwrap();
        assert!(check.threshold < 0.0);
        assert_eq!(check.tail_count, 0);
        assert!(check.passed);
    }

    #[test]
    fn tail_check_respects_concentration_bound() {
        let check = singular_tail_check(64, 4, 2.0, 2000, 9, 1).unwrap();
        assert!(
            check.frequency <= check.bound_with_slack,
            "frequency {} bound {}",
            check.frequency,
            check.bound_with_slack
        );
    }

    #[test]
    fn simulate_is_deterministic_and_thread_invariant() {
        let cfg = cfg_d2();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 6 });
        let run = |threads| {
            simulate_linreg(&cfg, &schedule, 8, 20, 0.5, 99, threads, u64::MAX).unwrap()
        };
        let serial = run(1);
        let parallel = run(4);
        assert_eq!(serial.verdict_fraction, parallel.verdict_fraction);
        for (a, b) in serial.replicates.iter().zip(parallel.replicates.iter()) {
            assert_eq!(a.seed, b.seed);
            for (ra, rb) in a.rows.iter().zip(b.rows.iter()) {
                assert_eq!(ra.dist_to_mu0, rb.dist_to_mu0);
            }
            assert_eq!(a.agent_dist, b.agent_dist);
        }
    }

    #[test]
    fn simulate_trivial_when_start_equals_prior() {
        let cfg = RegressionConfig::new(vec![0.7, 0.7], vec![0.7, 0.7], 1.0, 1.0).unwrap();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 4 });
        let run = simulate_linreg(&cfg, &schedule, 6, 10, 0.01, 5, 1, u64::MAX).unwrap();
        assert_abs_diff_eq!(run.verdict_fraction, 1.0, epsilon = 0.0);
        for rep in &run.replicates {
            for row in &rep.rows {
                assert!(row.dist_to_mu0 < 1e-10);
            }
        }
    }

    #[test]
    fn simulate_constant_small_sessions_drift_to_the_prior() {
        let cfg = cfg_d2();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 2 });
        let run = simulate_linreg(&cfg, &schedule, 40, 50, 0.2, 21, 1, u64::MAX).unwrap();
        assert!(
            run.verdict_fraction <= 0.05,
            "verdicts {}",
            run.verdict_fraction
        );
        // The conditional mean has essentially forgotten mu0 by t = 40.
        let gap = (cfg.mu0() - cfg.mu_bar()).norm();
        let mean_final: f64 = run
            .replicates
            .iter()
            .map(|r| r.rows.last().unwrap().dist_to_mu0)
            .sum::<f64>()
            / run.replicates.len() as f64;
        assert!(mean_final > 0.8 * gap, "mean final distance {mean_final}");
    }

    #[test]
    fn simulate_budget_is_enforced() {
        let cfg = cfg_d2();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 100 });
        assert!(matches!(
            simulate_linreg(&cfg, &schedule, 10, 10, 0.2, 1, 1, 1000),
            Err(LinregError::SampleBudget { .. })
        ));
    }

    #[test]
    fn agent_chain_tracks_the_conditional_mean_on_average() {
        let cfg = cfg_d2();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 25 });
        let run = simulate_linreg(&cfg, &schedule, 5, 400, 10.0, 17, 1, u64::MAX).unwrap();
        // Average the agent's final mean distance and the conditional one;
        // the agent adds hypothesis/noise variance but shares the mean.
        let t_last = 4usize;
        let cond: f64 = run
            .replicates
            .iter()
            .map(|r| r.rows[t_last].dist_to_mu0)
            .sum::<f64>()
            / run.replicates.len() as f64;
        let agent: f64 = run
            .replicates
            .iter()
            .map(|r| r.agent_dist[t_last])
            .sum::<f64>()
            / run.replicates.len() as f64;
        // Loose band: the agent curve is noisier but must sit near the
        // conditional one, not near the prior gap.
        assert!(
            (agent - cond).abs() < 0.25,
            "agent {agent} vs conditional {cond}"
        );
        for rep in &run.replicates {
            assert!(rep.max_cov_eigenvalue <= cfg.sigma_bar_sq() + 1e-10);
        }
    }
}
