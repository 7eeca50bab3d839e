//! 1-D Gaussian iterated learning.
//!
//! Every learner shares the prior `N(mu_bar, sigma_bar^2)` and observes data
//! with noise variance `sigma^2`; the original teacher is learner 0 with
//! posterior `N(mu0, sigma0^2)`. Conjugacy keeps every posterior Gaussian,
//! with the precision-form update
//!
//! ```text
//! mu_t  = (tau_bar mu_bar + tau sum(d)) / (tau_bar + m_t tau)
//! tau_t = tau_bar + m_t tau,
//! ```
//!
//! and the posterior-mean moments obey exact recursions. In *chained* mode
//! learner `t` samples its teacher hypothesis from learner `t-1`; in *hopped*
//! mode the teacher is drawn uniformly from all past learners `0..t-1`, which
//! slows forgetting enough that polylogarithmic sessions suffice.
//!
//! With `beta_t = m_t tau / (tau_bar + m_t tau)`:
//!
//! ```text
//! chained:  E mu_t = beta_t E mu_{t-1} + (1 - beta_t) mu_bar
//!           Var mu_t = (beta_t^2 / m_t)(Var mu_{t-1} + sigma_{t-1}^2 + sigma^2)
//! hopped:   E mu_t = (beta_t / t) sum_{s < t} E mu_s + (1 - beta_t) mu_bar
//!           E mu_t = gamma_t mu0 + (1 - gamma_t) mu_bar,
//!           gamma_t = (beta_t / t) prod_{s=1}^{t-1} (1 + beta_s / s)
//! ```
//!
//! Each recursion is cross-checked against its closed form to 1e-10 as it
//! runs; a disagreement is a hard error, not a warning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::map_replicates;
use crate::numeric::{KahanSum, Welford};
use crate::sampling::standard_normal;
use crate::schedules::{Schedule, ScheduleError};
use crate::seed::derive_seed;

/// Agreement tolerance between a moment recursion and its closed form.
pub const MOMENT_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaussianError {
    #[error("invalid configuration `{name}`: {reason}")]
    InvalidConfig { name: &'static str, reason: String },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("a training session needs at least one observation")]
    EmptyData,
    #[error("{what} at t={t}: recursion {got} vs closed form {expected} (tol {MOMENT_CHECK_TOL:e})")]
    MomentMismatch {
        what: &'static str,
        t: u64,
        got: f64,
        expected: f64,
    },
}

/// Distributional parameters of the chain. `Default` is the benchmark
/// configuration `mu0 = 1, mu_bar = 0`, all variances 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianConfig {
    /// Mean of learner 0's posterior (the value being transmitted).
    pub mu0: f64,
    /// Variance of learner 0's posterior.
    pub sigma0_sq: f64,
    /// Prior mean shared by all learners.
    pub mu_bar: f64,
    /// Prior variance.
    pub sigma_bar_sq: f64,
    /// Observation noise variance.
    pub sigma_sq: f64,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            sigma0_sq: 1.0,
            mu_bar: 0.0,
            sigma_bar_sq: 1.0,
            sigma_sq: 1.0,
        }
    }
}

impl GaussianConfig {
    pub fn validate(&self) -> Result<(), GaussianError> {
        for (name, v) in [
            ("sigma0_sq", self.sigma0_sq),
            ("sigma_bar_sq", self.sigma_bar_sq),
            ("sigma_sq", self.sigma_sq),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(GaussianError::InvalidConfig {
                    name,
                    reason: format!("variance must be positive and finite, got {v}"),
                });
            }
        }
        for (name, v) in [("mu0", self.mu0), ("mu_bar", self.mu_bar)] {
            if !v.is_finite() {
                return Err(GaussianError::InvalidConfig {
                    name,
                    reason: "must be finite".into(),
                });
            }
        }
        Ok(())
    }

    /// Observation precision `1 / sigma^2`.
    pub fn tau(&self) -> f64 {
        1.0 / self.sigma_sq
    }

    /// Prior precision `1 / sigma_bar^2`.
    pub fn tau_bar(&self) -> f64 {
        1.0 / self.sigma_bar_sq
    }

    fn beta(&self, m: u64) -> f64 {
        let mt = m as f64 * self.tau();
        mt / (self.tau_bar() + mt)
    }
}

/// A learner's posterior in precision form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPosterior {
    pub mu: f64,
    pub tau: f64,
}

impl GaussianPosterior {
    pub fn sigma_sq(&self) -> f64 {
        1.0 / self.tau
    }
}

/// Conjugate update for one training session.
pub fn posterior_update(
    cfg: &GaussianConfig,
    data: &[f64],
) -> Result<GaussianPosterior, GaussianError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(GaussianError::EmptyData);
    }
    let m = data.len() as f64;
    let sum: f64 = data.iter().sum();
    let tau = cfg.tau_bar() + m * cfg.tau();
    Ok(GaussianPosterior {
        mu: (cfg.tau_bar() * cfg.mu_bar + cfg.tau() * sum) / tau,
        tau,
    })
}

/// One row of the analytic moment track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStep {
    pub t: u64,
    pub m: u64,
    pub e_mu: f64,
    pub var_mu: f64,
    /// Posterior variance `sigma_t^2 = 1 / (tau_bar + m_t tau)`.
    pub sigma_t_sq: f64,
    pub beta: f64,
    /// Fraction of the starting mean surviving at `t` (hopped mode only).
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentTrack {
    pub steps: Vec<MomentStep>,
}

impl MomentTrack {
    /// Largest `t` (1-based) at which `sigma_t^2 + Var mu_t` increases, if
    /// any; after this burn-in the combined spread is nonincreasing.
    pub fn spread_burn_in(&self) -> Option<u64> {
        let spread: Vec<f64> = self
            .steps
            .iter()
            .map(|s| s.sigma_t_sq + s.var_mu)
            .collect();
        (1..spread.len())
            .rev()
            .find(|&i| spread[i] > spread[i - 1])
            .map(|i| self.steps[i].t)
    }
}

/// Exact moments of the chained process for `t = 1..=t_max`.
///
/// The mean recursion is verified against the closed product form
/// `E mu_t = prod(beta) mu0 + (1 - prod(beta)) mu_bar` at every step.
pub fn chained_moments(
    cfg: &GaussianConfig,
    schedule: &Schedule,
    t_max: u64,
) -> Result<MomentTrack, GaussianError> {
    cfg.validate()?;
    let mut steps = Vec::with_capacity(t_max as usize);
    let mut e_prev = cfg.mu0;
    let mut var_prev = 0.0;
    let mut sigma_sq_prev = cfg.sigma0_sq;
    let mut beta_product = 1.0f64;
    for t in 1..=t_max {
        let m = schedule.eval(t)?;
        let beta = cfg.beta(m);
        let e_mu = beta * e_prev + (1.0 - beta) * cfg.mu_bar;
        beta_product *= beta;
        let closed = beta_product * cfg.mu0 + (1.0 - beta_product) * cfg.mu_bar;
        if (e_mu - closed).abs() > MOMENT_CHECK_TOL {
            return Err(GaussianError::MomentMismatch {
                what: "chained mean",
                t,
                got: e_mu,
                expected: closed,
            });
        }
        let var_mu = beta * beta / m as f64 * (var_prev + sigma_sq_prev + cfg.sigma_sq);
        let sigma_t_sq = 1.0 / (cfg.tau_bar() + m as f64 * cfg.tau());
        steps.push(MomentStep {
            t,
            m,
            e_mu,
            var_mu,
            sigma_t_sq,
            beta,
            gamma: None,
        });
        e_prev = e_mu;
        var_prev = var_mu;
        sigma_sq_prev = sigma_t_sq;
    }
    Ok(MomentTrack { steps })
}

/// Exact moments of the hopped process for `t = 1..=t_max`, in O(1) work per
/// step via running sums.
///
/// The mean comes from the running-sum recursion and is verified against the
/// product form of `gamma_t`; the variance uses the teacher-selector
/// decomposition reduced to `beta_t^2 (S1 / (m_t t) + M2_t / t)`, where `S1`
/// sums `sigma_s^2 + sigma^2 + Var mu_s` over past learners and `M2_t` is the
/// sum of squared deviations of their means.
pub fn hopped_moments(
    cfg: &GaussianConfig,
    schedule: &Schedule,
    t_max: u64,
) -> Result<MomentTrack, GaussianError> {
    cfg.validate()?;
    let mut steps = Vec::with_capacity(t_max as usize);
    // Accumulators over learners 0..t-1, seeded with learner 0.
    let mut mean_sum = KahanSum::default();
    mean_sum.add(cfg.mu0);
    let mut mean_stats = Welford::default();
    mean_stats.add(cfg.mu0);
    let mut spread_sum = KahanSum::default();
    spread_sum.add(cfg.sigma0_sq + cfg.sigma_sq); // Var mu_0 = 0
    let mut gamma_product = 1.0f64; // prod_{s=1}^{t-1} (1 + beta_s / s)
    for t in 1..=t_max {
        let m = schedule.eval(t)?;
        let beta = cfg.beta(m);
        let tf = t as f64;
        let e_mu = beta / tf * mean_sum.value() + (1.0 - beta) * cfg.mu_bar;
        let gamma = beta / tf * gamma_product;
        if cfg.mu0 != cfg.mu_bar {
            let implied = (e_mu - cfg.mu_bar) / (cfg.mu0 - cfg.mu_bar);
            if (gamma - implied).abs() > MOMENT_CHECK_TOL {
                return Err(GaussianError::MomentMismatch {
                    what: "hopped survival fraction",
                    t,
                    got: gamma,
                    expected: implied,
                });
            }
        }
        debug_assert!(gamma > 0.0 && gamma <= 1.0 + 1e-12);
        let var_mu = beta * beta * (spread_sum.value() / (m as f64 * tf) + mean_stats.m2() / tf);
        let sigma_t_sq = 1.0 / (cfg.tau_bar() + m as f64 * cfg.tau());
        steps.push(MomentStep {
            t,
            m,
            e_mu,
            var_mu,
            sigma_t_sq,
            beta,
            gamma: Some(gamma.min(1.0)),
        });
        mean_sum.add(e_mu);
        mean_stats.add(e_mu);
        spread_sum.add(sigma_t_sq + cfg.sigma_sq + var_mu);
        gamma_product *= 1.0 + beta / tf;
    }
    Ok(MomentTrack { steps })
}

/// `Var mu_t` of the hopped process by the literal teacher-selector
/// decomposition: per past learner `s`, the variance of its selected
/// contribution, plus the pairwise covariances of distinct teachers. O(t^2)
/// per step — this is the reference route, kept independent of
/// [`hopped_moments`]'s collapsed form.
pub fn hopped_variance(
    cfg: &GaussianConfig,
    schedule: &Schedule,
    t_max: u64,
) -> Result<Vec<f64>, GaussianError> {
    let track = hopped_moments(cfg, schedule, t_max)?;
    // Per-learner values indexed by s = 0..=t_max.
    let mut e = vec![cfg.mu0];
    let mut var = vec![0.0];
    let mut sig_sq = vec![cfg.sigma0_sq];
    for step in &track.steps {
        e.push(step.e_mu);
        var.push(step.var_mu);
        sig_sq.push(step.sigma_t_sq);
    }
    let mut out = Vec::with_capacity(t_max as usize);
    for step in &track.steps {
        let (t, m) = (step.t as usize, step.m as f64);
        let tf = t as f64;
        let selector = m / tf; // E[chi] = E[chi^2] = 1/t, E[D_s] = m E[mu_s]
        let mut total = 0.0;
        for s in 0..t {
            let second_moment = m * (sig_sq[s] + cfg.sigma_sq + var[s] + m * e[s] * e[s]);
            total += second_moment / tf - selector * selector * e[s] * e[s];
        }
        for s1 in 0..t {
            for s2 in 0..t {
                if s1 != s2 {
                    total -= selector * selector * e[s1] * e[s2];
                }
            }
        }
        out.push((step.beta / m).powi(2) * total);
    }
    Ok(out)
}

/// Chained or hopped agent simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McMode {
    Chained,
    Hopped,
}

/// Per-session aggregate over replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McStep {
    pub t: u64,
    pub m: u64,
    pub emp_mean: f64,
    /// Sample variance of the posterior means across replicates.
    pub emp_var: f64,
    /// Standard error of `emp_mean`.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McTrack {
    pub steps: Vec<McStep>,
    pub replicates: u64,
}

/// Posterior means `mu_1..mu_t_max` of a single simulated chain.
///
/// The teacher's hypothesis is sampled from its posterior and the session's
/// observation total is drawn from its exact law `N(m h, m sigma^2)` — the
/// posterior depends on the data only through that total.
pub fn simulate_replicate(
    cfg: &GaussianConfig,
    schedule: &Schedule,
    t_max: u64,
    mode: McMode,
    seed: u64,
) -> Result<Vec<f64>, GaussianError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut posteriors: Vec<(f64, f64)> = Vec::with_capacity(t_max as usize + 1);
    posteriors.push((cfg.mu0, cfg.sigma0_sq));
    let mut out = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        let m = schedule.eval(t)?;
        let teacher = match mode {
            McMode::Chained => posteriors.len() - 1,
            McMode::Hopped => rng.random_range(0..posteriors.len()),
        };
        let (tm, tv) = posteriors[teacher];
        let hypothesis = tm + tv.sqrt() * standard_normal(&mut rng);
        let mf = m as f64;
        let data_sum =
            mf * hypothesis + (mf * cfg.sigma_sq).sqrt() * standard_normal(&mut rng);
        let tau = cfg.tau_bar() + mf * cfg.tau();
        let mu = (cfg.tau_bar() * cfg.mu_bar + cfg.tau() * data_sum) / tau;
        out.push(mu);
        posteriors.push((mu, 1.0 / tau));
        if mode == McMode::Chained {
            // Only the most recent posterior is ever read again.
            posteriors.drain(..posteriors.len() - 1);
        }
    }
    Ok(out)
}

/// Monte Carlo estimate of the per-session posterior-mean distribution.
/// Deterministic in `(seed, replicate)`; `threads <= 1` runs serially.
pub fn simulate_gaussian_mc(
    cfg: &GaussianConfig,
    schedule: &Schedule,
    t_max: u64,
    mode: McMode,
    replicates: u64,
    seed: u64,
    threads: usize,
) -> Result<McTrack, GaussianError> {
    cfg.validate()?;
    if replicates == 0 {
        return Err(GaussianError::InvalidConfig {
            name: "replicates",
            reason: "need at least one replicate".into(),
        });
    }
    let stream = match mode {
        McMode::Chained => "gaussian-chained",
        McMode::Hopped => "gaussian-hopped",
    };
    let runs = map_replicates(replicates, threads, |r| {
        simulate_replicate(cfg, schedule, t_max, mode, derive_seed(seed, r, stream))
    });
    let mut trajectories = Vec::with_capacity(runs.len());
    for run in runs {
        trajectories.push(run?);
    }
    let rf = replicates as f64;
    let mut steps = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        let idx = (t - 1) as usize;
        let values = trajectories.iter().map(|tr| tr[idx]);
        let mean: f64 = values.clone().sum::<f64>() / rf;
        let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
        let emp_var = if replicates > 1 { ss / (rf - 1.0) } else { 0.0 };
        steps.push(McStep {
            t,
            m: schedule.eval(t)?,
            emp_mean: mean,
            emp_var,
            stderr: (emp_var / rf).sqrt(),
        });
    }
    Ok(McTrack { steps, replicates })
}
