//! Training-session length schedules `t -> m_t`.
//!
//! Each non-constant kind evaluates the closed-form sequence that makes the
//! corresponding learning process self-sustaining, taking the ceiling of the
//! real-valued formula (session lengths are integers, and the sustainability
//! inequalities only improve with larger `m_t`):
//!
//! - `theorem1`: `(4 / d1^2) * ln(n t / (eps p1))` — discrete, exact target
//!   retention with probability `1 - eps`.
//! - `theorem2`: `(1 / rho^2) * ln(n (1 - p_A) t^4 / (eps^2 p_A))` with
//!   `rho = delta / (n sqrt(2 s))` — discrete, retention of a `delta`-cluster.
//! - `theorem3-chained`: `(|mu0 - mu_bar| / eps) (1 + 1/c) (sigma/sigma_bar)^2 t^(1+c)`.
//! - `theorem4-hopped`: `B_c (|mu0 - mu_bar| / eps) (sigma/sigma_bar)^2 (1 + ln t)^(1+c)`.
//! - `theorem5-linreg`: `D_c (||mu0 - mu_bar|| / delta) (sigma/sigma_bar)^2 t^(1+c)
//!   + D_c d ln((t+1)/eps)`.
//!
//! The constants `B_c` and `D_c` are only known to exist; the defaults
//! [`default_b_c`] and [`default_d_c`] are empirical and can be overridden.
//! Logarithms are natural throughout — a base change is absorbed by the
//! constants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default hard cap on any evaluated `m_t`; protects enumeration and Monte
/// Carlo budgets downstream.
pub const DEFAULT_MAX_SESSION: u64 = 1_000_000;

/// Default `B_c` for the hopped schedule: `8 (1 + 1/c)`.
pub fn default_b_c(c: f64) -> f64 {
    8.0 * (1.0 + 1.0 / c)
}

/// Default `D_c` for the regression schedule: `16 (1 + 1/c)`.
pub fn default_d_c(c: f64) -> f64 {
    16.0 * (1.0 + 1.0 / c)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("invalid schedule parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("session length {value:.6e} at t={t} exceeds the cap {max_m}")]
    SessionCapExceeded { t: u64, value: f64, max_m: u64 },
    #[error("custom table has {len} entries; m_{t} is not defined")]
    TableExhausted { t: u64, len: usize },
    #[error("schedule is only defined for t >= 1")]
    ZeroSession,
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ScheduleError {
    ScheduleError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// The schedule formulas and their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// The classical baseline: every session has the same length.
    Constant { m: u64 },
    /// Exact retention of the target hypothesis in a finite space; `d1_sq`
    /// is the squared root-sine distance from the target to its nearest
    /// neighbour, `p1` its prior weight.
    Theorem1 {
        d1_sq: f64,
        n: usize,
        eps: f64,
        p1: f64,
    },
    /// Coarse-grained retention of a cluster around the target. `rho`
    /// defaults to `delta / (n sqrt(2 s))`; `p_a` is the smallest prior
    /// weight inside the cluster.
    Theorem2 {
        s: usize,
        n: usize,
        delta: f64,
        eps: f64,
        p_a: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
    },
    /// Chained 1-D Gaussian learning, polynomially growing sessions.
    Theorem3Chained {
        mu_gap: f64,
        eps: f64,
        sigma: f64,
        sigma_bar: f64,
        c: f64,
    },
    /// Hopped 1-D Gaussian learning, polylogarithmic sessions. Requires
    /// `eps < mu_gap`.
    Theorem4Hopped {
        mu_gap: f64,
        eps: f64,
        sigma: f64,
        sigma_bar: f64,
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b_c: Option<f64>,
    },
    /// Iterated Bayesian linear regression in dimension `d`.
    Theorem5Linreg {
        mu_gap: f64,
        delta: f64,
        sigma: f64,
        sigma_bar: f64,
        c: f64,
        d: usize,
        eps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d_c: Option<f64>,
    },
    /// An explicit table of session lengths, `table[t-1] = m_t`.
    CustomTable { table: Vec<u64> },
}

/// A session-length schedule: a [`ScheduleKind`] plus the evaluation cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(flatten)]
    kind: ScheduleKind,
    #[serde(default = "default_cap")]
    max_m: u64,
}

fn default_cap() -> u64 {
    DEFAULT_MAX_SESSION
}

impl Schedule {
    pub fn new(kind: ScheduleKind) -> Self {
        Self {
            kind,
            max_m: DEFAULT_MAX_SESSION,
        }
    }

    /// Same schedule with a different evaluation cap (analytic recursions can
    /// afford far larger sessions than enumeration or sampling).
    pub fn with_cap(kind: ScheduleKind, max_m: u64) -> Self {
        Self { kind, max_m }
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn max_m(&self) -> u64 {
        self.max_m
    }

    /// The cluster radius `rho` of a theorem2 schedule (explicit or derived).
    pub fn rho(&self) -> Option<f64> {
        match &self.kind {
            ScheduleKind::Theorem2 {
                s, n, delta, rho, ..
            } => Some(rho.unwrap_or(delta / (*n as f64 * (2.0 * *s as f64).sqrt()))),
            _ => None,
        }
    }

    /// Checks every parameter precondition, naming the violated one.
    pub fn validate(&self) -> Result<(), ScheduleError> {
        let pos = |name: &'static str, v: f64| -> Result<(), ScheduleError> {
            if !v.is_finite() || v <= 0.0 {
                Err(invalid(name, format!("must be positive and finite, got {v}")))
            } else {
                Ok(())
            }
        };
        let unit_open = |name: &'static str, v: f64| -> Result<(), ScheduleError> {
            if !v.is_finite() || v <= 0.0 || v >= 1.0 {
                Err(invalid(name, format!("must lie strictly in (0, 1), got {v}")))
            } else {
                Ok(())
            }
        };
        match &self.kind {
            ScheduleKind::Constant { m } => {
                if *m == 0 {
                    return Err(invalid("m", "constant session length must be >= 1"));
                }
            }
            ScheduleKind::Theorem1 { d1_sq, n, eps, p1 } => {
                pos("d1_sq", *d1_sq)?;
                if *n == 0 {
                    return Err(invalid("n", "hypothesis count must be >= 1"));
                }
                unit_open("eps", *eps)?;
                unit_open("p1", *p1)?;
            }
            ScheduleKind::Theorem2 {
                s,
                n,
                delta,
                eps,
                p_a,
                rho,
            } => {
                if *s == 0 {
                    return Err(invalid("s", "sentence count must be >= 1"));
                }
                if *n == 0 {
                    return Err(invalid("n", "hypothesis count must be >= 1"));
                }
                pos("delta", *delta)?;
                unit_open("eps", *eps)?;
                unit_open("p_a", *p_a)?;
                if let Some(r) = rho {
                    pos("rho", *r)?;
                }
            }
            ScheduleKind::Theorem3Chained {
                mu_gap,
                eps,
                sigma,
                sigma_bar,
                c,
            } => {
                if !mu_gap.is_finite() || *mu_gap < 0.0 {
                    return Err(invalid("mu_gap", "must be non-negative and finite"));
                }
                unit_open("eps", *eps)?;
                pos("sigma", *sigma)?;
                pos("sigma_bar", *sigma_bar)?;
                pos("c", *c)?;
            }
            ScheduleKind::Theorem4Hopped {
                mu_gap,
                eps,
                sigma,
                sigma_bar,
                c,
                b_c,
            } => {
                pos("mu_gap", *mu_gap)?;
                pos("eps", *eps)?;
                if *eps >= *mu_gap {
                    return Err(invalid(
                        "eps",
                        format!("must be smaller than mu_gap ({mu_gap}), got {eps}"),
                    ));
                }
                pos("sigma", *sigma)?;
                pos("sigma_bar", *sigma_bar)?;
                pos("c", *c)?;
                if let Some(b) = b_c {
                    pos("b_c", *b)?;
                }
            }
            ScheduleKind::Theorem5Linreg {
                mu_gap,
                delta,
                sigma,
                sigma_bar,
                c,
                d,
                eps,
                d_c,
            } => {
                if !mu_gap.is_finite() || *mu_gap < 0.0 {
                    return Err(invalid("mu_gap", "must be non-negative and finite"));
                }
                pos("delta", *delta)?;
                pos("sigma", *sigma)?;
                pos("sigma_bar", *sigma_bar)?;
                pos("c", *c)?;
                if *d == 0 {
                    return Err(invalid("d", "dimension must be >= 1"));
                }
                unit_open("eps", *eps)?;
                if let Some(dc) = d_c {
                    pos("d_c", *dc)?;
                }
            }
            ScheduleKind::CustomTable { table } => {
                if table.is_empty() {
                    return Err(invalid("table", "must contain at least one entry"));
                }
                if table.iter().any(|&m| m == 0) {
                    return Err(invalid("table", "every entry must be >= 1"));
                }
                if table.windows(2).any(|w| w[1] < w[0]) {
                    return Err(invalid("table", "entries must be nondecreasing"));
                }
                if let Some(&m) = table.iter().find(|&&m| m > self.max_m) {
                    return Err(invalid(
                        "table",
                        format!("entry {m} exceeds the cap {}", self.max_m),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The real-valued formula before the ceiling is taken.
    pub fn eval_raw(&self, t: u64) -> Result<f64, ScheduleError> {
        if t == 0 {
            return Err(ScheduleError::ZeroSession);
        }
        self.validate()?;
        let tf = t as f64;
        Ok(match &self.kind {
            ScheduleKind::Constant { m } => *m as f64,
            ScheduleKind::Theorem1 { d1_sq, n, eps, p1 } => {
                (4.0 / d1_sq) * (*n as f64 * tf / (eps * p1)).ln()
            }
            ScheduleKind::Theorem2 {
                n, eps, p_a, ..
            } => {
                let rho = self.rho().expect("theorem2 has a rho");
                (1.0 / (rho * rho))
                    * (*n as f64 * (1.0 - p_a) * tf.powi(4) / (eps * eps * p_a)).ln()
            }
            ScheduleKind::Theorem3Chained {
                mu_gap,
                eps,
                sigma,
                sigma_bar,
                c,
            } => {
                (mu_gap / eps)
                    * (1.0 + 1.0 / c)
                    * (sigma / sigma_bar).powi(2)
                    * tf.powf(1.0 + c)
            }
            ScheduleKind::Theorem4Hopped {
                mu_gap,
                eps,
                sigma,
                sigma_bar,
                c,
                b_c,
            } => {
                b_c.unwrap_or_else(|| default_b_c(*c))
                    * (mu_gap / eps)
                    * (sigma / sigma_bar).powi(2)
                    * (1.0 + tf.ln()).powf(1.0 + c)
            }
            ScheduleKind::Theorem5Linreg {
                mu_gap,
                delta,
                sigma,
                sigma_bar,
                c,
                d,
                eps,
                d_c,
            } => {
                let dc = d_c.unwrap_or_else(|| default_d_c(*c));
                dc * (mu_gap / delta) * (sigma / sigma_bar).powi(2) * tf.powf(1.0 + c)
                    + dc * *d as f64 * ((tf + 1.0) / eps).ln()
            }
            ScheduleKind::CustomTable { table } => {
                let idx = usize::try_from(t - 1).expect("table index fits usize");
                *table.get(idx).ok_or(ScheduleError::TableExhausted {
                    t,
                    len: table.len(),
                })? as f64
            }
        })
    }

    /// The session length `m_t`: ceiling of the formula, at least 1, and at
    /// most the configured cap (a hard error beyond it).
    pub fn eval(&self, t: u64) -> Result<u64, ScheduleError> {
        let raw = self.eval_raw(t)?;
        if !raw.is_finite() || raw > self.max_m as f64 {
            return Err(ScheduleError::SessionCapExceeded {
                t,
                value: raw,
                max_m: self.max_m,
            });
        }
        Ok((raw.ceil() as u64).max(1))
    }
}

/// Whether `sum_{s<=t_max} exp(-d1^2 m_s / 2) < eps * sqrt(4 p1 / (n (1-p1)))`
/// — the summability condition under which the exact-retention chain stays
/// within `eps` of the target forever. Monotone in `t_max`: once false, it is
/// false for every larger horizon.
pub fn check_cond_nt(
    schedule: &Schedule,
    t_max: u64,
    d1_sq: f64,
    n: usize,
    p1: f64,
    eps: f64,
) -> Result<bool, ScheduleError> {
    if !d1_sq.is_finite() || d1_sq <= 0.0 {
        return Err(invalid("d1_sq", "must be positive and finite"));
    }
    if n == 0 {
        return Err(invalid("n", "hypothesis count must be >= 1"));
    }
    if !(0.0..1.0).contains(&p1) || p1 == 0.0 {
        return Err(invalid("p1", "must lie strictly in (0, 1)"));
    }
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(invalid("eps", "must lie strictly in (0, 1)"));
    }
    let bound = eps * (4.0 * p1 / (n as f64 * (1.0 - p1))).sqrt();
    let mut sum = 0.0;
    for t in 1..=t_max {
        let m = schedule.eval(t)? as f64;
        sum += (-0.5 * d1_sq * m).exp();
        if sum >= bound {
            return Ok(false);
        }
    }
    Ok(sum < bound)
}
