//! Iterated Bayesian learning in three settings, with the machinery needed to
//! verify when it sustains itself.
//!
//! A chain of learners is *iterated learning*: learner `t` samples a
//! hypothesis from the posterior of learner `t-1`, draws a training session of
//! `m_t` observations from that hypothesis, and Bayes-updates the shared
//! prior. With constant session lengths every such chain forgets its starting
//! point and drifts to the prior; with session lengths that grow on the right
//! schedule, the starting hypothesis is retained indefinitely.
//!
//! The crate is organized by setting:
//!
//! - [`metrics`]: probability vectors on a finite domain and the root-sine
//!   distance (with Hellinger, Bhattacharyya, total-variation and Euclidean
//!   companions) that controls discrete transition decay.
//! - [`schedules`]: the session-length sequences `t -> m_t` that make each
//!   setting self-sustaining, plus the constant baseline.
//! - [`discrete`]: finite hypothesis spaces — exact per-session transition
//!   matrices, chain products, Monte Carlo agent chains, cluster
//!   (coarse-grained) retention, and the pattern-language model.
//! - [`gaussian`]: 1-D conjugate Gaussian learners, chained and hopped, with
//!   exact moment recursions and Monte Carlo simulation.
//! - [`linreg`]: iterated Bayesian linear regression with its spectral
//!   bookkeeping and smallest-singular-value tail checks.
//!
//! Randomized routines take an explicit 64-bit seed and derive independent
//! per-replicate streams through [`seed::derive_seed`], so results are
//! reproducible and independent of thread scheduling.

pub mod discrete;
pub mod exec;
pub mod gaussian;
pub mod linreg;
pub mod metrics;
pub mod sampling;
pub mod schedules;
pub mod seed;

mod numeric;
