//! Monte Carlo agent chains.
//!
//! One replicate plays the learning process faithfully: sample a hypothesis
//! from the current posterior, draw the session's sentences from its
//! language, Bayes-update the shared prior, repeat. Sentence draws are
//! realized as multinomial counts (the posterior depends on nothing else).

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DiscreteError, DiscreteModel};
use crate::metrics::ProbVector;
use crate::sampling::{multinomial_counts, sample_categorical};
use crate::schedules::Schedule;

/// Where the chain starts: a single hypothesis, or a mixture over them.
///
/// With a mixed start only coarse-grained cluster mass is worth tracking —
/// the chain cannot preserve the mixture's weights, only the mass it puts on
/// a separated cluster.
#[derive(Debug, Clone)]
pub enum ChainInit {
    Pure(usize),
    Mixed(ProbVector),
}

/// What posterior mass each trajectory step records.
#[derive(Debug, Clone)]
pub enum TrackTarget {
    Hypothesis(usize),
    Set(BTreeSet<usize>),
}

impl TrackTarget {
    fn mass(&self, posterior: &ProbVector) -> f64 {
        match self {
            TrackTarget::Hypothesis(i) => posterior.get(*i),
            TrackTarget::Set(set) => set.iter().map(|&i| posterior.get(i)).sum(),
        }
    }

    fn validate(&self, n: usize) -> Result<(), DiscreteError> {
        let check = |&index: &usize| {
            if index >= n {
                Err(DiscreteError::HypothesisIndex { index, n })
            } else {
                Ok(())
            }
        };
        match self {
            TrackTarget::Hypothesis(i) => check(i),
            TrackTarget::Set(set) => {
                if set.is_empty() {
                    return Err(DiscreteError::Shape("tracked set is empty".into()));
                }
                set.iter().try_for_each(check)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    /// Session index, starting at 1.
    pub t: u64,
    /// Session length.
    pub m: u64,
    /// Posterior mass on the tracked target after this session.
    pub mass_on_target: f64,
    /// The hypothesis the learner sampled from its teacher's posterior.
    pub sampled: usize,
}

/// One replicate of the agent chain.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub seed: u64,
    pub steps: Vec<TrajectoryStep>,
    /// Full per-step posteriors, when requested (small `n` only — this is
    /// `t_max * n` floats).
    pub posteriors: Option<Vec<ProbVector>>,
}

impl DiscreteModel {
    /// Simulates one agent chain for `t_max` sessions, deterministically in
    /// `seed`.
    pub fn simulate_chain_mc(
        &self,
        schedule: &Schedule,
        t_max: u64,
        init: &ChainInit,
        track: &TrackTarget,
        keep_posteriors: bool,
        seed: u64,
    ) -> Result<Trajectory, DiscreteError> {
        let n = self.hypothesis_count();
        track.validate(n)?;
        let mut current = match init {
            ChainInit::Pure(index) => {
                if *index >= n {
                    return Err(DiscreteError::HypothesisIndex { index: *index, n });
                }
                ProbVector::unit(n, *index)
            }
            ChainInit::Mixed(dist) => {
                if dist.len() != n {
                    return Err(DiscreteError::Shape(format!(
                        "mixed start has {} weights for {} hypotheses",
                        dist.len(),
                        n
                    )));
                }
                dist.clone()
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut steps = Vec::with_capacity(t_max as usize);
        let mut posteriors = keep_posteriors.then(|| Vec::with_capacity(t_max as usize));
        for t in 1..=t_max {
            let m = schedule.eval(t)?;
            let sampled = sample_categorical(&mut rng, current.weights());
            let counts = multinomial_counts(&mut rng, self.column(sampled).weights(), m);
            let posterior = self.bayes_update_counts(&counts)?;
            steps.push(TrajectoryStep {
                t,
                m,
                mass_on_target: track.mass(&posterior),
                sampled,
            });
            if let Some(ref mut kept) = posteriors {
                kept.push(posterior.clone());
            }
            current = posterior;
        }
        Ok(Trajectory {
            seed,
            steps,
            posteriors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{overlap_model, pv};
    use super::*;
    use crate::schedules::ScheduleKind;

    #[test]
    fn deterministic_in_the_seed() {
        let model = overlap_model();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 3 });
        let run = |seed| {
            model
                .simulate_chain_mc(
                    &schedule,
                    20,
                    &ChainInit::Pure(0),
                    &TrackTarget::Hypothesis(0),
                    false,
                    seed,
                )
                .unwrap()
        };
        let a = run(11);
        let b = run(11);
        let c = run(12);
        assert_eq!(a.steps, b.steps);
        assert_ne!(a.steps, c.steps);
    }

    #[test]
    fn disjoint_supports_lock_the_sampled_hypothesis() {
        let model = DiscreteModel::from_columns(
            vec![pv(&[1.0, 0.0]), pv(&[0.0, 1.0])],
            ProbVector::uniform(2),
        )
        .unwrap();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 2 });
        let traj = model
            .simulate_chain_mc(
                &schedule,
                50,
                &ChainInit::Pure(1),
                &TrackTarget::Hypothesis(1),
                false,
                99,
            )
            .unwrap();
        for step in &traj.steps {
            assert_eq!(step.sampled, 1);
            assert_eq!(step.mass_on_target, 1.0);
        }
    }

    #[test]
    fn mixed_start_tracks_cluster_mass() {
        let model = overlap_model();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 1 });
        let traj = model
            .simulate_chain_mc(
                &schedule,
                10,
                &ChainInit::Mixed(pv(&[0.5, 0.5])),
                &TrackTarget::Set(BTreeSet::from([0, 1])),
                true,
                5,
            )
            .unwrap();
        // The tracked set is everything, so its mass is identically 1.
        for step in &traj.steps {
            assert!((step.mass_on_target - 1.0).abs() < 1e-12);
        }
        assert_eq!(traj.posteriors.unwrap().len(), 10);
    }

    #[test]
    fn trajectory_invariants() {
        let model = overlap_model();
        let schedule = Schedule::new(ScheduleKind::Theorem1 {
            d1_sq: model.min_distance(0).powi(2),
            n: 2,
            eps: 0.1,
            p1: 0.5,
        });
        let traj = model
            .simulate_chain_mc(
                &schedule,
                30,
                &ChainInit::Pure(0),
                &TrackTarget::Hypothesis(0),
                false,
                7,
            )
            .unwrap();
        let mut prev_t = 0;
        for step in &traj.steps {
            assert_eq!(step.t, prev_t + 1);
            prev_t = step.t;
            assert!((0.0..=1.0).contains(&step.mass_on_target));
            assert!(step.m >= 1);
        }
    }

    #[test]
    fn sampled_frequencies_converge_to_prior_when_data_is_uninformative() {
        let model = DiscreteModel::from_columns_relaxed(
            vec![pv(&[0.4, 0.6]), pv(&[0.4, 0.6])],
            pv(&[0.3, 0.7]),
        )
        .unwrap();
        let schedule = Schedule::new(ScheduleKind::Constant { m: 2 });
        // After the first update the posterior equals the prior at every
        // step, so sampled hypotheses are iid prior draws from t = 2 on.
        let traj = model
            .simulate_chain_mc(
                &schedule,
                20_000,
                &ChainInit::Pure(0),
                &TrackTarget::Hypothesis(0),
                false,
                123,
            )
            .unwrap();
        let draws = &traj.steps[1..];
        let freq = draws.iter().filter(|s| s.sampled == 0).count() as f64 / draws.len() as f64;
        let se = (0.3f64 * 0.7 / draws.len() as f64).sqrt();
        assert!(
            (freq - 0.3).abs() <= 3.0 * se,
            "freq {freq} outside 3 standard errors of 0.3"
        );
    }
}
