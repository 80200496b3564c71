//! Exact Bayesian inference over the finite parameter set.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BanditInstance;
use crate::numerics::csum;

/// Tolerance on `sum(probs) == 1`.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Above this many parameters the update runs in log space.
const LOG_SPACE_THRESHOLD: usize = 1000;

/// Probability vector over the parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    probs: Vec<f64>,
}

impl BeliefState {
    /// Validates and renormalizes `probs`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPmf("empty belief".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidPmf("negative or non-finite entry".into()));
        }
        let total = csum(probs.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidPmf(format!("belief sums to {total}")));
        }
        Ok(Self::normalized(probs, total))
    }

    /// Renormalizes any non-negative weight vector with positive mass.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidPmf("negative or non-finite weight".into()));
        }
        let total = csum(weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::InvalidPmf("weights have no mass".into()));
        }
        Ok(Self::normalized(weights, total))
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn point_mass(m: usize, i: usize) -> Self {
        let mut probs = vec![0.0; m];
        probs[i] = 1.0;
        Self { probs }
    }

    fn normalized(mut probs: Vec<f64>, total: f64) -> Self {
        for p in &mut probs {
            *p /= total;
        }
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    fn check_instance(&self, instance: &BanditInstance) -> Result<()> {
        if self.len() != instance.num_params() {
            return Err(Error::InvalidInput(format!(
                "belief has {} entries, instance has {} parameters",
                self.len(),
                instance.num_params()
            )));
        }
        Ok(())
    }
}

/// One period of a Thompson-sampling history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub param: usize,
    pub action: usize,
    pub outcome: f64,
}

/// Ordered record of sampled parameters, played actions and outcomes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub steps: Vec<Step>,
}

impl History {
    pub fn push(&mut self, step: Step) {
        self.steps.push(step);
    }

    /// Writes one JSON object per step.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut steps = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            steps.push(serde_json::from_str(&line)?);
        }
        Ok(Self { steps })
    }

    /// Checks that every outcome is in the alphabet of its action.
    pub fn validate(&self, instance: &BanditInstance) -> Result<()> {
        for (t, s) in self.steps.iter().enumerate() {
            if s.action >= instance.num_actions() || s.param >= instance.num_params() {
                return Err(Error::InvalidInput(format!("step {t} has out-of-range index")));
            }
            if instance.outcome_table(s.action).index_of(s.outcome).is_none() {
                return Err(Error::InvalidInput(format!(
                    "step {t}: outcome {} not in alphabet of action {}",
                    s.outcome, s.action
                )));
            }
        }
        Ok(())
    }

    /// Posterior after replaying every step from `prior`.
    pub fn posterior(&self, instance: &BanditInstance, prior: &BeliefState) -> Result<BeliefState> {
        self.steps.iter().try_fold(prior.clone(), |b, s| {
            posterior_update(&b, instance, s.action, s.outcome)
        })
    }
}

/// Bayes rule for observing `outcome` after playing `action_idx`.
pub fn posterior_update(
    belief: &BeliefState,
    instance: &BanditInstance,
    action_idx: usize,
    outcome: f64,
) -> Result<BeliefState> {
    belief.check_instance(instance)?;
    if action_idx >= instance.num_actions() {
        return Err(Error::IndexOutOfRange {
            index: action_idx,
            len: instance.num_actions(),
        });
    }
    let table = instance.outcome_table(action_idx);
    let y = table.index_of(outcome).ok_or(Error::AllZeroLikelihood)?;
    posterior_update_indexed(belief, instance, action_idx, y)
}

/// [`posterior_update`] with the outcome given by its alphabet position.
pub fn posterior_update_indexed(
    belief: &BeliefState,
    instance: &BanditInstance,
    action_idx: usize,
    outcome_idx: usize,
) -> Result<BeliefState> {
    let table = instance.outcome_table(action_idx);
    let m = belief.len();
    let weights: Vec<f64> = if m > LOG_SPACE_THRESHOLD {
        let logs: Vec<f64> = (0..m)
            .map(|i| belief.probs[i].ln() + table.row(i)[outcome_idx].ln())
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(Error::AllZeroLikelihood);
        }
        logs.iter().map(|l| (l - top).exp()).collect()
    } else {
        (0..m)
            .map(|i| belief.probs[i] * table.row(i)[outcome_idx])
            .collect()
    };
    let total = csum(weights.iter().copied());
    if !(total > 0.0) {
        return Err(Error::AllZeroLikelihood);
    }
    Ok(BeliefState::normalized(weights, total))
}

/// Posterior law of the optimal action: pushforward of the belief through
/// the optimal-action map.
pub fn optimal_action_distribution(belief: &BeliefState, instance: &BanditInstance) -> Vec<f64> {
    let mut out = vec![0.0; instance.num_actions()];
    for (i, &p) in belief.probs.iter().enumerate() {
        out[instance.alpha(i)] += p;
    }
    out
}

/// Inverse-CDF draw over a fixed ordering of `weights` (which sum to ~1).
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Draws a parameter index from the belief.
pub fn sample_parameter<R: Rng + ?Sized>(belief: &BeliefState, rng: &mut R) -> usize {
    sample_index(&belief.probs, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_instance, OutcomeModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two parameters with P(y = 1) = 0.8 and 0.2 for the single action.
    fn two_param_logistic() -> BanditInstance {
        let beta = (4.0f64).ln(); // sigmoid(ln 4) = 0.8
        BanditInstance::from_vectors(
            vec![vec![1.0]],
            vec![vec![1.0], vec![-1.0]],
            OutcomeModel::Logistic { beta },
        )
        .unwrap()
    }

    #[test]
    fn bayes_rule_by_hand() {
        let inst = two_param_logistic();
        let post = posterior_update(&BeliefState::uniform(2), &inst, 0, 1.0).unwrap();
        assert!((post.probs()[0] - 0.8).abs() < 1e-12);
        assert!((post.probs()[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_updates() {
        let inst = two_param_logistic();
        let pm = BeliefState::point_mass(2, 1);
        assert_eq!(posterior_update(&pm, &inst, 0, 0.0).unwrap(), pm);

        // theta = 0 gives identical likelihoods for every parameter
        let flat = BanditInstance::from_vectors(
            vec![vec![0.0, 1.0]],
            vec![vec![0.5, 0.0], vec![-0.3, 0.0]],
            OutcomeModel::LinearBinary,
        )
        .unwrap();
        let b = BeliefState::new(vec![0.3, 0.7]).unwrap();
        let post = posterior_update(&b, &flat, 0, 0.5).unwrap();
        for (x, y) in post.probs().iter().zip(b.probs()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn impossible_outcome_is_rejected() {
        // a.theta = 1 for both parameters, so -1/2 has zero likelihood
        let inst = BanditInstance::from_vectors(
            vec![vec![1.0]],
            vec![vec![1.0], vec![1.0]],
            OutcomeModel::LinearBinary,
        )
        .unwrap();
        let r = posterior_update(&BeliefState::uniform(2), &inst, 0, -0.5);
        assert!(matches!(r, Err(Error::AllZeroLikelihood)));
        let r = posterior_update(&BeliefState::uniform(2), &inst, 0, 0.25);
        assert!(matches!(r, Err(Error::AllZeroLikelihood)));
    }

    #[test]
    fn log_space_path_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = sample_instance(&mut rng, 2, 3, 1500, OutcomeModel::Logistic { beta: 2.0 }).unwrap();
        let b = BeliefState::uniform(1500);
        let post = posterior_update(&b, &inst, 1, 1.0).unwrap();
        let direct: Vec<f64> = (0..1500).map(|i| inst.outcome_table(1).row(i)[1]).collect();
        let z: f64 = direct.iter().sum();
        for (p, w) in post.probs().iter().zip(&direct) {
            assert!((p - w / z).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_action_pushforward() {
        let inst = BanditInstance::from_vectors(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            OutcomeModel::LinearBinary,
        )
        .unwrap();
        assert_eq!(
            optimal_action_distribution(&BeliefState::uniform(2), &inst),
            vec![0.5, 0.5]
        );

        let same = BanditInstance::from_vectors(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.9, 0.1]],
            OutcomeModel::LinearBinary,
        )
        .unwrap();
        assert_eq!(
            optimal_action_distribution(&BeliefState::uniform(2), &same),
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn optimal_action_matches_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = sample_instance(&mut rng, 3, 5, 10, OutcomeModel::LinearBinary).unwrap();
        let w: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let b = BeliefState::from_weights(w).unwrap();
        let got = optimal_action_distribution(&b, &inst);
        for a in 0..5 {
            let mut expect = 0.0;
            for i in 0..10 {
                let row: Vec<f64> = (0..5).map(|j| inst.mean_reward(j, i).unwrap()).collect();
                let best = (0..5).fold(0, |acc, j| if row[j] > row[acc] { j } else { acc });
                if best == a {
                    expect += b.probs()[i];
                }
            }
            assert!((got[a] - expect).abs() < 1e-14);
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_frequencies_and_determinism() {
        let pm = BeliefState::point_mass(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| sample_parameter(&pm, &mut rng) == 2));

        let b = BeliefState::uniform(4);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_parameter(&b, &mut rng)] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.25).abs() < 3.0 * sigma, "{counts:?}");
        }

        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample_parameter(&b, &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn history_jsonl_round_trip() {
        let inst = two_param_logistic();
        let mut h = History::default();
        h.push(Step {
            param: 0,
            action: 0,
            outcome: 1.0,
        });
        h.push(Step {
            param: 1,
            action: 0,
            outcome: 0.0,
        });
        h.validate(&inst).unwrap();
        let mut buf = Vec::new();
        h.write_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 2);
        let back = History::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, h);
        let post = back.posterior(&inst, &BeliefState::uniform(2)).unwrap();
        assert!((post.probs()[0] - 0.5).abs() < 1e-12);
    }
}
