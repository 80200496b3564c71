//! Brute-force reference computations shared by the integration tests.
//! Everything here enumerates full joint distributions and deliberately
//! avoids the library's decompositions.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use tsrd::compression::Representation;
use tsrd::inference::BeliefState;
use tsrd::model::{sample_instance, BanditInstance, OutcomeModel};

pub fn entropy(p: impl IntoIterator<Item = f64>) -> f64 {
    -p.into_iter()
        .filter(|&x| x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

/// `H(X) + H(Z) - H(X, Z)` from a joint table keyed by `(x, z)`.
pub fn mutual_information<X: Ord + Clone, Z: Ord + Clone>(joint: &BTreeMap<(X, Z), f64>) -> f64 {
    let mut px: BTreeMap<X, f64> = BTreeMap::new();
    let mut pz: BTreeMap<Z, f64> = BTreeMap::new();
    for ((x, z), &p) in joint {
        *px.entry(x.clone()).or_default() += p;
        *pz.entry(z.clone()).or_default() += p;
    }
    entropy(px.into_values()) + entropy(pz.into_values()) - entropy(joint.values().copied())
}

pub fn outcome_prob(inst: &BanditInstance, action: usize, param: usize, y: usize) -> f64 {
    inst.outcome_table(action).row(param)[y]
}

/// `(numerator, denominator)` of the Thompson-sampling information ratio by
/// enumerating `(theta*, theta_t, Y)`.
pub fn ts_ratio(inst: &BanditInstance, belief: &BeliefState) -> (f64, f64) {
    let p = belief.probs();
    let m = inst.num_params();
    let mut joint = BTreeMap::new();
    let mut optimal = 0.0;
    let mut played = 0.0;
    for j in 0..m {
        optimal += p[j] * inst.mu(inst.alpha(j), j);
        for i in 0..m {
            let a = inst.alpha(i);
            played += p[j] * p[i] * inst.mu(a, j);
            for y in 0..inst.outcome_table(a).num_outcomes() {
                let w = p[j] * p[i] * outcome_prob(inst, a, j, y);
                if w > 0.0 {
                    *joint.entry((j, (i, y))).or_insert(0.0) += w;
                }
            }
        }
    }
    let gap = optimal - played;
    (gap * gap, mutual_information(&joint))
}

/// Law of the compressed benchmark given the true parameter.
fn benchmark_given_truth(_belief: &BeliefState, rep: &Representation, truth: usize) -> Vec<(usize, f64)> {
    let k = rep.partition().cell_of()[truth];
    let c = rep.cells()[k];
    if c.idx1 == c.idx2 {
        vec![(c.idx1, 1.0)]
    } else {
        vec![(c.idx1, c.r), (c.idx2, 1.0 - c.r)]
    }
}

/// `(numerator, denominator)` for compressed Thompson sampling by
/// enumerating `(theta*, benchmark, sample, Y)`.
pub fn compressed_ratio(inst: &BanditInstance, belief: &BeliefState, rep: &Representation) -> (f64, f64) {
    let p = belief.probs();
    let m = inst.num_params();
    // the sample is an independent copy of the benchmark
    let marginal = compressed_sample_law(belief, rep);
    let mut joint = BTreeMap::new();
    let mut bench_reward = 0.0;
    let mut sample_reward = 0.0;
    for j in 0..m {
        if p[j] == 0.0 {
            continue;
        }
        for (u, wu) in benchmark_given_truth(belief, rep, j) {
            bench_reward += p[j] * wu * inst.mu(inst.alpha(u), j);
            for (s, &ws) in marginal.iter().enumerate() {
                if ws == 0.0 {
                    continue;
                }
                let a = inst.alpha(s);
                sample_reward += p[j] * wu * ws * inst.mu(a, j);
                for y in 0..inst.outcome_table(a).num_outcomes() {
                    let w = p[j] * wu * ws * outcome_prob(inst, a, j, y);
                    if w > 0.0 {
                        *joint.entry((u, (s, y))).or_insert(0.0) += w;
                    }
                }
            }
        }
    }
    let gap = bench_reward - sample_reward;
    (gap * gap, mutual_information(&joint))
}

/// `E[mu(alpha(theta*), theta*)] - E[mu(alpha(theta_t), theta*)]` for
/// Thompson sampling.
pub fn ts_regret(inst: &BanditInstance, belief: &BeliefState) -> f64 {
    let p = belief.probs();
    let m = inst.num_params();
    let mut r = 0.0;
    for j in 0..m {
        for i in 0..m {
            r += p[j] * p[i] * (inst.mu(inst.alpha(j), j) - inst.mu(inst.alpha(i), j));
        }
    }
    r
}

/// `E[mu(alpha(benchmark), theta*)] - E[mu(alpha(sample), theta*)]`.
pub fn compressed_regret(inst: &BanditInstance, belief: &BeliefState, rep: &Representation) -> f64 {
    let p = belief.probs();
    let marginal = compressed_sample_law(belief, rep);
    let mut gap = 0.0;
    for j in 0..p.len() {
        for (u, wu) in benchmark_given_truth(belief, rep, j) {
            for (s, &ws) in marginal.iter().enumerate() {
                gap += p[j] * wu * ws * (inst.mu(inst.alpha(u), j) - inst.mu(inst.alpha(s), j));
            }
        }
    }
    gap
}

/// `I(psi; (sample, Y))` where the sample has law `sample_law` independent
/// of `theta*`, and `psi` is the cell of `theta*`.
pub fn info_about_cells(
    inst: &BanditInstance,
    belief: &BeliefState,
    cell_of: &[usize],
    sample_law: &[f64],
) -> f64 {
    let p = belief.probs();
    let mut joint = BTreeMap::new();
    for (j, &pj) in p.iter().enumerate() {
        for (s, &ws) in sample_law.iter().enumerate() {
            let a = inst.alpha(s);
            for y in 0..inst.outcome_table(a).num_outcomes() {
                let w = pj * ws * outcome_prob(inst, a, j, y);
                if w > 0.0 {
                    *joint.entry((cell_of[j], (s, y))).or_insert(0.0) += w;
                }
            }
        }
    }
    mutual_information(&joint)
}

/// Marginal law of the compressed sample.
pub fn compressed_sample_law(belief: &BeliefState, rep: &Representation) -> Vec<f64> {
    let p = belief.probs();
    let mut law = vec![0.0; p.len()];
    for j in 0..p.len() {
        for (u, w) in benchmark_given_truth(belief, rep, j) {
            law[u] += p[j] * w;
        }
    }
    law
}

/// Plain Bayes update.
pub fn bayes(inst: &BanditInstance, belief: &[f64], action: usize, y: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..belief.len())
        .map(|i| belief[i] * outcome_prob(inst, action, i, y))
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Exact Bayesian regret of Thompson sampling over `horizon` periods by
/// recursion over every reachable posterior.
pub fn exact_ts_regret(inst: &BanditInstance, belief: &[f64], horizon: usize) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    let m = belief.len();
    let mut total = 0.0;
    let mut pa = vec![0.0; inst.num_actions()];
    for i in 0..m {
        pa[inst.alpha(i)] += belief[i];
    }
    for (a, &w) in pa.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let regret: f64 = (0..m)
            .map(|j| belief[j] * (inst.mu(inst.alpha(j), j) - inst.mu(a, j)))
            .sum();
        total += w * regret;
        for y in 0..inst.outcome_table(a).num_outcomes() {
            let py: f64 = (0..m).map(|j| belief[j] * outcome_prob(inst, a, j, y)).sum();
            if py > 0.0 {
                total += w * py * exact_ts_regret(inst, &bayes(inst, belief, a, y), horizon - 1);
            }
        }
    }
    total
}

pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, m: usize) -> BeliefState {
    let w: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    BeliefState::from_weights(w).unwrap()
}

pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    n: usize,
    m: usize,
    model: OutcomeModel,
) -> BanditInstance {
    sample_instance(rng, d, n, m, model).unwrap()
}

/// Random logistic instance whose parameters all clear the margin `delta`:
/// parameters are redrawn until `|alpha(theta) . theta| >= delta`, and the
/// action set is redrawn if that keeps failing.
pub fn margin_instance<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    n: usize,
    m: usize,
    beta: f64,
    delta: f64,
) -> BanditInstance {
    'actions: loop {
        let actions: Vec<Vec<f64>> = (0..n).map(|_| tsrd::model::sample_unit_ball(rng, d)).collect();
        let mut params = Vec::with_capacity(m);
        let mut misses = 0;
        while params.len() < m {
            let theta = tsrd::model::sample_unit_ball(rng, d);
            let best = actions
                .iter()
                .map(|a| a.iter().zip(&theta).map(|(x, y)| x * y).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            if best.abs() >= delta + 1e-9 {
                params.push(theta);
            } else {
                misses += 1;
                if misses > 1000 {
                    continue 'actions;
                }
            }
        }
        return BanditInstance::from_vectors(actions, params, OutcomeModel::Logistic { beta }).unwrap();
    }
}
