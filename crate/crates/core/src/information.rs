//! Exact entropy, KL divergence, mutual information and information ratios
//! over finite spaces. All quantities are in nats.

use serde::{Deserialize, Serialize};

use crate::compression::{Partition, Representation};
use crate::error::{Error, Result};
use crate::inference::BeliefState;
use crate::model::BanditInstance;
use crate::numerics::{csum, xlogx};

/// Below this the squared regret counts as zero.
pub const NUMERATOR_TOL: f64 = 1e-9;
/// Below this the information gain counts as zero.
pub const DENOMINATOR_TOL: f64 = 1e-12;
/// Accepted deviation of a pmf's total mass from 1.
pub const PMF_TOL: f64 = 1e-9;

/// Squared one-step regret over information gain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfoRatioReport {
    pub numerator: f64,
    /// Mutual information, nats.
    pub denominator: f64,
    pub ratio: f64,
    pub degenerate: bool,
}

impl InfoRatioReport {
    fn from_parts(numerator: f64, denominator: f64) -> Result<Self> {
        if numerator < NUMERATOR_TOL && denominator < DENOMINATOR_TOL {
            return Ok(Self {
                numerator,
                denominator,
                ratio: 0.0,
                degenerate: true,
            });
        }
        if denominator <= DENOMINATOR_TOL {
            return Err(Error::DegenerateInformation {
                numerator,
                denominator,
            });
        }
        Ok(Self {
            numerator,
            denominator,
            ratio: numerator / denominator,
            degenerate: false,
        })
    }
}

pub fn validate_pmf(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidPmf("empty".into()));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidPmf("negative or non-finite entry".into()));
    }
    let total = csum(p.iter().copied());
    if (total - 1.0).abs() > PMF_TOL {
        return Err(Error::InvalidPmf(format!("mass {total}")));
    }
    Ok(())
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> Result<f64> {
    validate_pmf(p)?;
    Ok(entropy_unchecked(p))
}

pub(crate) fn entropy_unchecked(p: &[f64]) -> f64 {
    (-csum(p.iter().map(|&x| xlogx(x)))).max(0.0)
}

/// `D(p || q)`; terms with `p_i = 0` vanish. Infinite when `p` is not
/// absolutely continuous with respect to `q`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut terms = Vec::with_capacity(p.len());
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            terms.push(pi * (pi / qi).ln());
        }
    }
    csum(terms).max(0.0)
}

/// `I(U; V)` of a joint pmf given as a matrix `joint[u][v]`.
pub fn mutual_information(joint: &[Vec<f64>]) -> Result<f64> {
    let cols = joint.first().map_or(0, Vec::len);
    if joint.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidPmf("ragged joint table".into()));
    }
    let flat: Vec<f64> = joint.iter().flatten().copied().collect();
    validate_pmf(&flat)?;
    let pu: Vec<f64> = joint.iter().map(|r| csum(r.iter().copied())).collect();
    let pv: Vec<f64> = (0..cols).map(|v| csum(joint.iter().map(|r| r[v]))).collect();
    let mut terms = Vec::with_capacity(flat.len());
    for (u, row) in joint.iter().enumerate() {
        for (v, &p) in row.iter().enumerate() {
            if p > 0.0 {
                terms.push(p * (p / (pu[u] * pv[v])).ln());
            }
        }
    }
    Ok(csum(terms).max(0.0))
}

/// `I(U; Y)` where `U` has masses `w` and `Y | U = u` has law `cond[u]`.
pub(crate) fn mixture_information(w: &[f64], cond: &[Vec<f64>]) -> f64 {
    let k = cond.first().map_or(0, Vec::len);
    let pred: Vec<f64> = (0..k)
        .map(|y| csum(w.iter().zip(cond).map(|(wu, c)| wu * c[y])))
        .collect();
    csum(
        w.iter()
            .zip(cond)
            .filter(|(&wu, _)| wu > 0.0)
            .map(|(wu, c)| wu * kl_divergence(c, &pred)),
    )
    .max(0.0)
}

/// One atom of the law of a benchmark variable: the value it takes (a
/// parameter index), its probability, and the posterior of the true
/// parameter given that value.
#[derive(Clone, Debug)]
pub struct Atom {
    pub param: usize,
    pub mass: f64,
    pub posterior: Vec<(usize, f64)>,
}

/// Joint law of the true parameter and a benchmark variable that Thompson
/// sampling (or its compressed variant) aims to learn. The sampled variable
/// is an independent copy of the benchmark.
#[derive(Clone, Debug)]
pub struct BenchmarkLaw {
    atoms: Vec<Atom>,
}

impl BenchmarkLaw {
    /// Benchmark equal to the true parameter (vanilla Thompson sampling).
    pub fn vanilla(belief: &BeliefState) -> Self {
        let atoms = belief
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| Atom {
                param: i,
                mass: p,
                posterior: vec![(i, 1.0)],
            })
            .collect();
        Self { atoms }
    }

    /// Two-point-per-cell representative law.
    pub fn compressed(belief: &BeliefState, rep: &Representation) -> Result<Self> {
        rep.check_consistent(belief)?;
        let cells = rep.partition().cells();
        let mut atoms = Vec::new();
        for (k, cell) in cells.iter().enumerate() {
            let mass = rep.cell_mass()[k];
            if mass <= 0.0 {
                continue;
            }
            let posterior: Vec<(usize, f64)> = cell
                .iter()
                .filter(|&&i| belief.probs()[i] > 0.0)
                .map(|&i| (i, belief.probs()[i] / mass))
                .collect();
            let c = rep.cells()[k];
            let mut push = |param: usize, weight: f64| {
                if weight > 0.0 {
                    atoms.push(Atom {
                        param,
                        mass: mass * weight,
                        posterior: posterior.clone(),
                    });
                }
            };
            if c.idx1 == c.idx2 {
                push(c.idx1, 1.0);
            } else {
                push(c.idx1, c.r);
                push(c.idx2, 1.0 - c.r);
            }
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `E[mu(alpha(u), theta*) | benchmark = u]` for each atom.
    fn conditional_means(&self, inst: &BanditInstance) -> Vec<f64> {
        self.atoms
            .iter()
            .map(|at| {
                let a = inst.alpha(at.param);
                csum(at.posterior.iter().map(|&(i, w)| w * inst.mu(a, i)))
            })
            .collect()
    }

    /// Expected one-step regret of the sampled copy relative to the
    /// benchmark: `E[R(alpha(benchmark)) - R(alpha(sample))]`.
    pub fn regret_gap(&self, inst: &BanditInstance, belief: &BeliefState) -> f64 {
        let cond = self.conditional_means(inst);
        let marginal = marginal_means(inst, belief);
        csum(
            self.atoms
                .iter()
                .zip(&cond)
                .map(|(at, c)| at.mass * (c - marginal[inst.alpha(at.param)])),
        )
    }

    /// `Y_a`'s law given each atom of the benchmark.
    fn outcome_laws(&self, inst: &BanditInstance, action: usize) -> Vec<Vec<f64>> {
        let table = inst.outcome_table(action);
        let k = table.num_outcomes();
        self.atoms
            .iter()
            .map(|at| {
                (0..k)
                    .map(|y| csum(at.posterior.iter().map(|&(i, w)| w * table.row(i)[y])))
                    .collect()
            })
            .collect()
    }

    /// `I(benchmark; Y_a)`.
    pub fn info_from_action(&self, inst: &BanditInstance, action: usize) -> f64 {
        let w: Vec<f64> = self.atoms.iter().map(|a| a.mass).collect();
        mixture_information(&w, &self.outcome_laws(inst, action))
    }

    /// Distribution of the action played by the sampled copy.
    pub fn action_distribution(&self, inst: &BanditInstance) -> Vec<f64> {
        let mut out = vec![0.0; inst.num_actions()];
        for at in &self.atoms {
            out[inst.alpha(at.param)] += at.mass;
        }
        out
    }

    /// `I(benchmark; (sample, Y_{alpha(sample)}))`, decomposed over the
    /// independent sample.
    pub fn info_gain(&self, inst: &BanditInstance) -> f64 {
        let pa = self.action_distribution(inst);
        csum(
            pa.iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, &p)| p * self.info_from_action(inst, a)),
        )
    }

    /// `I(psi; (sample, Y_{alpha(sample)}))`.
    pub fn info_gain_about(&self, inst: &BanditInstance, belief: &BeliefState, partition: &Partition) -> f64 {
        let pa = self.action_distribution(inst);
        csum(
            pa.iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, &p)| p * statistic_info_from_action(inst, belief, partition, a)),
        )
    }

    /// Pinsker lower bound on [`Self::info_gain`]:
    /// `2 sum_{i,j} q_i q_j (E[R_{alpha(i)} | benchmark = j] - E[R_{alpha(i)}])^2`.
    pub fn pinsker_lower_bound(&self, inst: &BanditInstance, belief: &BeliefState) -> f64 {
        let marginal = marginal_means(inst, belief);
        let mut terms = Vec::with_capacity(self.atoms.len() * self.atoms.len());
        for ai in &self.atoms {
            let a = inst.alpha(ai.param);
            for aj in &self.atoms {
                let cond = csum(aj.posterior.iter().map(|&(i, w)| w * inst.mu(a, i)));
                let diff = cond - marginal[a];
                terms.push(ai.mass * aj.mass * diff * diff);
            }
        }
        2.0 * csum(terms)
    }

    pub fn info_ratio(&self, inst: &BanditInstance, belief: &BeliefState) -> Result<InfoRatioReport> {
        let gap = self.regret_gap(inst, belief);
        InfoRatioReport::from_parts(gap * gap, self.info_gain(inst))
    }
}

/// `E_belief[mu(a, theta*)]` for every action.
pub fn marginal_means(inst: &BanditInstance, belief: &BeliefState) -> Vec<f64> {
    let p = belief.probs();
    (0..inst.num_actions())
        .map(|a| csum(p.iter().enumerate().map(|(i, &w)| w * inst.mu(a, i))))
        .collect()
}

/// Exact one-step expected regret of Thompson sampling at `belief`.
pub fn ts_one_step_regret(inst: &BanditInstance, belief: &BeliefState) -> f64 {
    BenchmarkLaw::vanilla(belief).regret_gap(inst, belief)
}

/// Information ratio of vanilla Thompson sampling at `belief`.
pub fn ts_info_ratio(inst: &BanditInstance, belief: &BeliefState) -> Result<InfoRatioReport> {
    check_belief(inst, belief)?;
    BenchmarkLaw::vanilla(belief).info_ratio(inst, belief)
}

/// Information ratio of one-step compressed Thompson sampling.
pub fn compressed_info_ratio(
    inst: &BanditInstance,
    belief: &BeliefState,
    rep: &Representation,
) -> Result<InfoRatioReport> {
    check_belief(inst, belief)?;
    BenchmarkLaw::compressed(belief, rep)?.info_ratio(inst, belief)
}

fn statistic_info_from_action(
    inst: &BanditInstance,
    belief: &BeliefState,
    partition: &Partition,
    action: usize,
) -> f64 {
    let table = inst.outcome_table(action);
    let k = table.num_outcomes();
    let cells = partition.cells();
    let mut w = Vec::with_capacity(cells.len());
    let mut cond = Vec::with_capacity(cells.len());
    for cell in &cells {
        let mass = csum(cell.iter().map(|&i| belief.probs()[i]));
        if mass <= 0.0 {
            continue;
        }
        cond.push(
            (0..k)
                .map(|y| csum(cell.iter().map(|&i| belief.probs()[i] * table.row(i)[y])) / mass)
                .collect(),
        );
        w.push(mass);
    }
    mixture_information(&w, &cond)
}

/// `I(psi; Y_a)`: information the outcome of action `a` carries about the
/// partition cell of the true parameter.
pub fn info_gain_about_statistic(
    inst: &BanditInstance,
    belief: &BeliefState,
    partition: &Partition,
    action_idx: usize,
) -> Result<f64> {
    check_belief(inst, belief)?;
    partition.check_len(inst.num_params())?;
    if action_idx >= inst.num_actions() {
        return Err(Error::IndexOutOfRange {
            index: action_idx,
            len: inst.num_actions(),
        });
    }
    Ok(statistic_info_from_action(inst, belief, partition, action_idx))
}

/// `I(psi; (theta_t, Y))` for the vanilla Thompson sample.
pub fn ts_info_gain_about_statistic(
    inst: &BanditInstance,
    belief: &BeliefState,
    partition: &Partition,
) -> f64 {
    BenchmarkLaw::vanilla(belief).info_gain_about(inst, belief, partition)
}

fn check_belief(inst: &BanditInstance, belief: &BeliefState) -> Result<()> {
    if belief.len() != inst.num_params() {
        return Err(Error::InvalidInput(format!(
            "belief has {} entries, instance has {} parameters",
            belief.len(),
            inst.num_params()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OutcomeModel;

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        // -(0.25 ln 0.25 + 0.75 ln 0.75)
        assert!((entropy(&[0.25, 0.75]).unwrap() - 0.562_335_144_618_808_4).abs() < 1e-14);
        assert!(matches!(entropy(&[0.5, 0.6]), Err(Error::InvalidPmf(_))));
        assert!(matches!(entropy(&[-0.1, 1.1]), Err(Error::InvalidPmf(_))));
    }

    #[test]
    fn mutual_information_examples() {
        let indep = vec![vec![0.12, 0.28], vec![0.18, 0.42]];
        assert!(mutual_information(&indep).unwrap().abs() < 1e-15);
        let ident = vec![vec![0.5, 0.0], vec![0.0, 0.5]];
        assert!((mutual_information(&ident).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        // U uniform, P(V=1|u) = 0.2 / 0.8: brute-force sum of p ln(p / pu pv)
        let j = vec![vec![0.4, 0.1], vec![0.1, 0.4]];
        assert!((mutual_information(&j).unwrap() - 0.192_744_757_021_757_5).abs() < 1e-14);
        assert!(mutual_information(&[vec![0.5], vec![0.4, 0.1]]).is_err());
    }

    #[test]
    fn kl_edge_cases() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
        assert_eq!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]), std::f64::consts::LN_2);
    }

    #[test]
    fn point_mass_belief_is_degenerate() {
        let inst = BanditInstance::from_vectors(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            OutcomeModel::LinearBinary,
        )
        .unwrap();
        let r = ts_info_ratio(&inst, &BeliefState::point_mass(2, 1)).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.numerator, r.denominator, r.ratio), (0.0, 0.0, 0.0));
    }

    #[test]
    fn degenerate_flag_needs_both_parts_small() {
        assert!(InfoRatioReport::from_parts(0.5, 0.0).is_err());
        let r = InfoRatioReport::from_parts(0.5, 0.25).unwrap();
        assert_eq!(r.ratio, 2.0);
        assert!(!r.degenerate);
    }
}
