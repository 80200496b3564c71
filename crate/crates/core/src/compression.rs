//! Distortion-bounded partitions of the parameter set and the two-point
//! representatives used by compressed Thompson sampling.

use serde::{Deserialize, Serialize};

use crate::bounds::c_phi;
use crate::error::{Error, Result};
use crate::inference::BeliefState;
use crate::information::{entropy_unchecked, info_gain_about_statistic, marginal_means};
use crate::model::{BanditInstance, Link, OutcomeModel};
use crate::numerics::{csum, euclidean_distance};

/// Slack on the intra-cell distortion certificate.
pub const CERTIFICATE_TOL: f64 = 1e-12;
/// Slack on the two-point mixture inequalities.
pub const MIXTURE_TOL: f64 = 1e-12;
/// Accepted mismatch between stored and recomputed cell masses.
pub const CELL_MASS_TOL: f64 = 1e-9;
/// Largest parameter set the exhaustive rate-distortion search accepts.
pub const BRUTEFORCE_LIMIT: usize = 8;

/// `d(theta_i, theta_j) = mu(alpha(theta_j), theta_j) - mu(alpha(theta_i), theta_j)`:
/// regret of acting on `theta_i` when `theta_j` is true.
pub fn distortion(inst: &BanditInstance, i: usize, j: usize) -> Result<f64> {
    let m = inst.num_params();
    for idx in [i, j] {
        if idx >= m {
            return Err(Error::IndexOutOfRange { index: idx, len: m });
        }
    }
    Ok(distortion_unchecked(inst, i, j))
}

#[inline]
fn distortion_unchecked(inst: &BanditInstance, i: usize, j: usize) -> f64 {
    inst.mu(inst.alpha(j), j) - inst.mu(inst.alpha(i), j)
}

/// Assignment of parameters to cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    cell_of: Vec<usize>,
    epsilon: f64,
    k: usize,
    /// Center radius of every greedy covering the builder ran.
    #[serde(default)]
    cover_radii: Vec<f64>,
}

impl Partition {
    /// Validates that `cell_of` uses every label in `0..K` (K = max + 1).
    pub fn new(cell_of: Vec<usize>, epsilon: f64) -> Result<Self> {
        if cell_of.is_empty() {
            return Err(Error::InvalidInput("partition of an empty set".into()));
        }
        let k = cell_of.iter().max().unwrap() + 1;
        let mut used = vec![false; k];
        for &c in &cell_of {
            used[c] = true;
        }
        if let Some(c) = used.iter().position(|u| !u) {
            return Err(Error::InvalidInput(format!("cell {c} is empty")));
        }
        Ok(Self {
            cell_of,
            epsilon,
            k,
            cover_radii: Vec::new(),
        })
    }

    pub fn singletons(m: usize) -> Self {
        Self {
            cell_of: (0..m).collect(),
            epsilon: 0.0,
            k: m,
            cover_radii: Vec::new(),
        }
    }

    pub fn single_cell(m: usize, epsilon: f64) -> Self {
        Self {
            cell_of: vec![0; m],
            epsilon,
            k: 1,
            cover_radii: Vec::new(),
        }
    }

    pub fn cell_of(&self) -> &[usize] {
        &self.cell_of
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn num_cells(&self) -> usize {
        self.k
    }

    pub fn cover_radii(&self) -> &[f64] {
        &self.cover_radii
    }

    /// Members of every cell, in increasing parameter order.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.k];
        for (i, &c) in self.cell_of.iter().enumerate() {
            cells[c].push(i);
        }
        cells
    }

    /// Pushforward of the belief onto cells.
    pub fn cell_masses(&self, belief: &BeliefState) -> Vec<f64> {
        self.cells()
            .iter()
            .map(|c| csum(c.iter().map(|&i| belief.probs()[i])))
            .collect()
    }

    /// Largest `d(theta, theta')` over ordered pairs sharing a cell.
    pub fn max_intra_cell_distortion(&self, inst: &BanditInstance) -> f64 {
        let mut worst: f64 = 0.0;
        for cell in self.cells() {
            for &i in &cell {
                for &j in &cell {
                    worst = worst.max(distortion_unchecked(inst, i, j));
                }
            }
        }
        worst
    }

    /// Packing bound on the number of cells a greedy covering can produce:
    /// `sum over coverings of (1 + 2 / radius)^d`.
    pub fn greedy_cover_bound(&self, d: usize) -> f64 {
        self.cover_radii
            .iter()
            .map(|r| (1.0 + 2.0 / r).powi(d as i32))
            .sum()
    }

    pub(crate) fn check_len(&self, m: usize) -> Result<()> {
        if self.cell_of.len() != m {
            return Err(Error::InvalidInput(format!(
                "partition covers {} parameters, instance has {m}",
                self.cell_of.len()
            )));
        }
        Ok(())
    }

    fn certify(self, inst: &BanditInstance) -> Result<Self> {
        let worst = self.max_intra_cell_distortion(inst);
        if worst > self.epsilon + CERTIFICATE_TOL {
            return Err(Error::CertificateViolated {
                distortion: worst,
                epsilon: self.epsilon,
            });
        }
        Ok(self)
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(())
}

/// Greedy net: scan points in order, open a cell at the first uncovered
/// point and absorb every uncovered point within `radius` of it.
fn greedy_cover(points: &[&[f64]], radius: f64) -> Vec<usize> {
    let mut label = vec![usize::MAX; points.len()];
    let mut next = 0;
    for c in 0..points.len() {
        if label[c] != usize::MAX {
            continue;
        }
        for q in c..points.len() {
            if label[q] == usize::MAX && euclidean_distance(points[c], points[q]) <= radius {
                label[q] = next;
            }
        }
        next += 1;
    }
    label
}

/// Covers the best actions of the parameters in `group` at `radius`, and
/// writes cell labels (offset by `next`) into `cell_of`. Returns the number
/// of cells opened.
fn cover_group(
    inst: &BanditInstance,
    group: &[usize],
    radius: f64,
    next: usize,
    cell_of: &mut [usize],
) -> usize {
    let mut acts: Vec<usize> = group.iter().map(|&i| inst.alpha(i)).collect();
    acts.sort_unstable();
    acts.dedup();
    let pts: Vec<&[f64]> = acts
        .iter()
        .map(|&a| inst.actions().as_slice()[a].as_slice())
        .collect();
    let labels = greedy_cover(&pts, radius);
    for &i in group {
        let pos = acts.binary_search(&inst.alpha(i)).unwrap();
        cell_of[i] = next + labels[pos];
    }
    labels.iter().max().map_or(0, |l| l + 1)
}

fn build_by_radius(inst: &BanditInstance, epsilon: f64, radius: f64) -> Result<Partition> {
    let m = inst.num_params();
    let mut cell_of = vec![0; m];
    let all: Vec<usize> = (0..m).collect();
    let k = cover_group(inst, &all, radius, 0, &mut cell_of);
    Partition {
        cell_of,
        epsilon,
        k,
        cover_radii: vec![radius],
    }
    .certify(inst)
}

/// Linear-bandit partition: cover the realized optimal actions with balls of
/// radius `epsilon` (cells of diameter `2 epsilon`) and pull back through the
/// optimal-action map.
pub fn build_partition_linear(inst: &BanditInstance, epsilon: f64) -> Result<Partition> {
    check_epsilon(epsilon)?;
    if *inst.model() != OutcomeModel::LinearBinary {
        return Err(Error::UnsupportedModel(format!(
            "linear builder needs a linear model, got {}",
            inst.model().name()
        )));
    }
    build_by_radius(inst, epsilon, epsilon)
}

/// GLM partition: as the linear builder with radius `epsilon / (2 C(phi))`.
pub fn build_partition_glm(inst: &BanditInstance, epsilon: f64) -> Result<Partition> {
    check_epsilon(epsilon)?;
    if *inst.model() == OutcomeModel::LinearBinary {
        return Err(Error::UnsupportedModel(
            "GLM builder needs a glm or logistic model".into(),
        ));
    }
    let (lo, hi) = inst.inner_product_range();
    let c = c_phi(inst.model(), lo, hi)?;
    build_by_radius(inst, epsilon, epsilon / (2.0 * c))
}

/// Layer boundaries `s_0 < s_1 = delta < ... < s_L = 1` for the logistic
/// partition: `phi(s_l) - phi(s_{l-1}) = epsilon` for `l < L` and `L` is the
/// smallest integer with `phi(delta) + (L - 1) epsilon >= phi(1)`.
pub fn logistic_layers(beta: f64, delta: f64, epsilon: f64) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    let phi = Link::Logistic { beta };
    let top = phi.eval(delta);
    let limit = top - 0.5;
    if epsilon >= limit {
        return Err(Error::EpsilonTooLarge { epsilon, limit });
    }
    let phi_one = phi.eval(1.0);
    let mut steps = 0usize;
    while top + steps as f64 * epsilon < phi_one {
        steps += 1;
    }
    let layers = steps + 1;
    let mut s = Vec::with_capacity(layers + 1);
    s.push(phi.inverse(top - epsilon));
    s.push(delta);
    for l in 2..layers {
        s.push(phi.inverse(top + (l - 1) as f64 * epsilon));
    }
    if layers >= 2 {
        s.push(1.0);
    }
    Ok(s)
}

/// Logistic partition under a classification margin `delta`: parameters are
/// layered by `|alpha(theta) . theta|` and each layer's optimal actions are
/// covered at half the layer's width. Negative inner products use mirrored
/// layers.
pub fn build_partition_logistic(inst: &BanditInstance, epsilon: f64, delta: f64) -> Result<Partition> {
    check_epsilon(epsilon)?;
    let beta = inst
        .model()
        .logistic_beta()
        .ok_or_else(|| Error::UnsupportedModel("logistic builder needs a logistic link".into()))?;
    let margin = inst.margin();
    if margin < delta {
        return Err(Error::MarginViolated { margin, delta });
    }
    let s = logistic_layers(beta, delta, epsilon)?;
    let top_layer = (s.len() - 2).max(1);

    let m = inst.num_params();
    // groups[sign][layer - 1]
    let mut groups = vec![vec![Vec::new(); top_layer]; 2];
    for i in 0..m {
        let x = inst.inner(i, inst.alpha(i));
        let ax = x.abs();
        let layer = (1..=top_layer).rev().find(|&l| s[l] <= ax).unwrap_or(1);
        groups[usize::from(x < 0.0)][layer - 1].push(i);
    }
    let mut cell_of = vec![0; m];
    let mut next = 0;
    let mut radii = Vec::new();
    for sign_groups in &groups {
        for (l0, group) in sign_groups.iter().enumerate() {
            if group.is_empty() {
                continue;
            }
            let l = l0 + 1;
            let radius = (s[l] - s[l - 1]) / 2.0;
            next += cover_group(inst, group, radius, next, &mut cell_of);
            radii.push(radius);
        }
    }
    Partition {
        cell_of,
        epsilon,
        k: next,
        cover_radii: radii,
    }
    .certify(inst)
}

/// Finds `(j, k, r)` with `r a_j + (1 - r) a_k <= sum p a` and the same for
/// `b`, scanning ordered pairs lexicographically. `j == k` returns `r = 1`;
/// otherwise the smallest feasible `r` is returned.
pub fn two_point_pair(a: &[f64], b: &[f64], p: &[f64]) -> Result<(usize, usize, f64)> {
    let n = a.len();
    if n == 0 || b.len() != n || p.len() != n {
        return Err(Error::InvalidInput(
            "two_point_pair needs equal non-zero lengths".into(),
        ));
    }
    crate::information::validate_pmf(p)?;
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Infeasible);
    }
    let mean_a = csum(a.iter().zip(p).map(|(x, w)| x * w));
    let mean_b = csum(b.iter().zip(p).map(|(x, w)| x * w));
    let slack = MIXTURE_TOL / 4.0;

    let holds = |j: usize, k: usize, r: f64| {
        r * a[j] + (1.0 - r) * a[k] <= mean_a + MIXTURE_TOL
            && r * b[j] + (1.0 - r) * b[k] <= mean_b + MIXTURE_TOL
    };

    for j in 0..n {
        for k in 0..n {
            if j == k {
                if a[j] <= mean_a + slack && b[j] <= mean_b + slack {
                    return Ok((j, j, 1.0));
                }
                continue;
            }
            // r (x_j - x_k) <= mean - x_k for x in {a, b}
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for (xj, xk, mean) in [(a[j], a[k], mean_a), (b[j], b[k], mean_b)] {
                let c = xj - xk;
                let e = mean - xk + slack;
                if c > 0.0 {
                    hi = hi.min(e / c);
                } else if c < 0.0 {
                    lo = lo.max(e / c);
                } else if e < 0.0 {
                    hi = -1.0;
                }
            }
            if lo <= hi {
                let r = lo.clamp(0.0, 1.0);
                if holds(j, k, r) {
                    return Ok((j, k, r));
                }
            }
        }
    }
    Err(Error::Infeasible)
}

/// Representative of one cell: `idx1` with probability `r`, else `idx2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRepresentative {
    pub idx1: usize,
    pub idx2: usize,
    pub r: f64,
}

/// Compressed statistic: a two-point mixture per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    partition: Partition,
    cells: Vec<CellRepresentative>,
    cell_mass: Vec<f64>,
}

impl Representation {
    pub fn new(partition: Partition, cells: Vec<CellRepresentative>, cell_mass: Vec<f64>) -> Result<Self> {
        if cells.len() != partition.num_cells() || cell_mass.len() != partition.num_cells() {
            return Err(Error::InconsistentRepresentation(
                "one representative and one mass per cell required".into(),
            ));
        }
        for (k, c) in cells.iter().enumerate() {
            let inside = |i: usize| partition.cell_of.get(i) == Some(&k);
            if !inside(c.idx1) || !inside(c.idx2) || !(0.0..=1.0).contains(&c.r) {
                return Err(Error::InconsistentRepresentation(format!(
                    "cell {k} representative {c:?} is invalid"
                )));
            }
        }
        Ok(Self {
            partition,
            cells,
            cell_mass,
        })
    }

    /// Identity compression: each parameter represents itself.
    pub fn identity(belief: &BeliefState) -> Self {
        let m = belief.len();
        Self {
            partition: Partition::singletons(m),
            cells: (0..m)
                .map(|i| CellRepresentative {
                    idx1: i,
                    idx2: i,
                    r: 1.0,
                })
                .collect(),
            cell_mass: belief.probs().to_vec(),
        }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn cells(&self) -> &[CellRepresentative] {
        &self.cells
    }

    pub fn cell_mass(&self) -> &[f64] {
        &self.cell_mass
    }

    pub fn check_consistent(&self, belief: &BeliefState) -> Result<()> {
        if self.partition.cell_of.len() != belief.len() {
            return Err(Error::InconsistentRepresentation(format!(
                "partition covers {} parameters, belief has {}",
                self.partition.cell_of.len(),
                belief.len()
            )));
        }
        let masses = self.partition.cell_masses(belief);
        for (k, (stored, actual)) in self.cell_mass.iter().zip(&masses).enumerate() {
            if (stored - actual).abs() > CELL_MASS_TOL {
                return Err(Error::InconsistentRepresentation(format!(
                    "cell {k} mass {stored} but belief gives {actual}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-cell two-point representatives whose expected reward and information
/// about the cell index are both no larger than those of Thompson sampling
/// restricted to the cell.
pub fn build_representation(
    inst: &BanditInstance,
    belief: &BeliefState,
    partition: &Partition,
) -> Result<Representation> {
    partition.check_len(inst.num_params())?;
    if belief.len() != inst.num_params() {
        return Err(Error::InvalidInput("belief and instance sizes differ".into()));
    }
    let masses = partition.cell_masses(belief);
    let reward = marginal_means(inst, belief);
    // information about psi depends on the action only
    let mut info_cache: Vec<Option<f64>> = vec![None; inst.num_actions()];
    let mut info = |a: usize| -> Result<f64> {
        if let Some(v) = info_cache[a] {
            return Ok(v);
        }
        let v = info_gain_about_statistic(inst, belief, partition, a)?;
        info_cache[a] = Some(v);
        Ok(v)
    };

    let mut reps = Vec::with_capacity(partition.num_cells());
    for (k, cell) in partition.cells().iter().enumerate() {
        if masses[k] <= 0.0 {
            reps.push(CellRepresentative {
                idx1: cell[0],
                idx2: cell[0],
                r: 1.0,
            });
            continue;
        }
        let weights: Vec<f64> = cell.iter().map(|&i| belief.probs()[i] / masses[k]).collect();
        let a: Vec<f64> = cell.iter().map(|&i| reward[inst.alpha(i)]).collect();
        let b = cell
            .iter()
            .map(|&i| info(inst.alpha(i)))
            .collect::<Result<Vec<f64>>>()?;
        let (j, l, r) = two_point_pair(&a, &b, &weights)?;
        reps.push(CellRepresentative {
            idx1: cell[j],
            idx2: cell[l],
            r,
        });
    }
    Representation::new(partition.clone(), reps, masses)
}

/// `I(theta*; psi) = H(psi)` since the cell index is a function of the
/// parameter.
pub fn statistic_mutual_information(belief: &BeliefState, partition: &Partition) -> Result<f64> {
    partition.check_len(belief.len())?;
    Ok(entropy_unchecked(&partition.cell_masses(belief)))
}

/// Optimum of the exhaustive search over partition-induced statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct RateDistortionOptimum {
    pub num_cells: usize,
    pub info: f64,
    pub partition: Partition,
}

/// Minimizes `I(theta*; psi)` over every set partition whose cells have
/// intra-cell distortion at most `epsilon`.
pub fn rate_distortion_bruteforce(
    inst: &BanditInstance,
    belief: &BeliefState,
    epsilon: f64,
) -> Result<RateDistortionOptimum> {
    let m = inst.num_params();
    if m > BRUTEFORCE_LIMIT {
        return Err(Error::TooLarge {
            m,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    if belief.len() != m {
        return Err(Error::InvalidInput("belief and instance sizes differ".into()));
    }
    let close: Vec<Vec<bool>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    distortion_unchecked(inst, i, j) <= epsilon + CERTIFICATE_TOL
                        && distortion_unchecked(inst, j, i) <= epsilon + CERTIFICATE_TOL
                })
                .collect()
        })
        .collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut labels = vec![0usize; m];
    enumerate_partitions(&mut labels, 1, 1, &mut |labels: &[usize], k: usize| {
        for i in 0..m {
            for j in i + 1..m {
                if labels[i] == labels[j] && !close[i][j] {
                    return;
                }
            }
        }
        let mut masses = vec![0.0; k];
        for (i, &c) in labels.iter().enumerate() {
            masses[c] += belief.probs()[i];
        }
        let h = entropy_unchecked(&masses);
        if best.as_ref().is_none_or(|(b, _)| h < *b) {
            best = Some((h, labels.to_vec()));
        }
    });
    let (info, cell_of) = best.expect("singleton partition is always feasible");
    let partition = Partition::new(cell_of, epsilon)?;
    Ok(RateDistortionOptimum {
        num_cells: partition.num_cells(),
        info,
        partition,
    })
}

/// Visits every restricted growth string of length `labels.len()`.
fn enumerate_partitions<F: FnMut(&[usize], usize)>(labels: &mut [usize], pos: usize, used: usize, f: &mut F) {
    if pos >= labels.len() {
        f(labels, used.min(labels.len()).max(1));
        return;
    }
    for c in 0..=used {
        labels[pos] = c;
        enumerate_partitions(labels, pos + 1, used.max(c + 1), f);
    }
}
