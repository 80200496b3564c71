//! Finite Bayesian bandit instances: action and parameter sets, outcome
//! models, and the cached mean-reward / likelihood tables derived from them.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, sigmoid};

/// Slack allowed on the unit-ball and probability-range checks.
pub const NORM_TOL: f64 = 1e-12;

/// Strictly increasing link function used by generalized linear models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Link {
    /// `e^{beta x} / (1 + e^{beta x})`.
    Logistic { beta: f64 },
    /// `1/2 + slope * x`; maps [-1, 1] into [0, 1] when `slope <= 1/2`.
    Affine { slope: f64 },
}

impl Link {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Link::Logistic { beta } => sigmoid(beta * x),
            Link::Affine { slope } => 0.5 + slope * x,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Link::Logistic { beta } => {
                // beta * s(bx) * s(-bx), written to avoid overflow of e^{bx}
                let e = (-(beta * x).abs()).exp();
                beta * e / ((1.0 + e) * (1.0 + e))
            }
            Link::Affine { slope } => slope,
        }
    }

    pub fn inverse(&self, p: f64) -> f64 {
        match *self {
            Link::Logistic { beta } => crate::numerics::logit(p) / beta,
            Link::Affine { slope } => (p - 0.5) / slope,
        }
    }

    /// `sup phi'` over `[lo, hi]`.
    pub fn max_derivative(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Link::Logistic { .. } => {
                // unimodal with peak at 0: evaluate at the point of the interval nearest 0
                let x = if lo > 0.0 {
                    lo
                } else if hi < 0.0 {
                    hi
                } else {
                    0.0
                };
                self.derivative(x)
            }
            Link::Affine { slope } => *slope,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Link::Logistic { beta } if !(beta > 0.0 && beta.is_finite()) => Err(Error::InvalidInstance(
                format!("logistic beta must be positive, got {beta}"),
            )),
            Link::Affine { slope } if !(slope > 0.0 && slope.is_finite()) => Err(Error::InvalidInstance(
                format!("affine slope must be positive, got {slope}"),
            )),
            _ => Ok(()),
        }
    }
}

/// How an action and a parameter produce a random outcome (= reward).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeModel {
    /// Outcomes `{-1/2, +1/2}` with mean `a.theta / 2`.
    LinearBinary,
    /// Outcomes `phi(a.theta) +/- eta`, each with probability 1/2.
    Glm { link: Link, eta: f64 },
    /// Outcomes `{0, 1}` with success probability `sigmoid(beta a.theta)`.
    Logistic { beta: f64 },
}

impl OutcomeModel {
    /// The link as a function of the inner product `a.theta`.
    pub fn link(&self) -> Link {
        match *self {
            OutcomeModel::LinearBinary => Link::Affine { slope: 0.5 },
            OutcomeModel::Glm { link, .. } => link,
            OutcomeModel::Logistic { beta } => Link::Logistic { beta },
        }
    }

    /// Inverse temperature when the link is logistic.
    pub fn logistic_beta(&self) -> Option<f64> {
        match self.link() {
            Link::Logistic { beta } => Some(beta),
            Link::Affine { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OutcomeModel::LinearBinary => "linear",
            OutcomeModel::Glm { .. } => "glm",
            OutcomeModel::Logistic { .. } => "logistic",
        }
    }

    /// Mean reward given the inner product.
    pub fn mean(&self, x: f64) -> f64 {
        match *self {
            OutcomeModel::LinearBinary => 0.5 * x,
            _ => self.link().eval(x),
        }
    }

    /// Outcome pmf as `(value, probability)` pairs sorted by value.
    pub fn pmf(&self, x: f64) -> Vec<(f64, f64)> {
        match *self {
            OutcomeModel::LinearBinary => {
                let x = x.clamp(-1.0, 1.0);
                vec![(-0.5, 0.5 - 0.5 * x), (0.5, 0.5 + 0.5 * x)]
            }
            OutcomeModel::Logistic { beta } => {
                vec![(0.0, sigmoid(-beta * x)), (1.0, sigmoid(beta * x))]
            }
            OutcomeModel::Glm { link, eta } => {
                let mu = link.eval(x);
                if eta == 0.0 {
                    vec![(mu, 1.0)]
                } else {
                    vec![(mu - eta, 0.5), (mu + eta, 0.5)]
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            OutcomeModel::LinearBinary => Ok(()),
            OutcomeModel::Logistic { beta } => Link::Logistic { beta }.validate(),
            OutcomeModel::Glm { link, eta } => {
                link.validate()?;
                if !(eta >= 0.0 && eta.is_finite()) {
                    return Err(Error::InvalidInstance(format!(
                        "noise half-width must be >= 0, got {eta}"
                    )));
                }
                Ok(())
            }
        }
    }
}

fn validate_vectors(what: &str, vs: &[Vec<f64>], dim: usize) -> Result<()> {
    if vs.is_empty() {
        return Err(Error::InvalidInstance(format!("{what} set is empty")));
    }
    for (i, v) in vs.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::InvalidInstance(format!(
                "{what} {i} has dimension {} (expected {dim})",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInstance(format!("{what} {i} is not finite")));
        }
        let n = norm(v);
        if n > 1.0 + NORM_TOL {
            return Err(Error::InvalidInstance(format!("{what} {i} has norm {n} > 1")));
        }
    }
    Ok(())
}

/// Finite set of d-dimensional action vectors inside the closed unit ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ActionSet(Vec<Vec<f64>>);

impl ActionSet {
    pub fn new(actions: Vec<Vec<f64>>) -> Result<Self> {
        let dim = actions.first().map_or(0, Vec::len);
        if dim == 0 && !actions.is_empty() {
            return Err(Error::InvalidInstance("dimension must be >= 1".into()));
        }
        validate_vectors("action", &actions, dim)?;
        Ok(Self(actions))
    }

    pub fn dim(&self) -> usize {
        self.0[0].len()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Vec<f64>] {
        &self.0
    }
}

/// Finite parameter set; entries need not be distinct.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ParameterSet(Vec<Vec<f64>>);

impl ParameterSet {
    pub fn new(params: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        validate_vectors("parameter", &params, dim)?;
        Ok(Self(params))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Vec<f64>] {
        &self.0
    }
}

/// Outcome alphabet of one action together with `P(y | a, theta_i)` for
/// every parameter.
#[derive(Clone, Debug)]
pub struct OutcomeTable {
    values: Vec<f64>,
    // m rows of `values.len()` probabilities, row-major
    probs: Vec<f64>,
}

impl OutcomeTable {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_outcomes(&self) -> usize {
        self.values.len()
    }

    /// Likelihood row of parameter `i` over [`Self::values`].
    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.values.len();
        &self.probs[i * k..(i + 1) * k]
    }

    /// Position of `y` in the alphabet (exact match, then within 1e-12).
    pub fn index_of(&self, y: f64) -> Option<usize> {
        if let Ok(i) = self.values.binary_search_by(|v| v.total_cmp(&y)) {
            return Some(i);
        }
        self.values.iter().position(|v| (v - y).abs() <= 1e-12)
    }
}

/// Serialized form of an instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct InstanceDoc {
    d: usize,
    actions: Vec<Vec<f64>>,
    params: Vec<Vec<f64>>,
    model: OutcomeModel,
}

/// A finite Bayesian bandit with cached mean rewards, optimal actions and
/// outcome likelihoods. Immutable after construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc", into = "InstanceDoc")]
pub struct BanditInstance {
    actions: ActionSet,
    params: ParameterSet,
    model: OutcomeModel,
    // m x n, row = parameter
    means: Vec<Vec<f64>>,
    inner: Vec<Vec<f64>>,
    best: Vec<usize>,
    outcomes: Vec<OutcomeTable>,
}

impl TryFrom<InstanceDoc> for BanditInstance {
    type Error = Error;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        let actions = ActionSet::new(doc.actions)?;
        if actions.dim() != doc.d {
            return Err(Error::InvalidInstance(format!(
                "declared d = {} but actions have dimension {}",
                doc.d,
                actions.dim()
            )));
        }
        let params = ParameterSet::new(doc.params, doc.d)?;
        BanditInstance::new(actions, params, doc.model)
    }
}

impl From<BanditInstance> for InstanceDoc {
    fn from(inst: BanditInstance) -> Self {
        InstanceDoc {
            d: inst.dim(),
            actions: inst.actions.0,
            params: inst.params.0,
            model: inst.model,
        }
    }
}

impl BanditInstance {
    pub fn new(actions: ActionSet, params: ParameterSet, model: OutcomeModel) -> Result<Self> {
        model.validate()?;
        let dim = actions.dim();
        if params.as_slice().iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInstance(
                "parameter dimension does not match actions".into(),
            ));
        }
        let inner: Vec<Vec<f64>> = params
            .as_slice()
            .iter()
            .map(|th| actions.as_slice().iter().map(|a| dot(a, th)).collect())
            .collect();
        let means: Vec<Vec<f64>> = inner
            .iter()
            .map(|row| row.iter().map(|&x| model.mean(x)).collect())
            .collect();
        let best = means.iter().map(|row| argmax_lowest(row)).collect();

        let m = params.len();
        let mut outcomes = Vec::with_capacity(actions.len());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..actions.len() {
            let pmfs: Vec<Vec<(f64, f64)>> = (0..m).map(|i| model.pmf(inner[i][j])).collect();
            let mut values: Vec<f64> = pmfs.iter().flatten().map(|&(v, _)| v).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let k = values.len();
            let mut probs = vec![0.0; m * k];
            for (i, pmf) in pmfs.iter().enumerate() {
                for &(v, p) in pmf {
                    if !(-NORM_TOL..=1.0 + NORM_TOL).contains(&p) || !p.is_finite() {
                        return Err(Error::InvalidInstance(format!(
                            "outcome probability {p} outside [0, 1] (action {j}, parameter {i})"
                        )));
                    }
                    let pos = values.binary_search_by(|x| x.total_cmp(&v)).unwrap();
                    probs[i * k + pos] += p.clamp(0.0, 1.0);
                }
            }
            lo = lo.min(values[0]);
            hi = hi.max(values[k - 1]);
            outcomes.push(OutcomeTable { values, probs });
        }
        if hi - lo > 1.0 + NORM_TOL {
            return Err(Error::InvalidInstance(format!(
                "reward range {} exceeds 1",
                hi - lo
            )));
        }
        if let OutcomeModel::Glm { link, .. } = model {
            for row in &inner {
                for &x in row {
                    let v = link.eval(x);
                    if !(-NORM_TOL..=1.0 + NORM_TOL).contains(&v) {
                        return Err(Error::InvalidInstance(format!("link value {v} outside [0, 1]")));
                    }
                }
            }
        }
        Ok(Self {
            actions,
            params,
            model,
            means,
            inner,
            best,
            outcomes,
        })
    }

    /// Convenience constructor from raw vectors.
    pub fn from_vectors(actions: Vec<Vec<f64>>, params: Vec<Vec<f64>>, model: OutcomeModel) -> Result<Self> {
        let actions = ActionSet::new(actions)?;
        let params = ParameterSet::new(params, actions.dim())?;
        Self::new(actions, params, model)
    }

    pub fn dim(&self) -> usize {
        self.actions.dim()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn model(&self) -> &OutcomeModel {
        &self.model
    }

    /// Mean reward table, `means()[i][j] = mu(action j, param i)`.
    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// Cached `a_j . theta_i`.
    pub fn inner(&self, param_idx: usize, action_idx: usize) -> f64 {
        self.inner[param_idx][action_idx]
    }

    /// Optimal action of every parameter.
    pub fn best_actions(&self) -> &[usize] {
        &self.best
    }

    /// Cached mean reward without bounds checking beyond slice indexing.
    #[inline]
    pub fn mu(&self, action_idx: usize, param_idx: usize) -> f64 {
        self.means[param_idx][action_idx]
    }

    #[inline]
    pub fn alpha(&self, param_idx: usize) -> usize {
        self.best[param_idx]
    }

    pub fn outcome_table(&self, action_idx: usize) -> &OutcomeTable {
        &self.outcomes[action_idx]
    }

    pub fn mean_reward(&self, action_idx: usize, param_idx: usize) -> Result<f64> {
        self.check_action(action_idx)?;
        self.check_param(param_idx)?;
        Ok(self
            .model
            .mean(dot(&self.actions.0[action_idx], &self.params.0[param_idx])))
    }

    pub fn best_action(&self, param_idx: usize) -> Result<usize> {
        self.check_param(param_idx)?;
        Ok(self.best[param_idx])
    }

    /// Outcome pmf of `(action, parameter)` as `(value, probability)` pairs.
    pub fn outcome_distribution(&self, action_idx: usize, param_idx: usize) -> Result<Vec<(f64, f64)>> {
        self.check_action(action_idx)?;
        self.check_param(param_idx)?;
        let pmf = self.model.pmf(self.inner[param_idx][action_idx]);
        for &(_, p) in &pmf {
            if !(-NORM_TOL..=1.0 + NORM_TOL).contains(&p) {
                return Err(Error::InvalidInstance(format!(
                    "outcome probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(pmf)
    }

    /// Realized range `[L_lo, L_hi]` of `a . theta` over the instance.
    pub fn inner_product_range(&self) -> (f64, f64) {
        self.inner
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    }

    /// Classification margin `min_theta |alpha(theta) . theta|`.
    pub fn margin(&self) -> f64 {
        (0..self.num_params())
            .map(|i| self.inner[i][self.best[i]].abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn check_action(&self, j: usize) -> Result<()> {
        if j >= self.num_actions() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.num_actions(),
            });
        }
        Ok(())
    }

    fn check_param(&self, i: usize) -> Result<()> {
        if i >= self.num_params() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.num_params(),
            });
        }
        Ok(())
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = j;
        }
    }
    best
}

/// Uniform draw from the closed unit ball in `d` dimensions.
pub fn sample_unit_ball<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&g);
        if n > 0.0 && n.is_finite() {
            let r = rng.random::<f64>().powf(1.0 / d as f64);
            let v: Vec<f64> = g.iter().map(|x| x / n * r).collect();
            if norm(&v) <= 1.0 {
                return v;
            }
        }
    }
}

/// Draws `n_actions` actions and `m_params` parameters i.i.d. uniformly from
/// the unit ball.
pub fn sample_instance<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    n_actions: usize,
    m_params: usize,
    model: OutcomeModel,
) -> Result<BanditInstance> {
    if d == 0 || n_actions == 0 || m_params == 0 {
        return Err(Error::InvalidInput(format!(
            "d, n_actions and m_params must be >= 1 (got {d}, {n_actions}, {m_params})"
        )));
    }
    let actions = (0..n_actions).map(|_| sample_unit_ball(rng, d)).collect();
    let params = (0..m_params).map(|_| sample_unit_ball(rng, d)).collect();
    BanditInstance::from_vectors(actions, params, model)
}
