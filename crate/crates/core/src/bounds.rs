//! Closed-form Bayesian regret bounds and the constants they depend on.
//! Logarithms are natural throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Link, OutcomeModel};

/// Inputs echoed alongside a bound value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub info: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub inputs: BoundInputs,
    /// Caveats about the regime the formula was evaluated in.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn nonneg(name: &str, x: f64) -> Result<()> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{name} must be finite and >= 0, got {x}"
        )));
    }
    Ok(())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{name} must be finite and > 0, got {x}"
        )));
    }
    Ok(())
}

fn check_dt(d: usize, t: u64) -> Result<()> {
    if d == 0 || t == 0 {
        return Err(Error::InvalidInput(format!(
            "d and T must be >= 1 (got {d}, {t})"
        )));
    }
    Ok(())
}

/// `sqrt(gamma_bar * H * T)`.
pub fn entropy_bound(gamma_bar: f64, entropy: f64, t: f64) -> Result<f64> {
    nonneg("gamma_bar", gamma_bar)?;
    nonneg("entropy", entropy)?;
    nonneg("T", t)?;
    Ok((gamma_bar * entropy * t).sqrt())
}

/// `sqrt(gamma_bar * I * T) + epsilon T`.
pub fn compressed_bound(gamma_bar: f64, info: f64, epsilon: f64, t: f64) -> Result<f64> {
    nonneg("gamma_bar", gamma_bar)?;
    nonneg("info", info)?;
    nonneg("epsilon", epsilon)?;
    nonneg("T", t)?;
    Ok((gamma_bar * info * t).sqrt() + epsilon * t)
}

/// `d sqrt(T log(3 + 3 sqrt(2T) / d))`.
pub fn linear_bound(d: usize, t: u64) -> Result<f64> {
    check_dt(d, t)?;
    let (d, t) = (d as f64, t as f64);
    Ok(d * (t * (3.0 + 3.0 * (2.0 * t).sqrt() / d).ln()).sqrt())
}

/// `2 C(phi) d sqrt(T log(3 + 3 sqrt(2T) / d))`.
pub fn glm_bound(d: usize, t: u64, c_phi: f64) -> Result<f64> {
    positive("c_phi", c_phi)?;
    Ok(2.0 * c_phi * linear_bound(d, t)?)
}

/// Both forms of the logistic bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticBound {
    /// `2d sqrt(T log(3 + (6 sqrt(2T)/d) beta e^{beta delta} / (1 + e^{beta delta})^2))`.
    pub primary: f64,
    /// `2d sqrt(T log(3 + (3 sqrt(2T)/(2d)) min(1/delta, beta)))`.
    pub simplified: f64,
}

pub fn logistic_bound(d: usize, t: u64, beta: f64, delta: f64) -> Result<LogisticBound> {
    check_dt(d, t)?;
    positive("beta", beta)?;
    positive("delta", delta)?;
    let slope = Link::Logistic { beta }.derivative(delta);
    let (d, t) = (d as f64, t as f64);
    let root = (2.0 * t).sqrt();
    let primary = 2.0 * d * (t * (3.0 + 6.0 * root / d * slope).ln()).sqrt();
    let simplified = 2.0 * d * (t * (3.0 + 1.5 * root / d * (1.0 / delta).min(beta)).ln()).sqrt();
    Ok(LogisticBound { primary, simplified })
}

/// Whether `epsilon = d / sqrt(2T)` lies outside the range `(0, phi(delta) - 1/2)`
/// the logistic partition needs.
pub fn logistic_epsilon_out_of_range(d: usize, t: u64, beta: f64, delta: f64) -> bool {
    let eps = d as f64 / (2.0 * t as f64).sqrt();
    eps >= Link::Logistic { beta }.eval(delta) - 0.5
}

/// `C(phi) = sup phi'` over `[lo, hi]`; `1/2` for the linear model.
pub fn c_phi(model: &OutcomeModel, lo: f64, hi: f64) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::InvalidInput(format!("empty interval [{lo}, {hi}]")));
    }
    match model {
        OutcomeModel::LinearBinary => Ok(0.5),
        OutcomeModel::Logistic { .. } | OutcomeModel::Glm { .. } => Ok(model.link().max_derivative(lo, hi)),
    }
}

/// Which closed-form cell count to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionKind {
    Linear,
    Glm { c_phi: f64 },
    Logistic { beta: f64, delta: f64 },
}

/// Closed-form bound on the number of cells needed for distortion `epsilon`.
pub fn partition_count_bounds(d: usize, epsilon: f64, kind: PartitionKind) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let d = d as i32;
    match kind {
        PartitionKind::Linear => Ok((1.0 / epsilon + 1.0).powi(d)),
        PartitionKind::Glm { c_phi } => {
            positive("c_phi", c_phi)?;
            Ok((2.0 * c_phi / epsilon + 1.0).powi(d))
        }
        PartitionKind::Logistic { beta, delta } => {
            positive("beta", beta)?;
            positive("delta", delta)?;
            let phi = Link::Logistic { beta };
            let limit = phi.eval(delta) - 0.5;
            if epsilon >= limit {
                return Err(Error::EpsilonTooLarge { epsilon, limit });
            }
            let gap = delta - phi.inverse(phi.eval(delta) - epsilon);
            Ok((1.0 + 2.0 / gap).powi(d) / epsilon)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_bound_examples() {
        assert_eq!(entropy_bound(0.0, 3.0, 10.0).unwrap(), 0.0);
        let v = entropy_bound(1.0, std::f64::consts::LN_2, 4.0).unwrap();
        assert!((v - 1.665_109_222_315_395_5).abs() < 1e-12);
        assert_eq!(entropy_bound(2.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(entropy_bound(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn compressed_bound_examples() {
        assert_eq!(compressed_bound(0.7, 0.0, 0.1, 50.0).unwrap(), 5.0);
        assert_eq!(
            compressed_bound(0.5, 2.0, 0.0, 9.0).unwrap(),
            entropy_bound(0.5, 2.0, 9.0).unwrap()
        );
        let v = compressed_bound(0.5, std::f64::consts::LN_2, 0.01, 100.0).unwrap();
        assert!((v - 6.887_050_112_577_373).abs() < 1e-9, "{v}");
        assert!(compressed_bound(0.5, 1.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn linear_bound_examples() {
        assert!((linear_bound(10, 10_000).unwrap() - 1953.5).abs() < 0.1);
        // sqrt(ln(3 + 3 sqrt 2))
        assert!((linear_bound(1, 1).unwrap() - 1.407_119_709_082_227_6).abs() < 1e-12);
        for d in [1, 3, 10] {
            let mut prev = 0.0;
            for t in [1, 2, 5, 10, 100, 1000, 10_000] {
                let v = linear_bound(d, t).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
        assert!(linear_bound(0, 10).is_err());
        assert!(linear_bound(2, 0).is_err());
    }

    #[test]
    fn glm_bound_scaling() {
        assert_eq!(glm_bound(4, 250, 0.5).unwrap(), linear_bound(4, 250).unwrap());
        assert_eq!(
            glm_bound(2, 100, 1.0).unwrap(),
            2.0 * linear_bound(2, 100).unwrap()
        );
        // beta / 4 = 1 at beta = 4
        assert!((glm_bound(3, 400, 1.0).unwrap() - 2.0 * linear_bound(3, 400).unwrap()).abs() < 1e-12);
        assert!(glm_bound(2, 10, 0.0).is_err());
    }

    #[test]
    fn logistic_bound_examples() {
        let b = logistic_bound(2, 100, 1e6, 0.5).unwrap();
        let limit = 4.0 * (100.0 * 3f64.ln()).sqrt();
        assert!(((b.primary - limit) / limit).abs() < 1e-3);
        assert!(b.primary <= b.simplified + 1e-9);

        let slope = Link::Logistic { beta: 1.0 }.derivative(0.5);
        assert!((slope - 0.235_003_712_201_594_5).abs() < 1e-12);
        let b = logistic_bound(2, 100, 1.0, 0.5).unwrap();
        let expect = 4.0 * (100.0 * (3.0 + 6.0 * 200f64.sqrt() / 2.0 * slope).ln()).sqrt();
        assert!((b.primary - expect).abs() < 1e-12);
        assert!(logistic_bound(2, 100, 0.0, 0.5).is_err());
    }

    #[test]
    fn c_phi_examples() {
        let lg = OutcomeModel::Logistic { beta: 3.0 };
        assert_eq!(c_phi(&lg, -0.2, 0.7).unwrap(), 0.75);
        let lg2 = OutcomeModel::Logistic { beta: 2.0 };
        assert!((c_phi(&lg2, 0.5, 1.0).unwrap() - 0.393_223_866_482_964_2).abs() < 1e-12);
        assert_eq!(c_phi(&lg2, -1.0, -0.5).unwrap(), c_phi(&lg2, 0.5, 1.0).unwrap());
        assert_eq!(c_phi(&OutcomeModel::LinearBinary, -1.0, 1.0).unwrap(), 0.5);
        assert!(c_phi(&lg, 1.0, 0.0).is_err());
    }

    #[test]
    fn partition_count_examples() {
        assert_eq!(
            partition_count_bounds(3, 1.0, PartitionKind::Linear).unwrap(),
            8.0
        );
        assert_eq!(
            partition_count_bounds(2, 1.0, PartitionKind::Glm { c_phi: 0.5 }).unwrap(),
            4.0
        );
        let kind = PartitionKind::Logistic {
            beta: 1.0,
            delta: 0.5,
        };
        let phi = Link::Logistic { beta: 1.0 };
        let gap = 0.5 - phi.inverse(phi.eval(0.5) - 0.05);
        let v = partition_count_bounds(2, 0.05, kind).unwrap();
        assert!((v - 20.0 * (1.0 + 2.0 / gap).powi(2)).abs() < 1e-9 * v);
        assert!(matches!(
            partition_count_bounds(2, 0.2, kind),
            Err(Error::EpsilonTooLarge { .. })
        ));
    }
}
