//! Thompson sampling, one-step compressed Thompson sampling, Monte Carlo
//! Bayesian regret, and a per-period audit of the rate-distortion regret
//! argument.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::compressed_bound;
use crate::compression::{build_representation, Partition, Representation, CERTIFICATE_TOL};
use crate::error::{Error, Result};
use crate::inference::{posterior_update_indexed, sample_index, sample_parameter, BeliefState};
use crate::information::{entropy_unchecked, ts_info_gain_about_statistic, ts_info_ratio, BenchmarkLaw};
use crate::model::BanditInstance;
use crate::numerics::csum;
use crate::stream_rng;

/// Samples a parameter from the belief and plays its optimal action.
pub fn thompson_step<R: Rng + ?Sized>(
    inst: &BanditInstance,
    belief: &BeliefState,
    rng: &mut R,
) -> (usize, usize) {
    let i = sample_parameter(belief, rng);
    (i, inst.alpha(i))
}

/// Samples a cell from the cell masses, then its representative.
pub fn compressed_ts_step<R: Rng + ?Sized>(
    inst: &BanditInstance,
    belief: &BeliefState,
    rep: &Representation,
    rng: &mut R,
) -> Result<(usize, usize)> {
    rep.check_consistent(belief)?;
    let k = sample_index(rep.cell_mass(), rng);
    let c = rep.cells()[k];
    let u: f64 = rng.random();
    let i = if u < c.r { c.idx1 } else { c.idx2 };
    Ok((i, inst.alpha(i)))
}

/// How per-period regret is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RegretEstimator {
    /// `mu(alpha(theta*), theta*) - mu(A_t, theta*)`.
    #[default]
    Pseudo,
    /// `mu(alpha(theta*), theta*) - R(Y_{A_t})`.
    Realized,
}

/// Monte Carlo Bayesian regret of Thompson sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub estimator: RegretEstimator,
    pub runs: usize,
    /// Mean regret in each period.
    pub per_period_regret: Vec<f64>,
    /// Mean cumulative regret through each period.
    pub cumulative_regret: Vec<f64>,
    /// Standard error of the cumulative regret through each period.
    pub std_errors: Vec<f64>,
    /// Mean cumulative regret at the horizon.
    pub cumulative: f64,
    pub std_error: f64,
}

impl RegretTrace {
    /// CSV with columns `period,mean_regret,cum_regret,std_err`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("period,mean_regret,cum_regret,std_err\n");
        for t in 0..self.per_period_regret.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t + 1,
                self.per_period_regret[t],
                self.cumulative_regret[t],
                self.std_errors[t]
            ));
        }
        out
    }
}

fn simulate_run(
    inst: &BanditInstance,
    prior: &BeliefState,
    horizon: usize,
    estimator: RegretEstimator,
    seed: u64,
    run: usize,
) -> Result<Vec<f64>> {
    let mut rng = stream_rng(seed, run as u64);
    let truth = sample_parameter(prior, &mut rng);
    let best = inst.mu(inst.alpha(truth), truth);
    let mut belief = prior.clone();
    let mut regrets = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let (_, a) = thompson_step(inst, &belief, &mut rng);
        let table = inst.outcome_table(a);
        let y = sample_index(table.row(truth), &mut rng);
        regrets.push(match estimator {
            RegretEstimator::Pseudo => best - inst.mu(a, truth),
            RegretEstimator::Realized => best - table.values()[y],
        });
        belief = posterior_update_indexed(&belief, inst, a, y)?;
    }
    Ok(regrets)
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = csum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = csum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `runs` independent episodes of length `horizon`, each with its own
/// random stream `(seed, run index)`, so results do not depend on how runs
/// are scheduled across threads.
pub fn simulate_ts(
    inst: &BanditInstance,
    prior: &BeliefState,
    horizon: usize,
    runs: usize,
    seed: u64,
    estimator: RegretEstimator,
) -> Result<RegretTrace> {
    if runs == 0 {
        return Err(Error::InvalidInput("runs must be >= 1".into()));
    }
    if prior.len() != inst.num_params() {
        return Err(Error::InvalidInput("prior and instance sizes differ".into()));
    }
    let paths = (0..runs)
        .into_par_iter()
        .map(|r| simulate_run(inst, prior, horizon, estimator, seed, r))
        .collect::<Result<Vec<_>>>()?;

    let mut per_period = Vec::with_capacity(horizon);
    let mut cumulative = Vec::with_capacity(horizon);
    let mut std_errors = Vec::with_capacity(horizon);
    let mut running = vec![crate::numerics::NeumaierSum::new(); runs];
    for t in 0..horizon {
        let col: Vec<f64> = paths.iter().map(|p| p[t]).collect();
        per_period.push(mean_and_se(&col).0);
        for (acc, x) in running.iter_mut().zip(&col) {
            *acc += *x;
        }
        let cum: Vec<f64> = running.iter().map(|a| a.value()).collect();
        let (m, se) = mean_and_se(&cum);
        cumulative.push(m);
        std_errors.push(se);
    }
    Ok(RegretTrace {
        estimator,
        runs,
        per_period_regret: per_period,
        cumulative: cumulative.last().copied().unwrap_or(0.0),
        std_error: std_errors.last().copied().unwrap_or(0.0),
        cumulative_regret: cumulative,
        std_errors,
    })
}

/// Tolerance on every inequality the audit checks.
pub const AUDIT_TOL: f64 = 1e-8;
/// Upper limit on `m * n * |outcomes|` for the exact per-period audit.
pub const AUDIT_WORK_LIMIT: usize = 1_000_000;

/// Exact per-period quantities along one Thompson-sampling trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub run: usize,
    pub period: usize,
    /// `E_{t-1}[R* - R(alpha(theta_t))]`.
    pub regret: f64,
    /// `E_{t-1}[R(alpha(benchmark)) - R(alpha(sample))]` for the compressed law.
    pub compressed_regret: f64,
    /// `regret - compressed_regret`; at most epsilon.
    pub representation_slack: f64,
    pub compressed_ratio: f64,
    /// `I_{t-1}(benchmark; (sample, Y))`, compressed law.
    pub compressed_info: f64,
    /// `I_{t-1}(psi; (sample, Y))`, compressed law.
    pub compressed_info_psi: f64,
    /// `I_{t-1}(psi; (theta_t, Y))`.
    pub ts_info_psi: f64,
    /// `I_{t-1}(theta*; (theta_t, Y))`.
    pub ts_info_theta: f64,
    /// `H_{t-1}(psi)`.
    pub entropy_psi: f64,
    /// `E_{t-1}[H_t(psi)]` by enumeration of the next observation.
    pub next_entropy_psi: f64,
    /// Outcome of each chain step, in proof order.
    pub steps: [bool; 6],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub epsilon: f64,
    pub horizon: usize,
    pub runs: usize,
    /// Largest compressed information ratio over all audited periods.
    pub gamma_bar: f64,
    /// `I(theta*; psi)` under the prior.
    pub info_theta_psi: f64,
    /// `sqrt(gamma_bar I(theta*; psi) T) + epsilon T`.
    pub bound: f64,
    /// Mean over runs of `sum_t mu(alpha(theta*), theta*) - mu(A_t, theta*)`.
    pub mean_cumulative_regret: f64,
    /// Mean over runs of `sum_t E_{t-1}[R* - R(A_t)]`.
    pub mean_expected_regret: f64,
    pub chain_holds: bool,
    pub bound_holds: bool,
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.chain_holds && self.bound_holds
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "run,period,regret,compressed_regret,representation_slack,compressed_ratio,\
compressed_info_nats,compressed_info_psi_nats,ts_info_psi_nats,ts_info_theta_nats,\
entropy_psi_nats,next_entropy_psi_nats,step1,step2,step3,step4,step5,step6\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.run,
                r.period,
                r.regret,
                r.compressed_regret,
                r.representation_slack,
                r.compressed_ratio,
                r.compressed_info,
                r.compressed_info_psi,
                r.ts_info_psi,
                r.ts_info_theta,
                r.entropy_psi,
                r.next_entropy_psi
            ));
            for s in r.steps {
                out.push_str(if s { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}

/// `E_{t-1}[H_t(psi)]` under Thompson sampling, by enumerating the played
/// action and the observation.
fn expected_next_cell_entropy(inst: &BanditInstance, belief: &BeliefState, partition: &Partition) -> f64 {
    let p = belief.probs();
    let cells = partition.cells();
    let pa = crate::inference::optimal_action_distribution(belief, inst);
    let mut terms = Vec::new();
    for (a, &wa) in pa.iter().enumerate() {
        if wa <= 0.0 {
            continue;
        }
        let table = inst.outcome_table(a);
        for y in 0..table.num_outcomes() {
            let joint: Vec<f64> = cells
                .iter()
                .map(|c| csum(c.iter().map(|&i| p[i] * table.row(i)[y])))
                .collect();
            let py = csum(joint.iter().copied());
            if py <= 0.0 {
                continue;
            }
            let post: Vec<f64> = joint.iter().map(|x| x / py).collect();
            terms.push(wa * py * entropy_unchecked(&post));
        }
    }
    csum(terms)
}

struct PeriodTerms {
    row: AuditRow,
    root_term: f64,
}

fn audit_period(
    inst: &BanditInstance,
    belief: &BeliefState,
    partition: &Partition,
    run: usize,
    period: usize,
) -> Result<PeriodTerms> {
    let eps = partition.epsilon();
    let vanilla = ts_info_ratio(inst, belief)?;
    let regret = BenchmarkLaw::vanilla(belief).regret_gap(inst, belief);
    let rep = build_representation(inst, belief, partition)?;
    let law = BenchmarkLaw::compressed(belief, &rep)?;
    let ratio = law.info_ratio(inst, belief)?;
    let compressed_regret = law.regret_gap(inst, belief);
    let compressed_info = law.info_gain(inst);
    let compressed_info_psi = law.info_gain_about(inst, belief, partition);
    let ts_info_psi = ts_info_gain_about_statistic(inst, belief, partition);
    let entropy_psi = entropy_unchecked(&partition.cell_masses(belief));
    let next_entropy_psi = expected_next_cell_entropy(inst, belief, partition);

    let root_term = (ratio.ratio * compressed_info).sqrt();
    let steps = [
        regret <= compressed_regret + eps + AUDIT_TOL,
        compressed_regret <= root_term + AUDIT_TOL,
        // gamma_t <= gamma_bar is applied once gamma_bar is known
        compressed_info <= compressed_info_psi + AUDIT_TOL && compressed_info_psi <= ts_info_psi + AUDIT_TOL,
        true,
        (ts_info_psi - (entropy_psi - next_entropy_psi)).abs() <= AUDIT_TOL,
        ts_info_psi <= vanilla.denominator + AUDIT_TOL,
    ];
    Ok(PeriodTerms {
        row: AuditRow {
            run,
            period,
            regret,
            compressed_regret,
            representation_slack: regret - compressed_regret,
            compressed_ratio: ratio.ratio,
            compressed_info,
            compressed_info_psi,
            ts_info_psi,
            ts_info_theta: vanilla.denominator,
            entropy_psi,
            next_entropy_psi,
            steps,
        },
        root_term,
    })
}

struct RunAudit {
    periods: Vec<PeriodTerms>,
    realized_regret: f64,
}

fn audit_run(
    inst: &BanditInstance,
    prior: &BeliefState,
    partition: &Partition,
    horizon: usize,
    seed: u64,
    run: usize,
) -> Result<RunAudit> {
    let mut rng = stream_rng(seed, run as u64);
    let truth = sample_parameter(prior, &mut rng);
    let best = inst.mu(inst.alpha(truth), truth);
    let mut belief = prior.clone();
    let mut periods = Vec::with_capacity(horizon);
    let mut realized = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        periods.push(audit_period(inst, &belief, partition, run, t)?);
        let (_, a) = thompson_step(inst, &belief, &mut rng);
        let y = sample_index(inst.outcome_table(a).row(truth), &mut rng);
        realized.push(best - inst.mu(a, truth));
        belief = posterior_update_indexed(&belief, inst, a, y)?;
    }
    Ok(RunAudit {
        periods,
        realized_regret: csum(realized),
    })
}

/// Evaluates every step of the regret decomposition exactly at each period
/// of `runs` simulated trajectories, then compares the mean simulated regret
/// with `sqrt(gamma_bar I(theta*; psi) T) + epsilon T`.
pub fn audit_regret_chain(
    inst: &BanditInstance,
    prior: &BeliefState,
    partition: &Partition,
    horizon: usize,
    runs: usize,
    seed: u64,
) -> Result<AuditReport> {
    let m = inst.num_params();
    let n = inst.num_actions();
    let outcomes = (0..n)
        .map(|a| inst.outcome_table(a).num_outcomes())
        .max()
        .unwrap_or(1);
    let work = m.saturating_mul(n).saturating_mul(outcomes);
    if work > AUDIT_WORK_LIMIT {
        return Err(Error::GuardExceeded {
            work,
            limit: AUDIT_WORK_LIMIT,
        });
    }
    if runs == 0 {
        return Err(Error::InvalidInput("runs must be >= 1".into()));
    }
    if prior.len() != m {
        return Err(Error::InvalidInput("prior and instance sizes differ".into()));
    }
    partition.check_len(m)?;
    let worst = partition.max_intra_cell_distortion(inst);
    if worst > partition.epsilon() + CERTIFICATE_TOL {
        return Err(Error::CertificateViolated {
            distortion: worst,
            epsilon: partition.epsilon(),
        });
    }

    let audits = (0..runs)
        .into_par_iter()
        .map(|r| audit_run(inst, prior, partition, horizon, seed, r))
        .collect::<Result<Vec<_>>>()?;

    let gamma_bar = audits
        .iter()
        .flat_map(|a| a.periods.iter())
        .map(|p| p.row.compressed_ratio)
        .fold(0.0, f64::max);
    let eps = partition.epsilon();
    let info_theta_psi = entropy_unchecked(&partition.cell_masses(prior));

    let mut rows = Vec::with_capacity(runs * horizon);
    let mut expected = Vec::with_capacity(runs);
    for audit in audits {
        let mut sum_root = 0.0;
        let mut sum_info = 0.0;
        let mut sum_regret = Vec::with_capacity(horizon);
        for (idx, p) in audit.periods.into_iter().enumerate() {
            let mut row = p.row;
            let scaled = (gamma_bar * row.ts_info_psi).sqrt();
            row.steps[2] &= p.root_term <= scaled + AUDIT_TOL;
            sum_root += scaled;
            sum_info += row.ts_info_psi;
            row.steps[3] = sum_root <= (gamma_bar * (idx + 1) as f64 * sum_info).sqrt() + AUDIT_TOL;
            row.steps[5] &= row.ts_info_psi <= row.entropy_psi + AUDIT_TOL;
            sum_regret.push(row.regret);
            rows.push(row);
        }
        expected.push((csum(sum_regret), audit.realized_regret));
    }
    let chain_holds = rows.iter().all(|r| r.steps.iter().all(|&s| s));
    let bound = compressed_bound(gamma_bar, info_theta_psi, eps, horizon as f64)?;
    let mean_expected_regret = csum(expected.iter().map(|e| e.0)) / runs as f64;
    let mean_cumulative_regret = csum(expected.iter().map(|e| e.1)) / runs as f64;
    Ok(AuditReport {
        epsilon: eps,
        horizon,
        runs,
        gamma_bar,
        info_theta_psi,
        bound,
        mean_cumulative_regret,
        mean_expected_regret,
        chain_holds,
        bound_holds: mean_cumulative_regret <= bound + AUDIT_TOL && mean_expected_regret <= bound + AUDIT_TOL,
        rows,
    })
}
