//! Command-line experiment runner.
//!
//! Every subcommand takes its parameters as flags or from a JSON file given
//! by `--config` (flags win). Output goes to `--out` or stdout. Errors are a
//! single JSON line on stderr. Exit codes: 0 success, 1 a checked criterion
//! failed, 2 bad configuration or input.

mod svg;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    c_phi, compressed_bound, entropy_bound, glm_bound, linear_bound, logistic_bound,
    logistic_epsilon_out_of_range, partition_count_bounds, BoundInputs, BoundReport, PartitionKind,
};
use crate::compression::{
    build_partition_glm, build_partition_linear, build_partition_logistic, statistic_mutual_information,
    Partition,
};
use crate::error::{Error, Result};
use crate::inference::BeliefState;
use crate::information::ts_info_ratio;
use crate::model::{sample_instance, BanditInstance, Link, OutcomeModel};
use crate::policy::{audit_regret_chain, simulate_ts, RegretEstimator};
use crate::stream_rng;

/// Exit status when a checked criterion does not hold.
pub const EXIT_VIOLATED: i32 = 1;
/// Exit status for configuration and input errors.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "tsrd",
    version,
    about = "Information-ratio and regret experiments for Thompson sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact information ratios of Thompson sampling on random instances.
    IrSweep(Invocation<SweepParams>),
    /// Monte Carlo Bayesian regret against the closed-form bound.
    Regret(Invocation<RegretParams>),
    /// Build a certified partition and report its size.
    Partition(Invocation<PartitionParams>),
    /// Evaluate a closed-form regret bound.
    Bounds(Invocation<BoundsParams>),
    /// Check every step of the compressed regret argument along simulated runs.
    Audit(Invocation<AuditParams>),
}

#[derive(Args, Debug)]
struct Invocation<P: Args> {
    #[command(flatten)]
    params: P,
    /// JSON file with default parameter values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (all cores if absent).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    Linear,
    Logistic,
    Glm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Which {
    Entropy,
    Compressed,
    Linear,
    Glm,
    Logistic,
}

/// Copies every unset field of `$flags` from `$file`.
macro_rules! overlay {
    ($flags:expr, $file:expr; $($f:ident),+ $(,)?) => {
        $( if $flags.$f.is_none() { $flags.$f = $file.$f; } )+
    };
}

trait Params: Sized + Send + for<'de> Deserialize<'de> {
    fn overlay(&mut self, file: Self);
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepParams {
    /// Dimensions, comma separated [default: 2..=20].
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    /// Inverse temperatures, comma separated [default: 0.1,1,10,100].
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Outcome half-spread for the GLM model [default: a quarter of the slack left by the link's range].
    #[arg(long)]
    eta: Option<f64>,
    /// Actions per instance [default: 100].
    #[arg(long)]
    n: Option<usize>,
    /// Parameters per instance [default: 100].
    #[arg(long)]
    m: Option<usize>,
    /// Instances per (d, beta) cell [default: 100].
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Also write an SVG scatter of ratio against d.
    #[arg(long)]
    svg: Option<PathBuf>,
}

impl Params for SweepParams {
    fn overlay(&mut self, file: Self) {
        overlay!(self, file; d, beta, model, eta, n, m, instances, seed, format, svg);
    }
}

/// Instance source shared by the single-instance subcommands.
struct InstanceParams<'a> {
    model: Option<ModelKind>,
    beta: Option<f64>,
    eta: Option<f64>,
    d: Option<usize>,
    n: Option<usize>,
    m: Option<usize>,
    instance: Option<&'a Path>,
}

macro_rules! instance_params {
    ($p:expr) => {
        InstanceParams {
            model: $p.model,
            beta: $p.beta,
            eta: $p.eta,
            d: $p.d,
            n: $p.n,
            m: $p.m,
            instance: $p.instance.as_deref(),
        }
    };
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RegretParams {
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Read the instance from a JSON file instead of sampling it.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Horizon [default: 500].
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t: Option<usize>,
    /// Monte Carlo runs [default: 300].
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_enum)]
    estimator: Option<RegretEstimator>,
    /// Margin used by the logistic bound.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Params for RegretParams {
    fn overlay(&mut self, file: Self) {
        overlay!(self, file; model, beta, eta, d, n, m, instance);
        overlay!(self, file; t, runs, estimator, delta, seed, format);
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PartitionParams {
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Read the instance from a JSON file instead of sampling it.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Classification margin; selects the layered logistic builder.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Params for PartitionParams {
    fn overlay(&mut self, file: Self) {
        overlay!(self, file; model, beta, eta, d, n, m, instance);
        overlay!(self, file; epsilon, delta, seed, format);
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BoundsParams {
    #[arg(long, value_enum)]
    which: Option<Which>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    c_phi: Option<f64>,
    #[arg(long)]
    entropy: Option<f64>,
    #[arg(long)]
    gamma_bar: Option<f64>,
    #[arg(long)]
    info: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Params for BoundsParams {
    fn overlay(&mut self, file: Self) {
        overlay!(self, file; which, d, t, epsilon, beta, delta, c_phi, entropy, gamma_bar, info, format);
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AuditParams {
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Read the instance from a JSON file instead of sampling it.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Horizon [default: 10].
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t: Option<usize>,
    /// Simulated trajectories [default: 20].
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Params for AuditParams {
    fn overlay(&mut self, file: Self) {
        overlay!(self, file; model, beta, eta, d, n, m, instance);
        overlay!(self, file; t, runs, epsilon, delta, seed, format);
    }
}

/// What a subcommand produced.
struct Outcome {
    body: String,
    ok: bool,
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: String,
    kind: &'a str,
}

fn error_line(message: String, kind: &str) -> String {
    serde_json::to_string(&ErrorLine { error: message, kind }).unwrap_or_else(|_| "{}".into())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "{}",
                error_line(first.trim_start_matches("error: ").to_string(), "Usage")
            );
            return EXIT_CONFIG;
        }
    };
    match dispatch(cli.command) {
        Ok(ok) if ok => 0,
        Ok(_) => EXIT_VIOLATED,
        Err(e) => {
            eprintln!("{}", error_line(e.to_string(), e.kind()));
            EXIT_CONFIG
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::IrSweep(inv) => execute(inv, cmd_ir_sweep),
        Command::Regret(inv) => execute(inv, cmd_regret),
        Command::Partition(inv) => execute(inv, cmd_partition),
        Command::Bounds(inv) => execute(inv, cmd_bounds),
        Command::Audit(inv) => execute(inv, cmd_audit),
    }
}

fn execute<P: Params + Args>(inv: Invocation<P>, cmd: fn(P) -> Result<Outcome>) -> Result<bool> {
    let mut params = inv.params;
    if let Some(path) = &inv.config {
        let file: P = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))?;
        params.overlay(file);
    }
    let outcome = match inv.threads {
        Some(0) => return Err(Error::InvalidInput("threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))?
            .install(|| cmd(params))?,
        None => cmd(params)?,
    };
    match &inv.out {
        Some(path) => fs::write(path, &outcome.body)?,
        None => print!("{}", outcome.body),
    }
    Ok(outcome.ok)
}

fn make_model(kind: ModelKind, beta: Option<f64>, eta: Option<f64>) -> Result<OutcomeModel> {
    Ok(match kind {
        ModelKind::Linear => {
            if beta.is_some() || eta.is_some() {
                return Err(Error::InvalidInput(
                    "--beta/--eta do not apply to the linear model".into(),
                ));
            }
            OutcomeModel::LinearBinary
        }
        ModelKind::Logistic => {
            if eta.is_some() {
                return Err(Error::InvalidInput(
                    "--eta does not apply to the logistic model".into(),
                ));
            }
            OutcomeModel::Logistic {
                beta: beta.unwrap_or(1.0),
            }
        }
        ModelKind::Glm => {
            let link = Link::Logistic {
                beta: beta.unwrap_or(1.0),
            };
            // half the largest spread that keeps outcomes inside a unit range
            let spread = link.eval(1.0) - link.eval(-1.0);
            OutcomeModel::Glm {
                link,
                eta: eta.unwrap_or((1.0 - spread) / 4.0),
            }
        }
    })
}

fn load_instance(path: &Path) -> Result<BanditInstance> {
    BanditInstance::from_json(&fs::read_to_string(path)?)
}

/// Reads `--instance`, or samples one from stream 0 of `seed`.
fn resolve_instance(
    p: &InstanceParams<'_>,
    seed: u64,
    defaults: (ModelKind, usize, usize, usize),
) -> Result<BanditInstance> {
    if let Some(path) = p.instance {
        if p.model.is_some()
            || p.beta.is_some()
            || p.eta.is_some()
            || p.d.is_some()
            || p.n.is_some()
            || p.m.is_some()
        {
            return Err(Error::InvalidInput(
                "--instance cannot be combined with --model/--beta/--eta/--d/--n/--m".into(),
            ));
        }
        return load_instance(path);
    }
    let (model, d, n, m) = defaults;
    let model = make_model(p.model.unwrap_or(model), p.beta, p.eta)?;
    sample_instance(
        &mut stream_rng(seed, 0),
        p.d.unwrap_or(d),
        p.n.unwrap_or(n),
        p.m.unwrap_or(m),
        model,
    )
}

fn dirichlet_belief<R: rand::Rng + ?Sized>(rng: &mut R, m: usize) -> Result<BeliefState> {
    let w: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    BeliefState::from_weights(w)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Clone, Debug, Serialize)]
struct SweepRow {
    d: usize,
    /// Absent for the linear model.
    beta: Option<f64>,
    instance_id: usize,
    numerator: f64,
    denominator_nats: f64,
    ratio: f64,
    bound_d_over_2: f64,
    violated: bool,
}

const SWEEP_TOL: f64 = 1e-9;

fn cmd_ir_sweep(p: SweepParams) -> Result<Outcome> {
    let dims = p.d.unwrap_or_else(|| (2..=20).collect());
    let kind = p.model.unwrap_or(ModelKind::Logistic);
    let betas: Vec<Option<f64>> = match kind {
        ModelKind::Linear => {
            if p.beta.is_some() || p.eta.is_some() {
                return Err(Error::InvalidInput(
                    "--beta/--eta do not apply to the linear model".into(),
                ));
            }
            vec![None]
        }
        _ => p
            .beta
            .unwrap_or_else(|| vec![0.1, 1.0, 10.0, 100.0])
            .into_iter()
            .map(Some)
            .collect(),
    };
    let (n, m) = (p.n.unwrap_or(100), p.m.unwrap_or(100));
    let instances = p.instances.unwrap_or(100);
    let seed = p.seed.unwrap_or(0);
    if dims.contains(&0) || n == 0 || m == 0 {
        return Err(Error::InvalidInput("d, n and m must be >= 1".into()));
    }
    if instances >= 1 << 32 {
        return Err(Error::InvalidInput("instances must be < 2^32".into()));
    }

    let mut cells = Vec::new();
    for &d in &dims {
        for &beta in &betas {
            cells.push((d, beta, make_model(kind, beta, p.eta)?));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..instances).map(move |i| (c, i)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(c, i)| {
            let (d, beta, model) = cells[c];
            let mut rng = stream_rng(seed, ((c as u64) << 32) | i as u64);
            let inst = sample_instance(&mut rng, d, n, m, model)?;
            let belief = dirichlet_belief(&mut rng, m)?;
            let r = ts_info_ratio(&inst, &belief)?;
            let bound = d as f64 / 2.0;
            Ok(SweepRow {
                d,
                beta,
                instance_id: i,
                numerator: r.numerator,
                denominator_nats: r.denominator,
                ratio: r.ratio,
                bound_d_over_2: bound,
                violated: r.ratio > bound + SWEEP_TOL,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(path) = &p.svg {
        let pts: Vec<(usize, f64)> = rows.iter().map(|r| (r.d, r.ratio)).collect();
        fs::write(path, svg::ratio_scatter(&pts))?;
    }
    let ok = rows.iter().all(|r| !r.violated);
    let body = match p.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&rows)?,
        Format::Csv => {
            let mut s =
                String::from("d,beta,instance_id,numerator,denominator_nats,ratio,bound_d_over_2,violated\n");
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.d,
                    r.beta.map(|b| b.to_string()).unwrap_or_default(),
                    r.instance_id,
                    r.numerator,
                    r.denominator_nats,
                    r.ratio,
                    r.bound_d_over_2,
                    r.violated
                ));
            }
            s
        }
    };
    Ok(Outcome { body, ok })
}

/// Closed-form regret bound through period `t` for the instance's model.
fn regret_bound(inst: &BanditInstance, delta: Option<f64>, t: u64) -> Result<f64> {
    let d = inst.dim();
    match inst.model() {
        OutcomeModel::LinearBinary => linear_bound(d, t),
        OutcomeModel::Glm { .. } => {
            let (lo, hi) = inst.inner_product_range();
            glm_bound(d, t, c_phi(inst.model(), lo, hi)?)
        }
        OutcomeModel::Logistic { beta } => {
            let delta =
                delta.ok_or_else(|| Error::InvalidInput("the logistic bound needs --delta".into()))?;
            Ok(logistic_bound(d, t, *beta, delta)?.primary)
        }
    }
}

fn check_margin(inst: &BanditInstance, delta: f64) -> Result<()> {
    let margin = inst.margin();
    if margin < delta {
        return Err(Error::MarginViolated { margin, delta });
    }
    Ok(())
}

#[derive(Serialize)]
struct RegretOutput<'a> {
    model: &'static str,
    trace: &'a crate::policy::RegretTrace,
    bound: &'a [f64],
    within_bound: bool,
}

fn cmd_regret(p: RegretParams) -> Result<Outcome> {
    let seed = p.seed.unwrap_or(0);
    let inst = resolve_instance(&instance_params!(p), seed, (ModelKind::Linear, 3, 30, 30))?;
    let horizon = p.t.unwrap_or(500);
    let runs = p.runs.unwrap_or(300);
    match (inst.model(), p.delta) {
        (OutcomeModel::Logistic { .. }, Some(delta)) => check_margin(&inst, delta)?,
        (OutcomeModel::Logistic { .. }, None) => {
            return Err(Error::InvalidInput("the logistic model needs --delta".into()))
        }
        (_, Some(_)) => {
            return Err(Error::InvalidInput(
                "--delta only applies to the logistic model".into(),
            ))
        }
        _ => {}
    }
    let prior = BeliefState::uniform(inst.num_params());
    let trace = simulate_ts(
        &inst,
        &prior,
        horizon,
        runs,
        seed,
        p.estimator.unwrap_or_default(),
    )?;
    let bound = (1..=horizon as u64)
        .map(|t| regret_bound(&inst, p.delta, t))
        .collect::<Result<Vec<_>>>()?;
    let ok = bound.last().is_none_or(|&b| trace.cumulative <= b);
    let body = match p.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&RegretOutput {
            model: inst.model().name(),
            trace: &trace,
            bound: &bound,
            within_bound: ok,
        })?,
        Format::Csv => {
            let mut s = String::from("t,mean_regret,cum_regret,std_err,bound_value\n");
            for t in 0..horizon {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    t + 1,
                    trace.per_period_regret[t],
                    trace.cumulative_regret[t],
                    trace.std_errors[t],
                    bound[t]
                ));
            }
            s
        }
    };
    Ok(Outcome { body, ok })
}

#[derive(Serialize)]
struct PartitionReport {
    model: &'static str,
    #[serde(rename = "K")]
    k: usize,
    epsilon: f64,
    max_intra_cell_distortion: f64,
    /// Closed-form cell count for the model.
    formula_bound: f64,
    /// Packing bound on the greedy covering actually run.
    cover_bound: f64,
    #[serde(rename = "I_theta_psi_nats")]
    i_theta_psi_nats: f64,
    cell_of: Vec<usize>,
}

fn build_partition(inst: &BanditInstance, epsilon: f64, delta: Option<f64>) -> Result<Partition> {
    match (inst.model(), delta) {
        (OutcomeModel::LinearBinary, None) => build_partition_linear(inst, epsilon),
        (OutcomeModel::Glm { .. }, None) => build_partition_glm(inst, epsilon),
        (OutcomeModel::Logistic { .. }, Some(delta)) => build_partition_logistic(inst, epsilon, delta),
        // without a margin the link-slope covering still applies
        (OutcomeModel::Logistic { .. }, None) => build_partition_glm(inst, epsilon),
        (_, Some(_)) => Err(Error::InvalidInput(
            "--delta only applies to the logistic model".into(),
        )),
    }
}

fn cmd_partition(p: PartitionParams) -> Result<Outcome> {
    let seed = p.seed.unwrap_or(0);
    let inst = resolve_instance(&instance_params!(p), seed, (ModelKind::Linear, 2, 100, 100))?;
    let epsilon = p.epsilon.unwrap_or(0.1);
    let partition = build_partition(&inst, epsilon, p.delta)?;
    let d = inst.dim();
    let kind = match *inst.model() {
        OutcomeModel::LinearBinary => PartitionKind::Linear,
        OutcomeModel::Logistic { beta } if p.delta.is_some() => PartitionKind::Logistic {
            beta,
            delta: p.delta.unwrap_or_default(),
        },
        OutcomeModel::Glm { .. } | OutcomeModel::Logistic { .. } => {
            let (lo, hi) = inst.inner_product_range();
            PartitionKind::Glm {
                c_phi: c_phi(inst.model(), lo, hi)?,
            }
        }
    };
    let prior = BeliefState::uniform(inst.num_params());
    let report = PartitionReport {
        model: inst.model().name(),
        k: partition.num_cells(),
        epsilon,
        max_intra_cell_distortion: partition.max_intra_cell_distortion(&inst),
        formula_bound: partition_count_bounds(d, epsilon, kind)?,
        cover_bound: partition.greedy_cover_bound(d),
        i_theta_psi_nats: statistic_mutual_information(&prior, &partition)?,
        cell_of: partition.cell_of().to_vec(),
    };
    let body = match p.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => format!(
            "model,K,epsilon,max_intra_cell_distortion,formula_bound,cover_bound,I_theta_psi_nats\n{},{},{},{},{},{},{}\n",
            report.model,
            report.k,
            report.epsilon,
            report.max_intra_cell_distortion,
            report.formula_bound,
            report.cover_bound,
            report.i_theta_psi_nats
        ),
    };
    Ok(Outcome { body, ok: true })
}

fn require<T: Copy>(v: Option<T>, name: &str, which: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidInput(format!("--which {which} needs --{name}")))
}

fn bound_reports(p: &BoundsParams) -> Result<Vec<BoundReport>> {
    let which = p
        .which
        .ok_or_else(|| Error::InvalidInput("--which is required".into()))?;
    let name = which
        .to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default();
    let allowed: &[&str] = match which {
        Which::Entropy => &["gamma_bar", "entropy", "T"],
        Which::Compressed => &["gamma_bar", "info", "epsilon", "T"],
        Which::Linear => &["d", "T"],
        Which::Glm => &["d", "T", "c_phi"],
        Which::Logistic => &["d", "T", "beta", "delta"],
    };
    let given = [
        ("d", p.d.is_some()),
        ("T", p.t.is_some()),
        ("epsilon", p.epsilon.is_some()),
        ("beta", p.beta.is_some()),
        ("delta", p.delta.is_some()),
        ("c_phi", p.c_phi.is_some()),
        ("entropy", p.entropy.is_some()),
        ("gamma_bar", p.gamma_bar.is_some()),
        ("info", p.info.is_some()),
    ];
    for (flag, set) in given {
        if set && !allowed.contains(&flag) {
            return Err(Error::InvalidInput(format!(
                "--{flag} does not apply to --which {name}"
            )));
        }
    }
    let t = require(p.t, "T", &name)?;
    let inputs = BoundInputs {
        d: p.d,
        t: p.t,
        epsilon: p.epsilon,
        beta: p.beta,
        delta: p.delta,
        c_phi: p.c_phi,
        entropy: p.entropy,
        gamma_bar: p.gamma_bar,
        info: p.info,
    };
    let report = |name: &str, value: f64, notes: Vec<String>| BoundReport {
        name: name.to_string(),
        value,
        inputs: inputs.clone(),
        notes,
    };
    Ok(match which {
        Which::Entropy => vec![report(
            "entropy",
            entropy_bound(
                require(p.gamma_bar, "gamma_bar", &name)?,
                require(p.entropy, "entropy", &name)?,
                t as f64,
            )?,
            vec![],
        )],
        Which::Compressed => vec![report(
            "compressed",
            compressed_bound(
                require(p.gamma_bar, "gamma_bar", &name)?,
                require(p.info, "info", &name)?,
                require(p.epsilon, "epsilon", &name)?,
                t as f64,
            )?,
            vec![],
        )],
        Which::Linear => vec![report(
            "linear",
            linear_bound(require(p.d, "d", &name)?, t)?,
            vec![],
        )],
        Which::Glm => vec![report(
            "glm",
            glm_bound(require(p.d, "d", &name)?, t, require(p.c_phi, "c_phi", &name)?)?,
            vec![],
        )],
        Which::Logistic => {
            let d = require(p.d, "d", &name)?;
            let beta = require(p.beta, "beta", &name)?;
            let delta = require(p.delta, "delta", &name)?;
            let b = logistic_bound(d, t, beta, delta)?;
            let notes = if logistic_epsilon_out_of_range(d, t, beta, delta) {
                vec!["epsilon = d/sqrt(2T) is not below phi(delta) - 1/2; T is too small for the partition argument".to_string()]
            } else {
                vec![]
            };
            vec![
                report("logistic", b.primary, notes.clone()),
                report("logistic_simplified", b.simplified, notes),
            ]
        }
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_bounds(p: BoundsParams) -> Result<Outcome> {
    let reports = bound_reports(&p)?;
    let body = match p.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&reports)?,
        Format::Csv => {
            let mut s =
                String::from("name,value,d,T,epsilon,beta,delta,c_phi,entropy,gamma_bar,info,notes\n");
            for r in &reports {
                let i = &r.inputs;
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.name,
                    r.value,
                    opt(i.d),
                    opt(i.t),
                    opt(i.epsilon),
                    opt(i.beta),
                    opt(i.delta),
                    opt(i.c_phi),
                    opt(i.entropy),
                    opt(i.gamma_bar),
                    opt(i.info),
                    r.notes.join("; ").replace(',', ";")
                ));
            }
            s
        }
    };
    Ok(Outcome { body, ok: true })
}

fn cmd_audit(p: AuditParams) -> Result<Outcome> {
    let seed = p.seed.unwrap_or(0);
    let inst = resolve_instance(&instance_params!(p), seed, (ModelKind::Linear, 2, 6, 6))?;
    let epsilon = p.epsilon.unwrap_or(0.1);
    let partition = build_partition(&inst, epsilon, p.delta)?;
    let prior = BeliefState::uniform(inst.num_params());
    let report = audit_regret_chain(
        &inst,
        &prior,
        &partition,
        p.t.unwrap_or(10),
        p.runs.unwrap_or(20),
        seed,
    )?;
    let body = match p.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&report)?,
        Format::Csv => report.to_csv(),
    };
    Ok(Outcome {
        body,
        ok: report.passed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(args: &[&str]) -> Result<Vec<BoundReport>> {
        let mut full = vec!["tsrd", "bounds"];
        full.extend_from_slice(args);
        match Cli::try_parse_from(full).unwrap().command {
            Command::Bounds(inv) => bound_reports(&inv.params),
            _ => unreachable!(),
        }
    }

    #[test]
    fn bounds_dispatch() {
        let r = bounds(&["--which", "linear", "--d", "10", "--T", "10000"]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].value - 1953.5).abs() < 0.1);
        let r = bounds(&[
            "--which", "logistic", "--beta", "1e6", "--delta", "0.5", "--d", "2", "--T", "100",
        ])
        .unwrap();
        assert_eq!(r.len(), 2);
        let target = 4.0 * (100.0 * 3f64.ln()).sqrt();
        assert!((r[0].value - target).abs() / target < 1e-3);
    }

    #[test]
    fn bounds_rejects_bad_combinations() {
        assert!(bounds(&["--which", "linear", "--d", "2", "--T", "5", "--beta", "1"]).is_err());
        assert!(bounds(&["--which", "glm", "--d", "2", "--T", "5"]).is_err());
        assert!(bounds(&["--d", "2", "--T", "5"]).is_err());
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let mut flags = BoundsParams {
            d: Some(4),
            ..Default::default()
        };
        let file: BoundsParams = serde_json::from_str(r#"{"which": "linear", "d": 2, "T": 9}"#).unwrap();
        flags.overlay(file);
        assert_eq!(
            (flags.which, flags.d, flags.t),
            (Some(Which::Linear), Some(4), Some(9))
        );
        assert!(serde_json::from_str::<BoundsParams>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn instance_fields_in_config() {
        let p: RegretParams =
            serde_json::from_str(r#"{"model": "linear", "d": 3, "T": 5, "runs": 2}"#).unwrap();
        assert_eq!(p.model, Some(ModelKind::Linear));
        assert_eq!((p.d, p.t, p.runs), (Some(3), Some(5), Some(2)));
    }

    #[test]
    fn error_line_is_single_line_json() {
        let s = error_line("bad\nthing".into(), "InvalidInput");
        assert!(!s.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["kind"], "InvalidInput");
    }
}
