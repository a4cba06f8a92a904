//! `dispersia`: run single solves, `(ε, τ)` sweeps, and the model utilities
//! from the command line.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use dispersia_core::harness::{
    compare_methods, convergence_sweep, fit_groups, regularity_sweep, with_workers, RateAxis,
    SweepConfig, SweepReport,
};
use dispersia_core::model::{
    reduce_moment, search_c0, verify_phase_lower_bound, MomentSign, PhaseSamples,
};
use dispersia_core::presets::{Preset, REFERENCE_TAU};
use dispersia_core::{solve, DispersiveModel, PotentialSpec, SolveConfig, StepperKind};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use output::PlotAxis;

#[derive(Parser)]
#[command(name = "dispersia", version, about = "Spectral solvers and convergence sweeps for linear dispersive equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write the final state.
    Solve(RunArgs),
    /// Errors against reference runs over (scheme, epsilon, tau).
    SweepConvergence(RunArgs),
    /// Distance of the solution from the free flow over epsilon.
    SweepRegularity(RunArgs),
    /// Convergence sweep across several schemes with regime flags.
    Compare(RunArgs),
    /// Reduce the two-point moment operator at frequency lambda.
    ReduceMoment(ReduceArgs),
    /// Sampled check of the phase lower bound.
    VerifyPhase(PhaseArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON configuration (a bare config or a previous run.json).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled configuration, e.g. schrodinger-a1 or kdv-a3/2.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "dispersia-out")]
    out: PathBuf,
    #[arg(long, env = "DISPERSIA_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Also write a gnuplot script next to the CSVs.
    #[arg(long)]
    emit_plots: bool,
    /// Write walltime_s as zero so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    tau: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<StepperKind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    reference_tau: Option<f64>,
    #[arg(long)]
    reference_scheme: Option<StepperKind>,
    #[arg(long)]
    deriv_order: Option<u32>,
    /// Replace the potential by R = 0.
    #[arg(long)]
    free: bool,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    kappa: u32,
    #[arg(long)]
    beta: f64,
    #[arg(long, allow_hyphen_values = true)]
    sign: MomentSign,
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long)]
    kappa: u32,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.015625)]
    epsilon: f64,
    /// Lower-order coefficients after the leading 1, e.g. `--coeffs=-1`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs: Vec<f64>,
    /// Fixed C0; searched on the ladder 1, 2, 4, ... when absent.
    #[arg(long)]
    c0: Option<f64>,
    /// Sample at random with this seed instead of on a square grid.
    #[arg(long)]
    seed: Option<u64>,
    /// Points per axis on the grid, or total samples with `--seed`.
    #[arg(long, default_value_t = 400)]
    samples: usize,
    #[arg(long, default_value_t = 4.0)]
    half_width: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A configuration problem; exits with status 1.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Some sweep cells failed; the others were written out.
#[derive(Debug)]
struct CellsFailed {
    config: bool,
    summary: String,
}

impl std::fmt::Display for CellsFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.summary)
    }
}

impl std::error::Error for CellsFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<dispersia_core::Error>() {
            return if e.is_config_error() { 1 } else { 2 };
        }
        if let Some(e) = cause.downcast_ref::<CellsFailed>() {
            return if e.config { 1 } else { 2 };
        }
        if cause.is::<ConfigError>() || cause.is::<serde_json::Error>() || cause.is::<std::io::Error>() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Solve(args) => run_solve(&args),
        Command::SweepConvergence(args) => run_sweep("sweep-convergence", &args),
        Command::SweepRegularity(args) => run_sweep("sweep-regularity", &args),
        Command::Compare(args) => run_sweep("compare", &args),
        Command::ReduceMoment(args) => run_reduce(&args),
        Command::VerifyPhase(args) => run_phase(&args),
    }
}

/// Accept either a bare configuration or a `run.json` wrapping one.
fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut value: Value =
        serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", path.display()))?;
    if value.get("command").is_some() {
        value = value
            .get_mut("config")
            .map(Value::take)
            .ok_or_else(|| config_error("`config`: run manifest has no config entry"))?;
    }
    serde_json::from_value(value).with_context(|| format!("config {}", path.display()))
}

fn preset(args: &RunArgs) -> Result<Preset> {
    let name = args
        .preset
        .as_deref()
        .ok_or_else(|| config_error("`preset`: one of --config or --preset is required"))?;
    Ok(Preset::by_name(name)?)
}

fn single(values: &[f64], field: &str) -> Result<Option<f64>> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => Err(config_error(format!("`{field}`: solve takes a single value"))),
    }
}

fn resolve_solve(args: &RunArgs) -> Result<SolveConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_config::<SolveConfig>(path)?,
        None => {
            let p = preset(args)?;
            p.solve_config(0.015625, 1e-3, StepperKind::ExponentialIntegrator)?
        }
    };
    if let Some(eps) = single(&args.epsilon, "epsilon")? {
        cfg.model = cfg.model.with_epsilon(eps)?;
    }
    if let Some(tau) = single(&args.tau, "tau")? {
        cfg.tau = tau;
    }
    match args.scheme.as_slice() {
        [] => {}
        [s] => cfg.scheme = *s,
        _ => return Err(config_error("`scheme`: solve takes a single scheme")),
    }
    if let Some(alpha) = args.alpha {
        cfg.model = cfg.model.with_alpha(alpha)?;
    }
    if args.free {
        cfg.potential = PotentialSpec::zero();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn manifest(command: &str, args: &RunArgs, config: &impl Serialize) -> Value {
    json!({
        "command": command,
        "workers": args.workers,
        "emit_plots": args.emit_plots,
        "config": config,
    })
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("`out`: cannot create {}", dir.display()))
}

fn run_solve(args: &RunArgs) -> Result<()> {
    let cfg = resolve_solve(args)?;
    prepare_out(&args.out)?;
    let initial = cfg.initial.sample(&cfg.grid)?;
    let out = solve(&cfg)?;
    output::write_state(&args.out.join("final_state.csv"), &out.final_state)?;
    output::write_json(&args.out.join("run.json"), &manifest("solve", args, &cfg))?;
    let summary = json!({
        "steps": out.steps,
        "z_final": cfg.z_final,
        "x_norm_initial": initial.x_norm(0),
        "x_norm_final": out.final_state.x_norm(0),
        "l2_norm_final": out.final_state.l2_norm(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn resolve_sweep(command: &str, args: &RunArgs) -> Result<SweepConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_config::<SweepConfig>(path)?,
        None => {
            let p = preset(args)?;
            let mut cfg = match command {
                "sweep-regularity" => p.regularity_sweep(args.deriv_order.unwrap_or(0))?,
                _ => p.convergence_sweep()?,
            };
            if command == "compare" {
                cfg.schemes = StepperKind::ALL.to_vec();
            }
            cfg
        }
    };
    if !args.epsilon.is_empty() {
        cfg.epsilons = args.epsilon.clone();
    }
    if !args.tau.is_empty() {
        cfg.taus = args.tau.clone();
    }
    if !args.scheme.is_empty() {
        cfg.schemes = args.scheme.clone();
    }
    if let Some(alpha) = args.alpha {
        cfg.base.model = cfg.base.model.with_alpha(alpha)?;
    }
    if let Some(t) = args.reference_tau {
        cfg.reference_tau = t;
    }
    if args.reference_scheme.is_some() {
        cfg.reference_scheme = args.reference_scheme;
    }
    if let Some(j) = args.deriv_order {
        cfg.deriv_order = j;
    }
    if args.free {
        cfg.base.potential = PotentialSpec::zero();
    }
    if command == "sweep-regularity" && args.config.is_none() && args.reference_tau.is_none() {
        cfg.reference_tau = REFERENCE_TAU;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_sweep(command: &str, args: &RunArgs) -> Result<()> {
    let cfg = resolve_sweep(command, args)?;
    prepare_out(&args.out)?;
    let report: SweepReport = with_workers(args.workers, || match command {
        "sweep-regularity" => regularity_sweep(&cfg),
        "compare" => compare_methods(&cfg),
        _ => convergence_sweep(&cfg),
    })??;

    let (axes, plot_axis) = match command {
        "sweep-regularity" => (vec![RateAxis::Epsilon], PlotAxis::Epsilon),
        _ => (vec![RateAxis::Tau, RateAxis::Epsilon], PlotAxis::Tau),
    };
    let fits: Vec<_> = axes.into_iter().flat_map(|a| fit_groups(&report.records, a)).collect();
    output::write_results(&args.out.join("results.csv"), &report.records, !args.no_timing)?;
    output::write_rates(&args.out.join("rates.csv"), &fits)?;
    output::write_json(&args.out.join("run.json"), &manifest(command, args, &cfg))?;
    if args.emit_plots {
        output::write_plot(&args.out.join("plot.gp"), &report.records, plot_axis)?;
    }
    for g in &fits {
        println!("{}: slope {:.4} (r^2 {:.4})", g.key, g.fit.slope, g.fit.r_squared);
    }
    if report.failures.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = report.failures.iter().map(|f| f.to_string()).collect();
    Err(CellsFailed {
        config: report.failures.iter().any(|f| f.config_error),
        summary: format!("{} sweep cell(s) failed:\n  {}", lines.len(), lines.join("\n  ")),
    }
    .into())
}

fn run_reduce(args: &ReduceArgs) -> Result<()> {
    let red = reduce_moment(args.kappa, args.beta, args.sign, args.lambda)?;
    let c: serde_json::Map<String, Value> =
        red.coeffs.iter().map(|(j, c)| (j.to_string(), json!(c))).collect();
    let out = json!({
        "alpha": red.alpha,
        "c": c,
        "signFactor": red.sign_factor,
        "droppedConstant": red.dropped_constant,
        "parity": red.parity,
    });
    println!("{}", serde_json::to_string(&out)?);
    Ok(())
}

fn run_phase(args: &PhaseArgs) -> Result<()> {
    let mut coeffs = vec![1.0];
    coeffs.extend(&args.coeffs);
    if args.coeffs.is_empty() {
        coeffs.resize(DispersiveModel::coeff_count(args.kappa), 0.0);
    }
    let model = DispersiveModel::new(args.kappa, coeffs, args.alpha, args.epsilon)?;
    let hw = args.half_width;
    let samples = match args.seed {
        Some(seed) => PhaseSamples::Random {
            xi1: (-hw, hw),
            xi2: (-hw, hw),
            count: args.samples,
            seed,
        },
        None => PhaseSamples::square_grid(hw, args.samples),
    };
    let (c0, threshold, report) = match args.c0 {
        Some(c0) => (c0, None, verify_phase_lower_bound(&model, c0, &samples)?),
        None => {
            let found = search_c0(&model, &samples, None)?;
            (found.c0, Some(found.threshold), found.report)
        }
    };
    let out = json!({
        "kappa": model.kappa(),
        "coeffs": model.coeffs(),
        "alpha": model.alpha(),
        "epsilon": model.epsilon(),
        "seed": args.seed,
        "c0": c0,
        "threshold": threshold,
        "min_ratio": report.min_ratio,
        "worst_point": report.worst_point,
        "admissible": report.admissible,
        "degenerate": report.degenerate,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    if let Some(dir) = &args.out {
        prepare_out(dir)?;
        output::write_json(&dir.join("run.json"), &json!({ "command": "verify-phase", "result": out }))?;
    }
    if report.min_ratio > 0.0 {
        Ok(())
    } else {
        Err(anyhow!("minimum ratio {} is not positive", report.min_ratio))
    }
}
