//! Batch command-line interface: simulate trajectories, fit parameters,
//! regenerate the benchmark table, inspect Fisher information, and export
//! Boolean-model snapshots.
//!
//! Exit codes: 0 success, 2 usage or flag validation, 3 unreadable or
//! invalid input data, 4 optimizer non-convergence (the report is still
//! written).

use clap::{Args, Parser, Subcommand};
use sgp::cir::CirParams;
use sgp::dataio::{
    self, fit_report_to_string, snapshot_to_string, trajectory_from_str, SnapshotFormat,
};
use sgp::estimate::{fit_full, FitOptions, FixedParam, ParamBounds};
use sgp::idproc::{self, IdParams};
use sgp::likelihood::{c_theta, mark_fisher_block, FixedMark, Regime};
use sgp::sgmodel::{
    boolean_snapshot, simulate, InitMode, MarkScheme, ModelParams, SamplingGrid, Trajectory,
    WindowSpec,
};
use sgp::table1::{run_table1, Table1Config, Table1Row, PARAM_NAMES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sgp",
    version,
    about = "Stochastic growth process: simulation and maximum-likelihood fitting"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a trajectory and write it as a trajectory file.
    Simulate(SimulateArgs),
    /// Fit model parameters to a trajectory file.
    Fit(FitArgs),
    /// Regenerate the benchmark simulation table.
    Table1(Table1Args),
    /// Print the asymptotic Fisher-information report for given parameters.
    Fisher(FisherArgs),
    /// Export the Boolean-model snapshot at one sampling time.
    Snapshot(SnapshotArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    capacity: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    width: f64,
    #[arg(long, default_value_t = 1.0)]
    height: f64,
    /// Equidistant grid spacing (with --steps); exclusive with --times.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of equidistant sampling times T_k = k·delta.
    #[arg(long)]
    steps: Option<usize>,
    /// Explicit comma-separated sampling times; exclusive with --delta.
    #[arg(long)]
    times: Option<String>,
    /// Simulation horizon; defaults to the last sampling time.
    #[arg(long)]
    horizon: Option<f64>,
    /// fixed:<v> or stationary
    #[arg(long, default_value = "fixed:0.1", value_parser = parse_init)]
    init: InitMode,
    /// exact or euler:<dt>
    #[arg(long, default_value = "exact", value_parser = parse_scheme)]
    mark_scheme: MarkScheme,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Trajectory file to fit.
    #[arg(long = "in")]
    input: PathBuf,
    /// stationary or nonstationary
    #[arg(long, default_value = "nonstationary", value_parser = parse_regime)]
    regime: Regime,
    /// Common initial mark (nonstationary regime).
    #[arg(long, default_value_t = 0.1)]
    m0: f64,
    /// lambda:<v>, sigma:<v>, or none
    #[arg(long, default_value = "none", value_parser = parse_fix)]
    fix: FixedParam,
    /// Replace the first-observation likelihood part by zero while fitting.
    #[arg(long)]
    drop_l2: bool,
    /// Require asymptotic confidence intervals in the report.
    #[arg(long)]
    ci: bool,
    /// Override search bounds: name=lo:hi pairs, comma-separated
    /// (names: lambda, capacity, sigma, alpha, mu).
    #[arg(long)]
    bounds: Option<String>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Table1Args {
    /// Comma-separated subset of rows 1..=4.
    #[arg(long, default_value = "1,2,3,4")]
    rows: String,
    #[arg(long, default_value_t = 30)]
    reps: u32,
    #[arg(long, default_value_t = 20_240_001)]
    seed: u64,
    /// exact or euler:<dt>
    #[arg(long, default_value = "exact", value_parser = parse_scheme)]
    scheme: MarkScheme,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FisherArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    capacity: f64,
    #[arg(long)]
    sigma: f64,
    /// Total arrival rate α·ν(W).
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    delta: f64,
    /// lambda or sigma; both variants are printed when omitted.
    #[arg(long, value_parser = parse_fisher_fix)]
    fix: Option<FixedMark>,
    /// Tail tolerance for the series constant Ξ.
    #[arg(long, default_value_t = 1e-10)]
    xi_tol: f64,
}

#[derive(Args)]
struct SnapshotArgs {
    /// Trajectory file to read.
    #[arg(long = "in")]
    input: PathBuf,
    /// 1-based sampling-time index.
    #[arg(long)]
    time_index: usize,
    /// csv or svg
    #[arg(long, default_value = "csv")]
    format: String,
    /// Radius display scale (svg only).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_init(s: &str) -> Result<InitMode, String> {
    match s {
        "stationary" => Ok(InitMode::Stationary),
        _ => match s.strip_prefix("fixed:") {
            Some(v) => v
                .parse::<f64>()
                .map(InitMode::Fixed)
                .map_err(|_| format!("--init fixed value is not a number: {v:?}")),
            None => Err(format!("--init must be fixed:<v> or stationary, got {s:?}")),
        },
    }
}

fn parse_scheme(s: &str) -> Result<MarkScheme, String> {
    match s {
        "exact" => Ok(MarkScheme::Exact),
        _ => match s.strip_prefix("euler:") {
            Some(v) => {
                let step: f64 = v
                    .parse()
                    .map_err(|_| format!("euler step is not a number: {v:?}"))?;
                Ok(MarkScheme::Euler { step })
            }
            None => Err(format!("mark scheme must be exact or euler:<dt>, got {s:?}")),
        },
    }
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    match s {
        "stationary" => Ok(Regime::Stationary),
        "nonstationary" => Ok(Regime::Nonstationary),
        _ => Err(format!("--regime must be stationary or nonstationary, got {s:?}")),
    }
}

fn parse_fix(s: &str) -> Result<FixedParam, String> {
    if s == "none" {
        return Ok(FixedParam::None);
    }
    let (name, v) = s
        .split_once(':')
        .ok_or_else(|| format!("--fix must be lambda:<v>, sigma:<v>, or none, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|_| format!("--fix value is not a number: {v:?}"))?;
    match name {
        "lambda" => Ok(FixedParam::LambdaKnown(v)),
        "sigma" => Ok(FixedParam::SigmaKnown(v)),
        _ => Err(format!("--fix parameter must be lambda or sigma, got {name:?}")),
    }
}

fn parse_fisher_fix(s: &str) -> Result<FixedMark, String> {
    match s {
        "lambda" => Ok(FixedMark::LambdaKnown),
        "sigma" => Ok(FixedMark::SigmaKnown),
        _ => Err(format!("--fix must be lambda or sigma, got {s:?}")),
    }
}

fn parse_bounds(spec: &str) -> Result<ParamBounds, String> {
    let mut b = ParamBounds::default();
    for part in spec.split(',') {
        let (name, range) = part
            .split_once('=')
            .ok_or_else(|| format!("--bounds entry must be name=lo:hi, got {part:?}"))?;
        let (lo, hi) = range
            .split_once(':')
            .ok_or_else(|| format!("--bounds range must be lo:hi, got {range:?}"))?;
        let lo: f64 = lo.parse().map_err(|_| format!("--bounds low is not a number: {lo:?}"))?;
        let hi: f64 = hi.parse().map_err(|_| format!("--bounds high is not a number: {hi:?}"))?;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return Err(format!("--bounds needs 0 < lo < hi, got {lo}:{hi}"));
        }
        match name {
            "lambda" => b.lambda = (lo, hi),
            "capacity" => b.capacity = (lo, hi),
            "sigma" => b.sigma = (lo, hi),
            "alpha" => b.alpha = (lo, hi),
            "mu" => b.mu = (lo, hi),
            _ => return Err(format!("--bounds parameter {name:?} unknown")),
        }
    }
    Ok(b)
}

struct CliError {
    code: u8,
    msg: String,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError { code: 2, msg: msg.into() }
}

fn data_err(msg: impl Into<String>) -> CliError {
    CliError { code: 3, msg: msg.into() }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| data_err(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn read_input(path: &PathBuf) -> Result<Trajectory, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
    trajectory_from_str(&text).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let cir = CirParams::new(a.lambda, a.capacity, a.sigma)
        .map_err(|e| usage(format!("--lambda/--capacity/--sigma: {e}")))?;
    let model = ModelParams::new(cir, a.alpha, a.mu)
        .map_err(|e| usage(format!("--alpha/--mu: {e}")))?;
    let window = WindowSpec::new(a.width, a.height)
        .map_err(|e| usage(format!("--width/--height: {e}")))?;
    let grid = match (&a.times, a.delta, a.steps) {
        (Some(list), None, None) => {
            let times: Result<Vec<f64>, _> = list.split(',').map(str::parse::<f64>).collect();
            let times = times.map_err(|e| usage(format!("--times: {e}")))?;
            SamplingGrid::new(times).map_err(|e| usage(format!("--times: {e}")))?
        }
        (None, Some(delta), Some(steps)) => SamplingGrid::equidistant(delta, steps)
            .map_err(|e| usage(format!("--delta/--steps: {e}")))?,
        _ => {
            return Err(usage(
                "provide either --times or both --delta and --steps (not a mixture)",
            ))
        }
    };
    let horizon = a.horizon.unwrap_or_else(|| *grid.times().last().expect("grid is nonempty"));
    if let MarkScheme::Euler { step } = a.mark_scheme {
        if !(step.is_finite() && step > 0.0) {
            return Err(usage(format!("--mark-scheme euler step must be positive, got {step}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let traj = simulate(&model, &window, horizon, &grid, a.init, a.mark_scheme, &mut rng)
        .map_err(|e| usage(format!("simulation rejected the configuration: {e}")))?;
    let extra = vec![
        ("seed".to_string(), a.seed.to_string()),
        (
            "params".to_string(),
            format!(
                "lambda:{},capacity:{},sigma:{},alpha:{},mu:{},horizon:{}",
                a.lambda, a.capacity, a.sigma, a.alpha, a.mu, horizon
            ),
        ),
    ];
    emit(&a.out, &dataio::trajectory_to_string_with_meta(&traj, &extra))
}

fn cmd_fit(a: FitArgs) -> Result<(), CliError> {
    let traj = read_input(&a.input)?;
    let bounds = match &a.bounds {
        Some(spec) => parse_bounds(spec).map_err(usage)?,
        None => ParamBounds::default(),
    };
    if a.m0 <= 0.0 || !a.m0.is_finite() {
        return Err(usage(format!("--m0 must be positive, got {}", a.m0)));
    }
    let opts = FitOptions {
        regime: a.regime,
        m0: a.m0,
        fixed: a.fix,
        bounds,
        drop_l2: a.drop_l2,
        ..FitOptions::default()
    };
    let fit = fit_full(&traj, &opts).map_err(|e| data_err(format!("fit failed: {e}")))?;
    if a.ci && fit.ci95.is_none() {
        return Err(usage(
            "--ci requires a stationary fit with --fix lambda:<v> or sigma:<v> on an \
             equidistant grid (the unrestricted stationary fit sits on a likelihood ridge)",
        ));
    }
    emit(&a.out, &fit_report_to_string(&fit))?;
    if !fit.converged {
        return Err(CliError {
            code: 4,
            msg: "optimizer did not converge; the report was still written".to_string(),
        });
    }
    Ok(())
}

fn format_table1(rows: &[Table1Row], cfg: &Table1Config, scheme_label: &str) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# benchmark table: {} replicates per row, scheme={}, base seed {}",
        cfg.reps, scheme_label, cfg.seed
    )
    .unwrap();
    writeln!(out, "# S.e. = sample standard deviation of the replicate estimates").unwrap();
    writeln!(out, "# bias = 100(mean - truth)/truth, percent").unwrap();
    for row in rows {
        let s = &row.spec;
        writeln!(
            out,
            "\nrow {} (M0={}, lambda={}, K={}, sigma={}, alpha={}, mu={})",
            s.row, s.m0, s.lambda, s.capacity, s.sigma, s.alpha, s.mu
        )
        .unwrap();
        writeln!(
            out,
            "  {:<14} {:<9} {:>10} {:>8} {:>10}",
            "estimator", "param", "mean", "bias%", "S.e."
        )
        .unwrap();
        for (label, summaries, failures) in [
            ("nonstationary", &row.nonstationary, row.failures.0),
            ("stationary", &row.stationary, row.failures.1),
        ] {
            for (j, su) in summaries.iter().enumerate() {
                writeln!(
                    out,
                    "  {:<14} {:<9} {:>10.4} {:>+8.1} {:>10.4}",
                    label, PARAM_NAMES[j], su.mean, su.bias_pct, su.sd
                )
                .unwrap();
            }
            if failures > 0 {
                writeln!(out, "  {label:<14} failures: {failures}").unwrap();
            }
        }
    }
    writeln!(out, "\n# machine-readable summary").unwrap();
    for row in rows {
        let truth = row.spec.truth();
        for (label, summaries, failures) in [
            ("nonstationary", &row.nonstationary, row.failures.0),
            ("stationary", &row.stationary, row.failures.1),
        ] {
            for (j, su) in summaries.iter().enumerate() {
                writeln!(
                    out,
                    "row={} estimator={} param={} truth={} mean={} bias_pct={} sd={} reps={} failures={}",
                    row.spec.row,
                    label,
                    PARAM_NAMES[j],
                    truth[j],
                    su.mean,
                    su.bias_pct,
                    su.sd,
                    row.reps,
                    failures
                )
                .unwrap();
            }
        }
    }
    out
}

fn cmd_table1(a: Table1Args) -> Result<(), CliError> {
    if a.reps < 2 {
        return Err(usage(format!("--reps must be at least 2, got {}", a.reps)));
    }
    let rows: Result<Vec<u8>, _> = a.rows.split(',').map(str::parse::<u8>).collect();
    let rows = rows.map_err(|e| usage(format!("--rows: {e}")))?;
    if rows.is_empty() || rows.iter().any(|r| !(1..=4).contains(r)) {
        return Err(usage(format!("--rows must be a subset of 1,2,3,4, got {:?}", a.rows)));
    }
    if let MarkScheme::Euler { step } = a.scheme {
        if !(step.is_finite() && step > 0.0) {
            return Err(usage(format!("--scheme euler step must be positive, got {step}")));
        }
    }
    let cfg = Table1Config { reps: a.reps, seed: a.seed, scheme: a.scheme };
    let table =
        run_table1(&rows, &cfg).map_err(|e| data_err(format!("benchmark run failed: {e}")))?;
    let scheme_label = match a.scheme {
        MarkScheme::Exact => "exact".to_string(),
        MarkScheme::Euler { step } => format!("euler:{step}"),
    };
    emit(&a.out, &format_table1(&table, &cfg, &scheme_label))
}

fn write_matrix(out: &mut String, name: &str, m: &[[f64; 2]; 2]) {
    writeln!(out, "{name} = [{}, {}; {}, {}]", m[0][0], m[0][1], m[1][0], m[1][1]).unwrap();
}

fn cmd_fisher(a: FisherArgs) -> Result<(), CliError> {
    let cir = CirParams::new(a.lambda, a.capacity, a.sigma)
        .map_err(|e| usage(format!("--lambda/--capacity/--sigma: {e}")))?;
    let id = IdParams::new(a.alpha, a.mu).map_err(|e| usage(format!("--alpha/--mu: {e}")))?;
    if !(a.delta.is_finite() && a.delta > 0.0) {
        return Err(usage(format!("--delta must be positive, got {}", a.delta)));
    }
    if !(a.xi_tol > 0.0 && a.xi_tol <= 1e-4) {
        return Err(usage(format!("--xi-tol must lie in (0, 1e-4], got {}", a.xi_tol)));
    }
    let mut out = String::new();
    writeln!(
        out,
        "# Fisher information report: lambda={}, capacity={}, sigma={}, alpha={}, mu={}, delta={}",
        a.lambda, a.capacity, a.sigma, a.alpha, a.mu, a.delta
    )
    .unwrap();
    writeln!(out, "C_theta = {}", c_theta(&cir)).unwrap();

    let xi = idproc::xi_constant(&id, a.delta, a.xi_tol)
        .map_err(|e| usage(format!("series constant truncation failed: {e}")))?;
    writeln!(out, "xi = {xi}").unwrap();
    writeln!(out, "xi_lower_bound_ok = {}", xi >= 1.0).unwrap();

    let variants: Vec<FixedMark> = match a.fix {
        Some(f) => vec![f],
        None => vec![FixedMark::LambdaKnown, FixedMark::SigmaKnown],
    };
    for f in variants {
        let label = match f {
            FixedMark::LambdaKnown => "lambda_known",
            FixedMark::SigmaKnown => "sigma_known",
        };
        let block = mark_fisher_block(&cir, a.alpha / a.mu, f);
        write_matrix(&mut out, &format!("I_Y[{label}]"), &block.matrix);
    }

    let fi = idproc::fisher_info(&id, a.delta)
        .map_err(|e| usage(format!("count-side information failed: {e}")))?;
    write_matrix(&mut out, "I_N", &fi.matrix);
    write_matrix(&mut out, "I_N_inverse_closed_form", &fi.inverse);
    write_matrix(&mut out, "I_N_inverse_numeric", &fi.inverse_numeric);
    // residual of the closed-form inverse against the matrix itself
    let mut residual = 0.0f64;
    for r in 0..2 {
        for c in 0..2 {
            let mut prod = 0.0;
            for k in 0..2 {
                prod += fi.matrix[r][k] * fi.inverse[k][c];
            }
            let target = if r == c { 1.0 } else { 0.0 };
            residual = residual.max((prod - target).abs());
        }
    }
    writeln!(out, "inverse_product_residual = {residual:e}").unwrap();
    writeln!(out, "validity_condition_holds = {}", fi.validity_holds).unwrap();
    print!("{out}");
    Ok(())
}

fn cmd_snapshot(a: SnapshotArgs) -> Result<(), CliError> {
    let traj = read_input(&a.input)?;
    if !(1..=traj.n()).contains(&a.time_index) {
        return Err(usage(format!(
            "--time-index {} outside 1..={}",
            a.time_index,
            traj.n()
        )));
    }
    let format = match a.format.as_str() {
        "csv" => SnapshotFormat::Csv,
        "svg" => {
            if !(a.scale.is_finite() && a.scale > 0.0) {
                return Err(usage(format!("--scale must be positive, got {}", a.scale)));
            }
            SnapshotFormat::Svg { scale: a.scale }
        }
        other => return Err(usage(format!("--format must be csv or svg, got {other:?}"))),
    };
    let snap = boolean_snapshot(&traj, a.time_index - 1)
        .map_err(|e| usage(format!("--time-index: {e}")))?;
    emit(&a.out, &snapshot_to_string(&snap, traj.window(), format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Table1(a) => cmd_table1(a),
        Cmd::Fisher(a) => cmd_fisher(a),
        Cmd::Snapshot(a) => cmd_snapshot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
