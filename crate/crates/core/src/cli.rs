//! Command-line front end: configuration loading, subcommand dispatch and
//! CSV emission.
//!
//! Every run is reproducible: all floating-point output is rendered with 17
//! significant digits, every stochastic subcommand honors `--seed`, and the
//! worker count never changes a single output byte. A JSON config file can
//! supply any parameter; command-line flags win on conflict.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use serde::Deserialize;

use crate::manifold::{
    cm_residuals, reduced_field, solve_center_manifold, Equilibrium, Poly1, SlowFastModel,
    Stability,
};
use crate::series::Rat;
use crate::{analysis, path, sde, verify, Error, Result};

/// Default timescale-ratio grid for the action's `e^2` fit.
pub const DEFAULT_EPS_GRID: [f64; 5] = [0.02, 0.05, 0.1, 0.15, 0.2];

/// Default ladder of timescale ratios for the prediction table.
pub const DEFAULT_TABLE_EPS: [f64; 7] = [0.001, 0.003, 0.01, 0.1, 0.2, 0.5, 1.0];

/// Render a float with 17 significant digits, the shortest representation
/// that reproduces any f64 bit pattern.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Worker-count environment override, read when no `--workers` flag is given.
pub const WORKERS_ENV: &str = "SLOWFAST_WORKERS";

// ---------------------------------------------------------------------------
// Configuration file
// ---------------------------------------------------------------------------

/// JSON configuration mirrored 1:1 by command-line flags (flags win).
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSpec>,
    pub epsilon: Option<Vec<f64>>,
    pub inv_d: Option<Vec<f64>>,
    pub grade: Option<u32>,
    pub trials: Option<u64>,
    pub master_seed: Option<u64>,
    pub nu: Option<f64>,
    pub newton_tol: Option<f64>,
    pub newton_max_iters: Option<u32>,
    pub scheme: Option<String>,
    pub t_max: Option<f64>,
    pub delta: Option<f64>,
    pub overshoot: Option<f64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Model selection: a built-in name, or `custom` with the fast drift's
/// rational coefficients (ascending powers) and its labeled equilibria.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub f: Option<Vec<String>>,
    pub equilibria: Option<Vec<(String, String)>>,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read config {path:?}: {e}")))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("invalid config {path:?}: {e}")))
}

fn parse_rat(text: &str) -> Result<Rat> {
    Rat::from_str(text.trim())
        .map_err(|e| Error::InvalidParameter(format!("invalid rational '{text}': {e}")))
}

fn parse_stability(text: &str) -> Result<Stability> {
    match text.trim().to_ascii_lowercase().as_str() {
        "sink" => Ok(Stability::Sink),
        "saddle" => Ok(Stability::Saddle),
        other => Err(Error::InvalidParameter(format!(
            "stability must be 'sink' or 'saddle', got '{other}'"
        ))),
    }
}

/// Build the model named by flag or config, with placeholder run parameters
/// (`epsilon` and `D` are set per run).
fn resolve_model(flag: &Option<String>, cfg: &RunConfig) -> Result<SlowFastModel> {
    let spec = match (flag, &cfg.model) {
        (Some(name), _) => ModelSpec {
            name: name.clone(),
            f: cfg.model.as_ref().and_then(|m| m.f.clone()),
            equilibria: cfg.model.as_ref().and_then(|m| m.equilibria.clone()),
        },
        (None, Some(spec)) => spec.clone(),
        (None, None) => ModelSpec {
            name: "duffing".into(),
            f: None,
            equilibria: None,
        },
    };
    match spec.name.as_str() {
        "duffing" => Ok(SlowFastModel::duffing(0.1, 0.05)),
        "asymmetric" => Ok(SlowFastModel::asymmetric(0.1, 0.05)),
        "custom" => {
            let coeffs = spec.f.as_ref().ok_or_else(|| {
                Error::InvalidParameter("custom model needs drift coefficients".into())
            })?;
            let eqs = spec.equilibria.as_ref().ok_or_else(|| {
                Error::InvalidParameter("custom model needs labeled equilibria".into())
            })?;
            let f = Poly1::new(
                coeffs
                    .iter()
                    .map(|c| parse_rat(c))
                    .collect::<Result<Vec<_>>>()?,
            );
            let equilibria = eqs
                .iter()
                .map(|(x, s)| {
                    Ok(Equilibrium {
                        x: parse_rat(x)?,
                        stability: parse_stability(s)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            SlowFastModel::new("custom", f, equilibria, 0.1, 0.05)
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown model '{other}' (expected duffing, asymmetric or custom)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "slowfast",
    version,
    about = "Noise-induced switching times for slow-fast bistable systems: \
             optimal-path prediction with center-manifold reduction, verified \
             by stiff stochastic simulation"
)]
pub struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel sections (default: machine parallelism;
    /// env SLOWFAST_WORKERS overrides the default).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the invariant-graph series and print it with its exact
    /// residual certificate.
    Derive(DeriveArgs),
    /// Emit samples of the optimal escape path as CSV.
    Path(PathArgs),
    /// Emit actions and the fitted e^2 coefficient as CSV.
    Action(ActionArgs),
    /// Run escape-time ensembles as CSV.
    Simulate(SimulateArgs),
    /// Compare predicted and simulated scaling slopes as CSV.
    Scaling(ScalingArgs),
    /// Print the predicted scaling column over the standard ratio ladder.
    Table1(TableArgs),
    /// Run the acceptance suite; exits nonzero on any failure.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct DeriveArgs {
    #[arg(long)]
    pub model: Option<String>,
    /// Grade cap of the series solve.
    #[arg(long)]
    pub grade: Option<u32>,
}

#[derive(Args, Debug)]
pub struct PathArgs {
    #[arg(long)]
    pub model: Option<String>,
    /// Timescale ratio.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Launch offset along the unstable direction.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub grade: Option<u32>,
    /// Integrate the full 4-D system instead of the reduced one.
    #[arg(long)]
    pub full: bool,
}

#[derive(Args, Debug)]
pub struct ActionArgs {
    #[arg(long)]
    pub model: Option<String>,
    /// Comma-separated timescale ratios.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub grade: Option<u32>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Comma-separated reciprocal noise intensities 1/D.
    #[arg(long = "invD", value_delimiter = ',')]
    pub inv_d: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub newton_tol: Option<f64>,
    #[arg(long)]
    pub newton_max_iters: Option<u32>,
    /// implicit | explicit
    #[arg(long)]
    pub scheme: Option<String>,
    /// Escape detection buffer past the saddle.
    #[arg(long)]
    pub overshoot: Option<f64>,
    /// Also write per-trial first passage times to this file.
    #[arg(long)]
    pub raw: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScalingArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long = "invD", value_delimiter = ',')]
    pub inv_d: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub grade: Option<u32>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub grade: Option<u32>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Skip the action fit and use this e^2 coefficient directly.
    #[arg(long)]
    pub c2: Option<f64>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Run only this criterion (1-9).
    #[arg(long)]
    pub only: Option<u8>,
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Run a parsed command line. Returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParameter(_) | Error::InvalidModel(_) => 2,
                _ => 1,
            }
        }
    }
}

fn execute(cli: Cli) -> Result<u8> {
    let cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let workers = cli
        .workers
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .or(cfg.workers);
    let out = cli.out.clone().or_else(|| cfg.out.clone());

    let body = |cfg: &RunConfig| -> Result<u8> {
        match &cli.command {
            Command::Derive(args) => emit(&out, &cmd_derive(args, cfg)?).map(|_| 0),
            Command::Path(args) => emit(&out, &cmd_path(args, cfg)?).map(|_| 0),
            Command::Action(args) => emit(&out, &cmd_action(args, cfg)?).map(|_| 0),
            Command::Simulate(args) => emit(&out, &cmd_simulate(args, cfg)?).map(|_| 0),
            Command::Scaling(args) => emit(&out, &cmd_scaling(args, cfg)?).map(|_| 0),
            Command::Table1(args) => emit(&out, &cmd_table(args, cfg)?).map(|_| 0),
            Command::Verify(args) => cmd_verify(args),
        }
    };

    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
            pool.install(|| body(&cfg))
        }
        None => body(&cfg),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| Error::InvalidParameter(format!("cannot write {p:?}: {e}"))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn integrator_config(
    nu: Option<f64>,
    newton_tol: Option<f64>,
    newton_max_iters: Option<u32>,
    scheme: &Option<String>,
    overshoot: Option<f64>,
    cfg: &RunConfig,
) -> Result<sde::IntegratorConfig> {
    let scheme_name = scheme.clone().or_else(|| cfg.scheme.clone());
    let scheme = match scheme_name.as_deref() {
        None | Some("implicit") => sde::Scheme::Implicit,
        Some("explicit") => sde::Scheme::Explicit,
        Some(other) => {
            return Err(Error::InvalidParameter(format!(
                "scheme must be implicit or explicit, got '{other}'"
            )))
        }
    };
    let config = sde::IntegratorConfig {
        nu: nu.or(cfg.nu).unwrap_or(1e-2),
        newton_tol: newton_tol.or(cfg.newton_tol).unwrap_or(1e-10),
        newton_max_iters: newton_max_iters.or(cfg.newton_max_iters).unwrap_or(25),
        scheme,
        overshoot: overshoot.or(cfg.overshoot).unwrap_or(0.0),
    };
    config.validate()?;
    Ok(config)
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_derive(args: &DeriveArgs, cfg: &RunConfig) -> Result<String> {
    let model = resolve_model(&args.model, cfg)?;
    let grade = args.grade.or(cfg.grade).unwrap_or(5);
    let cm = solve_center_manifold(&model, grade)?;
    let rf = reduced_field(&cm, &model);
    let (res_h, res_k) = cm_residuals(&model, &cm);

    let mut s = String::new();
    let _ = writeln!(s, "model: {}", model.name());
    let _ = writeln!(s, "fast drift: f(x) = {}", model.f());
    let _ = writeln!(s, "grade cap: {grade}");
    let _ = writeln!(s, "h = {}", cm.h);
    let _ = writeln!(s, "k = {}", cm.k);
    let _ = writeln!(s, "reduced dx/dt  = {}", rf.xdot);
    let _ = writeln!(s, "reduced dl1/dt = {}", rf.l1dot);
    let _ = writeln!(
        s,
        "invariance residuals: res_h = {res_h}, res_k = {res_k} (exact rational arithmetic)"
    );
    Ok(s)
}

fn cmd_path(args: &PathArgs, cfg: &RunConfig) -> Result<String> {
    let model = resolve_model(&args.model, cfg)?;
    let eps = args
        .eps
        .or_else(|| cfg.epsilon.as_ref().and_then(|v| v.first().copied()))
        .unwrap_or(0.01);
    let delta = args.delta.or(cfg.delta).unwrap_or(path::DEFAULT_DELTA);
    let grade = args
        .grade
        .or(cfg.grade)
        .unwrap_or(path::DEFAULT_NUMERIC_GRADE);
    let cm = solve_center_manifold(&model, grade)?;
    let samples = if args.full {
        path::full_system_crosscheck(&model, &cm, eps, delta)?
            .path
            .samples
    } else {
        path::reduced_heteroclinic(&model, &cm, eps, delta)?.samples
    };

    let mut s = String::from("t,x,l1,y,l2\n");
    for p in &samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_float(p.t),
            fmt_float(p.x),
            fmt_float(p.l1),
            fmt_float(p.y),
            fmt_float(p.l2)
        );
    }
    Ok(s)
}

fn cmd_action(args: &ActionArgs, cfg: &RunConfig) -> Result<String> {
    let model = resolve_model(&args.model, cfg)?;
    let eps_list = args
        .eps
        .clone()
        .or_else(|| cfg.epsilon.clone())
        .unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec());
    let delta = args.delta.or(cfg.delta).unwrap_or(path::DEFAULT_DELTA);
    let grade = args
        .grade
        .or(cfg.grade)
        .unwrap_or(path::DEFAULT_NUMERIC_GRADE);
    let cm = solve_center_manifold(&model, grade)?;
    let (from, to) = path::default_escape_pair(&model)?;
    let (from_x, to_x) = (from.x.clone(), to.x.clone());
    let r0 = path::singular_action(&model, &from_x, &to_x)?
        .to_f64()
        .expect("singular action out of f64 range");

    // The e^2 fit has its own grid requirements; reuse the user's grid when
    // it qualifies, otherwise fall back to the default grid.
    let fit_grid: Vec<f64> = if eps_list.len() >= 4 && eps_list.iter().all(|&e| e > 0.0 && e <= 0.2)
    {
        eps_list.clone()
    } else {
        DEFAULT_EPS_GRID.to_vec()
    };
    let eps2_fit = path::eps2_coefficient(&model, &cm, &fit_grid, delta)?;

    let mut s = String::from("epsilon,R,R_singular,eps2_fit,miss_distance,H_drift\n");
    for &eps in &eps_list {
        let conn = path::full_heteroclinic(&model, eps)?;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_float(eps),
            fmt_float(conn.action),
            fmt_float(r0),
            fmt_float(eps2_fit),
            fmt_float(conn.endpoint_miss),
            fmt_float(conn.hamiltonian_drift)
        );
    }
    Ok(s)
}

fn cmd_simulate(args: &SimulateArgs, cfg: &RunConfig) -> Result<String> {
    let base = resolve_model(&args.model, cfg)?;
    let eps_list = args
        .eps
        .clone()
        .or_else(|| cfg.epsilon.clone())
        .unwrap_or_else(|| vec![0.1]);
    let inv_d_list = args
        .inv_d
        .clone()
        .or_else(|| cfg.inv_d.clone())
        .unwrap_or_else(|| vec![20.0]);
    let trials = args.trials.or(cfg.trials).unwrap_or(200);
    let seed = args.seed.or(cfg.master_seed).unwrap_or(0);
    let t_max = args.t_max.or(cfg.t_max).unwrap_or(1e7);
    let config = integrator_config(
        args.nu,
        args.newton_tol,
        args.newton_max_iters,
        &args.scheme,
        args.overshoot,
        cfg,
    )?;

    let mut s = String::from("epsilon,D,n_trials,mean_T,std_T,timeout_count,seed,nu\n");
    let mut raw = String::from("epsilon,D,stream,first_passage_time,steps,timed_out\n");
    for &eps in &eps_list {
        for &inv_d in &inv_d_list {
            if !(inv_d > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "1/D must be positive, got {inv_d}"
                )));
            }
            let d = 1.0 / inv_d;
            let model = base.clone().with_epsilon(eps).with_noise_d(d);
            let ens = sde::run_ensemble(&model, &config, trials, seed, t_max)?;
            if ens.timeout_count * 100 > ens.n_trials {
                eprintln!(
                    "warning: {} of {} trials timed out at e = {eps}, 1/D = {inv_d}",
                    ens.timeout_count, ens.n_trials
                );
            }
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                fmt_float(eps),
                fmt_float(d),
                ens.n_trials,
                fmt_float(ens.mean_t),
                fmt_float(ens.std_t),
                ens.timeout_count,
                seed,
                fmt_float(config.nu)
            );
            if args.raw.is_some() {
                for t in &ens.trials {
                    let (fpt, timed_out) = match t.outcome {
                        sde::TrialOutcome::Escaped(time) => (time, false),
                        sde::TrialOutcome::TimedOut => (f64::NAN, true),
                    };
                    let _ = writeln!(
                        raw,
                        "{},{},{},{},{},{}",
                        fmt_float(eps),
                        fmt_float(d),
                        t.stream,
                        fmt_float(fpt),
                        t.steps_taken,
                        timed_out
                    );
                }
            }
        }
    }
    if let Some(p) = &args.raw {
        std::fs::write(p, raw)
            .map_err(|e| Error::InvalidParameter(format!("cannot write {p:?}: {e}")))?;
    }
    Ok(s)
}

fn cmd_scaling(args: &ScalingArgs, cfg: &RunConfig) -> Result<String> {
    let base = resolve_model(&args.model, cfg)?;
    let eps_list = args
        .eps
        .clone()
        .or_else(|| cfg.epsilon.clone())
        .unwrap_or_else(|| vec![0.1]);
    let inv_d_list = args
        .inv_d
        .clone()
        .or_else(|| cfg.inv_d.clone())
        .unwrap_or_else(|| vec![15.0, 18.0, 21.0, 24.0, 27.0]);
    let trials = args.trials.or(cfg.trials).unwrap_or(200);
    let seed = args.seed.or(cfg.master_seed).unwrap_or(0);
    let t_max = args.t_max.or(cfg.t_max).unwrap_or(1e7);
    let delta = args.delta.or(cfg.delta).unwrap_or(path::DEFAULT_DELTA);
    let grade = args
        .grade
        .or(cfg.grade)
        .unwrap_or(path::DEFAULT_NUMERIC_GRADE);
    let config = integrator_config(args.nu, None, None, &None, None, cfg)?;

    let cm = solve_center_manifold(&base, grade)?;
    let (from, to) = path::default_escape_pair(&base)?;
    let (from_x, to_x) = (from.x.clone(), to.x.clone());
    let r0 = path::singular_action(&base, &from_x, &to_x)?
        .to_f64()
        .expect("singular action out of f64 range");
    let c2 = path::eps2_coefficient(&base, &cm, &DEFAULT_EPS_GRID, delta)?;

    let mut sim_results = Vec::new();
    for &eps in &eps_list {
        let mut points = Vec::new();
        for &inv_d in &inv_d_list {
            let d = 1.0 / inv_d;
            let model = base.clone().with_epsilon(eps).with_noise_d(d);
            let ens = sde::run_ensemble(&model, &config, trials, seed, t_max)?;
            points.push((inv_d, ens.mean_t.log10()));
        }
        sim_results.push((eps, points));
    }
    let rows = analysis::compare_table(r0, c2, &sim_results)?;

    let mut s = String::from("epsilon,cs_pred,cs_fit,cs_stderr,agree\n");
    for row in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_float(row.epsilon),
            fmt_float(row.cs_predicted),
            fmt_float(row.cs_fitted),
            fmt_float(row.cs_stderr),
            row.agree
        );
    }
    Ok(s)
}

fn cmd_table(args: &TableArgs, cfg: &RunConfig) -> Result<String> {
    let model = resolve_model(&args.model, cfg)?;
    let eps_list = args
        .eps
        .clone()
        .or_else(|| cfg.epsilon.clone())
        .unwrap_or_else(|| DEFAULT_TABLE_EPS.to_vec());
    let (from, to) = path::default_escape_pair(&model)?;
    let (from_x, to_x) = (from.x.clone(), to.x.clone());
    let r0 = path::singular_action(&model, &from_x, &to_x)?
        .to_f64()
        .expect("singular action out of f64 range");
    let c2 = match args.c2 {
        Some(c) => c,
        None => {
            let grade = args
                .grade
                .or(cfg.grade)
                .unwrap_or(path::DEFAULT_NUMERIC_GRADE);
            let delta = args.delta.or(cfg.delta).unwrap_or(path::DEFAULT_DELTA);
            let cm = solve_center_manifold(&model, grade)?;
            path::eps2_coefficient(&model, &cm, &DEFAULT_EPS_GRID, delta)?
        }
    };

    let mut s = String::from("epsilon,cs_pred\n");
    for &eps in &eps_list {
        let cs = analysis::predict_cs(r0 + c2 * eps * eps);
        let _ = writeln!(s, "{},{}", fmt_float(eps), fmt_float(cs));
    }
    Ok(s)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8> {
    let bin = std::env::current_exe().ok();
    let reports = match args.only {
        Some(id) => vec![verify::run_criterion(id, bin.as_deref())?],
        None => verify::run_all(bin.as_deref()),
    };
    let mut failed = 0;
    for r in &reports {
        println!("{}", verify::render_line(r));
        if !r.passed {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        reports.len() - failed,
        reports.len()
    );
    Ok(if failed == 0 { 0 } else { 1 })
}
