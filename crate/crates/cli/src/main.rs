mod config;
mod suites;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parastokes::domain::{discrete_norm, write_solver_csv, Field, NormKind};
use parastokes::kernels::{Convention, KernelError, KernelParams, SpaceTimePoint};
use parastokes::lattice::{periodized_kernel, periodized_kernel_fixed, LatticeError, LatticeSpec};
use parastokes::potentials::{ContextOptions, OperatorContext, PotentialError};
use parastokes::solver::{
    convergence_check, estimate_constants_seeded, FlowPreset, NSEProblem, SolverError, SolverReport, DEFAULT_SEED,
};
use parastokes::verify::VerifyError;
use parastokes::witt_algebra::BASIS_NAMES;
use parastokes::Spinor;
use thiserror::Error;

use config::{ConfigError, Forcing, RunConfig, SolverMode};
use suites::Suite;

#[derive(Parser, Debug)]
#[command(name = "parastokes", version, about = "Quaternionic operator calculus for instationary Stokes flow")]
struct Cli {
    /// Run configuration (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory; overrides `output.dir`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads; 1 gives bit-reproducible runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Solver or lattice-sum tolerance; overrides `solver.tol`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run verification suites.
    Check {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
    /// Print the seven coefficients of the (periodized) fundamental solution.
    Kernel {
        /// Spatial point `x,y,z`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long)]
        k: f64,
        #[arg(long, default_value_t = 0)]
        rank: usize,
        /// Antiperiodicity per lattice axis, e.g. `true,false`.
        #[arg(long, value_delimiter = ',')]
        anti: Vec<bool>,
        /// Sum a fixed number of shells instead of summing to `--tol`.
        #[arg(long)]
        shells: Option<usize>,
    },
    /// Linear or fixed-point solve for a configuration.
    Solve,
    /// Estimate C1 and C2 and print the admissibility verdict.
    Constants,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("failing checks: {}", .0.join(", "))]
    Failed(Vec<String>),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::Kernel(KernelError::InvalidK(_) | KernelError::Singular)
            | CliError::Lattice(
                LatticeError::BadRank(_)
                | LatticeError::FlagCount { .. }
                | LatticeError::BadTolerance(_)
                | LatticeError::Kernel(KernelError::Singular),
            ) => 2,
            _ => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage(format!("--tol must be positive, got {t}")));
        }
    }
    match &cli.command {
        Command::Check { suite } => cmd_check(cli, *suite),
        Command::Kernel { x, t, k, rank, anti, shells } => cmd_kernel(cli, x, *t, *k, *rank, anti, *shells),
        Command::Solve => cmd_solve(cli),
        Command::Constants => cmd_constants(cli),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })
}

fn write_file(path: PathBuf, body: &str) -> Result<(), CliError> {
    fs::write(&path, body).map_err(|e| CliError::Io { path, source: e })
}

fn cmd_check(cli: &Cli, suite: Suite) -> Result<(), CliError> {
    let dir = cli.output.clone().unwrap_or_else(|| PathBuf::from("check-out"));
    ensure_dir(&dir)?;
    let mut failed = Vec::new();
    for s in suite.expand() {
        for c in suites::run(s, &dir, cli.seed, cli.tol)? {
            println!("{} {}/{}: {}", if c.pass { "PASS" } else { "FAIL" }, s.name(), c.name, c.detail);
            if !c.pass {
                failed.push(format!("{}/{}", s.name(), c.name));
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(failed))
    }
}

fn cmd_kernel(
    cli: &Cli,
    x: &[f64],
    t: f64,
    k: f64,
    rank: usize,
    anti: &[bool],
    shells: Option<usize>,
) -> Result<(), CliError> {
    if x.len() != 3 {
        return Err(CliError::Usage(format!("--x needs 3 comma-separated values, got {}", x.len())));
    }
    let params = KernelParams::new(k)?;
    let flags = if anti.is_empty() { vec![false; rank] } else { anti.to_vec() };
    let spec = LatticeSpec::new(rank, flags)?;
    let p = SpaceTimePoint::new([x[0], x[1], x[2]], t);
    let v = match shells {
        Some(n) => periodized_kernel_fixed(&p, &params, &spec, n)?,
        None => periodized_kernel(&p, &params, &spec, cli.tol.unwrap_or(1e-12))?,
    };
    println!("{}", BASIS_NAMES.join(","));
    let coeffs: Vec<String> = v.value.to_array().iter().map(|c| format!("{c:.15e}")).collect();
    println!("{}", coeffs.join(","));
    println!("tail={:.3e} shells_used={}", v.tail, v.shells_used);
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.clone().ok_or_else(|| CliError::Usage("this command needs --config PATH".into()))?;
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    RunConfig::parse(&text).map_err(|source| CliError::Config { path, source })
}

fn context(cli: &Cli, cfg: &RunConfig) -> Result<OperatorContext, CliError> {
    let domain = cfg.domain().map_err(|source| CliError::Config { path: cli.config.clone().unwrap_or_default(), source })?;
    let opts = ContextOptions { quad_tol: cfg.quad_tol, ..ContextOptions::default() };
    Ok(OperatorContext::new(domain, KernelParams::new(cfg.k)?, Convention::ADOPTED, opts)?)
}

/// Forcing and, for manufactured presets, the exact velocity and pressure.
fn forcing(cfg: &RunConfig, ctx: &OperatorContext) -> (Field, Option<(Field, Field)>) {
    let g = &ctx.domain.grid;
    match &cfg.forcing {
        Forcing::Preset(p) => {
            let m = p.build(g, cfg.k, cfg.amplitude);
            let exact = (*p != FlowPreset::Zero).then_some((m.velocity, m.pressure));
            (m.forcing, exact)
        }
        Forcing::Inline(c) => (Field::from_fn(g, |_, _| Spinor::vector(c.map(|v| v * cfg.amplitude))), None),
    }
}

fn residual_csv(history: &[f64]) -> String {
    let mut s = String::from("iter,residual\n");
    for (i, r) in history.iter().enumerate() {
        s.push_str(&format!("{},{r:.12e}\n", i + 1));
    }
    s
}

fn summary_text(cfg: &RunConfig, report: &SolverReport, status: &str, extra: &[(&str, String)]) -> String {
    let opt = |x: Option<f64>| x.map_or_else(|| "undefined".to_string(), |v| format!("{v:.12e}"));
    let mut s = String::new();
    let mode = match cfg.mode {
        SolverMode::Linear => "linear",
        SolverMode::Nonlinear => "nonlinear",
    };
    let rows = [
        ("status", status.to_string()),
        ("mode", mode.to_string()),
        ("iterations", report.iterations.to_string()),
        ("converged", report.converged.to_string()),
        ("admissible", report.admissible.to_string()),
        ("c1", opt(report.c1)),
        ("c2", opt(report.c2)),
        ("w", opt(report.w)),
        ("l", opt(report.l)),
        ("p_gauge", format!("{:.12e}", report.p_gauge)),
        ("divergence", format!("{:.12e}", report.divergence)),
        ("spurious", format!("{:.12e}", report.spurious)),
        ("projected_start", report.projected_start.to_string()),
    ];
    for (k, v) in rows.iter().chain(extra.iter().map(|(k, v)| (*k, v.clone())).collect::<Vec<_>>().iter()) {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s
}

fn cmd_solve(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let dir = cli.output.clone().unwrap_or_else(|| cfg.output_dir.clone());
    ensure_dir(&dir)?;
    let ctx = context(cli, &cfg)?;
    let (mut f, exact) = forcing(&cfg, &ctx);
    let tol = cli.tol.unwrap_or(cfg.tol);

    let outcome = match cfg.mode {
        SolverMode::Linear => NSEProblem::new(&ctx, f)?.solve_linear(),
        SolverMode::Nonlinear => {
            let constants = estimate_constants_seeded(&ctx, cli.seed)?;
            if let Some(frac) = cfg.limit_fraction {
                let norm = discrete_norm(&f, NormKind::L2);
                if norm == 0.0 {
                    return Err(CliError::Usage("forcing.limit_fraction needs a nonzero forcing".into()));
                }
                f = f.scale(frac / (16.0 * constants.c1 * constants.c1 * constants.c2) / norm);
            }
            let prob = NSEProblem::new(&ctx, f)?.with_constants(constants);
            prob.fixed_point_solve(&Field::zeros(&ctx.domain.grid), cfg.max_iter, tol)
        }
    };

    let (u, p, report) = match outcome {
        Ok(r) => r,
        Err(SolverError::Diverged { iteration, history }) => {
            write_file(dir.join("residuals.csv"), &residual_csv(&history))?;
            let report = SolverReport {
                iterations: history.len(),
                residual_history: history.clone(),
                c1: None,
                c2: None,
                w: None,
                l: None,
                admissible: false,
                converged: false,
                p_gauge: 0.0,
                divergence: 0.0,
                spurious: 0.0,
                projected_start: false,
            };
            write_file(dir.join("summary.txt"), &summary_text(&cfg, &report, "diverged", &[]))?;
            return Err(SolverError::Diverged { iteration, history }.into());
        }
        Err(e) => return Err(e.into()),
    };

    let path = dir.join("fields.csv");
    let file = fs::File::create(&path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    write_solver_csv(&u, &p, BufWriter::new(file)).map_err(|e| CliError::Io { path, source: e })?;
    write_file(dir.join("residuals.csv"), &residual_csv(&report.residual_history))?;

    let mut extra = Vec::new();
    if let (Some((ue, pe)), SolverMode::Linear) = (&exact, cfg.mode) {
        let eu = u.sub(ue).map_err(SolverError::from)?.l2() / ue.l2().max(f64::MIN_POSITIVE);
        let ep = p.sub(pe).map_err(SolverError::from)?.l2() / pe.l2().max(f64::MIN_POSITIVE);
        extra.push(("velocity_error", format!("{eu:.12e}")));
        extra.push(("pressure_error", format!("{ep:.12e}")));
    }
    write_file(dir.join("summary.txt"), &summary_text(&cfg, &report, "ok", &extra))?;

    println!("{}", report.summary());
    for (k, v) in &extra {
        println!("{k}={v}");
    }
    if cfg.mode == SolverMode::Nonlinear && !report.admissible {
        eprintln!("warning: the admissibility conditions do not hold; convergence is not guaranteed");
    }
    Ok(())
}

fn cmd_constants(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let ctx = context(cli, &cfg)?;
    let (f, _) = forcing(&cfg, &ctx);
    let c = estimate_constants_seeded(&ctx, cli.seed)?;
    let limit = 1.0 / (16.0 * c.c1 * c.c1 * c.c2);
    let f_norm = match cfg.limit_fraction {
        Some(frac) => frac * limit,
        None => discrete_norm(&f, NormKind::L2),
    };
    let (adm, w, l) = convergence_check(c.c1, c.c2, f_norm, 0.0);
    let opt = |x: Option<f64>| x.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6e}"));
    println!(
        "C1={:.6e} C2={:.6e} W={} L={} admissible={adm} forcing_norm={f_norm:.6e} forcing_limit={limit:.6e} power_iterations={} bump_samples={}",
        c.c1,
        c.c2,
        opt(w),
        opt(l),
        c.power_iterations,
        c.bump_samples
    );
    Ok(())
}
