//! The `mixfrac-ns` command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure,
//! 3 failed verification.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::{fiber_scan, log_grid};
use crate::gn::petviashvili_solve;
use crate::io::{
    csv_table, fmt_f64, load_config, load_field, save_field, solve_config, write_atomic, FieldMeta, RunConfig,
};
use crate::problem::ProblemSpec;
use crate::solver::{initial_guess, mass_scan_rescaled, verify_solution, SolveRecord, SolveResult};
use crate::spectral::make_grid;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Environment variable supplying the default `--jobs`.
pub const THREADS_ENV: &str = "MIXFRAC_NS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mixfrac-ns", version, about = "Normalized solutions of mixed fractional Schrödinger equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for a normalized solution and write the result and field files.
    Solve(SolveArgs),
    /// Compute the Gagliardo–Nirenberg ground state and optimal constant.
    Gn(GnArgs),
    /// Tabulate the fiber map of a field as CSV.
    Fiber(FiberArgs),
    /// Solve over a list of masses and tabulate level and multiplier as CSV.
    ScanMass(ScanArgs),
    /// Re-check a stored solution.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Flat JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Symmetrize iterates (even in 1-D, square symmetry in 2-D).
    #[arg(long)]
    radial: bool,
    /// Fail instead of warning when the problem is outside the admissible window.
    #[arg(long)]
    strict_assumptions: bool,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
}

#[derive(Debug, Args)]
struct GnArgs {
    /// JSON with keys d, s, p, N, L and optional tol, max_iter.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FiberArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Field manifest to analyse; the default is the solver's initial guess.
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-2)]
    t_min: f64,
    #[arg(long, default_value_t = 1e2)]
    t_max: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated, strictly increasing masses (defaults to the config's `masses`).
    #[arg(long, value_delimiter = ',')]
    masses: Option<Vec<f64>>,
    /// Concurrent solves; defaults to MIXFRAC_NS_THREADS or 1.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Result JSON written by `solve`.
    #[arg(long)]
    result: PathBuf,
}

/// Configuration of the `gn` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnConfig {
    pub d: usize,
    pub s: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(default = "default_gn_tol")]
    pub tol: f64,
    #[serde(default = "default_gn_iter")]
    pub max_iter: usize,
}

fn default_gn_tol() -> f64 {
    1e-10
}

fn default_gn_iter() -> usize {
    5000
}

/// What `solve` writes next to the field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub config: RunConfig,
    /// Field manifest path relative to this file.
    pub field: String,
    pub result: SolveRecord,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::InvalidParameter { .. }
            | Error::InvalidGrid(_)
            | Error::Admissibility(_)
            | Error::FieldFile(_)
            | Error::GridMismatch
            | Error::NoAnalyticPotential(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

/// Runs the command line with `args` (including the program name) and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Gn(a) => gn(a),
        Command::Fiber(a) => fiber(a),
        Command::ScanMass(a) => scan_mass(a),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            EXIT_NUMERICAL
        }
        Err(Failure::Verification) => EXIT_VERIFY,
    }
}

fn load_problem(a: &ProblemArgs) -> std::result::Result<(RunConfig, ProblemSpec), Failure> {
    let (loaded, mut spec) = load_config(&a.config, false, a.strict_assumptions)?;
    let mut config = loaded.config;
    if let Some(seed) = a.seed {
        config.seed = Some(seed);
        spec.params.seed = seed;
    }
    if a.radial {
        config.radial = Some(true);
        spec.radial = true;
    }
    Ok((config, spec))
}

fn out_dir(a: &ProblemArgs, config: &RunConfig) -> Option<PathBuf> {
    a.out.clone().or_else(|| config.out.clone())
}

fn solve(a: SolveArgs) -> std::result::Result<(), Failure> {
    let (config, spec) = load_problem(&a.problem)?;
    let dir = out_dir(&a.problem, &config).unwrap_or_else(|| PathBuf::from("out"));
    let result = solve_config(&config, &spec)?;
    let field_name = "solution.field.json";
    save_field(&result.u, FieldMeta::of(&spec), &dir.join(field_name))?;
    let file = ResultFile {
        config,
        field: field_name.into(),
        result: result.record(),
    };
    let json = serde_json::to_string_pretty(&file).map_err(Error::from)?;
    write_atomic(&dir.join("solution.json"), json.as_bytes())?;
    println!(
        "lambda = {}\nlevel = {}\npohozaev_residual = {:.3e}\nel_residual = {:.3e}\niterations = {}\nconverged = {}",
        fmt_f64(result.lambda),
        fmt_f64(result.level()),
        result.pohozaev_residual,
        result.el_residual,
        result.iterations,
        result.converged
    );
    if !result.converged {
        return Err(Failure::Numerical("solver did not converge".into()));
    }
    Ok(())
}

fn gn(a: GnArgs) -> std::result::Result<(), Failure> {
    let text = std::fs::read_to_string(&a.config).map_err(Error::from)?;
    let cfg: GnConfig = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let grid = make_grid(cfg.d, cfg.n, cfg.l)?;
    let r = petviashvili_solve(cfg.d, cfg.s, cfg.p, &grid, cfg.tol, cfg.max_iter)?;
    let json = serde_json::to_string_pretty(&r.record(cfg.s, cfg.p)).map_err(Error::from)?;
    if let Some(dir) = a.out {
        write_atomic(&dir.join("gn.json"), json.as_bytes())?;
    }
    println!("{json}");
    Ok(())
}

fn fiber(a: FiberArgs) -> std::result::Result<(), Failure> {
    let (config, spec) = load_problem(&a.problem)?;
    let u = match &a.field {
        Some(path) => {
            let (u, _) = load_field(path)?;
            if !u.grid().same_as(spec.grid()) {
                return Err(Failure::Usage("field grid differs from the config grid".into()));
            }
            u
        }
        None => initial_guess(&spec)?,
    };
    let t = log_grid(a.t_min, a.t_max, a.points)?;
    let diag = fiber_scan(&u, &spec, !spec.potential().is_none(), &t)?;
    let rows = (0..t.len()).map(|i| vec![fmt_f64(t[i]), fmt_f64(diag.psi[i]), fmt_f64(diag.psi_prime[i])]);
    let csv = csv_table(&["t", "psi", "psi_prime"], rows);
    emit_csv(out_dir(&a.problem, &config).as_deref(), "fiber.csv", &csv)?;
    match diag.t_star {
        Some(t) => eprintln!("t_star = {} ({} sign changes)", fmt_f64(t), diag.sign_changes),
        None => eprintln!("no critical dilation in [{}, {}]", a.t_min, a.t_max),
    }
    Ok(())
}

fn scan_mass(a: ScanArgs) -> std::result::Result<(), Failure> {
    let (config, spec) = load_problem(&a.problem)?;
    let masses = a
        .masses
        .clone()
        .or_else(|| config.masses.clone())
        .ok_or_else(|| Failure::Usage("no masses given (use --masses or the config key `masses`)".into()))?;
    let jobs = match a.jobs {
        Some(j) => j,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("{THREADS_ENV}={v} is not a positive integer")))?,
            Err(_) => 1,
        },
    };
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be positive".into()));
    }
    let scan = mass_scan_rescaled(&spec, &masses, jobs)?;
    let rows = (0..masses.len()).map(|i| {
        vec![
            fmt_f64(scan.a_values[i]),
            fmt_f64(scan.level_values[i]),
            fmt_f64(scan.lambda_values[i]),
            scan.converged[i].to_string(),
        ]
    });
    let csv = csv_table(&["a", "level", "lambda", "converged"], rows);
    emit_csv(out_dir(&a.problem, &config).as_deref(), "mass_scan.csv", &csv)?;
    for (a_val, err) in scan.a_values.iter().zip(&scan.errors) {
        if let Some(e) = err {
            eprintln!("a = {a_val}: {e}");
        }
    }
    if scan.converged.iter().any(|c| !c) {
        return Err(Failure::Numerical("some masses did not converge".into()));
    }
    Ok(())
}

fn emit_csv(dir: Option<&Path>, name: &str, csv: &str) -> Result<()> {
    print!("{csv}");
    if let Some(dir) = dir {
        write_atomic(&dir.join(name), csv.as_bytes())?;
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> std::result::Result<(), Failure> {
    let text = std::fs::read_to_string(&a.result).map_err(Error::from)?;
    let file: ResultFile = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let spec = file.config.to_problem()?;
    let base = a.result.parent().unwrap_or(Path::new("."));
    let (u, manifest) = load_field(&base.join(&file.field))?;
    if !u.grid().same_as(spec.grid()) || manifest.s1 != spec.s1() || manifest.s2 != spec.s2() {
        return Err(Failure::Usage("field file does not match the stored configuration".into()));
    }
    let result = SolveResult::from_record(file.result, u);
    let report = verify_solution(&result, &spec)?;
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}
