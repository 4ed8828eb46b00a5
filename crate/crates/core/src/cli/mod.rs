//! Command line: `solve`, `scan-energy` and `verify`.
//!
//! Exit codes: 0 success, 1 usage or configuration, 2 solver failure,
//! 3 no eigenvalue in the bracket, 4 verification failed.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::geometry::Grid;
use crate::radial::{log_grid, shoot_energy, solve, RadialError, RadialProblem, RadialSolution, SolveOptions};
use crate::verify::{verify_profile, RadialProfile, VerificationReport, VerifyOptions};

pub use config::{GridConfig, InitKind, PotentialKind, ProblemArgs, RunConfig, Tolerances};
use output::{
    json_bytes, polar_csv, radial_csv, read_meta, read_radial_csv, write_atomic, Meta, ScanLog, META_JSON,
    POLAR_CSV, RADIAL_CSV, REPORT_JSON, SCAN_JSON,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("no eigenvalue: {0}")]
    NoEigenvalue(String),
    #[error("verification failed: {}", .0.join(", "))]
    VerificationFailed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
            CliError::NoEigenvalue(_) => 3,
            CliError::VerificationFailed(_) => 4,
        }
    }
}

impl From<RadialError> for CliError {
    fn from(e: RadialError) -> Self {
        match e {
            RadialError::NoSignChange { .. } | RadialError::ZeroAtMatch { .. } => CliError::NoEigenvalue(e.to_string()),
            RadialError::InvalidInput(_) | RadialError::InvalidGrid(_) => CliError::Usage(e.to_string()),
            RadialError::Potential(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "polar-dirac", version, about = "Polar-form Dirac solutions under radial potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the radial problem at a fixed energy and write the tables
    Solve(ProblemArgs),
    /// Locate the lowest eigenvalue in a bracket, then solve there
    ScanEnergy(ProblemArgs),
    /// Certify a solution, either read back from --input or computed inline
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Directory holding radial.csv and meta.json from an earlier run
    #[arg(long, value_name = "DIR")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub problem: ProblemArgs,
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Solve(a) => {
            let cfg = RunConfig::resolve(a)?;
            let energy = cfg
                .energy
                .ok_or_else(|| CliError::Usage("solve needs --energy (use scan-energy for a bracket)".into()))?;
            let sol = solve_at(&cfg, energy)?;
            write_solution(&cfg, &sol)?;
            summary(&sol, &cfg.out);
            Ok(())
        }
        Command::ScanEnergy(a) => {
            let cfg = RunConfig::resolve(a)?;
            if cfg.energy.is_some() {
                return Err(CliError::Usage("scan-energy takes --energy-bracket, not --energy".into()));
            }
            let sol = scan_and_solve(&cfg)?;
            summary(&sol, &cfg.out);
            Ok(())
        }
        Command::Verify(v) => match &v.input {
            Some(dir) => verify_from_files(dir, &v.problem),
            None => verify_inline(&v.problem),
        },
    }
}

fn solve_at(cfg: &RunConfig, energy: f64) -> Result<RadialSolution, CliError> {
    let problem = RadialProblem::new(energy, cfg.mass, cfg.potential.clone());
    let g = &cfg.grid;
    let opts = SolveOptions {
        rtol: cfg.tolerances.rtol,
        atol: cfg.tolerances.atol,
        initial: cfg.initial,
        k: cfg.module_k,
        normalize: cfg.normalize,
    };
    Ok(solve(&problem, &log_grid(g.r_min, g.r_max, g.nr), &opts)?)
}

fn theta_grid(g: &GridConfig) -> Result<Grid, CliError> {
    Grid::new(g.r_min, g.r_max, g.nr, g.theta_min, g.ntheta).map_err(|e| CliError::Usage(e.to_string()))
}

fn write_solution(cfg: &RunConfig, sol: &RadialSolution) -> Result<(), CliError> {
    let grid = theta_grid(&cfg.grid)?;
    let problem = RadialProblem::new(sol.energy, sol.mass, cfg.potential.clone());
    let profile = profile_of(&problem, sol);
    write_atomic(&cfg.out.join(RADIAL_CSV), &radial_csv(sol)?)?;
    write_atomic(&cfg.out.join(POLAR_CSV), &polar_csv(&profile, &grid.theta)?)?;
    write_atomic(&cfg.out.join(META_JSON), &json_bytes(&Meta::new(cfg, sol))?)?;
    Ok(())
}

/// The profile the verifier sees; built from `Z` exactly as when reading the
/// tables back, so both routes agree bit for bit.
fn profile_of(problem: &RadialProblem, sol: &RadialSolution) -> RadialProfile {
    RadialProfile::from_riccati(problem, sol.r.clone(), sol.riccati_z.clone(), sol.g.clone(), sol.k)
}

fn scan_and_solve(cfg: &RunConfig) -> Result<RadialSolution, CliError> {
    let bracket = cfg
        .bracket
        .ok_or_else(|| CliError::Usage("scan-energy needs --energy-bracket LO,HI".into()))?;
    if !(bracket.0 < bracket.1) {
        return Err(CliError::Usage(format!("empty energy bracket [{}, {}]", bracket.0, bracket.1)));
    }
    let res = shoot_energy(&cfg.potential, cfg.mass, bracket, &cfg.shooting)?;
    write_atomic(&cfg.out.join(SCAN_JSON), &json_bytes(&ScanLog::new(bracket, &res))?)?;
    eprintln!(
        "eigenvalue E = {:.12} after {} evaluations",
        res.energy,
        res.log.len()
    );
    let sol = solve_at(cfg, res.energy)?;
    write_solution(cfg, &sol)?;
    Ok(sol)
}

fn summary(sol: &RadialSolution, out: &Path) {
    println!("E = {:.12}", sol.energy);
    println!("K = {:.12e}", sol.k);
    println!("convergent = {}", sol.convergent);
    if !sol.poles.is_empty() {
        println!("poles of X at r = {:?}", sol.poles);
    }
    println!("wrote {}", out.display());
}

fn finish(report: &VerificationReport, out: &Path) -> Result<(), CliError> {
    write_atomic(&out.join(REPORT_JSON), &json_bytes(report)?)?;
    for c in &report.checks {
        let ratio = c.ratio.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<15} {:<4} relative = {:.3e}  max = {:.3e}  ratio = {}",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.relative,
            c.max_residual,
            ratio
        );
    }
    if report.pass {
        println!("verification passed");
        Ok(())
    } else {
        Err(CliError::VerificationFailed(
            report.failed().into_iter().map(String::from).collect(),
        ))
    }
}

fn run_verify(problem: &RadialProblem, profile: &RadialProfile, g: &GridConfig, policy_cfg: &Tolerances) -> Result<VerificationReport, CliError> {
    let grid = theta_grid(g)?;
    let opts = VerifyOptions {
        policy: policy_cfg.verify,
        ..Default::default()
    };
    verify_profile(problem, profile, &grid, &opts).map_err(|e| CliError::Solver(e.to_string()))
}

fn verify_inline(a: &ProblemArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(a)?;
    let sol = match cfg.energy {
        Some(e) => {
            let sol = solve_at(&cfg, e)?;
            write_solution(&cfg, &sol)?;
            sol
        }
        None => scan_and_solve(&cfg)?,
    };
    let problem = RadialProblem::new(sol.energy, sol.mass, cfg.potential.clone());
    let report = run_verify(&problem, &profile_of(&problem, &sol), &cfg.grid, &cfg.tolerances)?;
    finish(&report, &cfg.out)
}

fn verify_from_files(dir: &Path, a: &ProblemArgs) -> Result<(), CliError> {
    let meta = read_meta(&dir.join(META_JSON))?;
    let table = read_radial_csv(&dir.join(RADIAL_CSV))?;
    let problem = meta.problem();
    let profile = RadialProfile::from_riccati(&problem, table.r, table.riccati_z, table.g, meta.k);
    let mut tol = meta.tolerances;
    if let Some(v) = a.verify_tol {
        tol.verify.relative = v;
    }
    let report = run_verify(&problem, &profile, &meta.grid, &tol)?;
    let out = a.out.clone().unwrap_or_else(|| dir.to_path_buf());
    finish(&report, &out)
}
