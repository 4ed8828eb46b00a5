//! Run configuration: defaults, then the TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::radial::shooting::ShootingConfig;
use crate::radial::{InitialData, Potential, TabulatedPotential};
use crate::verify::closed_form::truncated_initial;
use crate::verify::TolerancePolicy;

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    /// q2 / r
    Coulomb,
    /// q2 / r + k / r^2
    #[value(alias = "inverse-square")]
    CoulombInverseSquare,
    /// c0 + c1 / r + c2 / r^2
    InversePowers,
    /// two-column table from --potential-file
    Tabulated,
    /// k / r^2 with E = m = 0, started from the small-radius closed form
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Auto,
    Frobenius,
    DecayingTail,
}

/// Flags shared by every subcommand. Anything left unset falls back to the
/// config file, then to the built-in default.
#[derive(Debug, Clone, Default, Args)]
pub struct ProblemArgs {
    /// TOML file with [problem], [grid], [tolerances], [output], [shooting]
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub potential: Option<PotentialKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub q2: Option<f64>,
    /// Inverse-square coefficient
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c2: Option<f64>,
    /// Two-column (r, V) text file
    #[arg(long, value_name = "FILE")]
    pub potential_file: Option<PathBuf>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub energy: Option<f64>,
    /// LO,HI
    #[arg(long, value_delimiter = ',', value_name = "LO,HI", allow_negative_numbers = true)]
    pub energy_bracket: Option<Vec<f64>>,
    #[arg(long)]
    pub rmin: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long)]
    pub nr: Option<usize>,
    #[arg(long)]
    pub ntheta: Option<usize>,
    #[arg(long)]
    pub theta_min: Option<f64>,
    /// Relative tolerance of the radial integrator
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Width of the final energy bracket
    #[arg(long)]
    pub tol_e: Option<f64>,
    /// Relative residual accepted by the verifier
    #[arg(long)]
    pub verify_tol: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Rescale K so the density integrates to one over the grid
    #[arg(long)]
    pub normalize: bool,
    /// Module constant K (ignored with --normalize)
    #[arg(long = "module-k")]
    pub module_k: Option<f64>,
    #[arg(long, value_enum)]
    pub init: Option<InitKind>,
    #[arg(long)]
    pub r_inner: Option<f64>,
    #[arg(long)]
    pub r_match: Option<f64>,
    #[arg(long)]
    pub r_outer: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileProblem {
    potential: Option<PotentialKind>,
    q2: Option<f64>,
    k: Option<f64>,
    c0: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    potential_file: Option<PathBuf>,
    mass: Option<f64>,
    energy: Option<f64>,
    energy_bracket: Option<[f64; 2]>,
    init: Option<InitKind>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileGrid {
    r_min: Option<f64>,
    r_max: Option<f64>,
    nr: Option<usize>,
    ntheta: Option<usize>,
    theta_min: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTolerances {
    rtol: Option<f64>,
    atol: Option<f64>,
    tol_e: Option<f64>,
    verify_relative: Option<f64>,
    ratio_min: Option<f64>,
    ratio_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOutput {
    dir: Option<PathBuf>,
    normalize: Option<bool>,
    module_k: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileShooting {
    r_inner: Option<f64>,
    r_match: Option<f64>,
    r_outer: Option<f64>,
    max_iter: Option<usize>,
    scan_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    problem: FileProblem,
    #[serde(default)]
    grid: FileGrid,
    #[serde(default)]
    tolerances: FileTolerances,
    #[serde(default)]
    output: FileOutput,
    #[serde(default)]
    shooting: FileShooting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub nr: usize,
    pub ntheta: usize,
    pub theta_min: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            r_min: 0.5,
            r_max: 20.0,
            nr: 400,
            ntheta: 200,
            theta_min: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub tol_e: f64,
    pub verify: TolerancePolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: PotentialKind,
    pub potential: Potential,
    pub mass: f64,
    pub energy: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    pub initial: InitialData,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub out: PathBuf,
    pub normalize: bool,
    pub module_k: f64,
    pub shooting: ShootingConfig,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn need(v: Option<f64>, flag: &str, kind: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| usage(format!("potential '{kind}' needs --{flag}")))
}

fn read_file(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(args: &ProblemArgs) -> Result<RunConfig, CliError> {
        let file = match &args.config {
            Some(p) => read_file(p)?,
            None => ConfigFile::default(),
        };
        // file paths in the config are relative to the config file
        let base = args.config.as_ref().and_then(|p| p.parent()).map(Path::to_path_buf);
        let rel = |p: PathBuf| match (&base, p.is_relative()) {
            (Some(b), true) => b.join(p),
            _ => p,
        };
        let fp = &file.problem;

        let kind = args
            .potential
            .or(fp.potential)
            .ok_or_else(|| usage("no potential given (use --potential)"))?;
        let q2 = args.q2.or(fp.q2);
        let k = args.k.or(fp.k);
        let potential = match kind {
            PotentialKind::Coulomb => Potential::Coulomb {
                q2: need(q2, "q2", "coulomb")?,
            },
            PotentialKind::CoulombInverseSquare => Potential::CoulombInverseSquare {
                q2: need(q2, "q2", "coulomb-inverse-square")?,
                k: need(k, "k", "coulomb-inverse-square")?,
            },
            PotentialKind::InversePowers => Potential::InversePowers {
                c0: args.c0.or(fp.c0).unwrap_or(0.0),
                c1: args.c1.or(fp.c1).unwrap_or(0.0),
                c2: args.c2.or(fp.c2).unwrap_or(0.0),
            },
            PotentialKind::Tabulated => {
                let path = args
                    .potential_file
                    .clone()
                    .or_else(|| fp.potential_file.clone().map(rel))
                    .ok_or_else(|| usage("potential 'tabulated' needs --potential-file"))?;
                Potential::Tabulated(TabulatedPotential::from_file(&path).map_err(|e| CliError::Config(e.to_string()))?)
            }
            PotentialKind::Truncated => Potential::CoulombInverseSquare {
                q2: 0.0,
                k: need(k, "k", "truncated")?,
            },
        };

        let mut mass = args.mass.or(fp.mass).unwrap_or(1.0);
        let mut energy = args.energy.or(fp.energy);
        let bracket = match args.energy_bracket.as_deref() {
            Some([a, b]) => Some((*a, *b)),
            Some(_) => return Err(usage("--energy-bracket takes LO,HI")),
            None => fp.energy_bracket.map(|[a, b]| (a, b)),
        };
        if energy.is_some() && bracket.is_some() {
            return Err(usage("give either an energy or an energy bracket, not both"));
        }

        let g = &file.grid;
        let d = GridConfig::default();
        let grid = GridConfig {
            r_min: args.rmin.or(g.r_min).unwrap_or(d.r_min),
            r_max: args.rmax.or(g.r_max).unwrap_or(d.r_max),
            nr: args.nr.or(g.nr).unwrap_or(d.nr),
            ntheta: args.ntheta.or(g.ntheta).unwrap_or(d.ntheta),
            theta_min: args.theta_min.or(g.theta_min).unwrap_or(d.theta_min),
        };
        if !(grid.r_min > 0.0 && grid.r_max > grid.r_min) {
            return Err(usage(format!(
                "need 0 < rmin < rmax (got {}, {})",
                grid.r_min, grid.r_max
            )));
        }
        if grid.nr < 5 || grid.ntheta < 5 {
            return Err(usage("need at least 5 points per grid direction"));
        }
        if !(grid.theta_min > 0.0 && grid.theta_min < std::f64::consts::FRAC_PI_2) {
            return Err(usage("theta-min must lie in (0, pi/2)"));
        }

        let initial = if kind == PotentialKind::Truncated {
            if mass != 0.0 && (args.mass.is_some() || fp.mass.is_some()) || energy.is_some_and(|e| e != 0.0) {
                return Err(usage("truncated mode fixes E = m = 0"));
            }
            if bracket.is_some() {
                return Err(usage("truncated mode has no energy search"));
            }
            mass = 0.0;
            energy = Some(0.0);
            truncated_initial(need(k, "k", "truncated")?, grid.r_min)
        } else {
            match args.init.or(fp.init).unwrap_or(InitKind::Auto) {
                InitKind::Auto => InitialData::Auto,
                InitKind::Frobenius => InitialData::Frobenius,
                InitKind::DecayingTail => InitialData::DecayingTail,
            }
        };
        if !(mass >= 0.0) {
            return Err(usage("mass must be non-negative"));
        }

        let t = &file.tolerances;
        let mut verify = TolerancePolicy::default();
        if let Some(v) = args.verify_tol.or(t.verify_relative) {
            verify.relative = v;
        }
        if let Some(v) = t.ratio_min {
            verify.ratio_min = v;
        }
        if let Some(v) = t.ratio_max {
            verify.ratio_max = v;
        }
        let s = &file.shooting;
        let mut shooting = ShootingConfig::default();
        let tolerances = Tolerances {
            rtol: args.tol.or(t.rtol).unwrap_or(1e-10),
            atol: args.atol.or(t.atol).unwrap_or(1e-12),
            tol_e: args.tol_e.or(t.tol_e).unwrap_or(shooting.tol_e),
            verify,
        };
        if !(tolerances.rtol > 0.0 && tolerances.atol > 0.0 && tolerances.tol_e > 0.0) {
            return Err(usage("tolerances must be positive"));
        }
        shooting.r_inner = args.r_inner.or(s.r_inner).unwrap_or(shooting.r_inner);
        shooting.r_match = args.r_match.or(s.r_match).unwrap_or(shooting.r_match);
        shooting.r_outer = args.r_outer.or(s.r_outer);
        shooting.max_iter = s.max_iter.unwrap_or(shooting.max_iter);
        shooting.scan_points = s.scan_points.unwrap_or(shooting.scan_points);
        shooting.tol_e = tolerances.tol_e;
        shooting.rtol = tolerances.rtol;
        shooting.atol = tolerances.atol;

        let o = &file.output;
        Ok(RunConfig {
            kind,
            potential,
            mass,
            energy,
            bracket,
            initial,
            grid,
            tolerances,
            out: args.out.clone().or_else(|| o.dir.clone().map(rel)).unwrap_or_else(|| PathBuf::from("out")),
            normalize: args.normalize || o.normalize.unwrap_or(false),
            module_k: args.module_k.or(o.module_k).unwrap_or(1.0),
            shooting,
        })
    }
}
