//! Output files: radial and polar tables, run metadata, scan log, report.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::radial::shooting::ShootingResult;
use crate::radial::{InitialData, Potential, RadialProblem, RadialSolution};
use crate::verify::RadialProfile;

use super::config::{GridConfig, PotentialKind, RunConfig, Tolerances};
use super::CliError;

pub const RADIAL_CSV: &str = "radial.csv";
pub const POLAR_CSV: &str = "polar.csv";
pub const META_JSON: &str = "meta.json";
pub const SCAN_JSON: &str = "scan.json";
pub const REPORT_JSON: &str = "report.json";

const RADIAL_HEADER: [&str; 7] = ["r", "z", "dz", "Z", "X", "G", "V"];

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row.into_iter().map(num)).map_err(wrap)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn radial_csv(sol: &RadialSolution) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &RADIAL_HEADER,
        (0..sol.len()).map(|i| {
            vec![
                sol.r[i],
                sol.z[i],
                sol.dz[i],
                sol.riccati_z[i],
                sol.x[i],
                sol.g[i],
                sol.potential_values[i],
            ]
        }),
    )
}

/// `beta` and `phi^2` on the output grid; `beta` is NaN where undefined.
pub fn polar_csv(profile: &RadialProfile, theta: &[f64]) -> Result<Vec<u8>, CliError> {
    let f = &profile.field;
    csv_bytes(
        &["r", "theta", "beta", "phi2"],
        (0..f.len()).flat_map(move |i| {
            theta.iter().map(move |&th| vec![f.r[i], th, f.beta(i, th).unwrap_or(f64::NAN), f.phi2(i, th)])
        }),
    )
}

pub struct RadialTable {
    pub r: Vec<f64>,
    pub riccati_z: Vec<f64>,
    pub g: Vec<f64>,
}

pub fn read_radial_csv(path: &Path) -> Result<RadialTable, CliError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut rd = csv::Reader::from_reader(file);
    let header = rd.headers().map_err(|e| io_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != RADIAL_HEADER {
        return Err(CliError::Config(format!(
            "{}: expected columns {}",
            path.display(),
            RADIAL_HEADER.join(",")
        )));
    }
    let mut t = RadialTable {
        r: Vec::new(),
        riccati_z: Vec::new(),
        g: Vec::new(),
    };
    for (n, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let field = |k: usize| -> Result<f64, CliError> {
            rec[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("{} row {}: {e}", path.display(), n + 2)))
        };
        t.r.push(field(0)?);
        t.riccati_z.push(field(3)?);
        t.g.push(field(5)?);
    }
    if t.r.len() < 2 {
        return Err(CliError::Config(format!("{}: fewer than two rows", path.display())));
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub program: String,
    pub version: String,
    pub kind: PotentialKind,
    pub potential: Potential,
    pub potential_label: String,
    pub energy: f64,
    pub mass: f64,
    pub k: f64,
    pub normalize: bool,
    pub convergent: bool,
    pub poles: Vec<f64>,
    pub zeros: Vec<f64>,
    pub initial: InitialData,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
}

impl Meta {
    pub fn new(cfg: &RunConfig, sol: &RadialSolution) -> Meta {
        Meta {
            program: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind: cfg.kind,
            potential: cfg.potential.clone(),
            potential_label: cfg.potential.to_string(),
            energy: sol.energy,
            mass: sol.mass,
            k: sol.k,
            normalize: cfg.normalize,
            convergent: sol.convergent,
            poles: sol.poles.clone(),
            zeros: sol.zeros.clone(),
            initial: cfg.initial,
            grid: cfg.grid,
            tolerances: cfg.tolerances,
        }
    }

    pub fn problem(&self) -> RadialProblem {
        RadialProblem::new(self.energy, self.mass, self.potential.clone())
    }
}

pub fn read_meta(path: &Path) -> Result<Meta, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanLog {
    pub bracket: (f64, f64),
    pub energy: f64,
    pub final_bracket: (f64, f64),
    pub r_outer: f64,
    pub evaluations: Vec<ScanStep>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanStep {
    pub energy: f64,
    pub matching: f64,
}

impl ScanLog {
    pub fn new(bracket: (f64, f64), res: &ShootingResult) -> Self {
        ScanLog {
            bracket,
            energy: res.energy,
            final_bracket: res.bracket,
            r_outer: res.r_outer,
            evaluations: res
                .log
                .iter()
                .map(|&(energy, matching)| ScanStep { energy, matching })
                .collect(),
        }
    }
}

pub fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}
