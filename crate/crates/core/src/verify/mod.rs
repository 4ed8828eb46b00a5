//! End-to-end certification of an assembled solution: field equations,
//! the Dirac residual, algebraic identities, geometry and closed forms.

pub mod assemble;
pub mod closed_form;
pub mod residuals;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{riemann_residual, GeometryError, Grid, GridResidual};
use crate::radial::{RadialError, RadialProblem};

pub use assemble::{assemble_spinor, AssembledSolution, PointData, RadialProfile};
pub use closed_form::{
    closed_form_compare, coulomb_compare, fit_power_exponential, inverse_square_compare, small_r_convergence, ClosedFormKind,
    ConvergenceWindow,
};
pub use residuals::{
    bilinear_frame_consistency, continuity_check, dirac_operator, dirac_residual, fierz_on_grid,
    field_equation_residuals, maxwell_check, DiracOptions, FieldEquationResiduals,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("cannot assemble the spinor at r = {r}, theta = {theta}: {msg}")]
    Assembly { r: f64, theta: f64, msg: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error("closed form not applicable: {0}")]
    Regime(String),
    #[error("no interior points left after exclusions")]
    NoPoints,
}

/// Pass/fail rules shared by every check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TolerancePolicy {
    /// Largest relative residual accepted on the fine grid.
    pub relative: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Relative residuals at or below this on both grids are exact; the ratio
    /// test is skipped for them.
    pub exact_floor: f64,
    /// Algebraic identities (Fierz, analytic field strength).
    pub identity: f64,
    /// Bilinears against the frame.
    pub frame: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            relative: 1e-4,
            ratio_min: 3.2,
            ratio_max: 4.8,
            exact_floor: 1e-13,
            identity: 1e-12,
            frame: 1e-10,
        }
    }
}

impl TolerancePolicy {
    /// Smallness on the fine grid plus second-order decay from the coarse one.
    pub fn judge_convergent(
        &self,
        name: &str,
        fine: &GridResidual,
        coarse: Option<&GridResidual>,
        spacing: (f64, f64),
        excluded: usize,
    ) -> ResidualReport {
        let relative = fine.relative();
        let mut note = None;
        let (ratio, pass) = match coarse {
            Some(c) => {
                if relative <= self.exact_floor && c.relative() <= self.exact_floor {
                    note = Some("zero to rounding on both grids; ratio not applicable".to_string());
                    (None, true)
                } else {
                    let ratio = c.max_abs / fine.max_abs;
                    let ok = relative <= self.relative && ratio >= self.ratio_min && ratio <= self.ratio_max;
                    (Some(ratio), ok)
                }
            }
            None => (None, relative <= self.relative),
        };
        ResidualReport {
            name: name.to_string(),
            max_residual: fine.max_abs,
            l2_residual: fine.l2,
            relative,
            ratio,
            tolerance: self.relative,
            pass,
            h_r: spacing.0,
            h_theta: spacing.1,
            points: fine.points,
            excluded,
            note,
        }
    }

    pub fn judge_absolute(&self, name: &str, max: f64, l2: f64, tolerance: f64, points: usize) -> ResidualReport {
        ResidualReport {
            name: name.to_string(),
            max_residual: max,
            l2_residual: l2,
            relative: max,
            ratio: None,
            tolerance,
            pass: max <= tolerance,
            h_r: 0.0,
            h_theta: 0.0,
            points,
            excluded: 0,
            note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub name: String,
    pub max_residual: f64,
    pub l2_residual: f64,
    /// The quantity compared with `tolerance`.
    pub relative: f64,
    /// Coarse-to-fine ratio of the max residual; present only for refinement checks.
    pub ratio: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    /// Largest radial step and the polar step on the fine grid.
    pub h_r: f64,
    pub h_theta: f64,
    pub points: usize,
    pub excluded: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub energy: f64,
    pub mass: f64,
    pub potential: String,
    pub fine_grid: [usize; 2],
    pub coarse_grid: [usize; 2],
    pub checks: Vec<ResidualReport>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&ResidualReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    pub policy: TolerancePolicy,
    pub dirac: DiracOptions,
    /// Run the closed-form comparison when the problem admits one.
    pub closed_form: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            policy: TolerancePolicy::default(),
            dirac: DiracOptions::default(),
            closed_form: true,
        }
    }
}

fn spacing(grid: &Grid) -> (f64, f64) {
    (grid.h_r(grid.nr() - 1), grid.htheta)
}

/// Assembles the solution on `fine` and on its coarsening, and runs every check.
pub fn verify_profile(
    problem: &RadialProblem,
    profile: &RadialProfile,
    fine: &Grid,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let coarse = fine.coarsened()?;
    let af = assemble_spinor(problem, profile, fine)?;
    let ac = assemble_spinor(problem, profile, &coarse)?;
    let policy = &opts.policy;
    let h = spacing(fine);
    let mut checks = Vec::new();

    let (fz_max, fz_n) = {
        let (a, na) = fierz_on_grid(&af);
        let (b, nb) = fierz_on_grid(&ac);
        (a.max(b), na + nb)
    };
    checks.push(policy.judge_absolute("fierz", fz_max, fz_max, policy.identity, fz_n));

    let bf = bilinear_frame_consistency(&af).max(bilinear_frame_consistency(&ac));
    checks.push(policy.judge_absolute("bilinear_frame", bf, bf, policy.frame, af.points.len() + ac.points.len()));

    let ff = field_equation_residuals(&af)?;
    let fc = field_equation_residuals(&ac)?;
    for (k, name) in ["field_eq_a", "field_eq_b", "field_eq_c", "field_eq_d"].iter().enumerate() {
        checks.push(policy.judge_convergent(name, &ff.equations[k], Some(&fc.equations[k]), h, ff.excluded));
    }

    let (df, dex) = dirac_residual(&af, &opts.dirac)?;
    let (dc, _) = dirac_residual(&ac, &opts.dirac)?;
    checks.push(policy.judge_convergent("dirac", &df, Some(&dc), h, dex));

    let cf = continuity_check(&af)?;
    let cc = continuity_check(&ac)?;
    checks.push(policy.judge_convergent("continuity", &cf, Some(&cc), h, 0));

    let conn = |a: &AssembledSolution| a.points.iter().map(|p| p.connection).collect::<Vec<_>>();
    let rf = riemann_residual(fine, &conn(&af))?;
    let rc = riemann_residual(&coarse, &conn(&ac))?;
    checks.push(policy.judge_convergent("riemann", &rf, Some(&rc), h, 0));

    let mx = maxwell_check(&af)?;
    checks.push(policy.judge_absolute("maxwell", mx, mx, policy.identity, af.points.len()));

    if opts.closed_form {
        if let Some(report) = coulomb_compare(problem, &af.profile) {
            checks.push(report);
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        energy: problem.energy,
        mass: problem.mass,
        potential: problem.potential.to_string(),
        fine_grid: [fine.nr(), fine.ntheta()],
        coarse_grid: [coarse.nr(), coarse.ntheta()],
        checks,
        pass,
    })
}
