//! The full spinor on a meridian grid, with its frame and connection.

use rayon::prelude::*;

use crate::clifford::{polar_spinor, Spinor, C64};
use crate::geometry::{
    spin_connection_closed_form, tetrads_from_x, FieldJet, Grid, MomentumField, SpinConnection, TetradFrame,
};
use crate::polar_trial::{angle_jets, PolarField};
use crate::radial::{RadialProblem, RadialSolution};

use super::VerifyError;

/// Radial profile the spinor is built from. `riccati_z` and the `PolarField`
/// arrays share `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub field: PolarField,
    pub riccati_z: Vec<f64>,
}

impl RadialProfile {
    pub fn from_solution(sol: &RadialSolution) -> Self {
        RadialProfile {
            field: PolarField::new(sol.r.clone(), sol.x.clone(), sol.dx.clone(), sol.g.clone(), sol.k),
            riccati_z: sol.riccati_z.clone(),
        }
    }

    /// Rebuilds `X` and `X'` from a `Z` column, as the solver does.
    pub fn from_riccati(problem: &RadialProblem, r: Vec<f64>, riccati_z: Vec<f64>, g: Vec<f64>, k: f64) -> Self {
        let x = riccati_z.iter().map(|&z| 0.5 * (1.0 / z - z)).collect();
        let dx = riccati_z
            .iter()
            .zip(&r)
            .map(|(&z, &rr)| -0.5 * (1.0 + 1.0 / (z * z)) * problem.riccati_rhs(z, rr))
            .collect();
        RadialProfile {
            field: PolarField::new(r, x, dx, g, k),
            riccati_z,
        }
    }

    /// Samples at the radii of `grid`: exact nodes are copied, other radii are
    /// filled by cubic Hermite interpolation of `Z` and `G`.
    pub fn resample(&self, problem: &RadialProblem, radii: &[f64]) -> Result<RadialProfile, VerifyError> {
        let src = &self.field.r;
        let n = src.len();
        if n < 2 {
            return Err(VerifyError::GridMismatch("radial profile has fewer than two points".into()));
        }
        let (lo, hi) = (src[0], src[n - 1]);
        let mut z = Vec::with_capacity(radii.len());
        let mut g = Vec::with_capacity(radii.len());
        let mut exact = Vec::with_capacity(radii.len());
        for &r in radii {
            let tol = 1e-12 * r;
            if r < lo - tol || r > hi + tol {
                return Err(VerifyError::GridMismatch(format!(
                    "verification radius {r} outside the radial solution [{lo}, {hi}]"
                )));
            }
            let j = src.partition_point(|&s| s < r - tol);
            if j < n && (src[j] - r).abs() <= tol {
                z.push(self.riccati_z[j]);
                g.push(self.field.g[j]);
                exact.push(Some(j));
                continue;
            }
            let j = j.clamp(1, n - 1);
            let (r0, r1) = (src[j - 1], src[j]);
            let h = r1 - r0;
            let t = (r - r0) / h;
            let herm = |y0: f64, d0: f64, y1: f64, d1: f64| {
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * h * d0
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * h * d1
            };
            let (z0, z1) = (self.riccati_z[j - 1], self.riccati_z[j]);
            z.push(herm(z0, problem.riccati_rhs(z0, r0), z1, problem.riccati_rhs(z1, r1)));
            let (x0, x1) = (self.field.x[j - 1], self.field.x[j]);
            g.push(herm(
                self.field.g[j - 1],
                problem.g_rate(x0, r0),
                self.field.g[j],
                problem.g_rate(x1, r1),
            ));
            exact.push(None);
        }
        let mut out = RadialProfile::from_riccati(problem, radii.to_vec(), z, g, self.field.k);
        // keep the solver's own X, X' where the node is shared
        for (i, e) in exact.iter().enumerate() {
            if let Some(j) = *e {
                out.field.x[i] = self.field.x[j];
                out.field.dx[i] = self.field.dx[j];
            }
        }
        Ok(out)
    }
}

/// Everything evaluated at one grid point, at `t = 0`, `varphi = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointData {
    pub alpha: FieldJet,
    pub gamma: FieldJet,
    pub beta: FieldJet,
    pub phi2: f64,
    pub frame: TetradFrame,
    pub connection: SpinConnection,
    pub spinor: Spinor,
}

#[derive(Debug, Clone)]
pub struct AssembledSolution {
    pub grid: Grid,
    pub problem: RadialProblem,
    pub momentum: MomentumField,
    /// Radial profile on `grid.r`.
    pub profile: RadialProfile,
    /// Row-major, `grid.index(i, j)`.
    pub points: Vec<PointData>,
}

impl AssembledSolution {
    pub fn at(&self, i: usize, j: usize) -> &PointData {
        &self.points[self.grid.index(i, j)]
    }

    /// `psi(t, r_i, theta_j, varphi)`.
    pub fn spinor_at(&self, t: f64, i: usize, j: usize, varphi: f64) -> Spinor {
        let phase = C64::from_polar(1.0, -(self.problem.energy * t - 0.5 * varphi));
        self.at(i, j).spinor.scaled(phase)
    }

    /// `qA_t = -V`, `qA_varphi = 0`.
    pub fn gauge(&self, i: usize) -> [f64; 4] {
        [-self.problem.potential.value(self.grid.r[i]), 0.0, 0.0, 0.0]
    }

    pub fn spinors(&self) -> impl Iterator<Item = &Spinor> {
        self.points.iter().map(|p| &p.spinor)
    }

    /// Radii where `Z <= 0`; the trial family is matched on the other branch
    /// there, so field and Dirac checks skip them.
    pub fn nonpositive_riccati(&self, i: usize) -> bool {
        !(self.profile.riccati_z[i] > 0.0)
    }
}

/// Builds `psi = e^{-i(E t - varphi/2)} sqrt(phi^2) (e^{i beta/2}, 0, e^{-i beta/2}, 0)`
/// together with the trial frame and its connection at every grid point.
pub fn assemble_spinor(
    problem: &RadialProblem,
    profile: &RadialProfile,
    grid: &Grid,
) -> Result<AssembledSolution, VerifyError> {
    let profile = profile.resample(problem, &grid.r)?;
    let nt = grid.ntheta();
    let rows: Vec<Result<Vec<PointData>, VerifyError>> = (0..grid.nr())
        .into_par_iter()
        .map(|i| {
            let r = grid.r[i];
            let x = profile.field.x[i];
            let dx = profile.field.dx[i];
            let mut row = Vec::with_capacity(nt);
            for &th in &grid.theta {
                let at = |e: String| VerifyError::Assembly { r, theta: th, msg: e };
                let jets = angle_jets(x, dx, th).map_err(|e| at(e.to_string()))?;
                let phi2 = profile.field.phi2(i, th);
                let frame = tetrads_from_x(r, th, x).map_err(|e| at(e.to_string()))?;
                let connection =
                    spin_connection_closed_form(th, &jets.alpha, &jets.gamma).map_err(|e| at(e.to_string()))?;
                let spinor = polar_spinor(phi2.sqrt(), jets.beta.value).map_err(|e| at(e.to_string()))?;
                row.push(PointData {
                    alpha: jets.alpha,
                    gamma: jets.gamma,
                    beta: jets.beta,
                    phi2,
                    frame,
                    connection,
                    spinor,
                });
            }
            Ok(row)
        })
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    for row in rows {
        points.extend(row?);
    }
    Ok(AssembledSolution {
        grid: grid.clone(),
        problem: problem.clone(),
        momentum: MomentumField::new(problem.energy, problem.potential.clone()),
        profile,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::bilinears;
    use crate::radial::{log_grid, solve, Potential, SolveOptions};
    use std::f64::consts::FRAC_PI_2;

    fn coulomb() -> (RadialProblem, RadialSolution) {
        let p = RadialProblem::new(0.8, 1.0, Potential::Coulomb { q2: 0.6 });
        let s = solve(&p, &log_grid(0.5, 20.0, 41), &SolveOptions::default()).unwrap();
        (p, s)
    }

    #[test]
    fn equator_spinor_is_seed_direction() {
        let (p, s) = coulomb();
        let grid = Grid::new(0.5, 20.0, 41, FRAC_PI_2 - 0.5, 3).unwrap();
        let a = assemble_spinor(&p, &RadialProfile::from_solution(&s), &grid).unwrap();
        let psi = &a.at(5, 1).spinor;
        let c = psi.components();
        assert!((c[0] - c[2]).norm() < 1e-15 * c[0].norm());
        assert!(c[1].norm() == 0.0 && c[3].norm() == 0.0);
        assert!(c[0].im.abs() < 1e-15 * c[0].norm());
    }

    #[test]
    fn pole_angle_ratio() {
        let (p, s) = coulomb();
        let grid = Grid::new(0.5, 20.0, 41, 1e-3, 3).unwrap();
        let a = assemble_spinor(&p, &RadialProfile::from_solution(&s), &grid).unwrap();
        let b = bilinears(&a.at(3, 0).spinor).unwrap();
        let t = 1e-3f64;
        let expected = -t.cos() / (4.0 / 3.0);
        assert!((b.theta / b.phi - expected).abs() < 1e-8, "{}", b.theta / b.phi);
    }

    #[test]
    fn resampling_shared_and_interpolated_nodes() {
        let (p, s) = coulomb();
        let prof = RadialProfile::from_solution(&s);
        let sub: Vec<f64> = s.r.iter().step_by(2).copied().collect();
        let r = prof.resample(&p, &sub).unwrap();
        assert_eq!(r.field.x[3], s.x[6]);
        let mid = [0.5 * (s.r[3] + s.r[4])];
        let r = prof.resample(&p, &mid).unwrap();
        assert!((r.riccati_z[0] - 1.0 / 3.0).abs() < 1e-9);
        let g_exact = 1.2 * mid[0] - 1.6 * mid[0].ln() - (1.2 * 0.5 - 1.6 * 0.5f64.ln());
        assert!((r.field.g[0] - g_exact).abs() < 1e-5, "{} {}", r.field.g[0], g_exact);
        assert!(prof.resample(&p, &[25.0]).is_err());
    }

    #[test]
    fn phase_factor() {
        let (p, s) = coulomb();
        let grid = Grid::new(0.5, 20.0, 41, 0.3, 5).unwrap();
        let a = assemble_spinor(&p, &RadialProfile::from_solution(&s), &grid).unwrap();
        let psi0 = a.at(2, 2).spinor;
        let psi = a.spinor_at(1.0, 2, 2, std::f64::consts::PI);
        // e^{-i(0.8 - pi/2)}
        let ph = C64::from_polar(1.0, -(0.8 - FRAC_PI_2));
        assert!((psi.components() - psi0.components() * ph).norm() < 1e-15);
    }
}
