//! Residuals evaluated on an assembled solution. Radial and polar
//! derivatives are central differences; `t` and `varphi` act on the phase.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{basis, bilinears, check_fierz, Mat4c, Vec4c, C64};
use crate::geometry::{maxwell_strength, metric_diag, GridResidual, SpinConnection, TetradFrame, R, T};

use super::{AssembledSolution, VerifyError};

fn wrap(d: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = d.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Row-parallel loop over interior nodes; `f` returns `Some((residual, scale))`
/// or `None` for an excluded node.
fn interior<F>(a: &AssembledSolution, f: F) -> (GridResidual, usize)
where
    F: Fn(usize, usize) -> Option<(f64, f64)> + Sync,
{
    let g = &a.grid;
    let rows: Vec<((f64, f64, f64, usize), usize)> = (1..g.nr() - 1)
        .into_par_iter()
        .map(|i| {
            let mut acc = (0.0f64, 0.0f64, 0.0f64, 0usize);
            let mut skipped = 0;
            for j in 1..g.ntheta() - 1 {
                match f(i, j) {
                    Some((res, scale)) => {
                        acc.0 = acc.0.max(res);
                        acc.1 += res * res;
                        acc.2 = acc.2.max(scale);
                        acc.3 += 1;
                    }
                    None => skipped += 1,
                }
            }
            (acc, skipped)
        })
        .collect();
    let excluded = rows.iter().map(|r| r.1).sum();
    let stats: Vec<_> = rows.into_iter().map(|r| r.0).collect();
    (GridResidual::reduce(&stats), excluded)
}

fn stencil_ok(a: &AssembledSolution, i: usize) -> bool {
    !(a.nonpositive_riccati(i - 1) || a.nonpositive_riccati(i) || a.nonpositive_riccati(i + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldEquationResiduals {
    /// Equations (a), (b), (c), (d) in order.
    pub equations: [GridResidual; 4],
    pub excluded: usize,
}

/// The four real polar equations with `P_t = E + V`, `P_varphi = -1/2`,
/// evaluated term by term. Each residual is measured against the largest sum
/// of absolute term values.
pub fn field_equation_residuals(a: &AssembledSolution) -> Result<FieldEquationResiduals, VerifyError> {
    let g = &a.grid;
    let m = a.problem.mass;
    let alpha = |i: usize, j: usize| a.at(i, j).alpha.value;
    let beta = |i: usize, j: usize| a.at(i, j).beta.value;
    let gamma = |i: usize, j: usize| a.at(i, j).gamma.value;
    let lnp = |i: usize, j: usize| a.at(i, j).phi2.ln();
    let dr_angle = |f: &dyn Fn(usize, usize) -> f64, i: usize, j: usize| {
        wrap(f(i + 1, j) - f(i - 1, j)) / (2.0 * g.hs * g.r[i])
    };
    let dt_angle = |f: &dyn Fn(usize, usize) -> f64, i: usize, j: usize| {
        wrap(f(i, j + 1) - f(i, j - 1)) / (2.0 * g.htheta)
    };

    let terms = |i: usize, j: usize| -> Option<[Vec<f64>; 4]> {
        if !stencil_ok(a, i) {
            return None;
        }
        let r = g.r[i];
        let th = g.theta[j];
        let st = th.sin();
        let p = a.momentum.p_t(r);
        let (al, be, ga) = (alpha(i, j), beta(i, j), gamma(i, j));
        let (sa, ca) = (al.sinh(), al.cosh());
        let (sb, cb) = be.sin_cos();
        let (sg, cg) = ga.sin_cos();
        let br1 = 2.0 * p * r * ca + sa / st - 2.0 * m * r * cb;
        let br2 = 2.0 * p * r * sa + ca / st;
        // ln(phi^2 r^2 sin theta): coordinate parts added exactly
        let dr_ln = g.d_r(lnp, i, j) + 2.0 / r;
        let dt_ln = g.d_theta(lnp, i, j) + th.cos() / st;
        Some([
            vec![r * dr_angle(&beta, i, j), g.d_theta(alpha, i, j), -br1 * cg],
            vec![dt_angle(&beta, i, j), -r * g.d_r(alpha, i, j), -br1 * sg],
            vec![r * dr_ln, 2.0 * m * r * sb * cg, dt_angle(&gamma, i, j), -br2 * sg],
            vec![dt_ln, 2.0 * m * r * sb * sg, -r * dr_angle(&gamma, i, j), br2 * cg],
        ])
    };

    let mut equations = [GridResidual::reduce(&[]); 4];
    let mut excluded = 0;
    for (k, eq) in equations.iter_mut().enumerate() {
        let (res, ex) = interior(a, |i, j| {
            terms(i, j).map(|t| {
                let v = &t[k];
                (v.iter().sum::<f64>().abs(), v.iter().map(|x| x.abs()).sum())
            })
        });
        *eq = res;
        excluded = ex;
    }
    if equations[0].points == 0 {
        return Err(VerifyError::NoPoints);
    }
    Ok(FieldEquationResiduals { equations, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiracOptions {
    /// Multiplies `qA_t = -V`; `-1` gives the wrong-sign coupling.
    pub gauge_sign: f64,
}

impl Default for DiracOptions {
    fn default() -> Self {
        DiracOptions { gauge_sign: 1.0 }
    }
}

/// `i gamma^mu (d_mu psi + 1/2 Omega_{ab mu} sigma^{ab} psi + i qA_mu psi) - m psi`
/// with `gamma^mu = e_a^mu gamma^a`; `d[mu]` are the partial derivatives.
pub fn dirac_operator(
    psi: &Vec4c,
    d: &[Vec4c; 4],
    frame: &TetradFrame,
    connection: &SpinConnection,
    qa: &[f64; 4],
    mass: f64,
) -> Vec4c {
    let b = basis();
    let i = C64::new(0.0, 1.0);
    let mut out = -psi * C64::from(mass);
    for mu in 0..4 {
        let mut gm = Mat4c::zeros();
        for a in 0..4 {
            let e = frame.e[a][mu];
            if e != 0.0 {
                gm += b.gamma(a) * C64::from(e);
            }
        }
        if gm.iter().all(|z| *z == C64::from(0.0)) {
            continue;
        }
        let mut nabla = d[mu] + psi * (i * qa[mu]);
        for a in 0..4 {
            for bb in (a + 1)..4 {
                let w = connection.omega[a][bb][mu];
                if w != 0.0 {
                    nabla += b.sigma(a, bb) * psi * C64::from(w);
                }
            }
        }
        out += gm * nabla * i;
    }
    out
}

/// Max `|rho|` against max `|m psi|` over interior nodes with `Z > 0`.
pub fn dirac_residual(a: &AssembledSolution, opts: &DiracOptions) -> Result<(GridResidual, usize), VerifyError> {
    let g = &a.grid;
    let e = a.problem.energy;
    let m = a.problem.mass;
    let scale_mass = if m > 0.0 { m } else { e.abs().max(1.0) };
    let i_unit = C64::new(0.0, 1.0);
    let (res, excluded) = interior(a, |i, j| {
        if !stencil_ok(a, i) {
            return None;
        }
        let p = a.at(i, j);
        let psi = p.spinor.components();
        let at = |ii: usize, jj: usize| a.at(ii, jj).spinor.components();
        let d_r = (at(i + 1, j) - at(i - 1, j)) / C64::from(2.0 * g.hs * g.r[i]);
        let d_t = (at(i, j + 1) - at(i, j - 1)) / C64::from(2.0 * g.htheta);
        let d = [psi * (-i_unit * e), d_r, d_t, psi * (i_unit * 0.5)];
        let mut qa = a.gauge(i);
        qa[T] *= opts.gauge_sign;
        let rho = dirac_operator(psi, &d, &p.frame, &p.connection, &qa, m);
        Some((rho.norm(), scale_mass * psi.norm()))
    });
    if res.points == 0 {
        return Err(VerifyError::NoPoints);
    }
    Ok((res, excluded))
}

/// Covariant divergence of the world current `U^mu = e_a^mu U^a`.
pub fn continuity_check(a: &AssembledSolution) -> Result<GridResidual, VerifyError> {
    let g = &a.grid;
    let n = g.len();
    let mut cur = vec![[0.0f64; 4]; n];
    cur.par_iter_mut().enumerate().for_each(|(idx, c)| {
        let p = &a.points[idx];
        if let Ok(b) = bilinears(&p.spinor) {
            for mu in 0..4 {
                c[mu] = (0..4).map(|k| p.frame.e[k][mu] * b.u[k]).sum();
            }
        } else {
            *c = [f64::NAN; 4];
        }
    });
    let (res, _) = interior(a, |i, j| {
        let (r, th) = (g.r[i], g.theta[j]);
        let sqrt_g = |ii: usize, jj: usize| g.r[ii].powi(2) * g.theta[jj].sin();
        let f_r = |ii: usize, jj: usize| sqrt_g(ii, jj) * cur[g.index(ii, jj)][1];
        let f_t = |ii: usize, jj: usize| sqrt_g(ii, jj) * cur[g.index(ii, jj)][2];
        let div = (g.d_r(f_r, i, j) + g.d_theta(f_t, i, j)) / sqrt_g(i, j);
        let u = cur[g.index(i, j)];
        let scale = u[0].abs() / r + u[1].abs() / r + u[2].abs() + u[3].abs() * th.sin();
        Some((div.abs(), scale))
    });
    Ok(res)
}

/// Largest deviation of the normalized bilinears from the frame: `U^a`, `S^a`
/// in the frame and `u_mu`, `s_mu` in world components.
pub fn bilinear_frame_consistency(a: &AssembledSolution) -> f64 {
    let g = &a.grid;
    (0..g.nr())
        .into_par_iter()
        .map(|i| {
            let r = g.r[i];
            let mut worst: f64 = 0.0;
            for (j, &th) in g.theta.iter().enumerate() {
                let p = a.at(i, j);
                let b = match bilinears(&p.spinor) {
                    Ok(b) => b,
                    Err(_) => return f64::INFINITY,
                };
                let n = 2.0 * p.phi2;
                let frame_u = [1.0, 0.0, 0.0, 0.0];
                let frame_s = [0.0, 0.0, 0.0, 1.0];
                for k in 0..4 {
                    worst = worst.max((b.u[k] / n - frame_u[k]).abs());
                    worst = worst.max((b.s[k] / n - frame_s[k]).abs());
                }
                let gm = metric_diag(r, th);
                let world = |v: &[f64; 4], mu: usize| gm[mu] * (0..4).map(|k| p.frame.e[k][mu] * v[k]).sum::<f64>() / n;
                let (al, ga) = (p.alpha.value, p.gamma.value);
                let u_ref = [al.cosh(), 0.0, 0.0, r * th.sin() * al.sinh()];
                let s_ref = [0.0, ga.cos(), r * ga.sin(), 0.0];
                for mu in 0..4 {
                    worst = worst.max((world(&b.u, mu) - u_ref[mu]).abs() / u_ref[mu].abs().max(1.0));
                    worst = worst.max((world(&b.s, mu) - s_ref[mu]).abs() / s_ref[mu].abs().max(1.0));
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Worst Fierz deviation over all grid points, and the number of points.
pub fn fierz_on_grid(a: &AssembledSolution) -> (f64, usize) {
    let worst = a
        .points
        .par_iter()
        .map(|p| check_fierz(&p.spinor).map(|f| f.max_deviation()).unwrap_or(f64::INFINITY))
        .reduce(|| 0.0, f64::max);
    (worst, a.points.len())
}

/// `qF_rt = -V'` and every other component zero, relative to `max(1, |V'|)`.
pub fn maxwell_check(a: &AssembledSolution) -> Result<f64, VerifyError> {
    let g = &a.grid;
    let mut worst: f64 = 0.0;
    for &r in &g.r {
        let dv = a.problem.potential.derivative(r);
        let s = dv.abs().max(1.0);
        for &th in &g.theta {
            let f = maxwell_strength(&a.momentum, r, th)?;
            for mu in 0..4 {
                for nu in 0..4 {
                    let want = match (mu, nu) {
                        (R, T) => -dv,
                        (T, R) => dv,
                        _ => 0.0,
                    };
                    worst = worst.max((f[mu][nu] - want).abs() / s);
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid, SpinConnection, TetradFrame};
    use crate::radial::{solve, Potential, RadialProblem, SolveOptions};
    use crate::verify::{assemble_spinor, RadialProfile};

    fn coulomb_on(nr: usize, nt: usize) -> AssembledSolution {
        let p = RadialProblem::new(0.8, 1.0, Potential::Coulomb { q2: 0.6 });
        let grid = Grid::new(0.5, 20.0, nr, 0.1, nt).unwrap();
        let s = solve(&p, &grid.r, &SolveOptions::default()).unwrap();
        assemble_spinor(&p, &RadialProfile::from_solution(&s), &grid).unwrap()
    }

    #[test]
    fn wrap_angles() {
        assert!((wrap(6.2) - (6.2 - std::f64::consts::TAU)).abs() < 1e-15);
        assert_eq!(wrap(0.3), 0.3);
        assert!((wrap(-3.5) - (-3.5 + std::f64::consts::TAU)).abs() < 1e-15);
    }

    #[test]
    fn free_rest_spinor_in_cartesian_frame() {
        // frame aligned with fixed Cartesian axes at varphi = 0; its connection vanishes
        let (r, th) = (1.7f64, 0.8f64);
        let (st, ct) = th.sin_cos();
        let mut e = [[0.0; 4]; 4];
        e[0][T] = 1.0;
        e[1] = [0.0, st, ct / r, 0.0];
        e[2] = [0.0, 0.0, 0.0, 1.0 / (r * st)];
        e[3] = [0.0, ct, -st / r, 0.0];
        let frame = TetradFrame::from_components(r, th, e).unwrap();
        assert!(frame.orthonormality_deviation() < 1e-15);
        let m = 1.3;
        let psi = Vec4c::new(C64::from(1.0), C64::from(0.0), C64::from(1.0), C64::from(0.0));
        let zero = Vec4c::zeros();
        let d = [psi * C64::new(0.0, -m), zero, zero, zero];
        let rho = dirac_operator(&psi, &d, &frame, &SpinConnection::default(), &[0.0; 4], m);
        assert!(rho.norm() <= 1e-10);
    }

    #[test]
    fn coulomb_field_equations_converge() {
        let f = field_equation_residuals(&coulomb_on(101, 51)).unwrap();
        let c = field_equation_residuals(&coulomb_on(51, 26)).unwrap();
        for k in 0..4 {
            let ratio = c.equations[k].max_abs / f.equations[k].max_abs;
            assert!(f.equations[k].relative() < 1e-3, "{k}: {}", f.equations[k].relative());
            assert!((3.2..4.8).contains(&ratio), "{k}: {ratio}");
        }
    }

    #[test]
    fn coulomb_dirac_converges_and_wrong_gauge_does_not() {
        let fine = coulomb_on(101, 51);
        let coarse = coulomb_on(51, 26);
        let (f, _) = dirac_residual(&fine, &DiracOptions::default()).unwrap();
        let (c, _) = dirac_residual(&coarse, &DiracOptions::default()).unwrap();
        let ratio = c.max_abs / f.max_abs;
        assert!((3.2..4.8).contains(&ratio), "{ratio}");
        assert!(f.relative() < 1e-3);
        let wrong = DiracOptions { gauge_sign: -1.0 };
        let (fw, _) = dirac_residual(&fine, &wrong).unwrap();
        let (cw, _) = dirac_residual(&coarse, &wrong).unwrap();
        assert!(fw.relative() > 0.1);
        assert!((cw.max_abs / fw.max_abs) < 1.5);
    }

    #[test]
    fn corrupted_beta_breaks_equation_a() {
        let mut a = coulomb_on(51, 26);
        let base = field_equation_residuals(&a).unwrap();
        for p in a.points.iter_mut() {
            p.beta.value += 1e-3;
        }
        let bad = field_equation_residuals(&a).unwrap();
        // 2 m r sin(beta) delta reaches ~2e-2 at the outer edge
        assert!(bad.equations[0].max_abs > 5.0 * base.equations[0].max_abs);
        assert!(bad.equations[0].max_abs > 1e-2);
    }

    #[test]
    fn pointwise_identities() {
        let a = coulomb_on(21, 11);
        assert!(bilinear_frame_consistency(&a) <= 1e-10);
        assert!(fierz_on_grid(&a).0 <= 1e-12);
        assert!(maxwell_check(&a).unwrap() <= 1e-12);
        let c = continuity_check(&a).unwrap();
        assert_eq!(c.max_abs, 0.0);
    }
}
