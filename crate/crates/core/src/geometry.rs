//! Flat spherical background, the `(alpha, gamma)` frames built on it, and
//! their connections.
//!
//! World indices are ordered `(t, r, theta, varphi)`; frame indices `0..3`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::clifford::METRIC;
use crate::radial::{log_grid, Potential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("theta = {0} is on the polar axis")]
    OnAxis(f64),
    #[error("non-finite field value")]
    NonFinite,
    #[error("grid too coarse: need at least 3 points per direction, got {nr} x {ntheta}")]
    GridTooCoarse { nr: usize, ntheta: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {got} samples, grid has {want}")]
    SizeMismatch { got: usize, want: usize },
}

pub const T: usize = 0;
pub const R: usize = 1;
pub const TH: usize = 2;
pub const PH: usize = 3;

/// `sin theta` below this is treated as the axis.
const AXIS_EPS: f64 = 1e-12;

fn check_point(r: f64, theta: f64) -> Result<(), GeometryError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(GeometryError::NonPositiveRadius(r));
    }
    if !theta.is_finite() || theta.sin().abs() < AXIS_EPS {
        return Err(GeometryError::OnAxis(theta));
    }
    Ok(())
}

/// A scalar field with its first radial and polar derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FieldJet {
    pub value: f64,
    pub d_r: f64,
    pub d_theta: f64,
}

impl FieldJet {
    pub fn new(value: f64, d_r: f64, d_theta: f64) -> Self {
        FieldJet { value, d_r, d_theta }
    }

    pub fn constant(value: f64) -> Self {
        FieldJet::new(value, 0.0, 0.0)
    }

    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d_r.is_finite() && self.d_theta.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphericalPoint {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub varphi: f64,
}

impl SphericalPoint {
    pub fn new(t: f64, r: f64, theta: f64, varphi: f64) -> Result<Self, GeometryError> {
        check_point(r, theta)?;
        Ok(SphericalPoint {
            t,
            r,
            theta,
            varphi: varphi.rem_euclid(2.0 * std::f64::consts::PI),
        })
    }
}

/// Diagonal of `g_{mu nu}`: `(1, -1, -r^2, -r^2 sin^2 theta)`.
pub fn metric_diag(r: f64, theta: f64) -> [f64; 4] {
    let s = theta.sin();
    [1.0, -1.0, -r * r, -r * r * s * s]
}

/// `Lambda^sigma_{mu nu}`, stored as `gamma[sigma][mu][nu]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Christoffels {
    pub gamma: [[[f64; 4]; 4]; 4],
}

impl Christoffels {
    pub fn get(&self, sigma: usize, mu: usize, nu: usize) -> f64 {
        self.gamma[sigma][mu][nu]
    }
}

pub fn christoffels(r: f64, theta: f64) -> Result<Christoffels, GeometryError> {
    check_point(r, theta)?;
    let (s, c) = theta.sin_cos();
    let mut g = [[[0.0; 4]; 4]; 4];
    let mut set = |a: usize, b: usize, cc: usize, v: f64| {
        g[a][b][cc] = v;
        g[a][cc][b] = v;
    };
    set(TH, TH, R, 1.0 / r);
    set(PH, PH, R, 1.0 / r);
    set(R, TH, TH, -r);
    set(R, PH, PH, -r * s * s);
    set(PH, PH, TH, c / s);
    set(TH, PH, PH, -c * s);
    Ok(Christoffels { gamma: g })
}

/// `e[a][mu] = e_a^mu` and its dual `inv[a][mu] = e^a_mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TetradFrame {
    pub r: f64,
    pub theta: f64,
    pub e: [[f64; 4]; 4],
    pub inv: [[f64; 4]; 4],
}

impl TetradFrame {
    pub fn from_components(r: f64, theta: f64, e: [[f64; 4]; 4]) -> Result<Self, GeometryError> {
        if e.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let g = metric_diag(r, theta);
        let mut inv = [[0.0; 4]; 4];
        for a in 0..4 {
            for mu in 0..4 {
                inv[a][mu] = METRIC[a] * g[mu] * e[a][mu];
            }
        }
        Ok(TetradFrame { r, theta, e, inv })
    }

    /// `max |g_{mu nu} e_a^mu e_b^nu - eta_ab|`.
    pub fn orthonormality_deviation(&self) -> f64 {
        let g = metric_diag(self.r, self.theta);
        let mut dev: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let s: f64 = (0..4).map(|mu| g[mu] * self.e[a][mu] * self.e[b][mu]).sum();
                let eta = if a == b { METRIC[a] } else { 0.0 };
                dev = dev.max((s - eta).abs());
            }
        }
        dev
    }

    /// `max |e_a^mu e^a_nu - delta^mu_nu|`.
    pub fn duality_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for mu in 0..4 {
            for nu in 0..4 {
                let s: f64 = (0..4).map(|a| self.e[a][mu] * self.inv[a][nu]).sum();
                let d = if mu == nu { 1.0 } else { 0.0 };
                dev = dev.max((s - d).abs());
            }
        }
        dev
    }
}

/// Frame of the `(alpha, gamma)` family: `e_0 = u`, `e_3 = -s`.
pub fn tetrads_from_angles(r: f64, theta: f64, alpha: f64, gamma: f64) -> Result<TetradFrame, GeometryError> {
    check_point(r, theta)?;
    let st = theta.sin();
    let (sg, cg) = gamma.sin_cos();
    let (sha, cha) = (alpha.sinh(), alpha.cosh());
    let mut e = [[0.0; 4]; 4];
    e[0][T] = cha;
    e[2][T] = -sha;
    e[1][R] = sg;
    e[3][R] = -cg;
    e[1][TH] = -cg / r;
    e[3][TH] = -sg / r;
    e[0][PH] = -sha / (r * st);
    e[2][PH] = cha / (r * st);
    TetradFrame::from_components(r, theta, e)
}

/// The same frame written directly in terms of `X`.
pub fn tetrads_from_x(r: f64, theta: f64, x: f64) -> Result<TetradFrame, GeometryError> {
    check_point(r, theta)?;
    if !x.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    let (st, ct) = theta.sin_cos();
    let d = (x * x + ct * ct).sqrt();
    if d == 0.0 {
        return Err(GeometryError::NonFinite);
    }
    let s = (x * x + 1.0).sqrt();
    let mut e = [[0.0; 4]; 4];
    e[0][T] = s / d;
    e[2][T] = st / d;
    e[1][R] = x * st / d;
    e[3][R] = s * ct / d;
    e[1][TH] = s * ct / (r * d);
    e[3][TH] = -x * st / (r * d);
    e[0][PH] = 1.0 / (r * d);
    e[2][PH] = s / (r * st * d);
    TetradFrame::from_components(r, theta, e)
}

/// `omega[a][b][mu] = Omega_{ab mu}` (frame indices lowered).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SpinConnection {
    pub omega: [[[f64; 4]; 4]; 4],
}

impl SpinConnection {
    /// Builds from raw components, keeping only the antisymmetric part.
    pub fn from_raw(raw: [[[f64; 4]; 4]; 4]) -> Self {
        let mut omega = [[[0.0; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for mu in 0..4 {
                    omega[a][b][mu] = 0.5 * (raw[a][b][mu] - raw[b][a][mu]);
                }
            }
        }
        SpinConnection { omega }
    }

    pub fn get(&self, a: usize, b: usize, mu: usize) -> f64 {
        self.omega[a][b][mu]
    }

    fn set(&mut self, a: usize, b: usize, mu: usize, v: f64) {
        self.omega[a][b][mu] = v;
        self.omega[b][a][mu] = -v;
    }

    /// `Omega^a_{b mu}` as a matrix for one world index.
    pub fn mixed(&self, mu: usize) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] = METRIC[a] * self.omega[a][b][mu];
            }
        }
        m
    }

    pub fn max_difference(&self, other: &SpinConnection) -> f64 {
        let mut d: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for mu in 0..4 {
                    d = d.max((self.omega[a][b][mu] - other.omega[a][b][mu]).abs());
                }
            }
        }
        d
    }
}

/// The eight non-zero components for the `(alpha, gamma)` frame.
pub fn spin_connection_closed_form(
    theta: f64,
    alpha: &FieldJet,
    gamma: &FieldJet,
) -> Result<SpinConnection, GeometryError> {
    if !alpha.is_finite() || !gamma.is_finite() || !theta.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    let (sa, ca) = (alpha.value.sinh(), alpha.value.cosh());
    let (s, c) = (theta + gamma.value).sin_cos();
    let mut w = SpinConnection::default();
    w.set(0, 2, R, -alpha.d_r);
    w.set(1, 3, R, -gamma.d_r);
    w.set(0, 2, TH, -alpha.d_theta);
    w.set(1, 3, TH, -(1.0 + gamma.d_theta));
    w.set(0, 1, PH, -c * sa);
    w.set(0, 3, PH, -s * sa);
    w.set(2, 3, PH, s * ca);
    w.set(1, 2, PH, -c * ca);
    Ok(w)
}

/// `Omega^a_{b mu} = e^a_sigma (d_mu e_b^sigma + Lambda^sigma_{nu mu} e_b^nu)`,
/// with the frame derivatives taken by central differences of step `h`.
pub fn spin_connection_generic<F>(r: f64, theta: f64, frame: F, h: f64) -> Result<SpinConnection, GeometryError>
where
    F: Fn(f64, f64) -> Result<TetradFrame, GeometryError>,
{
    let e0 = frame(r, theta)?;
    let lam = christoffels(r, theta)?;
    let mut de = [[[0.0; 4]; 4]; 4]; // de[mu][b][sigma]
    for (mu, (dr, dt)) in [(R, (h, 0.0)), (TH, (0.0, h))] {
        let p = frame(r + dr, theta + dt)?;
        let m = frame(r - dr, theta - dt)?;
        for b in 0..4 {
            for s in 0..4 {
                de[mu][b][s] = (p.e[b][s] - m.e[b][s]) / (2.0 * h);
            }
        }
    }
    let mut raw = [[[0.0; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for mu in 0..4 {
                let mut acc = 0.0;
                for s in 0..4 {
                    let mut inner = de[mu][b][s];
                    for nu in 0..4 {
                        inner += lam.get(s, nu, mu) * e0.e[b][nu];
                    }
                    acc += e0.inv[a][s] * inner;
                }
                raw[a][b][mu] = METRIC[a] * acc;
            }
        }
    }
    Ok(SpinConnection::from_raw(raw))
}

/// Tensor-product grid, geometric in `r` and uniform in `theta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    /// Spacing in `ln r`.
    pub hs: f64,
    pub htheta: f64,
}

impl Grid {
    pub fn new(r_min: f64, r_max: f64, nr: usize, theta_min: f64, ntheta: usize) -> Result<Self, GeometryError> {
        if nr < 3 || ntheta < 3 {
            return Err(GeometryError::GridTooCoarse { nr, ntheta });
        }
        if !(r_min > 0.0 && r_max > r_min) {
            return Err(GeometryError::InvalidGrid(format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]")));
        }
        let th_max = std::f64::consts::PI - theta_min;
        if !(theta_min > 0.0 && th_max > theta_min) {
            return Err(GeometryError::InvalidGrid(format!("need 0 < theta_min < pi/2, got {theta_min}")));
        }
        let (a, b) = (r_min.ln(), r_max.ln());
        let hs = (b - a) / (nr - 1) as f64;
        let htheta = (th_max - theta_min) / (ntheta - 1) as f64;
        let r = log_grid(r_min, r_max, nr);
        let theta = (0..ntheta).map(|j| theta_min + htheta * j as f64).collect();
        Ok(Grid { r, theta, hs, htheta })
    }

    /// Every other point in both directions (spacing doubled).
    pub fn coarsened(&self) -> Result<Self, GeometryError> {
        let r: Vec<f64> = self.r.iter().step_by(2).copied().collect();
        let theta: Vec<f64> = self.theta.iter().step_by(2).copied().collect();
        if r.len() < 3 || theta.len() < 3 {
            return Err(GeometryError::GridTooCoarse {
                nr: r.len(),
                ntheta: theta.len(),
            });
        }
        Ok(Grid {
            r,
            theta,
            hs: 2.0 * self.hs,
            htheta: 2.0 * self.htheta,
        })
    }

    pub fn nr(&self) -> usize {
        self.r.len()
    }

    pub fn ntheta(&self) -> usize {
        self.theta.len()
    }

    pub fn len(&self) -> usize {
        self.nr() * self.ntheta()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ntheta() + j
    }

    /// Second-order `d/dr` at an interior node, through `d/d(ln r)`.
    pub fn d_r<F: Fn(usize, usize) -> f64>(&self, f: F, i: usize, j: usize) -> f64 {
        (f(i + 1, j) - f(i - 1, j)) / (2.0 * self.hs * self.r[i])
    }

    pub fn d_theta<F: Fn(usize, usize) -> f64>(&self, f: F, i: usize, j: usize) -> f64 {
        (f(i, j + 1) - f(i, j - 1)) / (2.0 * self.htheta)
    }

    /// Radial step at node `i` in units of length (for reporting).
    pub fn h_r(&self, i: usize) -> f64 {
        self.r[i] * self.hs
    }
}

/// Max / L2 summary of a residual field, plus the scale it is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridResidual {
    pub max_abs: f64,
    pub l2: f64,
    pub scale: f64,
    pub points: usize,
}

impl GridResidual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_abs / self.scale
        } else {
            self.max_abs
        }
    }

    /// Deterministic reduction of per-row `(max, sum of squares, scale, count)`.
    pub fn reduce(rows: &[(f64, f64, f64, usize)]) -> Self {
        let mut max_abs: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut points = 0;
        // Neumaier summation over rows in order
        let mut sum = 0.0;
        let mut comp = 0.0;
        for &(m, s2, sc, n) in rows {
            max_abs = max_abs.max(m);
            scale = scale.max(sc);
            points += n;
            let t = sum + s2;
            if sum.abs() >= s2.abs() {
                comp += (sum - t) + s2;
            } else {
                comp += (s2 - t) + sum;
            }
            sum = t;
        }
        let l2 = if points > 0 { ((sum + comp) / points as f64).sqrt() } else { 0.0 };
        GridResidual {
            max_abs,
            l2,
            scale,
            points,
        }
    }
}

fn matmul(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

/// Finite-difference curvature `R^a_{b mu nu}` of a connection sampled on the
/// grid (row-major, `grid.index(i, j)`), over interior nodes. The scale is the
/// largest sum of magnitudes of the individual terms.
pub fn riemann_residual(grid: &Grid, omega: &[SpinConnection]) -> Result<GridResidual, GeometryError> {
    if grid.nr() < 3 || grid.ntheta() < 3 {
        return Err(GeometryError::GridTooCoarse {
            nr: grid.nr(),
            ntheta: grid.ntheta(),
        });
    }
    if omega.len() != grid.len() {
        return Err(GeometryError::SizeMismatch {
            got: omega.len(),
            want: grid.len(),
        });
    }
    let nt = grid.ntheta();
    let rows: Vec<(f64, f64, f64, usize)> = (1..grid.nr() - 1)
        .into_par_iter()
        .map(|i| {
            let mut row = (0.0f64, 0.0f64, 0.0f64, 0usize);
            for j in 1..nt - 1 {
                let at = omega[grid.index(i, j)];
                let m = [at.mixed(R), at.mixed(TH), at.mixed(PH)];
                let d = |mu: usize, dir: usize| -> [[f64; 4]; 4] {
                    let mut out = [[0.0; 4]; 4];
                    for a in 0..4 {
                        for b in 0..4 {
                            let f = |ii: usize, jj: usize| METRIC[a] * omega[grid.index(ii, jj)].omega[a][b][mu];
                            out[a][b] = if dir == R { grid.d_r(f, i, j) } else { grid.d_theta(f, i, j) };
                        }
                    }
                    out
                };
                // (mu, nu) pairs with world indices r=1, theta=2, varphi=3
                let pairs = [(R, TH), (R, PH), (TH, PH)];
                for &(mu, nu) in &pairs {
                    let d_mu_nu = if mu == R || mu == TH { d(nu, mu) } else { [[0.0; 4]; 4] };
                    let d_nu_mu = if nu == R || nu == TH { d(mu, nu) } else { [[0.0; 4]; 4] };
                    let a = matmul(&m[mu - 1], &m[nu - 1]);
                    let b = matmul(&m[nu - 1], &m[mu - 1]);
                    for x in 0..4 {
                        for y in 0..4 {
                            let val = d_mu_nu[x][y] - d_nu_mu[x][y] + a[x][y] - b[x][y];
                            let sc = d_mu_nu[x][y].abs() + d_nu_mu[x][y].abs() + a[x][y].abs() + b[x][y].abs();
                            row.0 = row.0.max(val.abs());
                            row.1 += val * val;
                            row.2 = row.2.max(sc);
                        }
                    }
                }
                row.3 += 1;
            }
            row
        })
        .collect();
    Ok(GridResidual::reduce(&rows))
}

/// `P_t = E + V(r)`, `P_varphi = -1/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumField {
    pub energy: f64,
    pub potential: Potential,
}

impl MomentumField {
    pub const P_VARPHI: f64 = -0.5;

    pub fn new(energy: f64, potential: Potential) -> Self {
        MomentumField { energy, potential }
    }

    pub fn p_t(&self, r: f64) -> f64 {
        self.energy + self.potential.value(r)
    }

    /// Covariant components `P_mu`.
    pub fn components(&self, r: f64) -> [f64; 4] {
        [self.p_t(r), 0.0, 0.0, Self::P_VARPHI]
    }

    /// `d_mu P_nu` stored as `[mu][nu]` (only `d_r P_t` is non-zero).
    fn gradient(&self, r: f64) -> [[f64; 4]; 4] {
        let mut g = [[0.0; 4]; 4];
        g[R][T] = self.potential.derivative(r);
        g
    }
}

/// `qF_{mu nu} = -(nabla_mu P_nu - nabla_nu P_mu)`.
pub fn maxwell_strength(field: &MomentumField, r: f64, theta: f64) -> Result<[[f64; 4]; 4], GeometryError> {
    let lam = christoffels(r, theta)?;
    let p = field.components(r);
    let dp = field.gradient(r);
    let cov = |mu: usize, nu: usize| -> f64 {
        dp[mu][nu] - (0..4).map(|rho| lam.get(rho, nu, mu) * p[rho]).sum::<f64>()
    };
    let mut f = [[0.0; 4]; 4];
    for mu in 0..4 {
        for nu in 0..4 {
            f[mu][nu] = -(cov(mu, nu) - cov(nu, mu));
        }
    }
    Ok(f)
}

/// Background constant of the time-dependent family; fixed to zero.
const EPSILON: f64 = 0.0;

/// `R_{ij mu}` with world indices, stored as `comp[i][j][mu]`, antisymmetric in `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TensorialConnection {
    pub comp: [[[f64; 4]; 4]; 4],
}

impl TensorialConnection {
    pub fn get(&self, i: usize, j: usize, mu: usize) -> f64 {
        self.comp[i][j][mu]
    }
}

pub fn tensorial_connection(
    r: f64,
    theta: f64,
    alpha: &FieldJet,
    gamma: &FieldJet,
) -> Result<TensorialConnection, GeometryError> {
    check_point(r, theta)?;
    let (st, ct) = theta.sin_cos();
    let (sha, cha) = (alpha.value.sinh(), alpha.value.cosh());
    let (sg, cg) = gamma.value.sin_cos();
    let mut c = [[[0.0; 4]; 4]; 4];
    let mut set = |i: usize, j: usize, mu: usize, v: f64| {
        c[i][j][mu] = v;
        c[j][i][mu] = -v;
    };
    set(T, PH, TH, r * st * alpha.d_theta);
    set(T, PH, R, r * st * alpha.d_r);
    set(R, TH, TH, -r * (1.0 + gamma.d_theta));
    set(TH, R, R, r * gamma.d_r);
    set(R, PH, PH, -r * st * st);
    set(TH, PH, PH, -r * r * ct * st);
    set(R, T, T, -2.0 * EPSILON * sha * sg);
    set(PH, R, T, 2.0 * EPSILON * r * st * cha * sg);
    set(TH, T, T, 2.0 * EPSILON * r * sha * cg);
    set(PH, TH, T, -2.0 * EPSILON * r * r * st * cha * cg);
    Ok(TensorialConnection { comp: c })
}

/// World-index covectors `u_mu` and `s_mu` of the `(alpha, gamma)` family.
pub fn frame_covectors(r: f64, theta: f64, alpha: f64, gamma: f64) -> ([f64; 4], [f64; 4]) {
    let st = theta.sin();
    (
        [alpha.cosh(), 0.0, 0.0, r * st * alpha.sinh()],
        [0.0, gamma.cos(), r * gamma.sin(), 0.0],
    )
}

/// Largest violation of `nabla_mu s_i = R_{ji mu} s^j` and
/// `nabla_mu u_i = R_{ji mu} u^j`, with the covariant derivative taken by
/// central differences of step `h`. `jets` supplies `(alpha, gamma)` with
/// derivatives at any point.
pub fn transport_residuals<F>(r: f64, theta: f64, jets: F, h: f64) -> Result<(f64, f64), GeometryError>
where
    F: Fn(f64, f64) -> (FieldJet, FieldJet),
{
    let (a0, g0) = jets(r, theta);
    let rc = tensorial_connection(r, theta, &a0, &g0)?;
    let lam = christoffels(r, theta)?;
    let g = metric_diag(r, theta);
    let (u0, s0) = frame_covectors(r, theta, a0.value, g0.value);
    let vec_at = |rr: f64, tt: f64| {
        let (a, gm) = jets(rr, tt);
        frame_covectors(rr, tt, a.value, gm.value)
    };
    let mut worst = [0.0f64; 2];
    for mu in 0..4 {
        let (du, ds) = match mu {
            R | TH => {
                let (dr, dt) = if mu == R { (h, 0.0) } else { (0.0, h) };
                let (up, sp) = vec_at(r + dr, theta + dt);
                let (um, sm) = vec_at(r - dr, theta - dt);
                let mut du = [0.0; 4];
                let mut ds = [0.0; 4];
                for i in 0..4 {
                    du[i] = (up[i] - um[i]) / (2.0 * h);
                    ds[i] = (sp[i] - sm[i]) / (2.0 * h);
                }
                (du, ds)
            }
            _ => ([0.0; 4], [0.0; 4]),
        };
        for (k, (v, dv)) in [(&s0, &ds), (&u0, &du)].into_iter().enumerate() {
            for i in 0..4 {
                let cov = dv[i] - (0..4).map(|rho| lam.get(rho, i, mu) * v[rho]).sum::<f64>();
                let rhs: f64 = (0..4).map(|j| rc.get(j, i, mu) * v[j] / g[j]).sum();
                worst[k] = worst[k].max((cov - rhs).abs());
            }
        }
    }
    Ok((worst[0], worst[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar_trial::angle_jets;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn christoffel_examples() {
        let c = christoffels(2.0, 0.7).unwrap();
        assert_eq!(c.get(TH, TH, R), 0.5);
        assert_eq!(c.get(TH, R, TH), 0.5);
        let c = christoffels(1.0, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(c.get(TH, PH, PH), 0.0, epsilon = 1e-16);
        let c = christoffels(3.0, FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(c.get(R, PH, PH), -1.5, epsilon = 1e-15);
        let nonzero = c.gamma.iter().flatten().flatten().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 9);
        assert!(christoffels(0.0, 1.0).is_err());
        assert!(christoffels(1.0, 0.0).is_err());
        assert!(christoffels(1.0, PI).is_err());
    }

    #[test]
    fn christoffels_are_metric_compatible() {
        // Lambda^s_{mu nu} = 1/2 g^{ss} (d_mu g_{s nu} + d_nu g_{s mu} - d_s g_{mu nu})
        let (r, th) = (1.7, 0.9);
        let h = 1e-6;
        let dg = |dir: usize| -> [f64; 4] {
            let (dr, dt) = if dir == R { (h, 0.0) } else { (0.0, h) };
            let p = metric_diag(r + dr, th + dt);
            let m = metric_diag(r - dr, th - dt);
            [0, 1, 2, 3].map(|k| (p[k] - m[k]) / (2.0 * h))
        };
        let d = [[0.0; 4], dg(R), dg(TH), [0.0; 4]];
        let g = metric_diag(r, th);
        let c = christoffels(r, th).unwrap();
        for s in 0..4 {
            for mu in 0..4 {
                for nu in 0..4 {
                    let gsn = |a: usize, b: usize, dir: usize| if a == b { d[dir][a] } else { 0.0 };
                    let v = 0.5 / g[s] * (gsn(s, nu, mu) + gsn(s, mu, nu) - gsn(mu, nu, s));
                    assert!((v - c.get(s, mu, nu)).abs() < 1e-8, "{s}{mu}{nu}");
                }
            }
        }
    }

    #[test]
    fn tetrad_example_values() {
        let f = tetrads_from_x(1.0, FRAC_PI_2, 4.0 / 3.0).unwrap();
        assert_abs_diff_eq!(f.e[0][T], 1.25, epsilon = 1e-15);
        let x: f64 = 4.0 / 3.0;
        let th = 0.6;
        let f = tetrads_from_x(2.0, th, x).unwrap();
        let d = (x * x + th.cos().powi(2)).sqrt();
        let cosh_a = f.e[0][T] * d / (x * x + 1.0).sqrt() * (x * x + 1.0).sqrt() / d;
        let sinh_a = -f.e[2][T];
        assert_abs_diff_eq!(cosh_a * cosh_a - sinh_a * sinh_a, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn x_frame_matches_angle_frame() {
        for &(x, th) in &[(1.3, 0.4), (-0.5, 2.0), (3.0, 1.2)] {
            let j = angle_jets(x, 0.0, th).unwrap();
            let a = tetrads_from_angles(1.5, th, j.alpha.value, j.gamma.value).unwrap();
            let b = tetrads_from_x(1.5, th, x).unwrap();
            for aa in 0..4 {
                for mu in 0..4 {
                    assert_abs_diff_eq!(a.e[aa][mu], b.e[aa][mu], epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn flat_standard_frame_connection() {
        let th = 0.8;
        let w = spin_connection_closed_form(th, &FieldJet::constant(0.0), &FieldJet::constant(0.0)).unwrap();
        assert_abs_diff_eq!(w.get(2, 3, PH), th.sin(), epsilon = 1e-16);
        assert_abs_diff_eq!(w.get(1, 2, PH), -th.cos(), epsilon = 1e-16);
        assert_eq!(w.get(3, 2, PH), -w.get(2, 3, PH));
    }

    #[test]
    fn constant_x_has_no_radial_boost() {
        let j = angle_jets(4.0 / 3.0, 0.0, 0.9).unwrap();
        let w = spin_connection_closed_form(0.9, &j.alpha, &j.gamma).unwrap();
        assert_eq!(w.get(0, 2, R), 0.0);
    }

    fn x_of_r(r: f64) -> (f64, f64) {
        (0.7 + 0.4 * r.sin(), 0.4 * r.cos())
    }

    #[test]
    fn closed_form_matches_generic_connection() {
        for &(r, th) in &[(1.0, 0.5), (2.3, 1.4), (0.7, 2.6), (4.0, 0.2)] {
            let (x, dx) = x_of_r(r);
            let j = angle_jets(x, dx, th).unwrap();
            let closed = spin_connection_closed_form(th, &j.alpha, &j.gamma).unwrap();
            let generic = spin_connection_generic(r, th, |rr, tt| tetrads_from_x(rr, tt, x_of_r(rr).0), 1e-5).unwrap();
            let d = closed.max_difference(&generic);
            assert!(d < 1e-8, "r={r} th={th}: {d}");
        }
    }

    #[test]
    fn wrong_sign_connection_is_detected() {
        let (r, th) = (1.1, 0.8);
        let (x, dx) = x_of_r(r);
        let j = angle_jets(x, dx, th).unwrap();
        let mut closed = spin_connection_closed_form(th, &j.alpha, &j.gamma).unwrap();
        for v in closed.omega.iter_mut().flatten().flatten() {
            *v = -*v;
        }
        let generic = spin_connection_generic(r, th, |rr, tt| tetrads_from_x(rr, tt, x_of_r(rr).0), 1e-4).unwrap();
        assert!(closed.max_difference(&generic) > 0.1);
    }

    fn connection_on(grid: &Grid, x: impl Fn(f64) -> (f64, f64) + Sync) -> Vec<SpinConnection> {
        let mut out = Vec::with_capacity(grid.len());
        for &r in &grid.r {
            for &th in &grid.theta {
                let (xv, dxv) = x(r);
                let j = angle_jets(xv, dxv, th).unwrap();
                out.push(spin_connection_closed_form(th, &j.alpha, &j.gamma).unwrap());
            }
        }
        out
    }

    #[test]
    fn flat_frame_curvature_vanishes_at_second_order() {
        let fine = Grid::new(0.5, 5.0, 81, 0.1, 81).unwrap();
        let coarse = fine.coarsened().unwrap();
        let flat = |g: &Grid| -> Vec<SpinConnection> {
            let mut v = Vec::new();
            for _ in &g.r {
                for &th in &g.theta {
                    v.push(spin_connection_closed_form(th, &FieldJet::constant(0.0), &FieldJet::constant(0.0)).unwrap());
                }
            }
            v
        };
        let rf = riemann_residual(&fine, &flat(&fine)).unwrap();
        let rc = riemann_residual(&coarse, &flat(&coarse)).unwrap();
        assert!(rf.relative() < 1e-3);
        let ratio = rc.max_abs / rf.max_abs;
        assert!((3.2..4.8).contains(&ratio), "{ratio}");
    }

    #[test]
    fn coulomb_frame_curvature_vanishes_and_corruption_does_not() {
        let fine = Grid::new(0.5, 20.0, 161, 0.1, 81).unwrap();
        let coarse = fine.coarsened().unwrap();
        let cx = |_: f64| (4.0 / 3.0, 0.0);
        let rf = riemann_residual(&fine, &connection_on(&fine, cx)).unwrap();
        let rc = riemann_residual(&coarse, &connection_on(&coarse, cx)).unwrap();
        let ratio = rc.max_abs / rf.max_abs;
        assert!(rf.relative() < 1e-3, "{}", rf.relative());
        assert!((3.2..4.8).contains(&ratio), "{ratio}");

        let corrupt = |g: &Grid| {
            let mut v = connection_on(g, cx);
            for w in v.iter_mut() {
                let val = w.get(0, 2, R) + 0.1;
                w.set(0, 2, R, val);
            }
            v
        };
        let bf = riemann_residual(&fine, &corrupt(&fine)).unwrap();
        let bc = riemann_residual(&coarse, &corrupt(&coarse)).unwrap();
        assert!(bf.max_abs > 1e-2);
        assert!((bc.max_abs / bf.max_abs) < 1.5);
    }

    #[test]
    fn general_x_curvature_is_second_order() {
        let fine = Grid::new(0.5, 6.0, 161, 0.1, 81).unwrap();
        let coarse = fine.coarsened().unwrap();
        let rf = riemann_residual(&fine, &connection_on(&fine, x_of_r)).unwrap();
        let rc = riemann_residual(&coarse, &connection_on(&coarse, x_of_r)).unwrap();
        let ratio = rc.max_abs / rf.max_abs;
        assert!((3.2..4.8).contains(&ratio), "{ratio}");
    }

    #[test]
    fn maxwell_examples() {
        let f = maxwell_strength(&MomentumField::new(0.8, Potential::Coulomb { q2: 0.6 }), 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(f[R][T].abs(), 0.15, epsilon = 1e-15);
        assert_eq!(f[R][T], -f[T][R]);
        assert_abs_diff_eq!(f[R][T], 0.6 / 4.0, epsilon = 1e-15);
        let others: f64 = (0..4)
            .flat_map(|a| (0..4).map(move |b| (a, b)))
            .filter(|&(a, b)| !((a, b) == (R, T) || (a, b) == (T, R)))
            .map(|(a, b)| f[a][b].abs())
            .sum();
        assert_eq!(others, 0.0);
        let f = maxwell_strength(&MomentumField::new(0.8, Potential::InversePowers { c0: 0.3, c1: 0.0, c2: 0.0 }), 2.0, 1.0)
            .unwrap();
        assert!(f.iter().flatten().all(|v| *v == 0.0));
        let f = maxwell_strength(&MomentumField::new(0.0, Potential::CoulombInverseSquare { q2: 0.0, k: 1.0 }), 1.0, 1.0)
            .unwrap();
        assert_abs_diff_eq!(f[R][T].abs(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn tensorial_examples() {
        let z = FieldJet::constant(0.0);
        let t = tensorial_connection(2.0, 0.7, &z, &z).unwrap();
        assert_eq!(t.get(R, TH, TH), -2.0);
        let t = tensorial_connection(2.0, FRAC_PI_2, &z, &z).unwrap();
        assert_abs_diff_eq!(t.get(TH, PH, PH), 0.0, epsilon = 1e-15);
        let j = angle_jets(4.0 / 3.0, 0.0, 0.5).unwrap();
        let t = tensorial_connection(1.0, 0.5, &j.alpha, &j.gamma).unwrap();
        assert_eq!(t.get(T, PH, R), 0.0);
    }

    #[test]
    fn transport_relations_hold_for_trial_frames() {
        let jets = |r: f64, th: f64| {
            let (x, dx) = x_of_r(r);
            let j = angle_jets(x, dx, th).unwrap();
            (j.alpha, j.gamma)
        };
        for &(r, th) in &[(1.0, 0.5), (2.5, 1.9), (0.6, 2.8)] {
            let (ds, du) = transport_residuals(r, th, jets, 1e-5).unwrap();
            assert!(ds < 1e-8 && du < 1e-8, "{ds} {du}");
        }
    }

    #[test]
    fn transport_residual_decays_quadratically() {
        let jets = |r: f64, th: f64| {
            let a = 0.3 * r.sin() * (2.0 * th).cos() + 0.1 * r;
            let g = 0.2 * r * th + 0.4 * (r * th).cos();
            let da_r = 0.3 * r.cos() * (2.0 * th).cos() + 0.1;
            let da_t = -0.6 * r.sin() * (2.0 * th).sin();
            let dg_r = 0.2 * th - 0.4 * th * (r * th).sin();
            let dg_t = 0.2 * r - 0.4 * r * (r * th).sin();
            (FieldJet::new(a, da_r, da_t), FieldJet::new(g, dg_r, dg_t))
        };
        let (s1, u1) = transport_residuals(1.3, 0.7, jets, 1e-2).unwrap();
        let (s2, u2) = transport_residuals(1.3, 0.7, jets, 5e-3).unwrap();
        assert!((3.2..4.8).contains(&(s1 / s2)), "{}", s1 / s2);
        assert!((3.2..4.8).contains(&(u1 / u2)), "{}", u1 / u2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn tetrads_orthonormal(r in 0.05f64..50.0, th in 0.01f64..3.13, x in -30.0f64..30.0) {
            prop_assume!(x.abs() > 1e-3);
            let f = tetrads_from_x(r, th, x).unwrap();
            prop_assert!(f.orthonormality_deviation() <= 1e-12);
            prop_assert!(f.duality_deviation() <= 1e-12);
        }

        #[test]
        fn angle_tetrads_orthonormal(r in 0.05f64..50.0, th in 0.01f64..3.13, a in -3.0f64..3.0, g in -3.2f64..3.2) {
            let f = tetrads_from_angles(r, th, a, g).unwrap();
            prop_assert!(f.orthonormality_deviation() <= 1e-12 * a.cosh().powi(2));
            prop_assert!(f.duality_deviation() <= 1e-12 * a.cosh().powi(2));
        }
    }
}
