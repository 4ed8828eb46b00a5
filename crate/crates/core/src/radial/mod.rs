//! Radial problem: the Riccati equation for `Z`, its linearization in `z`,
//! reconstruction `Z -> X -> G`, plus shooting and separability tools.

pub mod closed_form;
pub mod ode;
pub mod potential;
pub mod riccati;
pub mod separability;
pub mod shooting;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ode::{OdeError, OdeOptions};
pub use potential::{Potential, PotentialError, TabulatedPotential};
pub use riccati::{riccati_oracle, RiccatiTrace};
pub use separability::{coulomb_separability_check, separability_at_energy, SeparabilityReport};
pub use shooting::{auto_r_outer, matching_function, shoot_energy, ShootingConfig, ShootingResult};

#[derive(Debug, Error)]
pub enum RadialError {
    #[error("E + V + m vanishes near r = {r}; the linear equation is singular there")]
    SingularCoefficient { r: f64 },
    #[error("integration failed: {0}")]
    Ode(#[from] OdeError),
    #[error("invalid radial grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("Z = 0 has no finite X")]
    ZeroRiccati,
    #[error("no sign change of the matching function on [{e_lo}, {e_hi}] (f = {f_lo:.3e}, {f_hi:.3e})")]
    NoSignChange {
        e_lo: f64,
        e_hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("z vanishes at the matching radius {r_match} for E = {energy}")]
    ZeroAtMatch { energy: f64, r_match: f64 },
    #[error("classically allowed at r = {r}: no decaying branch to start from")]
    NoDecayingBranch { r: f64 },
}

/// Energy, mass and potential of one radial problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProblem {
    pub energy: f64,
    pub mass: f64,
    pub potential: Potential,
}

impl RadialProblem {
    pub fn new(energy: f64, mass: f64, potential: Potential) -> Self {
        RadialProblem {
            energy,
            mass,
            potential,
        }
    }

    /// `E + V + m`
    pub fn plus(&self, r: f64) -> f64 {
        self.energy + self.potential.value(r) + self.mass
    }

    /// `E + V - m`
    pub fn minus(&self, r: f64) -> f64 {
        self.energy + self.potential.value(r) - self.mass
    }

    pub fn riccati_rhs(&self, z: f64, r: f64) -> f64 {
        riccati_rhs(z, r, self.energy, self.mass, &self.potential)
    }

    pub fn coefficients(&self, r: f64) -> Result<(f64, f64), RadialError> {
        linear_ode_coefficients(r, self.energy, self.mass, &self.potential)
    }

    /// `G'` in the `X` form.
    pub fn g_rate(&self, x: f64, r: f64) -> f64 {
        2.0 * (self.mass * (x * x + 1.0).sqrt() - x * (self.energy + self.potential.value(r)))
    }

    /// `G'` in the `Z` form.
    pub fn g_rate_riccati(&self, z: f64, r: f64) -> f64 {
        (self.plus(r) * z * z - self.minus(r)) / z
    }
}

/// `Z' = (E+V+m) Z^2 - (2/r) Z + (E+V-m)`.
pub fn riccati_rhs(z: f64, r: f64, energy: f64, mass: f64, v: &Potential) -> f64 {
    let ev = energy + v.value(r);
    (ev + mass) * z * z - 2.0 * z / r + (ev - mass)
}

/// `(p, q)` of `z'' + p z' + q z = 0`.
pub fn linear_ode_coefficients(
    r: f64,
    energy: f64,
    mass: f64,
    v: &Potential,
) -> Result<(f64, f64), RadialError> {
    let ev = energy + v.value(r);
    let plus = ev + mass;
    if plus == 0.0 || !plus.is_finite() {
        return Err(RadialError::SingularCoefficient { r });
    }
    Ok((2.0 / r - v.derivative(r) / plus, ev * ev - mass * mass))
}

/// Looks for a sign change of `E + V + m` on `grid`, refined fourfold between
/// nodes. Returns the first offending radius.
pub fn scan_singular_coefficient(problem: &RadialProblem, grid: &[f64]) -> Result<(), RadialError> {
    let mut prev: Option<(f64, f64)> = None;
    for w in grid.windows(2) {
        for s in 0..4 {
            let r = w[0] + (w[1] - w[0]) * s as f64 / 4.0;
            let v = problem.plus(r);
            if v == 0.0 || !v.is_finite() {
                return Err(RadialError::SingularCoefficient { r });
            }
            if let Some((r0, v0)) = prev {
                if v0.signum() != v.signum() {
                    return Err(RadialError::SingularCoefficient {
                        r: r0 - v0 * (r - r0) / (v - v0),
                    });
                }
            }
            prev = Some((r, v));
        }
    }
    if let Some(&r) = grid.last() {
        let v = problem.plus(r);
        if let Some((_, v0)) = prev {
            if v == 0.0 || v0.signum() != v.signum() {
                return Err(RadialError::SingularCoefficient { r });
            }
        }
    }
    Ok(())
}

/// Where the initial data sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Inner,
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// Decaying tail for bound-state energies, regular exponent otherwise.
    Auto,
    /// `z = 1` at the inner radius with the larger local Frobenius exponent.
    Frobenius,
    /// `z = 1` at the outer radius on the decaying quasi-static branch,
    /// integrated inward.
    DecayingTail,
    Explicit { anchor: Anchor, z: f64, dz: f64 },
}

/// Larger root (real part if complex) of `s^2 + (p0 - 1) s + q0 = 0` with
/// `p0 = r p(r)`, `q0 = r^2 q(r)`.
pub fn frobenius_exponent(problem: &RadialProblem, r: f64) -> Result<f64, RadialError> {
    let (p, q) = problem.coefficients(r)?;
    let p0 = r * p;
    let q0 = r * r * q;
    let b = p0 - 1.0;
    let disc = b * b - 4.0 * q0;
    Ok(if disc >= 0.0 {
        0.5 * (-b + disc.sqrt())
    } else {
        -0.5 * b
    })
}

/// Logarithmic derivative `z'/z` of the decaying branch, from the positive
/// quasi-static root of the Riccati quadratic at `r`.
pub fn decaying_log_derivative(problem: &RadialProblem, r: f64) -> Result<f64, RadialError> {
    let (_, q) = problem.coefficients(r)?;
    let d = 1.0 / (r * r) - q;
    if d < 0.0 {
        return Err(RadialError::NoDecayingBranch { r });
    }
    Ok(-1.0 / r - d.sqrt())
}

/// Resolved initial data: anchor and `(z, z')` there.
pub fn resolve_initial(
    problem: &RadialProblem,
    init: InitialData,
    r_inner: f64,
    r_outer: f64,
) -> Result<(Anchor, f64, f64), RadialError> {
    match init {
        InitialData::Auto => {
            if problem.energy.abs() < problem.mass
                && decaying_log_derivative(problem, r_outer).is_ok()
            {
                resolve_initial(problem, InitialData::DecayingTail, r_inner, r_outer)
            } else {
                resolve_initial(problem, InitialData::Frobenius, r_inner, r_outer)
            }
        }
        InitialData::Frobenius => {
            let s = frobenius_exponent(problem, r_inner)?;
            Ok((Anchor::Inner, 1.0, s / r_inner))
        }
        InitialData::DecayingTail => {
            let l = decaying_log_derivative(problem, r_outer)?;
            Ok((Anchor::Outer, 1.0, l))
        }
        InitialData::Explicit { anchor, z, dz } => {
            if !z.is_finite() || !dz.is_finite() {
                return Err(RadialError::InvalidInput("non-finite initial data".into()));
            }
            Ok((anchor, z, dz))
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<(), RadialError> {
    if grid.len() < 2 {
        return Err(RadialError::InvalidGrid("need at least two radii".into()));
    }
    if grid[0] <= 0.0 || !grid[0].is_finite() {
        return Err(RadialError::InvalidGrid(format!("radii must be positive, got {}", grid[0])));
    }
    for (i, w) in grid.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(RadialError::InvalidGrid(format!(
                "radii must be strictly increasing (index {})",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Integrates the linear equation over the ascending `grid`, starting from
/// whichever end `anchor` names. Returns `(z, z')` on the grid.
pub fn integrate_linear(
    problem: &RadialProblem,
    grid: &[f64],
    anchor: Anchor,
    z0: f64,
    dz0: f64,
    opts: &OdeOptions,
) -> Result<(Vec<f64>, Vec<f64>), RadialError> {
    check_grid(grid)?;
    problem
        .potential
        .check_range(grid[0], *grid.last().unwrap())?;
    scan_singular_coefficient(problem, grid)?;
    let rhs = |r: f64, y: &[f64; 2]| -> [f64; 2] {
        let ev = problem.energy + problem.potential.value(r);
        let p = 2.0 / r - problem.potential.derivative(r) / (ev + problem.mass);
        let q = ev * ev - problem.mass * problem.mass;
        [y[1], -p * y[1] - q * y[0]]
    };
    let ys = match anchor {
        Anchor::Inner => ode::dopri5(rhs, grid[0], [z0, dz0], grid, opts)?,
        Anchor::Outer => {
            let rev: Vec<f64> = grid.iter().rev().copied().collect();
            let mut ys = ode::dopri5(rhs, rev[0], [z0, dz0], &rev, opts)?;
            ys.reverse();
            ys
        }
    };
    Ok(ys.into_iter().map(|y| (y[0], y[1])).unzip())
}

/// `Z = -z' / (z (E + V + m))`. A vanishing `z` gives an infinite `Z`.
#[allow(non_snake_case)]
pub fn z_to_Z(z: f64, dz: f64, r: f64, problem: &RadialProblem) -> f64 {
    if dz == 0.0 {
        return 0.0;
    }
    -dz / (z * problem.plus(r))
}

/// `X = (1/Z - Z) / 2`, which is `-sinh(ln Z)` for positive `Z`.
#[allow(non_snake_case)]
pub fn Z_to_X(z: f64) -> Result<f64, RadialError> {
    if z == 0.0 {
        return Err(RadialError::ZeroRiccati);
    }
    Ok(0.5 * (1.0 / z - z))
}

/// Cumulative integral of a rate sampled at the nodes and interval midpoints,
/// Simpson's rule per interval, starting from zero.
pub fn integrate_g(r: &[f64], rate: &[f64], rate_mid: &[f64]) -> Result<Vec<f64>, RadialError> {
    check_grid(r)?;
    if rate.len() != r.len() || rate_mid.len() + 1 != r.len() {
        return Err(RadialError::InvalidGrid("rate arrays do not match the grid".into()));
    }
    let mut g = Vec::with_capacity(r.len());
    let mut acc = 0.0;
    g.push(0.0);
    for i in 0..r.len() - 1 {
        let h = r[i + 1] - r[i];
        acc += h / 6.0 * (rate[i] + 4.0 * rate_mid[i] + rate[i + 1]);
        g.push(acc);
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub dz: Vec<f64>,
    /// Riccati variable `Z`.
    pub riccati_z: Vec<f64>,
    /// `X = B/C`.
    pub x: Vec<f64>,
    /// `X'`, from the Riccati right-hand side.
    pub dx: Vec<f64>,
    pub g: Vec<f64>,
    /// `G'` from the `X` form.
    pub dg: Vec<f64>,
    pub potential_values: Vec<f64>,
    pub energy: f64,
    pub mass: f64,
    /// Module normalization `K`.
    pub k: f64,
    /// `e^{-G}` decays over the outer tenth of the grid.
    pub convergent: bool,
    /// Sign changes of `z` (poles of `Z`).
    pub poles: Vec<f64>,
    /// Sign changes of `z'` (zeros of `Z`, where `X` diverges).
    pub zeros: Vec<f64>,
}

impl RadialSolution {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Largest `|Z - Z_0|` over the grid.
    pub fn max_riccati_deviation(&self, z0: f64) -> f64 {
        self.riccati_z.iter().map(|z| (z - z0).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial: InitialData,
    pub k: f64,
    /// Replace `k` by the value that makes the density integrate to one.
    pub normalize: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rtol: 1e-10,
            atol: 1e-12,
            initial: InitialData::Auto,
            k: 1.0,
            normalize: false,
        }
    }
}

impl SolveOptions {
    pub fn ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            ..Default::default()
        }
    }
}

fn sign_changes(r: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..r.len().saturating_sub(1) {
        let (a, b) = (f[i], f[i + 1]);
        if a == 0.0 {
            out.push(r[i]);
        } else if a * b < 0.0 {
            out.push(r[i] - a * (r[i + 1] - r[i]) / (b - a));
        }
    }
    if let (Some(&l), Some(&rl)) = (f.last(), r.last()) {
        if l == 0.0 {
            out.push(rl);
        }
    }
    out
}

/// Full pipeline on an ascending grid: `z`, `Z`, `X`, `X'`, `G`.
pub fn solve(problem: &RadialProblem, grid: &[f64], opts: &SolveOptions) -> Result<RadialSolution, RadialError> {
    check_grid(grid)?;
    let n = grid.len();
    let (anchor, z0, dz0) = resolve_initial(problem, opts.initial, grid[0], grid[n - 1])?;

    // nodes interleaved with midpoints, so G can use Simpson per interval
    let mut fine = Vec::with_capacity(2 * n - 1);
    for i in 0..n {
        fine.push(grid[i]);
        if i + 1 < n {
            fine.push(0.5 * (grid[i] + grid[i + 1]));
        }
    }
    let (zf, dzf) = integrate_linear(problem, &fine, anchor, z0, dz0, &opts.ode())?;

    let zr: Vec<f64> = (0..fine.len()).map(|i| z_to_Z(zf[i], dzf[i], fine[i], problem)).collect();
    let xf: Vec<f64> = zr.iter().map(|&z| 0.5 * (1.0 / z - z)).collect();
    let ratef: Vec<f64> = (0..fine.len()).map(|i| problem.g_rate(xf[i], fine[i])).collect();
    let nodes = |v: &[f64]| v.iter().step_by(2).copied().collect::<Vec<f64>>();
    let rate = nodes(&ratef);
    let rate_mid: Vec<f64> = ratef.iter().skip(1).step_by(2).copied().collect();

    // NaN propagates past a divergence of X
    let g = integrate_g(grid, &rate, &rate_mid)?;

    let z = nodes(&zf);
    let dz = nodes(&dzf);
    let riccati_z = nodes(&zr);
    let x = nodes(&xf);
    let dx: Vec<f64> = (0..n)
        .map(|i| {
            let zz = riccati_z[i];
            -0.5 * (1.0 + 1.0 / (zz * zz)) * problem.riccati_rhs(zz, grid[i])
        })
        .collect();

    let tail = (n / 10).max(1);
    let convergent = rate[n - tail..].iter().all(|&v| v > 0.0);

    let mut sol = RadialSolution {
        r: grid.to_vec(),
        poles: sign_changes(grid, &z),
        zeros: sign_changes(grid, &dz),
        z,
        dz,
        riccati_z,
        x,
        dx,
        g,
        dg: rate,
        potential_values: grid.iter().map(|&r| problem.potential.value(r)).collect(),
        energy: problem.energy,
        mass: problem.mass,
        k: opts.k,
        convergent,
    };
    if opts.normalize {
        sol.k = normalization_constant(&sol)?;
    }
    Ok(sol)
}

/// `K` such that `int U^t sqrt(-g) d^3x = 8 pi K int e^{-G} sqrt(X^2+1) dr = 1`
/// over the grid (trapezoid rule).
pub fn normalization_constant(sol: &RadialSolution) -> Result<f64, RadialError> {
    let f: Vec<f64> = (0..sol.len())
        .map(|i| (-sol.g[i]).exp() * (sol.x[i] * sol.x[i] + 1.0).sqrt())
        .collect();
    let mut integral = 0.0;
    for i in 0..sol.len() - 1 {
        integral += 0.5 * (f[i] + f[i + 1]) * (sol.r[i + 1] - sol.r[i]);
    }
    if !(integral.is_finite() && integral > 0.0) {
        return Err(RadialError::InvalidInput(
            "density is not integrable on the grid; cannot normalize".into(),
        ));
    }
    Ok(1.0 / (8.0 * std::f64::consts::PI * integral))
}

/// Geometric grid with `n` points on `[r_min, r_max]`.
pub fn log_grid(r_min: f64, r_max: f64, n: usize) -> Vec<f64> {
    let (a, b) = (r_min.ln(), r_max.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                r_min
            } else if i + 1 == n {
                r_max
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
