//! Energy selection: the convergent solution is the one whose regular inner
//! branch joins the decaying outer branch. The matching function is the
//! normalized Wronskian of the two legs at `r_match`, the sine of the angle
//! between `(z, r z')` of each. It has no poles, and its zeros are exactly the
//! bound-state energies.

use serde::{Deserialize, Serialize};

use super::ode::{dopri5, OdeOptions};
use super::{decaying_log_derivative, frobenius_exponent, Potential, RadialError, RadialProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    /// Start of the outward (regular) leg.
    pub r_inner: f64,
    pub r_match: f64,
    /// Start of the inward (decaying) leg; chosen from the bracket if absent.
    pub r_outer: Option<f64>,
    pub tol_e: f64,
    pub max_iter: usize,
    /// Uniform samples of the bracket used to locate the lowest root.
    pub scan_points: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            r_inner: 1e-3,
            r_match: 5.0,
            r_outer: None,
            tol_e: 1e-10,
            max_iter: 200,
            scan_points: 64,
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootingResult {
    pub energy: f64,
    pub bracket: (f64, f64),
    pub r_outer: f64,
    /// `(E, f(E))` for every evaluation, in order.
    pub log: Vec<(f64, f64)>,
}

/// Integrates `z'' + p z' + q z = 0` from `z = 1, z' = l0` at `r0` to `r1` in
/// chunks, renormalizing between chunks. Returns `(z, r1 z')` at `r1` scaled
/// to unit length.
fn leg(problem: &RadialProblem, r0: f64, r1: f64, l0: f64, opts: &OdeOptions) -> Result<[f64; 2], RadialError> {
    let rhs = |r: f64, y: &[f64; 2]| -> [f64; 2] {
        let ev = problem.energy + problem.potential.value(r);
        let p = 2.0 / r - problem.potential.derivative(r) / (ev + problem.mass);
        let q = ev * ev - problem.mass * problem.mass;
        [y[1], -p * y[1] - q * y[0]]
    };
    let chunk = if problem.mass > 0.0 { 20.0 / problem.mass } else { (r1 - r0).abs() };
    let n = ((r1 - r0).abs() / chunk).ceil().max(1.0) as usize;
    let mut y = [1.0, l0];
    let mut r = r0;
    for i in 1..=n {
        let target = if i == n { r1 } else { r0 + (r1 - r0) * i as f64 / n as f64 };
        let out = dopri5(rhs, r, y, &[target], opts)?;
        y = out[0];
        r = target;
        let s = y[0].abs().max(y[1].abs());
        if s > 0.0 && s.is_finite() && i < n {
            y = [y[0] / s, y[1] / s];
        }
    }
    let v = [y[0], y[1] * r1];
    let norm = v[0].hypot(v[1]);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(RadialError::InvalidInput(format!("degenerate shooting leg at E = {}", problem.energy)));
    }
    Ok([v[0] / norm, v[1] / norm])
}

/// Normalized Wronskian of the outward regular leg and the inward decaying
/// leg at `r_match`, in `[-1, 1]`.
pub fn matching_function(
    potential: &Potential,
    mass: f64,
    energy: f64,
    cfg: &ShootingConfig,
    r_outer: f64,
) -> Result<f64, RadialError> {
    let problem = RadialProblem::new(energy, mass, potential.clone());
    let opts = OdeOptions {
        rtol: cfg.rtol,
        atol: cfg.atol,
        ..Default::default()
    };
    let s = frobenius_exponent(&problem, cfg.r_inner)?;
    let out = leg(&problem, cfg.r_inner, cfg.r_match, s / cfg.r_inner, &opts)?;
    let l_tail = decaying_log_derivative(&problem, r_outer)?;
    let inn = leg(&problem, r_outer, cfg.r_match, l_tail, &opts)?;
    Ok(out[1] * inn[0] - out[0] * inn[1])
}

/// Outer start radius deep in the forbidden region for every energy of the
/// bracket.
pub fn auto_r_outer(potential: &Potential, mass: f64, bracket: (f64, f64), r_match: f64) -> Result<f64, RadialError> {
    let e_max = bracket.0.abs().max(bracket.1.abs());
    if !(e_max < mass) {
        return Err(RadialError::InvalidInput(format!(
            "energy bracket must lie inside (-m, m); got [{}, {}] with m = {mass}",
            bracket.0, bracket.1
        )));
    }
    let kappa = (mass * mass - e_max * e_max).sqrt();
    let mut r = (2.0 * r_match).max(10.0 / kappa);
    for _ in 0..64 {
        let ok = [bracket.0, bracket.1].iter().all(|&e| {
            let p = RadialProblem::new(e, mass, potential.clone());
            let ev = e + potential.value(r);
            ev * ev < mass * mass && decaying_log_derivative(&p, r).is_ok()
        });
        if ok {
            return Ok(r + 25.0 / kappa);
        }
        r *= 2.0;
    }
    Err(RadialError::NoDecayingBranch { r })
}

/// Bisection on the matching function over `bracket`.
pub fn shoot_energy(
    potential: &Potential,
    mass: f64,
    bracket: (f64, f64),
    cfg: &ShootingConfig,
) -> Result<ShootingResult, RadialError> {
    let (lo, hi) = if bracket.0 <= bracket.1 { bracket } else { (bracket.1, bracket.0) };
    if !(cfg.r_inner > 0.0 && cfg.r_match > cfg.r_inner) {
        return Err(RadialError::InvalidInput("need 0 < r_inner < r_match".into()));
    }
    potential.check_range(cfg.r_inner, cfg.r_match)?;
    let r_outer = match cfg.r_outer {
        Some(r) if r > cfg.r_match => r,
        Some(r) => {
            return Err(RadialError::InvalidInput(format!(
                "r_outer = {r} must exceed r_match = {}",
                cfg.r_match
            )))
        }
        None => auto_r_outer(potential, mass, (lo, hi), cfg.r_match)?,
    };
    potential.check_range(cfg.r_inner, r_outer)?;

    if cfg.scan_points < 2 {
        return Err(RadialError::InvalidInput("scan_points must be at least 2".into()));
    }
    let mut log = Vec::new();
    let eval = |e: f64, log: &mut Vec<(f64, f64)>| -> Result<f64, RadialError> {
        let f = matching_function(potential, mass, e, cfg, r_outer)?;
        log.push((e, f));
        Ok(f)
    };

    // coarse scan; the lowest sign change is the lowest level in the bracket
    let n = cfg.scan_points;
    let energies: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut prev: Option<(f64, f64)> = None;
    let mut found = None;
    for &e in &energies {
        let f = eval(e, &mut log)?;
        if !f.is_finite() {
            return Err(RadialError::InvalidInput(format!("matching function not finite at E = {e}")));
        }
        if f == 0.0 {
            found = Some((e, e, f));
            break;
        }
        if let Some((e0, f0)) = prev {
            if f0.signum() != f.signum() {
                found = Some((e0, e, f0));
                break;
            }
        }
        prev = Some((e, f));
    }
    let (mut a, mut b, mut f_a) = match found {
        Some(x) => x,
        None => {
            return Err(RadialError::NoSignChange {
                e_lo: lo,
                e_hi: hi,
                f_lo: log[0].1,
                f_hi: log[log.len() - 1].1,
            })
        }
    };
    let mut iter = 0;
    while b - a > cfg.tol_e && iter < cfg.max_iter {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let f_mid = eval(mid, &mut log)?;
        if f_mid == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if f_mid.signum() == f_a.signum() {
            a = mid;
            f_a = f_mid;
        } else {
            b = mid;
        }
        iter += 1;
    }
    let energy = 0.5 * (a + b);
    let problem = RadialProblem::new(energy, mass, potential.clone());
    let s = frobenius_exponent(&problem, cfg.r_inner)?;
    let z_match = leg(
        &problem,
        cfg.r_inner,
        cfg.r_match,
        s / cfg.r_inner,
        &OdeOptions {
            rtol: cfg.rtol,
            atol: cfg.atol,
            ..Default::default()
        },
    )?;
    // the log derivative used by the solver is undefined at a node of z
    if z_match[0].abs() < 1e-8 {
        return Err(RadialError::ZeroAtMatch {
            energy,
            r_match: cfg.r_match,
        });
    }
    Ok(ShootingResult {
        energy,
        bracket: (a, b),
        r_outer,
        log,
    })
}
