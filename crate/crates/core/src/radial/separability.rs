//! Constant-`Z` test: a radius-independent `X` requires
//! `(E+V+m) Z^2 - (2/r) Z + (E+V-m) = 0` at every radius.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::Potential;

/// Probe residuals at or below this count as zero.
pub const SEPARABILITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparabilityReport {
    pub separable: bool,
    /// Max over probes of the constant-`Z` quadratic.
    pub residual: f64,
    pub riccati_z: Option<f64>,
    pub energy: Option<f64>,
    /// Least-squares `V ~ c0 + c1 / r` over the probes (fitted variant only).
    pub c0: Option<f64>,
    pub c1: Option<f64>,
}

fn quadratic(v: &Potential, energy: f64, mass: f64, z: f64, r: f64) -> f64 {
    let ev = energy + v.value(r);
    (ev + mass) * z * z - 2.0 * z / r + (ev - mass)
}

fn max_residual(v: &Potential, energy: f64, mass: f64, z: f64, probes: &[f64]) -> f64 {
    probes
        .iter()
        .map(|&r| quadratic(v, energy, mass, z, r).abs())
        .fold(0.0, f64::max)
}

/// With the energy given: candidate `Z` are the roots of the quadratic at the
/// first probe; the best candidate is tested at all probes.
pub fn separability_at_energy(v: &Potential, energy: f64, mass: f64, probes: &[f64]) -> SeparabilityReport {
    let mut best: Option<(f64, f64)> = None;
    if let Some(&r0) = probes.first() {
        let ev = energy + v.value(r0);
        let (a, b, c) = (ev + mass, -2.0 / r0, ev - mass);
        let mut candidates = Vec::new();
        if a == 0.0 {
            if b != 0.0 {
                candidates.push(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                // numerically stable pair
                let qq = -0.5 * (b + b.signum() * sq);
                if qq != 0.0 {
                    candidates.push(qq / a);
                    candidates.push(c / qq);
                } else {
                    candidates.push(0.0);
                }
            }
        }
        for z in candidates {
            let res = max_residual(v, energy, mass, z, probes);
            if best.is_none_or(|(_, r)| res < r) {
                best = Some((z, res));
            }
        }
    }
    match best {
        Some((z, residual)) => SeparabilityReport {
            separable: residual <= SEPARABILITY_TOLERANCE,
            residual,
            riccati_z: Some(z),
            energy: Some(energy),
            c0: None,
            c1: None,
        },
        None => SeparabilityReport {
            separable: false,
            residual: f64::INFINITY,
            riccati_z: None,
            energy: Some(energy),
            c0: None,
            c1: None,
        },
    }
}

/// Fits `V ~ c0 + c1 / r` over the probes, derives the only energy and `Z` a
/// constant solution could have, and tests the quadratic at every probe.
pub fn coulomb_separability_check(v: &Potential, mass: f64, probes: &[f64]) -> SeparabilityReport {
    let n = probes.len();
    let fail = |c0, c1| SeparabilityReport {
        separable: false,
        residual: f64::INFINITY,
        riccati_z: None,
        energy: None,
        c0,
        c1,
    };
    if n < 3 {
        return fail(None, None);
    }
    let a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { 1.0 / probes[i] });
    let b = DVector::from_iterator(n, probes.iter().map(|&r| v.value(r)));
    let coef = match a.svd(true, true).solve(&b, 1e-14) {
        Ok(c) => c,
        Err(_) => return fail(None, None),
    };
    let (c0, c1) = (coef[0], coef[1]);
    if c1.abs() > 1.0 {
        return fail(Some(c0), Some(c1));
    }
    let z = if c1 == 0.0 {
        0.0
    } else {
        (1.0 - (1.0 - c1 * c1).sqrt()) / c1
    };
    let energy = mass * (1.0 - z * z) / (1.0 + z * z) - c0;
    let residual = max_residual(v, energy, mass, z, probes);
    SeparabilityReport {
        separable: residual <= SEPARABILITY_TOLERANCE,
        residual,
        riccati_z: Some(z),
        energy: Some(energy),
        c0: Some(c0),
        c1: Some(c1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probes() -> Vec<f64> {
        (0..25).map(|i| 0.5 * 1.17f64.powi(i)).collect()
    }

    #[test]
    fn coulomb_is_separable() {
        let r = separability_at_energy(&Potential::Coulomb { q2: 0.6 }, 0.8, 1.0, &probes());
        assert!(r.separable, "{r:?}");
        assert!((r.riccati_z.unwrap() - 1.0 / 3.0).abs() < 1e-14);
        let f = coulomb_separability_check(&Potential::Coulomb { q2: 0.6 }, 1.0, &probes());
        assert!(f.separable && f.residual <= 1e-10, "{f:?}");
        assert!((f.energy.unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn shifted_coulomb_is_separable() {
        let v = Potential::InversePowers { c0: 0.25, c1: 0.3, c2: 0.0 };
        let f = coulomb_separability_check(&v, 1.0, &probes());
        assert!(f.separable, "{f:?}");
        let e = f.energy.unwrap();
        assert!(separability_at_energy(&v, e, 1.0, &probes()).separable);
    }

    #[test]
    fn inverse_square_breaks_separability() {
        let v = Potential::CoulombInverseSquare { q2: 0.6, k: 0.1 };
        let r = separability_at_energy(&v, 0.8, 1.0, &probes());
        assert!(!r.separable && r.residual > 1e-4, "{r:?}");
        let f = coulomb_separability_check(&v, 1.0, &probes());
        assert!(!f.separable && f.residual > 1e-4, "{f:?}");
    }

    #[test]
    fn constant_potential_only_in_degenerate_case() {
        let c = 0.1;
        let v = Potential::InversePowers { c0: c, c1: 0.0, c2: 0.0 };
        assert!(!separability_at_energy(&v, 0.5, 1.0, &probes()).separable);
        let r = separability_at_energy(&v, 1.0 - c, 1.0, &probes());
        assert!(r.separable && r.riccati_z == Some(0.0), "{r:?}");
        let f = coulomb_separability_check(&v, 1.0, &probes());
        assert!(f.separable && f.riccati_z.unwrap().abs() < 1e-12, "{f:?}");
    }
}
