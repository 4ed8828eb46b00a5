//! Exactly solvable radial cases.

use serde::Serialize;

use super::RadialError;

/// Values of the small-radius solution of `z'' + 4 z'/r + k^2 z / r^4 = 0`
/// (the `k/r^2` potential with `E = m = 0`), normalized to `a = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallRadius {
    pub z: f64,
    pub dz: f64,
    pub riccati_z: f64,
    pub x: f64,
    /// `-G = ln r + ln|cos u| + ln|cos u + u sin u|`, `u = k/r`.
    pub minus_g: f64,
    /// `sqrt(1 + u^2)`, the amplitude envelope of `z`.
    pub envelope: f64,
}

pub fn inverse_square_small_r(k: f64, r: f64) -> SmallRadius {
    let u = k / r;
    let (s, c) = u.sin_cos();
    let z = c + u * s;
    let dz = -u * u * u * c / k;
    let riccati_z = u * c / z;
    SmallRadius {
        z,
        dz,
        riccati_z,
        x: 0.5 * (1.0 / riccati_z - riccati_z),
        minus_g: r.ln() + c.abs().ln() + z.abs().ln(),
        envelope: (1.0 + u * u).sqrt(),
    }
}

/// Constant-`Z` bound state of `V = q2 / r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoulombState {
    pub q2: f64,
    pub mass: f64,
    pub energy: f64,
    pub riccati_z: f64,
    pub x: f64,
    /// `phi^2(r, pi/2) ~ r^power e^{-decay r}`.
    pub decay: f64,
    pub power: f64,
    /// `z ~ r^{-z_power} e^{-z_rate r}`.
    pub z_power: f64,
    pub z_rate: f64,
}

/// `E = m sqrt(1 - q2^2)`, `Z = (1 - sqrt(1 - q2^2)) / q2`.
pub fn coulomb_state(q2: f64, mass: f64) -> Result<CoulombState, RadialError> {
    if !(q2 > 0.0 && q2 < 1.0) || !(mass > 0.0) {
        return Err(RadialError::InvalidInput(format!(
            "constant-Z state needs 0 < q2 < 1 and m > 0 (q2 = {q2}, m = {mass})"
        )));
    }
    let root = (1.0 - q2 * q2).sqrt();
    let energy = mass * root;
    let z = (1.0 - root) / q2;
    let x = 0.5 * (1.0 / z - z);
    Ok(CoulombState {
        q2,
        mass,
        energy,
        riccati_z: z,
        x,
        decay: 2.0 * (mass * (x * x + 1.0).sqrt() - x * energy),
        power: 2.0 * x * q2 - 2.0,
        z_power: z * q2,
        z_rate: z * (energy + mass),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_radius_reference_values() {
        let s = inverse_square_small_r(1.0, 0.5);
        let c2 = 2f64.cos();
        assert_abs_diff_eq!(s.riccati_z, 2.0 * c2 / (c2 + 2.0 * 2f64.sin()), epsilon = 1e-15);
        assert_abs_diff_eq!(s.riccati_z, -0.5935, epsilon = 1e-4);
        assert_abs_diff_eq!(s.x, -0.5457, epsilon = 1e-4);
    }

    #[test]
    fn small_radius_solves_truncated_equation() {
        let k = 1.3;
        let h = 1e-5;
        for &r in &[0.07, 0.2, 0.45] {
            let f = |r: f64| inverse_square_small_r(k, r).z;
            let d1 = (f(r + h) - f(r - h)) / (2.0 * h);
            let d2 = (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h);
            let res = d2 + 4.0 * d1 / r + k * k * f(r) / r.powi(4);
            let scale = d2.abs() + (k * k * f(r) / r.powi(4)).abs();
            assert!(res.abs() < 1e-5 * scale, "r={r}: {res} vs {scale}");
            assert!((d1 - inverse_square_small_r(k, r).dz).abs() < 1e-6 * (1.0 + d1.abs()));
        }
    }

    #[test]
    fn small_radius_g_rate() {
        // G' = -2 X V with E = m = 0
        let k = 0.8;
        let h = 1e-6;
        for &r in &[0.11, 0.3] {
            let mg = |r: f64| inverse_square_small_r(k, r).minus_g;
            let dg = -(mg(r + h) - mg(r - h)) / (2.0 * h);
            let s = inverse_square_small_r(k, r);
            let expected = -2.0 * s.x * k / (r * r);
            assert!((dg - expected).abs() < 1e-6 * (1.0 + expected.abs()), "{dg} {expected}");
        }
    }

    #[test]
    fn coulomb_reference() {
        let c = coulomb_state(0.6, 1.0).unwrap();
        assert_abs_diff_eq!(c.energy, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(c.riccati_z, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.x, 4.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.decay, 1.2, epsilon = 1e-14);
        assert_abs_diff_eq!(c.power, -0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(c.z_power, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(c.z_rate, 0.6, epsilon = 1e-15);
        assert!(coulomb_state(1.2, 1.0).is_err());
    }
}
