//! Trial solution parameterized by the ratio `X = B/C`.
//!
//! With `C = 1`, `B = X` and `A = 1/sqrt(X^2 + cos^2 theta)`:
//! `sin gamma = A X sin theta`, `cos gamma = -A sqrt(X^2+1) cos theta`,
//! `sinh alpha = -A sin theta`, `cosh alpha = A sqrt(X^2+1)`,
//! `sin beta = -A cos theta`, `cos beta = A X`.

use thiserror::Error;

use crate::geometry::FieldJet;

/// `|cos theta|` below this counts as the equator (absorbs `cos(pi/2) != 0`).
const EQUATOR_EPS: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrialError {
    #[error("trial solution undefined at X = 0 on the equator")]
    Degenerate,
    #[error("X = 0: Yvon-Takabayashi angle sits on the {branch} branch")]
    BetaBranch { branch: f64 },
    #[error("non-finite input")]
    NonFinite,
    #[error("C must be positive, got {0}")]
    NonPositiveC(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularState {
    pub sin_gamma: f64,
    pub cos_gamma: f64,
    pub sinh_alpha: f64,
    pub cosh_alpha: f64,
    pub sin_beta: f64,
    pub cos_beta: f64,
    /// `A^2 C^2 = 1 / (X^2 + cos^2 theta)`.
    pub a2c2: f64,
}

impl AngularState {
    pub fn alpha(&self) -> f64 {
        self.sinh_alpha.asinh()
    }

    pub fn gamma(&self) -> f64 {
        self.sin_gamma.atan2(self.cos_gamma)
    }

    pub fn beta(&self) -> f64 {
        self.sin_beta.atan2(self.cos_beta)
    }

    /// Largest violation of the three Pythagorean identities. The hyperbolic
    /// one is relative to `cosh^2 alpha`, its rounding scale.
    pub fn pythagorean_deviation(&self) -> f64 {
        let g = (self.sin_gamma.powi(2) + self.cos_gamma.powi(2) - 1.0).abs();
        let c2 = self.cosh_alpha.powi(2);
        let a = (c2 - self.sinh_alpha.powi(2) - 1.0).abs() / c2;
        let b = (self.sin_beta.powi(2) + self.cos_beta.powi(2) - 1.0).abs();
        g.max(a).max(b)
    }
}

pub fn angular_state(x: f64, theta: f64) -> Result<AngularState, TrialError> {
    angular_state_bc(x, 1.0, theta)
}

/// General form with explicit `B` and `C > 0`; only `B/C` survives.
pub fn angular_state_bc(b: f64, c: f64, theta: f64) -> Result<AngularState, TrialError> {
    if !b.is_finite() || !c.is_finite() || !theta.is_finite() {
        return Err(TrialError::NonFinite);
    }
    if c <= 0.0 {
        return Err(TrialError::NonPositiveC(c));
    }
    let (st, ct) = theta.sin_cos();
    if b == 0.0 && ct.abs() < EQUATOR_EPS {
        return Err(TrialError::Degenerate);
    }
    let denom2 = b * b + (c * ct).powi(2);
    let a = 1.0 / denom2.sqrt();
    let root = (b * b + c * c).sqrt();
    Ok(AngularState {
        sin_gamma: a * b * st,
        cos_gamma: -a * root * ct,
        sinh_alpha: -a * c * st,
        cosh_alpha: a * root,
        sin_beta: -a * c * ct,
        cos_beta: a * b,
        a2c2: a * a * c * c,
    })
}

/// `beta = -arctan(cos theta / X)`, evaluated with atan2 so that `X < 0`
/// lands on the branch consistent with `cos beta = A X`.
pub fn beta_angle(x: f64, theta: f64) -> Result<f64, TrialError> {
    if !x.is_finite() || !theta.is_finite() {
        return Err(TrialError::NonFinite);
    }
    let ct = theta.cos();
    if x == 0.0 {
        if ct.abs() < EQUATOR_EPS {
            return Err(TrialError::Degenerate);
        }
        return Err(TrialError::BetaBranch {
            branch: -ct.signum() * std::f64::consts::FRAC_PI_2,
        });
    }
    Ok((-ct).atan2(x))
}

/// `phi^2 = K e^{-G} r^{-2} sqrt(X^2 + cos^2 theta)`.
pub fn module_squared(k: f64, g: f64, x: f64, r: f64, theta: f64) -> f64 {
    let ct = theta.cos();
    k * (-g).exp() / (r * r) * (x * x + ct * ct).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularDerivatives {
    pub d_theta_gamma: f64,
    pub d_r_gamma: f64,
    pub d_theta_alpha: f64,
    pub d_r_alpha: f64,
    pub d_theta_beta: f64,
    pub d_r_beta: f64,
}

/// Closed-form derivatives for `X = X(r)`. Written without dividing by `X`, so
/// they stay finite at the zeros of `X` off the equator.
pub fn analytic_angular_derivatives(
    x: f64,
    dx_dr: f64,
    theta: f64,
) -> Result<AngularDerivatives, TrialError> {
    let s = angular_state(x, theta)?;
    let (st, ct) = theta.sin_cos();
    let a2 = s.a2c2;
    let root = (x * x + 1.0).sqrt();
    Ok(AngularDerivatives {
        d_theta_gamma: -x * a2 * root,
        d_r_gamma: -a2 * ct * st * dx_dr / root,
        d_theta_alpha: -a2 * root * ct,
        d_r_alpha: x * a2 * st * dx_dr / root,
        d_theta_beta: a2 * x * st,
        d_r_beta: a2 * ct * dx_dr,
    })
}

/// Values and first derivatives of `(alpha, gamma, beta)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleJets {
    pub alpha: FieldJet,
    pub gamma: FieldJet,
    pub beta: FieldJet,
}

pub fn angle_jets(x: f64, dx_dr: f64, theta: f64) -> Result<AngleJets, TrialError> {
    let s = angular_state(x, theta)?;
    let d = analytic_angular_derivatives(x, dx_dr, theta)?;
    Ok(AngleJets {
        alpha: FieldJet::new(s.alpha(), d.d_r_alpha, d.d_theta_alpha),
        gamma: FieldJet::new(s.gamma(), d.d_r_gamma, d.d_theta_gamma),
        beta: FieldJet::new(s.beta(), d.d_r_beta, d.d_theta_beta),
    })
}

/// Radial data needed to evaluate `beta` and `phi^2` anywhere in the meridian
/// plane. Samples are aligned with `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    pub r: Vec<f64>,
    pub x: Vec<f64>,
    pub dx: Vec<f64>,
    pub g: Vec<f64>,
    pub k: f64,
}

impl PolarField {
    pub fn new(r: Vec<f64>, x: Vec<f64>, dx: Vec<f64>, g: Vec<f64>, k: f64) -> Self {
        assert!(
            r.len() == x.len() && r.len() == dx.len() && r.len() == g.len(),
            "polar field arrays must share the radial grid"
        );
        PolarField { r, x, dx, g, k }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn beta(&self, i: usize, theta: f64) -> Result<f64, TrialError> {
        beta_angle(self.x[i], theta)
    }

    pub fn phi2(&self, i: usize, theta: f64) -> f64 {
        module_squared(self.k, self.g[i], self.x[i], self.r[i], theta)
    }

    /// `d ln phi^2 / dr` without the `-2/r` coordinate factor.
    pub fn d_r_ln_phi2_reduced(&self, i: usize, theta: f64, d_g: f64) -> f64 {
        let ct = theta.cos();
        -d_g + self.x[i] * self.dx[i] / (self.x[i].powi(2) + ct * ct)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn equator_has_zero_beta() {
        let s = angular_state(2.5, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(s.sin_beta, 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(s.cos_beta, 1.0, epsilon = 1e-16);
        assert_abs_diff_eq!(s.beta(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn pole_values() {
        let s = angular_state(4.0 / 3.0, 0.0).unwrap();
        assert_abs_diff_eq!(s.sin_beta, -0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(s.cos_beta, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(s.a2c2, 9.0 / 25.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_point_rejected() {
        assert_eq!(angular_state(0.0, FRAC_PI_2), Err(TrialError::Degenerate));
        assert!(angular_state(0.0, 0.3).is_ok());
    }

    #[test]
    fn beta_examples() {
        assert_abs_diff_eq!(beta_angle(4.0 / 3.0, 0.0).unwrap(), -(0.75f64).atan(), epsilon = 1e-15);
        assert_abs_diff_eq!(beta_angle(1.0, FRAC_PI_2).unwrap(), 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(beta_angle(1.0, PI).unwrap(), FRAC_PI_4, epsilon = 1e-15);
        assert_eq!(
            beta_angle(0.0, 0.2),
            Err(TrialError::BetaBranch { branch: -FRAC_PI_2 })
        );
        assert_eq!(
            beta_angle(0.0, 2.9),
            Err(TrialError::BetaBranch { branch: FRAC_PI_2 })
        );
    }

    #[test]
    fn negative_x_branch_matches_state() {
        let s = angular_state(-0.5457, 0.4).unwrap();
        let b = beta_angle(-0.5457, 0.4).unwrap();
        assert_abs_diff_eq!(b.sin(), s.sin_beta, epsilon = 1e-15);
        assert_abs_diff_eq!(b.cos(), s.cos_beta, epsilon = 1e-15);
        assert!(s.cos_beta < 0.0);
    }

    #[test]
    fn module_examples() {
        assert_eq!(module_squared(1.0, 0.0, 0.0, 1.0, 0.0), 1.0);
        let g = 1.2 * 1.0 - 1.6 * 1.0f64.ln();
        let v = module_squared(1.0, g, 4.0 / 3.0, 1.0, FRAC_PI_2);
        assert_abs_diff_eq!(v, (-1.2f64).exp() * 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.40159, epsilon = 1e-5);
        let a = module_squared(2.0, 0.3, 0.7, 1.5, 0.4);
        let b = module_squared(2.0, 0.3, 0.7, 1.5, PI - 0.4);
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let d = analytic_angular_derivatives(4.0 / 3.0, 0.0, FRAC_PI_4).unwrap();
        assert_eq!(d.d_r_beta, 0.0);
        let x: f64 = 4.0 / 3.0;
        let st = FRAC_PI_4.sin();
        let expected = x * st / (x * x + 0.5);
        assert_abs_diff_eq!(d.d_theta_beta, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(d.d_theta_beta, 0.41392, epsilon = 1e-5);
    }

    #[test]
    fn tan_beta_identity() {
        for &(x, th) in &[(0.3, 0.2), (-2.0, 1.1), (5.0, 2.8)] {
            let s = angular_state(x, th).unwrap();
            assert_abs_diff_eq!(s.sin_beta / s.cos_beta, -th.cos() / x, epsilon = 1e-14);
        }
    }

    #[test]
    fn scale_invariance() {
        let base = angular_state(0.8, 0.9).unwrap();
        for lambda in [0.5, 1.0, 7.0] {
            let s = angular_state_bc(0.8 * lambda, lambda, 0.9).unwrap();
            assert_abs_diff_eq!(s.sin_gamma, base.sin_gamma, epsilon = 1e-15);
            assert_abs_diff_eq!(s.cos_gamma, base.cos_gamma, epsilon = 1e-15);
            assert_abs_diff_eq!(s.sinh_alpha, base.sinh_alpha, epsilon = 1e-15);
            assert_abs_diff_eq!(s.cosh_alpha, base.cosh_alpha, epsilon = 1e-15);
            assert_abs_diff_eq!(s.sin_beta, base.sin_beta, epsilon = 1e-15);
            assert_abs_diff_eq!(s.cos_beta, base.cos_beta, epsilon = 1e-15);
        }
        assert!(angular_state_bc(1.0, 0.0, 0.3).is_err());
    }

    #[test]
    fn equatorial_module_is_stationary_in_theta() {
        let h = 1e-5;
        let f = |th: f64| module_squared(1.0, 0.4, 1.7, 2.0, th).ln();
        let d = (f(FRAC_PI_2 + h) - f(FRAC_PI_2 - h)) / (2.0 * h);
        assert!(d.abs() < 1e-12);
    }

    fn x_of_r(r: f64) -> (f64, f64) {
        (0.4 + 0.3 * r.sin() + 0.1 * r, 0.3 * r.cos() + 0.1)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn pythagorean_identities(x in -20.0f64..20.0, theta in 0.01f64..3.13) {
            prop_assume!(x.abs() > 1e-6);
            let s = angular_state(x, theta).unwrap();
            prop_assert!(s.pythagorean_deviation() <= 1e-13);
            let ct = theta.cos();
            let want = 1.0 / (x * x + ct * ct);
            prop_assert!((s.a2c2 - want).abs() <= 1e-15 * want);
        }

        #[test]
        fn derivatives_match_finite_differences(r in 0.3f64..6.0, theta in 0.05f64..3.09) {
            let h = 1e-5;
            let (x, dx) = x_of_r(r);
            prop_assume!(x.abs() > 0.2);
            let d = analytic_angular_derivatives(x, dx, theta).unwrap();
            let at = |rr: f64, th: f64| {
                let s = angular_state(x_of_r(rr).0, th).unwrap();
                (s.alpha(), s.gamma(), s.beta())
            };
            let wrap = |a: f64| (a + PI).rem_euclid(2.0 * PI) - PI;
            let (ap, gp, bp) = at(r, theta + h);
            let (am, gm, bm) = at(r, theta - h);
            prop_assert!(((ap - am) / (2.0 * h) - d.d_theta_alpha).abs() <= 1e-8);
            prop_assert!((wrap(gp - gm) / (2.0 * h) - d.d_theta_gamma).abs() <= 1e-8);
            prop_assert!((wrap(bp - bm) / (2.0 * h) - d.d_theta_beta).abs() <= 1e-8);
            let (ap, gp, bp) = at(r + h, theta);
            let (am, gm, bm) = at(r - h, theta);
            prop_assert!(((ap - am) / (2.0 * h) - d.d_r_alpha).abs() <= 1e-8);
            prop_assert!((wrap(gp - gm) / (2.0 * h) - d.d_r_gamma).abs() <= 1e-8);
            prop_assert!((wrap(bp - bm) / (2.0 * h) - d.d_r_beta).abs() <= 1e-8);
        }
    }
}
