//! Explicit embedded Runge-Kutta pairs.
//!
//! `dopri5` is the Dormand-Prince 5(4) pair with a quartic continuous
//! extension, used for the main integrations. `CashKarp` is a separate 5(4)
//! pair used where an independent route is wanted.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size collapsed at t = {t}")]
    StepSizeCollapse { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step limit exceeded at t = {t}")]
    MaxSteps { t: f64 },
    #[error("output points must be monotone in the integration direction")]
    BadOutputGrid,
    #[error("tolerances must be positive")]
    BadTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Optional first step; chosen automatically otherwise.
    pub first_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
            first_step: None,
        }
    }
}

impl OdeOptions {
    fn validate(&self) -> Result<(), OdeError> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(OdeError::BadTolerance);
        }
        Ok(())
    }
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    -71.0 / 57600.0,
    0.0,
    71.0 / 16695.0,
    -71.0 / 1920.0,
    17253.0 / 339200.0,
    -22.0 / 525.0,
    1.0 / 40.0,
];
/// Dense-output coefficients: `y(t + x h) = y + h * sum_i k_i * (P_i . [x, x^2, x^3, x^4])`.
const DP_P: [[f64; 4]; 7] = [
    [
        1.0,
        -8048581381.0 / 2820520608.0,
        8663915743.0 / 2820520608.0,
        -12715105075.0 / 11282082432.0,
    ],
    [0.0, 0.0, 0.0, 0.0],
    [
        0.0,
        131558114200.0 / 32700410799.0,
        -68118460800.0 / 10900136933.0,
        87487479700.0 / 32700410799.0,
    ],
    [
        0.0,
        -1754552775.0 / 470086768.0,
        14199869525.0 / 1410260304.0,
        -10690763975.0 / 1880347072.0,
    ],
    [
        0.0,
        127303824393.0 / 49829197408.0,
        -318862633887.0 / 49829197408.0,
        701980252875.0 / 199316789632.0,
    ],
    [
        0.0,
        -282668133.0 / 205662961.0,
        2019193451.0 / 616988883.0,
        -1453857185.0 / 822651844.0,
    ],
    [
        0.0,
        40617522.0 / 29380423.0,
        -110615467.0 / 29380423.0,
        69997945.0 / 29380423.0,
    ],
];

fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], o: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = o.atol + o.rtol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / N as f64).sqrt()
}

fn rms_scaled<const N: usize>(v: &[f64; N], y: &[f64; N], o: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        acc += (v[i] / (o.atol + o.rtol * y[i].abs())).powi(2);
    }
    (acc / N as f64).sqrt()
}

fn finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Hairer-Wanner starting step heuristic.
fn initial_step<const N: usize, F>(f: &mut F, t0: f64, y0: &[f64; N], f0: &[f64; N], dir: f64, span: f64, o: &OdeOptions, order: i32) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let d0 = rms_scaled(y0, y0, o);
    let d1 = rms_scaled(f0, y0, o);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let mut y1 = [0.0; N];
    for i in 0..N {
        y1[i] = y0[i] + dir * h0 * f0[i];
    }
    let f1 = f(t0 + dir * h0, &y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = rms_scaled(&diff, y0, o) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (1e-6f64).max(h0 * 1e-3)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / (order as f64 + 1.0))
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates `y' = f(t, y)` from `(t0, y0)` and returns the state at each of
/// `t_out`, which must be ordered along the integration direction (the
/// direction is set by the last output point).
pub fn dopri5<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_out: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<[f64; N]>, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    opts.validate()?;
    if t_out.is_empty() {
        return Ok(Vec::new());
    }
    let t_end = *t_out.last().unwrap();
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    for w in t_out.windows(2) {
        if (w[1] - w[0]) * dir < 0.0 {
            return Err(OdeError::BadOutputGrid);
        }
    }
    if (t_out[0] - t0) * dir < 0.0 {
        return Err(OdeError::BadOutputGrid);
    }

    let mut out = Vec::with_capacity(t_out.len());
    let mut next = 0;
    while next < t_out.len() && t_out[next] == t0 {
        out.push(y0);
        next += 1;
    }
    let span = (t_end - t0).abs();
    if next == t_out.len() {
        return Ok(out);
    }

    let mut t = t0;
    let mut y = y0;
    let mut k0 = f(t, &y);
    if !finite(&k0) {
        return Err(OdeError::NonFinite { t });
    }
    let mut h = match opts.first_step {
        Some(h) => h.abs().min(span),
        None => initial_step(&mut f, t0, &y0, &k0, dir, span, opts, 4),
    };
    let mut steps = 0;
    let mut k = [[0.0; N]; 7];

    while next < t_out.len() {
        steps += 1;
        if steps > opts.max_steps {
            return Err(OdeError::MaxSteps { t });
        }
        let h_min = 10.0 * f64::EPSILON * t.abs().max(1e-300);
        if h < h_min {
            return Err(OdeError::StepSizeCollapse { t });
        }
        let remaining = (t_end - t).abs();
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        let hs = dir * h;

        k[0] = k0;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = DP_A[s - 1][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += hs * a * kj[i];
                    }
                }
            }
            if s == 6 {
                // stage 7 is evaluated at the new solution (FSAL)
                k[6] = f(t + hs, &ys);
                let y_new = ys;
                let mut err = [0.0; N];
                for i in 0..N {
                    for (j, kj) in k.iter().enumerate() {
                        err[i] += hs * DP_E[j] * kj[i];
                    }
                }
                let en = if finite(&y_new) && finite(&k[6]) {
                    error_norm(&err, &y, &y_new, opts)
                } else {
                    f64::INFINITY
                };
                if en <= 1.0 {
                    let t_new = if last { t_end } else { t + hs };
                    while next < t_out.len() && (t_out[next] - t_new) * dir <= 0.0 {
                        let x = (t_out[next] - t) / hs;
                        let mut yi = y;
                        let pw = [x, x * x, x * x * x, x * x * x * x];
                        for (j, kj) in k.iter().enumerate() {
                            let coef: f64 = (0..4).map(|q| DP_P[j][q] * pw[q]).sum();
                            if coef != 0.0 {
                                for i in 0..N {
                                    yi[i] += hs * coef * kj[i];
                                }
                            }
                        }
                        out.push(if t_out[next] == t_new { y_new } else { yi });
                        next += 1;
                    }
                    t = t_new;
                    y = y_new;
                    k0 = k[6];
                    let factor = if en == 0.0 {
                        MAX_FACTOR
                    } else {
                        (SAFETY * en.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                    };
                    h *= factor;
                } else {
                    if !en.is_finite() && !finite(&y_new) && h < 1e3 * h_min {
                        return Err(OdeError::NonFinite { t });
                    }
                    let factor = if en.is_finite() {
                        (SAFETY * en.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                    } else {
                        MIN_FACTOR
                    };
                    h *= factor;
                }
            } else {
                k[s] = f(t + DP_C[s] * hs, &ys);
            }
        }
    }
    Ok(out)
}

const CK_C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 3.0 / 5.0, 1.0, 7.0 / 8.0];
const CK_A: [[f64; 5]; 5] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
    [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0, 44275.0 / 110592.0, 253.0 / 4096.0],
];
const CK_B5: [f64; 6] = [37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0];
const CK_B4: [f64; 6] = [
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    1.0 / 4.0,
];

/// What the post-step hook asks the Cash-Karp driver to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Continue,
    /// The hook rewrote the state (e.g. a chart change); keep going.
    Modified,
}

/// Cash-Karp 5(4) driver that lands exactly on every output point and calls
/// `hook` after each accepted step.
pub fn cash_karp<const N: usize, F, H>(
    mut f: F,
    mut hook: H,
    t0: f64,
    y0: [f64; N],
    t_out: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<[f64; N]>, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    H: FnMut(f64, &mut [f64; N]) -> StepAction,
{
    opts.validate()?;
    if t_out.is_empty() {
        return Ok(Vec::new());
    }
    let t_end = *t_out.last().unwrap();
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    for w in t_out.windows(2) {
        if (w[1] - w[0]) * dir < 0.0 {
            return Err(OdeError::BadOutputGrid);
        }
    }
    if (t_out[0] - t0) * dir < 0.0 {
        return Err(OdeError::BadOutputGrid);
    }
    let mut out = Vec::with_capacity(t_out.len());
    let mut t = t0;
    let mut y = y0;
    let span = (t_end - t0).abs();
    let mut h = match opts.first_step {
        Some(h) => h.abs(),
        None => {
            let f0 = f(t0, &y0);
            if !finite(&f0) {
                return Err(OdeError::NonFinite { t: t0 });
            }
            initial_step(&mut f, t0, &y0, &f0, dir, span.max(1e-300), opts, 4)
        }
    };
    let mut steps = 0;
    for &target in t_out {
        while (target - t) * dir > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(OdeError::MaxSteps { t });
            }
            let h_min = 10.0 * f64::EPSILON * t.abs().max(1e-300);
            if h < h_min {
                return Err(OdeError::StepSizeCollapse { t });
            }
            let remaining = (target - t).abs();
            let landing = h >= remaining;
            let step = if landing { remaining } else { h };
            let hs = dir * step;
            let mut k = [[0.0; N]; 6];
            k[0] = f(t, &y);
            for s in 1..6 {
                let mut ys = y;
                for j in 0..s {
                    for i in 0..N {
                        ys[i] += hs * CK_A[s - 1][j] * k[j][i];
                    }
                }
                k[s] = f(t + CK_C[s] * hs, &ys);
            }
            let mut y5 = y;
            let mut err = [0.0; N];
            for i in 0..N {
                for j in 0..6 {
                    y5[i] += hs * CK_B5[j] * k[j][i];
                    err[i] += hs * (CK_B5[j] - CK_B4[j]) * k[j][i];
                }
            }
            let en = if finite(&y5) {
                error_norm(&err, &y, &y5, opts)
            } else {
                f64::INFINITY
            };
            if en <= 1.0 {
                t = if landing { target } else { t + hs };
                y = y5;
                hook(t, &mut y);
                let factor = if en == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * en.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // a landing step may be artificially short; do not let it shrink h
                h = if landing { h.max(step * factor) } else { step * factor };
            } else {
                h = step
                    * if en.is_finite() {
                        (SAFETY * en.powf(-0.25)).clamp(MIN_FACTOR, 1.0)
                    } else {
                        MIN_FACTOR
                    };
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64; 1]) -> [f64; 1] {
        [-y[0]]
    }

    fn oscillator(_t: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn dopri_exponential() {
        let ts: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let ys = dopri5(decay, 0.0, [1.0], &ts, &OdeOptions::default()).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - (-t).exp()).abs() <= 1e-9 * (-t).exp() + 1e-12, "t={t}");
        }
    }

    #[test]
    fn dopri_backward() {
        let ts: Vec<f64> = (0..=20).map(|i| 5.0 - i as f64 * 0.25).collect();
        let ys = dopri5(decay, 5.0, [1.0], &ts, &OdeOptions::default()).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            let exact = (5.0 - t).exp();
            assert!((y[0] - exact).abs() <= 1e-9 * exact, "t={t}");
        }
    }

    #[test]
    fn dense_output_between_steps() {
        // Loose tolerance so steps are long and output falls inside them.
        let opts = OdeOptions {
            rtol: 1e-6,
            atol: 1e-9,
            ..Default::default()
        };
        let ts: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
        let ys = dopri5(oscillator, 0.0, [0.0, 1.0], &ts, &opts).unwrap();
        let worst = ts
            .iter()
            .zip(&ys)
            .map(|(t, y)| (y[0] - t.sin()).abs().max((y[1] - t.cos()).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn dopri_convergence_order() {
        let err = |rtol: f64| {
            let opts = OdeOptions {
                rtol,
                atol: rtol * 1e-3,
                ..Default::default()
            };
            let y = dopri5(oscillator, 0.0, [0.0, 1.0], &[10.0], &opts).unwrap();
            (y[0][0] - 10f64.sin()).abs()
        };
        let coarse = err(1e-6);
        let fine = err(1e-9);
        assert!(fine < coarse / 50.0, "{coarse} {fine}");
    }

    #[test]
    fn cash_karp_oscillator() {
        let ts: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
        let ys = cash_karp(oscillator, |_, _| StepAction::Continue, 0.0, [0.0, 1.0], &ts, &OdeOptions::default())
            .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_non_monotone_output() {
        let r = dopri5(decay, 0.0, [1.0], &[1.0, 0.5, 2.0], &OdeOptions::default());
        assert_eq!(r, Err(OdeError::BadOutputGrid));
    }

    #[test]
    fn blow_up_reports_failure() {
        // y' = y^2 from y(0)=1 blows up at t=1.
        let r = dopri5(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], &[2.0], &OdeOptions::default());
        assert!(r.is_err());
    }
}
