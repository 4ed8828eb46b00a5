use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("cannot read potential table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("potential table line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("potential table needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("potential table radii must be strictly increasing (at row {0})")]
    NotIncreasing(usize),
    #[error("radius {r} outside tabulated range [{lo}, {hi}]")]
    OutOfRange { r: f64, lo: f64, hi: f64 },
}

/// Natural cubic spline through `(r_i, v_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPotential {
    r: Vec<f64>,
    v: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
    source: Option<String>,
}

impl TabulatedPotential {
    pub fn from_points(r: Vec<f64>, v: Vec<f64>) -> Result<Self, PotentialError> {
        let n = r.len();
        if n < 3 || v.len() != n {
            return Err(PotentialError::TooFewPoints(n.min(v.len())));
        }
        for i in 1..n {
            if r[i] <= r[i - 1] {
                return Err(PotentialError::NotIncreasing(i));
            }
        }
        // Tridiagonal solve for the interior second derivatives.
        let mut m = vec![0.0; n];
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = r[i] - r[i - 1];
            let h1 = r[i + 1] - r[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let c = h1 / 6.0;
            let d = (v[i + 1] - v[i]) / h1 - (v[i] - v[i - 1]) / h0;
            let denom = b - a * c_prime[i - 1];
            c_prime[i] = c / denom;
            d_prime[i] = (d - a * d_prime[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d_prime[i] - c_prime[i] * m[i + 1];
        }
        Ok(TabulatedPotential {
            r,
            v,
            m,
            source: None,
        })
    }

    /// Two whitespace- or comma-separated columns `r V`; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self, PotentialError> {
        let text = std::fs::read_to_string(path).map_err(|source| PotentialError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut tab = Self::parse(&text)?;
        tab.source = Some(path.display().to_string());
        Ok(tab)
    }

    pub fn parse(text: &str) -> Result<Self, PotentialError> {
        let mut r = Vec::new();
        let mut v = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(PotentialError::Parse {
                    line: idx + 1,
                    msg: format!("expected 2 columns, found {}", cols.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| PotentialError::Parse {
                        line: idx + 1,
                        msg: format!("not a finite number: {s}"),
                    })
            };
            r.push(parse(cols[0])?);
            v.push(parse(cols[1])?);
        }
        Self::from_points(r, v)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.r[0], *self.r.last().unwrap())
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.r.len();
        match self.r.partition_point(|&ri| ri <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.r[i + 1] - self.r[i];
        let a = (self.r[i + 1] - x) / h;
        let b = (x - self.r[i]) / h;
        a * self.v[i]
            + b * self.v[i + 1]
            + ((a.powi(3) - a) * self.m[i] + (b.powi(3) - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.r[i + 1] - self.r[i];
        let a = (self.r[i + 1] - x) / h;
        let b = (x - self.r[i]) / h;
        (self.v[i + 1] - self.v[i]) / h
            + (-(3.0 * a * a - 1.0) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }
}

/// Radial potential entering as `P_t = E + V(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// `q2 / r`
    Coulomb { q2: f64 },
    /// `q2 / r + k / r^2`
    CoulombInverseSquare { q2: f64, k: f64 },
    /// `c0 + c1 / r + c2 / r^2`
    InversePowers { c0: f64, c1: f64, c2: f64 },
    Tabulated(TabulatedPotential),
}

impl Potential {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            Potential::Coulomb { q2 } => q2 / r,
            Potential::CoulombInverseSquare { q2, k } => q2 / r + k / (r * r),
            Potential::InversePowers { c0, c1, c2 } => c0 + c1 / r + c2 / (r * r),
            Potential::Tabulated(t) => t.value(r),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match self {
            Potential::Coulomb { q2 } => -q2 / (r * r),
            Potential::CoulombInverseSquare { q2, k } => -q2 / (r * r) - 2.0 * k / (r * r * r),
            Potential::InversePowers { c1, c2, .. } => -c1 / (r * r) - 2.0 * c2 / (r * r * r),
            Potential::Tabulated(t) => t.derivative(r),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Potential::Coulomb { .. } => "coulomb",
            Potential::CoulombInverseSquare { .. } => "coulomb_inverse_square",
            Potential::InversePowers { .. } => "inverse_powers",
            Potential::Tabulated(_) => "tabulated",
        }
    }

    /// Coulomb coupling when the potential is exactly `q2 / r`.
    pub fn pure_coulomb(&self) -> Option<f64> {
        match *self {
            Potential::Coulomb { q2 } => Some(q2),
            Potential::CoulombInverseSquare { q2, k: 0.0 } => Some(q2),
            Potential::InversePowers { c0, c1, c2 } if c0 == 0.0 && c2 == 0.0 => Some(c1),
            _ => None,
        }
    }

    /// Rejects radii the potential cannot be evaluated at.
    pub fn check_range(&self, r_lo: f64, r_hi: f64) -> Result<(), PotentialError> {
        if let Potential::Tabulated(t) = self {
            let (lo, hi) = t.range();
            for r in [r_lo, r_hi] {
                if r < lo * (1.0 - 1e-12) || r > hi * (1.0 + 1e-12) {
                    return Err(PotentialError::OutOfRange { r, lo, hi });
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Coulomb { q2 } => write!(f, "V = {q2}/r"),
            Potential::CoulombInverseSquare { q2, k } => write!(f, "V = {q2}/r + {k}/r^2"),
            Potential::InversePowers { c0, c1, c2 } => write!(f, "V = {c0} + {c1}/r + {c2}/r^2"),
            Potential::Tabulated(t) => {
                let (lo, hi) = t.range();
                write!(f, "V tabulated on [{lo}, {hi}]")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd(p: &Potential, r: f64) -> f64 {
        let h = 1e-6 * r;
        (p.value(r + h) - p.value(r - h)) / (2.0 * h)
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let pots = [
            Potential::Coulomb { q2: 0.6 },
            Potential::CoulombInverseSquare { q2: 0.6, k: 1.0 },
            Potential::InversePowers { c0: 0.3, c1: -0.2, c2: 0.07 },
        ];
        for p in &pots {
            for &r in &[0.1, 0.5, 2.0, 17.0] {
                assert_relative_eq!(p.derivative(r), fd(p, r), max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn spline_reproduces_smooth_function() {
        let r: Vec<f64> = (0..400).map(|i| 0.5 + i as f64 * 0.05).collect();
        let v: Vec<f64> = r.iter().map(|x| 0.6 / x + 0.1 * (-x).exp()).collect();
        let t = TabulatedPotential::from_points(r, v).unwrap();
        for &x in &[0.8f64, 1.234, 5.5, 15.0] {
            let exact = 0.6 / x + 0.1 * (-x).exp();
            let dexact = -0.6 / (x * x) - 0.1 * (-x).exp();
            assert_relative_eq!(t.value(x), exact, max_relative = 1e-6);
            assert_relative_eq!(t.derivative(x), dexact, max_relative = 1e-4);
        }
        let p = Potential::Tabulated(t);
        for &x in &[0.9, 3.3, 12.1] {
            assert_relative_eq!(p.derivative(x), fd(&p, x), max_relative = 1e-8);
        }
    }

    #[test]
    fn spline_interpolates_knots() {
        let t = TabulatedPotential::from_points(vec![1.0, 2.0, 4.0, 5.0], vec![1.0, -1.0, 2.0, 0.0])
            .unwrap();
        assert_eq!(t.value(1.0), 1.0);
        assert!((t.value(2.0) + 1.0).abs() < 1e-15);
        assert!((t.value(4.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn parse_table() {
        let text = "# r V\n1.0 2.0\n\n2.0, 1.0 # trailing\n3.0\t0.5\n";
        let t = TabulatedPotential::parse(text).unwrap();
        assert_eq!(t.range(), (1.0, 3.0));
        assert!(matches!(
            TabulatedPotential::parse("1 2\n0.5 1\n3 3\n"),
            Err(PotentialError::NotIncreasing(1))
        ));
        assert!(matches!(
            TabulatedPotential::parse("1 2 3\n"),
            Err(PotentialError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            TabulatedPotential::parse("1 2\n2 3\n"),
            Err(PotentialError::TooFewPoints(2))
        ));
    }

    #[test]
    fn range_check() {
        let t = TabulatedPotential::parse("1 2\n2 3\n3 1\n").unwrap();
        let p = Potential::Tabulated(t);
        assert!(p.check_range(1.0, 3.0).is_ok());
        assert!(p.check_range(0.5, 3.0).is_err());
        assert!(Potential::Coulomb { q2: 1.0 }.check_range(1e-9, 1e9).is_ok());
    }
}
