//! Flat-space Clifford algebra in the chiral representation.
//!
//! Conventions: metric signature (+,-,-,-), `sigma^ab = [gamma^a, gamma^b] / 4`,
//! `pi` fixed by `2i sigma_ab = eps_abcd pi sigma^cd` with `eps_0123 = +1`.
//! In this basis `pi = diag(-1, -1, 1, 1)`.

use std::sync::OnceLock;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type Mat4c = Matrix4<C64>;
pub type Vec4c = Vector4<C64>;

/// Diagonal of the Minkowski metric.
pub const METRIC: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

/// Imaginary parts of nominally real bilinears above this (relative to |psi|^2)
/// indicate a broken basis.
pub const IMAGINARY_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliffordError {
    #[error("module must be positive, got {0}")]
    NonPositiveModule(f64),
    #[error("spinor has non-finite component")]
    NonFinite,
    #[error("bilinear {name} has imaginary part {imag:e}")]
    ComplexBilinear { name: &'static str, imag: f64 },
}

/// Totally antisymmetric symbol with lower indices, `eps_0123 = +1`.
pub fn levi_civita(a: usize, b: usize, c: usize, d: usize) -> f64 {
    let idx = [a, b, c, d];
    let mut sign = 1.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if idx[i] == idx[j] {
                return 0.0;
            }
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Same symbol with all indices raised (three minus signs from the metric).
pub fn levi_civita_upper(a: usize, b: usize, c: usize, d: usize) -> f64 {
    -levi_civita(a, b, c, d)
}

pub fn lower(v: &[f64; 4]) -> [f64; 4] {
    [v[0], -v[1], -v[2], -v[3]]
}

pub fn minkowski_dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn max_abs(m: &Mat4c) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct GammaBasis {
    gamma: [Mat4c; 4],
    pi: Mat4c,
    sigma: [[Mat4c; 4]; 4],
}

impl GammaBasis {
    /// `gamma^a` (upper frame index).
    pub fn gamma(&self, a: usize) -> &Mat4c {
        &self.gamma[a]
    }

    /// `gamma_a = eta_ab gamma^b`.
    pub fn gamma_lower(&self, a: usize) -> Mat4c {
        self.gamma[a] * c(METRIC[a], 0.0)
    }

    pub fn pi(&self) -> &Mat4c {
        &self.pi
    }

    /// `sigma^ab` (upper indices).
    pub fn sigma(&self, a: usize, b: usize) -> &Mat4c {
        &self.sigma[a][b]
    }

    pub fn sigma_lower(&self, a: usize, b: usize) -> Mat4c {
        self.sigma[a][b] * c(METRIC[a] * METRIC[b], 0.0)
    }

    /// Largest entry of `{gamma_a, gamma_b} - 2 eta_ab I` over all pairs.
    pub fn anticommutator_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let ac = self.gamma[a] * self.gamma[b] + self.gamma[b] * self.gamma[a];
                let eta = if a == b { 2.0 * METRIC[a] } else { 0.0 };
                dev = dev.max(max_abs(&(ac - Mat4c::identity() * c(eta, 0.0))));
            }
        }
        dev
    }

    /// Largest entry of `2i sigma_ab - eps_abcd pi sigma^cd`.
    pub fn pi_duality_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let lhs = self.sigma_lower(a, b) * c(0.0, 2.0);
                let mut rhs = Mat4c::zeros();
                for cc in 0..4 {
                    for d in 0..4 {
                        let e = levi_civita(a, b, cc, d);
                        if e != 0.0 {
                            rhs += self.pi * self.sigma[cc][d] * c(e, 0.0);
                        }
                    }
                }
                dev = dev.max(max_abs(&(lhs - rhs)));
            }
        }
        dev
    }

    pub fn pi_square_deviation(&self) -> f64 {
        max_abs(&(self.pi * self.pi - Mat4c::identity()))
    }
}

fn block(tl: [[C64; 2]; 2], tr: [[C64; 2]; 2], bl: [[C64; 2]; 2], br: [[C64; 2]; 2]) -> Mat4c {
    let mut m = Mat4c::zeros();
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = tl[i][j];
            m[(i, j + 2)] = tr[i][j];
            m[(i + 2, j)] = bl[i][j];
            m[(i + 2, j + 2)] = br[i][j];
        }
    }
    m
}

fn neg2(m: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    [[-m[0][0], -m[0][1]], [-m[1][0], -m[1][1]]]
}

/// Builds the fixed chiral basis:
/// `gamma^0 = [[0, I], [I, 0]]`, `gamma^k = [[0, sigma_k], [-sigma_k, 0]]`,
/// `pi = diag(-I, I)`.
pub fn build_gamma_basis() -> GammaBasis {
    let zero = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let z2 = [[zero, zero], [zero, zero]];
    let id2 = [[one, zero], [zero, one]];
    let pauli = [
        [[zero, one], [one, zero]],
        [[zero, c(0.0, -1.0)], [c(0.0, 1.0), zero]],
        [[one, zero], [zero, -one]],
    ];
    let gamma = [
        block(z2, id2, id2, z2),
        block(z2, pauli[0], neg2(pauli[0]), z2),
        block(z2, pauli[1], neg2(pauli[1]), z2),
        block(z2, pauli[2], neg2(pauli[2]), z2),
    ];
    let pi = block(neg2(id2), z2, z2, id2);
    let mut sigma = [[Mat4c::zeros(); 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            sigma[a][b] = (gamma[a] * gamma[b] - gamma[b] * gamma[a]) * c(0.25, 0.0);
        }
    }
    GammaBasis { gamma, pi, sigma }
}

/// Shared instance of the chiral basis.
pub fn basis() -> &'static GammaBasis {
    static BASIS: OnceLock<GammaBasis> = OnceLock::new();
    BASIS.get_or_init(build_gamma_basis)
}

/// Max entry of `gamma_i gamma_j gamma_k - (gamma_i eta_jk - gamma_j eta_ik
/// + gamma_k eta_ij + i eps_ijkq pi gamma^q)`.
pub fn triple_product_check(i: usize, j: usize, k: usize) -> f64 {
    let g = basis();
    let eta = |a: usize, b: usize| if a == b { METRIC[a] } else { 0.0 };
    let lhs = g.gamma_lower(i) * g.gamma_lower(j) * g.gamma_lower(k);
    let mut rhs = g.gamma_lower(i) * c(eta(j, k), 0.0) - g.gamma_lower(j) * c(eta(i, k), 0.0)
        + g.gamma_lower(k) * c(eta(i, j), 0.0);
    for q in 0..4 {
        let e = levi_civita(i, j, k, q);
        if e != 0.0 {
            rhs += g.pi() * g.gamma(q) * c(0.0, e);
        }
    }
    max_abs(&(lhs - rhs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor(pub Vec4c);

impl Spinor {
    pub fn new(components: [C64; 4]) -> Result<Self, CliffordError> {
        if components.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CliffordError::NonFinite);
        }
        Ok(Spinor(Vec4c::from(components)))
    }

    pub fn zero() -> Self {
        Spinor(Vec4c::zeros())
    }

    /// The rest-frame, spin-up seed `(1, 0, 1, 0)`.
    pub fn seed() -> Self {
        Spinor(Vec4c::new(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)))
    }

    pub fn components(&self) -> &Vec4c {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Dirac adjoint `psi^dagger gamma^0` as a row.
    pub fn adjoint(&self) -> nalgebra::RowVector4<C64> {
        self.0.adjoint() * basis().gamma(0)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Spinor(self.0 * factor)
    }

    pub fn transformed(&self, m: &Mat4c) -> Self {
        Spinor(m * self.0)
    }
}

/// `phi exp(-i beta pi / 2) (1, 0, 1, 0)`, i.e. `(phi e^{i beta/2}, 0, phi e^{-i beta/2}, 0)`.
pub fn polar_spinor(phi: f64, beta: f64) -> Result<Spinor, CliffordError> {
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(CliffordError::NonPositiveModule(phi));
    }
    if !beta.is_finite() {
        return Err(CliffordError::NonFinite);
    }
    let half = 0.5 * beta;
    Spinor::new([
        C64::from_polar(phi, half),
        c(0.0, 0.0),
        C64::from_polar(phi, -half),
        c(0.0, 0.0),
    ])
}

/// The sixteen real bilinears, all with upper frame indices.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BilinearSet {
    pub phi: f64,
    pub theta: f64,
    pub u: [f64; 4],
    pub s: [f64; 4],
    pub m: [[f64; 4]; 4],
    pub sigma: [[f64; 4]; 4],
}

impl BilinearSet {
    pub fn scalar_norm_sqr(&self) -> f64 {
        self.theta * self.theta + self.phi * self.phi
    }

    /// Polar angle recovered from `tan beta = Theta / Phi`.
    pub fn beta(&self) -> f64 {
        self.theta.atan2(self.phi)
    }

    pub fn u_lower(&self) -> [f64; 4] {
        lower(&self.u)
    }

    pub fn s_lower(&self) -> [f64; 4] {
        lower(&self.s)
    }

    pub fn m_lower(&self) -> [[f64; 4]; 4] {
        lower_pair(&self.m)
    }

    pub fn sigma_lower(&self) -> [[f64; 4]; 4] {
        lower_pair(&self.sigma)
    }
}

fn lower_pair(t: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            out[a][b] = METRIC[a] * METRIC[b] * t[a][b];
        }
    }
    out
}

fn real_part(name: &'static str, z: C64, scale: f64) -> Result<f64, CliffordError> {
    if z.im.abs() > IMAGINARY_TOLERANCE * scale.max(1.0) {
        return Err(CliffordError::ComplexBilinear { name, imag: z.im });
    }
    Ok(z.re)
}

pub fn bilinears(psi: &Spinor) -> Result<BilinearSet, CliffordError> {
    let g = basis();
    let bar = psi.adjoint();
    let scale = psi.norm_sqr();
    let sandwich = |m: &Mat4c| -> C64 { (bar * m * psi.0)[(0, 0)] };

    let mut out = BilinearSet {
        phi: real_part("Phi", (bar * psi.0)[(0, 0)], scale)?,
        theta: real_part("Theta", sandwich(g.pi()) * c(0.0, 1.0), scale)?,
        ..Default::default()
    };
    for a in 0..4 {
        out.u[a] = real_part("U", sandwich(g.gamma(a)), scale)?;
        out.s[a] = real_part("S", sandwich(&(g.gamma(a) * g.pi())), scale)?;
        for b in (a + 1)..4 {
            let m = real_part("M", sandwich(g.sigma(a, b)) * c(0.0, 2.0), scale)?;
            let sg = real_part("Sigma", sandwich(&(g.sigma(a, b) * g.pi())) * c(2.0, 0.0), scale)?;
            out.m[a][b] = m;
            out.m[b][a] = -m;
            out.sigma[a][b] = sg;
            out.sigma[b][a] = -sg;
        }
    }
    Ok(out)
}

/// Relative deviations of the Fierz identities. Linear identities are scaled by
/// `|psi|^2`, quadratic ones by `|psi|^4`, the polar auxiliaries by `|psi|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FierzReport {
    pub completeness: f64,
    pub a1: f64,
    pub a2: f64,
    pub norm: f64,
    pub orthogonal: f64,
    /// `None` for a singular spinor (`Theta = Phi = 0`).
    pub aux1: Option<f64>,
    pub aux2: Option<f64>,
}

impl FierzReport {
    pub fn max_deviation(&self) -> f64 {
        [
            self.completeness,
            self.a1,
            self.a2,
            self.norm,
            self.orthogonal,
            self.aux1.unwrap_or(0.0),
            self.aux2.unwrap_or(0.0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn singular(&self) -> bool {
        self.aux1.is_none()
    }
}

pub fn check_fierz(psi: &Spinor) -> Result<FierzReport, CliffordError> {
    let g = basis();
    let b = bilinears(psi)?;
    let n2 = psi.norm_sqr();
    if n2 == 0.0 {
        return Ok(FierzReport {
            completeness: 0.0,
            a1: 0.0,
            a2: 0.0,
            norm: 0.0,
            orthogonal: 0.0,
            aux1: None,
            aux2: None,
        });
    }
    let n4 = n2 * n2;
    let ul = b.u_lower();
    let sl = b.s_lower();
    let ml = b.m_lower();
    let sgl = b.sigma_lower();

    let outer = psi.0 * psi.adjoint();
    let mut rhs = Mat4c::identity() * c(0.25 * b.phi, 0.0) - g.pi() * c(0.0, 0.25 * b.theta);
    for a in 0..4 {
        rhs += g.gamma(a) * c(0.25 * ul[a], 0.0);
        rhs -= g.gamma(a) * g.pi() * c(0.25 * sl[a], 0.0);
        for bb in 0..4 {
            rhs += g.sigma(a, bb) * c(0.0, ml[a][bb] / 8.0);
            rhs -= g.sigma(a, bb) * g.pi() * c(sgl[a][bb] / 8.0, 0.0);
        }
    }
    let completeness = max_abs(&(outer - rhs)) / n2;

    let mut a1: f64 = 0.0;
    let mut a2: f64 = 0.0;
    for a in 0..4 {
        for bb in 0..4 {
            let mut eps_us = 0.0;
            for j in 0..4 {
                for k in 0..4 {
                    eps_us += b.u[j] * b.s[k] * levi_civita(j, k, a, bb);
                }
            }
            a1 = a1.max((ml[a][bb] * b.phi - sgl[a][bb] * b.theta - eps_us).abs());
            a2 = a2.max(
                (ml[a][bb] * b.theta + sgl[a][bb] * b.phi - (ul[a] * sl[bb] - ul[bb] * sl[a])).abs(),
            );
        }
    }
    let scalar2 = b.scalar_norm_sqr();
    let uu = minkowski_dot(&b.u, &b.u);
    let ss = minkowski_dot(&b.s, &b.s);
    let norm = (uu - scalar2).abs().max((ss + scalar2).abs()) / n4;
    let orthogonal = minkowski_dot(&b.u, &b.s).abs() / n4;

    let (aux1, aux2) = if scalar2 > 1e-28 * n4 {
        let n = scalar2.sqrt();
        let u: Vec<f64> = ul.iter().map(|x| x / n).collect();
        let s: Vec<f64> = sl.iter().map(|x| x / n).collect();
        let (sin_b, cos_b) = (b.theta / n, b.phi / n);
        let mut us_sigma = Mat4c::zeros();
        let mut slash_s = Mat4c::zeros();
        for a in 0..4 {
            slash_s += g.gamma(a) * c(s[a], 0.0);
            for bb in 0..4 {
                us_sigma += g.sigma(a, bb) * c(2.0 * u[a] * s[bb], 0.0);
            }
        }
        let r1 = us_sigma * g.pi() * psi.0 + psi.0;
        let r2 = slash_s * psi.0 * c(0.0, sin_b) + slash_s * g.pi() * psi.0 * c(cos_b, 0.0) + psi.0;
        let len = n2.sqrt();
        (Some(r1.norm() / len), Some(r2.norm() / len))
    } else {
        (None, None)
    };

    Ok(FierzReport {
        completeness,
        a1: a1 / n4,
        a2: a2 / n4,
        norm,
        orthogonal,
        aux1,
        aux2,
    })
}

/// Antisymmetric bilinears of a polar spinor rebuilt from `(phi^2, beta, u, s)`:
/// returns `(Sigma^ab, M^ab)` with upper indices.
pub fn polar_tensor_bilinears(
    phi2: f64,
    beta: f64,
    u: &[f64; 4],
    s: &[f64; 4],
) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let ul = lower(u);
    let sl = lower(s);
    let (sb, cb) = beta.sin_cos();
    let mut sigma = [[0.0; 4]; 4];
    let mut m = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let wedge = u[a] * s[b] - u[b] * s[a];
            let mut dual = 0.0;
            for j in 0..4 {
                for k in 0..4 {
                    dual += ul[j] * sl[k] * levi_civita_upper(j, k, a, b);
                }
            }
            sigma[a][b] = 2.0 * phi2 * (cb * wedge - sb * dual);
            m[a][b] = 2.0 * phi2 * (cb * dual + sb * wedge);
        }
    }
    (sigma, m)
}
