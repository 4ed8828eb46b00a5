//! Helpers shared by the integration tests.
#![allow(dead_code)]

use polar_dirac::radial::{
    riccati_oracle, solve, Anchor, InitialData, OdeOptions, Potential, RadialProblem, SolveOptions,
    TabulatedPotential,
};

pub const ROUTE_TOLERANCE: f64 = 1e-6;

/// Max relative difference in `Z`, skipping radii within `guard * r` of a pole
/// or zero flagged by either route.
pub fn route_deviation(problem: &RadialProblem, grid: &[f64], initial: InitialData) -> (f64, usize) {
    let opts = SolveOptions {
        rtol: 1e-12,
        atol: 1e-14,
        initial,
        ..Default::default()
    };
    let lin = solve(problem, grid, &opts).unwrap();
    let n = grid.len();
    // start the Riccati route where the linear data was anchored
    let (anchor, i0) = match initial {
        InitialData::Frobenius | InitialData::Explicit { anchor: Anchor::Inner, .. } => (Anchor::Inner, 0),
        _ if problem.energy.abs() < problem.mass => (Anchor::Outer, n - 1),
        _ => (Anchor::Inner, 0),
    };
    let ode = OdeOptions {
        rtol: 1e-12,
        atol: 1e-14,
        ..Default::default()
    };
    let ric = riccati_oracle(problem, grid, anchor, lin.riccati_z[i0], &ode).unwrap();
    let flagged: Vec<f64> = lin
        .poles
        .iter()
        .chain(&lin.zeros)
        .chain(&ric.poles)
        .chain(&ric.zeros)
        .copied()
        .collect();
    let guard = 0.02;
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for i in 0..n {
        let r = grid[i];
        if flagged.iter().any(|&p| (p - r).abs() < guard * r) {
            skipped += 1;
            continue;
        }
        let (a, b) = (lin.riccati_z[i], ric.riccati_z[i]);
        worst = worst.max((a - b).abs() / b.abs());
    }
    (worst, skipped)
}

pub fn tabulated() -> Potential {
    let r: Vec<f64> = (0..600).map(|i| 0.3 * (100f64).powf(i as f64 / 599.0)).collect();
    let v = r.iter().map(|&x| 0.6 / x + 0.05 / (x * x) - 0.02 * (-x).exp()).collect();
    Potential::Tabulated(TabulatedPotential::from_points(r, v).unwrap())
}
