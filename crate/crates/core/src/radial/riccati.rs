//! Direct integration of the Riccati equation, independent of the linear
//! route. The solution is carried in two charts, `Z` and `W = 1/Z`, switching
//! whenever the active variable leaves `[-1, 1]`, so poles of `Z` are crossed
//! as ordinary zeros of `W`.

use std::cell::Cell;

use serde::Serialize;

use super::ode::{cash_karp, OdeOptions, StepAction};
use super::{Anchor, RadialError, RadialProblem};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiTrace {
    pub r: Vec<f64>,
    /// `Z` on the grid; infinite exactly at a pole.
    pub riccati_z: Vec<f64>,
    pub poles: Vec<f64>,
    pub zeros: Vec<f64>,
}

pub fn riccati_oracle(
    problem: &RadialProblem,
    grid: &[f64],
    anchor: Anchor,
    z0: f64,
    opts: &OdeOptions,
) -> Result<RiccatiTrace, RadialError> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] <= 0.0 {
        return Err(RadialError::InvalidGrid("ascending positive radii required".into()));
    }
    if !z0.is_finite() {
        return Err(RadialError::InvalidInput("initial Z must be finite".into()));
    }
    problem.potential.check_range(grid[0], *grid.last().unwrap())?;

    let inverted = Cell::new(false);
    let rhs = |r: f64, y: &[f64; 1]| -> [f64; 1] {
        let ev = problem.energy + problem.potential.value(r);
        let (a, c) = (ev + problem.mass, ev - problem.mass);
        let v = y[0];
        if inverted.get() {
            [-a + 2.0 * v / r - c * v * v]
        } else {
            [a * v * v - 2.0 * v / r + c]
        }
    };

    let mut poles = Vec::new();
    let mut zeros = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    let hook = |r: f64, y: &mut [f64; 1]| -> StepAction {
        if let Some((r0, v0)) = prev {
            if v0 * y[0] < 0.0 {
                let rc = r0 - v0 * (r - r0) / (y[0] - v0);
                if inverted.get() {
                    poles.push(rc);
                } else {
                    zeros.push(rc);
                }
            }
        }
        let mut action = StepAction::Continue;
        if y[0].abs() > 1.0 {
            y[0] = 1.0 / y[0];
            inverted.set(!inverted.get());
            action = StepAction::Modified;
        }
        prev = Some((r, y[0]));
        action
    };

    let mut charts = Vec::with_capacity(grid.len());
    let (start, order): (f64, Vec<f64>) = match anchor {
        Anchor::Inner => (grid[0], grid.to_vec()),
        Anchor::Outer => (*grid.last().unwrap(), grid.iter().rev().copied().collect()),
    };
    let (y_init, inv_init) = if z0.abs() > 1.0 { (1.0 / z0, true) } else { (z0, false) };
    inverted.set(inv_init);

    // Integrate output point by output point so the chart in force at each
    // point is known.
    let mut hook = hook;
    let mut t = start;
    let mut y = [y_init];
    let mut values = Vec::with_capacity(order.len());
    for &target in &order {
        if target != t {
            let out = cash_karp(rhs, &mut hook, t, y, &[target], opts)?;
            y = out[0];
            t = target;
        }
        charts.push(inverted.get());
        values.push(y[0]);
    }
    let mut riccati_z: Vec<f64> = values
        .iter()
        .zip(&charts)
        .map(|(&v, &inv)| if inv { 1.0 / v } else { v })
        .collect();
    if anchor == Anchor::Outer {
        riccati_z.reverse();
    }
    poles.sort_by(f64::total_cmp);
    zeros.sort_by(f64::total_cmp);
    Ok(RiccatiTrace {
        r: grid.to_vec(),
        riccati_z,
        poles,
        zeros,
    })
}
