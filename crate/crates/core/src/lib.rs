//! Polar-form Dirac equation under Coulomb-like radial potentials: radial
//! Riccati/linear solver, trial-solution reconstruction and numerical
//! certification of the resulting spinor.

pub mod cli;
pub mod clifford;
pub mod geometry;
pub mod polar_trial;
pub mod radial;
pub mod verify;
