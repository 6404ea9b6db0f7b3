//! Numerical laboratory for the multi-layer extension of the stochastic heat
//! equation.
//!
//! The layered partition functions are computed by three independent routes
//! and cross-checked against each other and against closed forms:
//!
//! * [`pdesolve`] — a Crank–Nicolson solver for the heat equation with a
//!   smooth potential, feeding Wronskian determinants ([`detcalc`]) that
//!   build the layer hierarchy.
//! * [`bridgesim`] — Feynman–Kac Monte Carlo over (non-intersecting)
//!   Brownian bridges.
//! * [`shelattice`] — a white-noise lattice discretization with shared-noise
//!   multi-start solves and Karlin–McGregor determinants.
//!
//! [`kernels`] holds the closed-form reference quantities (heat kernel,
//! killed Karlin–McGregor density, normalization constants) used to
//! calibrate every determinant identity, and [`polymer`] the semi-discrete
//! multilayer polymer that motivates the construction.

pub mod bridgesim;
pub mod detcalc;
pub mod error;
pub mod exec;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod pdesolve;
pub mod polymer;
pub mod potential;
pub mod rngstream;
pub mod shelattice;

pub use error::{Error, Result};
