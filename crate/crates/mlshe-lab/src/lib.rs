//! Configuration-driven runner for the verification suites: executes the
//! calibration protocol and the smooth / bridge / lattice / polymer
//! checks, persists results, and summarizes coverage per claim.

pub mod config;
pub mod report;
pub mod rows;
pub mod suites;
