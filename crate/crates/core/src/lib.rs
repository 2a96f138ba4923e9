//! Commutator-free Cayley integrators for linear ODEs `Y' = A(t) Y` on
//! quadratic matrix Lie groups, with exponential and Runge–Kutta references
//! and two test problems.

pub mod cli;
pub mod integrators;
pub mod lie;
pub mod matrix;
pub mod models;
pub mod quadrature;
