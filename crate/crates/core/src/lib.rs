//! Collective dynamics of dipole-blockaded ensembles of three-level atoms.
//!
//! The state space is the permutation-symmetric subspace with at most one
//! Rydberg excitation, of dimension `2N + 1`. On top of the chain Hamiltonian
//! the crate provides an adaptive propagator, the closed-form adiabatic model,
//! the composite W / GHZ protocols, and parameter sweeps.

pub mod cli;
pub mod config;
pub mod error;
pub mod hamiltonian;
pub mod integrator;
pub mod propagator;
pub mod protocols;
pub mod pulses;
pub mod quad;
pub mod sweeps;
pub mod symbasis;

pub use error::{Error, Result};
