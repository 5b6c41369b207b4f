//! Layer solutions of Allen-Cahn equations driven by mixtures of fractional
//! Laplacians: operators, energies, constrained solvers, Poisson-kernel
//! extensions and one-dimensional symmetry diagnostics.

pub mod cli;
pub mod config;
pub mod constants;
pub mod energy;
pub mod error;
pub mod extension;
pub mod grid;
pub mod measure;
pub mod operator;
pub mod potential;
pub mod reduce;
pub mod solver;
pub mod special;
pub mod symmetry;

pub use error::{Error, Result};
