//! Spectral laboratory for the fractional Choquard equation
//! `(-Δ)^s u + u = (K_α * |u|^p) |u|^{p-2} u` on `R^N`.
//!
//! Groundstates and Coxeter-symmetric saddle solutions are computed by a
//! Nehari-projected, symmetrised gradient flow on a periodic box, then
//! checked against their qualitative properties: nodal domain counts, energy
//! inequalities, polynomial decay and the s-harmonic extension identities.

pub mod analysis;
pub mod coxeter;
pub mod energy;
pub mod error;
pub mod extension;
pub mod fft;
pub mod grid;
pub mod io;
pub mod params;
pub mod solver;
pub mod spectral;
pub mod symmetry;

pub use coxeter::{Chamber, CoxeterGroup, GeneratorSpec, GroupElement};
pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use params::{Constants, ModelParams};
pub use spectral::{RieszKernel, Spectral};
pub use energy::{EnergyBreakdown, Functional};
pub use symmetry::SymmetryPlan;
pub use solver::{Solution, Solver, SolverConfig};
pub use extension::{ExtensionField, YGrid};
pub use io::RunConfig;
