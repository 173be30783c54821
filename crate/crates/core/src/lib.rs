//! Simulation and inverse-scattering toolkit for the nonlinear magnetic Schrödinger equation
//! `i u_t + (grad + iA)^2 u + V u = |u|^{p-1} u` on periodic boxes in one and two dimensions.

pub mod amplitude;
pub mod comoving;
pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod picard;
pub mod potential;
pub mod probe;
pub mod propagate;
pub mod runner;
pub mod scattering;
pub mod stats;
pub mod tomography;

pub use error::{Error, Result};
pub use grid::{make_grid, Grid, GridShape, SigmaParams, Wavefunction};
pub use potential::{build_potentials, Bump, Component, LineTarget, PotentialDescriptor, PotentialSet};
