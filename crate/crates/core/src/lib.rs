//! Coupled polymeric-fluid solver.
//!
//! An incompressible fluid whose viscosity depends on the shear rate and on
//! the mean chain length of a dissolved polymer population; the chain-length
//! distribution `psi(t, x, r)` grows by polymerization, fragments, and is
//! carried by the flow, exchanging mass with free monomers `phi(t, x)`.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod cli;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod fragmentation;
pub mod grid;
pub mod initial;
pub mod io;
pub mod model;
pub mod phi_solver;
pub mod psi_solver;
pub mod transport;
pub mod zero_dim;

pub use coupling::{run, RunConfig, RunSummary, SimState, Simulation, SplittingOrder};
pub use error::{Error, Result};
