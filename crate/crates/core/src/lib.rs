//! Trotter-type simulation of the infinite-rate mutually catalytic branching
//! process, together with a statistical harness that checks the closed-form
//! identities satisfied by the scheme.
//!
//! The process lives on a finite site set. Between grid times `nε` the two
//! mass fields follow the linear migration flow `S_t = exp(tA)`; at every grid
//! time each site is independently replaced by a draw from the harmonic
//! measure of planar Brownian motion exiting the open quadrant.
//!
//! Modules:
//! - [`migration`]: migration matrix, weights, weighted norms and the flow.
//! - [`quadrant`]: harmonic measure of the quadrant, lozenge product.
//! - [`lattice`]: configurations, test functions and the `H` functional.
//! - [`trotter`]: the interlaced flow/resample dynamics.
//! - [`verify`]: Monte Carlo accumulators and statistical identity tests.
//! - [`cli`]: experiment documents and the batch front end.

pub mod cli;
pub mod error;
pub mod lattice;
pub mod migration;
pub mod quadrant;
pub mod rng;
pub mod trotter;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{Configuration, SiteValue, TestFunction};
pub use migration::{FlowOperator, MatrixSpec, MigrationMatrix, Topology, WeightVector};
pub use quadrant::{Axis, BoundaryPoint, LozengeValue, QuadrantPoint};
pub use rng::StreamFactory;
pub use trotter::{PathRecord, Simulator, TrotterParams};
