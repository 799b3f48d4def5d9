//! Particle approximation of quasi-stationary distributions.
//!
//! An absorbed diffusion conditioned on survival settles, for large times,
//! into its quasi-stationary distribution (the Yaglom limit). This crate
//! approximates that law with a Fleming-Viot system of `N` interacting
//! particles: each particle diffuses independently inside a bounded cut-off
//! domain and, on hitting the boundary, jumps to the position of a uniformly
//! chosen other particle. The long-run empirical measure of the system
//! converges to the quasi-stationary distribution as `N` and the cut-off
//! grow.
//!
//! The crate is organised around that pipeline:
//!
//! * [`geometry`] — cut-off domains and boundary distances;
//! * [`models`] — drift fields of the supported diffusions and the changes
//!   of variables linking them to their original coordinates;
//! * [`engine`] — the particle simulator itself;
//! * [`oracle`] — an independent spectral solver for 1D cases, used to
//!   validate the particle results;
//! * [`coupling`] — a pathwise domination check for boundary behavior;
//! * [`stats`] — empirical measures and the distances used to compare them.

pub mod coupling;
pub mod engine;
pub mod geometry;
pub mod models;
pub mod oracle;
pub mod stats;

pub use geometry::{CutoffFamily, DomainGeometry, Point};
pub use models::{ChangeOfVariables, DriftModel, DriftSource, LvParams};
