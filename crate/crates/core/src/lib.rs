//! Simulation and analysis toolkit for Franson-type two-photon interference.
//!
//! The crate is organised bottom-up:
//!
//! * [`bell`]: closed-form quantum predictions, the target joint table, chained
//!   Bell functionals and their local bounds.
//! * [`geometry`]: deterministic local hidden-variable region models on the
//!   `(x, r)` chart, their joint tables by quadrature, and validation.
//! * [`synth`]: construction of a region-model pair that meets the target
//!   table, by simplex refinement of a seeded layout.
//! * [`sim`]: event-level simulation of the full experiment with integer time
//!   ticks and per-station switching schedules.
//! * [`analysis`]: pairing of time tags, the two selection rules, correlation
//!   estimates and Bell reports.

pub mod analysis;
pub mod bell;
pub mod error;
pub mod geometry;
pub mod kv;
pub mod rng;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
