//! Hessian-free force-gradient splitting integrators.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: phase points, mass metrics and the exact drift/kick flows;
//! * [`scheme`] and [`catalog`]: palindromic stage sequences and the tabulated
//!   coefficient sets;
//! * [`error_coeffs`]: leading error multipliers, error norms, efficiency;
//! * [`engine`] and [`verify`]: stepping in Hessian-free or exact mode plus the
//!   geometric and convergence checks;
//! * [`models`]: harmonic/quartic toys, the outer solar system and the 2D
//!   Schwinger model;
//! * [`hmc`] and [`stats`]: Hybrid Monte Carlo and its acceptance statistics.

pub mod catalog;
pub mod engine;
pub mod error;
pub mod error_coeffs;
pub mod geometry;
pub mod hmc;
pub mod model;
pub mod models;
pub mod scheme;
pub mod stats;
pub mod verify;

pub use catalog::{catalog, catalog_checksum, lookup};
pub use engine::{integrate, step, EvalCounter, StepMode, Stepper};
pub use error::{Error, Result};
pub use geometry::{MassMetric, PhasePoint};
pub use model::Model;
pub use scheme::{build_scheme, count_forces, triple_jump, Scheme, Stage, Version};
