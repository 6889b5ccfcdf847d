//! Spectral solver and continuation engine for steady periodic water waves
//! over constant vorticity.
//!
//! The unknown is the trace of the holomorphic perturbation on the surface
//! of the conformal strip ([`spectral::HoloTrace`]). [`model`] evaluates the
//! surface operator and its derivatives, [`solver`] computes and continues
//! solution branches, [`geometry`] classifies the physical profiles and
//! [`critlayer`] analyses critical layers near vertical tangents.

pub mod critlayer;
pub mod error;
pub mod geometry;
pub mod model;
pub mod numeric;
pub mod solver;
pub mod spectral;

pub use error::{Result, WaveError};
pub use geometry::{GeometryTolerances, WaveClass};
pub use model::{GeneralParams, ModelParams, Params};
pub use solver::{Branch, Solution, SolverOptions};
pub use spectral::{Depth, HoloTrace, SampleGrid};
