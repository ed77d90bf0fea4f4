//! Finite-difference solver for a thermoelastic-diffusion plate in bending,
//! with exact discrete energy bookkeeping, spatial-decay measures and
//! backward-in-time diagnostics.

pub mod backward;
pub mod banded;
pub mod config;
pub mod decay;
pub mod dynamics;
pub mod experiments;
pub mod grid;
pub mod material;
pub mod resultants;
pub mod sparse;
pub mod state;

pub use grid::{Field, Grid, GridError};
pub use material::{MaterialError, MaterialParams, ModelType};
pub use state::{InitialCondition, State, StateField};
