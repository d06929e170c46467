//! Desk-scale autonomous 3D scanning workbench.
//!
//! A simulated depth camera scans a triangle mesh, observations fuse into a
//! probabilistic occupancy grid, a diffusion policy proposes camera-pose
//! horizons, and a path optimizer filters them for safety and compactness.
//! Coverage and path length are measured against non-learned baselines.

pub mod baselines;
pub mod checkpoint;
pub mod cloud;
pub mod dataset;
pub mod diffusion;
pub mod encoder;
pub mod error;
pub mod expert;
pub mod geom;
pub mod grid;
pub mod harness;
pub mod mesh;
pub mod nn;
pub mod optimizer;
pub mod render;
pub mod sample;
pub mod train;

pub use error::{Error, Result};
