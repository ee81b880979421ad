//! Compact, watertight, polygonal building models from raw point clouds.
//!
//! The pipeline assembles detected planar primitives into an adaptive convex
//! cell complex, estimates per-cell occupancy from a pluggable signed-distance
//! provider, labels the cells interior/exterior with an exact graph-cut MRF
//! solve, and extracts the outer shell of the interior union — which is closed
//! by construction. A virtual LiDAR scanner and an evaluation harness round
//! out the toolkit.
//!
//! Modules follow the pipeline stages:
//!
//! - [`geom`]: floating-point geometry kernel (planes, convex cells, meshes, I/O)
//! - [`cloud`]: point clouds and their file formats
//! - [`primitives`]: RANSAC plane detection and iterative plane refinement
//! - [`complex`]: adaptive / exhaustive binary space partitioning with adjacency
//! - [`occupancy`]: signed-distance providers and per-cell occupancy
//! - [`extract`]: MRF construction, exact min-cut labeling, shell extraction
//! - [`simscan`]: virtual scanner, noise schedules, SDF-annotated query sets
//! - [`synth`]: procedural test shapes (cube, L-shape, building-like unions)
//! - [`bench`]: metrics, pipeline orchestration, partitioning benchmarks

pub mod bench;
pub mod cloud;
pub mod complex;
pub mod error;
pub mod extract;
pub mod geom;
pub mod occupancy;
pub mod primitives;
pub mod simscan;
pub mod synth;

pub use error::{Error, Result};
