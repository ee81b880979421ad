//! Signed-distance providers and per-cell occupancy.
//!
//! Sign convention: positive inside, negative outside. Occupancy of a cell
//! is `sigmoid(beta * sdf(centroid) * volume / mean_volume)` — raw
//! sdf*volume is dimensionally tiny in the unit box, so the volume factor is
//! normalized by the mean cell volume and scaled by the exposed gain `beta`.
//! Acceptance of a labeling depends only on the order and monotonicity of
//! these values, never on their absolute scale.

mod mesh_sdf;
mod sampled;

pub use mesh_sdf::MeshSdfOracle;
pub use sampled::SampledSdfField;

use rayon::prelude::*;

use crate::complex::CellComplex;
use crate::error::{Error, Result};
use crate::geom::Point3;

/// Default occupancy gain: an average-volume cell with |sdf| = 0.1 maps to
/// about 0.98.
pub const DEFAULT_BETA: f64 = 40.0;

/// Behavioral contract for signed-distance sources. Implementations must be
/// safe for concurrent read-only queries.
pub trait SdfProvider: Send + Sync {
    /// Signed distance at `p`: positive inside, negative outside.
    fn sdf(&self, p: &Point3) -> Result<f64>;
}

/// Per-cell occupancy with its raw centroid signed distance.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CellOccupancy {
    pub occupancy: f64,
    pub sdf: f64,
}

/// Occupancies for every cell of a complex, with the scale they were
/// computed under.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CellOccupancies {
    pub cells: Vec<CellOccupancy>,
    pub beta: f64,
    pub mean_volume: f64,
}

impl CellOccupancies {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.occupancy)
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Occupancy of one cell given its centroid sdf and volume, against the
/// complex's mean cell volume. Kept in the open interval (0, 1).
pub fn occupancy_value(sdf: f64, volume: f64, mean_volume: f64, beta: f64) -> f64 {
    sigmoid(beta * sdf * volume / mean_volume).clamp(1e-15, 1.0 - 1e-15)
}

/// Query the provider at every cell centroid (sparse query: one point per
/// cell) and convert to occupancies. Cells evaluate in parallel; output is
/// ordered by cell index.
pub fn cell_occupancy(
    complex: &CellComplex,
    provider: &dyn SdfProvider,
    beta: f64,
) -> Result<CellOccupancies> {
    if beta <= 0.0 {
        return Err(Error::Config("occupancy gain beta must be positive".into()));
    }
    if complex.is_empty() {
        return Err(Error::Occupancy {
            cell: 0,
            reason: "empty complex".into(),
        });
    }
    let mean_volume = complex.total_volume() / complex.len() as f64;
    let cells: Result<Vec<CellOccupancy>> = complex
        .cells()
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let sdf = provider.sdf(&cell.centroid()).map_err(|e| Error::Occupancy {
                cell: i,
                reason: e.to_string(),
            })?;
            Ok(CellOccupancy {
                occupancy: occupancy_value(sdf, cell.volume(), mean_volume, beta),
                sdf,
            })
        })
        .collect();
    Ok(CellOccupancies {
        cells: cells?,
        beta,
        mean_volume,
    })
}
