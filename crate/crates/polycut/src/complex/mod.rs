//! Convex cell complexes from ordered plane insertions.
//!
//! A BSP tree over the padded scene bounds is refined one primitive at a
//! time; leaf cells tile the bounds throughout. Adjacency (shared faces with
//! areas) is maintained locally at each split rather than recovered after the
//! fact. Adaptive mode only splits cells whose box overlaps the primitive's
//! padded inlier box; exhaustive mode splits every straddling leaf.

mod build;

pub use build::{build_complex, build_complex_with_plan, insert_plan_entries, ComplexBuilder};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, ConvexCell, Plane, Polygon, Side, WallId, AREA_EPS, ON_EPS};
use crate::primitives::PlanarSegment;

/// Partitioning strategy knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PartitionStrategy {
    pub mode: PartitionMode,
    /// Scene bounds padding as a fraction of each axis extent.
    pub aabb_padding: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionMode {
    Adaptive,
    Exhaustive,
}

impl Default for PartitionStrategy {
    fn default() -> Self {
        PartitionStrategy {
            mode: PartitionMode::Adaptive,
            aabb_padding: 0.05,
        }
    }
}

impl PartitionStrategy {
    pub fn validate(&self) -> Result<()> {
        if self.aabb_padding < 0.0 {
            return Err(Error::Config("aabb_padding must be >= 0".into()));
        }
        Ok(())
    }
}

/// What a split plane came from: a detected segment or a bounds wall added
/// as a virtual primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentRef {
    Detected(usize),
    Wall(WallId),
}

/// One insertion-order entry with its priority record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanEntry {
    pub segment: SegmentRef,
    pub verticality: f64,
    pub support: usize,
}

/// The ordered insertion schedule: wall-like planes (verticality above the
/// threshold) first, each class by descending support, ties by input index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InsertionPlan {
    pub entries: Vec<PlanEntry>,
}

pub const VERTICAL_THRESHOLD: f64 = 0.9;

/// Order segments for insertion.
pub fn plan_insertion(segments: &[PlanarSegment]) -> InsertionPlan {
    let mut entries: Vec<(usize, PlanEntry)> = segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (
                i,
                PlanEntry {
                    segment: SegmentRef::Detected(i),
                    verticality: s.verticality(),
                    support: s.support(),
                },
            )
        })
        .collect();
    entries.sort_by(|(ia, a), (ib, b)| {
        let va = a.verticality > VERTICAL_THRESHOLD;
        let vb = b.verticality > VERTICAL_THRESHOLD;
        vb.cmp(&va)
            .then(b.support.cmp(&a.support))
            .then(ia.cmp(ib))
    });
    InsertionPlan {
        entries: entries.into_iter().map(|(_, e)| e).collect(),
    }
}

/// Register the six bounds walls as virtual primitives. They are tangent to
/// the complex so they never split a cell, but they appear in the insertion
/// log and as named shell-face candidates for inputs with unobserved sides.
pub fn augment_bounds_faces(plan: &mut InsertionPlan) {
    for wall in WallId::ALL {
        plan.entries.push(PlanEntry {
            segment: SegmentRef::Wall(wall),
            verticality: match wall {
                WallId::ZMin | WallId::ZMax => 0.0,
                _ => 1.0,
            },
            support: 0,
        });
    }
}

/// One split event, for replay and debugging.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitEvent {
    pub segment: SegmentRef,
    pub parent: usize,
    pub pos_child: usize,
    pub neg_child: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BspNode {
    Leaf {
        cell: usize,
    },
    Split {
        plane: Plane,
        segment: SegmentRef,
        pos: usize,
        neg: usize,
    },
}

/// A shared facet between two leaf cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adjacency {
    pub a: usize,
    pub b: usize,
    /// Facet polygon, wound along its canonical plane normal.
    pub face: Polygon,
    pub area: f64,
    pub plane: Plane,
}

/// The finished complex: leaf cells tiling the bounds, their adjacency, the
/// BSP tree, and per-cell wall contact flags.
#[derive(Debug, Clone)]
pub struct CellComplex {
    pub bounds: Aabb,
    cells: Vec<ConvexCell>,
    adjacency: Vec<Adjacency>,
    /// Adjacency record indices touching each cell.
    neighbors: Vec<Vec<usize>>,
    /// Bitmask of [`WallId::bit`] per cell.
    boundary_flags: Vec<u8>,
    tree: Vec<BspNode>,
    insertion_log: Vec<SplitEvent>,
}

impl CellComplex {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[ConvexCell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &ConvexCell {
        &self.cells[i]
    }

    pub fn adjacency(&self) -> &[Adjacency] {
        &self.adjacency
    }

    /// Adjacency record indices incident to cell `i`.
    pub fn neighbors_of(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn boundary_flags(&self, i: usize) -> u8 {
        self.boundary_flags[i]
    }

    pub fn touches_wall(&self, i: usize, wall: WallId) -> bool {
        self.boundary_flags[i] & wall.bit() != 0
    }

    pub fn tree(&self) -> &[BspNode] {
        &self.tree
    }

    pub fn insertion_log(&self) -> &[SplitEvent] {
        &self.insertion_log
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume()).sum()
    }

    /// Tiling invariant: cell volumes sum to the bounds volume.
    pub fn check_tiling(&self, rel_tol: f64) -> Result<()> {
        let total = self.total_volume();
        let expected = self.bounds.volume();
        if (total - expected).abs() > rel_tol * expected {
            return Err(Error::Partition(format!(
                "tiling broken: cells sum to {total}, bounds volume {expected}"
            )));
        }
        Ok(())
    }

    /// Largest shared-face area (the MRF smoothness normalizer).
    pub fn max_face_area(&self) -> f64 {
        self.adjacency.iter().map(|a| a.area).fold(0.0, f64::max)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let dto = ComplexFile {
            bounds: self.bounds,
            cells: self
                .cells
                .iter()
                .map(|c| CellRecord {
                    halfspaces: c
                        .halfspaces()
                        .iter()
                        .map(|(p, s)| HalfspaceRecord {
                            normal: [p.normal().x, p.normal().y, p.normal().z],
                            offset: p.offset(),
                            side: *s,
                        })
                        .collect(),
                    volume: c.volume(),
                })
                .collect(),
            adjacency: self
                .adjacency
                .iter()
                .map(|a| AdjacencyRecord {
                    a: a.a,
                    b: a.b,
                    area: a.area,
                    ring: a
                        .face
                        .vertices
                        .iter()
                        .map(|p| [p.x, p.y, p.z])
                        .collect(),
                })
                .collect(),
            insertion_log: self.insertion_log.clone(),
        };
        let json = serde_json::to_string_pretty(&dto)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Rebuild a complex from its JSON dump by re-clipping each cell's
    /// halfspace list against the bounds.
    pub fn read_json(path: &Path) -> Result<CellComplex> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let dto: ComplexFile = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        let mut cells = Vec::with_capacity(dto.cells.len());
        for (i, rec) in dto.cells.iter().enumerate() {
            let halfspaces: Result<Vec<(Plane, Side)>> = rec
                .halfspaces
                .iter()
                .map(|h| {
                    Plane::new(
                        crate::geom::Vector3::new(h.normal[0], h.normal[1], h.normal[2]),
                        h.offset,
                    )
                    .map(|p| (p, h.side))
                })
                .collect();
            let cell = cell_from_halfspaces(&dto.bounds, &halfspaces?)
                .ok_or_else(|| Error::Partition(format!("cell {i} failed to reconstruct")))?;
            cells.push(cell);
        }
        let adjacency: Vec<Adjacency> = dto
            .adjacency
            .into_iter()
            .map(|r| {
                let face = Polygon::new(
                    r.ring
                        .iter()
                        .map(|c| crate::geom::Point3::new(c[0], c[1], c[2]))
                        .collect(),
                );
                let plane = face.plane().ok_or_else(|| {
                    Error::Partition(format!("degenerate adjacency ring {}-{}", r.a, r.b))
                })?;
                Ok(Adjacency {
                    a: r.a,
                    b: r.b,
                    area: r.area,
                    face,
                    plane,
                })
            })
            .collect::<Result<_>>()?;
        Ok(assemble(dto.bounds, cells, adjacency, Vec::new(), dto.insertion_log))
    }
}

/// Intersect the bounds box with a halfspace list (replay path).
pub(crate) fn cell_from_halfspaces(
    bounds: &Aabb,
    halfspaces: &[(Plane, Side)],
) -> Option<ConvexCell> {
    let mut cell = ConvexCell::from_aabb(bounds);
    for (plane, side) in halfspaces {
        cell = match cell.clip(plane) {
            crate::geom::SplitResult::Both { pos, neg, .. } => match side {
                Side::Positive => pos,
                _ => neg,
            },
            crate::geom::SplitResult::AllPositive => {
                if *side == Side::Positive {
                    cell
                } else {
                    return None;
                }
            }
            crate::geom::SplitResult::AllNegative => {
                if *side == Side::Negative {
                    cell
                } else {
                    return None;
                }
            }
        };
    }
    Some(cell)
}

/// Assemble the derived lookup structures of a finished complex.
pub(crate) fn assemble(
    bounds: Aabb,
    cells: Vec<ConvexCell>,
    adjacency: Vec<Adjacency>,
    tree: Vec<BspNode>,
    insertion_log: Vec<SplitEvent>,
) -> CellComplex {
    let mut neighbors = vec![Vec::new(); cells.len()];
    for (idx, adj) in adjacency.iter().enumerate() {
        neighbors[adj.a].push(idx);
        neighbors[adj.b].push(idx);
    }
    let mut boundary_flags = vec![0u8; cells.len()];
    for (ci, cell) in cells.iter().enumerate() {
        for wall in WallId::ALL {
            let wall_plane = bounds.wall_plane(wall);
            let on_wall = cell.faces().iter().any(|f| {
                f.plane.approx_eq(&wall_plane, 1e-9, 1e-9)
                    && f.ring.area() > AREA_EPS
                    && f.ring
                        .vertices
                        .iter()
                        .all(|v| wall_plane.signed_distance(v).abs() <= ON_EPS * 4.0)
            });
            if on_wall {
                boundary_flags[ci] |= wall.bit();
            }
        }
    }
    CellComplex {
        bounds,
        cells,
        adjacency,
        neighbors,
        boundary_flags,
        tree,
        insertion_log,
    }
}

#[derive(Serialize, Deserialize)]
struct HalfspaceRecord {
    normal: [f64; 3],
    offset: f64,
    side: Side,
}

#[derive(Serialize, Deserialize)]
struct CellRecord {
    halfspaces: Vec<HalfspaceRecord>,
    volume: f64,
}

#[derive(Serialize, Deserialize)]
struct AdjacencyRecord {
    a: usize,
    b: usize,
    area: f64,
    ring: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct ComplexFile {
    bounds: Aabb,
    cells: Vec<CellRecord>,
    adjacency: Vec<AdjacencyRecord>,
    insertion_log: Vec<SplitEvent>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::PointCloud;
    use crate::geom::{Point3, Vector3};

    fn segment_with(normal: Vector3, offset: f64, support: usize, cloud: &mut PointCloud) -> PlanarSegment {
        let plane = Plane::new(normal, offset).unwrap();
        let (u, v) = plane.basis();
        let origin = Point3::from(plane.normal() * plane.offset());
        let start = cloud.len();
        for k in 0..support {
            let s = (k % 10) as f64 * 0.05;
            let t = (k / 10) as f64 * 0.05;
            cloud.points.push(origin + u * s + v * t);
        }
        PlanarSegment::new(cloud, plane, (start..start + support).collect(), 0.01).unwrap()
    }

    #[test]
    fn vertical_planes_come_first() {
        let mut cloud = PointCloud::default();
        let horizontal = segment_with(Vector3::z(), 0.0, 100, &mut cloud);
        let vertical = segment_with(Vector3::x(), 0.0, 100, &mut cloud);
        let plan = plan_insertion(&[horizontal, vertical]);
        assert_eq!(plan.entries[0].segment, SegmentRef::Detected(1));
        assert_eq!(plan.entries[1].segment, SegmentRef::Detected(0));
        assert!((plan.entries[0].verticality - 1.0).abs() < 1e-12);
        assert_eq!(plan.entries[1].verticality, 0.0);
    }

    #[test]
    fn support_orders_within_class() {
        let mut cloud = PointCloud::default();
        let small = segment_with(Vector3::new(0.1, 0.0, 1.0), 0.2, 200, &mut cloud);
        let large = segment_with(Vector3::new(0.0, 0.1, 1.0), 0.4, 500, &mut cloud);
        let plan = plan_insertion(&[small, large]);
        assert_eq!(plan.entries[0].segment, SegmentRef::Detected(1));
        assert_eq!(plan.entries[1].segment, SegmentRef::Detected(0));
    }

    #[test]
    fn oblique_verticality_value() {
        let n = Vector3::new(0.0, (2.0f64).sqrt() / 2.0, (2.0f64).sqrt() / 2.0);
        let plane = Plane::new(n, 0.0).unwrap();
        let v = plane.verticality();
        assert!((v - (1.0 - (2.0f64).sqrt() / 2.0)).abs() < 1e-12);
        assert!(v < VERTICAL_THRESHOLD);
    }

    #[test]
    fn plan_is_deterministic_and_total() {
        let mut cloud = PointCloud::default();
        let segs: Vec<PlanarSegment> = (0..6)
            .map(|k| {
                segment_with(
                    Vector3::new(k as f64 * 0.1, 1.0, 0.3),
                    0.1 * k as f64,
                    100,
                    &mut cloud,
                )
            })
            .collect();
        let a = plan_insertion(&segs);
        let b = plan_insertion(&segs);
        let refs_a: Vec<SegmentRef> = a.entries.iter().map(|e| e.segment).collect();
        let refs_b: Vec<SegmentRef> = b.entries.iter().map(|e| e.segment).collect();
        assert_eq!(refs_a, refs_b);
        assert_eq!(refs_a.len(), 6);
    }

    #[test]
    fn wall_augmentation_appends_six() {
        let mut plan = InsertionPlan { entries: vec![] };
        augment_bounds_faces(&mut plan);
        assert_eq!(plan.entries.len(), 6);
        assert!(plan
            .entries
            .iter()
            .all(|e| matches!(e.segment, SegmentRef::Wall(_))));
    }
}
