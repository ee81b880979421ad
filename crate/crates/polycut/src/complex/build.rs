//! Incremental complex construction.

use crate::error::{Error, Result};
use crate::geom::{Aabb, ConvexCell, Plane, Side, SplitResult, AREA_EPS, ON_EPS};
use crate::primitives::PlanarSegment;

use super::{
    assemble, plan_insertion, Adjacency, BspNode, CellComplex, InsertionPlan, PartitionMode,
    PartitionStrategy, PlanEntry, SegmentRef, SplitEvent,
};

/// Builds a [`CellComplex`] by inserting one primitive at a time. Leaf cells
/// and adjacency records live in append-only slabs; splits tombstone the
/// parent entries.
pub struct ComplexBuilder {
    bounds: Aabb,
    cells: Vec<Option<ConvexCell>>,
    records: Vec<Option<AdjRecord>>,
    /// Record indices per cell slot.
    cell_records: Vec<Vec<usize>>,
    /// Tree-node index of each live cell.
    cell_node: Vec<usize>,
    tree: Vec<BspNode>,
    log: Vec<SplitEvent>,
    live_cells: usize,
    /// Split refusal threshold, see [`ComplexBuilder::with_cell_budget`].
    max_cells: Option<usize>,
}

struct AdjRecord {
    a: usize,
    b: usize,
    face: crate::geom::Polygon,
    plane: Plane,
}

impl ComplexBuilder {
    pub fn new(bounds: Aabb) -> ComplexBuilder {
        let root = ConvexCell::from_aabb(&bounds);
        ComplexBuilder {
            bounds,
            cells: vec![Some(root)],
            records: Vec::new(),
            cell_records: vec![Vec::new()],
            cell_node: vec![0],
            tree: vec![BspNode::Leaf { cell: 0 }],
            log: Vec::new(),
            live_cells: 1,
            max_cells: None,
        }
    }

    /// Fail with [`Error::Partition`] once the leaf count would exceed
    /// `budget` (guards exhaustive-mode benchmarks).
    pub fn with_cell_budget(mut self, budget: usize) -> ComplexBuilder {
        self.max_cells = Some(budget);
        self
    }

    pub fn live_cells(&self) -> usize {
        self.live_cells
    }

    pub fn split_count(&self) -> usize {
        self.log.len()
    }

    /// Insert one primitive; returns the number of cells it split. In
    /// adaptive mode only leaves whose box overlaps `segment_aabb` are
    /// candidates. A plane crossing no candidate leaves the complex
    /// unchanged.
    pub fn insert(
        &mut self,
        plane: &Plane,
        reference: SegmentRef,
        segment_aabb: Option<&Aabb>,
    ) -> Result<usize> {
        let candidates: Vec<usize> = (0..self.cells.len())
            .filter(|&i| {
                let Some(cell) = self.cells[i].as_ref() else {
                    return false;
                };
                if let Some(bb) = segment_aabb {
                    if !cell.aabb().intersects(bb) {
                        return false;
                    }
                }
                cell.straddles(plane)
            })
            .collect();
        let mut splits = 0usize;
        for cell_id in candidates {
            if let Some(budget) = self.max_cells {
                if self.live_cells + 1 > budget {
                    return Err(Error::Partition(format!(
                        "cell budget {budget} exceeded"
                    )));
                }
            }
            let cell = self.cells[cell_id].as_ref().expect("candidate is live");
            match cell.clip(plane) {
                SplitResult::Both {
                    pos,
                    neg,
                    shared_face,
                } => {
                    self.apply_split(cell_id, plane, reference, pos, neg, shared_face);
                    splits += 1;
                }
                // Sliver-rejected or grazing: leave the cell alone.
                SplitResult::AllPositive | SplitResult::AllNegative => {}
            }
        }
        Ok(splits)
    }

    fn apply_split(
        &mut self,
        parent: usize,
        plane: &Plane,
        reference: SegmentRef,
        pos: ConvexCell,
        neg: ConvexCell,
        shared_face: crate::geom::Polygon,
    ) {
        let pos_id = self.cells.len();
        self.cells.push(Some(pos));
        self.cell_records.push(Vec::new());
        let neg_id = self.cells.len();
        self.cells.push(Some(neg));
        self.cell_records.push(Vec::new());

        // Tree: the parent leaf becomes a split node with two fresh leaves.
        let parent_node = self.cell_node[parent];
        let pos_node = self.tree.len();
        self.tree.push(BspNode::Leaf { cell: pos_id });
        let neg_node = self.tree.len();
        self.tree.push(BspNode::Leaf { cell: neg_id });
        self.tree[parent_node] = BspNode::Split {
            plane: *plane,
            segment: reference,
            pos: pos_node,
            neg: neg_node,
        };
        self.cell_node.push(pos_node);
        self.cell_node.push(neg_node);

        // The new shared facet.
        let area = shared_face.area();
        debug_assert!(area > AREA_EPS);
        self.push_record(AdjRecord {
            a: pos_id,
            b: neg_id,
            face: shared_face,
            plane: *plane,
        });

        // Re-home the parent's adjacency records onto the children sharing
        // positive area with each neighbor.
        let old_records = std::mem::take(&mut self.cell_records[parent]);
        for rid in old_records {
            let Some(record) = self.records[rid].take() else {
                continue;
            };
            let other = if record.a == parent { record.b } else { record.a };
            self.detach(other, rid);
            let pos_part = record
                .face
                .clip_halfspace(plane, Side::Positive, ON_EPS)
                .dedup(1e-12);
            if pos_part.area() > AREA_EPS {
                self.push_record(AdjRecord {
                    a: pos_id,
                    b: other,
                    face: pos_part,
                    plane: record.plane,
                });
            }
            let neg_part = record
                .face
                .clip_halfspace(plane, Side::Negative, ON_EPS)
                .dedup(1e-12);
            if neg_part.area() > AREA_EPS {
                self.push_record(AdjRecord {
                    a: neg_id,
                    b: other,
                    face: neg_part,
                    plane: record.plane,
                });
            }
        }

        self.cells[parent] = None;
        self.live_cells += 1;
        self.log.push(SplitEvent {
            segment: reference,
            parent,
            pos_child: pos_id,
            neg_child: neg_id,
        });
    }

    fn push_record(&mut self, record: AdjRecord) {
        let rid = self.records.len();
        self.cell_records[record.a].push(rid);
        self.cell_records[record.b].push(rid);
        self.records.push(Some(record));
    }

    fn detach(&mut self, cell: usize, rid: usize) {
        self.cell_records[cell].retain(|&r| r != rid);
    }

    /// Compact live cells and records into a [`CellComplex`].
    pub fn finish(self) -> CellComplex {
        let mut remap = vec![usize::MAX; self.cells.len()];
        let mut cells = Vec::with_capacity(self.live_cells);
        for (i, slot) in self.cells.into_iter().enumerate() {
            if let Some(cell) = slot {
                remap[i] = cells.len();
                cells.push(cell);
            }
        }
        let mut adjacency = Vec::new();
        for record in self.records.into_iter().flatten() {
            let a = remap[record.a];
            let b = remap[record.b];
            debug_assert!(a != usize::MAX && b != usize::MAX);
            adjacency.push(Adjacency {
                a: a.min(b),
                b: a.max(b),
                area: record.face.area(),
                face: record.face,
                plane: record.plane,
            });
        }
        // Remap tree leaves.
        let tree = self
            .tree
            .into_iter()
            .map(|node| match node {
                BspNode::Leaf { cell } => BspNode::Leaf { cell: remap[cell] },
                split => split,
            })
            .collect();
        let log = self
            .log
            .into_iter()
            .map(|e| SplitEvent {
                segment: e.segment,
                parent: e.parent,
                pos_child: remap.get(e.pos_child).copied().unwrap_or(e.pos_child),
                neg_child: remap.get(e.neg_child).copied().unwrap_or(e.neg_child),
            })
            .collect();
        assemble(self.bounds, cells, adjacency, tree, log)
    }
}

/// Build a complex from refined segments: plan, then insert in order.
pub fn build_complex(
    segments: &[PlanarSegment],
    bounds: &Aabb,
    strategy: &PartitionStrategy,
) -> Result<CellComplex> {
    let plan = plan_insertion(segments);
    build_complex_with_plan(segments, &plan, bounds, strategy)
}

/// Build a complex following an explicit insertion plan (which may include
/// virtual wall primitives).
pub fn build_complex_with_plan(
    segments: &[PlanarSegment],
    plan: &InsertionPlan,
    bounds: &Aabb,
    strategy: &PartitionStrategy,
) -> Result<CellComplex> {
    strategy.validate()?;
    let mut builder = ComplexBuilder::new(*bounds);
    insert_plan_entries(&mut builder, segments, &plan.entries, bounds, strategy.mode)?;
    let complex = builder.finish();
    debug_assert!(complex.check_tiling(1e-7).is_ok());
    Ok(complex)
}

pub fn insert_plan_entries(
    builder: &mut ComplexBuilder,
    segments: &[PlanarSegment],
    entries: &[PlanEntry],
    bounds: &Aabb,
    mode: PartitionMode,
) -> Result<()> {
    for entry in entries {
        match entry.segment {
            SegmentRef::Detected(i) => {
                let segment = segments.get(i).ok_or_else(|| {
                    Error::Partition(format!("plan references segment {i} of {}", segments.len()))
                })?;
                let aabb = match mode {
                    PartitionMode::Adaptive => Some(segment.aabb()),
                    PartitionMode::Exhaustive => None,
                };
                builder.insert(&segment.plane, entry.segment, aabb)?;
            }
            SegmentRef::Wall(wall) => {
                builder.insert(&bounds.wall_plane(wall), entry.segment, None)?;
            }
        }
    }
    Ok(())
}
