//! Iterative plane merging over an angle-ordered pair queue.
//!
//! All segment pairs enter a priority queue keyed by inter-plane angle.
//! The smallest-angle pair is tested against the angle and distance
//! tolerances; merges refit by PCA and re-enqueue against every survivor.
//! Processing stops at the first pair whose angle reaches the tolerance —
//! the queue is angle-ordered, so nothing mergeable remains. Pairs failing
//! only the distance test are discarded and popping continues, which keeps
//! the terminal guarantee that every surviving pair violates at least one
//! tolerance. Entries referencing merged-away segments are discarded lazily
//! on pop.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::PointCloud;
use crate::error::Result;
use crate::geom::Point3;

use super::{fit_plane_pca, PlanarSegment, RefineParams};

struct PairEntry {
    angle: f64,
    a: usize,
    b: usize,
}

impl PartialEq for PairEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for PairEntry {}
impl PartialOrd for PairEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PairEntry {
    // Reversed so BinaryHeap pops the smallest angle first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .angle
            .total_cmp(&self.angle)
            .then(other.a.cmp(&self.a))
            .then(other.b.cmp(&self.b))
    }
}

/// Merge near-coplanar, near-coincident segments. Never increases the
/// segment count; the union of inliers is preserved.
pub fn refine_planes(
    cloud: &PointCloud,
    segments: Vec<PlanarSegment>,
    params: &RefineParams,
) -> Result<Vec<PlanarSegment>> {
    params.validate()?;
    if segments.len() <= 1 {
        return Ok(segments);
    }

    // Append-only slots; a merge tombstones its operands.
    let mut slots: Vec<Option<PlanarSegment>> = segments.into_iter().map(Some).collect();
    let mut queue: BinaryHeap<PairEntry> = BinaryHeap::new();
    for a in 0..slots.len() {
        for b in (a + 1)..slots.len() {
            let angle = slots[a]
                .as_ref()
                .unwrap()
                .plane
                .angle_between(&slots[b].as_ref().unwrap().plane);
            queue.push(PairEntry { angle, a, b });
        }
    }

    while let Some(entry) = queue.pop() {
        let (a, b) = (entry.a, entry.b);
        if slots[a].is_none() || slots[b].is_none() {
            continue;
        }
        if entry.angle >= params.angle_tolerance {
            break;
        }
        let (sa, sb) = (slots[a].as_ref().unwrap(), slots[b].as_ref().unwrap());
        let distance = sa
            .mean_distance_to(cloud, &sb.plane)
            .max(sb.mean_distance_to(cloud, &sa.plane));
        if distance >= params.distance_tolerance {
            continue;
        }

        let merged = merge(cloud, sa, sb)?;
        slots[a] = None;
        slots[b] = None;
        let id = slots.len();
        for (other, slot) in slots.iter().enumerate() {
            if let Some(seg) = slot {
                queue.push(PairEntry {
                    angle: merged.plane.angle_between(&seg.plane),
                    a: other.min(id),
                    b: other.max(id),
                });
            }
        }
        slots.push(Some(merged));
    }

    Ok(slots.into_iter().flatten().collect())
}

fn merge(cloud: &PointCloud, a: &PlanarSegment, b: &PlanarSegment) -> Result<PlanarSegment> {
    let mut inliers = Vec::with_capacity(a.inliers.len() + b.inliers.len());
    inliers.extend_from_slice(&a.inliers);
    inliers.extend_from_slice(&b.inliers);
    inliers.sort_unstable();
    inliers.dedup();
    let pts: Vec<Point3> = inliers.iter().map(|&i| cloud.points[i]).collect();
    let plane = match fit_plane_pca(&pts) {
        Ok(p) => p,
        // Degenerate union: keep the better-supported plane.
        Err(_) => {
            if a.support() >= b.support() {
                a.plane
            } else {
                b.plane
            }
        }
    };
    Ok(PlanarSegment::from_parts(
        plane,
        inliers,
        a.aabb().union(b.aabb()),
    ))
}
