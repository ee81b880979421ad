//! Convex polyhedral cells with incremental plane clipping.

use serde::{Deserialize, Serialize};

use super::{Aabb, Plane, Point3, Polygon, Side, Vector3, AREA_EPS, ON_EPS, VOLUME_EPS};
use crate::error::{Error, Result};

/// One boundary face of a cell: its supporting plane (canonical) and the
/// vertex ring, wound so the ring normal points out of the cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFace {
    pub plane: Plane,
    pub ring: Polygon,
}

/// A bounded convex polyhedron, stored as its defining halfspaces plus cached
/// boundary data. Cells are immutable; clipping produces new cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexCell {
    halfspaces: Vec<(Plane, Side)>,
    faces: Vec<CellFace>,
    vertices: Vec<Point3>,
    volume: f64,
    centroid: Point3,
    aabb: Aabb,
}

/// Outcome of clipping a cell with a plane.
#[derive(Debug, Clone)]
pub enum SplitResult {
    /// The plane crosses the cell. `shared_face` is `cell ∩ plane`, oriented
    /// along the plane normal (from the negative child toward the positive).
    Both {
        pos: ConvexCell,
        neg: ConvexCell,
        shared_face: Polygon,
    },
    /// Cell lies entirely on the positive side (untouched).
    AllPositive,
    /// Cell lies entirely on the negative side (untouched).
    AllNegative,
}

impl ConvexCell {
    /// The box cell: six axis walls.
    pub fn from_aabb(bounds: &Aabb) -> ConvexCell {
        let c = bounds.corners();
        // Rings wound outward (right-hand rule).
        let rings = [
            (WallRing([0, 3, 2, 1]), super::WallId::ZMin),
            (WallRing([4, 5, 6, 7]), super::WallId::ZMax),
            (WallRing([0, 1, 5, 4]), super::WallId::YMin),
            (WallRing([2, 3, 7, 6]), super::WallId::YMax),
            (WallRing([0, 4, 7, 3]), super::WallId::XMin),
            (WallRing([1, 2, 6, 5]), super::WallId::XMax),
        ];
        let mut faces = Vec::with_capacity(6);
        let mut halfspaces = Vec::with_capacity(6);
        for (WallRing(idx), wall) in rings {
            let ring = Polygon::new(idx.iter().map(|&i| c[i]).collect());
            let plane = bounds.wall_plane(wall);
            // The cell is on the inner side of each wall.
            let side = if plane.normal().dot(&wall.outward()) > 0.0 {
                Side::Negative
            } else {
                Side::Positive
            };
            halfspaces.push((plane, side));
            faces.push(CellFace { plane, ring });
        }
        let vertices = c.to_vec();
        let (volume, centroid) = measures_from_faces(&faces, &vertices);
        ConvexCell {
            halfspaces,
            faces,
            vertices,
            volume,
            centroid,
            aabb: *bounds,
        }
    }

    pub fn halfspaces(&self) -> &[(Plane, Side)] {
        &self.halfspaces
    }

    pub fn faces(&self) -> &[CellFace] {
        &self.faces
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn centroid(&self) -> Point3 {
        self.centroid
    }

    pub fn aabb(&self) -> &Aabb {
        &self.aabb
    }

    /// Volume and volume-weighted centroid, recomputed from the cached faces.
    ///
    /// Errors on cells degenerate below [`VOLUME_EPS`].
    pub fn measures(&self) -> Result<(f64, Point3)> {
        let (v, c) = measures_from_faces(&self.faces, &self.vertices);
        if !(v.is_finite() && v > VOLUME_EPS) {
            return Err(Error::Geometry(format!("degenerate cell volume {v}")));
        }
        Ok((v, c))
    }

    /// True when `p` satisfies every defining halfspace within `eps`.
    pub fn contains(&self, p: &Point3, eps: f64) -> bool {
        self.halfspaces.iter().all(|(plane, side)| {
            let d = plane.signed_distance(p);
            match side {
                Side::Positive => d >= -eps,
                Side::Negative => d <= eps,
                Side::On => d.abs() <= eps,
            }
        })
    }

    /// Does the open cell straddle the plane (vertices strictly on both sides)?
    pub fn straddles(&self, plane: &Plane) -> bool {
        let mut pos = false;
        let mut neg = false;
        for v in &self.vertices {
            match plane.classify(v, ON_EPS) {
                Side::Positive => pos = true,
                Side::Negative => neg = true,
                Side::On => {}
            }
            if pos && neg {
                return true;
            }
        }
        false
    }

    /// The cell boundary as a closed polygonal mesh (outward-oriented).
    pub fn to_mesh(&self) -> super::PolyMesh {
        let mut vertices: Vec<Point3> = Vec::new();
        let mut faces = Vec::with_capacity(self.faces.len());
        for face in &self.faces {
            let mut ring = Vec::with_capacity(face.ring.len());
            for v in &face.ring.vertices {
                let idx = vertices
                    .iter()
                    .position(|q| (v - q).norm() <= 1e-10)
                    .unwrap_or_else(|| {
                        vertices.push(*v);
                        vertices.len() - 1
                    });
                ring.push(idx);
            }
            faces.push(ring);
        }
        super::PolyMesh::new(vertices, faces)
    }

    /// Split the cell by a plane. Splits that would create a sliver below
    /// [`VOLUME_EPS`] on either side are rejected and reported as the
    /// majority side.
    pub fn clip(&self, plane: &Plane) -> SplitResult {
        let mut pos = 0usize;
        let mut neg = 0usize;
        for v in &self.vertices {
            match plane.classify(v, ON_EPS) {
                Side::Positive => pos += 1,
                Side::Negative => neg += 1,
                Side::On => {}
            }
        }
        if pos == 0 && neg == 0 {
            // Plane grazes the whole cell; callers treat it as no-split.
            return SplitResult::AllNegative;
        }
        if pos == 0 {
            return SplitResult::AllNegative;
        }
        if neg == 0 {
            return SplitResult::AllPositive;
        }

        let pos_child = self.clipped_side(plane, Side::Positive);
        let neg_child = self.clipped_side(plane, Side::Negative);
        match (pos_child, neg_child) {
            (Some(p), Some(n)) => {
                let cap = n
                    .faces
                    .iter()
                    .find(|f| f.plane == *plane)
                    .map(|f| f.ring.oriented_along(&plane.normal()))
                    .unwrap_or_else(|| Polygon::new(Vec::new()));
                if cap.area() <= AREA_EPS {
                    return majority(self, plane);
                }
                SplitResult::Both {
                    pos: p,
                    neg: n,
                    shared_face: cap,
                }
            }
            _ => majority(self, plane),
        }
    }

    /// The part of the cell on `keep` side of `plane`, or None when it is a
    /// sliver (volume below [`VOLUME_EPS`]) or empty.
    fn clipped_side(&self, plane: &Plane, keep: Side) -> Option<ConvexCell> {
        let mut faces: Vec<CellFace> = Vec::with_capacity(self.faces.len() + 1);
        let mut cap_points: Vec<Point3> = Vec::new();
        for face in &self.faces {
            let clipped = face.ring.clip_halfspace(plane, keep, ON_EPS).dedup(1e-12);
            if clipped.len() < 3 || clipped.area() <= AREA_EPS {
                continue;
            }
            for v in &clipped.vertices {
                if plane.signed_distance(v).abs() <= ON_EPS * 4.0 {
                    push_unique(&mut cap_points, *v, 1e-10);
                }
            }
            faces.push(CellFace {
                plane: face.plane,
                ring: clipped,
            });
        }
        if faces.is_empty() {
            return None;
        }
        if cap_points.len() >= 3 {
            let outward = if keep == Side::Positive {
                -plane.normal()
            } else {
                plane.normal()
            };
            let ring = sort_ring(&cap_points, plane).oriented_along(&outward);
            if ring.area() > AREA_EPS {
                faces.push(CellFace { plane: *plane, ring });
            }
        }
        let mut vertices: Vec<Point3> = Vec::new();
        for f in &faces {
            for v in &f.ring.vertices {
                push_unique(&mut vertices, *v, 1e-10);
            }
        }
        if vertices.len() < 4 {
            return None;
        }
        let (volume, centroid) = measures_from_faces(&faces, &vertices);
        if !(volume.is_finite() && volume > VOLUME_EPS) {
            return None;
        }
        let mut halfspaces = self.halfspaces.clone();
        halfspaces.push((*plane, keep));
        let aabb = Aabb::from_points(vertices.iter()).ok()?;
        Some(ConvexCell {
            halfspaces,
            faces,
            vertices,
            volume,
            centroid,
            aabb,
        })
    }
}

struct WallRing([usize; 4]);

fn majority(cell: &ConvexCell, plane: &Plane) -> SplitResult {
    // Volume-weighted sign of the cell against the plane.
    if plane.signed_distance(&cell.centroid) >= 0.0 {
        SplitResult::AllPositive
    } else {
        SplitResult::AllNegative
    }
}

fn push_unique(points: &mut Vec<Point3>, p: Point3, tol: f64) {
    if points.iter().all(|q| (p - q).norm() > tol) {
        points.push(p);
    }
}

/// Order a set of coplanar points into a convex ring by angle around their
/// mean, in the plane's basis.
fn sort_ring(points: &[Point3], plane: &Plane) -> Polygon {
    let (u, v) = plane.basis();
    let mut mean = Vector3::zeros();
    for p in points {
        mean += p.coords;
    }
    let mean = mean / points.len() as f64;
    let mut keyed: Vec<(f64, Point3)> = points
        .iter()
        .map(|p| {
            let d = p.coords - mean;
            (d.dot(&v).atan2(d.dot(&u)), *p)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    Polygon::new(keyed.into_iter().map(|(_, p)| p).collect())
}

/// Signed volume and centroid by fan-tetrahedron decomposition from the
/// vertex mean; rings must be outward-oriented.
fn measures_from_faces(faces: &[CellFace], vertices: &[Point3]) -> (f64, Point3) {
    let mut r = Vector3::zeros();
    for v in vertices {
        r += v.coords;
    }
    let r = r / vertices.len().max(1) as f64;
    let mut volume = 0.0;
    let mut moment = Vector3::zeros();
    for face in faces {
        let ring = &face.ring.vertices;
        for i in 1..ring.len().saturating_sub(1) {
            let a = ring[0].coords - r;
            let b = ring[i].coords - r;
            let c = ring[i + 1].coords - r;
            let v6 = a.cross(&b).dot(&c);
            volume += v6;
            moment += (r * 4.0 + a + b + c) * v6;
        }
    }
    let volume = volume / 6.0;
    let centroid = if volume.abs() > 0.0 {
        Point3::from(moment / (6.0 * volume * 4.0))
    } else {
        Point3::from(r)
    };
    (volume, centroid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_cube() -> ConvexCell {
        ConvexCell::from_aabb(&Aabb::new(Point3::origin(), Point3::new(1.0, 1.0, 1.0)).unwrap())
    }

    /// Rejection-sampling volume estimate over the cell's AABB.
    fn monte_carlo_volume(cell: &ConvexCell, samples: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bb = cell.aabb();
        let mut hits = 0usize;
        for _ in 0..samples {
            let p = Point3::new(
                rng.random_range(bb.min.x..bb.max.x),
                rng.random_range(bb.min.y..bb.max.y),
                rng.random_range(bb.min.z..bb.max.z),
            );
            if cell.contains(&p, 0.0) {
                hits += 1;
            }
        }
        let frac = hits as f64 / samples as f64;
        let est = frac * bb.volume();
        let sigma = bb.volume() * (frac * (1.0 - frac) / samples as f64).sqrt();
        (est, sigma)
    }

    #[test]
    fn cube_measures() {
        let cube = unit_cube();
        let (v, c) = cube.measures().unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!((c - Point3::new(0.5, 0.5, 0.5)).norm() < 1e-12);

        let big = ConvexCell::from_aabb(
            &Aabb::new(Point3::origin(), Point3::new(2.0, 2.0, 2.0)).unwrap(),
        );
        let (v, c) = big.measures().unwrap();
        assert!((v - 8.0).abs() < 1e-12);
        assert!((c - Point3::new(1.0, 1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn symmetric_bisection() {
        let plane = Plane::new(Vector3::z(), 0.5).unwrap();
        match unit_cube().clip(&plane) {
            SplitResult::Both {
                pos,
                neg,
                shared_face,
            } => {
                assert!((pos.volume() - 0.5).abs() < 1e-12);
                assert!((neg.volume() - 0.5).abs() < 1e-12);
                assert!((shared_face.area() - 1.0).abs() < 1e-12);
                assert!(plane.signed_distance(&pos.centroid()) > 0.0);
                assert!(plane.signed_distance(&neg.centroid()) < 0.0);
            }
            other => panic!("expected Both, got {other:?}"),
        }
    }

    #[test]
    fn disjoint_plane_leaves_cell_untouched() {
        let plane = Plane::new(Vector3::z(), 2.0).unwrap();
        assert!(matches!(unit_cube().clip(&plane), SplitResult::AllNegative));
        let below = Plane::new(Vector3::z(), -1.0).unwrap();
        assert!(matches!(unit_cube().clip(&below), SplitResult::AllPositive));
    }

    #[test]
    fn tangent_plane_is_no_split() {
        let plane = Plane::new(Vector3::z(), 1.0).unwrap();
        assert!(matches!(unit_cube().clip(&plane), SplitResult::AllNegative));
    }

    #[test]
    fn diagonal_split_hexagonal_cap() {
        // x + y + z = 1.5 cuts the unit cube through its center; the section
        // is the regular hexagon with side sqrt(2)/2.
        let plane = Plane::new(Vector3::new(1.0, 1.0, 1.0), 1.5).unwrap();
        match unit_cube().clip(&plane) {
            SplitResult::Both {
                pos,
                neg,
                shared_face,
            } => {
                assert!((pos.volume() + neg.volume() - 1.0).abs() < 1e-9);
                let side = (2.0f64).sqrt() / 2.0;
                let hex_area = 1.5 * 3.0f64.sqrt() * side * side;
                assert!(
                    (shared_face.area() - hex_area).abs() < 1e-9,
                    "cap area {} vs {}",
                    shared_face.area(),
                    hex_area
                );
                assert_eq!(shared_face.len(), 6);
                // Monte-Carlo volume oracle, 1e7 samples.
                let (est, sigma) = monte_carlo_volume(&neg, 10_000_000, 17);
                assert!(
                    (neg.volume() - est).abs() < 3.0 * sigma,
                    "vol {} vs mc {} (sigma {})",
                    neg.volume(),
                    est,
                    sigma
                );
            }
            other => panic!("expected Both, got {other:?}"),
        }
    }

    #[test]
    fn random_tetrahedron_volume_matches_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let pts: Vec<Point3> = (0..4)
                .map(|_| {
                    Point3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            let det = (pts[1] - pts[0])
                .cross(&(pts[2] - pts[0]))
                .dot(&(pts[3] - pts[0]));
            if det.abs() < 1e-3 {
                continue;
            }
            let expected = det.abs() / 6.0;
            let inside = Point3::from(
                (pts[0].coords + pts[1].coords + pts[2].coords + pts[3].coords) / 4.0,
            );
            // Carve the tetrahedron out of a box by its four face planes.
            let mut cell = ConvexCell::from_aabb(
                &Aabb::new(Point3::new(-2.0, -2.0, -2.0), Point3::new(2.0, 2.0, 2.0)).unwrap(),
            );
            let faces = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
            for f in faces {
                let n = (pts[f[1]] - pts[f[0]]).cross(&(pts[f[2]] - pts[f[0]]));
                let plane = Plane::from_point_normal(pts[f[0]], n).unwrap();
                cell = match cell.clip(&plane) {
                    SplitResult::Both { pos, neg, .. } => {
                        if plane.signed_distance(&inside) > 0.0 {
                            pos
                        } else {
                            neg
                        }
                    }
                    SplitResult::AllPositive | SplitResult::AllNegative => cell,
                };
            }
            assert!(
                (cell.volume() - expected).abs() < 1e-9 * expected.max(1.0),
                "tetra volume {} vs det/6 {}",
                cell.volume(),
                expected
            );
        }
    }

    #[test]
    fn split_volume_conservation_random_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            // A randomly pre-clipped cell, then one more split.
            let mut cell = unit_cube();
            for _ in 0..3 {
                let n = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if n.norm() < 1e-3 {
                    continue;
                }
                let d = rng.random_range(-0.2..1.2);
                let plane = Plane::new(n, d).unwrap();
                if let SplitResult::Both { pos, neg, .. } = cell.clip(&plane) {
                    cell = if trial % 2 == 0 { pos } else { neg };
                }
            }
            let n = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if n.norm() < 1e-3 {
                continue;
            }
            let plane = Plane::new(n, rng.random_range(0.0..1.0)).unwrap();
            if let SplitResult::Both { pos, neg, .. } = cell.clip(&plane) {
                let total = pos.volume() + neg.volume();
                assert!(
                    (total - cell.volume()).abs() <= 1e-9 * cell.volume(),
                    "volume drift: {} vs {}",
                    total,
                    cell.volume()
                );
                assert!(plane.signed_distance(&pos.centroid()) > 0.0);
                assert!(plane.signed_distance(&neg.centroid()) < 0.0);
                // Monte-Carlo spot check on one side.
                let (est, sigma) = monte_carlo_volume(&pos, 200_000, trial as u64);
                assert!((pos.volume() - est).abs() < 3.0 * sigma.max(1e-6));
            }
        }
    }

    #[test]
    fn clip_order_insensitive_in_measure() {
        let a = Plane::new(Vector3::new(1.0, 0.3, -0.2), 0.4).unwrap();
        let b = Plane::new(Vector3::new(-0.1, 1.0, 0.5), 0.6).unwrap();
        let quadrants = |first: &Plane, second: &Plane| -> Vec<(bool, bool, f64)> {
            let mut out = Vec::new();
            match unit_cube().clip(first) {
                SplitResult::Both { pos, neg, .. } => {
                    for (s1, half) in [(true, pos), (false, neg)] {
                        match half.clip(second) {
                            SplitResult::Both { pos, neg, .. } => {
                                out.push((s1, true, pos.volume()));
                                out.push((s1, false, neg.volume()));
                            }
                            SplitResult::AllPositive => out.push((s1, true, half.volume())),
                            SplitResult::AllNegative => out.push((s1, false, half.volume())),
                        }
                    }
                }
                _ => panic!("first plane must split the cube"),
            }
            out
        };
        let ab = quadrants(&a, &b);
        let ba = quadrants(&b, &a);
        for (s1, s2, vol) in &ab {
            // In the swapped order the same region is keyed (s2, s1).
            let twin = ba
                .iter()
                .find(|(t1, t2, _)| t1 == s2 && t2 == s1)
                .map(|(_, _, v)| *v)
                .unwrap_or(0.0);
            assert!(
                (vol - twin).abs() <= 1e-8 * vol.max(1e-12),
                "region ({s1},{s2}): {vol} vs {twin}"
            );
        }
    }

    #[test]
    fn monte_carlo_volume_invariant_on_random_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 100 {
            let mut cell = unit_cube();
            let cuts = rng.random_range(1..5);
            for _ in 0..cuts {
                let n = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if n.norm() < 1e-3 {
                    continue;
                }
                let plane = Plane::new(n, rng.random_range(0.1..0.9)).unwrap();
                if let SplitResult::Both { pos, neg, .. } = cell.clip(&plane) {
                    cell = if rng.random_bool(0.5) { pos } else { neg };
                }
            }
            let (est, sigma) = monte_carlo_volume(&cell, 100_000, 1000 + checked as u64);
            assert!(
                (cell.volume() - est).abs() < 3.0 * sigma.max(1e-7),
                "cell {} vs mc {} (sigma {})",
                cell.volume(),
                est,
                sigma
            );
            checked += 1;
        }
    }
}
