//! Procedural test shapes: analytic solids and building-like box unions.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::complex::{build_complex, PartitionMode, PartitionStrategy};
use crate::error::{Error, Result};
use crate::extract::{extract_shell, merge_coplanar, Label, Labeling};
use crate::geom::{Aabb, ConvexCell, Plane, Point3, PolyMesh, Vector3};
use crate::primitives::PlanarSegment;

/// Axis-aligned cube of the given side, centered at the origin.
pub fn cube_mesh(side: f64) -> PolyMesh {
    let h = side / 2.0;
    ConvexCell::from_aabb(&Aabb::new(Point3::new(-h, -h, -h), Point3::new(h, h, h)).unwrap())
        .to_mesh()
}

/// L-shaped prism: a unit square footprint with one quadrant removed,
/// extruded to height 0.6. Eight faces, watertight.
pub fn l_shape_mesh() -> PolyMesh {
    let footprint = [
        (0.0, 0.0),
        (1.0, 0.0),
        (1.0, 0.5),
        (0.5, 0.5),
        (0.5, 1.0),
        (0.0, 1.0),
    ];
    let h = 0.6;
    let n = footprint.len();
    let mut vertices = Vec::with_capacity(2 * n);
    for &(x, y) in &footprint {
        vertices.push(Point3::new(x, y, 0.0));
    }
    for &(x, y) in &footprint {
        vertices.push(Point3::new(x, y, h));
    }
    let mut faces = Vec::with_capacity(n + 2);
    // Bottom (outward -z): footprint reversed; top (outward +z): as-is.
    faces.push((0..n).rev().collect::<Vec<_>>());
    faces.push((n..2 * n).collect::<Vec<_>>());
    for k in 0..n {
        let a = k;
        let b = (k + 1) % n;
        faces.push(vec![a, b, b + n, a + n]);
    }
    PolyMesh::new(vertices, faces)
}

/// One box of a building footprint: axis extents, optional rotation about z,
/// sitting on the ground plane z = 0.
#[derive(Debug, Clone, Copy)]
struct BuildingBox {
    center: Point3,
    half_u: f64,
    half_v: f64,
    height: f64,
    angle: f64,
}

impl BuildingBox {
    fn axes(&self) -> (Vector3, Vector3) {
        let (s, c) = self.angle.sin_cos();
        (Vector3::new(c, s, 0.0), Vector3::new(-s, c, 0.0))
    }

    fn contains(&self, p: &Point3) -> bool {
        let (u, v) = self.axes();
        let d = p - self.center;
        d.dot(&u).abs() <= self.half_u && d.dot(&v).abs() <= self.half_v && p.z >= 0.0 && p.z <= self.height
    }

    fn planes(&self) -> Vec<Plane> {
        let (u, v) = self.axes();
        let c = self.center;
        vec![
            Plane::from_point_normal(c + u * self.half_u, u).unwrap(),
            Plane::from_point_normal(c - u * self.half_u, u).unwrap(),
            Plane::from_point_normal(c + v * self.half_v, v).unwrap(),
            Plane::from_point_normal(c - v * self.half_v, v).unwrap(),
            Plane::new(Vector3::z(), self.height).unwrap(),
            Plane::new(Vector3::z(), 0.0).unwrap(),
        ]
    }

    fn corners(&self) -> Vec<Point3> {
        let (u, v) = self.axes();
        let mut out = Vec::with_capacity(8);
        for su in [-1.0, 1.0] {
            for sv in [-1.0, 1.0] {
                for z in [0.0, self.height] {
                    let p = self.center + u * (su * self.half_u) + v * (sv * self.half_v);
                    out.push(Point3::new(p.x, p.y, z));
                }
            }
        }
        out
    }
}

/// A building-like watertight mesh: the boundary of a union of ground-based
/// boxes (some rotated), produced by exhaustively partitioning the box face
/// planes and extracting the union's shell. Retries derived seeds until the
/// result exposes at least `min_planes` distinct face planes.
pub fn building_mesh(seed: u64, min_planes: usize) -> Result<PolyMesh> {
    for attempt in 0..32 {
        let mesh = building_mesh_attempt(seed.wrapping_add(attempt * 0x9E37_79B9))?;
        if distinct_plane_count(&mesh) >= min_planes {
            return Ok(mesh);
        }
    }
    Err(Error::Geometry(format!(
        "no building with >= {min_planes} planes after 32 attempts"
    )))
}

fn building_mesh_attempt(seed: u64) -> Result<PolyMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_boxes = rng.random_range(3..6);
    let mut boxes = Vec::with_capacity(n_boxes);
    for k in 0..n_boxes {
        boxes.push(BuildingBox {
            center: Point3::new(
                rng.random_range(-0.22..0.22),
                rng.random_range(-0.22..0.22),
                0.0,
            ),
            half_u: rng.random_range(0.12..0.3),
            half_v: rng.random_range(0.12..0.3),
            height: rng.random_range(0.25..0.85),
            // Mix axis-aligned and rotated wings.
            angle: if k % 2 == 0 {
                0.0
            } else {
                rng.random_range(0.0..std::f64::consts::FRAC_PI_2)
            },
        });
    }

    let mut planes: Vec<Plane> = Vec::new();
    for b in &boxes {
        for plane in b.planes() {
            if !planes.iter().any(|p| p.approx_eq(&plane, 1e-9, 1e-9)) {
                planes.push(plane);
            }
        }
    }
    let corners: Vec<Point3> = boxes.iter().flat_map(|b| b.corners()).collect();
    let bounds = Aabb::from_points(corners.iter())?.padded(0.08);

    let segments: Vec<PlanarSegment> = planes
        .iter()
        .map(|&plane| PlanarSegment::from_parts(plane, Vec::new(), bounds))
        .collect();
    let complex = build_complex(
        &segments,
        &bounds,
        &PartitionStrategy {
            mode: PartitionMode::Exhaustive,
            ..PartitionStrategy::default()
        },
    )?;
    let labels: Vec<Label> = complex
        .cells()
        .iter()
        .map(|cell| {
            let c = cell.centroid();
            if boxes.iter().any(|b| b.contains(&c)) {
                Label::In
            } else {
                Label::Out
            }
        })
        .collect();
    let shell = extract_shell(&complex, &Labeling(labels))?;
    if !shell.warnings.is_empty() {
        return Err(Error::Geometry(format!(
            "building shell not closed: {:?}",
            shell.warnings
        )));
    }
    let mesh = merge_coplanar(&shell.mesh);
    mesh.validate()?;
    Ok(mesh)
}

fn distinct_plane_count(mesh: &PolyMesh) -> usize {
    let mut planes: Vec<Plane> = Vec::new();
    for f in 0..mesh.faces.len() {
        if let Some(plane) = mesh.face_polygon(f).plane() {
            if !planes.iter().any(|p| p.approx_eq(&plane, 1e-7, 1e-7)) {
                planes.push(plane);
            }
        }
    }
    planes.len()
}

/// Synthetic detection output for a mesh: per-face planar segments with
/// area-weighted surface samples as inliers. `density` is points per unit
/// area (at least 40 per face).
pub fn segments_from_mesh(
    mesh: &PolyMesh,
    density: f64,
    seed: u64,
) -> Result<(PointCloud, Vec<PlanarSegment>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5E65_EED5);
    let mut cloud = PointCloud::default();
    let mut segments = Vec::new();
    for (fi, _) in mesh.faces.iter().enumerate() {
        let polygon = mesh.face_polygon(fi);
        let Some(plane) = polygon.plane() else {
            continue;
        };
        let count = ((polygon.area() * density) as usize).max(40);
        // Fan-triangulate the face and sample area-weighted.
        let ring = &polygon.vertices;
        let tri_areas: Vec<f64> = (1..ring.len() - 1)
            .map(|k| 0.5 * (ring[k] - ring[0]).cross(&(ring[k + 1] - ring[0])).norm())
            .collect();
        let total: f64 = tri_areas.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let start = cloud.len();
        for _ in 0..count {
            let mut pick = rng.random_range(0.0..total);
            let mut k = 0;
            while k + 1 < tri_areas.len() && pick > tri_areas[k] {
                pick -= tri_areas[k];
                k += 1;
            }
            let (a, b, c) = (ring[0], ring[k + 1], ring[k + 2]);
            let r1: f64 = rng.random_range(0.0f64..1.0);
            let r2: f64 = rng.random_range(0.0f64..1.0);
            let s = r1.sqrt();
            cloud
                .points
                .push(a + (b - a) * (s * (1.0 - r2)) + (c - a) * (s * r2));
        }
        segments.push(PlanarSegment::new(
            &cloud,
            plane,
            (start..cloud.len()).collect(),
            0.01,
        )?);
    }
    Ok((cloud, segments))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_is_watertight_unit_volume() {
        let mesh = cube_mesh(1.0);
        mesh.validate().unwrap();
        assert_eq!(mesh.edge_census().boundary_edges, 0);
        assert!((mesh.signed_volume() - 1.0).abs() < 1e-12);
        assert_eq!(mesh.faces.len(), 6);
    }

    #[test]
    fn l_shape_is_watertight_with_eight_faces() {
        let mesh = l_shape_mesh();
        mesh.validate().unwrap();
        assert_eq!(mesh.edge_census().boundary_edges, 0);
        assert_eq!(mesh.faces.len(), 8);
        // Volume: (1 - 0.25) * 0.6.
        assert!((mesh.signed_volume() - 0.45).abs() < 1e-12);
    }

    #[test]
    fn buildings_are_watertight_and_complex_enough() {
        for seed in 0..5u64 {
            let mesh = building_mesh(seed, 12).unwrap();
            mesh.validate().unwrap();
            let census = mesh.edge_census();
            assert_eq!(census.boundary_edges, 0, "seed {seed}");
            assert!(mesh.signed_volume() > 0.01, "seed {seed}");
            assert!(distinct_plane_count(&mesh) >= 12, "seed {seed}");
        }
    }

    #[test]
    fn building_generation_is_deterministic() {
        let a = building_mesh(7, 12).unwrap();
        let b = building_mesh(7, 12).unwrap();
        assert_eq!(a.faces, b.faces);
        for (x, y) in a.vertices.iter().zip(&b.vertices) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn segments_from_mesh_cover_faces() {
        let mesh = cube_mesh(1.0);
        let (cloud, segments) = segments_from_mesh(&mesh, 500.0, 3).unwrap();
        assert_eq!(segments.len(), 6);
        assert!(cloud.len() >= 6 * 40);
        for seg in &segments {
            assert!(seg.residual_rms(&cloud) < 1e-9);
        }
    }
}
