//! Signed distance against a watertight reference mesh.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{Point3, PolyMesh, TriAccel, Vector3};

use super::SdfProvider;

/// Ground-truth signed distance: magnitude from a BVH nearest-face query,
/// sign from ray-crossing parity with a 3-ray majority vote (a single ray can
/// graze edges; three independent directions almost never all do).
pub struct MeshSdfOracle {
    accel: TriAccel,
    rays: [Vector3; 3],
}

impl MeshSdfOracle {
    /// Requires a closed mesh — the sign is undefined through boundary holes.
    pub fn new(mesh: &PolyMesh) -> Result<MeshSdfOracle> {
        mesh.validate()?;
        let census = mesh.edge_census();
        if census.boundary_edges > 0 {
            return Err(Error::Geometry(format!(
                "SDF oracle needs a closed mesh; {} boundary edges",
                census.boundary_edges
            )));
        }
        // Fixed pseudo-random ray directions, deterministic across runs.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5DF0_0D1E);
        let mut rays = [Vector3::zeros(); 3];
        for ray in &mut rays {
            *ray = loop {
                let v = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if v.norm() > 0.1 {
                    break v.normalize();
                }
            };
        }
        Ok(MeshSdfOracle {
            accel: TriAccel::build(mesh),
            rays,
        })
    }

    pub fn unsigned_distance(&self, p: &Point3) -> f64 {
        self.accel.nearest(p).0
    }

    /// True when `p` is inside by ray-parity majority.
    pub fn is_inside(&self, p: &Point3) -> bool {
        let mut votes = 0;
        for ray in &self.rays {
            if self.accel.ray_crossings(p, ray, 1e-12) % 2 == 1 {
                votes += 1;
            }
        }
        votes >= 2
    }

    pub fn accel(&self) -> &TriAccel {
        &self.accel
    }
}

impl SdfProvider for MeshSdfOracle {
    fn sdf(&self, p: &Point3) -> Result<f64> {
        let d = self.unsigned_distance(p);
        if d < 1e-12 {
            // On the surface: zero with positive sign.
            return Ok(0.0);
        }
        Ok(if self.is_inside(p) { d } else { -d })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Aabb, ConvexCell, Plane, SplitResult};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn boxmesh(min: Point3, max: Point3) -> PolyMesh {
        ConvexCell::from_aabb(&Aabb::new(min, max).unwrap()).to_mesh()
    }

    /// Generalized winding number (test oracle): sum of signed solid angles
    /// over the fan triangulation, divided by 4 pi.
    fn winding_number(mesh: &PolyMesh, p: &Point3) -> f64 {
        let mut total = 0.0;
        for (tri, _) in mesh.triangles() {
            let a = mesh.vertices[tri[0]] - p;
            let b = mesh.vertices[tri[1]] - p;
            let c = mesh.vertices[tri[2]] - p;
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let det = a.cross(&b).dot(&c);
            let denom = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * det.atan2(denom);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    #[test]
    fn cube_inradius_and_outside_distance() {
        let oracle = MeshSdfOracle::new(&boxmesh(Point3::origin(), Point3::new(1.0, 1.0, 1.0)))
            .unwrap();
        let center = oracle.sdf(&Point3::new(0.5, 0.5, 0.5)).unwrap();
        assert!((center - 0.5).abs() < 1e-12);
        let outside = oracle.sdf(&Point3::new(2.0, 0.5, 0.5)).unwrap();
        assert!((outside + 1.0).abs() < 1e-12);
    }

    #[test]
    fn on_surface_is_positive_zero() {
        let oracle = MeshSdfOracle::new(&boxmesh(Point3::origin(), Point3::new(1.0, 1.0, 1.0)))
            .unwrap();
        let d = oracle.sdf(&Point3::new(1.0, 0.5, 0.5)).unwrap();
        assert_eq!(d, 0.0);
        assert!(d.is_sign_positive());
    }

    #[test]
    fn open_mesh_rejected() {
        let mut mesh = boxmesh(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        mesh.faces.pop();
        assert!(MeshSdfOracle::new(&mesh).is_err());
    }

    /// Random watertight convex meshes (clipped cells): sign must agree with
    /// the winding-number oracle, magnitude with a brute-force face scan.
    #[test]
    fn random_probes_match_winding_and_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(301);
        let mut meshes = Vec::new();
        for k in 0..20 {
            let mut cell = ConvexCell::from_aabb(
                &Aabb::new(
                    Point3::new(-0.6, -0.5, -0.4),
                    Point3::new(0.5, 0.6, 0.45),
                )
                .unwrap(),
            );
            for _ in 0..(k % 5) {
                let n = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if n.norm() < 0.1 {
                    continue;
                }
                let plane = Plane::from_point_normal(
                    Point3::new(
                        rng.random_range(-0.2..0.2),
                        rng.random_range(-0.2..0.2),
                        rng.random_range(-0.2..0.2),
                    ),
                    n,
                )
                .unwrap();
                if let SplitResult::Both { pos, neg, .. } = cell.clip(&plane) {
                    cell = if rng.random_bool(0.5) { pos } else { neg };
                }
            }
            meshes.push(cell.to_mesh());
        }
        let mut agreements = 0usize;
        let mut probes = 0usize;
        for mesh in &meshes {
            let oracle = MeshSdfOracle::new(mesh).unwrap();
            let tris = mesh.triangles();
            for _ in 0..500 {
                let p = Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let d = oracle.sdf(&p).unwrap();
                let w = winding_number(mesh, &p);
                if d.abs() < 1e-9 || (w - 0.5).abs() < 1e-6 {
                    continue; // on-surface: sign is a convention
                }
                probes += 1;
                if (d > 0.0) == (w > 0.5) {
                    agreements += 1;
                }
                // Magnitude against brute-force min over all faces.
                let brute = tris
                    .iter()
                    .map(|(t, _)| {
                        let q = crate::geom::closest_point_on_triangle(
                            &p,
                            &mesh.vertices[t[0]],
                            &mesh.vertices[t[1]],
                            &mesh.vertices[t[2]],
                        );
                        (p - q).norm()
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!((d.abs() - brute).abs() < 1e-9);
            }
        }
        assert!(probes > 9000, "not enough off-surface probes: {probes}");
        assert_eq!(agreements, probes, "sign disagreement with winding oracle");
    }

    #[test]
    fn lipschitz_spot_check() {
        let oracle = MeshSdfOracle::new(&boxmesh(
            Point3::new(-0.5, -0.5, -0.5),
            Point3::new(0.5, 0.5, 0.5),
        ))
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..2000 {
            let p = Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let q = Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let dp = oracle.sdf(&p).unwrap();
            let dq = oracle.sdf(&q).unwrap();
            assert!((dp - dq).abs() <= (p - q).norm() + 1e-9);
        }
    }
}
