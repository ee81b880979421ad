//! BVH over a triangulated mesh: nearest-point queries and ray casting.

use super::{Point3, PolyMesh, Vector3};

#[derive(Debug, Clone)]
struct Triangle {
    a: Point3,
    b: Point3,
    c: Point3,
    face: usize,
}

#[derive(Debug, Clone)]
struct Node {
    min: Point3,
    max: Point3,
    // Leaf when count > 0: tris[start..start+count]. Otherwise children at
    // (left, left+1-based stored in `start`).
    start: usize,
    count: usize,
    left: usize,
    right: usize,
}

/// Bounding-volume hierarchy over the fan triangulation of a mesh.
#[derive(Debug, Clone)]
pub struct TriAccel {
    tris: Vec<Triangle>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

impl TriAccel {
    pub fn build(mesh: &PolyMesh) -> TriAccel {
        let mut tris: Vec<Triangle> = mesh
            .triangles()
            .into_iter()
            .map(|(t, face)| Triangle {
                a: mesh.vertices[t[0]],
                b: mesh.vertices[t[1]],
                c: mesh.vertices[t[2]],
                face,
            })
            .collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            let n = tris.len();
            build_node(&mut tris, 0, n, &mut nodes);
        }
        TriAccel { tris, nodes }
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// Distance to the closest point on the mesh, with the closest point and
    /// its source face.
    pub fn nearest(&self, p: &Point3) -> (f64, Point3, usize) {
        assert!(!self.tris.is_empty(), "nearest query on empty mesh");
        let mut best = (f64::INFINITY, Point3::origin(), 0usize);
        self.nearest_rec(0, p, &mut best);
        (best.0.sqrt(), best.1, best.2)
    }

    fn nearest_rec(&self, node: usize, p: &Point3, best: &mut (f64, Point3, usize)) {
        let n = &self.nodes[node];
        if aabb_dist2(&n.min, &n.max, p) >= best.0 {
            return;
        }
        if n.count > 0 {
            for t in &self.tris[n.start..n.start + n.count] {
                let q = closest_point_on_triangle(p, &t.a, &t.b, &t.c);
                let d2 = (p - q).norm_squared();
                if d2 < best.0 {
                    *best = (d2, q, t.face);
                }
            }
            return;
        }
        let dl = aabb_dist2(&self.nodes[n.left].min, &self.nodes[n.left].max, p);
        let dr = aabb_dist2(&self.nodes[n.right].min, &self.nodes[n.right].max, p);
        if dl <= dr {
            self.nearest_rec(n.left, p, best);
            self.nearest_rec(n.right, p, best);
        } else {
            self.nearest_rec(n.right, p, best);
            self.nearest_rec(n.left, p, best);
        }
    }

    /// First intersection along the ray, as (t, face), for t > t_min.
    pub fn raycast_first(&self, origin: &Point3, dir: &Vector3, t_min: f64) -> Option<(f64, usize)> {
        if self.tris.is_empty() {
            return None;
        }
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, usize)> = None;
        self.raycast_rec(0, origin, dir, &inv, t_min, &mut best);
        best
    }

    fn raycast_rec(
        &self,
        node: usize,
        origin: &Point3,
        dir: &Vector3,
        inv: &Vector3,
        t_min: f64,
        best: &mut Option<(f64, usize)>,
    ) {
        let n = &self.nodes[node];
        let t_max = best.map_or(f64::INFINITY, |(t, _)| t);
        if !ray_hits_aabb(&n.min, &n.max, origin, inv, t_min, t_max) {
            return;
        }
        if n.count > 0 {
            for t in &self.tris[n.start..n.start + n.count] {
                if let Some(hit) = ray_triangle(origin, dir, &t.a, &t.b, &t.c) {
                    if hit > t_min && best.is_none_or(|(bt, _)| hit < bt) {
                        *best = Some((hit, t.face));
                    }
                }
            }
            return;
        }
        self.raycast_rec(n.left, origin, dir, inv, t_min, best);
        self.raycast_rec(n.right, origin, dir, inv, t_min, best);
    }

    /// Number of triangle crossings along the ray with t > t_min
    /// (for inside/outside parity tests).
    pub fn ray_crossings(&self, origin: &Point3, dir: &Vector3, t_min: f64) -> usize {
        if self.tris.is_empty() {
            return 0;
        }
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut count = 0usize;
        self.crossings_rec(0, origin, dir, &inv, t_min, &mut count);
        count
    }

    fn crossings_rec(
        &self,
        node: usize,
        origin: &Point3,
        dir: &Vector3,
        inv: &Vector3,
        t_min: f64,
        count: &mut usize,
    ) {
        let n = &self.nodes[node];
        if !ray_hits_aabb(&n.min, &n.max, origin, inv, t_min, f64::INFINITY) {
            return;
        }
        if n.count > 0 {
            for t in &self.tris[n.start..n.start + n.count] {
                if let Some(hit) = ray_triangle(origin, dir, &t.a, &t.b, &t.c) {
                    if hit > t_min {
                        *count += 1;
                    }
                }
            }
            return;
        }
        self.crossings_rec(n.left, origin, dir, inv, t_min, count);
        self.crossings_rec(n.right, origin, dir, inv, t_min, count);
    }
}

fn build_node(tris: &mut [Triangle], start: usize, count: usize, nodes: &mut Vec<Node>) -> usize {
    let slice = &tris[start..start + count];
    let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut max = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for t in slice {
        for p in [&t.a, &t.b, &t.c] {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
    }
    let id = nodes.len();
    nodes.push(Node {
        min,
        max,
        start,
        count,
        left: 0,
        right: 0,
    });
    if count <= LEAF_SIZE {
        return id;
    }
    // Median split along the longest centroid axis.
    let ext = max - min;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = count / 2;
    tris[start..start + count].select_nth_unstable_by(mid, |p, q| {
        let cp = p.a[axis] + p.b[axis] + p.c[axis];
        let cq = q.a[axis] + q.b[axis] + q.c[axis];
        cp.total_cmp(&cq)
    });
    let left = build_node(tris, start, mid, nodes);
    let right = build_node(tris, start + mid, count - mid, nodes);
    nodes[id].count = 0;
    nodes[id].left = left;
    nodes[id].right = right;
    id
}

fn aabb_dist2(min: &Point3, max: &Point3, p: &Point3) -> f64 {
    let mut d2 = 0.0;
    for a in 0..3 {
        let v = if p[a] < min[a] {
            min[a] - p[a]
        } else if p[a] > max[a] {
            p[a] - max[a]
        } else {
            0.0
        };
        d2 += v * v;
    }
    d2
}

fn ray_hits_aabb(
    min: &Point3,
    max: &Point3,
    origin: &Point3,
    inv: &Vector3,
    t_min: f64,
    t_max: f64,
) -> bool {
    let mut t0 = t_min;
    let mut t1 = t_max;
    for a in 0..3 {
        let mut near = (min[a] - origin[a]) * inv[a];
        let mut far = (max[a] - origin[a]) * inv[a];
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Moller-Trumbore, returning the ray parameter of the hit.
fn ray_triangle(origin: &Point3, dir: &Vector3, a: &Point3, b: &Point3, c: &Point3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv_det;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    Some(e2.dot(&qvec) * inv_det)
}

/// Closest point on a triangle (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[cfg(test)]
mod tests {
    use super::super::mesh::test_meshes::boxmesh;
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_on_cube() {
        let mesh = boxmesh(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let accel = TriAccel::build(&mesh);
        let (d, q, _) = accel.nearest(&Point3::new(0.5, 0.5, 2.0));
        assert!((d - 1.0).abs() < 1e-12);
        assert!((q - Point3::new(0.5, 0.5, 1.0)).norm() < 1e-12);
        let (d, _, _) = accel.nearest(&Point3::new(0.5, 0.5, 0.5));
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nearest_matches_brute_force() {
        let mesh = boxmesh(Point3::new(-0.3, -0.6, -0.2), Point3::new(0.8, 0.4, 1.1));
        let accel = TriAccel::build(&mesh);
        let tris = mesh.triangles();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let p = Point3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let brute = tris
                .iter()
                .map(|(t, _)| {
                    let q = closest_point_on_triangle(
                        &p,
                        &mesh.vertices[t[0]],
                        &mesh.vertices[t[1]],
                        &mesh.vertices[t[2]],
                    );
                    (p - q).norm()
                })
                .fold(f64::INFINITY, f64::min);
            let (d, _, _) = accel.nearest(&p);
            assert!((d - brute).abs() < 1e-12, "bvh {} vs brute {}", d, brute);
        }
    }

    #[test]
    fn raycast_cube() {
        let mesh = boxmesh(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let accel = TriAccel::build(&mesh);
        let hit = accel
            .raycast_first(&Point3::new(0.5, 0.5, 3.0), &-Vector3::z(), 1e-12)
            .unwrap();
        assert!((hit.0 - 2.0).abs() < 1e-12);
        assert!(accel
            .raycast_first(&Point3::new(3.0, 3.0, 3.0), &Vector3::z(), 1e-12)
            .is_none());
        // Parity from inside vs outside (ray chosen off the face diagonals;
        // grazing rays are the caller's problem, solved by majority voting).
        let inside = accel.ray_crossings(&Point3::new(0.5, 0.37, 0.41), &Vector3::x(), 1e-12);
        assert_eq!(inside % 2, 1);
        let outside = accel.ray_crossings(&Point3::new(-1.0, 0.37, 0.41), &Vector3::x(), 1e-12);
        assert_eq!(outside % 2, 0);
    }
}
