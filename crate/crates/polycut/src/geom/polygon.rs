//! Planar polygons stored as vertex rings.

use serde::{Deserialize, Serialize};

use super::{Plane, Point3, Side, Vector3, AREA_EPS};

/// A planar polygon given by its vertex ring. Orientation is the ring order;
/// the area vector follows the right-hand rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point3>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point3>) -> Polygon {
        Polygon { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Newell area vector: half the sum of successive cross products. Its
    /// norm is the polygon area, its direction the ring normal.
    pub fn area_vector(&self) -> Vector3 {
        let n = self.vertices.len();
        if n < 3 {
            return Vector3::zeros();
        }
        let mut acc = Vector3::zeros();
        for i in 0..n {
            let a = &self.vertices[i];
            let b = &self.vertices[(i + 1) % n];
            acc += a.coords.cross(&b.coords);
        }
        acc * 0.5
    }

    /// Nonnegative polygon area; 0 for rings with fewer than 3 vertices.
    pub fn area(&self) -> f64 {
        self.area_vector().norm()
    }

    /// Unit ring normal, or None for degenerate rings.
    pub fn normal(&self) -> Option<Vector3> {
        let av = self.area_vector();
        let n = av.norm();
        if n < AREA_EPS {
            None
        } else {
            Some(av / n)
        }
    }

    /// Vertex average. For convex rings this lies inside the polygon.
    pub fn vertex_mean(&self) -> Point3 {
        let mut acc = Vector3::zeros();
        for v in &self.vertices {
            acc += v.coords;
        }
        Point3::from(acc / self.vertices.len() as f64)
    }

    /// Supporting plane in canonical form, or None when degenerate.
    pub fn plane(&self) -> Option<Plane> {
        let normal = self.normal()?;
        Plane::from_point_normal(self.vertex_mean(), normal).ok()
    }

    /// Reversed ring (flips orientation).
    pub fn reversed(&self) -> Polygon {
        let mut v = self.vertices.clone();
        v.reverse();
        Polygon::new(v)
    }

    /// Ring oriented so its normal points along `direction`.
    pub fn oriented_along(&self, direction: &Vector3) -> Polygon {
        match self.normal() {
            Some(n) if n.dot(direction) < 0.0 => self.reversed(),
            _ => self.clone(),
        }
    }

    /// Clip the ring against a halfspace, keeping the part on `keep` side of
    /// the plane (`keep` must be Positive or Negative). On-vertices are kept.
    /// Returns an empty polygon when nothing remains.
    pub fn clip_halfspace(&self, plane: &Plane, keep: Side, eps: f64) -> Polygon {
        debug_assert!(keep != Side::On);
        let n = self.vertices.len();
        if n == 0 {
            return Polygon::new(Vec::new());
        }
        let keeps = |s: Side| s == keep || s == Side::On;
        let mut out: Vec<Point3> = Vec::with_capacity(n + 2);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let sa = plane.classify(&a, eps);
            let sb = plane.classify(&b, eps);
            if keeps(sa) {
                out.push(a);
            }
            // Crossing edge: both strictly off-plane on opposite sides.
            if sa != Side::On && sb != Side::On && sa != sb {
                let da = plane.signed_distance(&a);
                let db = plane.signed_distance(&b);
                let t = da / (da - db);
                out.push(a + (b - a) * t);
            }
        }
        Polygon::new(out)
    }

    /// Drop consecutive duplicate vertices (within `tol`).
    pub fn dedup(&self, tol: f64) -> Polygon {
        let mut v: Vec<Point3> = Vec::with_capacity(self.vertices.len());
        for p in &self.vertices {
            if v.last().is_none_or(|q| (p - q).norm() > tol) {
                v.push(*p);
            }
        }
        if v.len() >= 2 && (v[0] - v[v.len() - 1]).norm() <= tol {
            v.pop();
        }
        Polygon::new(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polygon {
        Polygon::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ])
    }

    #[test]
    fn unit_square_area() {
        assert!((square().area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_ring_area_is_zero() {
        let line = Polygon::new(vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)]);
        assert_eq!(line.area(), 0.0);
        assert!(line.normal().is_none());
    }

    #[test]
    fn regular_hexagon_area() {
        // side 1, closed form 3*sqrt(3)/2
        let ring = (0..6)
            .map(|k| {
                let a = std::f64::consts::PI / 3.0 * k as f64;
                Point3::new(a.cos(), a.sin(), 2.0)
            })
            .collect();
        let hex = Polygon::new(ring);
        let expected = 3.0 * 3.0f64.sqrt() / 2.0;
        assert!((hex.area() - expected).abs() < 1e-12);
    }

    #[test]
    fn clip_square_in_half() {
        let plane = Plane::new(Vector3::x(), 0.5).unwrap();
        let left = square().clip_halfspace(&plane, Side::Negative, 1e-9);
        assert!((left.area() - 0.5).abs() < 1e-12);
        let right = square().clip_halfspace(&plane, Side::Positive, 1e-9);
        assert!((right.area() - 0.5).abs() < 1e-12);
        // Parts tile the square.
        assert!((left.area() + right.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clip_misses_polygon() {
        let plane = Plane::new(Vector3::x(), 5.0).unwrap();
        let kept = square().clip_halfspace(&plane, Side::Negative, 1e-9);
        assert_eq!(kept.len(), 4);
        let gone = square().clip_halfspace(&plane, Side::Positive, 1e-9);
        assert_eq!(gone.area(), 0.0);
    }

    #[test]
    fn orientation_flip() {
        let sq = square();
        let n = sq.normal().unwrap();
        assert!((n - Vector3::z()).norm() < 1e-12);
        let flipped = sq.oriented_along(&-Vector3::z());
        assert!((flipped.normal().unwrap() + Vector3::z()).norm() < 1e-12);
        assert!((flipped.area() - sq.area()).abs() < 1e-15);
    }
}
