//! Floating-point geometry kernel: planes, polygons, convex cells, meshes.
//!
//! All scenes are assumed normalized to roughly the unit box, so a single
//! global tolerance set applies: [`ON_EPS`] for on-plane classification,
//! [`VOLUME_EPS`] / [`AREA_EPS`] for degeneracy cuts. Exact predicates are a
//! non-goal.

mod accel;
mod cell;
mod mesh;
mod mesh_io;
mod polygon;

pub use accel::{closest_point_on_triangle, TriAccel};
pub use cell::{CellFace, ConvexCell, SplitResult};
pub use mesh::{EdgeCensus, PolyMesh};
pub use mesh_io::{read_mesh, write_mesh, write_mesh_ply_ascii, write_mesh_ply_binary, MeshFormat};
pub use polygon::Polygon;

/// Read just the vertex element of a PLY file (point-cloud usage).
pub fn read_ply_points(path: &std::path::Path) -> Result<Vec<Point3>> {
    let (vertices, _faces) = mesh_io::read_ply(path)?;
    Ok(vertices)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// On-plane classification band, in scene units (scenes live in the unit box).
pub const ON_EPS: f64 = 1e-8;

/// Cells with volume below this are slivers and are never created.
pub const VOLUME_EPS: f64 = 1e-12;

/// Polygons with area below this are degenerate and dropped.
pub const AREA_EPS: f64 = 1e-12;

/// Side of a plane, within a tolerance band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Positive,
    Negative,
    On,
}

/// An oriented plane `{p : normal · p = offset}` with unit normal, stored in
/// canonical form: the first nonzero normal component (x, then y, then z) is
/// positive, so `(n, d)` and `(-n, -d)` map to the same value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    normal: Vector3,
    offset: f64,
}

impl Plane {
    /// Build a plane from a (not necessarily unit) normal and offset,
    /// normalizing and canonicalizing.
    pub fn new(normal: Vector3, offset: f64) -> Result<Plane> {
        if !normal.iter().all(|c| c.is_finite()) || !offset.is_finite() {
            return Err(Error::Geometry("non-finite plane coefficients".into()));
        }
        let len = normal.norm();
        if len < 1e-12 {
            return Err(Error::Geometry("zero-length plane normal".into()));
        }
        let mut plane = Plane {
            normal: normal / len,
            offset: offset / len,
        };
        plane.canonicalize();
        Ok(plane)
    }

    /// Plane through `point` with the given normal direction.
    pub fn from_point_normal(point: Point3, normal: Vector3) -> Result<Plane> {
        let len = normal.norm();
        if len < 1e-12 {
            return Err(Error::Geometry("zero-length plane normal".into()));
        }
        let unit = normal / len;
        Plane::new(unit, unit.dot(&point.coords))
    }

    fn canonicalize(&mut self) {
        let flip = if self.normal.x.abs() > 1e-12 {
            self.normal.x < 0.0
        } else if self.normal.y.abs() > 1e-12 {
            self.normal.y < 0.0
        } else {
            self.normal.z < 0.0
        };
        if flip {
            self.normal = -self.normal;
            self.offset = -self.offset;
        }
    }

    pub fn normal(&self) -> Vector3 {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed distance of `p` from the plane (positive on the normal side).
    #[inline]
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    /// Classify a point against the plane with tolerance band `eps`.
    ///
    /// Panics on non-finite input; inputs are validated at I/O boundaries.
    #[inline]
    pub fn classify(&self, p: &Point3, eps: f64) -> Side {
        debug_assert!(eps > 0.0);
        let d: f64 = self.signed_distance(p);
        assert!(d.is_finite(), "non-finite point in plane classification");
        if d > eps {
            Side::Positive
        } else if d < -eps {
            Side::Negative
        } else {
            Side::On
        }
    }

    /// Undirected angle between the two plane normals, in `[0, pi/2]`.
    pub fn angle_between(&self, other: &Plane) -> f64 {
        self.normal.dot(&other.normal).abs().min(1.0).acos()
    }

    /// Verticality `1 - |n_z|`: 1 for wall-like planes, 0 for horizontal.
    pub fn verticality(&self) -> f64 {
        1.0 - self.normal.z.abs()
    }

    /// An orthonormal basis (u, v) of the plane, with u x v = normal.
    pub fn basis(&self) -> (Vector3, Vector3) {
        let n = self.normal;
        let helper = if n.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let u = n.cross(&helper).normalize();
        let v = n.cross(&u);
        (u, v)
    }

    /// Two planes are near-identical when their normals agree within
    /// `angle_tol` (radians, orientation-sensitive) and offsets within
    /// `offset_tol`. Small angles are measured through the cross product;
    /// acos of a dot product loses eight digits near zero angle.
    pub fn approx_eq(&self, other: &Plane, angle_tol: f64, offset_tol: f64) -> bool {
        self.normal.dot(&other.normal) > 0.0
            && self.normal.cross(&other.normal).norm() < angle_tol
            && (self.offset - other.offset).abs() < offset_tol
    }
}

/// Axis-aligned bounding box with strictly positive extent on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

/// The six walls of a bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WallId {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl WallId {
    pub const ALL: [WallId; 6] = [
        WallId::XMin,
        WallId::XMax,
        WallId::YMin,
        WallId::YMax,
        WallId::ZMin,
        WallId::ZMax,
    ];

    /// Outward normal of the wall (pointing out of the box).
    pub fn outward(&self) -> Vector3 {
        match self {
            WallId::XMin => -Vector3::x(),
            WallId::XMax => Vector3::x(),
            WallId::YMin => -Vector3::y(),
            WallId::YMax => Vector3::y(),
            WallId::ZMin => -Vector3::z(),
            WallId::ZMax => Vector3::z(),
        }
    }

    pub fn bit(&self) -> u8 {
        match self {
            WallId::XMin => 1,
            WallId::XMax => 2,
            WallId::YMin => 4,
            WallId::YMax => 8,
            WallId::ZMin => 16,
            WallId::ZMax => 32,
        }
    }
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Result<Aabb> {
        if !(min.x < max.x && min.y < max.y && min.z < max.z) {
            return Err(Error::Geometry(format!(
                "degenerate AABB: min {min:?} max {max:?}"
            )));
        }
        Ok(Aabb { min, max })
    }

    /// Tight box of a nonempty point set; degenerate axes get a small pad so
    /// the extent is always positive.
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Result<Aabb> {
        let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut count = 0usize;
        for p in points {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::Geometry("AABB of empty point set".into()));
        }
        let largest = (0..3).map(|a| max[a] - min[a]).fold(0.0, f64::max);
        let pad = (largest * 1e-9).max(1e-12);
        for a in 0..3 {
            if max[a] - min[a] < pad {
                min[a] -= pad;
                max[a] += pad;
            }
        }
        Aabb::new(min, max)
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extents(&self) -> Vector3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extents().norm()
    }

    /// Longest side length.
    pub fn largest_extent(&self) -> f64 {
        let e = self.extents();
        e.x.max(e.y).max(e.z)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extents();
        e.x * e.y * e.z
    }

    /// Grown by `fraction` of each axis extent on both sides.
    pub fn padded(&self, fraction: f64) -> Aabb {
        let e = self.extents() * fraction;
        Aabb {
            min: self.min - e,
            max: self.max + e,
        }
    }

    /// Grown by an absolute margin on all sides.
    pub fn padded_abs(&self, margin: f64) -> Aabb {
        let m = Vector3::new(margin, margin, margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|a| self.min[a] <= other.max[a] && other.min[a] <= self.max[a])
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: Point3::new(
                self.min.x.min(other.min.x),
                self.min.y.min(other.min.y),
                self.min.z.min(other.min.z),
            ),
            max: Point3::new(
                self.max.x.max(other.max.x),
                self.max.y.max(other.max.y),
                self.max.z.max(other.max.z),
            ),
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// The plane of one wall, canonicalized.
    pub fn wall_plane(&self, wall: WallId) -> Plane {
        let (axis, value) = match wall {
            WallId::XMin => (0, self.min.x),
            WallId::XMax => (0, self.max.x),
            WallId::YMin => (1, self.min.y),
            WallId::YMax => (1, self.max.y),
            WallId::ZMin => (2, self.min.z),
            WallId::ZMax => (2, self.max.z),
        };
        let mut n = Vector3::zeros();
        n[axis] = 1.0;
        Plane::new(n, value).expect("axis plane is always valid")
    }

    /// The eight corner points.
    pub fn corners(&self) -> [Point3; 8] {
        let (lo, hi) = (self.min, self.max);
        [
            Point3::new(lo.x, lo.y, lo.z),
            Point3::new(hi.x, lo.y, lo.z),
            Point3::new(hi.x, hi.y, lo.z),
            Point3::new(lo.x, hi.y, lo.z),
            Point3::new(lo.x, lo.y, hi.z),
            Point3::new(hi.x, lo.y, hi.z),
            Point3::new(hi.x, hi.y, hi.z),
            Point3::new(lo.x, hi.y, hi.z),
        ]
    }
}
