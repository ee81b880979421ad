//! Arbitrary-sided polygonal meshes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Aabb, Point3, Polygon, Vector3};
use crate::error::{Error, Result};

/// A polygonal surface: vertices plus faces as outward-oriented index rings.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PolyMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<Vec<usize>>,
}

/// Edge bookkeeping of a mesh: for the closure test, an interior edge is one
/// whose two traversal directions appear equally often.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EdgeCensus {
    /// Undirected edges whose directed counts do not cancel.
    pub boundary_edges: usize,
    /// Undirected edges incident to more than two faces.
    pub nonmanifold_edges: usize,
    /// Total distinct undirected edges.
    pub edges: usize,
}

impl PolyMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<Vec<usize>>) -> PolyMesh {
        PolyMesh { vertices, faces }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Validate index ranges, finiteness and non-degenerate faces.
    pub fn validate(&self) -> Result<()> {
        for v in &self.vertices {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::Geometry("non-finite mesh vertex".into()));
            }
        }
        for (fi, face) in self.faces.iter().enumerate() {
            if face.len() < 3 {
                return Err(Error::Geometry(format!("face {fi} has <3 vertices")));
            }
            for &i in face {
                if i >= self.vertices.len() {
                    return Err(Error::Geometry(format!(
                        "face {fi} references vertex {i} out of {}",
                        self.vertices.len()
                    )));
                }
            }
            if self.face_polygon(fi).area() <= 1e-12 {
                return Err(Error::Geometry(format!("face {fi} is degenerate")));
            }
        }
        Ok(())
    }

    pub fn face_polygon(&self, face: usize) -> Polygon {
        Polygon::new(self.faces[face].iter().map(|&i| self.vertices[i]).collect())
    }

    pub fn bbox(&self) -> Result<Aabb> {
        Aabb::from_points(self.vertices.iter())
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_polygon(f).area()).sum()
    }

    /// Fan triangulation of every face, as vertex index triples tagged with
    /// the source face.
    pub fn triangles(&self) -> Vec<([usize; 3], usize)> {
        let mut tris = Vec::new();
        for (fi, face) in self.faces.iter().enumerate() {
            for k in 1..face.len().saturating_sub(1) {
                tris.push(([face[0], face[k], face[k + 1]], fi));
            }
        }
        tris
    }

    /// Signed enclosed volume by the divergence theorem; positive for
    /// outward-oriented closed surfaces.
    pub fn signed_volume(&self) -> f64 {
        let mut v6 = 0.0;
        for (tri, _) in self.triangles() {
            let a = self.vertices[tri[0]].coords;
            let b = self.vertices[tri[1]].coords;
            let c = self.vertices[tri[2]].coords;
            v6 += a.cross(&b).dot(&c);
        }
        v6 / 6.0
    }

    /// Count boundary and non-manifold edges from face connectivity alone.
    pub fn edge_census(&self) -> EdgeCensus {
        let mut directed: HashMap<(usize, usize), i64> = HashMap::new();
        let mut incident: HashMap<(usize, usize), usize> = HashMap::new();
        for face in &self.faces {
            for k in 0..face.len() {
                let a = face[k];
                let b = face[(k + 1) % face.len()];
                if a == b {
                    continue;
                }
                let key = (a.min(b), a.max(b));
                *incident.entry(key).or_insert(0) += 1;
                *directed.entry(key).or_insert(0) += if a < b { 1 } else { -1 };
            }
        }
        let boundary_edges = directed.values().filter(|&&c| c != 0).count();
        let nonmanifold_edges = incident.values().filter(|&&c| c > 2).count();
        EdgeCensus {
            boundary_edges,
            nonmanifold_edges,
            edges: incident.len(),
        }
    }

    /// Translate and uniformly scale in place.
    pub fn transform(&mut self, translate: Vector3, scale: f64) {
        for v in &mut self.vertices {
            *v = Point3::from((v.coords + translate) * scale);
        }
    }

    /// Drop vertices not referenced by any face, remapping indices.
    pub fn compact(&mut self) {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &i in f {
                used[i] = true;
            }
        }
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            if used[i] {
                remap[i] = vertices.len();
                vertices.push(*v);
            }
        }
        for f in &mut self.faces {
            for i in f.iter_mut() {
                *i = remap[*i];
            }
        }
        self.vertices = vertices;
    }
}
