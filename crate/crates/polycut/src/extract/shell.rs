//! Outer-shell extraction and coplanar face merging.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::complex::CellComplex;
use crate::error::{Error, Result};
use crate::geom::{Plane, Point3, PolyMesh, Polygon, WallId};

use super::Labeling;

/// Where a shell face came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaceProvenance {
    /// Shared facet between an interior and an exterior cell.
    Between { interior: usize, exterior: usize },
    /// Boundary facet of an interior cell on a bounds wall.
    Wall { interior: usize, wall: WallId },
}

/// The boundary of the interior-cell union. Closed by construction: every
/// facet of an interior cell is either shared with another interior cell
/// (not emitted), shared with an exterior cell (emitted), or on a bounds
/// wall (emitted).
#[derive(Debug, Clone)]
pub struct Shell {
    pub mesh: PolyMesh,
    pub provenance: Vec<FaceProvenance>,
    /// Total volume of the interior cells (the enclosed volume).
    pub interior_volume: f64,
    pub warnings: Vec<String>,
}

/// Snap tolerance for identifying logically-equal vertices produced by
/// different clipping chains.
const SNAP_TOL: f64 = 3e-9;

/// Extract the outer surface of the union of interior-labeled cells,
/// oriented outward (interior to exterior).
pub fn extract_shell(complex: &CellComplex, labeling: &Labeling) -> Result<Shell> {
    if labeling.len() != complex.len() {
        return Err(Error::Extraction(format!(
            "labeling of {} for {} cells",
            labeling.len(),
            complex.len()
        )));
    }
    let mut warnings = Vec::new();
    if labeling.interior_count() == 0 {
        warnings.push("no interior cells: empty shell".to_string());
        return Ok(Shell {
            mesh: PolyMesh::default(),
            provenance: Vec::new(),
            interior_volume: 0.0,
            warnings,
        });
    }

    let mut polygons: Vec<(Polygon, FaceProvenance)> = Vec::new();
    for adj in complex.adjacency() {
        let (in_a, in_b) = (labeling.is_in(adj.a), labeling.is_in(adj.b));
        if in_a == in_b {
            continue;
        }
        let (interior, exterior) = if in_a { (adj.a, adj.b) } else { (adj.b, adj.a) };
        let outward = {
            let toward_exterior = adj
                .plane
                .signed_distance(&complex.cell(exterior).centroid());
            if toward_exterior > 0.0 {
                adj.plane.normal()
            } else {
                -adj.plane.normal()
            }
        };
        polygons.push((
            adj.face.oriented_along(&outward),
            FaceProvenance::Between { interior, exterior },
        ));
    }
    for (cell_idx, cell) in complex.cells().iter().enumerate() {
        if !labeling.is_in(cell_idx) {
            continue;
        }
        let flags = complex.boundary_flags(cell_idx);
        for wall in WallId::ALL {
            if flags & wall.bit() == 0 {
                continue;
            }
            let wall_plane = complex.bounds.wall_plane(wall);
            for face in cell.faces() {
                if face.plane.approx_eq(&wall_plane, 1e-9, 1e-9) {
                    polygons.push((
                        face.ring.oriented_along(&wall.outward()),
                        FaceProvenance::Wall {
                            interior: cell_idx,
                            wall,
                        },
                    ));
                }
            }
        }
    }

    let (mesh, provenance) = index_polygons(polygons);
    let interior_volume = (0..complex.len())
        .filter(|&i| labeling.is_in(i))
        .map(|i| complex.cell(i).volume())
        .sum();
    let census = mesh.edge_census();
    if census.boundary_edges > 0 {
        warnings.push(format!(
            "shell has {} unpaired edges after conforming",
            census.boundary_edges
        ));
    }
    Ok(Shell {
        mesh,
        provenance,
        interior_volume,
        warnings,
    })
}

/// Intern polygons into a shared vertex pool and make face rings
/// edge-conforming (insert vertices lying on edges, so T-junctions pair up).
fn index_polygons(polygons: Vec<(Polygon, FaceProvenance)>) -> (PolyMesh, Vec<FaceProvenance>) {
    let mut pool = VertexPool::new(SNAP_TOL);
    let mut faces: Vec<Vec<usize>> = Vec::with_capacity(polygons.len());
    let mut provenance = Vec::with_capacity(polygons.len());
    for (polygon, from) in polygons {
        let mut ring: Vec<usize> = polygon.vertices.iter().map(|p| pool.intern(*p)).collect();
        ring.dedup();
        while ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            continue;
        }
        faces.push(ring);
        provenance.push(from);
    }
    let vertices = pool.points;

    // Conforming pass: subdivide edges at vertices lying on them.
    for ring in &mut faces {
        let mut out: Vec<usize> = Vec::with_capacity(ring.len());
        for k in 0..ring.len() {
            let ia = ring[k];
            let ib = ring[(k + 1) % ring.len()];
            out.push(ia);
            let a = vertices[ia];
            let b = vertices[ib];
            let ab = b - a;
            let len2 = ab.norm_squared();
            if len2 < SNAP_TOL * SNAP_TOL {
                continue;
            }
            let mut on_edge: Vec<(f64, usize)> = Vec::new();
            for (vi, v) in vertices.iter().enumerate() {
                if vi == ia || vi == ib {
                    continue;
                }
                let t = (v - a).dot(&ab) / len2;
                if t <= 1e-9 || t >= 1.0 - 1e-9 {
                    continue;
                }
                let foot = a + ab * t;
                if (v - foot).norm() <= SNAP_TOL {
                    on_edge.push((t, vi));
                }
            }
            on_edge.sort_by(|x, y| x.0.total_cmp(&y.0));
            out.extend(on_edge.into_iter().map(|(_, vi)| vi));
        }
        out.dedup();
        while out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        *ring = out;
    }

    let mut mesh = PolyMesh::new(vertices, faces);
    mesh.compact();
    (mesh, provenance)
}

struct VertexPool {
    grid: HashMap<(i64, i64, i64), Vec<usize>>,
    points: Vec<Point3>,
    tol: f64,
    cell: f64,
}

impl VertexPool {
    fn new(tol: f64) -> VertexPool {
        VertexPool {
            grid: HashMap::new(),
            points: Vec::new(),
            tol,
            cell: tol * 2.0,
        }
    }

    fn key(&self, p: &Point3) -> (i64, i64, i64) {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        )
    }

    fn intern(&mut self, p: Point3) -> usize {
        let (cx, cy, cz) = self.key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &i in bucket {
                            if (self.points[i] - p).norm() <= self.tol {
                                return i;
                            }
                        }
                    }
                }
            }
        }
        let i = self.points.len();
        self.points.push(p);
        self.grid.entry((cx, cy, cz)).or_default().push(i);
        i
    }
}

/// Results of the coplanar merge pass.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct MergeStats {
    pub merged_groups: usize,
    /// Groups left unmerged because their union has holes or pinch points.
    pub kept_groups: usize,
}

/// Merge edge-connected coplanar faces (same canonical plane and
/// orientation) into single arbitrary-sided polygons. Total area and
/// enclosed volume are preserved; groups whose union would have holes are
/// kept unmerged.
pub fn merge_coplanar(mesh: &PolyMesh) -> PolyMesh {
    merge_coplanar_with_stats(mesh).0
}

pub fn merge_coplanar_with_stats(mesh: &PolyMesh) -> (PolyMesh, MergeStats) {
    let mut stats = MergeStats::default();
    if mesh.faces.is_empty() {
        return (mesh.clone(), stats);
    }
    let face_count = mesh.faces.len();
    // Oriented plane of each face.
    let mut keys: Vec<Option<(Plane, bool)>> = Vec::with_capacity(face_count);
    for f in 0..face_count {
        let polygon = mesh.face_polygon(f);
        keys.push(polygon.plane().and_then(|plane| {
            polygon
                .normal()
                .map(|n| (plane, n.dot(&plane.normal()) > 0.0))
        }));
    }

    // Group faces by oriented plane.
    let mut group_of = vec![usize::MAX; face_count];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for f in 0..face_count {
        let Some((plane_f, sign_f)) = keys[f] else {
            continue;
        };
        if group_of[f] != usize::MAX {
            continue;
        }
        let gid = groups.len();
        let mut members = vec![f];
        group_of[f] = gid;
        for g in (f + 1)..face_count {
            if group_of[g] != usize::MAX {
                continue;
            }
            if let Some((plane_g, sign_g)) = keys[g] {
                if sign_f == sign_g && plane_f.approx_eq(&plane_g, 1e-6, 1e-8) {
                    group_of[g] = gid;
                    members.push(g);
                }
            }
        }
        groups.push(members);
    }

    let mut out_faces: Vec<Vec<usize>> = Vec::new();
    for members in groups {
        if members.len() == 1 {
            out_faces.push(mesh.faces[members[0]].clone());
            continue;
        }
        // Edge-connected components within the plane group.
        for component in edge_components(mesh, &members) {
            if component.len() == 1 {
                out_faces.push(mesh.faces[component[0]].clone());
                continue;
            }
            match merge_component(mesh, &component) {
                Some(ring) => {
                    out_faces.push(ring);
                    stats.merged_groups += 1;
                }
                None => {
                    stats.kept_groups += 1;
                    for &f in &component {
                        out_faces.push(mesh.faces[f].clone());
                    }
                }
            }
        }
    }

    let mut merged = PolyMesh::new(mesh.vertices.clone(), out_faces);
    remove_globally_collinear_vertices(&mut merged);
    merged.compact();
    (merged, stats)
}

fn edge_components(mesh: &PolyMesh, members: &[usize]) -> Vec<Vec<usize>> {
    let mut owner: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (mi, &f) in members.iter().enumerate() {
        let ring = &mesh.faces[f];
        for k in 0..ring.len() {
            let a = ring[k];
            let b = ring[(k + 1) % ring.len()];
            owner.entry((a.min(b), a.max(b))).or_default().push(mi);
        }
    }
    let mut parent: Vec<usize> = (0..members.len()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for users in owner.values() {
        for w in users.windows(2) {
            let (ra, rb) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut buckets: HashMap<usize, Vec<usize>> = HashMap::new();
    for mi in 0..members.len() {
        let root = find(&mut parent, mi);
        buckets.entry(root).or_default().push(members[mi]);
    }
    let mut out: Vec<Vec<usize>> = buckets.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Union of a connected coplanar face set: cancel opposing directed edges,
/// then chain the single remaining boundary loop. None when the boundary is
/// not one simple loop (holes or pinch vertices).
fn merge_component(mesh: &PolyMesh, component: &[usize]) -> Option<Vec<usize>> {
    let mut net: HashMap<(usize, usize), i64> = HashMap::new();
    for &f in component {
        let ring = &mesh.faces[f];
        for k in 0..ring.len() {
            let a = ring[k];
            let b = ring[(k + 1) % ring.len()];
            let entry = net.entry((a.min(b), a.max(b))).or_insert(0);
            *entry += if a < b { 1 } else { -1 };
        }
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut boundary_edges = 0usize;
    for ((lo, hi), count) in net {
        match count {
            0 => {}
            1 => {
                if next.insert(lo, hi).is_some() {
                    return None; // pinch vertex
                }
                boundary_edges += 1;
            }
            -1 => {
                if next.insert(hi, lo).is_some() {
                    return None;
                }
                boundary_edges += 1;
            }
            _ => return None, // repeated directed edge
        }
    }
    if boundary_edges < 3 {
        return None;
    }
    let start = *next.keys().min()?;
    let mut ring = vec![start];
    let mut cursor = *next.get(&start)?;
    while cursor != start {
        ring.push(cursor);
        cursor = *next.get(&cursor)?;
        if ring.len() > boundary_edges {
            return None;
        }
    }
    // A second loop would mean a hole.
    (ring.len() == boundary_edges).then_some(ring)
}

/// Drop vertices that are collinear in every face that uses them.
fn remove_globally_collinear_vertices(mesh: &mut PolyMesh) {
    loop {
        let mut removable = vec![true; mesh.vertices.len()];
        let mut used = vec![false; mesh.vertices.len()];
        for ring in &mesh.faces {
            let n = ring.len();
            for k in 0..n {
                let v = ring[k];
                used[v] = true;
                if n <= 3 {
                    removable[v] = false;
                    continue;
                }
                let prev = mesh.vertices[ring[(k + n - 1) % n]];
                let here = mesh.vertices[v];
                let next = mesh.vertices[ring[(k + 1) % n]];
                let seg = next - prev;
                let len2 = seg.norm_squared();
                if len2 < 1e-24 {
                    removable[v] = false;
                    continue;
                }
                let t = (here - prev).dot(&seg) / len2;
                let foot = prev + seg * t;
                if !(0.0..=1.0).contains(&t) || (here - foot).norm() > 1e-9 {
                    removable[v] = false;
                }
            }
        }
        let any = removable
            .iter()
            .zip(&used)
            .any(|(&r, &u)| r && u);
        if !any {
            return;
        }
        for ring in &mut mesh.faces {
            ring.retain(|&v| !removable[v]);
        }
        mesh.faces.retain(|r| r.len() >= 3);
    }
}
