//! Seeded RANSAC plane detection with connectivity filtering.
//!
//! Largest consensus plane first, inliers removed between rounds. Candidate
//! scoring runs on a fixed subsample and parallelizes over per-candidate RNG
//! streams, so results are bit-reproducible for a fixed seed. Detected planes
//! are split into connected components (neighbor radius three times the
//! inlier distance) so opposite walls on the same infinite plane become
//! distinct segments.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{Plane, Point3};

use super::{fit_plane_pca, PlanarSegment, RansacParams};

const SCORE_SUBSAMPLE: usize = 4096;
const SCORE_CHUNK: usize = 256;
const REFIT_ROUNDS: usize = 2;

/// Detect planar segments by RANSAC. Returns an empty list (not an error)
/// when no plane reaches `min_support`.
pub fn detect_planes(cloud: &PointCloud, params: &RansacParams) -> Result<Vec<PlanarSegment>> {
    params.validate()?;
    if cloud.len() < 3 * params.min_support {
        return Err(Error::Detection(format!(
            "point cloud too small: {} points for min_support {}",
            cloud.len(),
            params.min_support
        )));
    }

    let mut remaining: Vec<usize> = (0..cloud.len()).collect();
    let mut segments: Vec<PlanarSegment> = Vec::new();
    let mut round: u64 = 0;

    while remaining.len() >= params.min_support {
        let Some(plane) = best_consensus_plane(cloud, &remaining, params, round) else {
            break;
        };
        // Full inlier collection, a coarse refit, then trimmed refinement.
        let mut plane = plane;
        let mut inliers = collect_inliers(cloud, &remaining, &plane, params.inlier_distance);
        if inliers.len() < params.min_support {
            break;
        }
        for _ in 0..REFIT_ROUNDS {
            let pts: Vec<Point3> = inliers.iter().map(|&i| cloud.points[i]).collect();
            match fit_plane_pca(&pts) {
                Ok(refit)
                    if refit.normal().dot(&plane.normal()).abs() >= params.normal_consistency =>
                {
                    plane = refit;
                    inliers = collect_inliers(cloud, &remaining, &plane, params.inlier_distance);
                }
                _ => break,
            }
        }
        plane = trimmed_refit(cloud, &inliers, plane, params);
        inliers = collect_inliers(cloud, &remaining, &plane, params.inlier_distance);
        if inliers.len() < params.min_support {
            break;
        }

        // Connectivity radius: at least three inlier distances, but never
        // below the sampling density of the segment itself or sparse scans
        // fragment below the percolation threshold.
        let radius = (3.0 * params.inlier_distance).max(4.0 * median_nn_distance(cloud, &inliers));
        let components = connected_components(cloud, &inliers, radius);
        let mut kept_any = false;
        let mut taken: Vec<usize> = Vec::new();
        for comp in components {
            if comp.len() < params.min_support {
                continue;
            }
            let pts: Vec<Point3> = comp.iter().map(|&i| cloud.points[i]).collect();
            let comp_plane = match fit_plane_pca(&pts) {
                Ok(p) if p.normal().dot(&plane.normal()).abs() >= params.normal_consistency => {
                    trimmed_refit(cloud, &comp, p, params)
                }
                // Degenerate or inconsistent refit: keep the consensus plane.
                _ => plane,
            };
            taken.extend_from_slice(&comp);
            segments.push(PlanarSegment::new(
                cloud,
                comp_plane,
                comp,
                2.0 * params.inlier_distance,
            )?);
            kept_any = true;
        }
        if !kept_any {
            // The best remaining plane fragments below min_support; further
            // rounds would rediscover it forever.
            break;
        }
        taken.sort_unstable();
        remaining.retain(|i| taken.binary_search(i).is_err());
        round += 1;
    }
    Ok(segments)
}

/// Highest-consensus candidate plane over the remaining points, scored on a
/// deterministic subsample with adaptive early termination.
fn best_consensus_plane(
    cloud: &PointCloud,
    remaining: &[usize],
    params: &RansacParams,
    round: u64,
) -> Option<Plane> {
    let subsample: Vec<usize> = if remaining.len() > SCORE_SUBSAMPLE {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(params.seed, round, u64::MAX));
        rand::seq::index::sample(&mut rng, remaining.len(), SCORE_SUBSAMPLE)
            .into_iter()
            .map(|k| remaining[k])
            .collect()
    } else {
        remaining.to_vec()
    };

    let mut best: Option<(usize, u64, Plane)> = None;
    let mut needed = params.max_iterations as u64;
    let mut k0: u64 = 0;
    while k0 < (params.max_iterations as u64).min(needed) {
        let chunk_end = (k0 + SCORE_CHUNK as u64).min(params.max_iterations as u64);
        let mut scored: Vec<(usize, u64, Plane)> = (k0..chunk_end)
            .into_par_iter()
            .filter_map(|k| {
                let plane = candidate_plane(cloud, remaining, params.seed, round, k)?;
                let score = subsample
                    .iter()
                    .filter(|&&i| {
                        plane.signed_distance(&cloud.points[i]).abs() <= params.inlier_distance
                    })
                    .count();
                Some((score, k, plane))
            })
            .collect();
        scored.sort_by_key(|&(_, k, _)| k);
        for (score, k, plane) in scored {
            if best
                .as_ref()
                .is_none_or(|(bs, bk, _)| score > *bs || (score == *bs && k < *bk))
            {
                best = Some((score, k, plane));
            }
        }
        if let Some((score, _, _)) = best {
            let w = score as f64 / subsample.len() as f64;
            needed = iterations_needed(w, params.max_iterations as u64);
        }
        k0 = chunk_end;
    }
    best.map(|(_, _, plane)| plane)
}

/// Standard RANSAC bound: trials for 99% confidence of one all-inlier triple.
fn iterations_needed(inlier_fraction: f64, cap: u64) -> u64 {
    let w3 = inlier_fraction.powi(3);
    if w3 >= 1.0 {
        return 1;
    }
    if w3 <= 1e-9 {
        return cap;
    }
    let n = (0.01f64.ln() / (1.0 - w3).ln()).ceil();
    (n as u64).clamp(1, cap)
}

fn candidate_plane(
    cloud: &PointCloud,
    remaining: &[usize],
    seed: u64,
    round: u64,
    k: u64,
) -> Option<Plane> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, round, k));
    let n = remaining.len();
    let a = remaining[rng.random_range(0..n)];
    let mut b = remaining[rng.random_range(0..n)];
    let mut c = remaining[rng.random_range(0..n)];
    for _ in 0..8 {
        if b != a {
            break;
        }
        b = remaining[rng.random_range(0..n)];
    }
    for _ in 0..8 {
        if c != a && c != b {
            break;
        }
        c = remaining[rng.random_range(0..n)];
    }
    let (pa, pb, pc) = (&cloud.points[a], &cloud.points[b], &cloud.points[c]);
    let normal = (pb - pa).cross(&(pc - pa));
    if normal.norm() < 1e-12 {
        return None;
    }
    Plane::from_point_normal(*pa, normal).ok()
}

fn collect_inliers(
    cloud: &PointCloud,
    remaining: &[usize],
    plane: &Plane,
    inlier_distance: f64,
) -> Vec<usize> {
    remaining
        .par_iter()
        .copied()
        .filter(|&i| plane.signed_distance(&cloud.points[i]).abs() <= inlier_distance)
        .collect()
}

/// Refit on progressively tighter distance bands while the core keeps at
/// least a quarter of the members (and min_support). Membership stays at the
/// full band; only the fit subset shrinks. Near-noiseless segments converge
/// to their exact plane instead of being tilted by grazing contamination
/// from adjacent surfaces.
fn trimmed_refit(
    cloud: &PointCloud,
    inliers: &[usize],
    start: Plane,
    params: &RansacParams,
) -> Plane {
    let mut plane = start;
    for trim in [0.25, 1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0] {
        let band = params.inlier_distance * trim;
        let subset: Vec<Point3> = inliers
            .iter()
            .filter(|&&i| plane.signed_distance(&cloud.points[i]).abs() <= band)
            .map(|&i| cloud.points[i])
            .collect();
        if subset.len() < params.min_support.max(inliers.len() / 4) {
            break;
        }
        match fit_plane_pca(&subset) {
            Ok(refit) if refit.normal().dot(&plane.normal()).abs() >= params.normal_consistency => {
                plane = refit;
            }
            _ => break,
        }
    }
    plane
}

/// Median nearest-neighbor distance over a deterministic subsample.
fn median_nn_distance(cloud: &PointCloud, indices: &[usize]) -> f64 {
    if indices.len() < 2 {
        return 0.0;
    }
    let sample_count = indices.len().min(512);
    let stride = (indices.len() / sample_count).max(1);
    let mut dists: Vec<f64> = indices
        .par_iter()
        .step_by(stride)
        .map(|&i| {
            let p = &cloud.points[i];
            indices
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (cloud.points[j] - p).norm_squared())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    dists[dists.len() / 2].sqrt()
}

fn mix(seed: u64, round: u64, k: u64) -> u64 {
    // splitmix64 over the three stream coordinates
    let mut x = seed
        .wrapping_mul(0x9E3779B97F4A7C15)
        .wrapping_add(round.wrapping_mul(0xBF58476D1CE4E5B9))
        .wrapping_add(k.wrapping_add(0x94D049BB133111EB));
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58476D1CE4E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D049BB133111EB);
    x ^= x >> 31;
    x
}

/// Group inlier indices into connected components with a grid hash: two
/// points connect when within `radius`.
fn connected_components(cloud: &PointCloud, indices: &[usize], radius: f64) -> Vec<Vec<usize>> {
    use std::collections::HashMap;
    let cell_of = |p: &Point3| -> (i64, i64, i64) {
        (
            (p.x / radius).floor() as i64,
            (p.y / radius).floor() as i64,
            (p.z / radius).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (local, &gi) in indices.iter().enumerate() {
        grid.entry(cell_of(&cloud.points[gi])).or_default().push(local);
    }
    let mut dsu = Dsu::new(indices.len());
    let r2 = radius * radius;
    for (local, &gi) in indices.iter().enumerate() {
        let p = &cloud.points[gi];
        let (cx, cy, cz) = cell_of(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &other in bucket {
                        if other < local
                            && (cloud.points[indices[other]] - p).norm_squared() <= r2
                        {
                            dsu.union(local, other);
                        }
                    }
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for local in 0..indices.len() {
        groups.entry(dsu.find(local)).or_default().push(indices[local]);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    // Deterministic order: largest first, ties by smallest member.
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vector3;

    fn cube_surface_cloud(per_face: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::new();
        for axis in 0..3usize {
            for &value in &[0.0, 1.0] {
                for _ in 0..per_face {
                    let u = rng.random_range(0.0..1.0);
                    let v = rng.random_range(0.0..1.0);
                    let mut p = [0.0; 3];
                    p[axis] = value;
                    p[(axis + 1) % 3] = u;
                    p[(axis + 2) % 3] = v;
                    points.push(Point3::new(p[0], p[1], p[2]));
                }
            }
        }
        PointCloud::new(points)
    }

    #[test]
    fn detects_six_cube_faces_exactly() {
        let cloud = cube_surface_cloud(1700, 2);
        let params = RansacParams {
            seed: 9,
            ..RansacParams::default()
        };
        let segments = detect_planes(&cloud, &params).unwrap();
        assert_eq!(segments.len(), 6, "expected 6 faces, got {}", segments.len());
        // Each detected plane matches a true face plane to 1e-6 in angle.
        let truth: Vec<Plane> = (0..3)
            .flat_map(|axis| {
                let mut n = Vector3::zeros();
                n[axis] = 1.0;
                [
                    Plane::new(n, 0.0).unwrap(),
                    Plane::new(n, 1.0).unwrap(),
                ]
            })
            .collect();
        for seg in &segments {
            let best = truth
                .iter()
                .map(|t| seg.plane.angle_between(t))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6, "angle error {best}");
        }
        // Segments are pairwise disjoint in inliers.
        let mut seen = std::collections::HashSet::new();
        for seg in &segments {
            for &i in &seg.inliers {
                assert!(seen.insert(i), "inlier {i} in two segments");
            }
        }
    }

    #[test]
    fn ball_interior_yields_no_planes() {
        // Uniform points in a ball; with min_support at 30% no plane can
        // reach consensus. The exhaustive-triple oracle below verifies that
        // no 30% coplanar subset exists at all.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let mut points = Vec::with_capacity(n);
        while points.len() < n {
            let p = Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if p.coords.norm() <= 1.0 {
                points.push(p);
            }
        }
        let cloud = PointCloud::new(points);
        let inlier_distance = 0.01;
        let min_support = (n as f64 * 0.3) as usize;

        // Oracle: exhaustive triple sampling at small n.
        let mut best = 0usize;
        for a in 0..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    let normal = (cloud.points[b] - cloud.points[a])
                        .cross(&(cloud.points[c] - cloud.points[a]));
                    if normal.norm() < 1e-12 {
                        continue;
                    }
                    let plane = Plane::from_point_normal(cloud.points[a], normal).unwrap();
                    let count = cloud
                        .points
                        .iter()
                        .filter(|p| plane.signed_distance(p).abs() <= inlier_distance)
                        .count();
                    best = best.max(count);
                }
            }
        }
        assert!(
            best < min_support,
            "oracle found a {best}-point coplanar subset"
        );

        let params = RansacParams {
            inlier_distance,
            min_support,
            max_iterations: 500,
            seed: 4,
            ..RansacParams::default()
        };
        let segments = detect_planes(&cloud, &params).unwrap();
        assert!(segments.is_empty());
    }

    #[test]
    fn single_plane_captures_nearly_all_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let points: Vec<Point3> = (0..2000)
            .map(|_| Point3::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), 0.25))
            .collect();
        let cloud = PointCloud::new(points);
        let params = RansacParams {
            seed: 1,
            ..RansacParams::default()
        };
        let segments = detect_planes(&cloud, &params).unwrap();
        assert_eq!(segments.len(), 1);
        assert!(segments[0].support() as f64 >= 0.99 * cloud.len() as f64);
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let cloud = cube_surface_cloud(400, 12);
        let params = RansacParams {
            min_support: 40,
            seed: 77,
            ..RansacParams::default()
        };
        let a = detect_planes(&cloud, &params).unwrap();
        let b = detect_planes(&cloud, &params).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.inliers, y.inliers);
            assert_eq!(x.plane.normal().x.to_bits(), y.plane.normal().x.to_bits());
            assert_eq!(x.plane.normal().y.to_bits(), y.plane.normal().y.to_bits());
            assert_eq!(x.plane.normal().z.to_bits(), y.plane.normal().z.to_bits());
            assert_eq!(x.plane.offset().to_bits(), y.plane.offset().to_bits());
        }
    }

    #[test]
    fn residual_rms_bounded_by_inlier_distance() {
        let cloud = cube_surface_cloud(500, 21);
        let params = RansacParams {
            min_support: 100,
            seed: 5,
            ..RansacParams::default()
        };
        for seg in detect_planes(&cloud, &params).unwrap() {
            assert!(seg.residual_rms(&cloud) <= params.inlier_distance + 1e-12);
        }
    }

    #[test]
    fn opposite_walls_split_by_connectivity() {
        // Two parallel square patches on the same infinite plane, far apart.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut points = Vec::new();
        for offset in [0.0, 10.0] {
            for _ in 0..500 {
                points.push(Point3::new(
                    offset + rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    0.0,
                ));
            }
        }
        let cloud = PointCloud::new(points);
        let params = RansacParams {
            min_support: 100,
            seed: 3,
            ..RansacParams::default()
        };
        let segments = detect_planes(&cloud, &params).unwrap();
        assert_eq!(segments.len(), 2, "patches must become distinct segments");
    }
}
