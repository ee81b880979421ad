//! Planar primitives: RANSAC detection and iterative refinement.

mod detect;
mod refine;

pub use detect::detect_planes;
pub use refine::refine_planes;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Plane, Point3, Vector3};

/// A fitted plane with the point-cloud subset supporting it.
#[derive(Debug, Clone)]
pub struct PlanarSegment {
    pub plane: Plane,
    /// Indices into the source point cloud, ascending and duplicate-free.
    pub inliers: Vec<usize>,
    /// Inlier bounding box, pre-padded for the spatial-correlation test.
    aabb: Aabb,
}

impl PlanarSegment {
    /// Build a segment from inlier indices; the cached AABB is the inlier
    /// box padded by `aabb_pad` on all axes (detection uses twice the RANSAC
    /// inlier distance, guarding against grazing misses at noise scale).
    pub fn new(
        cloud: &PointCloud,
        plane: Plane,
        mut inliers: Vec<usize>,
        aabb_pad: f64,
    ) -> Result<PlanarSegment> {
        if inliers.is_empty() {
            return Err(Error::Detection("segment with no inliers".into()));
        }
        inliers.sort_unstable();
        inliers.dedup();
        if let Some(&bad) = inliers.iter().find(|&&i| i >= cloud.len()) {
            return Err(Error::Detection(format!(
                "inlier index {bad} out of range ({} points)",
                cloud.len()
            )));
        }
        let aabb =
            Aabb::from_points(inliers.iter().map(|&i| &cloud.points[i]))?.padded_abs(aabb_pad);
        Ok(PlanarSegment {
            plane,
            inliers,
            aabb,
        })
    }

    /// Assemble a segment whose AABB is already known (merges union the
    /// operands' padded boxes, so no cloud access is needed).
    pub(crate) fn from_parts(plane: Plane, inliers: Vec<usize>, aabb: Aabb) -> PlanarSegment {
        PlanarSegment {
            plane,
            inliers,
            aabb,
        }
    }

    pub fn support(&self) -> usize {
        self.inliers.len()
    }

    pub fn aabb(&self) -> &Aabb {
        &self.aabb
    }

    pub fn verticality(&self) -> f64 {
        self.plane.verticality()
    }

    /// Mean orthogonal distance of this segment's inliers to a plane.
    pub fn mean_distance_to(&self, cloud: &PointCloud, plane: &Plane) -> f64 {
        let sum: f64 = self
            .inliers
            .iter()
            .map(|&i| plane.signed_distance(&cloud.points[i]).abs())
            .sum();
        sum / self.inliers.len() as f64
    }

    /// RMS orthogonal residual against this segment's own plane.
    pub fn residual_rms(&self, cloud: &PointCloud) -> f64 {
        let sum: f64 = self
            .inliers
            .iter()
            .map(|&i| {
                let d = self.plane.signed_distance(&cloud.points[i]);
                d * d
            })
            .sum();
        (sum / self.inliers.len() as f64).sqrt()
    }
}

/// RANSAC parameters. Distances are in scene units (unit-box scenes).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RansacParams {
    pub inlier_distance: f64,
    /// Cosine bound: a PCA refit may not tilt the plane normal below this
    /// against the candidate it refines.
    pub normal_consistency: f64,
    pub min_support: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            inlier_distance: 0.005,
            normal_consistency: 0.9,
            min_support: 50,
            max_iterations: 2000,
            seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if self.inlier_distance <= 0.0 {
            return Err(Error::Config("inlier_distance must be positive".into()));
        }
        if self.min_support == 0 {
            return Err(Error::Config("min_support must be positive".into()));
        }
        Ok(())
    }
}

/// Refinement tolerances: merge segment pairs below both.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefineParams {
    /// Angle tolerance in radians, in (0, pi/2).
    pub angle_tolerance: f64,
    pub distance_tolerance: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            angle_tolerance: 5.0_f64.to_radians(),
            distance_tolerance: 0.01,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_tolerance > 0.0 && self.angle_tolerance < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config("angle_tolerance out of (0, pi/2)".into()));
        }
        if self.distance_tolerance <= 0.0 {
            return Err(Error::Config("distance_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Least-squares plane through a point set: the plane through the centroid
/// whose normal is the smallest-eigenvalue direction of the covariance.
pub fn fit_plane_pca(points: &[Point3]) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::Detection(format!(
            "PCA plane fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mut centroid = Vector3::zeros();
    for p in points {
        centroid += p.coords;
    }
    centroid /= n;
    let mut cov = nalgebra::Matrix3::<f64>::zeros();
    for p in points {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = nalgebra::SymmetricEigen::new(cov);
    // Ascending order of eigenvalues.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let spread = eig.eigenvalues[order[1]];
    let largest = eig.eigenvalues[order[2]];
    if largest <= 0.0 || spread <= largest * 1e-12 {
        return Err(Error::Detection(
            "degenerate point set (collinear or coincident) in plane fit".into(),
        ));
    }
    let normal = eig.eigenvectors.column(order[0]).into_owned();
    Plane::from_point_normal(Point3::from(centroid), normal)
}

#[derive(Serialize, Deserialize)]
struct SegmentRecord {
    normal: [f64; 3],
    offset: f64,
    inliers: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SegmentFile {
    point_cloud_checksum: String,
    segments: Vec<SegmentRecord>,
}

/// Write a segment set as JSON, pinned to its cloud by checksum.
pub fn write_segments(path: &Path, cloud: &PointCloud, segments: &[PlanarSegment]) -> Result<()> {
    let file = SegmentFile {
        point_cloud_checksum: cloud.checksum(),
        segments: segments
            .iter()
            .map(|s| SegmentRecord {
                normal: [s.plane.normal().x, s.plane.normal().y, s.plane.normal().z],
                offset: s.plane.offset(),
                inliers: s.inliers.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read a segment set back, verifying the cloud checksum. `aabb_pad` rebuilds
/// the cached spatial-correlation boxes (pass 2x the detection inlier
/// distance used to produce the file).
pub fn read_segments(path: &Path, cloud: &PointCloud, aabb_pad: f64) -> Result<Vec<PlanarSegment>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let file: SegmentFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    if file.point_cloud_checksum != cloud.checksum() {
        return Err(Error::parse(
            path.display().to_string(),
            "segment file checksum does not match the point cloud",
        ));
    }
    file.segments
        .into_iter()
        .map(|r| {
            let plane = Plane::new(Vector3::new(r.normal[0], r.normal[1], r.normal[2]), r.offset)?;
            PlanarSegment::new(cloud, plane, r.inliers, aabb_pad)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pca_square_corners() {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let plane = fit_plane_pca(&pts).unwrap();
        assert!((plane.normal().z.abs() - 1.0).abs() < 1e-12);
        assert!(plane.offset().abs() < 1e-12);
    }

    #[test]
    fn pca_jittered_plane_normal_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &delta in &[1e-4, 1e-3, 1e-2] {
            let pts: Vec<Point3> = (0..500)
                .map(|_| {
                    Point3::new(
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.0..1.0),
                        rng.random_range(-delta..delta),
                    )
                })
                .collect();
            let plane = fit_plane_pca(&pts).unwrap();
            let tilt = plane.normal().cross(&Vector3::z()).norm();
            // O(delta) perturbation bound, with a generous constant.
            assert!(tilt < 10.0 * delta, "tilt {tilt} for delta {delta}");
        }
    }

    #[test]
    fn pca_rejects_degenerate_input() {
        let line: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert!(fit_plane_pca(&line).is_err());
        assert!(fit_plane_pca(&[Point3::origin(), Point3::origin()]).is_err());
    }

    #[test]
    fn pca_beats_random_candidate_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point3> = (0..20)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let fitted = fit_plane_pca(&pts).unwrap();
        let residual = |plane: &Plane| -> f64 {
            pts.iter()
                .map(|p| {
                    let d = plane.signed_distance(p);
                    d * d
                })
                .sum()
        };
        let fitted_res = residual(&fitted);
        // Random-search lower-bound oracle: 1000 candidate planes.
        for _ in 0..1000 {
            let n = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if n.norm() < 1e-6 {
                continue;
            }
            let candidate = Plane::new(n, rng.random_range(-1.0..1.0)).unwrap();
            assert!(fitted_res <= residual(&candidate) + 1e-12);
        }
    }

    #[test]
    fn segment_file_round_trip_and_checksum_guard() {
        let cloud = PointCloud::new(
            (0..100)
                .map(|i| Point3::new(i as f64 * 0.01, (i % 7) as f64 * 0.01, 0.0))
                .collect(),
        );
        let plane = Plane::new(Vector3::z(), 0.0).unwrap();
        let seg = PlanarSegment::new(&cloud, plane, (0..100).collect(), 0.01).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("segs.json");
        write_segments(&path, &cloud, &[seg]).unwrap();
        let back = read_segments(&path, &cloud, 0.01).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].inliers.len(), 100);
        assert_eq!(back[0].plane, plane);

        let other = PointCloud::new(vec![Point3::origin()]);
        assert!(read_segments(&path, &other, 0.01).is_err());
    }
}
