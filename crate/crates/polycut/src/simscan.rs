//! Virtual LiDAR scanner and SDF-annotated query sampling.
//!
//! A pinhole sensor orbits the mesh on a sphere (optionally the upper
//! hemisphere only), casting a square grid of rays at the bounding-box
//! center per pose. Gaussian noise perturbs the depth along each ray.
//! Occlusion is emergent from first-hit casting. Every randomized stage
//! derives per-pose RNG substreams from the seed, so parallel and serial
//! runs produce bit-identical clouds.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{Point3, PolyMesh, TriAccel, Vector3};
use crate::occupancy::{MeshSdfOracle, SdfProvider};

/// Largest bounding-box side after normalization (R = 1 in normalized scenes).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SceneScale {
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoseMode {
    /// Uniform random directions on the (hemi)sphere.
    RandomSphere,
    /// Fibonacci lattice, for reproducible even coverage.
    Fibonacci,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    pub poses: usize,
    /// Orbit radius as a multiple of the bbox diagonal.
    pub sphere_radius: f64,
    /// Constrain poses to the upper half of the sphere (no-bottom scans).
    pub hemisphere_only: bool,
    /// Rays per pose; cast as a g x g grid with g = round(sqrt(n)).
    pub rays_per_pose: usize,
    /// Depth noise standard deviation, in scene units.
    pub noise_sigma: f64,
    pub pose_mode: PoseMode,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            poses: 16,
            sphere_radius: 3.0,
            hemisphere_only: false,
            rays_per_pose: 128 * 128,
            noise_sigma: 0.0,
            pose_mode: PoseMode::RandomSphere,
            seed: 0,
        }
    }
}

/// Translate the bbox center to the origin and scale uniformly so the
/// largest bbox side is 1.
pub fn normalize_mesh(mesh: &PolyMesh) -> Result<(PolyMesh, SceneScale)> {
    if mesh.vertices.is_empty() || mesh.faces.is_empty() {
        return Err(Error::Scan("cannot normalize an empty mesh".into()));
    }
    let bbox = mesh.bbox()?;
    let largest = bbox.largest_extent();
    if largest <= 0.0 {
        return Err(Error::Scan("zero-extent mesh".into()));
    }
    let mut out = mesh.clone();
    out.transform(-bbox.center().coords, 1.0 / largest);
    Ok((out, SceneScale { r: 1.0 }))
}

/// Pose origins on the orbit sphere around `center`.
pub fn sphere_poses(config: &ScanConfig, center: Point3, radius: f64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9).wrapping_add(1));
    (0..config.poses)
        .map(|k| {
            let (z, phi) = match config.pose_mode {
                PoseMode::RandomSphere => {
                    let z = if config.hemisphere_only {
                        rng.random_range(0.0..1.0)
                    } else {
                        rng.random_range(-1.0..1.0)
                    };
                    (z, rng.random_range(0.0..std::f64::consts::TAU))
                }
                PoseMode::Fibonacci => {
                    let t = (k as f64 + 0.5) / config.poses as f64;
                    let z = if config.hemisphere_only { t } else { 2.0 * t - 1.0 };
                    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
                    (z, golden * k as f64)
                }
            };
            let rho = (1.0 - z * z).max(0.0).sqrt();
            center + Vector3::new(rho * phi.cos(), rho * phi.sin(), z) * radius
        })
        .collect()
}

/// Scan a normalized mesh from generated poses.
pub fn scan(mesh: &PolyMesh, config: &ScanConfig) -> Result<PointCloud> {
    let bbox = mesh.bbox()?;
    let center = bbox.center();
    let radius = config.sphere_radius * bbox.diagonal();
    let circumscribed = mesh
        .vertices
        .iter()
        .map(|v| (v - center).norm())
        .fold(0.0, f64::max);
    if radius <= circumscribed {
        return Err(Error::Scan(format!(
            "orbit radius {radius} must exceed the circumscribed radius {circumscribed}"
        )));
    }
    if config.noise_sigma < 0.0 {
        return Err(Error::Scan("noise sigma must be nonnegative".into()));
    }
    let poses = sphere_poses(config, center, radius);
    scan_from_poses(mesh, &poses, config)
}

/// Scan from explicit pose origins. Rays per pose form a square grid aimed
/// at the bbox center, with the field of view covering the bbox plus a 10%
/// margin.
pub fn scan_from_poses(
    mesh: &PolyMesh,
    poses: &[Point3],
    config: &ScanConfig,
) -> Result<PointCloud> {
    mesh.validate()?;
    if poses.is_empty() || config.rays_per_pose == 0 {
        return Err(Error::Scan("no poses or rays configured".into()));
    }
    let accel = TriAccel::build(mesh);
    let bbox = mesh.bbox()?;
    let center = bbox.center();
    let half_extent = 0.5 * bbox.diagonal() * 1.1;
    let grid = (config.rays_per_pose as f64).sqrt().round().max(1.0) as usize;

    let per_pose: Vec<Vec<Point3>> = poses
        .par_iter()
        .enumerate()
        .map(|(pose_idx, origin)| {
            let mut rng = ChaCha8Rng::seed_from_u64(pose_substream(config.seed, pose_idx));
            let forward = (center - origin).normalize();
            let helper = if forward.z.abs() > 0.99 {
                Vector3::x()
            } else {
                Vector3::z()
            };
            let right = forward.cross(&helper).normalize();
            let up = right.cross(&forward);
            let distance = (center - origin).norm();
            let tan_half_fov = half_extent / distance;
            let mut points = Vec::new();
            for iy in 0..grid {
                for ix in 0..grid {
                    let u = ((ix as f64 + 0.5) / grid as f64 * 2.0 - 1.0) * tan_half_fov;
                    let v = ((iy as f64 + 0.5) / grid as f64 * 2.0 - 1.0) * tan_half_fov;
                    let dir = (forward + right * u + up * v).normalize();
                    if let Some((t, _)) = accel.raycast_first(origin, &dir, 1e-9) {
                        let noise: f64 = config.noise_sigma * rng.sample::<f64, _>(StandardNormal);
                        points.push(origin + dir * (t + noise));
                    }
                }
            }
            points
        })
        .collect();

    let points: Vec<Point3> = per_pose.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(Error::Scan("no rays hit the mesh".into()));
    }
    Ok(PointCloud::new(points))
}

fn pose_substream(seed: u64, pose: usize) -> u64 {
    let mut x = seed ^ (pose as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 30;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 27;
    x
}

/// Evaluation noise levels as fractions of R.
pub const EVAL_NOISE_LEVELS: [f64; 5] = [0.0, 0.001, 0.005, 0.010, 0.050];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseKind {
    /// Per-scene draw from U[0, 0.005R] (the training regime).
    Train { seed: u64 },
    /// One of the fixed evaluation levels.
    Eval(usize),
}

/// Resolve a noise schedule entry to an absolute sigma.
pub fn noise_schedule(kind: NoiseKind, scale: &SceneScale) -> Result<f64> {
    match kind {
        NoiseKind::Train { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_501E);
            Ok(rng.random_range(0.0..0.005) * scale.r)
        }
        NoiseKind::Eval(level) => EVAL_NOISE_LEVELS
            .get(level)
            .map(|s| s * scale.r)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown noise level {level}; have 0..{}",
                    EVAL_NOISE_LEVELS.len()
                ))
            }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryProvenance {
    NearSurface,
    Volume,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QueryPoint {
    pub position: Point3,
    pub sdf: f64,
    pub provenance: QueryProvenance,
}

/// SDF-annotated query points: near-surface samples displaced along face
/// normals plus uniform bounding-box samples, with a dropout subset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuerySampleSet {
    pub points: Vec<QueryPoint>,
    /// Indices of the dropout view (uniform half of the points).
    pub dropout: Vec<usize>,
}

pub const NEAR_SURFACE_COUNT: usize = 1000;
pub const VOLUME_COUNT: usize = 1000;
/// Near-surface displacement bound as a fraction of R.
pub const NEAR_SURFACE_BAND: f64 = 0.02;

/// Sample the query set for a watertight normalized mesh: 1000 area-weighted
/// surface points displaced along their face normal by U[-0.02R, 0.02R],
/// 1000 uniform bbox points, each labeled by the mesh SDF oracle, plus a
/// dropout view of half the points.
pub fn sample_queries(mesh: &PolyMesh, scale: &SceneScale, seed: u64) -> Result<QuerySampleSet> {
    let oracle = MeshSdfOracle::new(mesh)
        .map_err(|e| Error::Scan(format!("query sampling needs a watertight mesh: {e}")))?;
    let tris = mesh.triangles();
    let areas: Vec<f64> = tris
        .iter()
        .map(|(t, _)| {
            let a = mesh.vertices[t[0]];
            let b = mesh.vertices[t[1]];
            let c = mesh.vertices[t[2]];
            0.5 * (b - a).cross(&(c - a)).norm()
        })
        .collect();
    let total: f64 = areas.iter().sum();
    if total <= 0.0 {
        return Err(Error::Scan("mesh has zero area".into()));
    }
    let mut cumulative = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cumulative.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0DD5_EED5);
    let mut points = Vec::with_capacity(NEAR_SURFACE_COUNT + VOLUME_COUNT);
    let band = NEAR_SURFACE_BAND * scale.r;
    for _ in 0..NEAR_SURFACE_COUNT {
        let pick = rng.random_range(0.0..total);
        let ti = cumulative.partition_point(|&c| c < pick).min(tris.len() - 1);
        let (t, _) = tris[ti];
        let a = mesh.vertices[t[0]];
        let b = mesh.vertices[t[1]];
        let c = mesh.vertices[t[2]];
        // Uniform barycentric sample.
        let r1: f64 = rng.random_range(0.0f64..1.0);
        let r2: f64 = rng.random_range(0.0f64..1.0);
        let s = r1.sqrt();
        let p = a + (b - a) * (s * (1.0 - r2)) + (c - a) * (s * r2);
        let normal = (b - a).cross(&(c - a)).normalize();
        let displacement = rng.random_range(-band..band);
        let q = p + normal * displacement;
        let sdf = oracle.sdf(&q)?;
        points.push(QueryPoint {
            position: q,
            sdf,
            provenance: QueryProvenance::NearSurface,
        });
    }
    let bbox = mesh.bbox()?;
    for _ in 0..VOLUME_COUNT {
        let q = Point3::new(
            rng.random_range(bbox.min.x..bbox.max.x),
            rng.random_range(bbox.min.y..bbox.max.y),
            rng.random_range(bbox.min.z..bbox.max.z),
        );
        let sdf = oracle.sdf(&q)?;
        points.push(QueryPoint {
            position: q,
            sdf,
            provenance: QueryProvenance::Volume,
        });
    }
    let mut dropout: Vec<usize> =
        rand::seq::index::sample(&mut rng, points.len(), points.len() / 2).into_vec();
    dropout.sort_unstable();
    Ok(QuerySampleSet { points, dropout })
}

impl QuerySampleSet {
    /// CSV rows `x,y,z,d,provenance`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let file =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = std::io::BufWriter::new(file);
        let io_err = |e| Error::io(path.display().to_string(), e);
        writeln!(w, "x,y,z,d,provenance").map_err(io_err)?;
        for p in &self.points {
            let tag = match p.provenance {
                QueryProvenance::NearSurface => "near-surface",
                QueryProvenance::Volume => "volume",
            };
            writeln!(
                w,
                "{},{},{},{},{tag}",
                p.position.x, p.position.y, p.position.z, p.sdf
            )
            .map_err(io_err)?;
        }
        Ok(())
    }
}

/// Dataset manifest written next to scan outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanManifest {
    pub mesh: String,
    pub seed: u64,
    pub sigma: f64,
    pub pose_mode: String,
    pub hemisphere_only: bool,
    pub poses: usize,
    pub rays_per_pose: usize,
    pub point_count: usize,
    pub query_count: usize,
    pub dropout_count: usize,
    pub cloud_checksum: String,
    pub scene_scale: f64,
}
