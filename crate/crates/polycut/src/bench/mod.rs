//! End-to-end reconstruction pipeline, metrics, and partitioning benchmarks.

mod hausdorff;

pub use hausdorff::{hausdorff, sample_surface_points, HausdorffReport, SurfaceSource};

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::complex::{
    augment_bounds_faces, build_complex_with_plan, plan_insertion, CellComplex, ComplexBuilder,
    PartitionMode, PartitionStrategy,
};
use crate::error::{Error, Result};
use crate::extract::{
    build_mrf, energy, extract_shell, merge_coplanar_with_stats, smoothness, solve_mincut,
    Labeling, MergeStats, Shell, DEFAULT_LAMBDA,
};
use crate::geom::{read_mesh, write_mesh, write_mesh_ply_binary, Aabb, PolyMesh};
use crate::occupancy::{
    cell_occupancy, CellOccupancies, MeshSdfOracle, SampledSdfField, SdfProvider, DEFAULT_BETA,
};
use crate::primitives::{
    detect_planes, refine_planes, write_segments, PlanarSegment, RansacParams, RefineParams,
};

/// Where per-cell signed distances come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProviderSpec {
    /// Ground-truth oracle over a watertight mesh file.
    OracleMesh(PathBuf),
    /// Sampled field file: binary grid, or CSV scatter for `.csv`.
    SampledSdf(PathBuf),
}

impl ProviderSpec {
    /// Parse the CLI syntax `oracle:<mesh>` / `sdf:<file>`.
    pub fn parse(spec: &str) -> Result<ProviderSpec> {
        match spec.split_once(':') {
            Some(("oracle", path)) => Ok(ProviderSpec::OracleMesh(PathBuf::from(path))),
            Some(("sdf", path)) => Ok(ProviderSpec::SampledSdf(PathBuf::from(path))),
            _ => Err(Error::Config(format!(
                "provider must be oracle:<mesh> or sdf:<file>, got `{spec}`"
            ))),
        }
    }

    pub fn load(&self) -> Result<Box<dyn SdfProvider>> {
        match self {
            ProviderSpec::OracleMesh(path) => {
                let mesh = read_mesh(path)?;
                Ok(Box::new(MeshSdfOracle::new(&mesh)?))
            }
            ProviderSpec::SampledSdf(path) => {
                let is_csv = path
                    .extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
                let field = if is_csv {
                    SampledSdfField::read_csv(path)?
                } else {
                    SampledSdfField::read_grid(path)?
                };
                Ok(Box::new(field))
            }
        }
    }
}

/// Knobs of a reconstruction run. Every randomized stage has its own seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineParams {
    pub ransac: RansacParams,
    pub refine: RefineParams,
    pub strategy: PartitionStrategy,
    pub beta: f64,
    pub lambda: f64,
    /// Register the bounds walls as virtual shell-face primitives (for
    /// no-bottom inputs).
    pub no_bottom_walls: bool,
    pub hausdorff_samples: usize,
    pub hausdorff_seed: u64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            ransac: RansacParams::default(),
            refine: RefineParams::default(),
            strategy: PartitionStrategy::default(),
            beta: DEFAULT_BETA,
            lambda: DEFAULT_LAMBDA,
            no_bottom_walls: false,
            hausdorff_samples: 100_000,
            hausdorff_seed: 7,
        }
    }
}

/// A full run: input cloud, SDF provider, optional ground truth for metrics,
/// output directory for artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub provider: ProviderSpec,
    pub reference: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub params: PipelineParams,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub data: f64,
    pub smoothness: f64,
    pub total: f64,
}

/// The report of one reconstruction. Wall-clock runtimes live alongside but
/// are excluded from serialization so report bytes are reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconReport {
    /// Symmetric mean Hausdorff as a fraction of the reference bbox diagonal.
    pub smh: Option<f64>,
    pub hausdorff_max: Option<f64>,
    pub smh_absolute: Option<f64>,
    pub face_count_raw: usize,
    pub face_count_merged: usize,
    pub cell_count: usize,
    pub segment_count: usize,
    pub interior_cells: usize,
    pub watertight: bool,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
    pub shell_volume: f64,
    pub interior_volume: f64,
    pub merged_volume: f64,
    pub energy: EnergyBreakdown,
    pub merge: MergeStats,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub runtimes: Vec<(String, f64)>,
}

/// Everything a run produced, for callers that keep working in memory.
pub struct PipelineOutcome {
    pub segments: Vec<PlanarSegment>,
    pub complex: CellComplex,
    pub occupancies: CellOccupancies,
    pub labeling: Labeling,
    pub shell: Shell,
    pub merged: PolyMesh,
    pub report: ReconReport,
}

/// Closure and volume report of a mesh.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WatertightReport {
    pub closed: bool,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
    pub signed_volume: f64,
}

/// Closed iff no boundary edges; non-manifold edges are reported, not
/// failed (unions may legitimately pinch along edges).
pub fn watertight_check(mesh: &PolyMesh) -> WatertightReport {
    let census = mesh.edge_census();
    WatertightReport {
        closed: census.boundary_edges == 0,
        boundary_edges: census.boundary_edges,
        nonmanifold_edges: census.nonmanifold_edges,
        signed_volume: mesh.signed_volume(),
    }
}

/// Detect - refine - partition - occupancy - label - extract - merge, all in
/// memory. `reference` enables the Hausdorff metrics.
pub fn run_pipeline_on_cloud(
    cloud: &PointCloud,
    provider: &dyn SdfProvider,
    reference: Option<&PolyMesh>,
    params: &PipelineParams,
) -> Result<PipelineOutcome> {
    let mut runtimes: Vec<(String, f64)> = Vec::new();
    let mut clock = Stage::new(&mut runtimes);

    let raw = detect_planes(cloud, &params.ransac).map_err(|e| e.in_stage("detect"))?;
    clock.lap("detect");
    let segments = refine_planes(cloud, raw, &params.refine).map_err(|e| e.in_stage("refine"))?;
    clock.lap("refine");

    let bounds = scene_bounds(cloud, &segments, params.strategy.aabb_padding)
        .map_err(|e| e.in_stage("partition"))?;
    let mut plan = plan_insertion(&segments);
    if params.no_bottom_walls {
        augment_bounds_faces(&mut plan);
    }
    let complex = build_complex_with_plan(&segments, &plan, &bounds, &params.strategy)
        .map_err(|e| e.in_stage("partition"))?;
    clock.lap("partition");

    let occupancies =
        cell_occupancy(&complex, provider, params.beta).map_err(|e| e.in_stage("occupancy"))?;
    clock.lap("occupancy");

    let problem =
        build_mrf(&complex, &occupancies, params.lambda).map_err(|e| e.in_stage("label"))?;
    let labeling = solve_mincut(&problem);
    let total = energy(&problem, &labeling);
    let v = smoothness(&problem, &labeling);
    let breakdown = EnergyBreakdown {
        data: total - params.lambda * v,
        smoothness: v,
        total,
    };
    clock.lap("label");

    let shell = extract_shell(&complex, &labeling).map_err(|e| e.in_stage("extract"))?;
    clock.lap("extract");
    let (merged, merge_stats) = merge_coplanar_with_stats(&shell.mesh);
    clock.lap("merge");

    let closure = watertight_check(&shell.mesh);
    let mut smh = None;
    let mut hausdorff_max = None;
    let mut smh_absolute = None;
    if let Some(reference) = reference {
        if !merged.is_empty() {
            let r = hausdorff(
                SurfaceSource::Mesh(&merged),
                reference,
                params.hausdorff_samples,
                (params.hausdorff_seed, params.hausdorff_seed ^ 0x9E37_79B9),
            )
            .map_err(|e| e.in_stage("evaluate"))?;
            let diagonal = reference.bbox().map_err(|e| e.in_stage("evaluate"))?.diagonal();
            smh = Some(r.smh / diagonal);
            hausdorff_max = Some(r.max / diagonal);
            smh_absolute = Some(r.smh);
        }
    }
    clock.lap("evaluate");
    drop(clock);

    let report = ReconReport {
        smh,
        hausdorff_max,
        smh_absolute,
        face_count_raw: shell.mesh.faces.len(),
        face_count_merged: merged.faces.len(),
        cell_count: complex.len(),
        segment_count: segments.len(),
        interior_cells: labeling.interior_count(),
        watertight: closure.closed,
        boundary_edges: closure.boundary_edges,
        nonmanifold_edges: closure.nonmanifold_edges,
        shell_volume: closure.signed_volume,
        interior_volume: shell.interior_volume,
        merged_volume: merged.signed_volume(),
        energy: breakdown,
        merge: merge_stats,
        warnings: shell.warnings.clone(),
        runtimes,
    };
    Ok(PipelineOutcome {
        segments,
        complex,
        occupancies,
        labeling,
        shell,
        merged,
        report,
    })
}

/// Scene bounds: padded box of the segment inliers (the detected structure),
/// falling back to the whole cloud when nothing was detected.
fn scene_bounds(cloud: &PointCloud, segments: &[PlanarSegment], padding: f64) -> Result<Aabb> {
    let mut inlier_points = segments
        .iter()
        .flat_map(|s| s.inliers.iter().map(|&i| &cloud.points[i]))
        .peekable();
    let bounds = if inlier_points.peek().is_some() {
        Aabb::from_points(inlier_points)?
    } else {
        cloud.bbox()?
    };
    Ok(bounds.padded(padding))
}

/// File-level pipeline: load inputs, run, persist every intermediate.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    let cloud = PointCloud::read(&config.input).map_err(|e| e.in_stage("load"))?;
    let provider = config.provider.load().map_err(|e| e.in_stage("load"))?;
    let reference = match (&config.reference, &config.provider) {
        (Some(path), _) => Some(read_mesh(path).map_err(|e| e.in_stage("load"))?),
        // The oracle mesh doubles as ground truth when none is given.
        (None, ProviderSpec::OracleMesh(path)) => {
            Some(read_mesh(path).map_err(|e| e.in_stage("load"))?)
        }
        (None, _) => None,
    };

    let outcome =
        run_pipeline_on_cloud(&cloud, provider.as_ref(), reference.as_ref(), &config.params)?;

    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write_segments(&dir.join("segments.json"), &cloud, &outcome.segments)
        .map_err(|e| e.in_stage("persist"))?;
    outcome
        .complex
        .write_json(&dir.join("complex.json"))
        .map_err(|e| e.in_stage("persist"))?;
    write_labeling_dump(
        &dir.join("labeling.json"),
        &outcome.labeling,
        &outcome.occupancies,
        &outcome.report.energy,
    )?;
    if !outcome.shell.mesh.is_empty() {
        write_mesh_ply_binary(&dir.join("shell.ply"), &outcome.shell.mesh)
            .map_err(|e| e.in_stage("persist"))?;
        write_mesh(&dir.join("mesh.obj"), &outcome.merged).map_err(|e| e.in_stage("persist"))?;
        write_mesh_ply_binary(&dir.join("mesh.ply"), &outcome.merged)
            .map_err(|e| e.in_stage("persist"))?;
    }
    let report_json = serde_json::to_string_pretty(&outcome.report)
        .map_err(|e| Error::parse("report.json", e.to_string()))?;
    std::fs::write(dir.join("report.json"), report_json)
        .map_err(|e| Error::io(dir.display().to_string(), e))?;
    let timings: Vec<TimingRow> = outcome
        .report
        .runtimes
        .iter()
        .map(|(stage, seconds)| TimingRow {
            stage: stage.clone(),
            seconds: *seconds,
        })
        .collect();
    let timings_json = serde_json::to_string_pretty(&timings)
        .map_err(|e| Error::parse("timings.json", e.to_string()))?;
    std::fs::write(dir.join("timings.json"), timings_json)
        .map_err(|e| Error::io(dir.display().to_string(), e))?;
    Ok(outcome)
}

#[derive(Serialize, Deserialize)]
struct TimingRow {
    stage: String,
    seconds: f64,
}

#[derive(Serialize)]
struct LabelingDump<'a> {
    labels: &'a Labeling,
    occupancy: Vec<f64>,
    sdf: Vec<f64>,
    energy: EnergyBreakdown,
}

fn write_labeling_dump(
    path: &Path,
    labeling: &Labeling,
    occupancies: &CellOccupancies,
    energy: &EnergyBreakdown,
) -> Result<()> {
    let dump = LabelingDump {
        labels: labeling,
        occupancy: occupancies.values().collect(),
        sdf: occupancies.cells.iter().map(|c| c.sdf).collect(),
        energy: *energy,
    };
    let json = serde_json::to_string_pretty(&dump)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

struct Stage<'a> {
    runtimes: &'a mut Vec<(String, f64)>,
    last: Instant,
}

impl<'a> Stage<'a> {
    fn new(runtimes: &'a mut Vec<(String, f64)>) -> Stage<'a> {
        Stage {
            runtimes,
            last: Instant::now(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.runtimes
            .push((name.to_string(), (now - self.last).as_secs_f64()));
        self.last = now;
    }
}

/// One row of the partitioning comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionRow {
    pub name: String,
    pub strategy: String,
    /// None when the cell budget tripped.
    pub cells: Option<usize>,
    pub splits: Option<usize>,
    pub seconds: f64,
    pub truncated: bool,
}

pub const DEFAULT_CELL_BUDGET: usize = 1_000_000;

/// Build each segment set in both modes over identical insertion plans and
/// report cell counts, split counts and wall-clock time. Exhaustive runs
/// exceeding `budget` cells are flagged as truncated.
pub fn compare_partitioning(
    sets: &[(String, Vec<PlanarSegment>, Aabb)],
    budget: usize,
) -> Result<Vec<PartitionRow>> {
    if sets.is_empty() {
        return Err(Error::Config("no segment sets to compare".into()));
    }
    let mut rows = Vec::with_capacity(sets.len() * 2);
    for (name, segments, bounds) in sets {
        let plan = plan_insertion(segments);
        for mode in [PartitionMode::Adaptive, PartitionMode::Exhaustive] {
            let start = Instant::now();
            let mut builder = ComplexBuilder::new(*bounds).with_cell_budget(budget);
            let result = crate::complex::insert_plan_entries(
                &mut builder,
                segments,
                &plan.entries,
                bounds,
                mode,
            );
            let seconds = start.elapsed().as_secs_f64();
            let strategy = match mode {
                PartitionMode::Adaptive => "adaptive",
                PartitionMode::Exhaustive => "exhaustive",
            };
            match result {
                Ok(()) => {
                    let splits = builder.split_count();
                    let cells = builder.live_cells();
                    rows.push(PartitionRow {
                        name: name.clone(),
                        strategy: strategy.to_string(),
                        cells: Some(cells),
                        splits: Some(splits),
                        seconds,
                        truncated: false,
                    });
                }
                Err(_) => rows.push(PartitionRow {
                    name: name.clone(),
                    strategy: strategy.to_string(),
                    cells: None,
                    splits: None,
                    seconds,
                    truncated: true,
                }),
            }
        }
    }
    Ok(rows)
}

/// CSV table for [`compare_partitioning`] rows.
pub fn write_partition_csv(path: &Path, rows: &[PartitionRow]) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "name,strategy,cells,splits,seconds,truncated").map_err(io_err)?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.name,
            row.strategy,
            row.cells.map_or(String::new(), |c| c.to_string()),
            row.splits.map_or(String::new(), |s| s.to_string()),
            row.seconds,
            row.truncated
        )
        .map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simscan::{normalize_mesh, scan, ScanConfig};
    use crate::synth::{cube_mesh, segments_from_mesh};

    #[test]
    fn watertight_check_examples() {
        let cube = cube_mesh(1.0);
        let report = watertight_check(&cube);
        assert!(report.closed);
        assert_eq!(report.boundary_edges, 0);
        assert_eq!(report.nonmanifold_edges, 0);
        assert!((report.signed_volume - 1.0).abs() < 1e-12);

        let mut open = cube;
        open.faces.pop();
        let report = watertight_check(&open);
        assert!(!report.closed);
        assert_eq!(report.boundary_edges, 4);
    }

    #[test]
    fn provider_spec_parsing() {
        assert_eq!(
            ProviderSpec::parse("oracle:mesh.ply").unwrap(),
            ProviderSpec::OracleMesh(PathBuf::from("mesh.ply"))
        );
        assert_eq!(
            ProviderSpec::parse("sdf:field.csv").unwrap(),
            ProviderSpec::SampledSdf(PathBuf::from("field.csv"))
        );
        assert!(ProviderSpec::parse("net:foo").is_err());
    }

    #[test]
    fn pipeline_reconstructs_a_clean_cube() {
        let (mesh, _scale) = normalize_mesh(&cube_mesh(2.0)).unwrap();
        let cloud = scan(
            &mesh,
            &ScanConfig {
                poses: 10,
                rays_per_pose: 48 * 48,
                noise_sigma: 0.0,
                seed: 21,
                ..ScanConfig::default()
            },
        )
        .unwrap();
        let oracle = MeshSdfOracle::new(&mesh).unwrap();
        let params = PipelineParams {
            hausdorff_samples: 20_000,
            ..PipelineParams::default()
        };
        let outcome = run_pipeline_on_cloud(&cloud, &oracle, Some(&mesh), &params).unwrap();
        assert!(outcome.report.watertight, "{:?}", outcome.report.warnings);
        assert_eq!(outcome.report.face_count_merged, 6);
        assert!(outcome.report.smh.unwrap() < 0.005);
        assert!(
            (outcome.report.shell_volume - outcome.report.interior_volume).abs()
                <= 1e-7 * outcome.report.interior_volume
        );
        // Determinism of the in-memory pipeline.
        let again = run_pipeline_on_cloud(&cloud, &oracle, Some(&mesh), &params).unwrap();
        assert_eq!(
            serde_json::to_string(&outcome.report).unwrap(),
            serde_json::to_string(&again.report).unwrap()
        );
    }

    #[test]
    fn compare_partitioning_on_orthogonal_planes() {
        let mesh = cube_mesh(1.0);
        let (_cloud, segments) = segments_from_mesh(&mesh, 400.0, 1).unwrap();
        let bounds = mesh.bbox().unwrap().padded(0.05);
        let rows = compare_partitioning(
            &[("cube".to_string(), segments, bounds)],
            DEFAULT_CELL_BUDGET,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        let adaptive = rows.iter().find(|r| r.strategy == "adaptive").unwrap();
        let exhaustive = rows.iter().find(|r| r.strategy == "exhaustive").unwrap();
        assert!(adaptive.cells.unwrap() <= exhaustive.cells.unwrap());
        // 6 axis planes in a padded box tile it into 3^3 cells exhaustively.
        assert_eq!(exhaustive.cells.unwrap(), 27);
    }

    #[test]
    fn budget_flags_truncated_rows() {
        let mesh = cube_mesh(1.0);
        let (_cloud, segments) = segments_from_mesh(&mesh, 400.0, 2).unwrap();
        let bounds = mesh.bbox().unwrap().padded(0.05);
        let rows =
            compare_partitioning(&[("cube".to_string(), segments, bounds)], 4).unwrap();
        assert!(rows.iter().any(|r| r.truncated));
    }
}
