//! Command-line interface for the reconstruction toolkit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use polycut::bench::{
    compare_partitioning, hausdorff, run_pipeline, watertight_check, PipelineConfig,
    PipelineParams, ProviderSpec, SurfaceSource, DEFAULT_CELL_BUDGET,
};
use polycut::cloud::PointCloud;
use polycut::complex::{build_complex, PartitionMode, PartitionStrategy};
use polycut::error::{Error, Result};
use polycut::geom::{read_mesh, write_mesh_ply_binary};
use polycut::primitives::{
    detect_planes, read_segments, refine_planes, write_segments, RansacParams, RefineParams,
};
use polycut::simscan::{
    noise_schedule, normalize_mesh, sample_queries, scan, NoiseKind, PoseMode, ScanConfig,
    ScanManifest,
};
use polycut::synth;

#[derive(Parser)]
#[command(
    name = "polycut",
    about = "Compact watertight building models from point clouds",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Virtually scan a mesh into a point cloud plus SDF-annotated queries.
    Scan(ScanArgs),
    /// Detect planar segments in a point cloud by RANSAC.
    Detect(DetectArgs),
    /// Merge near-coplanar detected segments.
    Refine(RefineArgs),
    /// Build the convex cell complex from segments.
    Partition(PartitionArgs),
    /// Full pipeline: cloud to watertight polygonal mesh.
    Reconstruct(ReconstructArgs),
    /// Hausdorff metrics and watertightness of a reconstruction.
    Eval(EvalArgs),
    /// Adaptive vs exhaustive partitioning comparison table.
    BenchPartition(BenchPartitionArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Adaptive,
    Exhaustive,
}

impl From<StrategyArg> for PartitionMode {
    fn from(s: StrategyArg) -> PartitionMode {
        match s {
            StrategyArg::Adaptive => PartitionMode::Adaptive,
            StrategyArg::Exhaustive => PartitionMode::Exhaustive,
        }
    }
}

#[derive(Args)]
struct ScanArgs {
    /// Watertight input mesh (.obj or .ply).
    #[arg(long)]
    mesh: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 16)]
    poses: usize,
    /// Rays per pose (cast as a square grid).
    #[arg(long, default_value_t = 16384)]
    rays: usize,
    /// Orbit radius as a multiple of the bbox diagonal.
    #[arg(long, default_value_t = 3.0)]
    radius_mult: f64,
    /// Upper-hemisphere poses only (no-bottom scan).
    #[arg(long)]
    hemisphere: bool,
    /// Depth noise: `level:<0..4>` (fractions {0,0.001,0.005,0.01,0.05} of R),
    /// `train:<seed>` (U[0,0.005R]), or an absolute sigma.
    #[arg(long, default_value = "level:0")]
    noise: String,
    #[arg(long, value_enum, default_value_t = PoseModeArg::Random)]
    pose_mode: PoseModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoseModeArg {
    Random,
    Fibonacci,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.005)]
    inlier_distance: f64,
    #[arg(long, default_value_t = 50)]
    min_support: usize,
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 0.9)]
    normal_consistency: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    segments: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Angle tolerance in degrees.
    #[arg(long, default_value_t = 5.0)]
    angle_deg: f64,
    #[arg(long, default_value_t = 0.01)]
    distance: f64,
    /// Inlier distance the segments were detected with (rebuilds their
    /// padded boxes).
    #[arg(long, default_value_t = 0.005)]
    inlier_distance: f64,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    segments: PathBuf,
    #[arg(long, value_enum, default_value_t = StrategyArg::Adaptive)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 0.05)]
    padding: f64,
    #[arg(long, default_value_t = 0.005)]
    inlier_distance: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Input point cloud (.ply or .xyz).
    #[arg(long)]
    input: Option<PathBuf>,
    /// SDF provider: `oracle:<mesh>` or `sdf:<file>`.
    #[arg(long)]
    provider: Option<String>,
    /// Ground-truth mesh for metrics (defaults to the oracle mesh).
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key=value config file; flags override file entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Register the AABB walls as virtual shell-face primitives
    /// (for no-bottom scans).
    #[arg(long)]
    no_bottom_walls: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    inlier_distance: Option<f64>,
    #[arg(long)]
    min_support: Option<usize>,
    #[arg(long)]
    angle_deg: Option<f64>,
    #[arg(long)]
    refine_distance: Option<f64>,
    #[arg(long)]
    padding: Option<f64>,
    #[arg(long)]
    hausdorff_samples: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Reconstructed mesh.
    #[arg(long)]
    mesh: PathBuf,
    /// Ground-truth mesh.
    #[arg(long)]
    reference: PathBuf,
    /// Point cloud for the one-directional cloud-to-mesh protocol
    /// (used instead of mesh-to-mesh when given).
    #[arg(long)]
    cloud: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchPartitionArgs {
    /// `cloud.ply:segments.json` pairs.
    #[arg(long = "set")]
    sets: Vec<String>,
    /// Generate this many synthetic building scenes instead.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Minimum distinct planes per synthetic scene.
    #[arg(long, default_value_t = 20)]
    min_planes: usize,
    #[arg(long, default_value_t = DEFAULT_CELL_BUDGET)]
    budget: usize,
    #[arg(long, default_value_t = 0.005)]
    inlier_distance: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scan(args) => cmd_scan(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Refine(args) => cmd_refine(args),
        Command::Partition(args) => cmd_partition(args),
        Command::Reconstruct(args) => cmd_reconstruct(args),
        Command::Eval(args) => cmd_eval(args),
        Command::BenchPartition(args) => cmd_bench_partition(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(2)
        }
    }
}

fn cmd_scan(args: ScanArgs) -> Result<()> {
    let mesh = read_mesh(&args.mesh)?;
    let (mesh, scale) = normalize_mesh(&mesh)?;
    let sigma = match args.noise.split_once(':') {
        Some(("level", level)) => {
            let level: usize = level
                .parse()
                .map_err(|_| Error::Config(format!("bad noise level `{}`", args.noise)))?;
            noise_schedule(NoiseKind::Eval(level), &scale)?
        }
        Some(("train", seed)) => {
            let seed: u64 = seed
                .parse()
                .map_err(|_| Error::Config(format!("bad train seed `{}`", args.noise)))?;
            noise_schedule(NoiseKind::Train { seed }, &scale)?
        }
        _ => args
            .noise
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad noise spec `{}`", args.noise)))?,
    };
    let config = ScanConfig {
        poses: args.poses,
        sphere_radius: args.radius_mult,
        hemisphere_only: args.hemisphere,
        rays_per_pose: args.rays,
        noise_sigma: sigma,
        pose_mode: match args.pose_mode {
            PoseModeArg::Random => PoseMode::RandomSphere,
            PoseModeArg::Fibonacci => PoseMode::Fibonacci,
        },
        seed: args.seed,
    };
    let cloud = scan(&mesh, &config)?;
    let queries = sample_queries(&mesh, &scale, args.seed)?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    cloud.write(&args.out.join("cloud.ply"))?;
    cloud.write(&args.out.join("cloud.xyz"))?;
    write_mesh_ply_binary(&args.out.join("mesh_normalized.ply"), &mesh)?;
    queries.write_csv(&args.out.join("queries.csv"))?;
    let manifest = ScanManifest {
        mesh: args.mesh.display().to_string(),
        seed: args.seed,
        sigma,
        pose_mode: match config.pose_mode {
            PoseMode::RandomSphere => "random".to_string(),
            PoseMode::Fibonacci => "fibonacci".to_string(),
        },
        hemisphere_only: config.hemisphere_only,
        poses: config.poses,
        rays_per_pose: config.rays_per_pose,
        point_count: cloud.len(),
        query_count: queries.points.len(),
        dropout_count: queries.dropout.len(),
        cloud_checksum: cloud.checksum(),
        scene_scale: scale.r,
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;
    println!(
        "scanned {} points (sigma {sigma}), {} queries -> {}",
        cloud.len(),
        queries.points.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let cloud = PointCloud::read(&args.cloud)?;
    let params = RansacParams {
        inlier_distance: args.inlier_distance,
        normal_consistency: args.normal_consistency,
        min_support: args.min_support,
        max_iterations: args.max_iterations,
        seed: args.seed,
    };
    let segments = detect_planes(&cloud, &params)?;
    write_segments(&args.out, &cloud, &segments)?;
    println!(
        "detected {} segments covering {} of {} points -> {}",
        segments.len(),
        segments.iter().map(|s| s.support()).sum::<usize>(),
        cloud.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_refine(args: RefineArgs) -> Result<()> {
    let cloud = PointCloud::read(&args.cloud)?;
    let segments = read_segments(&args.segments, &cloud, 2.0 * args.inlier_distance)?;
    let before = segments.len();
    let params = RefineParams {
        angle_tolerance: args.angle_deg.to_radians(),
        distance_tolerance: args.distance,
    };
    let refined = refine_planes(&cloud, segments, &params)?;
    write_segments(&args.out, &cloud, &refined)?;
    println!(
        "refined {before} -> {} segments -> {}",
        refined.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_partition(args: PartitionArgs) -> Result<()> {
    let cloud = PointCloud::read(&args.cloud)?;
    let segments = read_segments(&args.segments, &cloud, 2.0 * args.inlier_distance)?;
    let strategy = PartitionStrategy {
        mode: args.strategy.into(),
        aabb_padding: args.padding,
    };
    let mut inliers = segments
        .iter()
        .flat_map(|s| s.inliers.iter().map(|&i| &cloud.points[i]))
        .peekable();
    let bounds = if inliers.peek().is_some() {
        polycut::geom::Aabb::from_points(inliers)?
    } else {
        cloud.bbox()?
    }
    .padded(args.padding);
    let complex = build_complex(&segments, &bounds, &strategy)?;
    complex.write_json(&args.out)?;
    println!(
        "partitioned into {} cells, {} adjacency records -> {}",
        complex.len(),
        complex.adjacency().len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_reconstruct(args: ReconstructArgs) -> Result<()> {
    let mut file = args
        .config
        .as_deref()
        .map(ConfigFile::load)
        .transpose()?
        .unwrap_or_default();

    let input = args
        .input
        .or_else(|| file.take_path("input"))
        .ok_or_else(|| Error::Config("missing --input (or `input` in config)".into()))?;
    let provider_spec = args
        .provider
        .or_else(|| file.take("provider"))
        .ok_or_else(|| Error::Config("missing --provider (or `provider` in config)".into()))?;
    let provider = ProviderSpec::parse(&provider_spec)?;
    let output_dir = args
        .out
        .or_else(|| file.take_path("output_dir"))
        .ok_or_else(|| Error::Config("missing --out (or `output_dir` in config)".into()))?;
    let reference = args.reference.or_else(|| file.take_path("reference"));

    let mut params = PipelineParams::default();
    if let Some(v) = file.take_parsed::<f64>("lambda")? {
        params.lambda = v;
    }
    if let Some(v) = file.take_parsed::<f64>("beta")? {
        params.beta = v;
    }
    if let Some(v) = file.take_parsed::<f64>("ransac_inlier_distance")? {
        params.ransac.inlier_distance = v;
    }
    if let Some(v) = file.take_parsed::<f64>("ransac_normal_consistency")? {
        params.ransac.normal_consistency = v;
    }
    if let Some(v) = file.take_parsed::<usize>("ransac_min_support")? {
        params.ransac.min_support = v;
    }
    if let Some(v) = file.take_parsed::<usize>("ransac_max_iterations")? {
        params.ransac.max_iterations = v;
    }
    if let Some(v) = file.take_parsed::<u64>("seed_detect")? {
        params.ransac.seed = v;
    }
    if let Some(v) = file.take_parsed::<f64>("refine_angle_deg")? {
        params.refine.angle_tolerance = v.to_radians();
    }
    if let Some(v) = file.take_parsed::<f64>("refine_distance")? {
        params.refine.distance_tolerance = v;
    }
    if let Some(v) = file.take("strategy") {
        params.strategy.mode = match v.as_str() {
            "adaptive" => PartitionMode::Adaptive,
            "exhaustive" => PartitionMode::Exhaustive,
            other => return Err(Error::Config(format!("unknown strategy `{other}`"))),
        };
    }
    if let Some(v) = file.take_parsed::<f64>("aabb_padding")? {
        params.strategy.aabb_padding = v;
    }
    if let Some(v) = file.take_parsed::<bool>("no_bottom_walls")? {
        params.no_bottom_walls = v;
    }
    if let Some(v) = file.take_parsed::<usize>("hausdorff_samples")? {
        params.hausdorff_samples = v;
    }
    if let Some(v) = file.take_parsed::<u64>("seed_hausdorff")? {
        params.hausdorff_seed = v;
    }
    file.finish()?;

    // Flags override file entries.
    if let Some(v) = args.lambda {
        params.lambda = v;
    }
    if let Some(v) = args.beta {
        params.beta = v;
    }
    if let Some(v) = args.strategy {
        params.strategy.mode = v.into();
    }
    if args.no_bottom_walls {
        params.no_bottom_walls = true;
    }
    if let Some(v) = args.seed {
        params.ransac.seed = v;
    }
    if let Some(v) = args.inlier_distance {
        params.ransac.inlier_distance = v;
    }
    if let Some(v) = args.min_support {
        params.ransac.min_support = v;
    }
    if let Some(v) = args.angle_deg {
        params.refine.angle_tolerance = v.to_radians();
    }
    if let Some(v) = args.refine_distance {
        params.refine.distance_tolerance = v;
    }
    if let Some(v) = args.padding {
        params.strategy.aabb_padding = v;
    }
    if let Some(v) = args.hausdorff_samples {
        params.hausdorff_samples = v;
    }

    let config = PipelineConfig {
        input,
        provider,
        reference,
        output_dir: output_dir.clone(),
        params,
    };
    let outcome = run_pipeline(&config)?;
    for warning in &outcome.report.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "reconstructed {} faces ({} merged), {} cells, watertight: {} -> {}",
        outcome.report.face_count_raw,
        outcome.report.face_count_merged,
        outcome.report.cell_count,
        outcome.report.watertight,
        output_dir.display()
    );
    if let Some(smh) = outcome.report.smh {
        println!("smh: {:.6} of reference bbox diagonal", smh);
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mesh = read_mesh(&args.mesh)?;
    let reference = read_mesh(&args.reference)?;
    let metrics = match &args.cloud {
        Some(path) => {
            let cloud = PointCloud::read(path)?;
            hausdorff(
                SurfaceSource::Points(&cloud.points),
                &mesh,
                args.samples,
                (args.seed, args.seed ^ 0x9E37_79B9),
            )?
        }
        None => hausdorff(
            SurfaceSource::Mesh(&mesh),
            &reference,
            args.samples,
            (args.seed, args.seed ^ 0x9E37_79B9),
        )?,
    };
    let diagonal = reference.bbox()?.diagonal();
    let closure = watertight_check(&mesh);
    let report = serde_json::json!({
        "smh": metrics.smh / diagonal,
        "hausdorff_max": metrics.max / diagonal,
        "smh_absolute": metrics.smh,
        "reference_diagonal": diagonal,
        "watertight": closure.closed,
        "boundary_edges": closure.boundary_edges,
        "nonmanifold_edges": closure.nonmanifold_edges,
        "signed_volume": closure.signed_volume,
        "faces": mesh.faces.len(),
    });
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::parse("report", e.to_string()))?;
    if let Some(out) = &args.out {
        std::fs::write(out, &text).map_err(|e| Error::io(out.display().to_string(), e))?;
    }
    println!("{text}");
    Ok(())
}

fn cmd_bench_partition(args: BenchPartitionArgs) -> Result<()> {
    let mut sets = Vec::new();
    if let Some(n) = args.synthetic {
        for k in 0..n {
            let mesh = synth::building_mesh(args.seed.wrapping_add(k as u64), args.min_planes)?;
            let (cloud, segments) =
                synth::segments_from_mesh(&mesh, 3000.0, args.seed.wrapping_add(k as u64))?;
            let bounds = cloud.bbox()?.padded(0.05);
            sets.push((format!("building-{k}"), segments, bounds));
        }
    }
    for pair in &args.sets {
        let (cloud_path, seg_path) = pair.split_once(':').ok_or_else(|| {
            Error::Config(format!("--set expects cloud.ply:segments.json, got `{pair}`"))
        })?;
        let cloud = PointCloud::read(Path::new(cloud_path))?;
        let segments = read_segments(Path::new(seg_path), &cloud, 2.0 * args.inlier_distance)?;
        let mut inliers = segments
            .iter()
            .flat_map(|s| s.inliers.iter().map(|&i| &cloud.points[i]))
            .peekable();
        let bounds = if inliers.peek().is_some() {
            polycut::geom::Aabb::from_points(inliers)?
        } else {
            cloud.bbox()?
        }
        .padded(0.05);
        sets.push((cloud_path.to_string(), segments, bounds));
    }
    let rows = compare_partitioning(&sets, args.budget)?;
    polycut::bench::write_partition_csv(&args.out, &rows)?;
    for row in &rows {
        println!(
            "{:>12} {:>10}: cells {:>8} splits {:>8} {:.3}s{}",
            row.name,
            row.strategy,
            row.cells.map_or("-".into(), |c| c.to_string()),
            row.splits.map_or("-".into(), |s| s.to_string()),
            row.seconds,
            if row.truncated { " (budget exceeded)" } else { "" }
        );
    }
    println!("-> {}", args.out.display());
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Flat `key = value` config file (one pair per line, `#` comments).
#[derive(Default)]
struct ConfigFile {
    entries: std::collections::BTreeMap<String, String>,
}

impl ConfigFile {
    fn load(path: &Path) -> Result<ConfigFile> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut entries = std::collections::BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(
                    path.display().to_string(),
                    format!("expected key = value at line {}", lineno + 1),
                )
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn take_path(&mut self, key: &str) -> Option<PathBuf> {
        self.take(key).map(PathBuf::from)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("config key `{key}` has unparsable value `{raw}`"))
            }),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        Ok(())
    }
}
