use polycut::bench::{run_pipeline_on_cloud, PipelineParams};
use polycut::extract::FaceProvenance;
use polycut::occupancy::{MeshSdfOracle, SdfProvider};
use polycut::simscan::{normalize_mesh, scan, ScanConfig};
use polycut::synth::l_shape_mesh;

fn main() {
    let (mesh, _) = normalize_mesh(&l_shape_mesh()).unwrap();
    println!("mesh bbox: {:?}", mesh.bbox().unwrap());
    let cloud = scan(&mesh, &ScanConfig {
        poses: 12, rays_per_pose: 48*48, noise_sigma: 0.0, hemisphere_only: true, seed: 77,
        ..ScanConfig::default()
    }).unwrap();
    println!("cloud: {} points, bbox {:?}", cloud.len(), cloud.bbox().unwrap());
    let oracle = MeshSdfOracle::new(&mesh).unwrap();
    let params = PipelineParams { no_bottom_walls: true, hausdorff_samples: 1000, ..PipelineParams::default() };
    let outcome = run_pipeline_on_cloud(&cloud, &oracle, None, &params).unwrap();
    println!("segments: {}", outcome.segments.len());
    for s in &outcome.segments {
        println!("  n={:?} d={:.4} support={}", s.plane.normal().as_slice(), s.plane.offset(), s.support());
    }
    println!("cells: {} interior: {}", outcome.complex.len(), outcome.report.interior_cells);
    println!("bounds: {:?}", outcome.complex.bounds);
    for (i, cell) in outcome.complex.cells().iter().enumerate() {
        let c = cell.centroid();
        let inside = oracle.sdf(&c).unwrap();
        println!("  cell {i}: centroid ({:.3},{:.3},{:.3}) vol {:.4} sdf {:+.4} label {:?} flags {:06b}",
            c.x, c.y, c.z, cell.volume(), inside, outcome.labeling.0[i], outcome.complex.boundary_flags(i));
    }
    let walls = outcome.shell.provenance.iter().filter(|p| matches!(p, FaceProvenance::Wall{..})).count();
    println!("shell faces: {} (wall {walls})", outcome.shell.mesh.faces.len());
    for p in &outcome.shell.provenance {
        if let FaceProvenance::Wall { wall, interior } = p {
            println!("  wall face {:?} from cell {interior}", wall);
        }
    }
}
