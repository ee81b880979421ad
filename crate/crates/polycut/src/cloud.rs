//! Point clouds and their file formats (PLY and XYZ).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3};

/// An unorganized point cloud. The pipeline is normal-free by design, so
/// points carry positions only.
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> PointCloud {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox(&self) -> Result<Aabb> {
        Aabb::from_points(self.points.iter())
    }

    /// SHA-256 over the little-endian f64 coordinates, as lowercase hex.
    /// Segment files embed this to pin the cloud they index into.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for p in &self.points {
            for c in [p.x, p.y, p.z] {
                hasher.update(c.to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    pub fn read(path: &Path) -> Result<PointCloud> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        let points = match ext.as_deref() {
            Some("ply") => crate::geom::read_ply_points(path)?,
            Some("xyz") | Some("txt") => read_xyz(path)?,
            _ => {
                return Err(Error::parse(
                    path.display().to_string(),
                    "unknown point cloud extension (expected .ply or .xyz)",
                ))
            }
        };
        for p in &points {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::parse(
                    path.display().to_string(),
                    "non-finite point coordinates",
                ));
            }
        }
        Ok(PointCloud::new(points))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("ply") => self.write_ply(path),
            Some("xyz") | Some("txt") => self.write_xyz(path),
            _ => Err(Error::parse(
                path.display().to_string(),
                "unknown point cloud extension (expected .ply or .xyz)",
            )),
        }
    }

    /// Binary little-endian PLY, float64 coordinates, no face element.
    pub fn write_ply(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e| Error::io(path.display().to_string(), e);
        write!(
            w,
            "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
            self.points.len()
        )
        .map_err(io_err)?;
        for p in &self.points {
            for c in [p.x, p.y, p.z] {
                w.write_all(&c.to_le_bytes()).map_err(io_err)?;
            }
        }
        Ok(())
    }

    pub fn write_xyz(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e| Error::io(path.display().to_string(), e);
        for p in &self.points {
            writeln!(w, "{} {} {}", p.x, p.y, p.z).map_err(io_err)?;
        }
        Ok(())
    }
}

fn read_xyz(path: &Path) -> Result<Vec<Point3>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let mut coord = [0.0; 3];
        for c in &mut coord {
            *c = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| {
                    Error::parse(
                        path.display().to_string(),
                        format!("bad xyz record at line {}", lineno + 1),
                    )
                })?;
        }
        points.push(Point3::new(coord[0], coord[1], coord[2]));
    }
    Ok(points)
}
