//! Sampled signed-distance fields: the import path for externally predicted
//! fields (e.g. a neural estimator run out of process).
//!
//! Two on-disk forms:
//!  - binary grid: header `{origin[3] f64, spacing f64, dims[3] u32}` little
//!    endian, then `dims.x * dims.y * dims.z` f32 values, x-fastest;
//!  - CSV scatter: `x,y,z,d` per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::geom::Point3;

use super::SdfProvider;

enum Repr {
    Grid {
        origin: Point3,
        spacing: f64,
        dims: [usize; 3],
        /// x-fastest: index = x + dims[0] * (y + dims[1] * z)
        values: Vec<f32>,
    },
    Scattered {
        samples: Vec<(Point3, f64)>,
    },
}

/// A sampled SDF: trilinear interpolation on grids, nearest sample for
/// scattered lists. Queries outside the domain clamp to its boundary and are
/// counted in [`SampledSdfField::clamped_queries`].
pub struct SampledSdfField {
    repr: Repr,
    clamped: AtomicUsize,
}

impl SampledSdfField {
    pub fn from_grid(
        origin: Point3,
        spacing: f64,
        dims: [usize; 3],
        values: Vec<f32>,
    ) -> Result<SampledSdfField> {
        if spacing <= 0.0 {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::Config("grid needs at least 2 samples per axis".into()));
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::Config(format!(
                "grid value count {} does not match dims {:?}",
                values.len(),
                dims
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite grid value".into()));
        }
        Ok(SampledSdfField {
            repr: Repr::Grid {
                origin,
                spacing,
                dims,
                values,
            },
            clamped: AtomicUsize::new(0),
        })
    }

    pub fn from_samples(samples: Vec<(Point3, f64)>) -> Result<SampledSdfField> {
        if samples.is_empty() {
            return Err(Error::Config("empty sample list".into()));
        }
        Ok(SampledSdfField {
            repr: Repr::Scattered { samples },
            clamped: AtomicUsize::new(0),
        })
    }

    /// How many queries so far fell outside the field domain.
    pub fn clamped_queries(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Sample a provider over a regular grid covering `min..max`.
    pub fn sample_provider(
        provider: &dyn SdfProvider,
        min: Point3,
        max: Point3,
        resolution: usize,
    ) -> Result<SampledSdfField> {
        let dims = [resolution, resolution, resolution];
        let extent = (max - min).amax();
        let spacing = extent / (resolution - 1) as f64;
        let mut values = Vec::with_capacity(resolution.pow(3));
        for z in 0..resolution {
            for y in 0..resolution {
                for x in 0..resolution {
                    let p = Point3::new(
                        min.x + x as f64 * spacing,
                        min.y + y as f64 * spacing,
                        min.z + z as f64 * spacing,
                    );
                    values.push(provider.sdf(&p)? as f32);
                }
            }
        }
        SampledSdfField::from_grid(min, spacing, dims, values)
    }

    pub fn write_grid(&self, path: &Path) -> Result<()> {
        let Repr::Grid {
            origin,
            spacing,
            dims,
            values,
        } = &self.repr
        else {
            return Err(Error::Config("scattered field has no grid form".into()));
        };
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e| Error::io(path.display().to_string(), e);
        for c in [origin.x, origin.y, origin.z, *spacing] {
            w.write_all(&c.to_le_bytes()).map_err(io_err)?;
        }
        for d in dims {
            w.write_all(&(*d as u32).to_le_bytes()).map_err(io_err)?;
        }
        for v in values {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
        Ok(())
    }

    pub fn read_grid(path: &Path) -> Result<SampledSdfField> {
        let mut data = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut data))
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let header = 4 * 8 + 3 * 4;
        if data.len() < header {
            return Err(Error::parse(path.display().to_string(), "truncated grid header"));
        }
        let f64_at = |i: usize| f64::from_le_bytes(data[i..i + 8].try_into().unwrap());
        let u32_at = |i: usize| u32::from_le_bytes(data[i..i + 4].try_into().unwrap()) as usize;
        let origin = Point3::new(f64_at(0), f64_at(8), f64_at(16));
        let spacing = f64_at(24);
        let dims = [u32_at(32), u32_at(36), u32_at(40)];
        let count = dims[0]
            .checked_mul(dims[1])
            .and_then(|n| n.checked_mul(dims[2]))
            .ok_or_else(|| Error::parse(path.display().to_string(), "grid dims overflow"))?;
        if data.len() != header + 4 * count {
            return Err(Error::parse(
                path.display().to_string(),
                format!(
                    "payload is {} bytes, header promises {}",
                    data.len() - header,
                    4 * count
                ),
            ));
        }
        let values = (0..count)
            .map(|i| f32::from_le_bytes(data[header + 4 * i..header + 4 * i + 4].try_into().unwrap()))
            .collect();
        SampledSdfField::from_grid(origin, spacing, dims, values)
    }

    /// CSV scatter form: `x,y,z,d` per line.
    pub fn read_csv(path: &Path) -> Result<SampledSdfField> {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let reader = BufReader::new(file);
        let mut samples = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| {
                    Error::parse(
                        path.display().to_string(),
                        format!("bad csv record at line {}", lineno + 1),
                    )
                })?;
            if fields.len() < 4 {
                return Err(Error::parse(
                    path.display().to_string(),
                    format!("expected x,y,z,d at line {}", lineno + 1),
                ));
            }
            samples.push((Point3::new(fields[0], fields[1], fields[2]), fields[3]));
        }
        SampledSdfField::from_samples(samples)
    }

    fn grid_value(&self, p: &Point3) -> f64 {
        let Repr::Grid {
            origin,
            spacing,
            dims,
            values,
        } = &self.repr
        else {
            unreachable!()
        };
        let mut clamped = false;
        let mut q = [0.0f64; 3];
        for a in 0..3 {
            let t = (p[a] - origin[a]) / spacing;
            let max = (dims[a] - 1) as f64;
            q[a] = t.clamp(0.0, max);
            if (t - q[a]).abs() > 1e-9 {
                clamped = true;
            }
        }
        if clamped {
            self.clamped.fetch_add(1, Ordering::Relaxed);
        }
        let cell = |a: usize| -> (usize, usize, f64) {
            let i = (q[a].floor() as usize).min(dims[a] - 2);
            (i, i + 1, q[a] - i as f64)
        };
        let (x0, x1, fx) = cell(0);
        let (y0, y1, fy) = cell(1);
        let (z0, z1, fz) = cell(2);
        let at = |x: usize, y: usize, z: usize| values[x + dims[0] * (y + dims[1] * z)] as f64;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(at(x0, y0, z0), at(x1, y0, z0), fx);
        let c10 = lerp(at(x0, y1, z0), at(x1, y1, z0), fx);
        let c01 = lerp(at(x0, y0, z1), at(x1, y0, z1), fx);
        let c11 = lerp(at(x0, y1, z1), at(x1, y1, z1), fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    }

    fn scattered_value(&self, p: &Point3) -> f64 {
        let Repr::Scattered { samples } = &self.repr else {
            unreachable!()
        };
        samples
            .iter()
            .map(|(q, d)| ((p - q).norm_squared(), *d))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, d)| d)
            .expect("non-empty by construction")
    }
}

impl SdfProvider for SampledSdfField {
    fn sdf(&self, p: &Point3) -> Result<f64> {
        Ok(match &self.repr {
            Repr::Grid { .. } => self.grid_value(p),
            Repr::Scattered { .. } => self.scattered_value(p),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Aabb, ConvexCell};
    use crate::occupancy::MeshSdfOracle;

    /// Grid storing d(x,y,z) = z.
    fn z_field(n: usize) -> SampledSdfField {
        let mut values = Vec::new();
        for z in 0..n {
            for _y in 0..n {
                for _x in 0..n {
                    values.push(z as f32 * 0.1);
                }
            }
        }
        SampledSdfField::from_grid(Point3::origin(), 0.1, [n, n, n], values).unwrap()
    }

    #[test]
    fn lattice_points_are_exact() {
        let field = z_field(5);
        for z in 0..5 {
            let p = Point3::new(0.2, 0.3, z as f64 * 0.1);
            assert!((field.sdf(&p).unwrap() - z as f64 * 0.1).abs() < 1e-7);
        }
        assert_eq!(field.clamped_queries(), 0);
    }

    #[test]
    fn trilinear_reproduces_linear_field() {
        let field = z_field(5);
        let p = Point3::new(0.217, 0.133, 0.237);
        assert!((field.sdf(&p).unwrap() - 0.237).abs() < 1e-7);
    }

    #[test]
    fn outside_queries_clamp_and_flag() {
        let field = z_field(5);
        let d = field.sdf(&Point3::new(0.2, 0.2, 9.0)).unwrap();
        assert!((d - 0.4).abs() < 1e-7);
        assert_eq!(field.clamped_queries(), 1);
    }

    #[test]
    fn grid_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.sdf");
        let field = z_field(4);
        field.write_grid(&path).unwrap();
        let back = SampledSdfField::read_grid(&path).unwrap();
        for p in [
            Point3::new(0.05, 0.1, 0.2),
            Point3::new(0.3, 0.3, 0.3),
            Point3::origin(),
        ] {
            assert_eq!(back.sdf(&p).unwrap(), field.sdf(&p).unwrap());
        }
    }

    #[test]
    fn csv_scatter_nearest_sample() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        std::fs::write(&path, "x,y,z,d\n0,0,0,1.5\n1,0,0,-2.5\n").unwrap();
        let field = SampledSdfField::read_csv(&path).unwrap();
        assert_eq!(field.sdf(&Point3::new(0.1, 0.0, 0.0)).unwrap(), 1.5);
        assert_eq!(field.sdf(&Point3::new(0.9, 0.0, 0.0)).unwrap(), -2.5);
    }

    #[test]
    fn empty_field_is_an_error() {
        assert!(SampledSdfField::from_samples(vec![]).is_err());
    }

    #[test]
    fn cube_field_error_bounded_by_grid_diagonal() {
        let mesh = ConvexCell::from_aabb(
            &Aabb::new(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5)).unwrap(),
        )
        .to_mesh();
        let oracle = MeshSdfOracle::new(&mesh).unwrap();
        let field = SampledSdfField::sample_provider(
            &oracle,
            Point3::new(-0.8, -0.8, -0.8),
            Point3::new(0.8, 0.8, 0.8),
            64,
        )
        .unwrap();
        let spacing = 1.6 / 63.0;
        let diagonal = spacing * 3.0f64.sqrt();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        use rand::Rng;
        let mut max_err: f64 = 0.0;
        for _ in 0..1000 {
            let p = Point3::new(
                rng.random_range(-0.75..0.75),
                rng.random_range(-0.75..0.75),
                rng.random_range(-0.75..0.75),
            );
            let err = (field.sdf(&p).unwrap() - oracle.sdf(&p).unwrap()).abs();
            max_err = max_err.max(err);
        }
        assert!(
            max_err <= diagonal,
            "max interpolation error {max_err} exceeds grid diagonal {diagonal}"
        );
    }
}
