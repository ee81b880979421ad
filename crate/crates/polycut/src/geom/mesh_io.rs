//! OBJ and PLY mesh file I/O.
//!
//! OBJ is ascii `v`/`f` records with 1-based indices. PLY supports ascii and
//! binary little-endian, vertices as float64 x/y/z and faces as
//! `vertex_indices` lists; binary PLY round-trips bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Point3, PolyMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyAscii,
    PlyBinary,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::PlyBinary),
            _ => None,
        }
    }
}

/// Read a mesh, picking the parser from the file extension.
pub fn read_mesh(path: &Path) -> Result<PolyMesh> {
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| Error::parse(path.display().to_string(), "unknown mesh extension"))?;
    let mesh = match format {
        MeshFormat::Obj => read_obj(path)?,
        _ => {
            let (vertices, faces) = read_ply(path)?;
            PolyMesh::new(vertices, faces)
        }
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Write a mesh: `.obj` as ascii OBJ, `.ply` as binary little-endian PLY.
pub fn write_mesh(path: &Path, mesh: &PolyMesh) -> Result<()> {
    match MeshFormat::from_path(path) {
        Some(MeshFormat::Obj) => write_obj(path, mesh),
        Some(_) => write_mesh_ply_binary(path, mesh),
        None => Err(Error::parse(
            path.display().to_string(),
            "unknown mesh extension",
        )),
    }
}

fn read_obj(path: &Path) -> Result<PolyMesh> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut coord = [0.0; 3];
                for c in &mut coord {
                    *c = parts
                        .next()
                        .and_then(|t| t.parse::<f64>().ok())
                        .ok_or_else(|| {
                            Error::parse(
                                path.display().to_string(),
                                format!("bad vertex at line {}", lineno + 1),
                            )
                        })?;
                }
                vertices.push(Point3::new(coord[0], coord[1], coord[2]));
            }
            Some("f") => {
                let mut face = Vec::new();
                for tok in parts {
                    let idx_tok = tok.split('/').next().unwrap_or(tok);
                    let idx: i64 = idx_tok.parse().map_err(|_| {
                        Error::parse(
                            path.display().to_string(),
                            format!("bad face index at line {}", lineno + 1),
                        )
                    })?;
                    let resolved = if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        idx - 1
                    };
                    if resolved < 0 {
                        return Err(Error::parse(
                            path.display().to_string(),
                            format!("face index out of range at line {}", lineno + 1),
                        ));
                    }
                    face.push(resolved as usize);
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Ok(PolyMesh::new(vertices, faces))
}

fn write_obj(path: &Path, mesh: &PolyMesh) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z).map_err(io_err)?;
    }
    for face in &mesh.faces {
        write!(w, "f").map_err(io_err)?;
        for &i in face {
            write!(w, " {}", i + 1).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    Ok(())
}

/// Write binary little-endian PLY with float64 vertices.
pub fn write_mesh_ply_binary(path: &Path, mesh: &PolyMesh) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.faces.len()
    )
    .map_err(io_err)?;
    for v in &mesh.vertices {
        for c in [v.x, v.y, v.z] {
            w.write_all(&c.to_le_bytes()).map_err(io_err)?;
        }
    }
    for face in &mesh.faces {
        if face.len() > u8::MAX as usize {
            return Err(Error::Geometry(format!(
                "face with {} vertices exceeds PLY list count",
                face.len()
            )));
        }
        w.write_all(&[face.len() as u8]).map_err(io_err)?;
        for &i in face {
            w.write_all(&(i as i32).to_le_bytes()).map_err(io_err)?;
        }
    }
    Ok(())
}

/// Write ascii PLY (shortest round-trip float formatting).
pub fn write_mesh_ply_ascii(path: &Path, mesh: &PolyMesh) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    write!(
        w,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.faces.len()
    )
    .map_err(io_err)?;
    for v in &mesh.vertices {
        writeln!(w, "{} {} {}", v.x, v.y, v.z).map_err(io_err)?;
    }
    for face in &mesh.faces {
        write!(w, "{}", face.len()).map_err(io_err)?;
        for &i in face {
            write!(w, " {i}").map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(tok: &str) -> Option<PlyType> {
        Some(match tok {
            "char" | "int8" => PlyType::I8,
            "uchar" | "uint8" => PlyType::U8,
            "short" | "int16" => PlyType::I16,
            "ushort" | "uint16" => PlyType::U16,
            "int" | "int32" => PlyType::I32,
            "uint" | "uint32" => PlyType::U32,
            "float" | "float32" => PlyType::F32,
            "double" | "float64" => PlyType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            PlyType::I8 | PlyType::U8 => 1,
            PlyType::I16 | PlyType::U16 => 2,
            PlyType::I32 | PlyType::U32 | PlyType::F32 => 4,
            PlyType::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            PlyType::I8 => bytes[0] as i8 as f64,
            PlyType::U8 => bytes[0] as f64,
            PlyType::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            PlyType::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            PlyType::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyType::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyType::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyType::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum PlyProperty {
    Scalar { ty: PlyType, name: String },
    List { count: PlyType, item: PlyType, name: String },
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

/// Read PLY vertices and faces (faces may be absent for point-cloud files).
pub(crate) fn read_ply(path: &Path) -> Result<(Vec<Point3>, Vec<Vec<usize>>)> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = BufReader::new(file);
    let perr = |reason: &str| Error::parse(path.display().to_string(), reason.to_string());

    let mut header_line = String::new();
    let mut read_line = |reader: &mut BufReader<File>| -> Result<String> {
        header_line.clear();
        let n = reader
            .read_line(&mut header_line)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        if n == 0 {
            return Err(Error::parse(path.display().to_string(), "truncated header"));
        }
        Ok(header_line.trim_end().to_string())
    };

    if read_line(&mut reader)? != "ply" {
        return Err(perr("missing ply magic"));
    }
    let mut ascii = true;
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let line = read_line(&mut reader)?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("format") => match toks.next() {
                Some("ascii") => ascii = true,
                Some("binary_little_endian") => ascii = false,
                other => {
                    return Err(perr(&format!("unsupported ply format {other:?}")));
                }
            },
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = toks.next().ok_or_else(|| perr("element without name"))?;
                let count: usize = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| perr("element without count"))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| perr("property before element"))?;
                let first = toks.next().ok_or_else(|| perr("bare property"))?;
                if first == "list" {
                    let count = toks
                        .next()
                        .and_then(PlyType::parse)
                        .ok_or_else(|| perr("bad list count type"))?;
                    let item = toks
                        .next()
                        .and_then(PlyType::parse)
                        .ok_or_else(|| perr("bad list item type"))?;
                    let name = toks.next().ok_or_else(|| perr("list without name"))?;
                    element.properties.push(PlyProperty::List {
                        count,
                        item,
                        name: name.to_string(),
                    });
                } else {
                    let ty = PlyType::parse(first).ok_or_else(|| perr("bad property type"))?;
                    let name = toks.next().ok_or_else(|| perr("property without name"))?;
                    element.properties.push(PlyProperty::Scalar {
                        ty,
                        name: name.to_string(),
                    });
                }
            }
            Some("end_header") => break,
            other => return Err(perr(&format!("unexpected header token {other:?}"))),
        }
    }

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    if ascii {
        let mut lines = reader.lines();
        let mut next_line = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::parse(path.display().to_string(), format!("missing {what}")))?
                .map_err(|e| Error::io(path.display().to_string(), e))
        };
        for element in &elements {
            for _ in 0..element.count {
                let line = next_line(&element.name)?;
                let mut toks = line.split_whitespace();
                parse_ply_row_ascii(element, &mut toks, &mut vertices, &mut faces)
                    .map_err(|r| Error::parse(path.display().to_string(), r))?;
            }
        }
    } else {
        let mut data = Vec::new();
        reader
            .read_to_end(&mut data)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut cursor = 0usize;
        for element in &elements {
            for _ in 0..element.count {
                parse_ply_row_binary(element, &data, &mut cursor, &mut vertices, &mut faces)
                    .map_err(|r| Error::parse(path.display().to_string(), r))?;
            }
        }
    }
    Ok((vertices, faces))
}

fn parse_ply_row_ascii<'a>(
    element: &PlyElement,
    toks: &mut impl Iterator<Item = &'a str>,
    vertices: &mut Vec<Point3>,
    faces: &mut Vec<Vec<usize>>,
) -> std::result::Result<(), String> {
    let mut coord = [f64::NAN; 3];
    for prop in &element.properties {
        match prop {
            PlyProperty::Scalar { name, .. } => {
                let value: f64 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| format!("bad scalar in element {}", element.name))?;
                store_coord(&mut coord, name, value);
            }
            PlyProperty::List { name, .. } => {
                let count: usize = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or("bad list count")?;
                let mut items = Vec::with_capacity(count);
                for _ in 0..count {
                    let idx: i64 = toks
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or("bad list item")?;
                    items.push(usize::try_from(idx).map_err(|_| "negative index")?);
                }
                if element.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                    faces.push(items);
                }
            }
        }
    }
    finish_row(element, coord, vertices)
}

fn parse_ply_row_binary(
    element: &PlyElement,
    data: &[u8],
    cursor: &mut usize,
    vertices: &mut Vec<Point3>,
    faces: &mut Vec<Vec<usize>>,
) -> std::result::Result<(), String> {
    let mut coord = [f64::NAN; 3];
    let take = |cursor: &mut usize, n: usize| -> std::result::Result<usize, String> {
        let at = *cursor;
        if at + n > data.len() {
            return Err("truncated binary payload".into());
        }
        *cursor += n;
        Ok(at)
    };
    for prop in &element.properties {
        match prop {
            PlyProperty::Scalar { ty, name } => {
                let at = take(cursor, ty.size())?;
                store_coord(&mut coord, name, ty.read_le(&data[at..]));
            }
            PlyProperty::List { count, item, name } => {
                let at = take(cursor, count.size())?;
                let n = count.read_le(&data[at..]) as usize;
                let mut items = Vec::with_capacity(n);
                for _ in 0..n {
                    let at = take(cursor, item.size())?;
                    let idx = item.read_le(&data[at..]);
                    if idx < 0.0 {
                        return Err("negative index".into());
                    }
                    items.push(idx as usize);
                }
                if element.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                    faces.push(items);
                }
            }
        }
    }
    finish_row(element, coord, vertices)
}

fn store_coord(coord: &mut [f64; 3], name: &str, value: f64) {
    match name {
        "x" => coord[0] = value,
        "y" => coord[1] = value,
        "z" => coord[2] = value,
        _ => {}
    }
}

fn finish_row(
    element: &PlyElement,
    coord: [f64; 3],
    vertices: &mut Vec<Point3>,
) -> std::result::Result<(), String> {
    if element.name == "vertex" {
        if coord.iter().any(|c| c.is_nan()) {
            return Err("vertex element missing x/y/z".into());
        }
        vertices.push(Point3::new(coord[0], coord[1], coord[2]));
    }
    Ok(())
}
