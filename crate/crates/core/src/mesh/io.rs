//! OBJ / STL / PLY readers and OBJ / STL writers.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{weld_vertices, HalfedgeMesh};
use crate::error::{Error, Result};
use crate::geometry::{triangle_normal, Aabb, Vec3};

/// Default weld tolerance as a fraction of the bounding-box diagonal.
pub const DEFAULT_WELD_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshFormat {
    Obj,
    /// Reading auto-detects ascii vs binary; writing emits binary.
    Stl,
    StlBinary,
    StlAscii,
    /// Ascii PLY, read-only.
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(MeshFormat::Obj),
            "stl" => Some(MeshFormat::Stl),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

struct RawMesh {
    positions: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

/// Loads and validates a closed manifold mesh. Vertices closer than
/// `weld_factor * bbox_diagonal` are merged before connectivity is built.
pub fn load_mesh(path: &Path, format: Option<MeshFormat>, weld_factor: Option<f64>) -> Result<HalfedgeMesh> {
    let format = match format.or_else(|| MeshFormat::from_path(path)) {
        Some(f) => f,
        None => {
            return Err(Error::parse(path, 0, "cannot infer mesh format from file extension"));
        }
    };
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let raw = match format {
        MeshFormat::Obj => parse_obj(path, as_text(path, &bytes)?)?,
        MeshFormat::Ply => parse_ply(path, as_text(path, &bytes)?)?,
        MeshFormat::StlBinary => parse_stl_binary(path, &bytes)?,
        MeshFormat::StlAscii => parse_stl_ascii(path, as_text(path, &bytes)?)?,
        MeshFormat::Stl => {
            if looks_like_binary_stl(&bytes) {
                parse_stl_binary(path, &bytes)?
            } else {
                parse_stl_ascii(path, as_text(path, &bytes)?)?
            }
        }
    };
    build_mesh(raw, weld_factor.unwrap_or(DEFAULT_WELD_FACTOR))
}

fn as_text<'a>(path: &Path, bytes: &'a [u8]) -> Result<&'a str> {
    std::str::from_utf8(bytes).map_err(|_| Error::parse(path, 0, "file is not valid utf-8 text"))
}

fn build_mesh(raw: RawMesh, weld_factor: f64) -> Result<HalfedgeMesh> {
    let mut bb = Aabb::empty();
    for p in &raw.positions {
        bb.grow(p);
    }
    let tol = weld_factor * bb.diagonal();
    let (welded, remap) = weld_vertices(&raw.positions, tol);
    let mut faces: Vec<[usize; 3]> = Vec::with_capacity(raw.faces.len());
    for f in &raw.faces {
        let t = [remap[f[0]], remap[f[1]], remap[f[2]]];
        // triangles collapsed by welding carry no surface
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            continue;
        }
        faces.push(t);
    }
    // drop unreferenced vertices, keeping first-use order stable by id
    let mut used = vec![false; welded.len()];
    for f in &faces {
        for &v in f {
            used[v] = true;
        }
    }
    let mut compact = vec![usize::MAX; welded.len()];
    let mut positions = Vec::with_capacity(welded.len());
    for (v, p) in welded.iter().enumerate() {
        if used[v] {
            compact[v] = positions.len();
            positions.push(*p);
        }
    }
    for f in faces.iter_mut() {
        for v in f.iter_mut() {
            *v = compact[*v];
        }
    }
    let mesh = HalfedgeMesh::from_triangles(positions, faces)?;
    mesh.check_nondegenerate()?;
    Ok(mesh)
}

fn parse_f64(path: &Path, line: usize, tok: Option<&str>) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::parse(path, line, "missing number"))?;
    tok.parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("invalid number '{tok}'")))
}

fn parse_obj(path: &Path, text: &str) -> Result<RawMesh> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(path, ln, toks.next())?;
                let y = parse_f64(path, ln, toks.next())?;
                let z = parse_f64(path, ln, toks.next())?;
                positions.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(3);
                for t in toks {
                    let first = t.split('/').next().unwrap_or("");
                    let raw: i64 = first
                        .parse()
                        .map_err(|_| Error::parse(path, ln, format!("invalid face index '{t}'")))?;
                    let resolved = if raw > 0 {
                        raw - 1
                    } else if raw < 0 {
                        positions.len() as i64 + raw
                    } else {
                        return Err(Error::parse(path, ln, "face index 0 is invalid in OBJ"));
                    };
                    if resolved < 0 || resolved as usize >= positions.len() {
                        return Err(Error::parse(path, ln, format!("face index {raw} out of range")));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() != 3 {
                    return Err(Error::parse(
                        path,
                        ln,
                        format!("only triangular faces are supported, got {} corners", idx.len()),
                    ));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(Error::parse(path, 0, "no faces found"));
    }
    Ok(RawMesh { positions, faces })
}

fn looks_like_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    let sized = bytes.len() == 84 + 50 * count;
    if !bytes.starts_with(b"solid") {
        return sized;
    }
    // ascii files start with "solid" too; trust the length check only
    sized && !bytes[..bytes.len().min(512)].windows(5).any(|w| w == b"facet")
}

fn parse_stl_binary(path: &Path, bytes: &[u8]) -> Result<RawMesh> {
    if bytes.len() < 84 {
        return Err(Error::parse(path, 0, "binary STL shorter than its 84-byte header"));
    }
    let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    if bytes.len() < 84 + 50 * count {
        return Err(Error::parse(
            path,
            0,
            format!("binary STL declares {count} facets but holds {} bytes", bytes.len()),
        ));
    }
    let mut positions = Vec::with_capacity(count * 3);
    let mut faces = Vec::with_capacity(count);
    let rd = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as f64;
    for i in 0..count {
        let base = 84 + 50 * i + 12;
        for k in 0..3 {
            let o = base + 12 * k;
            positions.push(Vec3::new(rd(o), rd(o + 4), rd(o + 8)));
        }
        faces.push([3 * i, 3 * i + 1, 3 * i + 2]);
    }
    if faces.is_empty() {
        return Err(Error::parse(path, 0, "no facets found"));
    }
    Ok(RawMesh { positions, faces })
}

fn parse_stl_ascii(path: &Path, text: &str) -> Result<RawMesh> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    let mut pending = 0usize;
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("vertex") => {
                let x = parse_f64(path, ln, toks.next())?;
                let y = parse_f64(path, ln, toks.next())?;
                let z = parse_f64(path, ln, toks.next())?;
                positions.push(Vec3::new(x, y, z));
                pending += 1;
            }
            Some("endloop") => {
                if pending != 3 {
                    return Err(Error::parse(path, ln, format!("facet with {pending} vertices")));
                }
                let n = positions.len();
                faces.push([n - 3, n - 2, n - 1]);
                pending = 0;
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(Error::parse(path, 0, "no facets found"));
    }
    Ok(RawMesh { positions, faces })
}

fn parse_ply(path: &Path, text: &str) -> Result<RawMesh> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::parse(path, 1, "missing 'ply' magic")),
    }
    let mut n_vertices = 0usize;
    let mut n_faces = 0usize;
    let mut vertex_props: Vec<String> = Vec::new();
    // elements in file order with their counts
    let mut elements: Vec<(String, usize)> = Vec::new();
    let mut current = String::new();
    loop {
        let (i, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, "unterminated PLY header"))?;
        let ln = i + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(Error::parse(path, ln, "only ascii PLY is supported"));
                }
            }
            Some("element") => {
                let name = toks.get(1).copied().unwrap_or("").to_string();
                let count: usize = toks
                    .get(2)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::parse(path, ln, "invalid element count"))?;
                if name == "vertex" {
                    n_vertices = count;
                } else if name == "face" {
                    n_faces = count;
                }
                elements.push((name.clone(), count));
                current = name;
            }
            Some("property") => {
                if current == "vertex" {
                    vertex_props.push(toks.last().copied().unwrap_or("").to_string());
                }
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    let find = |name: &str| vertex_props.iter().position(|p| p == name);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::parse(path, 0, "PLY vertex element lacks x/y/z")),
    };

    let mut positions = Vec::with_capacity(n_vertices);
    let mut faces = Vec::with_capacity(n_faces);
    for (name, count) in &elements {
        for _ in 0..*count {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, 0, format!("truncated '{name}' element data")))?;
            let ln = i + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            match name.as_str() {
                "vertex" => {
                    let x = parse_f64(path, ln, toks.get(ix).copied())?;
                    let y = parse_f64(path, ln, toks.get(iy).copied())?;
                    let z = parse_f64(path, ln, toks.get(iz).copied())?;
                    positions.push(Vec3::new(x, y, z));
                }
                "face" => {
                    let n: usize = toks
                        .first()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| Error::parse(path, ln, "invalid face corner count"))?;
                    if n != 3 || toks.len() < 4 {
                        return Err(Error::parse(path, ln, "only triangular faces are supported"));
                    }
                    let mut t = [0usize; 3];
                    for k in 0..3 {
                        t[k] = toks[k + 1]
                            .parse()
                            .map_err(|_| Error::parse(path, ln, "invalid face index"))?;
                        if t[k] >= n_vertices {
                            return Err(Error::parse(path, ln, "face index out of range"));
                        }
                    }
                    faces.push(t);
                }
                _ => {}
            }
        }
    }
    if faces.is_empty() {
        return Err(Error::parse(path, 0, "no faces found"));
    }
    Ok(RawMesh { positions, faces })
}

/// Writes the live part of `mesh`. `Stl` writes binary STL; `Ply` is read-only.
pub fn save_mesh(mesh: &HalfedgeMesh, path: &Path, format: MeshFormat) -> Result<()> {
    let (positions, faces) = mesh.to_triangles();
    save_triangles(&positions, &faces, path, format)
}

pub(crate) fn save_triangles(positions: &[Vec3], faces: &[[usize; 3]], path: &Path, format: MeshFormat) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = match format {
        MeshFormat::Obj => write_obj(&mut w, positions, faces),
        MeshFormat::Stl | MeshFormat::StlBinary => write_stl_binary(&mut w, positions, faces),
        MeshFormat::StlAscii => write_stl_ascii(&mut w, positions, faces),
        MeshFormat::Ply => {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::Unsupported, "PLY output is not supported"),
            ))
        }
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_obj<W: Write>(w: &mut W, positions: &[Vec3], faces: &[[usize; 3]]) -> std::io::Result<()> {
    for p in positions {
        writeln!(w, "v {:.15e} {:.15e} {:.15e}", p.x, p.y, p.z)?;
    }
    for f in faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

fn facet_normal(positions: &[Vec3], f: &[usize; 3]) -> Vec3 {
    triangle_normal(&positions[f[0]], &positions[f[1]], &positions[f[2]]).unwrap_or_else(Vec3::zeros)
}

fn write_stl_binary<W: Write>(w: &mut W, positions: &[Vec3], faces: &[[usize; 3]]) -> std::io::Result<()> {
    let mut header = [0u8; 80];
    let tag = b"isokit binary stl";
    header[..tag.len()].copy_from_slice(tag);
    w.write_all(&header)?;
    w.write_all(&(faces.len() as u32).to_le_bytes())?;
    for f in faces {
        let n = facet_normal(positions, f);
        for c in n.iter() {
            w.write_all(&(*c as f32).to_le_bytes())?;
        }
        for &v in f {
            for c in positions[v].iter() {
                w.write_all(&(*c as f32).to_le_bytes())?;
            }
        }
        w.write_all(&0u16.to_le_bytes())?;
    }
    Ok(())
}

fn write_stl_ascii<W: Write>(w: &mut W, positions: &[Vec3], faces: &[[usize; 3]]) -> std::io::Result<()> {
    writeln!(w, "solid isokit")?;
    for f in faces {
        let n = facet_normal(positions, f);
        writeln!(w, "  facet normal {:.9e} {:.9e} {:.9e}", n.x, n.y, n.z)?;
        writeln!(w, "    outer loop")?;
        for &v in f {
            let p = positions[v];
            writeln!(w, "      vertex {:.15e} {:.15e} {:.15e}", p.x, p.y, p.z)?;
        }
        writeln!(w, "    endloop")?;
        writeln!(w, "  endfacet")?;
    }
    writeln!(w, "endsolid isokit")?;
    Ok(())
}
