//! ASCII OFF and OBJ mesh files. Coordinates are written with 17
//! significant digits so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use super::mesh::TriMesh;
use crate::{Error, Result, Vec3};

pub fn mesh_to_off(mesh: &TriMesh) -> String {
    let mut s = String::new();
    writeln!(s, "OFF\n{} {} 0", mesh.vertices().len(), mesh.triangles().len()).unwrap();
    for v in mesh.vertices() {
        writeln!(s, "{:.16e} {:.16e} {:.16e}", v.x, v.y, v.z).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    s
}

pub fn mesh_to_obj(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        writeln!(s, "v {:.16e} {:.16e} {:.16e}", v.x, v.y, v.z).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    s
}

fn parse_f64(tok: Option<&str>, what: &str) -> Result<f64, String> {
    let tok = tok.ok_or_else(|| format!("missing {what}"))?;
    tok.parse().map_err(|_| format!("bad {what} '{tok}'"))
}

fn parse_usize(tok: Option<&str>, what: &str) -> Result<usize, String> {
    let tok = tok.ok_or_else(|| format!("missing {what}"))?;
    tok.parse().map_err(|_| format!("bad {what} '{tok}'"))
}

/// Fan-triangulate a polygon.
fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for i in 1..poly.len().saturating_sub(1) {
        out.push([poly[0], poly[i], poly[i + 1]]);
    }
}

pub fn mesh_from_off(text: &str) -> Result<TriMesh, String> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap().trim())
        .filter(|l| !l.is_empty());
    let head = lines.next().ok_or("empty file")?;
    let counts_line = match head.strip_prefix("OFF") {
        Some("") => lines.next().ok_or("missing counts")?,
        Some(rest) => rest,
        None => return Err("missing OFF header".into()),
    };
    let mut counts = counts_line.split_whitespace();
    let nv = parse_usize(counts.next(), "vertex count")?;
    let nf = parse_usize(counts.next(), "face count")?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = lines.next().ok_or_else(|| format!("missing vertex {i}"))?;
        let mut it = line.split_whitespace();
        vertices.push(Vec3::new(
            parse_f64(it.next(), "x")?,
            parse_f64(it.next(), "y")?,
            parse_f64(it.next(), "z")?,
        ));
    }
    let mut triangles = Vec::with_capacity(nf);
    for i in 0..nf {
        let line = lines.next().ok_or_else(|| format!("missing face {i}"))?;
        let mut it = line.split_whitespace();
        let k = parse_usize(it.next(), "face size")?;
        let poly = (0..k)
            .map(|_| parse_usize(it.next(), "face index").map(|v| v as u32))
            .collect::<Result<Vec<_>, _>>()?;
        fan(&poly, &mut triangles);
    }
    TriMesh::new(vertices, triangles).map_err(|e| e.to_string())
}

pub fn mesh_from_obj(text: &str) -> Result<TriMesh, String> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => vertices.push(Vec3::new(
                parse_f64(it.next(), "x")?,
                parse_f64(it.next(), "y")?,
                parse_f64(it.next(), "z")?,
            )),
            Some("f") => {
                let poly = it
                    .map(|tok| {
                        let idx = tok.split('/').next().unwrap_or("");
                        let i: i64 = idx.parse().map_err(|_| format!("line {}: bad index '{tok}'", n + 1))?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        if resolved < 0 {
                            return Err(format!("line {}: index {i} out of range", n + 1));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                fan(&poly, &mut triangles);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, triangles).map_err(|e| e.to_string())
}

pub fn write_mesh(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<()> {
    let path = path.as_ref();
    let text = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("obj") => mesh_to_obj(mesh),
        _ => mesh_to_off(mesh),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Read an OBJ file (by extension) or an OFF file (anything else).
pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("obj") => mesh_from_obj(&text),
        _ => mesh_from_off(&text),
    };
    parsed.map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshing::uv_sphere;

    #[test]
    fn off_and_obj_round_trip_bitwise() {
        let m = uv_sphere(Vec3::new(0.1, -0.2, 0.3), 0.7, 7, 11);
        assert_eq!(mesh_from_off(&mesh_to_off(&m)).unwrap(), m);
        assert_eq!(mesh_from_obj(&mesh_to_obj(&m)).unwrap(), m);
    }

    #[test]
    fn quads_are_fanned_and_garbage_rejected() {
        let off = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert_eq!(mesh_from_off(off).unwrap().triangles().len(), 2);
        assert!(mesh_from_off("OFF\n3 1 0\n0 0 0\n").is_err());
        assert!(mesh_from_off("PLY\n").is_err());
        assert!(mesh_from_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }
}
