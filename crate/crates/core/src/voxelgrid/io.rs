//! Grid files.
//!
//! Text layout (`.vgt`):
//!
//! ```text
//! ugrasp-voxelgrid 1
//! dims <nx> <ny> <nz>
//! origin <x> <y> <z>
//! resolution <r>
//! binary <0|1>
//! <nz values>        # one line per (i, j), i outer, j inner
//! ```
//!
//! Binary layout (`.vgb`), little endian:
//! magic `UGVG`, `u32` version (1), 3 x `u32` dims, 3 x `f64` origin,
//! `f64` resolution, `u8` binary flag, then `nx*ny*nz` x `f64` values in the
//! same row-major order.
//!
//! Point clouds (`.xyz`): one `x y z` line per point, `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use super::{GridFrame, PointCloud, VoxelGrid};
use crate::{Error, Result, Vec3};

const TEXT_MAGIC: &str = "ugrasp-voxelgrid 1";
const BIN_MAGIC: &[u8; 4] = b"UGVG";
const VERSION: u32 = 1;

pub fn grid_to_text(grid: &VoxelGrid) -> String {
    let f = grid.frame();
    let mut s = String::new();
    let _ = writeln!(s, "{TEXT_MAGIC}");
    let _ = writeln!(s, "dims {} {} {}", f.dims[0], f.dims[1], f.dims[2]);
    let _ = writeln!(s, "origin {:?} {:?} {:?}", f.origin.x, f.origin.y, f.origin.z);
    let _ = writeln!(s, "resolution {:?}", f.resolution);
    let _ = writeln!(s, "binary {}", u8::from(grid.is_binary()));
    for row in grid.values().chunks(f.dims[2]) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn grid_from_text(text: &str) -> std::result::Result<VoxelGrid, String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some(TEXT_MAGIC) {
        return Err("missing header line".into());
    }
    let mut field = |name: &str, count: usize| -> std::result::Result<Vec<String>, String> {
        let line = lines.next().ok_or(format!("missing {name}"))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(name) {
            return Err(format!("expected {name}, got {line:?}"));
        }
        let vals: Vec<String> = parts.map(str::to_string).collect();
        if vals.len() != count {
            return Err(format!("{name}: expected {count} fields"));
        }
        Ok(vals)
    };
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
    let parse_f64 = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let d = field("dims", 3)?;
    let dims = [parse_usize(&d[0])?, parse_usize(&d[1])?, parse_usize(&d[2])?];
    let o = field("origin", 3)?;
    let origin = Vec3::new(parse_f64(&o[0])?, parse_f64(&o[1])?, parse_f64(&o[2])?);
    let resolution = parse_f64(&field("resolution", 1)?[0])?;
    let binary = field("binary", 1)?[0] == "1";
    let frame = GridFrame::new(dims, origin, resolution).map_err(|e| e.to_string())?;
    let values = lines
        .flat_map(str::split_whitespace)
        .map(parse_f64)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let grid = VoxelGrid::from_values(frame, values).map_err(|e| e.to_string())?;
    if binary && !grid.is_binary() {
        return Err("binary flag set but values are not in {0, 1}".into());
    }
    Ok(grid)
}

pub fn grid_to_bytes(grid: &VoxelGrid) -> Vec<u8> {
    let f = grid.frame();
    let mut out = Vec::with_capacity(53 + 8 * grid.values().len());
    out.extend_from_slice(BIN_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in f.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for c in f.origin.iter() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.extend_from_slice(&f.resolution.to_le_bytes());
    out.push(u8::from(grid.is_binary()));
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn grid_from_bytes(bytes: &[u8]) -> std::result::Result<VoxelGrid, String> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> std::result::Result<&[u8], String> {
        let s = bytes.get(pos..pos + n).ok_or("truncated grid file")?;
        pos += n;
        Ok(s)
    };
    if take(4)? != BIN_MAGIC {
        return Err("bad magic".into());
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
    let version = u32_at(take(4)?);
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = u32_at(take(4)?) as usize;
    }
    let mut origin = Vec3::zeros();
    for a in 0..3 {
        origin[a] = f64_at(take(8)?);
    }
    let resolution = f64_at(take(8)?);
    let binary = take(1)?[0] == 1;
    let frame = GridFrame::new(dims, origin, resolution).map_err(|e| e.to_string())?;
    let values = (0..frame.len())
        .map(|_| take(8).map(f64_at))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if pos != bytes.len() {
        return Err("trailing bytes after grid values".into());
    }
    let grid = VoxelGrid::from_values(frame, values).map_err(|e| e.to_string())?;
    if binary && !grid.is_binary() {
        return Err("binary flag set but values are not in {0, 1}".into());
    }
    Ok(grid)
}

pub fn write_grid_text(path: impl AsRef<Path>, grid: &VoxelGrid) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, grid_to_text(grid)).map_err(|e| Error::io(path, e))
}

pub fn write_grid_binary(path: impl AsRef<Path>, grid: &VoxelGrid) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, grid_to_bytes(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_grid_text(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    grid_from_text(&text).map_err(|m| Error::format(path, m))
}

/// Read either layout, detected from the leading bytes.
pub fn read_grid(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BIN_MAGIC) {
        grid_from_bytes(&bytes).map_err(|m| Error::format(path, m))
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::format(path, "not UTF-8"))?;
        grid_from_text(&text).map_err(|m| Error::format(path, m))
    }
}

pub fn cloud_to_text(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 72);
    for p in cloud.points() {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
    }
    out
}

pub fn cloud_from_text(text: &str) -> std::result::Result<PointCloud, String> {
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let xs = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| format!("line {}: bad number {t:?}", n + 1)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if xs.len() != 3 {
            return Err(format!("line {}: expected 3 coordinates, got {}", n + 1, xs.len()));
        }
        points.push(Vec3::new(xs[0], xs[1], xs[2]));
    }
    PointCloud::new(points).map_err(|e| e.to_string())
}

pub fn write_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, cloud_to_text(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    cloud_from_text(&text).map_err(|m| Error::format(path, m))
}
