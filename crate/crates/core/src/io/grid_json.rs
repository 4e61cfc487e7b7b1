//! Versioned grid JSON. Every float is a decimal string in shortest
//! round-trip form, so reading back reproduces each value bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Aabb, TetGrid};
use crate::vec3::Vec3;
use crate::Real;

pub const GRID_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BboxJson {
    min: [String; 3],
    max: [String; 3],
}

#[derive(Serialize, Deserialize)]
struct GridJson {
    version: u32,
    resolution: usize,
    bbox: BboxJson,
    deformation_scale: String,
    canonical_positions: Vec<[String; 3]>,
    offsets: Vec<[String; 3]>,
    tets: Vec<[u32; 4]>,
    sdf: Vec<String>,
    msdf: Vec<String>,
}

/// Only the version, read first so a mismatch is reported as such.
#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

fn s<T: Real>(v: T) -> String {
    v.to_string()
}

fn v3<T: Real>(v: &Vec3<T>) -> [String; 3] {
    v.0.map(s)
}

pub fn grid_to_json<T: Real>(grid: &TetGrid<T>) -> Result<String> {
    let doc = GridJson {
        version: GRID_FORMAT_VERSION,
        resolution: grid.resolution(),
        bbox: BboxJson {
            min: v3(&grid.bbox().min),
            max: v3(&grid.bbox().max),
        },
        deformation_scale: s(grid.deformation_scale()),
        canonical_positions: grid.canonical_positions().iter().map(v3).collect(),
        offsets: grid.offsets().iter().map(v3).collect(),
        tets: grid.tets().to_vec(),
        sdf: grid.sdf.iter().copied().map(s).collect(),
        msdf: grid.msdf.iter().copied().map(s).collect(),
    };
    let mut out = serde_json::to_string(&doc).map_err(|e| Error::Format(e.to_string()))?;
    out.push('\n');
    Ok(out)
}

fn num<T: Real>(text: &str, what: &str) -> Result<T> {
    text.parse::<T>()
        .map_err(|e| Error::Format(format!("{what}: '{text}' is not a number ({e})")))
}

fn vec3<T: Real>(v: &[String; 3], what: &str) -> Result<Vec3<T>> {
    Ok(Vec3::new(num(&v[0], what)?, num(&v[1], what)?, num(&v[2], what)?))
}

pub fn grid_from_json<T: Real>(text: &str) -> Result<TetGrid<T>> {
    let probe: VersionProbe = serde_json::from_str(text)
        .map_err(|e| Error::Format(format!("grid JSON: {e}")))?;
    if probe.version != GRID_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: probe.version,
            expected: GRID_FORMAT_VERSION,
        });
    }
    let doc: GridJson = serde_json::from_str(text).map_err(|e| Error::Format(format!("grid JSON: {e}")))?;
    let canonical = doc
        .canonical_positions
        .iter()
        .map(|p| vec3(p, "canonical position"))
        .collect::<Result<Vec<_>>>()?;
    let offsets = doc
        .offsets
        .iter()
        .map(|p| vec3(p, "offset"))
        .collect::<Result<Vec<_>>>()?;
    let sdf = doc.sdf.iter().map(|v| num(v, "sdf")).collect::<Result<Vec<T>>>()?;
    let msdf = doc.msdf.iter().map(|v| num(v, "msdf")).collect::<Result<Vec<T>>>()?;
    for (field, values) in [("sdf", &sdf), ("msdf", &msdf)] {
        if let Some(vertex) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField { field, vertex });
        }
    }
    let bbox = Aabb::new(vec3(&doc.bbox.min, "bbox")?, vec3(&doc.bbox.max, "bbox")?);
    TetGrid::assemble(
        canonical,
        offsets,
        num(&doc.deformation_scale, "deformation_scale")?,
        doc.tets,
        sdf,
        msdf,
        doc.resolution,
        bbox,
    )
}

pub fn read_grid<T: Real>(path: &Path) -> Result<TetGrid<T>> {
    grid_from_json(&super::read_to_string(path)?)
}

pub fn write_grid<T: Real>(path: &Path, grid: &TetGrid<T>) -> Result<()> {
    super::write_atomic(path, grid_to_json(grid)?.as_bytes())
}
