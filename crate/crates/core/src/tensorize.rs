//! Dense tensor encoding of a grid and its open-surface cut coefficients.
//!
//! The base tensor stores SDF and offsets at the `(R+1)^3` lattice vertices.
//! The alpha tensor lives on a lattice four times finer, `(4R+1)^3` nodes, and
//! stores one coefficient per candidate mesh edge:
//!
//! * a candidate inside a tet face joins crossings on grid edges `(p1, p2)` and
//!   `(p2, p3)` and sits at `(p1 + 2 p2 + p3) / 4`;
//! * the diagonal splitting a quad sits at the tet centroid
//!   `(p0 + p1 + p2 + p3) / 4`, one slot per tet since at most one quad
//!   appears in a tet.
//!
//! In fine-lattice units both locations are the coordinate sum of the four
//! endpoints of the two grid edges. Every slot that can hold a candidate has
//! mask 1. A candidate edge `(a, b)`, with `a` the endpoint whose grid-edge
//! midpoint is lexicographically smaller, stores
//!
//! * the cut coefficient from `a` when the mSDF changes sign along it,
//! * `1` when it is kept whole or absent from the template,
//! * `0` when it is discarded whole.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{clip_template, crossing_coefficient, extract_watertight, project_msdf, ALPHA_CLAMP};
use crate::grid::{build_uniform_tet_grid, Aabb, EdgeKey, TetGrid};
use crate::mesh::ExtractedMesh;
use crate::scalar::is_negative;
use crate::vec3::Vec3;
use crate::Real;

pub const GSP_MAGIC: [u8; 4] = *b"GSP\x01";
pub const GSP_VERSION: u32 = 1;

/// Nodes per axis of the alpha lattice.
pub fn alpha_lattice_size(resolution: usize) -> usize {
    4 * resolution + 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorGrid<T> {
    pub resolution: usize,
    pub bbox: Aabb<T>,
    pub deformation_scale: T,
    /// Per lattice vertex: `[sdf, offset_x, offset_y, offset_z]`.
    pub base: Vec<[T; 4]>,
    pub base_mask: Vec<u8>,
    /// Per alpha-lattice node.
    pub alpha: Vec<T>,
    pub alpha_mask: Vec<u8>,
}

impl<T: Real> TensorGrid<T> {
    /// Half extent of the grid box per axis.
    pub fn grid_scale(&self) -> Vec3<T> {
        self.bbox.extent() * T::lit(0.5)
    }

    pub fn num_masked_alpha(&self) -> usize {
        self.alpha_mask.iter().filter(|m| **m == 1).count()
    }

    /// All-zero tensor (every mask 0) for `resolution`.
    pub fn zeros(resolution: usize, bbox: Aabb<T>, deformation_scale: T) -> Self {
        let nb = (resolution + 1).pow(3);
        let na = alpha_lattice_size(resolution).pow(3);
        TensorGrid {
            resolution,
            bbox,
            deformation_scale,
            base: vec![[T::zero(); 4]; nb],
            base_mask: vec![0; nb],
            alpha: vec![T::zero(); na],
            alpha_mask: vec![0; na],
        }
    }
}

/// Decoded per-candidate coefficients, addressed by alpha-lattice slot.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaTable<T> {
    pub resolution: usize,
    pub alpha: Vec<T>,
    pub mask: Vec<u8>,
}

impl<T: Real> AlphaTable<T> {
    pub fn get(&self, slot: usize) -> Option<T> {
        (self.mask.get(slot) == Some(&1)).then(|| self.alpha[slot])
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.contains(&1)
    }
}

fn lattice_coords(n: usize, v: usize) -> [usize; 3] {
    [v / (n * n), (v / n) % n, v % n]
}

/// Alpha-lattice slot of the candidate joining crossings on grid edges `e1` and `e2`.
fn candidate_slot(resolution: usize, e1: EdgeKey, e2: EdgeKey) -> usize {
    let n = resolution + 1;
    let m = alpha_lattice_size(resolution);
    let mut c = [0usize; 3];
    for v in [e1.lo(), e1.hi(), e2.lo(), e2.hi()] {
        let p = lattice_coords(n, v);
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    (c[0] * m + c[1]) * m + c[2]
}

fn slot_coords(resolution: usize, slot: usize) -> [usize; 3] {
    lattice_coords(alpha_lattice_size(resolution), slot)
}

/// Orders the two grid edges of a candidate: first the edge whose midpoint
/// (coordinate sum of its endpoints) is lexicographically smaller.
fn midpoint_first(resolution: usize, e1: EdgeKey, e2: EdgeKey) -> bool {
    let n = resolution + 1;
    let mid = |e: EdgeKey| {
        let (a, b) = (lattice_coords(n, e.lo()), lattice_coords(n, e.hi()));
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    };
    (mid(e1), e1) <= (mid(e2), e2)
}

fn describe(key: u128) -> String {
    let v = [(key >> 96) as u32, (key >> 64) as u32, (key >> 32) as u32, key as u32];
    if v[0] == v[1] || v[1] == v[2] || v[2] == v[3] || v[0] == v[2] || v[1] == v[3] {
        format!("face candidate ({}, {})-({}, {})", v[0], v[1], v[2], v[3])
    } else {
        format!("diagonal slot of tet {v:?}")
    }
}

fn pack(v: [u32; 4]) -> u128 {
    ((v[0] as u128) << 96) | ((v[1] as u128) << 64) | ((v[2] as u128) << 32) | v[3] as u128
}

/// Builds the slot occupancy for `resolution`, failing on any two distinct
/// candidates sharing a slot.
fn build_placement(resolution: usize) -> Result<Vec<bool>> {
    let grid = build_uniform_tet_grid::<f64>(resolution, Aabb::centered_cube(1.0))?;
    let m = alpha_lattice_size(resolution);
    let mut owner = vec![0u128; m * m * m];
    let mut claim = |slot: usize, key: u128| -> Result<()> {
        let cur = owner[slot];
        if cur == 0 {
            owner[slot] = key;
        } else if cur != key {
            return Err(Error::PlacementCollision {
                first: describe(cur),
                second: describe(key),
                coord: slot_coords(resolution, slot),
            });
        }
        Ok(())
    };
    for tet in grid.tets() {
        for skip in 0..4 {
            let face: Vec<u32> = (0..4).filter(|k| *k != skip).map(|k| tet[k]).collect();
            for s in 0..3 {
                let shared = face[s];
                let (x, y) = (face[(s + 1) % 3], face[(s + 2) % 3]);
                let (e1, e2) = (EdgeKey::new(x, shared), EdgeKey::new(shared, y));
                let (e1, e2) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
                claim(candidate_slot(resolution, e1, e2), pack([e1.0, e1.1, e2.0, e2.1]))?;
            }
        }
        let mut v = *tet;
        v.sort_unstable();
        let slot = candidate_slot(resolution, EdgeKey::new(v[0], v[1]), EdgeKey::new(v[2], v[3]));
        claim(slot, pack(v))?;
    }
    Ok(owner.into_iter().map(|k| k != 0).collect())
}

type PlacementCache = Mutex<HashMap<usize, Arc<Vec<bool>>>>;

/// Slot occupancy for `resolution`; injectivity is verified on first use of
/// each resolution.
pub fn placement(resolution: usize) -> Result<Arc<Vec<bool>>> {
    static CACHE: OnceLock<PlacementCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().expect("placement cache").get(&resolution) {
        return Ok(p.clone());
    }
    let p = Arc::new(build_placement(resolution)?);
    cache.lock().expect("placement cache").insert(resolution, p.clone());
    Ok(p)
}

fn require_uniform<T: Real>(grid: &TetGrid<T>) -> Result<()> {
    if grid.matches_uniform_layout() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "tensor encoding needs a grid with the uniform lattice layout".into(),
        ))
    }
}

/// Encodes SDF, offsets and the open-surface cut of `grid`.
pub fn encode<T: Real>(grid: &TetGrid<T>) -> Result<TensorGrid<T>> {
    require_uniform(grid)?;
    let r = grid.resolution();
    let occupied = placement(r)?;
    let mut t = TensorGrid::zeros(r, *grid.bbox(), grid.deformation_scale());
    for v in 0..grid.num_vertices() {
        let o = grid.offsets()[v];
        t.base[v] = [grid.sdf[v], o.x(), o.y(), o.z()];
        t.base_mask[v] = 1;
    }
    for (slot, occ) in occupied.iter().enumerate() {
        if *occ {
            t.alpha[slot] = T::one();
            t.alpha_mask[slot] = 1;
        }
    }
    let template = project_msdf(grid, &extract_watertight(grid))?;
    let source = |i: u32| template.vertices[i as usize].as_mesh().expect("template vertex");
    for face in &template.faces {
        for k in 0..3 {
            let (x, y) = (source(face[k]), source(face[(k + 1) % 3]));
            let (nx, ny) = (x.projected_msdf.expect("projected"), y.projected_msdf.expect("projected"));
            let (na, nb) = if midpoint_first(r, x.source_edge, y.source_edge) { (nx, ny) } else { (ny, nx) };
            let value = match (is_negative(na), is_negative(nb)) {
                (false, false) => T::one(),
                (true, true) => T::zero(),
                _ => crossing_coefficient(na, nb).0,
            };
            t.alpha[candidate_slot(r, x.source_edge, y.source_edge)] = value;
        }
    }
    Ok(t)
}

/// Rebuilds a tensor from a decoded grid and table (the inverse of [`decode`]).
pub fn from_parts<T: Real>(grid: &TetGrid<T>, table: &AlphaTable<T>) -> Result<TensorGrid<T>> {
    require_uniform(grid)?;
    if table.resolution != grid.resolution() {
        return Err(Error::InvalidArgument("alpha table resolution differs from grid".into()));
    }
    let mut t = TensorGrid::zeros(grid.resolution(), *grid.bbox(), grid.deformation_scale());
    for v in 0..grid.num_vertices() {
        let o = grid.offsets()[v];
        t.base[v] = [grid.sdf[v], o.x(), o.y(), o.z()];
        t.base_mask[v] = 1;
    }
    t.alpha = table.alpha.clone();
    t.alpha_mask = table.mask.clone();
    Ok(t)
}

/// Inverse of [`encode`]: the grid (with mSDF set to +1, which the tensor
/// does not carry) and the alpha table.
pub fn decode<T: Real>(t: &TensorGrid<T>) -> Result<(TetGrid<T>, AlphaTable<T>)> {
    let r = t.resolution;
    let nb = (r + 1).pow(3);
    let na = alpha_lattice_size(r).pow(3);
    if t.base.len() != nb || t.base_mask.len() != nb {
        return Err(Error::Format(format!("base tensor must have {nb} entries")));
    }
    if t.alpha.len() != na || t.alpha_mask.len() != na {
        return Err(Error::Format(format!("alpha tensor must have {na} entries")));
    }
    let occupied = placement(r)?;
    for (slot, (a, m)) in t.alpha.iter().zip(&t.alpha_mask).enumerate() {
        match m {
            0 if *a != T::zero() => {
                return Err(Error::Format(format!(
                    "alpha {a} at unmasked coordinate {:?}",
                    slot_coords(r, slot)
                )))
            }
            0 => {}
            1 if !occupied[slot] => {
                return Err(Error::Format(format!(
                    "mask set at coordinate {:?} which holds no candidate edge",
                    slot_coords(r, slot)
                )))
            }
            1 if !(*a >= T::zero() && *a <= T::one()) => {
                return Err(Error::Format(format!(
                    "alpha {a} outside [0, 1] at coordinate {:?}",
                    slot_coords(r, slot)
                )))
            }
            1 => {}
            other => return Err(Error::Format(format!("alpha mask value {other} is not 0 or 1"))),
        }
    }
    let mut grid = build_uniform_tet_grid(r, t.bbox)?;
    grid.set_deformation_scale(t.deformation_scale)?;
    for v in 0..nb {
        let [s, ox, oy, oz] = t.base[v];
        match t.base_mask[v] {
            1 => {}
            0 if t.base[v].iter().all(|x| *x == T::zero()) => {}
            0 => return Err(Error::Format(format!("values at unmasked base vertex {v}"))),
            other => return Err(Error::Format(format!("base mask value {other} is not 0 or 1"))),
        }
        if !s.is_finite() {
            return Err(Error::Format(format!("non-finite sdf at base vertex {v}")));
        }
        let o = Vec3::new(ox, oy, oz);
        if !o.0.iter().all(|c| c.abs() <= T::one()) {
            return Err(Error::Format(format!("offset outside [-1, 1] at base vertex {v}")));
        }
        grid.sdf[v] = s;
        grid.msdf[v] = T::one();
        grid.set_offset(v, o);
    }
    let table = AlphaTable {
        resolution: r,
        alpha: t.alpha.clone(),
        mask: t.alpha_mask.clone(),
    };
    Ok((grid, table))
}

#[derive(Clone, Copy, PartialEq)]
enum EdgeState {
    Kept,
    Discarded,
    Cut,
}

/// Open-surface extraction driven by the alpha table instead of mSDF values:
/// the watertight template comes from the grid's SDF, and boundary vertices
/// are placed with the stored coefficients.
pub fn extract_with_alpha<T: Real>(grid: &TetGrid<T>, table: &AlphaTable<T>) -> Result<ExtractedMesh<T>> {
    require_uniform(grid)?;
    let r = grid.resolution();
    if table.resolution != r {
        return Err(Error::InvalidArgument("alpha table resolution differs from grid".into()));
    }
    let template = extract_watertight(grid);
    let source = |i: u32| template.vertices[i as usize].as_mesh().expect("template vertex").source_edge;
    // alpha of template edge (x, y), measured from the midpoint-first endpoint
    let lookup = |x: u32, y: u32| -> Result<(T, bool)> {
        let (ex, ey) = (source(x), source(y));
        let slot = candidate_slot(r, ex, ey);
        let a = table.get(slot).ok_or_else(|| {
            Error::Format(format!(
                "alpha table has no entry for the edge between grid edges {ex:?} and {ey:?}"
            ))
        })?;
        Ok((a, midpoint_first(r, ex, ey)))
    };
    let state = |a: T| {
        if a == T::one() {
            EdgeState::Kept
        } else if a == T::zero() {
            EdgeState::Discarded
        } else {
            EdgeState::Cut
        }
    };

    let mut masks = Vec::with_capacity(template.faces.len());
    let mut betas: HashMap<(u32, u32), (T, bool)> = HashMap::new();
    for (fi, face) in template.faces.iter().enumerate() {
        let mut states = [EdgeState::Kept; 3];
        for k in 0..3 {
            let (x, y) = (face[k], face[(k + 1) % 3]);
            let (a, x_first) = lookup(x, y)?;
            states[k] = state(a);
            if states[k] == EdgeState::Cut {
                let (lo, hi) = if x < y { (x, y) } else { (y, x) };
                // coefficient from the lower template id
                let from_lo = if (lo == x) == x_first { a } else { T::one() - a };
                let lim = T::lit(ALPHA_CLAMP);
                betas.insert((lo, hi), (from_lo, a <= lim || a >= T::one() - lim));
            }
        }
        let cuts = states.iter().filter(|s| **s == EdgeState::Cut).count();
        let mask = match cuts {
            0 if states.iter().all(|s| *s == EdgeState::Kept) => 0b111,
            0 if states.iter().all(|s| *s == EdgeState::Discarded) => 0,
            2 => {
                // the uncut edge k joins corners k and k+1; the third corner differs
                let k = states.iter().position(|s| *s != EdgeState::Cut).expect("one uncut edge");
                let pair = (1u8 << k) | (1u8 << ((k + 1) % 3));
                if states[k] == EdgeState::Kept {
                    pair
                } else {
                    0b111 & !pair
                }
            }
            _ => {
                return Err(Error::Format(format!(
                    "alpha table gives template face {fi} an inconsistent cut pattern"
                )))
            }
        };
        masks.push(mask);
    }
    let mesh = clip_template(
        template,
        |fi, _| masks[fi],
        |lo, hi| *betas.get(&(lo, hi)).expect("cut edge recorded"),
    );
    Ok(mesh)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size(&self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
    channels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct GspHeader {
    version: u32,
    dtype: Dtype,
    resolution: usize,
    bbox_min: [String; 3],
    bbox_max: [String; 3],
    grid_scale: [String; 3],
    deformation_scale: String,
    tensors: Vec<TensorHeader>,
}

fn put<T: Real>(out: &mut Vec<u8>, v: T, dtype: Dtype) {
    match dtype {
        Dtype::F32 => out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes()),
        Dtype::F64 => out.extend_from_slice(&v.as_f64().to_le_bytes()),
    }
}

fn narrow<T: Real>(v: T, dtype: Dtype) -> String {
    match dtype {
        Dtype::F32 => (v.as_f64() as f32).to_string(),
        Dtype::F64 => v.as_f64().to_string(),
    }
}

/// Writes the `.gsp` container: magic, little-endian `u32` header length,
/// JSON header, then the base and alpha tensors in C order with channels
/// innermost.
pub fn write_gsp<T: Real, W: Write>(t: &TensorGrid<T>, dtype: Dtype, mut w: W) -> Result<()> {
    let nb = t.resolution + 1;
    let m = alpha_lattice_size(t.resolution);
    let vec3 = |v: Vec3<T>| v.0.map(|c| narrow(c, dtype));
    let header = GspHeader {
        version: GSP_VERSION,
        dtype,
        resolution: t.resolution,
        bbox_min: vec3(t.bbox.min),
        bbox_max: vec3(t.bbox.max),
        grid_scale: vec3(t.grid_scale()),
        deformation_scale: narrow(t.deformation_scale, dtype),
        tensors: vec![
            TensorHeader {
                name: "base".into(),
                shape: vec![nb, nb, nb, 5],
                channels: ["sdf", "offset_x", "offset_y", "offset_z", "mask"].map(String::from).to_vec(),
            },
            TensorHeader {
                name: "alpha".into(),
                shape: vec![m, m, m, 2],
                channels: ["alpha", "mask"].map(String::from).to_vec(),
            },
        ],
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(8 + json.len() + (5 * t.base.len() + 2 * t.alpha.len()) * dtype.size());
    out.extend_from_slice(&GSP_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (b, mask) in t.base.iter().zip(&t.base_mask) {
        for c in b {
            put(&mut out, *c, dtype);
        }
        put(&mut out, T::from_u8(*mask).expect("mask"), dtype);
    }
    for (a, mask) in t.alpha.iter().zip(&t.alpha_mask) {
        put(&mut out, *a, dtype);
        put(&mut out, T::from_u8(*mask).expect("mask"), dtype);
    }
    w.write_all(&out).map_err(|e| Error::Format(format!("writing tensor payload: {e}")))
}

fn parse_value<T: Real>(s: &str, dtype: Dtype) -> Result<T> {
    let bad = |e: std::num::ParseFloatError| Error::Format(format!("bad number '{s}' in header: {e}"));
    let v = match dtype {
        Dtype::F32 => s.parse::<f32>().map_err(bad)? as f64,
        Dtype::F64 => s.parse::<f64>().map_err(bad)?,
    };
    Ok(T::lit(v))
}

/// Reads a `.gsp` container. Values are widened or narrowed to `T`.
pub fn read_gsp<T: Real, R: Read>(mut r: R) -> Result<(TensorGrid<T>, Dtype)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::Format(format!("reading tensor file: {e}")))?;
    if bytes.len() < 8 || bytes[..4] != GSP_MAGIC {
        return Err(Error::Format("not a .gsp file (bad magic)".into()));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = &bytes[8..];
    if body.len() < hlen {
        return Err(Error::Format("truncated header".into()));
    }
    let header: GspHeader =
        serde_json::from_slice(&body[..hlen]).map_err(|e| Error::Format(format!("header: {e}")))?;
    if header.version != GSP_VERSION {
        return Err(Error::UnsupportedVersion { found: header.version, expected: GSP_VERSION });
    }
    let r = header.resolution;
    if r < 2 {
        return Err(Error::Format(format!("resolution {r} too small")));
    }
    let nb = (r + 1).pow(3);
    let m = alpha_lattice_size(r);
    let expected_shapes = [vec![r + 1, r + 1, r + 1, 5], vec![m, m, m, 2]];
    if header.tensors.len() != 2
        || header.tensors.iter().zip(&expected_shapes).any(|(t, s)| &t.shape != s)
    {
        return Err(Error::Format("tensor shapes do not match the resolution".into()));
    }
    let dtype = header.dtype;
    let payload = &body[hlen..];
    let count = 5 * nb + 2 * m * m * m;
    if payload.len() != count * dtype.size() {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {}",
            payload.len(),
            count * dtype.size()
        )));
    }
    let values: Vec<T> = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect(),
    };
    let mask = |v: T| -> Result<u8> {
        if v == T::zero() {
            Ok(0)
        } else if v == T::one() {
            Ok(1)
        } else {
            Err(Error::Format(format!("mask value {v} is not 0 or 1")))
        }
    };
    let vec3 = |s: &[String; 3]| -> Result<Vec3<T>> {
        Ok(Vec3::new(parse_value(&s[0], dtype)?, parse_value(&s[1], dtype)?, parse_value(&s[2], dtype)?))
    };
    let mut t = TensorGrid::zeros(
        r,
        Aabb::new(vec3(&header.bbox_min)?, vec3(&header.bbox_max)?),
        parse_value(&header.deformation_scale, dtype)?,
    );
    for v in 0..nb {
        let c = &values[5 * v..5 * v + 5];
        t.base[v] = [c[0], c[1], c[2], c[3]];
        t.base_mask[v] = mask(c[4])?;
    }
    let rest = &values[5 * nb..];
    for s in 0..m * m * m {
        t.alpha[s] = rest[2 * s];
        t.alpha_mask[s] = mask(rest[2 * s + 1])?;
    }
    Ok((t, dtype))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::extract::extract_gshell;
    use crate::shapes::{shape_grid, Shape};

    fn random_grid(r: usize, seed: u64) -> TetGrid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = build_uniform_tet_grid(r, Aabb::centered_cube(1.0)).unwrap();
        for i in 0..g.num_vertices() {
            g.sdf[i] = g.position(i).norm() - 0.6 + rng.gen_range(-0.3..0.3);
            g.msdf[i] = rng.gen_range(-1.0..1.0);
            g.set_offset(i, Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
        g
    }

    /// Unique faces counted independently from sorted vertex triples.
    fn independent_slot_count(r: usize) -> usize {
        let g = build_uniform_tet_grid::<f64>(r, Aabb::centered_cube(1.0)).unwrap();
        let mut faces = std::collections::BTreeSet::new();
        for t in g.tets() {
            for skip in 0..4 {
                let mut f: Vec<u32> = (0..4).filter(|k| *k != skip).map(|k| t[k]).collect();
                f.sort_unstable();
                faces.insert(f);
            }
        }
        3 * faces.len() + g.num_tets()
    }

    #[test]
    fn placement_is_injective_and_counted() {
        for r in [2, 3, 4, 5] {
            let p = placement(r).unwrap();
            let masked = p.iter().filter(|x| **x).count();
            assert_eq!(masked, independent_slot_count(r), "resolution {r}");
        }
    }

    #[test]
    fn closed_grid_stores_only_ones() {
        let g = shape_grid::<f64>(Shape::Sphere, 4, 0.5).unwrap();
        let t = encode(&g).unwrap();
        assert_eq!(t.num_masked_alpha(), independent_slot_count(4));
        for (a, m) in t.alpha.iter().zip(&t.alpha_mask) {
            assert_eq!(*a, if *m == 1 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn symmetric_cut_stores_half() {
        // mSDF is +-1 by half space, so template edges crossing z = 0 see (-1, +1)
        let mut g = shape_grid::<f64>(Shape::Sphere, 4, 0.6).unwrap();
        for i in 0..g.num_vertices() {
            g.msdf[i] = if g.position(i).z() >= 0.0 { 1.0 } else { -1.0 };
        }
        let template = project_msdf(&g, &extract_watertight(&g)).unwrap();
        let t = encode(&g).unwrap();
        let mut found = 0;
        for face in &template.faces {
            for k in 0..3 {
                let x = template.vertices[face[k] as usize].as_mesh().unwrap();
                let y = template.vertices[face[(k + 1) % 3] as usize].as_mesh().unwrap();
                let (nx, ny) = (x.projected_msdf.unwrap(), y.projected_msdf.unwrap());
                if nx == -ny && nx != 0.0 {
                    assert_eq!(t.alpha[candidate_slot(4, x.source_edge, y.source_edge)], 0.5);
                    found += 1;
                }
            }
        }
        assert!(found > 0);
    }

    #[test]
    fn roundtrip_is_exact() {
        for seed in 0..20 {
            let g = random_grid(4, seed);
            let t = encode(&g).unwrap();
            let (d, table) = decode(&t).unwrap();
            assert_eq!(d.sdf, g.sdf);
            assert_eq!(d.offsets(), g.offsets());
            assert_eq!(d.deformation_scale(), g.deformation_scale());
            assert_eq!(from_parts(&d, &table).unwrap(), t);
        }
    }

    #[test]
    fn zero_tensor_decodes_to_zero_grid() {
        let t = TensorGrid::zeros(3, Aabb::centered_cube(1.0), 0.05);
        let (g, table) = decode(&t).unwrap();
        assert!(table.is_empty());
        assert!(g.sdf.iter().all(|s| *s == 0.0));
        assert!(g.offsets().iter().all(|o| *o == Vec3::zero()));
        assert!(extract_with_alpha(&g, &table).unwrap().is_empty());
    }

    #[test]
    fn alpha_extraction_matches_gshell() {
        for seed in 0..20 {
            let g = random_grid(4, 100 + seed);
            let (d, table) = decode(&encode(&g).unwrap()).unwrap();
            let a = extract_with_alpha(&d, &table).unwrap();
            let b = extract_gshell(&g);
            assert_eq!(a.faces, b.faces);
            assert_eq!(a.boundary_edges, b.boundary_edges);
            for (p, q) in a.positions().iter().zip(b.positions()) {
                assert!(p.distance(&q) <= 1e-12);
            }
        }
    }

    #[test]
    fn unmasked_alpha_is_a_format_error() {
        let mut t = TensorGrid::zeros(3, Aabb::centered_cube(1.0), 0.05);
        t.alpha[5] = 0.5;
        assert!(matches!(decode(&t), Err(Error::Format(_))));
        let mut t = TensorGrid::zeros(3, Aabb::centered_cube(1.0), 0.05);
        // the lattice origin holds no candidate
        t.alpha_mask[0] = 1;
        assert!(matches!(decode(&t), Err(Error::Format(_))));
    }

    #[test]
    fn gsp_roundtrip() {
        let g = random_grid(3, 7);
        let t = encode(&g).unwrap();
        let mut buf = Vec::new();
        write_gsp(&t, Dtype::F64, &mut buf).unwrap();
        let (back, dtype) = read_gsp::<f64, _>(&buf[..]).unwrap();
        assert_eq!(dtype, Dtype::F64);
        assert_eq!(back, t);

        let mut g32 = build_uniform_tet_grid::<f32>(3, Aabb::centered_cube(1.0)).unwrap();
        for i in 0..g32.num_vertices() {
            g32.sdf[i] = g.sdf[i] as f32;
            g32.msdf[i] = g.msdf[i] as f32;
            g32.set_offset(i, g.offsets()[i].cast());
        }
        let t32 = encode(&g32).unwrap();
        let mut buf = Vec::new();
        write_gsp(&t32, Dtype::F32, &mut buf).unwrap();
        assert_eq!(read_gsp::<f32, _>(&buf[..]).unwrap().0, t32);
    }

    #[test]
    fn gsp_rejects_other_versions() {
        let t = TensorGrid::<f64>::zeros(2, Aabb::centered_cube(1.0), 0.1);
        let mut buf = Vec::new();
        write_gsp(&t, Dtype::F32, &mut buf).unwrap();
        let hlen = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
        let header = String::from_utf8(buf[8..8 + hlen].to_vec()).unwrap();
        let patched = header.replace("\"version\":1", "\"version\":9");
        assert_eq!(patched.len(), header.len());
        buf.splice(8..8 + hlen, patched.into_bytes());
        assert!(matches!(
            read_gsp::<f64, _>(&buf[..]),
            Err(Error::UnsupportedVersion { found: 9, expected: 1 })
        ));
    }

    #[test]
    fn gsp_rejects_bad_input() {
        assert!(matches!(read_gsp::<f64, _>(&b"nope"[..]), Err(Error::Format(_))));
        let t = encode(&random_grid(3, 8)).unwrap();
        let mut buf = Vec::new();
        write_gsp(&t, Dtype::F32, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_gsp::<f64, _>(&buf[..]), Err(Error::Format(_))));
    }
}
