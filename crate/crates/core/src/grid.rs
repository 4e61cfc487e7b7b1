//! Deformable tetrahedral grid carrying per-vertex SDF and mSDF values.
//!
//! Cube cells are split into six tetrahedra along the main diagonal (Kuhn /
//! Freudenthal subdivision): for a cell with base corner `v` and each
//! permutation `(a, b, c)` of the axes, the tet is
//! `[v, v + e_a, v + e_a + e_b, v + 1]`. Every tet edge is therefore a
//! non-negative 0/1 step, the tiling is face-conforming between neighbouring
//! cells, and no extra vertices are introduced. Tets are stored positively
//! oriented.
//!
//! Vertex `(i, j, k)` of the `(R + 1)^3` lattice has index
//! `(i * (R + 1) + j) * (R + 1) + k`, so index order is the lexicographic
//! order of canonical positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{signed_tet_volume, Vec3};
use crate::Real;

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Self {
        Aabb { min, max }
    }

    /// The cube `[-half, half]^3`.
    pub fn centered_cube(half: T) -> Self {
        Aabb::new(Vec3::splat(-half), Vec3::splat(half))
    }

    pub fn extent(&self) -> Vec3<T> {
        self.max - self.min
    }

    pub fn volume(&self) -> T {
        let e = self.extent();
        e.x() * e.y() * e.z()
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && (0..3).all(|k| self.max[k] > self.min[k])
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3<T>>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.min_elem(p), hi.max_elem(p)));
        Some(Aabb { min, max })
    }
}

/// Undirected grid edge, always stored with the smaller vertex index first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey(pub u32, pub u32);

impl EdgeKey {
    #[inline]
    pub fn new(a: u32, b: u32) -> Self {
        if a < b {
            EdgeKey(a, b)
        } else {
            EdgeKey(b, a)
        }
    }

    #[inline]
    pub fn lo(&self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn hi(&self) -> usize {
        self.1 as usize
    }
}

/// Local tet edges as pairs of local vertex slots.
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Scalar fields sampled onto a grid.
pub trait AnalyticField<T: Real>: Sync {
    fn sdf(&self, p: &Vec3<T>) -> T;
    fn msdf(&self, p: &Vec3<T>) -> T;
}

/// Field built from two closures.
pub struct FnField<S, M> {
    pub sdf_fn: S,
    pub msdf_fn: M,
}

impl<T, S, M> AnalyticField<T> for FnField<S, M>
where
    T: Real,
    S: Fn(&Vec3<T>) -> T + Sync,
    M: Fn(&Vec3<T>) -> T + Sync,
{
    fn sdf(&self, p: &Vec3<T>) -> T {
        (self.sdf_fn)(p)
    }

    fn msdf(&self, p: &Vec3<T>) -> T {
        (self.msdf_fn)(p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TetGrid<T> {
    canonical_positions: Vec<Vec3<T>>,
    offsets: Vec<Vec3<T>>,
    deformation_scale: T,
    tets: Vec<[u32; 4]>,
    pub sdf: Vec<T>,
    pub msdf: Vec<T>,
    resolution: usize,
    bbox: Aabb<T>,
    // derived
    edges: Vec<EdgeKey>,
    tet_edges: Vec<[u32; 6]>,
}

/// Number of lattice vertices for a grid with `resolution` cells per axis.
pub fn lattice_vertex_count(resolution: usize) -> usize {
    (resolution + 1).pow(3)
}

#[inline]
pub fn lattice_index(n: usize, i: usize, j: usize, k: usize) -> usize {
    (i * n + j) * n + k
}

/// Default deformation scale: 0.2 of the smallest canonical cell edge.
///
/// Kuhn tets have minimum altitude `h / sqrt(2)`; with per-axis displacement at
/// most `0.2 h` each vertex moves at most `0.2 sqrt(3) h`, so no altitude can
/// shrink to zero.
pub fn default_deformation_scale<T: Real>(resolution: usize, bbox: &Aabb<T>) -> T {
    let e = bbox.extent();
    let h = e.x().min(e.y()).min(e.z()) / T::from_usize_lossy(resolution);
    h * T::lit(0.2)
}

/// Builds a uniform Kuhn-subdivided tet grid with `resolution` cells per axis.
pub fn build_uniform_tet_grid<T: Real>(resolution: usize, bbox: Aabb<T>) -> Result<TetGrid<T>> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    if !bbox.is_valid() {
        return Err(Error::InvalidArgument("bounding box must be finite and non-empty".into()));
    }
    let n = resolution + 1;
    if n.pow(3) > u32::MAX as usize {
        return Err(Error::InvalidArgument(format!("resolution {resolution} too large")));
    }
    let mut canonical = Vec::with_capacity(n.pow(3));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                canonical.push(lattice_position(&bbox, resolution, [i, j, k]));
            }
        }
    }
    let tets = kuhn_tets(resolution);
    let deformation_scale = default_deformation_scale(resolution, &bbox);
    let nv = canonical.len();
    TetGrid::assemble(
        canonical,
        vec![Vec3::zero(); nv],
        deformation_scale,
        tets,
        vec![T::zero(); nv],
        vec![T::zero(); nv],
        resolution,
        bbox,
    )
}

/// Canonical position of lattice node `ijk`.
pub fn lattice_position<T: Real>(bbox: &Aabb<T>, resolution: usize, ijk: [usize; 3]) -> Vec3<T> {
    let r = T::from_usize_lossy(resolution);
    let e = bbox.extent();
    Vec3::new(
        bbox.min.x() + e.x() * T::from_usize_lossy(ijk[0]) / r,
        bbox.min.y() + e.y() * T::from_usize_lossy(ijk[1]) / r,
        bbox.min.z() + e.z() * T::from_usize_lossy(ijk[2]) / r,
    )
}

const AXIS_PERMUTATIONS: [([usize; 3], bool); 6] = [
    ([0, 1, 2], true),
    ([0, 2, 1], false),
    ([1, 0, 2], false),
    ([1, 2, 0], true),
    ([2, 0, 1], true),
    ([2, 1, 0], false),
];

fn kuhn_tets(resolution: usize) -> Vec<[u32; 4]> {
    let n = resolution + 1;
    let mut tets = Vec::with_capacity(6 * resolution.pow(3));
    for i in 0..resolution {
        for j in 0..resolution {
            for k in 0..resolution {
                for (perm, even) in AXIS_PERMUTATIONS {
                    let mut c = [i, j, k];
                    let mut verts = [0u32; 4];
                    verts[0] = lattice_index(n, c[0], c[1], c[2]) as u32;
                    for (step, axis) in perm.iter().enumerate() {
                        c[*axis] += 1;
                        verts[step + 1] = lattice_index(n, c[0], c[1], c[2]) as u32;
                    }
                    // [v, v+e_a, v+e_a+e_b, v+1] has the orientation sign of the permutation
                    if !even {
                        verts.swap(2, 3);
                    }
                    tets.push(verts);
                }
            }
        }
    }
    tets
}

impl<T: Real> TetGrid<T> {
    /// Assembles a grid from raw parts, validating every structural invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        canonical_positions: Vec<Vec3<T>>,
        offsets: Vec<Vec3<T>>,
        deformation_scale: T,
        tets: Vec<[u32; 4]>,
        sdf: Vec<T>,
        msdf: Vec<T>,
        resolution: usize,
        bbox: Aabb<T>,
    ) -> Result<Self> {
        let nv = canonical_positions.len();
        if offsets.len() != nv || sdf.len() != nv || msdf.len() != nv {
            return Err(Error::InvalidArgument(format!(
                "attribute lengths differ: positions {nv}, offsets {}, sdf {}, msdf {}",
                offsets.len(),
                sdf.len(),
                msdf.len()
            )));
        }
        if !(deformation_scale > T::zero()) || !deformation_scale.is_finite() {
            return Err(Error::InvalidArgument("deformation scale must be positive".into()));
        }
        for (t, tet) in tets.iter().enumerate() {
            for a in 0..4 {
                if tet[a] as usize >= nv {
                    return Err(Error::InvalidArgument(format!(
                        "tet {t} references vertex {} out of range",
                        tet[a]
                    )));
                }
                for b in (a + 1)..4 {
                    if tet[a] == tet[b] {
                        return Err(Error::InvalidArgument(format!(
                            "tet {t} repeats vertex {}",
                            tet[a]
                        )));
                    }
                }
            }
        }
        for (i, o) in offsets.iter().enumerate() {
            if !o.is_finite() || o.0.iter().any(|v| v.abs() > T::one()) {
                return Err(Error::InvalidArgument(format!(
                    "offset of vertex {i} outside [-1, 1]"
                )));
            }
        }
        let (edges, tet_edges) = build_edge_table(&tets);
        Ok(TetGrid {
            canonical_positions,
            offsets,
            deformation_scale,
            tets,
            sdf,
            msdf,
            resolution,
            bbox,
            edges,
            tet_edges,
        })
    }

    /// Grid over an arbitrary tet mesh (zero offsets, unit deformation scale).
    ///
    /// Negatively oriented tets are reordered so every tet is positively
    /// oriented, as extraction expects.
    pub fn from_tet_mesh(
        positions: Vec<Vec3<T>>,
        tets: Vec<[u32; 4]>,
        sdf: Vec<T>,
        msdf: Vec<T>,
    ) -> Result<Self> {
        let bbox = Aabb::from_points(positions.iter())
            .ok_or_else(|| Error::InvalidArgument("tet mesh has no vertices".into()))?;
        let nv = positions.len();
        let mut tets = tets;
        for t in tets.iter_mut() {
            if t.iter().any(|v| *v as usize >= nv) {
                return Err(Error::InvalidArgument("tet vertex out of range".into()));
            }
            let [a, b, c, d] = t.map(|v| positions[v as usize]);
            if signed_tet_volume(&a, &b, &c, &d) < T::zero() {
                t.swap(2, 3);
            }
        }
        Self::assemble(positions, vec![Vec3::zero(); nv], T::one(), tets, sdf, msdf, 1, bbox)
    }

    pub fn num_vertices(&self) -> usize {
        self.canonical_positions.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bbox(&self) -> &Aabb<T> {
        &self.bbox
    }

    pub fn deformation_scale(&self) -> T {
        self.deformation_scale
    }

    pub fn canonical_positions(&self) -> &[Vec3<T>] {
        &self.canonical_positions
    }

    pub fn offsets(&self) -> &[Vec3<T>] {
        &self.offsets
    }

    pub fn tets(&self) -> &[[u32; 4]] {
        &self.tets
    }

    /// Unique undirected edges, sorted.
    pub fn edges(&self) -> &[EdgeKey] {
        &self.edges
    }

    /// Per tet, the index into [`Self::edges`] of each local edge in [`TET_EDGES`] order.
    pub fn tet_edge_ids(&self) -> &[[u32; 6]] {
        &self.tet_edges
    }

    /// Effective position `p_i = canonical_i + deformation_scale * offset_i`.
    #[inline]
    pub fn position(&self, i: usize) -> Vec3<T> {
        self.canonical_positions[i] + self.offsets[i] * self.deformation_scale
    }

    pub fn positions(&self) -> Vec<Vec3<T>> {
        (0..self.num_vertices()).map(|i| self.position(i)).collect()
    }

    /// Sets an offset, clipping each component to `[-1, 1]`.
    pub fn set_offset(&mut self, i: usize, offset: Vec3<T>) {
        self.offsets[i] = clip_offset(offset);
    }

    /// Applies `f` to every offset, then clips.
    pub fn update_offsets(&mut self, mut f: impl FnMut(usize, &mut Vec3<T>)) {
        for (i, o) in self.offsets.iter_mut().enumerate() {
            f(i, o);
            *o = clip_offset(*o);
        }
    }

    pub fn set_deformation_scale(&mut self, scale: T) -> Result<()> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::InvalidArgument("deformation scale must be positive".into()));
        }
        self.deformation_scale = scale;
        Ok(())
    }

    pub fn signed_volume(&self, t: usize) -> T {
        let [a, b, c, d] = self.tets[t].map(|v| self.position(v as usize));
        signed_tet_volume(&a, &b, &c, &d)
    }

    /// Deterministic 64-bit digest of topology and all attribute bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write_u64(self.num_vertices() as u64);
        h.write_u64(self.tets.len() as u64);
        h.write_u64(self.deformation_scale.as_f64().to_bits());
        for p in &self.canonical_positions {
            for v in p.0 {
                h.write_u64(v.as_f64().to_bits());
            }
        }
        for o in &self.offsets {
            for v in o.0 {
                h.write_u64(v.as_f64().to_bits());
            }
        }
        for v in self.sdf.iter().chain(self.msdf.iter()) {
            h.write_u64(v.as_f64().to_bits());
        }
        for t in &self.tets {
            for v in t {
                h.write_u64(*v as u64);
            }
        }
        h.finish()
    }

    /// True when canonical positions and tets are exactly those of
    /// [`build_uniform_tet_grid`] for this resolution and bounding box.
    pub fn matches_uniform_layout(&self) -> bool {
        let r = self.resolution;
        let n = r + 1;
        if r < 2 || self.num_vertices() != n.pow(3) {
            return false;
        }
        let positions_match = (0..self.num_vertices()).all(|v| {
            let ijk = [v / (n * n), (v / n) % n, v % n];
            self.canonical_positions[v] == lattice_position(&self.bbox, r, ijk)
        });
        positions_match && self.tets == kuhn_tets(r)
    }

    /// Converts the scalar type of every attribute.
    pub fn cast<U: Real>(&self) -> TetGrid<U> {
        TetGrid {
            canonical_positions: self.canonical_positions.iter().map(Vec3::cast).collect(),
            offsets: self.offsets.iter().map(|o| clip_offset(o.cast())).collect(),
            deformation_scale: U::lit(self.deformation_scale.as_f64()),
            tets: self.tets.clone(),
            sdf: self.sdf.iter().map(|v| U::lit(v.as_f64())).collect(),
            msdf: self.msdf.iter().map(|v| U::lit(v.as_f64())).collect(),
            resolution: self.resolution,
            bbox: Aabb::new(self.bbox.min.cast(), self.bbox.max.cast()),
            edges: self.edges.clone(),
            tet_edges: self.tet_edges.clone(),
        }
    }
}

#[inline]
fn clip_offset<T: Real>(o: Vec3<T>) -> Vec3<T> {
    o.map(|v| if v.is_nan() { T::zero() } else { v.max(-T::one()).min(T::one()) })
}

fn build_edge_table(tets: &[[u32; 4]]) -> (Vec<EdgeKey>, Vec<[u32; 6]>) {
    let mut edges: Vec<EdgeKey> = tets
        .iter()
        .flat_map(|t| TET_EDGES.iter().map(move |[a, b]| EdgeKey::new(t[*a], t[*b])))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let tet_edges = tets
        .iter()
        .map(|t| {
            TET_EDGES.map(|[a, b]| {
                let key = EdgeKey::new(t[a], t[b]);
                edges.binary_search(&key).expect("edge present") as u32
            })
        })
        .collect();
    (edges, tet_edges)
}

/// Samples `field` at the effective vertex positions.
pub fn sample_fields<T: Real, F: AnalyticField<T> + ?Sized>(
    grid: &TetGrid<T>,
    field: &F,
) -> Result<TetGrid<T>> {
    let mut out = grid.clone();
    for i in 0..grid.num_vertices() {
        let p = grid.position(i);
        let s = field.sdf(&p);
        if !s.is_finite() {
            return Err(Error::NonFiniteField { field: "sdf", vertex: i });
        }
        let m = field.msdf(&p);
        if !m.is_finite() {
            return Err(Error::NonFiniteField { field: "msdf", vertex: i });
        }
        out.sdf[i] = s;
        out.msdf[i] = m;
    }
    Ok(out)
}

/// FNV-1a, used for cheap provenance digests.
pub(crate) struct Fnv64(u64);

impl Fnv64 {
    pub(crate) fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn write_bytes(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}
