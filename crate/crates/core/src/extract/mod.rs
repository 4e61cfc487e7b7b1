//! Marching Tetrahedra and joint watertight / open-surface extraction.
//!
//! Extraction runs in three steps:
//! 1. every sign-changing grid edge yields a template vertex at the linear
//!    SDF zero crossing, and the tet case table connects them into faces;
//! 2. grid mSDF values are interpolated onto template vertices with the same
//!    coefficient;
//! 3. each template triangle is clipped against `msdf >= 0` by the clip
//!    table, cutting edges at the linear mSDF zero crossing.
//!
//! The per-tet pass runs in parallel; vertex numbering comes from a
//! sequential merge in tet order, so output never depends on scheduling.

mod clip;
pub mod table;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use clip::{clip_oracle, ClipOutput};
use table::{tet_cases, ClipItem, CLIP_CASES};

use crate::error::{Error, Result};
use crate::grid::TetGrid;
use crate::mesh::{BoundaryVertex, ExtractedMesh, MeshVertex, Vertex};
use crate::scalar::is_negative;
use crate::Real;

/// Interpolation coefficients are clamped to `[ALPHA_CLAMP, 1 - ALPHA_CLAMP]`.
pub const ALPHA_CLAMP: f64 = 1e-6;

/// Below this `|v_a - v_b|` a crossing is treated as degenerate.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractMode {
    #[serde(rename = "watertight")]
    Watertight,
    #[serde(rename = "gshell")]
    GShell,
}

/// Zero crossing `t = v_a / (v_a - v_b)` of the linear function taking `v_a`
/// at 0 and `v_b` at 1, clamped into the open unit interval.
///
/// The flag is set when the clamp (or the degenerate-denominator guard) fired;
/// the coefficient is then treated as constant by differentiation.
#[inline]
pub fn crossing_coefficient<T: Real>(va: T, vb: T) -> (T, bool) {
    let lo = T::lit(ALPHA_CLAMP);
    let hi = T::one() - lo;
    let d = va - vb;
    if d.abs() < T::lit(DEGENERATE_DENOMINATOR) {
        let t = if d == T::zero() { T::lit(0.5) } else { va / d };
        let t = if t.is_finite() { t.max(lo).min(hi) } else { T::lit(0.5) };
        return (t, true);
    }
    let t = va / d;
    if t < lo {
        (lo, true)
    } else if t > hi {
        (hi, true)
    } else {
        (t, false)
    }
}

struct TetHit {
    tet: u32,
    /// Global edge ids of the case polygon, in polygon order.
    edge_ids: [u32; 4],
    len: u8,
}

/// Marching Tetrahedra on the SDF values of `grid`.
pub fn extract_watertight<T: Real>(grid: &TetGrid<T>) -> ExtractedMesh<T> {
    let cases = tet_cases();
    let tets = grid.tets();
    let tet_edges = grid.tet_edge_ids();
    let hits: Vec<TetHit> = (0..tets.len())
        .into_par_iter()
        .filter_map(|t| {
            let tet = &tets[t];
            let mut mask = 0usize;
            for (k, v) in tet.iter().enumerate() {
                if is_negative(grid.sdf[*v as usize]) {
                    mask |= 1 << k;
                }
            }
            let case = &cases[mask];
            if case.len == 0 {
                return None;
            }
            let mut edge_ids = [0u32; 4];
            for (slot, local) in case.edges().iter().enumerate() {
                edge_ids[slot] = tet_edges[t][*local as usize];
            }
            Some(TetHit {
                tet: t as u32,
                edge_ids,
                len: case.len,
            })
        })
        .collect();

    // deterministic merge: vertices numbered by (tet index, edge key)
    let edges = grid.edges();
    let mut edge_vertex = vec![u32::MAX; edges.len()];
    let mut sources: Vec<(u32, u32)> = Vec::new();
    let mut faces = Vec::with_capacity(hits.len() * 2);
    for hit in &hits {
        let ids = &hit.edge_ids[..hit.len as usize];
        let mut fresh: Vec<u32> = ids
            .iter()
            .copied()
            .filter(|e| edge_vertex[*e as usize] == u32::MAX)
            .collect();
        fresh.sort_unstable();
        for e in fresh {
            edge_vertex[e as usize] = sources.len() as u32;
            sources.push((e, hit.tet));
        }
        let q: Vec<u32> = ids.iter().map(|e| edge_vertex[*e as usize]).collect();
        if q.len() == 3 {
            faces.push([q[0], q[1], q[2]]);
        } else {
            let key = |slot: usize| edges[ids[slot] as usize];
            let sorted_pair = |a: usize, b: usize| {
                let (x, y) = (key(a), key(b));
                if x <= y {
                    (x, y)
                } else {
                    (y, x)
                }
            };
            if sorted_pair(0, 2) <= sorted_pair(1, 3) {
                faces.push([q[0], q[1], q[2]]);
                faces.push([q[0], q[2], q[3]]);
            } else {
                faces.push([q[1], q[2], q[3]]);
                faces.push([q[1], q[3], q[0]]);
            }
        }
    }

    let vertices: Vec<Vertex<T>> = sources
        .par_iter()
        .map(|&(e, tet)| {
            let key = edges[e as usize];
            let (a, b) = (key.lo(), key.hi());
            let (alpha, clamped) = crossing_coefficient(grid.sdf[a], grid.sdf[b]);
            Vertex::Mesh(MeshVertex {
                position: grid.position(a).lerp(&grid.position(b), alpha),
                source_edge: key,
                alpha,
                alpha_clamped: clamped,
                source_tet: tet,
                projected_msdf: None,
            })
        })
        .collect();

    ExtractedMesh {
        vertices,
        faces,
        boundary_edges: Vec::new(),
        source_grid: Some(grid.fingerprint()),
    }
}

/// Interpolates grid mSDF onto every template vertex:
/// `msdf' = (1 - alpha) msdf_a + alpha msdf_b`, which equals
/// `(s_a msdf_b - s_b msdf_a) / (s_a - s_b)` for the unclamped coefficient.
pub fn project_msdf<T: Real>(grid: &TetGrid<T>, mesh: &ExtractedMesh<T>) -> Result<ExtractedMesh<T>> {
    check_provenance(grid, mesh)?;
    let mut out = mesh.clone();
    let nv = grid.num_vertices();
    for (i, v) in out.vertices.iter_mut().enumerate() {
        let Vertex::Mesh(mv) = v else { continue };
        let (a, b) = (mv.source_edge.lo(), mv.source_edge.hi());
        if a >= nv || b >= nv || a == b {
            return Err(Error::Internal(format!(
                "mesh vertex {i} has no valid source edge ({a}, {b})"
            )));
        }
        if is_negative(grid.sdf[a]) == is_negative(grid.sdf[b]) {
            return Err(Error::Internal(format!(
                "mesh vertex {i} sits on edge ({a}, {b}) without an SDF sign change"
            )));
        }
        mv.projected_msdf =
            Some((T::one() - mv.alpha) * grid.msdf[a] + mv.alpha * grid.msdf[b]);
    }
    Ok(out)
}

pub(crate) fn check_provenance<T: Real>(grid: &TetGrid<T>, mesh: &ExtractedMesh<T>) -> Result<()> {
    match mesh.source_grid {
        Some(fp) if fp != grid.fingerprint() => Err(Error::InvalidArgument(
            "mesh was not extracted from this grid".into(),
        )),
        _ => Ok(()),
    }
}

/// Joint extraction: watertight template, mSDF projection, then per-face
/// clipping of the template against `msdf' >= 0`.
pub fn extract_gshell<T: Real>(grid: &TetGrid<T>) -> ExtractedMesh<T> {
    let template = extract_watertight(grid);
    let template = project_msdf(grid, &template).expect("template extracted from this grid");
    clip_projected(template)
}

/// Clips a template whose vertices all carry a projected mSDF value.
pub fn clip_projected<T: Real>(template: ExtractedMesh<T>) -> ExtractedMesh<T> {
    let msdf: Vec<T> = template
        .vertices
        .iter()
        .map(|v| {
            v.as_mesh()
                .and_then(|m| m.projected_msdf)
                .expect("template vertex with projected mSDF")
        })
        .collect();
    clip_template(
        template,
        |_, face| {
            let mut mask = 0u8;
            for (k, v) in face.iter().enumerate() {
                if !is_negative(msdf[*v as usize]) {
                    mask |= 1 << k;
                }
            }
            mask
        },
        |lo, hi| crossing_coefficient(msdf[lo as usize], msdf[hi as usize]),
    )
}

pub fn extract<T: Real>(grid: &TetGrid<T>, mode: ExtractMode) -> ExtractedMesh<T> {
    match mode {
        ExtractMode::Watertight => extract_watertight(grid),
        ExtractMode::GShell => extract_gshell(grid),
    }
}

/// Clips every template face by its kept-corner mask.
///
/// `kept_mask(face_index, face)` returns bit `k` set iff corner `k` is kept;
/// `cut(lo, hi)` returns the crossing coefficient along template edge
/// `(lo, hi)` (with `lo < hi`), measured from `lo`.
pub(crate) fn clip_template<T, K, C>(
    template: ExtractedMesh<T>,
    kept_mask: K,
    mut cut: C,
) -> ExtractedMesh<T>
where
    T: Real,
    K: Fn(usize, &[u32; 3]) -> u8,
    C: FnMut(u32, u32) -> (T, bool),
{
    let mut vertices = template.vertices;
    let mut faces = Vec::with_capacity(template.faces.len());
    let mut boundary_edges = Vec::new();
    let mut cut_vertex: HashMap<(u32, u32), u32> = HashMap::new();

    for (fi, face) in template.faces.iter().enumerate() {
        let case = &CLIP_CASES[kept_mask(fi, face) as usize];
        if case.polygon.is_empty() {
            continue;
        }
        let mut resolve = |item: ClipItem, vertices: &mut Vec<Vertex<T>>| -> u32 {
            match item {
                ClipItem::Corner(k) => face[k as usize],
                ClipItem::Cut(a, b) => {
                    let (x, y) = (face[a as usize], face[b as usize]);
                    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
                    *cut_vertex.entry((lo, hi)).or_insert_with(|| {
                        let (beta, clamped) = cut(lo, hi);
                        let p = vertices[lo as usize]
                            .position()
                            .lerp(&vertices[hi as usize].position(), beta);
                        vertices.push(Vertex::Boundary(BoundaryVertex {
                            position: p,
                            source_mesh_edge: [lo, hi],
                            beta,
                            beta_clamped: clamped,
                        }));
                        (vertices.len() - 1) as u32
                    })
                }
            }
        };
        let poly: Vec<u32> = case
            .polygon
            .iter()
            .map(|item| resolve(*item, &mut vertices))
            .collect();
        for k in 1..poly.len() - 1 {
            faces.push([poly[0], poly[k], poly[k + 1]]);
        }
        if let Some([a, b]) = case.boundary {
            boundary_edges.push([resolve(a, &mut vertices), resolve(b, &mut vertices)]);
        }
    }

    ExtractedMesh {
        vertices,
        faces,
        boundary_edges,
        source_grid: template.source_grid,
    }
}
