//! Reverse-mode derivatives of extracted geometry with respect to grid
//! attributes.
//!
//! A template vertex on grid edge `(a, b)` is
//! `u = (1 - alpha) p_a + alpha p_b` with `alpha = s_a / (s_a - s_b)` and
//! `p = canonical + scale * offset`; its projected mSDF is
//! `nu' = (1 - alpha) nu_a + alpha nu_b`. A boundary vertex on template edge
//! `(i, j)` is `o = (1 - beta) u_i + beta u_j` with
//! `beta = nu'_i / (nu'_i - nu'_j)`. Clamped coefficients are constants.
//!
//! Cotangents are accepted on vertex positions and on projected mSDF values.
//! An mSDF cotangent on a boundary vertex refers to the interpolated value
//! `(1 - beta) nu'_i + beta nu'_j` with `beta` held fixed.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extract::check_provenance;
use crate::grid::TetGrid;
use crate::mesh::{ExtractedMesh, Vertex};
use crate::vec3::Vec3;
use crate::Real;

/// Which grid attributes receive gradient. Masked attributes come back as zeros.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VjpOptions {
    pub sdf: bool,
    pub msdf: bool,
    pub offsets: bool,
}

impl Default for VjpOptions {
    fn default() -> Self {
        VjpOptions { sdf: true, msdf: true, offsets: true }
    }
}

impl VjpOptions {
    pub fn msdf_only() -> Self {
        VjpOptions { sdf: false, msdf: true, offsets: false }
    }
}

/// Gradients over the per-vertex grid attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct GridGradients<T> {
    pub sdf: Vec<T>,
    pub msdf: Vec<T>,
    pub offsets: Vec<Vec3<T>>,
}

impl<T: Real> GridGradients<T> {
    pub fn zeros(num_vertices: usize) -> Self {
        GridGradients {
            sdf: vec![T::zero(); num_vertices],
            msdf: vec![T::zero(); num_vertices],
            offsets: vec![Vec3::zero(); num_vertices],
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &GridGradients<T>, c: T) {
        for (a, b) in self.sdf.iter_mut().zip(&other.sdf) {
            *a += c * *b;
        }
        for (a, b) in self.msdf.iter_mut().zip(&other.msdf) {
            *a += c * *b;
        }
        for (a, b) in self.offsets.iter_mut().zip(&other.offsets) {
            *a += *b * c;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sdf.iter().chain(&self.msdf).all(|v| *v == T::zero())
            && self.offsets.iter().all(|v| *v == Vec3::zero())
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for v in self.sdf.iter().chain(&self.msdf) {
            m = m.max(v.abs());
        }
        for v in &self.offsets {
            for c in v.0 {
                m = m.max(c.abs());
            }
        }
        m
    }
}

/// Contribution of one template vertex to the grid gradients.
struct EdgeGrad<T> {
    a: usize,
    b: usize,
    sdf: [T; 2],
    msdf: [T; 2],
    offset: [Vec3<T>; 2],
}

/// Gradient of `sum <position_cot[v], x_v> + sum msdf_cot[v] * nu'_v` over
/// the grid attributes.
///
/// `mesh` must come from `extract_watertight` or `extract_gshell` on `grid`.
/// `msdf_cot` requires projected mSDF values on the template.
pub fn vjp<T: Real>(
    grid: &TetGrid<T>,
    mesh: &ExtractedMesh<T>,
    position_cot: &[Vec3<T>],
    msdf_cot: Option<&[T]>,
    options: VjpOptions,
) -> Result<GridGradients<T>> {
    check_provenance(grid, mesh)?;
    let nv = mesh.num_vertices();
    if position_cot.len() != nv {
        return Err(Error::InvalidArgument(format!(
            "expected {nv} position cotangents, got {}",
            position_cot.len()
        )));
    }
    if let Some(c) = msdf_cot {
        if c.len() != nv {
            return Err(Error::InvalidArgument(format!(
                "expected {nv} mSDF cotangents, got {}",
                c.len()
            )));
        }
    }
    let nt = mesh.num_template_vertices();
    let projected = |i: usize| -> Result<T> {
        mesh.vertices[i]
            .as_mesh()
            .and_then(|m| m.projected_msdf)
            .ok_or_else(|| Error::InvalidArgument(format!("vertex {i} has no projected mSDF")))
    };

    // boundary vertices first: they only feed template cotangents
    let mut g_pos: Vec<Vec3<T>> = position_cot[..nt].to_vec();
    let mut g_nu: Vec<T> = match msdf_cot {
        Some(c) => c[..nt].to_vec(),
        None => vec![T::zero(); nt],
    };
    for v in nt..nv {
        let Vertex::Boundary(bv) = &mesh.vertices[v] else {
            return Err(Error::Internal(format!("template vertex {v} after boundary vertices")));
        };
        let [i, j] = bv.source_mesh_edge.map(|x| x as usize);
        let beta = bv.beta;
        let gp = position_cot[v];
        g_pos[i] += gp * (T::one() - beta);
        g_pos[j] += gp * beta;
        let gn = msdf_cot.map_or(T::zero(), |c| c[v]);
        let (ni, nj) = (projected(i)?, projected(j)?);
        g_nu[i] += gn * (T::one() - beta);
        g_nu[j] += gn * beta;
        if !bv.beta_clamped {
            let d = ni - nj;
            let g_beta = gp.dot(&(mesh.position(j) - mesh.position(i)));
            g_nu[i] += g_beta * (-nj / (d * d));
            g_nu[j] += g_beta * (ni / (d * d));
        }
    }

    let scale = grid.deformation_scale();
    let contributions: Vec<Option<EdgeGrad<T>>> = (0..nt)
        .into_par_iter()
        .map(|v| {
            let mv = mesh.vertices[v].as_mesh()?;
            let (gp, gn) = (g_pos[v], g_nu[v]);
            if gp == Vec3::zero() && gn == T::zero() {
                return None;
            }
            let (a, b) = (mv.source_edge.lo(), mv.source_edge.hi());
            let alpha = mv.alpha;
            let mut sdf = [T::zero(); 2];
            if !mv.alpha_clamped {
                let (sa, sb) = (grid.sdf[a], grid.sdf[b]);
                let d = sa - sb;
                let g_alpha = gp.dot(&(grid.position(b) - grid.position(a)))
                    + gn * (grid.msdf[b] - grid.msdf[a]);
                sdf = [g_alpha * (-sb / (d * d)), g_alpha * (sa / (d * d))];
            }
            Some(EdgeGrad {
                a,
                b,
                sdf,
                msdf: [gn * (T::one() - alpha), gn * alpha],
                offset: [gp * (scale * (T::one() - alpha)), gp * (scale * alpha)],
            })
        })
        .collect();

    // fixed-order scatter keeps the sums independent of scheduling
    let mut out = GridGradients::zeros(grid.num_vertices());
    for c in contributions.into_iter().flatten() {
        if options.sdf {
            out.sdf[c.a] += c.sdf[0];
            out.sdf[c.b] += c.sdf[1];
        }
        if options.msdf {
            out.msdf[c.a] += c.msdf[0];
            out.msdf[c.b] += c.msdf[1];
        }
        if options.offsets {
            out.offsets[c.a] += c.offset[0];
            out.offsets[c.b] += c.offset[1];
        }
    }
    Ok(out)
}
