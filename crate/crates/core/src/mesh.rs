//! Extracted triangle meshes with per-vertex provenance.

use serde::{Deserialize, Serialize};

use crate::grid::EdgeKey;
use crate::vec3::{triangle_area, Vec3};
use crate::Real;

/// A watertight-template vertex on a sign-changing grid edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshVertex<T> {
    pub position: Vec3<T>,
    pub source_edge: EdgeKey,
    /// Zero crossing along `source_edge`, measured from the lower index endpoint.
    pub alpha: T,
    /// True when `alpha` hit the clamp and carries no derivative.
    pub alpha_clamped: bool,
    /// First tet (in grid order) that emitted this vertex.
    pub source_tet: u32,
    /// Interpolated mSDF value, set by projection.
    pub projected_msdf: Option<T>,
}

/// A vertex on the mSDF zero isoline, cut from a watertight mesh edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryVertex<T> {
    pub position: Vec3<T>,
    /// Watertight vertex ids, lower id first.
    pub source_mesh_edge: [u32; 2],
    /// Zero crossing along `source_mesh_edge`, measured from the first vertex.
    pub beta: T,
    pub beta_clamped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Vertex<T> {
    Mesh(MeshVertex<T>),
    Boundary(BoundaryVertex<T>),
}

impl<T: Real> Vertex<T> {
    #[inline]
    pub fn position(&self) -> Vec3<T> {
        match self {
            Vertex::Mesh(v) => v.position,
            Vertex::Boundary(b) => b.position,
        }
    }

    pub fn as_mesh(&self) -> Option<&MeshVertex<T>> {
        match self {
            Vertex::Mesh(v) => Some(v),
            Vertex::Boundary(_) => None,
        }
    }

    pub fn as_boundary(&self) -> Option<&BoundaryVertex<T>> {
        match self {
            Vertex::Boundary(b) => Some(b),
            Vertex::Mesh(_) => None,
        }
    }
}

/// Triangle mesh produced by extraction.
///
/// Watertight-template vertices always precede boundary vertices. Faces are
/// oriented so their normals point towards positive SDF. Boundary edges are
/// directed as they appear in their (single) incident face.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedMesh<T> {
    pub vertices: Vec<Vertex<T>>,
    pub faces: Vec<[u32; 3]>,
    pub boundary_edges: Vec<[u32; 2]>,
    /// Fingerprint of the grid this mesh was extracted from, if any.
    pub source_grid: Option<u64>,
}

impl<T: Real> Default for ExtractedMesh<T> {
    fn default() -> Self {
        ExtractedMesh {
            vertices: Vec::new(),
            faces: Vec::new(),
            boundary_edges: Vec::new(),
            source_grid: None,
        }
    }
}

impl<T: Real> ExtractedMesh<T> {
    /// Mesh without provenance, e.g. loaded from an OBJ file.
    pub fn from_triangles(positions: Vec<Vec3<T>>, faces: Vec<[u32; 3]>) -> Self {
        let vertices = positions
            .into_iter()
            .map(|p| {
                Vertex::Boundary(BoundaryVertex {
                    position: p,
                    source_mesh_edge: [u32::MAX; 2],
                    beta: T::zero(),
                    beta_clamped: false,
                })
            })
            .collect();
        let mut mesh = ExtractedMesh {
            vertices,
            faces,
            boundary_edges: Vec::new(),
            source_grid: None,
        };
        mesh.boundary_edges = crate::analysis::open_edges(&mesh.faces);
        mesh
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3<T>> {
        self.vertices.iter().map(Vertex::position).collect()
    }

    #[inline]
    pub fn position(&self, i: usize) -> Vec3<T> {
        self.vertices[i].position()
    }

    pub fn face_positions(&self, f: usize) -> [Vec3<T>; 3] {
        self.faces[f].map(|v| self.position(v as usize))
    }

    pub fn face_area(&self, f: usize) -> T {
        let [a, b, c] = self.face_positions(f);
        triangle_area(&a, &b, &c)
    }

    pub fn total_area(&self) -> T {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Number of leading watertight-template vertices.
    pub fn num_template_vertices(&self) -> usize {
        self.vertices.iter().take_while(|v| matches!(v, Vertex::Mesh(_))).count()
    }

    pub fn boundary_vertices(&self) -> impl Iterator<Item = (usize, &BoundaryVertex<T>)> {
        self.vertices
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.as_boundary().map(|b| (i, b)))
    }

    /// Copy with unreferenced vertices removed and indices remapped.
    pub fn compacted(&self) -> ExtractedMesh<T> {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for v in f {
                used[*v as usize] = true;
            }
        }
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if used[i] {
                remap[i] = vertices.len() as u32;
                vertices.push(*v);
            }
        }
        // boundary-vertex provenance points at template ids, which may be gone
        for v in vertices.iter_mut() {
            if let Vertex::Boundary(b) = v {
                b.source_mesh_edge = b.source_mesh_edge.map(|s| {
                    remap.get(s as usize).copied().unwrap_or(u32::MAX)
                });
            }
        }
        ExtractedMesh {
            vertices,
            faces: self.faces.iter().map(|f| f.map(|v| remap[v as usize])).collect(),
            boundary_edges: self
                .boundary_edges
                .iter()
                .map(|e| e.map(|v| remap[v as usize]))
                .collect(),
            source_grid: self.source_grid,
        }
    }

    /// Reverses every face (and boundary edge) orientation.
    pub fn flipped(&self) -> ExtractedMesh<T> {
        let mut m = self.clone();
        for f in m.faces.iter_mut() {
            f.swap(1, 2);
        }
        for e in m.boundary_edges.iter_mut() {
            e.swap(0, 1);
        }
        m
    }
}
