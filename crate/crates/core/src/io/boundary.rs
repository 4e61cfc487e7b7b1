//! Boundary description written next to an extracted OBJ.

use serde::{Deserialize, Serialize};

use crate::analysis::boundary_loops;
use crate::mesh::ExtractedMesh;
use crate::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryVertexRecord {
    /// 0-based index into the mesh vertex list.
    pub index: u32,
    pub position: [f64; 3],
    /// Template vertices the boundary vertex interpolates.
    pub source_mesh_edge: [u32; 2],
    pub beta: f64,
    pub beta_clamped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    /// Directed open edges, 0-based vertex indices.
    pub edges: Vec<[u32; 2]>,
    /// Edge chains, each listed once as a closed vertex cycle.
    pub loops: Vec<Vec<u32>>,
    pub vertices: Vec<BoundaryVertexRecord>,
}

impl BoundaryReport {
    pub fn from_mesh<T: Real>(mesh: &ExtractedMesh<T>) -> Self {
        let vertices = if mesh.source_grid.is_some() {
            mesh.boundary_vertices()
                .map(|(i, b)| BoundaryVertexRecord {
                    index: i as u32,
                    position: b.position.to_f64(),
                    source_mesh_edge: b.source_mesh_edge,
                    beta: b.beta.as_f64(),
                    beta_clamped: b.beta_clamped,
                })
                .collect()
        } else {
            Vec::new()
        };
        BoundaryReport {
            edges: mesh.boundary_edges.clone(),
            loops: boundary_loops(&mesh.boundary_edges),
            vertices,
        }
    }
}
