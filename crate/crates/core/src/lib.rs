//! Joint extraction of watertight and open triangle meshes from tetrahedral
//! grids storing signed distance (SDF) and manifold signed distance (mSDF)
//! values, with analytic gradients, point-cloud fitting, winding-number
//! diagnostics and a dense tensor encoding of the grid.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases below name the common instantiations.

pub mod analysis;
pub mod autodiff;
pub mod chamfer;
pub mod error;
pub mod extract;
pub mod fit;
pub mod gradcheck;
pub mod grid;
pub mod io;
pub mod losses;
pub mod mesh;
pub mod optim;
pub mod pipeline;
pub mod sampling;
pub mod scalar;
pub mod shapes;
pub mod spatial;
pub mod tensorize;
pub mod vec3;

pub use autodiff::{vjp, GridGradients, VjpOptions};
pub use chamfer::{chamfer_distance, ChamferTarget, ChamferTerms};
pub use error::{Error, Result};
pub use extract::{
    clip_oracle, extract, extract_gshell, extract_watertight, project_msdf, ExtractMode,
};
pub use fit::{fit, FitConfig, FitReport};
pub use grid::{build_uniform_tet_grid, sample_fields, Aabb, AnalyticField, EdgeKey, FnField, TetGrid};
pub use mesh::{BoundaryVertex, ExtractedMesh, MeshVertex, Vertex};
pub use scalar::Real;
pub use shapes::{Shape, ShapeField};
pub use vec3::Vec3;

pub type Vec3F64 = Vec3<f64>;
pub type Vec3F32 = Vec3<f32>;
pub type TetGridF64 = TetGrid<f64>;
pub type TetGridF32 = TetGrid<f32>;
pub type ExtractedMeshF64 = ExtractedMesh<f64>;
pub type ExtractedMeshF32 = ExtractedMesh<f32>;
