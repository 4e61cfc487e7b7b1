//! Mesh diagnostics: generalized winding numbers and manifoldness checks.

mod manifold;
mod winding;

pub use manifold::{boundary_loops, manifold_report, open_edges, ManifoldReport};
pub use winding::{
    sample_winding_field, solid_angle, winding_number, winding_number_unchecked, WindingSample,
    ON_SURFACE_DISTANCE,
};
