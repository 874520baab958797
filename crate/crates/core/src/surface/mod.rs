//! Zero-level surface extraction, per-voxel uncertainty and surface elements.

mod elements;
mod mesh;
mod uncertainty;

pub use elements::{downsample_surface, downsample_tracked, surface_elements, DownsampledElement, SurfaceElement};
pub use mesh::{extract_mesh, extract_mesh_from_field, read_mesh_text, write_mesh_text, MeshFormatError, TriangleMesh};
pub use uncertainty::{update_uncertainty, UncertaintyField, UncertaintyParams};
