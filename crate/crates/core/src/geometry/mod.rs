//! Triangle meshes and the mesh-processing operations used by rendering,
//! reconstruction and evaluation.

mod icosphere;
mod mesh;
mod normals;
mod remesh;
mod smooth;
pub mod topology;

pub use icosphere::{make_icosphere, MAX_ICOSPHERE_SUBDIVISIONS};
pub use mesh::{normalize_to_cube, Aabb, CubeTransform, Rgb, TriMesh};
pub use normals::compute_vertex_normals;
pub use remesh::{remesh, subdivide_to_edge_length};
pub use smooth::laplacian_smooth;
