//! Source-surface geometry: ambient vectors, points on the unit sphere,
//! triangle meshes with exact symmetry permutations, and the cotangent
//! Laplacian used by the energy and the flow.

mod build;
mod icosphere;
mod laplacian;
mod mesh;
mod sphere;
mod vec;

pub use build::build_surface;
pub use icosphere::icosphere;
pub use laplacian::{CotanLaplacian, WeightedEdge};
pub use mesh::{MeshError, RegionTag, SurfaceMesh, SurfaceParams};
pub use sphere::{GeometryError, SpherePoint, UNIT_NORM_TOL};
pub(crate) use sphere::rotate_z_vec;
pub use vec::Vec3;
