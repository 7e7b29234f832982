//! Meshes, keypoint sampling, ray casting and rotation sampling.

mod icosphere;
pub mod io;
mod mesh;
mod raycast;
mod sampling;
pub mod shapes;

pub use icosphere::{icosphere_directions, icosphere_rotation_sample, rotation_looking_along, RotationSet};
pub use mesh::{compute_vertex_normals, KeypointSet, Mesh};
pub use raycast::{ray_mesh_first_hit, ray_triangle, segment_blocked, RayHit, RAY_EPSILON};
pub use sampling::{farthest_point_sampling, farthest_point_sampling_points, object_diameter};
