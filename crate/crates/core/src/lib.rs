//! Collision-free pick-and-place trajectory planning on voxel occupancy
//! grids, with path-aware time reallocation and per-frame guidance masks.

pub mod check;
pub mod cli;
pub mod distance_field;
pub mod grid_planner;
pub mod optimizer;
pub mod pipeline;
pub mod projection;
pub mod report;
pub mod scenario;
pub mod scene;
pub mod time_alloc;

/// World-frame 3-vector, meters unless stated otherwise.
pub type Vec3 = nalgebra::Vector3<f64>;
