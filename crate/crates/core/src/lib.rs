//! Active indoor scanning: a simulated depth camera, occupancy and TSDF
//! mapping, frontier exploration and surface-uncertainty reconstruction
//! tasks, ordered by an asymmetric TSP over A* path costs.

pub mod esdf;
pub mod geometry;
pub mod harness;
pub mod map;
pub mod planner;
pub mod scene;
pub mod surface;
pub mod taskgen;

pub use esdf::{compute_esdf, EsdfGrid};
pub use geometry::{CameraModel, GridSpec, Pose, Vec3, VoxelId};
pub use harness::{run_episode, EpisodeConfig, Variant};
pub use map::{OccupancyGrid, VoxelState};
pub use planner::{Mode, Planner, Strategy};
pub use scene::{generate_floorplan, render_depth, GroundTruthScene};
pub use surface::{extract_mesh, TriangleMesh, UncertaintyField};
pub use taskgen::{GenParams, Task, TaskKind};
