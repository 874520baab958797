//! Occupancy/TSDF voxel map, frontiers and frontier clustering.

mod frontier;
mod grid;
mod pca;

pub use frontier::{cluster_frontiers, FrontierCluster, FrontierClusterer};
pub use grid::{IndexBox, MapError, OccupancyGrid, VoxelState, MAP_MAGIC};
pub use pca::{jacobi_eigen_sym3, Pca};
