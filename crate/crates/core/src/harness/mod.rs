mod config;
mod episode;
mod export;
mod metrics;

pub use config::{default_camera, ConfigError, EpisodeConfig, SceneSource, UncertaintyConfig, Variant};
pub use episode::{
    initial_sweep, mean_surface_sigma, run_episode, run_episode_on, Episode, EpisodeError,
    EpisodeMetrics, IterationRecord, Termination, ViewRecord, SWEEP_PITCH,
};
pub use export::{
    export_artifacts, ExportError, ITERATIONS_FILE, MAP_FILE, MESH_FILE, SUMMARY_FILE, TIMINGS_FILE, TRAJECTORY_FILE,
};
pub use metrics::{
    closest_point_on_triangle, compare_surfaces, compute_metrics, ground_truth_triangles, sample_triangles,
    GeometryMetrics, MetricsError, TriangleIndex, RECALL_THRESHOLD,
};
