use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use thiserror::Error;

use crate::geometry::Pose;
use crate::map::{MapError, OccupancyGrid, VoxelState};
use crate::planner::{Mode, PlanError, PlanOutput, Planner, Timing};
use crate::scene::{render_depth, GroundTruthScene, SceneError};
use crate::surface::{extract_mesh, update_uncertainty, TriangleMesh, UncertaintyField};

use super::config::{ConfigError, EpisodeConfig};
use super::metrics::{compute_metrics, GeometryMetrics};

/// Pitch of the up and down views in the initial sweep.
pub const SWEEP_PITCH: f64 = 1.2;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Budget,
    NoTasks,
    Converged,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Budget => "budget",
            Termination::NoTasks => "no_tasks",
            Termination::Converged => "converged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mode: Mode,
    pub amplified: bool,
    pub n_exploration: usize,
    pub n_reconstruction: usize,
    pub n_dormant: usize,
    pub n_executed: usize,
    pub n_frontiers: usize,
    /// Views captured during this iteration.
    pub views: usize,
    pub total_views: usize,
    pub path_length: f64,
    pub coverage: f64,
    pub mean_sigma: f64,
    pub timing: Timing,
}

/// A captured view; iteration 0 is the initial sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewRecord {
    pub iteration: usize,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    /// None when the episode ends without a mesh.
    pub geometry: Option<GeometryMetrics>,
    pub coverage_ratio: f64,
    pub path_length_m: f64,
    pub views_used: usize,
    pub iterations: usize,
    pub termination: Termination,
    /// Summed planning time over all iterations.
    pub t_gp: f64,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub config: EpisodeConfig,
    pub spawn: Pose,
    pub iterations: Vec<IterationRecord>,
    pub views: Vec<ViewRecord>,
    pub map: OccupancyGrid,
    pub field: UncertaintyField,
    pub mesh: TriangleMesh,
    pub vertex_sigmas: Vec<f64>,
    pub metrics: EpisodeMetrics,
    pub wall_time: f64,
}

fn coverage(map: &OccupancyGrid, reachable: &[bool], total: usize) -> f64 {
    let seen = map
        .states()
        .iter()
        .zip(reachable)
        .filter(|(&s, &r)| r && s != VoxelState::Unknown)
        .count();
    seen as f64 / total.max(1) as f64
}

/// Mean sigma over observed surface-band voxels; sigma0 when there are none.
pub fn mean_surface_sigma(map: &OccupancyGrid, field: &UncertaintyField) -> f64 {
    let (sum, n) = (0..map.spec().len())
        .filter(|&id| map.in_surface_band(id))
        .fold((0.0, 0usize), |(s, n), id| (s + field.sigma(id), n + 1));
    if n == 0 {
        field.params().sigma0
    } else {
        sum / n as f64
    }
}

/// Views taken at the spawn point before the first plan: a level turn in
/// four directions, plus one view up and one down unless flying level.
pub fn initial_sweep(spawn: Pose, level_only: bool) -> Vec<Pose> {
    let mut poses: Vec<Pose> = (0..4)
        .map(|k| Pose::new(spawn.position, 0.0, spawn.yaw + k as f64 * FRAC_PI_2))
        .collect();
    if !level_only {
        poses.push(spawn.with_pitch(SWEEP_PITCH));
        poses.push(spawn.with_pitch(-SWEEP_PITCH));
    }
    poses
}

struct Capture<'a> {
    scene: &'a GroundTruthScene,
    config: &'a EpisodeConfig,
    map: OccupancyGrid,
    field: UncertaintyField,
    views: Vec<ViewRecord>,
    path_length: f64,
}

impl Capture<'_> {
    fn take(&mut self, pose: Pose, iteration: usize) -> Result<(), EpisodeError> {
        let k = self.views.len() as u64;
        let seed = self.config.rng_seed ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let cam = &self.config.camera;
        let img = render_depth(self.scene, &pose, cam, seed)?;
        self.map.integrate_depth_scan(&pose, cam, &img)?;
        self.map.detect_frontiers();
        update_uncertainty(&mut self.field, &pose, cam, &self.map);
        if let Some(last) = self.views.last() {
            self.path_length += (pose.position - last.pose.position).norm();
        }
        self.views.push(ViewRecord { iteration, pose });
        Ok(())
    }

    fn budget_left(&self) -> bool {
        self.views.len() < self.config.view_budget
    }
}

/// Runs a full episode on the configured scene.
pub fn run_episode(config: &EpisodeConfig) -> Result<Episode, EpisodeError> {
    config.validate()?;
    let scene = config.scene.load()?;
    run_episode_on(config, &scene, |_, _| {})
}

/// Runs an episode on `scene`. `observe` sees every plan together with the
/// map it was computed from, before the plan is flown.
pub fn run_episode_on(
    config: &EpisodeConfig,
    scene: &GroundTruthScene,
    mut observe: impl FnMut(&PlanOutput, &OccupancyGrid),
) -> Result<Episode, EpisodeError> {
    let started = Instant::now();
    let spec = *scene.spec();
    let reachable = scene.reachable_free();
    let n_reachable = reachable.iter().filter(|&&r| r).count();
    let mut cap = Capture {
        scene,
        config,
        map: OccupancyGrid::new(spec),
        field: UncertaintyField::new(spec, config.uncertainty_params()),
        views: Vec::new(),
        path_length: 0.0,
    };
    for pose in initial_sweep(scene.spawn(), config.variant.level_only()) {
        if !cap.budget_left() {
            break;
        }
        cap.take(pose, 0)?;
    }

    let mut planner = Planner::new(
        config.variant.strategy(),
        config.gen_params(),
        config.switch,
        config.plan,
        config.camera,
    );
    let sigma_stop = 1.1 * config.uncertainty.sigma_min;
    let mut iterations = Vec::new();
    let termination = loop {
        if !cap.budget_left() {
            break Termination::Budget;
        }
        let agent = cap.views.last().map_or(scene.spawn(), |v| v.pose);
        let out = match planner.plan_iteration(&cap.map, &cap.field, &agent) {
            Ok(out) => out,
            Err(PlanError::NoTasksAvailable) => break Termination::NoTasks,
        };
        observe(&out, &cap.map);
        let iteration = iterations.len() + 1;
        let before = cap.views.len();
        for &pose in out.sequence.poses.iter().skip(1) {
            if !cap.budget_left() {
                break;
            }
            cap.take(pose, iteration)?;
        }
        let mean_sigma = mean_surface_sigma(&cap.map, &cap.field);
        iterations.push(IterationRecord {
            iteration,
            mode: out.mode,
            amplified: out.amplified,
            n_exploration: out.n_exploration,
            n_reconstruction: out.n_reconstruction,
            n_dormant: out.n_dormant,
            n_executed: out.sequence.tasks.len(),
            n_frontiers: cap.map.frontiers().len(),
            views: cap.views.len() - before,
            total_views: cap.views.len(),
            path_length: cap.path_length,
            coverage: coverage(&cap.map, &reachable, n_reachable),
            mean_sigma,
            timing: out.timing,
        });
        if out.mode == Mode::FinalRecon && mean_sigma < sigma_stop {
            break Termination::Converged;
        }
    };

    let mesh = extract_mesh(&cap.map);
    let vertex_sigmas = mesh.vertices.iter().map(|&v| cap.field.sigma_at_point(v)).collect();
    let geometry = compute_metrics(&mesh, scene, config.metric_samples, config.rng_seed).ok();
    let metrics = EpisodeMetrics {
        geometry,
        coverage_ratio: coverage(&cap.map, &reachable, n_reachable),
        path_length_m: cap.path_length,
        views_used: cap.views.len(),
        iterations: iterations.len(),
        termination,
        t_gp: iterations.iter().map(|r: &IterationRecord| r.timing.t_sp()).sum(),
    };
    Ok(Episode {
        config: config.clone(),
        spawn: scene.spawn(),
        iterations,
        views: cap.views,
        map: cap.map,
        field: cap.field,
        mesh,
        vertex_sigmas,
        metrics,
        wall_time: started.elapsed().as_secs_f64(),
    })
}
