use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::esdf::compute_esdf;
use crate::geometry::{CameraModel, Pose};
use crate::map::{FrontierClusterer, OccupancyGrid};
use crate::surface::{extract_mesh, surface_elements, UncertaintyField};
use crate::taskgen::{gen_exploration_tasks, gen_reconstruction_tasks, GenParams, Task, TaskKind};

use super::atsp::{build_cost_matrix, solve_atsp};
use super::exec::{build_execution, ExecutionSequence};
use super::mode::{select_mode, Mode, SwitchParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no tasks available")]
    NoTasksAvailable,
}

/// Which task sets an iteration may draw from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    ExplorationOnly,
    ReconstructionOnly,
    Merged,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanParams {
    /// Path budget of one executed prefix.
    #[serde(rename = "L_exec")]
    pub l_exec: f64,
    /// Spacing of views along executed paths.
    pub l_res: f64,
    /// Largest frontier cluster extent before splitting.
    pub split_extent: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            l_exec: 6.0,
            l_res: 0.2,
            split_extent: 1.0,
        }
    }
}

/// Wall-clock seconds spent in each planning stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timing {
    pub t_task: f64,
    pub t_atsp: f64,
    pub t_switch: f64,
}

impl Timing {
    pub fn t_sp(&self) -> f64 {
        self.t_task + self.t_atsp + self.t_switch
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutput {
    pub sequence: ExecutionSequence,
    /// Mode from the switching rule, whatever the strategy.
    pub mode: Mode,
    /// Whether the amplified local parameters were used.
    pub amplified: bool,
    pub n_exploration: usize,
    pub n_reconstruction: usize,
    pub n_dormant: usize,
    pub timing: Timing,
}

#[derive(Debug, Clone)]
pub struct Planner {
    pub strategy: Strategy,
    pub gen: GenParams,
    pub switch: SwitchParams,
    pub plan: PlanParams,
    pub cam: CameraModel,
    clusterer: FrontierClusterer,
}

impl Planner {
    pub fn new(strategy: Strategy, gen: GenParams, switch: SwitchParams, plan: PlanParams, cam: CameraModel) -> Self {
        Self {
            strategy,
            gen,
            switch,
            plan,
            cam,
            clusterer: FrontierClusterer::new(plan.split_extent),
        }
    }

    fn amplified(&self) -> (GenParams, PlanParams) {
        let a = self.switch.alpha;
        let gen = GenParams {
            r_loc: self.gen.r_loc * a,
            r_clu: self.gen.r_clu * a,
            n_rec: (self.gen.n_rec as f64 * a).round() as usize,
            ..self.gen
        };
        let plan = PlanParams {
            l_exec: self.plan.l_exec * a,
            l_res: self.plan.l_res * a,
            ..self.plan
        };
        (gen, plan)
    }

    /// One planning step from `agent` over the current map; the map's
    /// frontier set must be up to date.
    pub fn plan_iteration(
        &mut self,
        map: &OccupancyGrid,
        field: &UncertaintyField,
        agent: &Pose,
    ) -> Result<PlanOutput, PlanError> {
        let p0 = agent.position;
        let t = Instant::now();
        let mode = select_mode(map.spec(), map.frontiers(), p0, &self.switch);
        let t_switch = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let esdf = compute_esdf(map);
        let clusters = self.clusterer.cluster(map.spec(), map.frontiers());
        let mesh = extract_mesh(map);
        let elements = surface_elements(&mesh, field);
        let explore = || gen_exploration_tasks(&clusters, &self.gen, map, &esdf, &self.cam);
        let reconstruct = |g: &GenParams| gen_reconstruction_tasks(&elements, p0, g, map, &esdf, &self.cam);
        let (amp_gen, amp_plan) = self.amplified();
        let mut n_dormant = 0;
        let mut amplified = false;
        let mut tasks: Vec<Task> = Vec::new();
        let use_exp = match self.strategy {
            Strategy::ExplorationOnly => true,
            Strategy::ReconstructionOnly => false,
            Strategy::Merged => true,
            Strategy::Adaptive => mode != Mode::FinalRecon,
        };
        if use_exp {
            let e = explore();
            n_dormant = e.dormant.len();
            tasks = e.tasks;
        }
        let use_rec = match self.strategy {
            Strategy::ExplorationOnly => false,
            Strategy::ReconstructionOnly | Strategy::Merged => true,
            Strategy::Adaptive => mode == Mode::Merged || (mode == Mode::ExplorationOnly && tasks.is_empty()),
        };
        if use_rec {
            tasks.extend(reconstruct(&self.gen));
        }
        if self.strategy == Strategy::Adaptive && tasks.is_empty() {
            tasks = reconstruct(&amp_gen);
            amplified = true;
        }
        if tasks.is_empty() {
            return Err(PlanError::NoTasksAvailable);
        }
        // Connection costs are part of task preparation; the tour time is the solver alone.
        let matrix = build_cost_matrix(p0, &tasks, map, &esdf, self.gen.d_s);
        let t_task = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let tour = solve_atsp(&matrix.costs).expect("square matrix with at least one task");
        let t_atsp = t.elapsed().as_secs_f64();

        let plan = if amplified { amp_plan } else { self.plan };
        let sequence = build_execution(agent, &tasks, &tour, &matrix, plan.l_exec, plan.l_res);
        if sequence.tasks.is_empty() {
            return Err(PlanError::NoTasksAvailable);
        }
        Ok(PlanOutput {
            n_exploration: tasks.iter().filter(|t| t.kind == TaskKind::Exploration).count(),
            n_reconstruction: tasks.iter().filter(|t| t.kind == TaskKind::Reconstruction).count(),
            sequence,
            mode,
            amplified,
            n_dormant,
            timing: Timing {
                t_task,
                t_atsp,
                t_switch,
            },
        })
    }
}
