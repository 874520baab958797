//! Mode switching, path costs, task ordering and execution sampling.

mod astar;
mod atsp;
mod exec;
mod mode;
mod plan;

pub use astar::{astar_path, astar_raw, dijkstra_raw, polyline_length, shortcut, Path, PathError, Traversability};
pub use atsp::{
    build_cost_matrix, nearest_neighbor, path_cost, solve_atsp, solve_atsp_heuristic, AtspError, CostMatrix, Tour,
    EXACT_LIMIT, UNREACHABLE,
};
pub use exec::{build_execution, prefix_len, sample_leg, ExecutionSequence};
pub use mode::{count_near, mode_from_counts, select_mode, Mode, SwitchParams};
pub use plan::{PlanError, PlanOutput, PlanParams, Planner, Strategy, Timing};
