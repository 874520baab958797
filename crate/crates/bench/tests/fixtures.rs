use scanplan::planner::solve_atsp;
use scanplan::VoxelState;
use scanplan_bench::{random_costs, swept_scene};

#[test]
fn random_costs_have_a_free_return() {
    let c = random_costs(9, 4);
    assert_eq!(c.len(), 10);
    assert!(c.iter().all(|row| row.len() == 10 && row[0] == 0.0));
    assert!((1..10).all(|j| c[0][j] >= 1.0));
    assert_eq!(c, random_costs(9, 4));
    assert!(solve_atsp(&c).unwrap().total > 0.0);
}

#[test]
fn swept_scene_has_observed_space_and_frontiers() {
    let m = swept_scene(1);
    assert!(m.map.states().iter().any(|&s| s == VoxelState::Empty));
    assert!(!m.map.frontiers().is_empty());
}
