//! Shared fixtures for the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scanplan::harness::{default_camera, initial_sweep};
use scanplan::surface::{update_uncertainty, UncertaintyParams};
use scanplan::{generate_floorplan, render_depth, CameraModel, GroundTruthScene, OccupancyGrid, UncertaintyField, Vec3};

pub struct Mapped {
    pub scene: GroundTruthScene,
    pub map: OccupancyGrid,
    pub field: UncertaintyField,
    pub cam: CameraModel,
}

/// Three-room scene after the spawn sweep.
pub fn swept_scene(seed: u64) -> Mapped {
    let scene = generate_floorplan(seed, 3, Vec3::new(10.0, 8.0, 3.0), 0.1).expect("feasible layout");
    let cam = default_camera();
    let mut map = OccupancyGrid::new(*scene.spec());
    let mut field = UncertaintyField::new(*scene.spec(), UncertaintyParams::default());
    for (k, pose) in initial_sweep(scene.spawn(), false).iter().enumerate() {
        let img = render_depth(&scene, pose, &cam, k as u64).expect("spawn is free");
        map.integrate_depth_scan(pose, &cam, &img).expect("pose inside grid");
        map.detect_frontiers();
        update_uncertainty(&mut field, pose, &cam, &map);
    }
    Mapped { scene, map, field, cam }
}

/// Random asymmetric costs with a free return to the start, as the planner builds them.
pub fn random_costs(n_tasks: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_tasks + 1;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j || j == 0 { 0.0 } else { rng.random_range(1.0..10.0) })
                .collect()
        })
        .collect()
}
