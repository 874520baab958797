use criterion::{criterion_group, criterion_main, Criterion};

use scanplan::harness::default_camera;
use scanplan::{compute_esdf, extract_mesh, render_depth, OccupancyGrid};
use scanplan_bench::swept_scene;

fn mapping(c: &mut Criterion) {
    let m = swept_scene(1);
    let cam = default_camera();
    let pose = m.scene.spawn();
    let img = render_depth(&m.scene, &pose, &cam, 0).unwrap();

    c.bench_function("render_depth", |b| b.iter(|| render_depth(&m.scene, &pose, &cam, 0).unwrap()));
    c.bench_function("integrate_and_frontiers", |b| {
        b.iter(|| {
            let mut map = OccupancyGrid::new(*m.scene.spec());
            map.integrate_depth_scan(&pose, &cam, &img).unwrap();
            map.detect_frontiers().len()
        })
    });
    c.bench_function("compute_esdf", |b| b.iter(|| compute_esdf(&m.map)));
    c.bench_function("extract_mesh", |b| b.iter(|| extract_mesh(&m.map)));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = mapping
}
criterion_main!(benches);
