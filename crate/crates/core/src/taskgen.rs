//! Exploration and reconstruction task generation.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::esdf::EsdfGrid;
use crate::geometry::{in_frustum, CameraModel, Pose, RayWalk, Vec3, VoxelId};
use crate::map::{FrontierCluster, OccupancyGrid, VoxelState};
use crate::surface::{downsample_tracked, SurfaceElement, UncertaintyField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Exploration,
    Reconstruction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub kind: TaskKind,
    pub view: Pose,
    /// Frontier cluster id or surface cluster index.
    pub source_id: u64,
    /// Visible cell count for exploration, surface gain for reconstruction.
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    /// Inner shell radius.
    pub d_r: f64,
    /// Outer shell radius.
    pub d_f: f64,
    /// Minimum obstacle clearance of a viewpoint.
    pub d_s: f64,
    #[serde(rename = "R_loc")]
    pub r_loc: f64,
    #[serde(rename = "R_clu")]
    pub r_clu: f64,
    #[serde(rename = "N_rec")]
    pub n_rec: usize,
    #[serde(rename = "N_min")]
    pub n_min: usize,
    pub n_r: usize,
    pub n_az: usize,
    pub n_polar: usize,
    /// Decimation rounds applied to the surface before clustering.
    pub n_down: usize,
    /// Bin size of the first decimation round.
    pub down_cell: f64,
    /// Overrides the pitch of exploration views.
    pub exploration_pitch: Option<f64>,
    /// Elements at or below this uncertainty count as finished and are
    /// left out of local clustering.
    pub sigma_done: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            d_r: 1.0,
            d_f: 2.0,
            d_s: 0.3,
            r_loc: 2.5,
            r_clu: 1.3,
            n_rec: 15,
            n_min: 30,
            n_r: 3,
            n_az: 16,
            n_polar: 5,
            n_down: 5,
            down_cell: 0.025,
            exploration_pitch: None,
            sigma_done: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCluster {
    pub id: u64,
    pub elements: Vec<SurfaceElement>,
    /// Positions of `elements` in the clustered input.
    pub indices: Vec<usize>,
    pub center: Vec3,
}

/// Raw shell lattice around `center`, before any filtering.
pub fn shell_lattice(center: Vec3, params: &GenParams) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(params.n_r * params.n_az * params.n_polar);
    for i in 0..params.n_r {
        let r = if params.n_r > 1 {
            params.d_r + (params.d_f - params.d_r) * i as f64 / (params.n_r - 1) as f64
        } else {
            params.d_r
        };
        for k in 0..params.n_polar {
            let e = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * (k + 1) as f64 / (params.n_polar + 1) as f64;
            for j in 0..params.n_az {
                let a = -std::f64::consts::PI + std::f64::consts::TAU * j as f64 / params.n_az as f64;
                out.push(center + r * Vec3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin()));
            }
        }
    }
    out
}

/// True for a position a camera may occupy.
pub fn is_valid_viewpoint(p: Vec3, map: &OccupancyGrid, esdf: &EsdfGrid, d_s: f64) -> bool {
    let Some(idx) = map.spec().world_to_index(p) else {
        return false;
    };
    map.state_at(idx) == VoxelState::Empty && esdf.clearance(p).is_ok_and(|c| c > d_s)
}

/// Shell lattice filtered to valid viewpoints, each looking at `center`.
pub fn sample_shell_viewpoints(center: Vec3, params: &GenParams, map: &OccupancyGrid, esdf: &EsdfGrid) -> Vec<Pose> {
    shell_lattice(center, params)
        .into_iter()
        .filter(|&p| is_valid_viewpoint(p, map, esdf, params.d_s))
        .filter_map(|p| Pose::looking_at(p, center).ok())
        .collect()
}

fn sees(view: &Pose, cam: &CameraModel, map: &OccupancyGrid, target: Vec3) -> bool {
    in_frustum(view, cam, target) && map.is_visible(view.position, target)
}

/// Index of the first maximum.
fn argmax(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Exploration tasks and the ids of clusters that got none.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExplorationTasks {
    pub tasks: Vec<Task>,
    pub dormant: Vec<u64>,
}

/// One task per frontier cluster: the shell viewpoint seeing the most cells.
pub fn gen_exploration_tasks(
    clusters: &[FrontierCluster],
    params: &GenParams,
    map: &OccupancyGrid,
    esdf: &EsdfGrid,
    cam: &CameraModel,
) -> ExplorationTasks {
    let spec = map.spec();
    let best: Vec<Option<(Pose, usize)>> = clusters
        .par_iter()
        .map(|c| {
            let views: Vec<Pose> = sample_shell_viewpoints(c.center, params, map, esdf)
                .into_iter()
                .map(|v| match params.exploration_pitch {
                    Some(p) => v.with_pitch(p),
                    None => v,
                })
                .collect();
            let counts = views.iter().map(|v| {
                c.cells
                    .iter()
                    .filter(|&&id| sees(v, cam, map, spec.center_of(id)))
                    .count() as f64
            });
            argmax(counts)
                .filter(|&(_, n)| n > 0.0)
                .map(|(i, n)| (views[i], n as usize))
        })
        .collect();
    let mut out = ExplorationTasks::default();
    for (c, b) in clusters.iter().zip(best) {
        match b {
            Some((view, n)) => out.tasks.push(Task {
                kind: TaskKind::Exploration,
                view,
                source_id: c.id,
                gain: n as f64,
            }),
            None => out.dormant.push(c.id),
        }
    }
    out
}

/// Greedy max-sigma clustering of the elements within `r_loc` of `p0`.
pub fn local_surface_clustering(elements: &[SurfaceElement], p0: Vec3, params: &GenParams) -> Vec<SurfaceCluster> {
    let mut remaining: Vec<usize> = (0..elements.len())
        .filter(|&i| elements[i].sigma > params.sigma_done && (elements[i].position - p0).norm() <= params.r_loc)
        .collect();
    let mut out = Vec::new();
    while !remaining.is_empty() && out.len() < params.n_rec {
        let mut seed = remaining[0];
        for &i in &remaining {
            if elements[i].sigma > elements[seed].sigma {
                seed = i;
            }
        }
        let s = elements[seed].position;
        let (members, rest): (Vec<usize>, Vec<usize>) = remaining
            .iter()
            .partition(|&&i| (elements[i].position - s).norm() <= params.r_clu);
        remaining = rest;
        let els: Vec<SurfaceElement> = members.iter().map(|&i| elements[i]).collect();
        let center = els.iter().map(|e| e.position).sum::<Vec3>() / els.len() as f64;
        out.push(SurfaceCluster {
            id: out.len() as u64,
            elements: els,
            indices: members,
            center,
        });
    }
    out
}

/// Sum over visible elements of |unit view ray . normal| * sigma.
pub fn surface_gain(view: &Pose, cluster: &SurfaceCluster, map: &OccupancyGrid, cam: &CameraModel) -> f64 {
    element_gain(view, &cluster.elements, map, cam)
}

fn element_gain(view: &Pose, elements: &[SurfaceElement], map: &OccupancyGrid, cam: &CameraModel) -> f64 {
    elements
        .iter()
        .filter(|e| sees(view, cam, map, e.position))
        .map(|e| {
            let d = e.position - view.position;
            let n = d.norm();
            if n == 0.0 {
                0.0
            } else {
                (d / n).dot(&e.normal).abs() * e.sigma
            }
        })
        .sum()
}

/// Ray-sampled baseline: mean over a `rays[0] x rays[1]` pixel lattice of
/// the summed squared sigma along each ray. Samples count until the first
/// occupied voxel, inclusive; sigma is zero off the surface band.
pub fn volumetric_gain(
    view: &Pose,
    field: &UncertaintyField,
    map: &OccupancyGrid,
    cam: &CameraModel,
    rays: [usize; 2],
    samples: usize,
) -> f64 {
    let spec = map.spec();
    let [nu, nv] = rays;
    let mut total = 0.0;
    for j in 0..nv {
        for i in 0..nu {
            let u = ((i as f64 + 0.5) * cam.image_width as f64 / nu as f64) as usize;
            let v = ((j as f64 + 0.5) * cam.image_height as f64 / nv as f64) as usize;
            let dir = cam.pixel_ray(view, u, v);
            let stop = first_hit_exit(map, view.position, dir, cam.max_range);
            for s in 0..samples {
                let t = cam.max_range * (s + 1) as f64 / samples as f64;
                if t > stop {
                    break;
                }
                let Some(idx) = spec.world_to_index(view.position + dir * t) else {
                    break;
                };
                let id = spec.linear(idx);
                if map.in_surface_band(id) {
                    total += field.sigma(id).powi(2);
                }
            }
        }
    }
    total / (nu * nv) as f64
}

/// Exit distance of the first occupied voxel along the ray, infinite if none.
fn first_hit_exit(map: &OccupancyGrid, origin: Vec3, dir: Vec3, max_len: f64) -> f64 {
    let Ok(walk) = RayWalk::new(map.spec(), origin, dir, max_len) else {
        return f64::INFINITY;
    };
    walk.into_iter()
        .find(|s| map.state_at(s.index) == VoxelState::Occupied)
        .map_or(f64::INFINITY, |s| s.t_exit)
}

/// Reconstruction tasks around `p0`: decimate, cluster by uncertainty, and
/// for each cluster pick the max-gain shell view that sees at least `n_min`
/// of the cluster's surface voxels.
pub fn gen_reconstruction_tasks(
    elements: &[SurfaceElement],
    p0: Vec3,
    params: &GenParams,
    map: &OccupancyGrid,
    esdf: &EsdfGrid,
    cam: &CameraModel,
) -> Vec<Task> {
    let coarse = downsample_tracked(elements, params.n_down, params.down_cell);
    let coarse_els: Vec<SurfaceElement> = coarse.iter().map(|d| d.element).collect();
    let clusters = local_surface_clustering(&coarse_els, p0, params);
    let spec = map.spec();
    let picked: Vec<Option<Task>> = clusters
        .par_iter()
        .map(|c| {
            let cells: Vec<VoxelId> = c
                .indices
                .iter()
                .flat_map(|&i| coarse[i].members.iter())
                .filter_map(|&m| spec.world_to_index(elements[m].position))
                .map(|idx| spec.linear(idx))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let views = sample_shell_viewpoints(c.center, params, map, esdf);
            let gains = views.iter().map(|v| {
                if visible_count_at_least(v, &cells, params.n_min, map, cam) {
                    surface_gain(v, c, map, cam)
                } else {
                    f64::NEG_INFINITY
                }
            });
            argmax(gains).filter(|&(_, g)| g.is_finite()).map(|(i, g)| Task {
                kind: TaskKind::Reconstruction,
                view: views[i],
                source_id: c.id,
                gain: g,
            })
        })
        .collect();
    picked.into_iter().flatten().collect()
}

fn visible_count_at_least(view: &Pose, cells: &[VoxelId], n: usize, map: &OccupancyGrid, cam: &CameraModel) -> bool {
    let spec = map.spec();
    let mut seen = 0;
    for &id in cells {
        if sees(view, cam, map, spec.center_of(id)) {
            seen += 1;
            if seen >= n {
                return true;
            }
        }
    }
    seen >= n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esdf::compute_esdf;
    use crate::geometry::GridSpec;
    use crate::surface::UncertaintyParams;

    fn cam() -> CameraModel {
        CameraModel::new(90f64.to_radians(), 60f64.to_radians(), 64, 48, 5.0, 0.0).unwrap()
    }

    /// 6 x 6 x 3 m room at 0.1 m: empty interior, occupied shell.
    fn room() -> OccupancyGrid {
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [60, 60, 30]).unwrap();
        let mut map = OccupancyGrid::new(spec);
        for id in 0..spec.len() {
            let [x, y, z] = spec.unlinear(id);
            let edge = x == 0 || y == 0 || z == 0 || x == 59 || y == 59 || z == 29;
            map.set_state([x, y, z], if edge { VoxelState::Occupied } else { VoxelState::Empty });
        }
        map
    }

    fn el(p: Vec3, n: Vec3, sigma: f64) -> SurfaceElement {
        SurfaceElement {
            position: p,
            normal: n,
            sigma,
        }
    }

    #[test]
    fn shell_samples_respect_radii_and_clearance() {
        let map = room();
        let esdf = compute_esdf(&map);
        let params = GenParams::default();
        let c = Vec3::new(3.0, 3.0, 1.5);
        let views = sample_shell_viewpoints(c, &params, &map, &esdf);
        assert!(!views.is_empty());
        for v in &views {
            let r = (v.position - c).norm();
            assert!((1.0 - 1e-9..=2.0 + 1e-9).contains(&r));
            assert!(esdf.clearance(v.position).unwrap() > 0.3);
            assert!(v.forward().dot(&(c - v.position).normalize()) > 1.0 - 1e-9);
        }
    }

    #[test]
    fn enclosed_center_has_no_viewpoints() {
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [60, 60, 60]).unwrap();
        let mut map = OccupancyGrid::new(spec);
        for id in 0..spec.len() {
            let d = (spec.center_of(id) - Vec3::repeat(3.0)).norm();
            let s = if d < 0.5 { VoxelState::Empty } else { VoxelState::Occupied };
            map.set_state(spec.unlinear(id), s);
        }
        let esdf = compute_esdf(&map);
        assert!(sample_shell_viewpoints(Vec3::repeat(3.0), &GenParams::default(), &map, &esdf).is_empty());
    }

    #[test]
    fn near_wall_equals_refiltered_lattice() {
        let map = room();
        let esdf = compute_esdf(&map);
        let params = GenParams::default();
        let c = Vec3::new(0.8, 2.0, 1.0);
        let ours: Vec<Vec3> = sample_shell_viewpoints(c, &params, &map, &esdf)
            .iter()
            .map(|v| v.position)
            .collect();
        // Oracle: the room interior is the open box [0.1, 5.9]^2 x [0.1, 2.9]
        // whose clearance is the distance to the nearest shell voxel center.
        let lattice = shell_lattice(c, &params);
        let expected: Vec<Vec3> = lattice
            .into_iter()
            .filter(|p| {
                let inside = (0.1..5.9).contains(&p.x) && (0.1..5.9).contains(&p.y) && (0.1..2.9).contains(&p.z);
                inside && esdf.clearance(*p).unwrap() > 0.3
            })
            .collect();
        assert_eq!(ours.len(), expected.len());
        assert!(ours.len() < 240);
        for (a, b) in ours.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn single_frontier_patch_gives_one_task() {
        let mut map = room();
        // Unknown patch behind the wall at x = 0.
        for y in 25..35 {
            for z in 10..15 {
                map.set_state([0, y, z], VoxelState::Unknown);
            }
        }
        let mut frontier = BTreeSet::new();
        for y in 25..35 {
            for z in 10..15 {
                frontier.insert(map.spec().linear([1, y, z]));
            }
        }
        let clusters = crate::map::cluster_frontiers(map.spec(), &frontier, 1.0);
        assert_eq!(clusters.len(), 1);
        let esdf = compute_esdf(&map);
        let out = gen_exploration_tasks(&clusters, &GenParams::default(), &map, &esdf, &cam());
        assert_eq!(out.tasks.len(), 1);
        assert!(out.dormant.is_empty());
        let t = out.tasks[0];
        let to_c = (clusters[0].center - t.view.position).normalize();
        assert!(t.view.forward().dot(&to_c) > 1.0 - 1e-9);
        assert_eq!(t.gain, 50.0);
    }

    #[test]
    fn occluded_cluster_is_dormant() {
        let mut map = room();
        // Cells buried in a solid slab along the x = 0 wall: every valid
        // shell sample looks at them through occupied voxels.
        let spec = *map.spec();
        for id in 0..spec.len() {
            let p = spec.center_of(id);
            if p.x < 0.45 && p.x > 0.1 && p.y > 0.1 && p.y < 5.9 && p.z > 0.1 && p.z < 2.9 {
                map.set_state(spec.unlinear(id), VoxelState::Occupied);
            }
        }
        let cells: BTreeSet<VoxelId> = (10..14).map(|y| spec.linear([1, y, 10])).collect();
        let clusters = crate::map::cluster_frontiers(&spec, &cells, 1.0);
        let esdf = compute_esdf(&map);
        let out = gen_exploration_tasks(&clusters, &GenParams::default(), &map, &esdf, &cam());
        assert!(out.tasks.is_empty());
        assert_eq!(out.dormant, vec![clusters[0].id]);
    }

    #[test]
    fn exploration_picks_exhaustive_argmax() {
        let mut map = room();
        let spec = *map.spec();
        // A partial screen hides part of the cluster from some viewpoints.
        for y in 20..40 {
            for z in 1..12 {
                map.set_state([30, y, z], VoxelState::Occupied);
            }
        }
        let cells: BTreeSet<VoxelId> = (27..33)
            .flat_map(|x| (27..33).map(move |y| (x, y)))
            .map(|(x, y)| spec.linear([x, y, 1]))
            .collect();
        let clusters = crate::map::cluster_frontiers(&spec, &cells, 1.0);
        let esdf = compute_esdf(&map);
        let params = GenParams::default();
        let out = gen_exploration_tasks(&clusters, &params, &map, &esdf, &cam());
        for (c, t) in clusters.iter().zip(&out.tasks) {
            let views = sample_shell_viewpoints(c.center, &params, &map, &esdf);
            let counts: Vec<usize> = views
                .iter()
                .map(|v| {
                    c.cells
                        .iter()
                        .filter(|&&id| {
                            let p = spec.center_of(id);
                            in_frustum(v, &cam(), p) && map.is_visible(v.position, p)
                        })
                        .count()
                })
                .collect();
            let best = *counts.iter().max().unwrap();
            let first = counts.iter().position(|&n| n == best).unwrap();
            assert_eq!(t.gain, best as f64);
            assert_eq!(t.view, views[first]);
            assert!(counts.iter().any(|&n| n < best));
        }
    }

    #[test]
    fn clustering_examples() {
        let params = GenParams {
            r_loc: 10.0,
            r_clu: 0.5,
            n_rec: 10,
            ..Default::default()
        };
        assert!(local_surface_clustering(&[el(Vec3::repeat(20.0), Vec3::z(), 1.0)], Vec3::zeros(), &params).is_empty());
        let mut els = Vec::new();
        let blobs = [Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0)];
        for (b, c) in blobs.iter().enumerate() {
            for k in 0..5 {
                let sigma = 0.1 + 0.1 * ((k + 2 * b) % 5) as f64;
                els.push(el(c + Vec3::new(0.05 * k as f64, 0.0, 0.0), Vec3::z(), sigma));
            }
        }
        let cl = local_surface_clustering(&els, Vec3::zeros(), &params);
        assert_eq!(cl.len(), 3);
        for c in &cl {
            assert_eq!(c.elements.len(), 5);
            let max = c.elements.iter().map(|e| e.sigma).fold(0.0, f64::max);
            let seed = c.indices.iter().copied().find(|&i| els[i].sigma == max).unwrap();
            assert!(c.indices.iter().all(|&i| (els[i].position - els[seed].position).norm() <= 0.5));
        }
        let tight = GenParams {
            r_clu: 5.0,
            ..params
        };
        let one = local_surface_clustering(&els, Vec3::zeros(), &tight);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].elements.len(), 15);
    }

    #[test]
    fn surface_gain_arithmetic() {
        let map = room();
        let view = Pose::new(Vec3::new(1.0, 3.0, 1.5), 0.0, 0.0);
        let at = |p: Vec3, n: Vec3, s: f64| SurfaceCluster {
            id: 0,
            elements: vec![el(p, n, s)],
            indices: vec![0],
            center: p,
        };
        let target = Vec3::new(3.0, 3.0, 1.5);
        assert!((surface_gain(&view, &at(target, -Vec3::x(), 1.0), &map, &cam()) - 1.0).abs() < 1e-12);
        assert_eq!(surface_gain(&view, &at(target, Vec3::y(), 1.0), &map, &cam()), 0.0);
        // Alignments 1, 0.5 and 0 against the actual unit view rays.
        let p2 = Vec3::new(3.0, 3.2, 1.5);
        let p3 = Vec3::new(3.0, 2.8, 1.5);
        let r2 = (p2 - view.position).normalize();
        let three = SurfaceCluster {
            id: 0,
            elements: vec![
                el(target, -Vec3::x(), 0.8),
                el(p2, 0.5 * r2 + 0.75f64.sqrt() * Vec3::z(), 0.4),
                el(p3, Vec3::z(), 1.0),
            ],
            indices: vec![0, 1, 2],
            center: target,
        };
        let g = surface_gain(&view, &three, &map, &cam());
        assert!((g - 1.0).abs() < 1e-12, "{g}");
        // Scaling every sigma scales the gain.
        let mut scaled = three.clone();
        for e in &mut scaled.elements {
            e.sigma *= 0.5;
        }
        assert!((surface_gain(&view, &scaled, &map, &cam()) - 0.5 * g).abs() < 1e-12);
    }

    #[test]
    fn volumetric_gain_examples() {
        let mut map = room();
        let spec = *map.spec();
        let field = UncertaintyField::new(
            spec,
            UncertaintyParams {
                sigma0: 0.01,
                ..Default::default()
            },
        );
        let cam1 = CameraModel::new(0.5, 0.5, 1, 1, 1.0, 0.0).unwrap();
        let view = Pose::new(Vec3::new(1.05, 3.05, 1.55), 0.0, 0.0);
        assert_eq!(volumetric_gain(&view, &field, &map, &cam1, [1, 1], 1), 0.0);

        // One in-band sample one meter ahead.
        let mut field = UncertaintyField::new(spec, UncertaintyParams::default());
        let hit = spec.world_to_index(Vec3::new(2.05, 3.05, 1.55)).unwrap();
        map.set_tsdf(hit, 0.05, 1.0);
        field.set_sigma(spec.linear(hit), 0.5);
        assert!((volumetric_gain(&view, &field, &map, &cam1, [1, 1], 1) - 0.25).abs() < 1e-12);

        // Two rays, three samples each, second ray blocked after its first sample.
        let cam2 = CameraModel::new(1.2, 0.01, 2, 1, 0.9, 0.0).unwrap();
        let mut map = room();
        let mut field = UncertaintyField::new(spec, UncertaintyParams::default());
        let mut hand = 0.0;
        for i in 0..2 {
            let dir = cam2.pixel_ray(&view, ((i as f64 + 0.5) * 2.0 / 2.0) as usize, 0);
            for s in 0..3 {
                let p = view.position + dir * (0.3 * (s + 1) as f64);
                let idx = spec.world_to_index(p).unwrap();
                map.set_tsdf(idx, 0.1, 1.0);
                let sigma = 0.2 + 0.1 * (i * 3 + s) as f64;
                field.set_sigma(spec.linear(idx), sigma);
                if i == 1 && s == 0 {
                    map.set_state(idx, VoxelState::Occupied);
                }
                if i == 0 || s == 0 {
                    hand += sigma * sigma;
                }
            }
        }
        let g = volumetric_gain(&view, &field, &map, &cam2, [2, 1], 3);
        assert!((g - hand / 2.0).abs() < 1e-12, "{g} vs {}", hand / 2.0);
    }

    #[test]
    fn reconstruction_tasks_pick_max_gain() {
        let map = room();
        let spec = *map.spec();
        let esdf = compute_esdf(&map);
        // Dense patch on the x = 0.05 wall, facing +x.
        let mut els = Vec::new();
        for y in 0..40 {
            for z in 0..30 {
                let p = Vec3::new(0.1, 2.0 + 0.025 * y as f64, 0.8 + 0.025 * z as f64);
                els.push(el(p, Vec3::x(), if y < 20 { 0.9 } else { 0.3 }));
            }
        }
        let params = GenParams {
            d_s: 0.3,
            ..Default::default()
        };
        let tasks = gen_reconstruction_tasks(&els, Vec3::new(1.0, 2.5, 1.2), &params, &map, &esdf, &cam());
        assert!(!tasks.is_empty() && tasks.len() <= params.n_rec);
        let coarse = downsample_tracked(&els, params.n_down, params.down_cell);
        let coarse_els: Vec<_> = coarse.iter().map(|d| d.element).collect();
        let clusters = local_surface_clustering(&coarse_els, Vec3::new(1.0, 2.5, 1.2), &params);
        for t in &tasks {
            assert_eq!(t.kind, TaskKind::Reconstruction);
            let c = &clusters[t.source_id as usize];
            let r = (t.view.position - c.center).norm();
            assert!(r >= params.d_r - 1e-9 && r <= params.d_f + 1e-9);
            assert_eq!(map.state_at(spec.world_to_index(t.view.position).unwrap()), VoxelState::Empty);
            for v in sample_shell_viewpoints(c.center, &params, &map, &esdf) {
                let cells: BTreeSet<VoxelId> = c
                    .indices
                    .iter()
                    .flat_map(|&i| coarse[i].members.iter())
                    .map(|&m| spec.linear(spec.world_to_index(els[m].position).unwrap()))
                    .collect();
                let n = cells
                    .iter()
                    .filter(|&&id| {
                        let p = spec.center_of(id);
                        in_frustum(&v, &cam(), p) && map.is_visible(v.position, p)
                    })
                    .count();
                if n >= params.n_min {
                    assert!(surface_gain(&v, c, &map, &cam()) <= t.gain + 1e-12);
                }
            }
        }
        // Fully decayed sigma still yields tasks with small positive gain.
        let flat: Vec<_> = els.iter().map(|e| el(e.position, e.normal, 0.01)).collect();
        let low = gen_reconstruction_tasks(&flat, Vec3::new(1.0, 2.5, 1.2), &params, &map, &esdf, &cam());
        assert!(!low.is_empty());
        assert!(low.iter().all(|t| t.gain > 0.0 && t.gain < 1.0));
        assert!(gen_reconstruction_tasks(&els, Vec3::new(5.0, 5.0, 2.5), &params, &map, &esdf, &cam()).is_empty());
    }
}
