use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::esdf::EsdfGrid;
use crate::geometry::{neighbor_offsets26, RayWalk, Vec3, VoxelId};
use crate::map::{OccupancyGrid, VoxelState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("no path under the clearance constraint")]
    NoPath,
    #[error("endpoint {0:?} outside the grid or not empty")]
    BadEndpoint([f64; 3]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub points: Vec<Vec3>,
    pub length: f64,
}

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Which voxels a search may enter: empty with clearance above `d_s`.
/// Empty voxels within `d_s` of the start are allowed so an agent hugging
/// a wall can still leave, and the goal voxel is allowed when empty.
pub struct Traversability<'a> {
    map: &'a OccupancyGrid,
    esdf: &'a EsdfGrid,
    d_s: f64,
    start: Vec3,
    goal: VoxelId,
}

impl<'a> Traversability<'a> {
    pub fn new(map: &'a OccupancyGrid, esdf: &'a EsdfGrid, d_s: f64, start: Vec3, goal: VoxelId) -> Self {
        Self {
            map,
            esdf,
            d_s,
            start,
            goal,
        }
    }

    pub fn allows(&self, id: VoxelId) -> bool {
        if self.map.state(id) != VoxelState::Empty {
            return false;
        }
        id == self.goal
            || self.esdf.distance(id) > self.d_s
            || (self.map.spec().center_of(id) - self.start).norm() <= self.d_s
    }

    /// Every voxel crossed by the segment is allowed.
    pub fn segment_clear(&self, a: Vec3, b: Vec3) -> bool {
        let d = b - a;
        let len = d.norm();
        if len == 0.0 {
            return true;
        }
        let spec = self.map.spec();
        match RayWalk::new(spec, a, d / len, len) {
            Ok(walk) => walk.into_iter().all(|s| self.allows(spec.linear(s.index))),
            Err(_) => false,
        }
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    id: VoxelId,
}

impl Eq for Open {}

impl Ord for Open {
    // Min-heap on f; among equal f prefer the deeper node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Obstacle-free 26-connected grid distance between voxel indices, in voxels.
fn octile(a: [usize; 3], b: [usize; 3]) -> f64 {
    let mut d = [0, 1, 2].map(|k| a[k].abs_diff(b[k]) as f64);
    d.sort_by(|x, y| y.total_cmp(x));
    let [hi, mid, lo] = d;
    3f64.sqrt() * lo + 2f64.sqrt() * (mid - lo) + (hi - mid)
}

/// Search state reused across calls on one thread; `stamp` marks which
/// entries belong to the current search.
#[derive(Default)]
struct Scratch {
    stamp: Vec<u32>,
    closed: Vec<bool>,
    cost: Vec<f64>,
    parent: Vec<u32>,
    current: u32,
}

impl Scratch {
    fn reset(&mut self, n: usize) {
        if self.stamp.len() != n || self.current == u32::MAX {
            *self = Scratch {
                stamp: vec![0; n],
                closed: vec![false; n],
                cost: vec![0.0; n],
                parent: vec![0; n],
                current: 0,
            };
        }
        self.current += 1;
    }

    fn cost(&self, id: usize) -> f64 {
        if self.stamp[id] == self.current {
            self.cost[id]
        } else {
            f64::INFINITY
        }
    }

    fn closed(&self, id: usize) -> bool {
        self.stamp[id] == self.current && self.closed[id]
    }

    fn set(&mut self, id: usize, cost: f64, parent: usize) {
        self.stamp[id] = self.current;
        self.closed[id] = false;
        self.cost[id] = cost;
        self.parent[id] = parent as u32;
    }
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

/// Raw 26-connected voxel path from `start` to `goal`, as polyline points
/// (start, interior voxel centers, goal).
pub fn astar_raw(start: Vec3, goal: Vec3, trav: &Traversability) -> Result<Vec<Vec3>, PathError> {
    let map = trav.map;
    let spec = map.spec();
    let endpoint = |p: Vec3| {
        spec.world_to_index(p)
            .map(|i| spec.linear(i))
            .filter(|&id| map.state(id) == VoxelState::Empty)
            .ok_or(PathError::BadEndpoint([p.x, p.y, p.z]))
    };
    let s = endpoint(start)?;
    let g = endpoint(goal)?;
    if s == g {
        return Ok(vec![start, goal]);
    }
    let res = spec.resolution;
    let goal_i = spec.unlinear(g);
    let offsets: Vec<([i64; 3], f64)> = neighbor_offsets26()
        .map(|d| {
            let len = ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt() * res;
            (d, len)
        })
        .collect();
    SCRATCH.with(|cell| {
        let mut sc = cell.borrow_mut();
        sc.reset(spec.len());
        let mut open = BinaryHeap::new();
        sc.set(s, 0.0, s);
        open.push(Open {
            f: octile(spec.unlinear(s), goal_i) * res,
            g: 0.0,
            id: s,
        });
        while let Some(Open { id, .. }) = open.pop() {
            if sc.closed(id) {
                continue;
            }
            if id == g {
                break;
            }
            sc.closed[id] = true;
            let idx = spec.unlinear(id);
            let base = sc.cost[id];
            for &(d, step) in &offsets {
                let Some(nb) = spec.offset(idx, d) else {
                    continue;
                };
                let nid = spec.linear(nb);
                if sc.closed(nid) || !trav.allows(nid) {
                    continue;
                }
                let c = base + step;
                if c < sc.cost(nid) {
                    sc.set(nid, c, id);
                    open.push(Open {
                        f: c + octile(nb, goal_i) * res,
                        g: c,
                        id: nid,
                    });
                }
            }
        }
        if !sc.cost(g).is_finite() {
            return Err(PathError::NoPath);
        }
        let mut ids = vec![g];
        while let Some(&last) = ids.last() {
            if last == s {
                break;
            }
            ids.push(sc.parent[last] as usize);
        }
        ids.reverse();
        let mut pts: Vec<Vec3> = ids.iter().map(|&id| spec.center_of(id)).collect();
        pts[0] = start;
        *pts.last_mut().expect("non-empty") = goal;
        Ok(pts)
    })
}

/// Raw shortest paths from `start` to every goal by one Dijkstra search.
/// Goal voxels may be entered when empty but are never expanded through
/// unless traversable themselves, so each path obeys the same rules as a
/// single-goal search.
pub fn dijkstra_raw(
    start: Vec3,
    goals: &[Vec3],
    map: &OccupancyGrid,
    esdf: &EsdfGrid,
    d_s: f64,
) -> Vec<Result<Vec<Vec3>, PathError>> {
    let spec = map.spec();
    let empty_id = |p: Vec3| {
        spec.world_to_index(p)
            .map(|i| spec.linear(i))
            .filter(|&id| map.state(id) == VoxelState::Empty)
            .ok_or(PathError::BadEndpoint([p.x, p.y, p.z]))
    };
    let s = match empty_id(start) {
        Ok(s) => s,
        Err(e) => return vec![Err(e); goals.len()],
    };
    let goal_ids: Vec<Result<VoxelId, PathError>> = goals.iter().map(|&g| empty_id(g)).collect();
    let mut is_target = vec![false; spec.len()];
    for g in goal_ids.iter().flatten() {
        is_target[*g] = true;
    }
    let n_targets = is_target.iter().filter(|&&t| t).count();
    let trav = Traversability::new(map, esdf, d_s, start, usize::MAX);
    let [nx, ny, _] = spec.dims.map(|d| d as isize);
    let offsets: Vec<([i64; 3], f64, isize)> = neighbor_offsets26()
        .map(|d| {
            let len = ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt() * spec.resolution;
            (d, len, d[0] as isize + nx * (d[1] as isize + ny * d[2] as isize))
        })
        .collect();
    SCRATCH.with(|cell| {
        let mut sc = cell.borrow_mut();
        sc.reset(spec.len());
        let mut remaining = n_targets - usize::from(is_target[s]);
        let mut open = BinaryHeap::new();
        sc.set(s, 0.0, s);
        open.push(Open { f: 0.0, g: 0.0, id: s });
        while let Some(Open { id, .. }) = open.pop() {
            if sc.closed(id) {
                continue;
            }
            sc.closed[id] = true;
            if id != s && is_target[id] {
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
            if id != s && !trav.allows(id) {
                continue;
            }
            let idx = spec.unlinear(id);
            let interior = (0..3).all(|a| idx[a] > 0 && idx[a] + 1 < spec.dims[a]);
            let base = sc.cost[id];
            for &(d, step, delta) in &offsets {
                let nid = if interior {
                    id.wrapping_add_signed(delta)
                } else {
                    match spec.offset(idx, d) {
                        Some(nb) => spec.linear(nb),
                        None => continue,
                    }
                };
                if sc.closed(nid) || !(is_target[nid] || trav.allows(nid)) {
                    continue;
                }
                let c = base + step;
                if c < sc.cost(nid) {
                    sc.set(nid, c, id);
                    open.push(Open { f: c, g: c, id: nid });
                }
            }
        }
        goal_ids
            .iter()
            .zip(goals)
            .map(|(g, &goal)| {
                let g = g.clone()?;
                if g == s {
                    return Ok(vec![start, goal]);
                }
                if !sc.closed(g) {
                    return Err(PathError::NoPath);
                }
                let mut ids = vec![g];
                while let Some(&last) = ids.last() {
                    if last == s {
                        break;
                    }
                    ids.push(sc.parent[last] as usize);
                }
                ids.reverse();
                let mut pts: Vec<Vec3> = ids.iter().map(|&id| spec.center_of(id)).collect();
                pts[0] = start;
                *pts.last_mut().expect("non-empty") = goal;
                Ok(pts)
            })
            .collect()
    })
}

/// Greedy line-of-sight shortcutting: from each kept point jump to the
/// farthest later point reachable by a clear segment.
pub fn shortcut(points: &[Vec3], trav: &Traversability) -> Vec<Vec3> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    let mut i = 0;
    while i + 1 < points.len() {
        let mut next = i + 1;
        for j in (i + 2..points.len()).rev() {
            if trav.segment_clear(points[i], points[j]) {
                next = j;
                break;
            }
        }
        out.push(points[next]);
        i = next;
    }
    out
}

/// Shortest clearance-respecting path, shortcut, with its polyline length.
pub fn astar_path(start: Vec3, goal: Vec3, map: &OccupancyGrid, esdf: &EsdfGrid, d_s: f64) -> Result<Path, PathError> {
    let spec = map.spec();
    let g = spec
        .world_to_index(goal)
        .map(|i| spec.linear(i))
        .ok_or(PathError::BadEndpoint([goal.x, goal.y, goal.z]))?;
    let trav = Traversability::new(map, esdf, d_s, start, g);
    let raw = astar_raw(start, goal, &trav)?;
    let points = shortcut(&raw, &trav);
    let length = polyline_length(&points);
    Ok(Path { points, length })
}
