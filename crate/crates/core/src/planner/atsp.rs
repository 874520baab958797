use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::esdf::EsdfGrid;
use crate::geometry::Vec3;
use crate::map::OccupancyGrid;
use crate::taskgen::Task;

use super::astar::{dijkstra_raw, polyline_length, shortcut, Traversability};

/// Cost of an unreachable leg.
pub const UNREACHABLE: f64 = 1e6;

/// Largest task count solved exactly.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtspError {
    #[error("cost matrix is not square")]
    MatrixNotSquare,
    #[error("cost matrix needs the start plus at least one task")]
    TooSmall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    /// Task indices (matrix index minus one) in visiting order.
    pub order: Vec<usize>,
    pub leg_costs: Vec<f64>,
    pub total: f64,
}

/// Node 0 is the agent, node `i + 1` is task `i`. Column 0 is zero so the
/// open tour is an ordinary ATSP instance.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub costs: Vec<Vec<f64>>,
    /// Shortcut polyline for each reachable (from, to) node pair.
    pub paths: Vec<Vec<Option<Vec<Vec3>>>>,
}

impl CostMatrix {
    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }
}

/// Path lengths between the agent and all tasks: one shortest-path search
/// per row, each path shortcut before measuring. Unreachable legs cost
/// `UNREACHABLE`.
pub fn build_cost_matrix(p0: Vec3, tasks: &[Task], map: &OccupancyGrid, esdf: &EsdfGrid, d_s: f64) -> CostMatrix {
    let n = tasks.len() + 1;
    let node = |i: usize| if i == 0 { p0 } else { tasks[i - 1].view.position };
    let spec = map.spec();
    let goals: Vec<Vec3> = (1..n).map(node).collect();
    let rows: Vec<Vec<Option<Vec<Vec3>>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let start = node(i);
            dijkstra_raw(start, &goals, map, esdf, d_s)
                .into_iter()
                .zip(&goals)
                .map(|(raw, &goal)| {
                    let raw = raw.ok()?;
                    let g = spec.linear(spec.world_to_index(goal)?);
                    Some(shortcut(&raw, &Traversability::new(map, esdf, d_s, start, g)))
                })
                .collect()
        })
        .collect();
    let mut costs = vec![vec![UNREACHABLE; n]; n];
    let mut paths = vec![vec![None; n]; n];
    for (i, row) in rows.into_iter().enumerate() {
        for (k, path) in row.into_iter().enumerate() {
            let j = k + 1;
            if i != j {
                if let Some(p) = path {
                    costs[i][j] = polyline_length(&p);
                    paths[i][j] = Some(p);
                }
            }
        }
    }
    for (i, row) in costs.iter_mut().enumerate() {
        row[0] = 0.0;
        row[i] = 0.0;
    }
    CostMatrix { costs, paths }
}

fn check(costs: &[Vec<f64>]) -> Result<usize, AtspError> {
    let n = costs.len();
    if costs.iter().any(|r| r.len() != n) {
        return Err(AtspError::MatrixNotSquare);
    }
    if n < 2 {
        return Err(AtspError::TooSmall);
    }
    Ok(n)
}

/// Open path cost from node 0 through `order` (matrix indices).
pub fn path_cost(costs: &[Vec<f64>], order: &[usize]) -> f64 {
    let mut prev = 0;
    let mut total = 0.0;
    for &k in order {
        total += costs[prev][k];
        prev = k;
    }
    total
}

fn make_tour(costs: &[Vec<f64>], nodes: Vec<usize>) -> Tour {
    let mut prev = 0;
    let leg_costs: Vec<f64> = nodes
        .iter()
        .map(|&k| {
            let c = costs[prev][k];
            prev = k;
            c
        })
        .collect();
    Tour {
        order: nodes.iter().map(|k| k - 1).collect(),
        total: leg_costs.iter().sum(),
        leg_costs,
    }
}

/// Exact for up to [`EXACT_LIMIT`] tasks, heuristic above.
pub fn solve_atsp(costs: &[Vec<f64>]) -> Result<Tour, AtspError> {
    let n = check(costs)?;
    if n - 1 <= EXACT_LIMIT {
        Ok(make_tour(costs, held_karp(costs)))
    } else {
        solve_atsp_heuristic(costs)
    }
}

/// Perturbations applied after the multi-start phase.
const KICKS: usize = 60;
/// Relative cost increase a kicked tour may have and still be walked from.
const KICK_SLACK: f64 = 0.03;
/// Above this many tasks the heuristic uses fewer starts, kicks and block sizes.
const FULL_SEARCH_LIMIT: usize = 30;

/// Local search regardless of size: nearest-neighbor tours started from
/// every possible first task, each improved by block exchange and reversal,
/// then random node relocations from a fixed-seed generator, each followed
/// by the same local search.
pub fn solve_atsp_heuristic(costs: &[Vec<f64>]) -> Result<Tour, AtspError> {
    let n = check(costs)?;
    let large = n - 1 > FULL_SEARCH_LIMIT;
    let (n_starts, kicks, max_block) = if large { (4, 8, 3) } else { (n - 1, KICKS, n) };
    // Cheapest first legs first, so the plain nearest-neighbor tour is always a start.
    let mut firsts: Vec<usize> = (1..n).collect();
    firsts.sort_by(|&a, &b| costs[0][a].total_cmp(&costs[0][b]).then(a.cmp(&b)));
    let mut best: Option<(f64, Vec<usize>)> = None;
    for &first in firsts.iter().take(n_starts) {
        let mut order = nearest_neighbor_from(costs, first);
        improve(costs, &mut order, max_block);
        let c = path_cost(costs, &order);
        if best.as_ref().is_none_or(|(b, _)| c < *b - 1e-12) {
            best = Some((c, order));
        }
    }
    let (mut best_cost, mut best_order) = best.expect("at least one task");
    if best_order.len() >= 4 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let (mut cur_cost, mut cur_order) = (best_cost, best_order.clone());
        for _ in 0..kicks {
            let mut cand = cur_order.clone();
            let m = cand.len();
            for _ in 0..3 {
                let node = cand.remove(rng.random_range(0..m));
                cand.insert(rng.random_range(0..m), node);
            }
            improve(costs, &mut cand, max_block);
            let cost = path_cost(costs, &cand);
            if cost < best_cost - 1e-12 {
                best_cost = cost;
                best_order = cand.clone();
            }
            // Walk on through slightly worse optima; fall back to the best when drifting.
            if cost < cur_cost * (1.0 + KICK_SLACK) {
                (cur_cost, cur_order) = (cost, cand);
            } else {
                (cur_cost, cur_order) = (best_cost, best_order.clone());
            }
        }
    }
    Ok(make_tour(costs, best_order))
}

/// Greedy construction from node 0; ties go to the lowest index.
pub fn nearest_neighbor(costs: &[Vec<f64>]) -> Vec<usize> {
    let first = (1..costs.len())
        .min_by(|&a, &b| costs[0][a].total_cmp(&costs[0][b]).then(a.cmp(&b)))
        .expect("at least one task");
    nearest_neighbor_from(costs, first)
}

fn nearest_neighbor_from(costs: &[Vec<f64>], first: usize) -> Vec<usize> {
    let n = costs.len();
    let mut used = vec![false; n];
    used[0] = true;
    used[first] = true;
    let mut order = Vec::with_capacity(n - 1);
    order.push(first);
    let mut cur = first;
    for _ in 2..n {
        let next = (1..n)
            .filter(|&k| !used[k])
            .min_by(|&a, &b| costs[cur][a].total_cmp(&costs[cur][b]).then(a.cmp(&b)))
            .expect("unvisited node");
        used[next] = true;
        order.push(next);
        cur = next;
    }
    order
}

/// First-improvement local search until no move helps. Moves are
/// exchanges of two adjacent blocks, one of them at most `max_block` long
/// (which includes every Or-opt move), and reversals of a block, all
/// evaluated by their boundary cost change.
fn improve(costs: &[Vec<f64>], order: &mut Vec<usize>, max_block: usize) {
    let n = order.len();
    // Edge cost with position n standing for the free end of the path.
    let c = |u: usize, v: Option<usize>| v.map_or(0.0, |v| costs[u][v]);
    loop {
        let node = |p: usize| order[p];
        let prev = |p: usize| if p == 0 { 0 } else { order[p - 1] };
        let next = |p: usize| (p < n).then(|| order[p]);
        let mut fw = vec![0.0; n];
        let mut bw = vec![0.0; n];
        for k in 1..n {
            fw[k] = fw[k - 1] + costs[order[k - 1]][order[k]];
            bw[k] = bw[k - 1] + costs[order[k]][order[k - 1]];
        }
        let mut applied = false;
        'search: for a in 0..n {
            for b in a + 1..n {
                // Unless the first block is short, only short second blocks are tried.
                let e_max = if b - a <= max_block { n } else { n.min(b + max_block) };
                for e in b + 1..=e_max {
                    let removed = costs[prev(a)][node(a)] + costs[node(b - 1)][node(b)] + c(node(e - 1), next(e));
                    let added = costs[prev(a)][node(b)] + costs[node(e - 1)][node(a)] + c(node(b - 1), next(e));
                    // Same exchange with the first or the second block reversed.
                    let (ia_f, ia_b) = (fw[b - 1] - fw[a], bw[b - 1] - bw[a]);
                    let (ib_f, ib_b) = (fw[e - 1] - fw[b], bw[e - 1] - bw[b]);
                    let base = removed + ia_f + ib_f;
                    let rev_a = costs[prev(a)][node(b)] + costs[node(e - 1)][node(b - 1)] + c(node(a), next(e)) + ia_b + ib_f;
                    let rev_b = costs[prev(a)][node(e - 1)] + costs[node(b)][node(a)] + c(node(b - 1), next(e)) + ia_f + ib_b;
                    let scale = fw[n - 1].max(bw[n - 1]);
                    let flip = if improves(added, removed, removed) {
                        Some((false, false))
                    } else if improves(rev_a, base, scale) {
                        Some((true, false))
                    } else if improves(rev_b, base, scale) {
                        Some((false, true))
                    } else {
                        None
                    };
                    if let Some((fa, fb)) = flip {
                        let mut blk_a = order[a..b].to_vec();
                        let mut blk_b = order[b..e].to_vec();
                        if fa {
                            blk_a.reverse();
                        }
                        if fb {
                            blk_b.reverse();
                        }
                        let mut cand = order[..a].to_vec();
                        cand.extend_from_slice(&blk_b);
                        cand.extend_from_slice(&blk_a);
                        cand.extend_from_slice(&order[e..]);
                        *order = cand;
                        applied = true;
                        break 'search;
                    }
                }
            }
            for j in a + 2..=n {
                let inner_f = fw[j - 1] - fw[a];
                let inner_b = bw[j - 1] - bw[a];
                let removed = costs[prev(a)][node(a)] + c(node(j - 1), next(j)) + inner_f;
                let added = costs[prev(a)][node(j - 1)] + c(node(a), next(j)) + inner_b;
                if improves(added, removed, fw[n - 1].max(bw[n - 1])) {
                    order[a..j].reverse();
                    applied = true;
                    break 'search;
                }
            }
        }
        if !applied {
            break;
        }
    }
}

/// Strict improvement beyond the rounding noise of sums of size `scale`.
fn improves(added: f64, removed: f64, scale: f64) -> bool {
    added < removed - 1e-9 * scale.max(1.0)
}

/// Held-Karp over open paths from node 0. Returns matrix indices.
fn held_karp(costs: &[Vec<f64>]) -> Vec<usize> {
    let m = costs.len() - 1;
    let full = 1usize << m;
    let mut dp = vec![f64::INFINITY; full * m];
    let mut parent = vec![usize::MAX; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = costs[0][j + 1];
    }
    for mask in 1..full {
        for j in 0..m {
            let cur = dp[mask * m + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let nm = mask | (1 << k);
                let c = cur + costs[j + 1][k + 1];
                if c < dp[nm * m + k] {
                    dp[nm * m + k] = c;
                    parent[nm * m + k] = j;
                }
            }
        }
    }
    let last_mask = full - 1;
    let mut end = 0;
    for j in 1..m {
        if dp[last_mask * m + j] < dp[last_mask * m + end] {
            end = j;
        }
    }
    let mut order = Vec::with_capacity(m);
    let mut mask = last_mask;
    let mut j = end;
    loop {
        order.push(j + 1);
        let p = parent[mask * m + j];
        mask &= !(1 << j);
        if p == usize::MAX {
            break;
        }
        j = p;
    }
    order.reverse();
    order
}
