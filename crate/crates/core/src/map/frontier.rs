use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::geometry::{neighbor_offsets26, GridSpec, Vec3, VoxelId};

use super::grid::{OccupancyGrid, VoxelState};
use super::pca::Pca;

impl OccupancyGrid {
    /// Frontier predicate: empty with at least one unknown face neighbor.
    pub fn is_frontier_cell(&self, idx: [usize; 3]) -> bool {
        self.state_at(idx) == VoxelState::Empty
            && self
                .spec()
                .neighbors6(idx)
                .any(|n| self.state_at(n) == VoxelState::Unknown)
    }

    /// Incrementally refreshes the frontier set. Only voxels inside the dirty
    /// box padded by one are re-evaluated; the dirty box is cleared.
    pub fn detect_frontiers(&mut self) -> &BTreeSet<VoxelId> {
        if let Some(b) = self.take_dirty() {
            let spec = *self.spec();
            let region = b.padded(&spec, 1);
            for idx in region.iter() {
                let id = spec.linear(idx);
                let now = self.is_frontier_cell(idx);
                if now != self.frontier_flag[id] {
                    self.frontier_flag[id] = now;
                    if now {
                        self.frontiers.insert(id);
                    } else {
                        self.frontiers.remove(&id);
                    }
                }
            }
        }
        &self.frontiers
    }

    /// Frontier set as of the last [`detect_frontiers`](Self::detect_frontiers) call.
    pub fn frontiers(&self) -> &BTreeSet<VoxelId> {
        &self.frontiers
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierCluster {
    pub id: u64,
    /// Sorted voxel ids.
    pub cells: Vec<VoxelId>,
    pub center: Vec3,
    /// Orthonormal, sorted by decreasing variance.
    pub principal_axes: [Vec3; 3],
    pub extents: [f64; 3],
}

/// Groups frontier cells into 26-connected components and bisects any
/// component wider than `split_extent` along its principal axis. Clusters
/// whose cell set is unchanged since the previous call keep their id.
#[derive(Debug, Clone)]
pub struct FrontierClusterer {
    split_extent: f64,
    next_id: u64,
    known: HashMap<Vec<VoxelId>, u64>,
}

impl FrontierClusterer {
    pub fn new(split_extent: f64) -> Self {
        Self {
            split_extent,
            next_id: 0,
            known: HashMap::new(),
        }
    }

    pub fn split_extent(&self) -> f64 {
        self.split_extent
    }

    pub fn cluster(&mut self, spec: &GridSpec, cells: &BTreeSet<VoxelId>) -> Vec<FrontierCluster> {
        let mut groups = Vec::new();
        for comp in connected_components(spec, cells) {
            split_recursive(spec, comp, self.split_extent, &mut groups);
        }
        for g in &mut groups {
            g.sort_unstable();
        }
        groups.sort_by_key(|g| g[0]);

        let mut known = HashMap::with_capacity(groups.len());
        let clusters = groups
            .into_iter()
            .map(|cells| {
                let id = match self.known.get(&cells) {
                    Some(&id) => id,
                    None => {
                        self.next_id += 1;
                        self.next_id - 1
                    }
                };
                known.insert(cells.clone(), id);
                let pts: Vec<Vec3> = cells.iter().map(|&c| spec.center_of(c)).collect();
                let pca = Pca::fit(&pts);
                FrontierCluster {
                    id,
                    cells,
                    center: pca.mean,
                    principal_axes: pca.axes,
                    extents: pca.extents,
                }
            })
            .collect();
        self.known = known;
        clusters
    }
}

/// One-shot clustering with fresh ids.
pub fn cluster_frontiers(spec: &GridSpec, cells: &BTreeSet<VoxelId>, split_extent: f64) -> Vec<FrontierCluster> {
    FrontierClusterer::new(split_extent).cluster(spec, cells)
}

fn connected_components(spec: &GridSpec, cells: &BTreeSet<VoxelId>) -> Vec<Vec<VoxelId>> {
    let members: HashSet<VoxelId> = cells.iter().copied().collect();
    let mut seen: HashSet<VoxelId> = HashSet::with_capacity(cells.len());
    let mut out = Vec::new();
    for &start in cells {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(cur) = queue.pop_front() {
            let idx = spec.unlinear(cur);
            for d in neighbor_offsets26() {
                if let Some(n) = spec.offset(idx, d) {
                    let nid = spec.linear(n);
                    if members.contains(&nid) && seen.insert(nid) {
                        comp.push(nid);
                        queue.push_back(nid);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

fn split_recursive(spec: &GridSpec, cells: Vec<VoxelId>, max_extent: f64, out: &mut Vec<Vec<VoxelId>>) {
    let pts: Vec<Vec3> = cells.iter().map(|&c| spec.center_of(c)).collect();
    let pca = Pca::fit(&pts);
    if cells.len() < 2 || pca.extents.iter().all(|&e| e <= max_extent) {
        out.push(cells);
        return;
    }
    let axis = pca.axes[0];
    let (neg, pos): (Vec<_>, Vec<_>) = cells
        .iter()
        .zip(&pts)
        .partition(|(_, p)| (*p - pca.mean).dot(&axis) < 0.0);
    if neg.is_empty() || pos.is_empty() {
        out.push(cells);
        return;
    }
    split_recursive(spec, neg.into_iter().map(|(c, _)| *c).collect(), max_extent, out);
    split_recursive(spec, pos.into_iter().map(|(c, _)| *c).collect(), max_extent, out);
}
