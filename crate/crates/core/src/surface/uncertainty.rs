use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{in_frustum, CameraModel, GridSpec, Pose, Vec3, VoxelId};
use crate::map::OccupancyGrid;

use super::mesh::gradient;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertaintyParams {
    pub sigma0: f64,
    pub sigma_min: f64,
    /// Decay rate per ideal observation.
    pub eta: f64,
    /// Preferred viewing distance in meters.
    pub d_opt: f64,
}

impl Default for UncertaintyParams {
    fn default() -> Self {
        Self {
            sigma0: 1.0,
            sigma_min: 0.01,
            eta: 0.4,
            d_opt: 1.5,
        }
    }
}

impl UncertaintyParams {
    /// Defaults with `d_opt` halfway between the shell radii.
    pub fn for_shell(d_r: f64, d_f: f64) -> Self {
        Self {
            d_opt: 0.5 * (d_r + d_f),
            ..Self::default()
        }
    }

    /// One observation of a surface voxel with normal `n`, seen along unit
    /// ray `r` at distance `d`.
    pub fn decayed(&self, sigma: f64, n: Vec3, r: Vec3, d: f64) -> f64 {
        let a = n.dot(&r).abs();
        let q = (d - self.d_opt) / self.d_opt;
        let w = (-q * q).exp();
        (sigma * (1.0 - self.eta * a * w)).max(self.sigma_min)
    }
}

/// Per-voxel uncertainty over the whole grid. Only surface-band voxels are
/// ever updated; everything else stays at `sigma0`.
#[derive(Debug, Clone)]
pub struct UncertaintyField {
    spec: GridSpec,
    sigma: Vec<f64>,
    params: UncertaintyParams,
}

impl UncertaintyField {
    pub fn new(spec: GridSpec, params: UncertaintyParams) -> Self {
        Self {
            spec,
            sigma: vec![params.sigma0; spec.len()],
            params,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn params(&self) -> &UncertaintyParams {
        &self.params
    }

    pub fn sigma(&self, id: VoxelId) -> f64 {
        self.sigma[id]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }

    /// Sigma of the voxel containing `p`, `sigma0` outside the grid.
    pub fn sigma_at_point(&self, p: Vec3) -> f64 {
        self.spec
            .world_to_index(p)
            .map_or(self.params.sigma0, |i| self.sigma[self.spec.linear(i)])
    }

    /// Fixture setter; the value is clamped into `[sigma_min, sigma0]`.
    pub fn set_sigma(&mut self, id: VoxelId, value: f64) {
        self.sigma[id] = value.clamp(self.params.sigma_min, self.params.sigma0);
    }
}

/// Decays sigma on every surface-band voxel seen from `pose`. Returns how
/// many voxels were updated.
pub fn update_uncertainty(
    field: &mut UncertaintyField,
    pose: &Pose,
    cam: &CameraModel,
    map: &OccupancyGrid,
) -> usize {
    let spec = *map.spec();
    let origin = pose.position;
    let values = map.tsdf_values();
    let weights = map.tsdf_weights();
    let params = field.params;
    let reach = cam.max_range / spec.resolution + 1.0;
    let g = spec.to_grid_coords(origin);
    let lo: [usize; 3] = std::array::from_fn(|a| (g[a] - reach).floor().max(0.0) as usize);
    let hi: [usize; 3] = std::array::from_fn(|a| ((g[a] + reach).ceil().max(0.0) as usize).min(spec.dims[a] - 1));
    let candidates: Vec<VoxelId> = (lo[2]..=hi[2])
        .flat_map(|z| (lo[1]..=hi[1]).flat_map(move |y| (lo[0]..=hi[0]).map(move |x| [x, y, z])))
        .map(|i| spec.linear(i))
        .filter(|&id| map.in_surface_band(id))
        .collect();
    let updates: Vec<(VoxelId, f64)> = candidates
        .par_iter()
        .filter_map(|&id| {
            let c = spec.center_of(id);
            if !in_frustum(pose, cam, c) || !map.is_visible(origin, c) {
                return None;
            }
            let n = gradient(&spec, values, weights, id);
            let len = n.norm();
            if len < 1e-12 {
                return None;
            }
            let d = (c - origin).norm();
            if d == 0.0 {
                return None;
            }
            let r = (c - origin) / d;
            Some((id, params.decayed(field.sigma[id], n / len, r, d)))
        })
        .collect();
    for &(id, s) in &updates {
        field.sigma[id] = s.min(field.sigma[id]);
    }
    updates.len()
}
