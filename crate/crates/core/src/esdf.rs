//! Exact Euclidean distance field over an occupancy snapshot.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{GridSpec, Vec3, VoxelId};
use crate::map::{OccupancyGrid, VoxelState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EsdfError {
    #[error("query point {0:?} outside the grid")]
    OutOfBounds([f64; 3]),
}

#[derive(Debug, Clone)]
pub struct EsdfGrid {
    spec: GridSpec,
    /// Meters to the nearest obstacle voxel center, `INFINITY` when there is none.
    distance: Vec<f64>,
}

impl EsdfGrid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn distance(&self, id: VoxelId) -> f64 {
        self.distance[id]
    }

    pub fn distance_at(&self, idx: [usize; 3]) -> f64 {
        self.distance[self.spec.linear(idx)]
    }

    pub fn distances(&self) -> &[f64] {
        &self.distance
    }

    /// Trilinear interpolation between voxel centers, clamped at the grid edge.
    pub fn clearance(&self, p: Vec3) -> Result<f64, EsdfError> {
        if !self.spec.contains_point(p) {
            return Err(EsdfError::OutOfBounds([p.x, p.y, p.z]));
        }
        let g = self.spec.to_grid_coords(p) - Vec3::repeat(0.5);
        let mut lo = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let n = self.spec.dims[a];
            let c = g[a].clamp(0.0, (n - 1) as f64);
            let i = (c.floor() as usize).min(n.saturating_sub(2));
            lo[a] = i;
            frac[a] = if n == 1 { 0.0 } else { c - i as f64 };
        }
        let mut acc = 0.0;
        for corner in 0..8usize {
            let mut idx = lo;
            let mut w = 1.0;
            for a in 0..3 {
                let hi = (corner >> a) & 1 == 1;
                if hi {
                    idx[a] = (idx[a] + 1).min(self.spec.dims[a] - 1);
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            let d = self.distance_at(idx);
            if d.is_infinite() {
                return Ok(f64::INFINITY);
            }
            acc += w * d;
        }
        Ok(acc)
    }
}

/// Exact distance transform; unknown and occupied voxels both count as obstacles.
pub fn compute_esdf(map: &OccupancyGrid) -> EsdfGrid {
    let obstacles: Vec<bool> = map.states().iter().map(|&s| s != VoxelState::Empty).collect();
    compute_esdf_from_mask(map.spec(), &obstacles)
}

pub fn compute_esdf_from_mask(spec: &GridSpec, obstacles: &[bool]) -> EsdfGrid {
    let mut d2: Vec<f64> = obstacles
        .iter()
        .map(|&o| if o { 0.0 } else { f64::INFINITY })
        .collect();
    let [nx, ny, nz] = spec.dims;
    let strides = [1, nx, nx * ny];
    for axis in 0..3 {
        let n = spec.dims[axis];
        let stride = strides[axis];
        // Line starts: every voxel whose coordinate along `axis` is zero.
        let starts: Vec<usize> = (0..nx * ny * nz)
            .filter(|&id| (id / stride) % n == 0)
            .collect();
        let lines: Vec<Vec<f64>> = starts
            .par_iter()
            .map(|&s| {
                let f: Vec<f64> = (0..n).map(|i| d2[s + i * stride]).collect();
                edt_1d(&f)
            })
            .collect();
        for (s, line) in starts.iter().zip(lines) {
            for (i, v) in line.into_iter().enumerate() {
                d2[s + i * stride] = v;
            }
        }
    }
    let distance = d2
        .into_iter()
        .map(|v| if v.is_finite() { v.sqrt() * spec.resolution } else { f64::INFINITY })
        .collect();
    EsdfGrid { spec: *spec, distance }
}

/// Lower envelope of parabolas, squared distances in voxel units.
fn edt_1d(f: &[f64]) -> Vec<f64> {
    // (apex, left boundary) of each parabola on the envelope.
    let mut env: Vec<(usize, f64)> = Vec::new();
    for (q, &fq) in f.iter().enumerate() {
        if fq.is_infinite() {
            continue;
        }
        let qf = q as f64;
        while let Some(&(p, zp)) = env.last() {
            let pf = p as f64;
            let s = ((fq + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
            if s <= zp {
                env.pop();
            } else {
                env.push((q, s));
                break;
            }
        }
        if env.is_empty() {
            env.push((q, f64::NEG_INFINITY));
        }
    }
    if env.is_empty() {
        return vec![f64::INFINITY; f.len()];
    }
    let mut k = 0;
    (0..f.len())
        .map(|q| {
            let qf = q as f64;
            while k + 1 < env.len() && env[k + 1].1 < qf {
                k += 1;
            }
            let p = env[k].0;
            (qf - p as f64).powi(2) + f[p]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(spec: &GridSpec, mask: &[bool]) -> Vec<f64> {
        let obs: Vec<[usize; 3]> = (0..mask.len()).filter(|&i| mask[i]).map(|i| spec.unlinear(i)).collect();
        (0..mask.len())
            .map(|i| {
                let a = spec.unlinear(i);
                obs.iter()
                    .map(|b| {
                        let d: f64 = (0..3).map(|k| (a[k] as f64 - b[k] as f64).powi(2)).sum();
                        d
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .map(|d| if d.is_finite() { d.sqrt() * spec.resolution } else { f64::INFINITY })
            .collect()
    }

    #[test]
    fn no_obstacles_is_infinite() {
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [5, 5, 5]).unwrap();
        let esdf = compute_esdf_from_mask(&spec, &vec![false; spec.len()]);
        assert!(esdf.distances().iter().all(|d| d.is_infinite()));
        assert!(esdf.clearance(Vec3::repeat(0.25)).unwrap().is_infinite());
    }

    #[test]
    fn face_neighbor_of_single_obstacle() {
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [5, 5, 5]).unwrap();
        let mut mask = vec![false; spec.len()];
        mask[spec.linear([2, 2, 2])] = true;
        let esdf = compute_esdf_from_mask(&spec, &mask);
        assert_eq!(esdf.distance_at([2, 2, 2]), 0.0);
        assert!((esdf.distance_at([3, 2, 2]) - 0.1).abs() < 1e-12);
        assert_eq!(esdf.clearance(spec.center([2, 2, 2])).unwrap(), 0.0);
        assert_eq!(esdf.clearance(spec.center([4, 1, 2])).unwrap(), esdf.distance_at([4, 1, 2]));
    }

    #[test]
    fn unknown_counts_as_obstacle() {
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [4, 4, 4]).unwrap();
        let map = OccupancyGrid::new(spec);
        let esdf = compute_esdf(&map);
        assert!(esdf.distances().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn random_maps_match_brute_force() {
        let spec = GridSpec::new(Vec3::new(-1.0, 0.5, 2.0), 0.05, [32, 32, 32]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..20 {
            let p = [0.0005, 0.003, 0.02, 0.1][round % 4];
            let mask: Vec<bool> = (0..spec.len()).map(|_| rng.random_bool(p)).collect();
            let ours = compute_esdf_from_mask(&spec, &mask);
            let oracle = brute(&spec, &mask);
            for (a, b) in ours.distances().iter().zip(&oracle) {
                assert!(a == b || (a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn interpolates_between_centers() {
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [10, 1, 1]).unwrap();
        let mut mask = vec![false; 10];
        mask[0] = true;
        let esdf = compute_esdf_from_mask(&spec, &mask);
        // Centers at 0.45 and 0.55 hold 0.4 and 0.5.
        let mid = esdf.clearance(Vec3::new(0.5, 0.05, 0.05)).unwrap();
        assert!((mid - 0.45).abs() < 1e-12);
        assert!(esdf.clearance(Vec3::new(1.5, 0.0, 0.0)).is_err());
    }

    #[test]
    fn clearance_is_lipschitz_along_segments() {
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [16, 16, 16]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mask: Vec<bool> = (0..spec.len()).map(|_| rng.random_bool(0.01)).collect();
        let esdf = compute_esdf_from_mask(&spec, &mask);
        for _ in 0..50 {
            let a = Vec3::from_fn(|_, _| rng.random_range(0.0..1.6));
            let b = Vec3::from_fn(|_, _| rng.random_range(0.0..1.6));
            let steps = 200;
            let step = (b - a).norm() / steps as f64;
            let mut prev = esdf.clearance(a).unwrap();
            for i in 1..=steps {
                let p = a + (b - a) * (i as f64 / steps as f64);
                let d = esdf.clearance(p).unwrap();
                // Per-axis slopes are at most one, so the gradient norm is at most sqrt(3).
                assert!((d - prev).abs() <= step * 3f64.sqrt() + 1e-12);
                prev = d;
            }
        }
    }

    #[test]
    fn voxel_distances_are_one_lipschitz() {
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [12, 12, 12]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mask: Vec<bool> = (0..spec.len()).map(|_| rng.random_bool(0.005)).collect();
        let esdf = compute_esdf_from_mask(&spec, &mask);
        for _ in 0..20000 {
            let a = rng.random_range(0..spec.len());
            let b = rng.random_range(0..spec.len());
            let gap = (spec.center_of(a) - spec.center_of(b)).norm();
            assert!((esdf.distance(a) - esdf.distance(b)).abs() <= gap + 1e-9);
        }
    }
}
