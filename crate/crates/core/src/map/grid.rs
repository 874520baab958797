use std::collections::BTreeSet;

use thiserror::Error;

use crate::geometry::{CameraModel, GridSpec, Pose, RayWalk, Vec3, VoxelId};
use crate::scene::{read_header, write_header, DepthImage, SceneError, SCENE_HEADER_LEN};

pub const MAP_MAGIC: &[u8; 4] = b"VMAP";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum VoxelState {
    Unknown = 0,
    Empty = 1,
    Occupied = 2,
}

impl VoxelState {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Self::Unknown),
            1 => Some(Self::Empty),
            2 => Some(Self::Occupied),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("pose {0:?} lies outside the map bounds")]
    PoseOutOfBounds([f64; 3]),
    #[error("depth image is {got} pixels, camera expects {expected}")]
    ImageSizeMismatch { got: usize, expected: usize },
}

/// Inclusive axis-aligned box of voxel indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl IndexBox {
    pub fn point(i: [usize; 3]) -> Self {
        Self { min: i, max: i }
    }

    pub fn include(&mut self, i: [usize; 3]) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(i[a]);
            self.max[a] = self.max[a].max(i[a]);
        }
    }

    pub fn union(self, other: Self) -> Self {
        let mut out = self;
        out.include(other.min);
        out.include(other.max);
        out
    }

    pub fn contains(&self, i: [usize; 3]) -> bool {
        (0..3).all(|a| i[a] >= self.min[a] && i[a] <= self.max[a])
    }

    pub fn padded(&self, spec: &GridSpec, pad: usize) -> Self {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] = out.min[a].saturating_sub(pad);
            out.max[a] = (out.max[a] + pad).min(spec.dims[a] - 1);
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        (self.min[2]..=self.max[2]).flat_map(move |z| {
            (self.min[1]..=self.max[1])
                .flat_map(move |y| (self.min[0]..=self.max[0]).map(move |x| [x, y, z]))
        })
    }
}

/// Tri-state occupancy volume with a co-registered TSDF.
///
/// States only ever leave `Unknown`. A voxel that is `Occupied` with a
/// negative TSDF resists being cleared by rays passing through it; otherwise
/// the latest observation wins.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    spec: GridSpec,
    state: Vec<VoxelState>,
    tsdf: Vec<f64>,
    weight: Vec<f64>,
    truncation: f64,
    dirty: Option<IndexBox>,
    pub(super) frontier_flag: Vec<bool>,
    pub(super) frontiers: BTreeSet<VoxelId>,
}

impl OccupancyGrid {
    /// All-unknown map with truncation of three voxels.
    pub fn new(spec: GridSpec) -> Self {
        Self::with_truncation(spec, 3.0 * spec.resolution)
    }

    pub fn with_truncation(spec: GridSpec, truncation: f64) -> Self {
        let n = spec.len();
        Self {
            spec,
            state: vec![VoxelState::Unknown; n],
            tsdf: vec![0.0; n],
            weight: vec![0.0; n],
            truncation,
            dirty: None,
            frontier_flag: vec![false; n],
            frontiers: BTreeSet::new(),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    #[inline]
    pub fn state(&self, id: VoxelId) -> VoxelState {
        self.state[id]
    }

    #[inline]
    pub fn state_at(&self, idx: [usize; 3]) -> VoxelState {
        self.state[self.spec.linear(idx)]
    }

    pub fn states(&self) -> &[VoxelState] {
        &self.state
    }

    #[inline]
    pub fn tsdf(&self, id: VoxelId) -> f64 {
        self.tsdf[id]
    }

    #[inline]
    pub fn weight(&self, id: VoxelId) -> f64 {
        self.weight[id]
    }

    pub fn tsdf_values(&self) -> &[f64] {
        &self.tsdf
    }

    pub fn tsdf_weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn dirty_box(&self) -> Option<IndexBox> {
        self.dirty
    }

    pub(super) fn take_dirty(&mut self) -> Option<IndexBox> {
        self.dirty.take()
    }

    fn touch(&mut self, idx: [usize; 3]) {
        match &mut self.dirty {
            Some(b) => b.include(idx),
            None => self.dirty = Some(IndexBox::point(idx)),
        }
    }

    /// Overwrites a voxel state; used for fixtures and replay.
    pub fn set_state(&mut self, idx: [usize; 3], s: VoxelState) {
        let id = self.spec.linear(idx);
        if self.state[id] != s {
            self.state[id] = s;
            self.touch(idx);
        }
    }

    /// Overwrites TSDF value (clamped to the truncation band) and weight.
    pub fn set_tsdf(&mut self, idx: [usize; 3], value: f64, weight: f64) {
        let id = self.spec.linear(idx);
        self.tsdf[id] = value.clamp(-self.truncation, self.truncation);
        self.weight[id] = weight.max(0.0);
        self.touch(idx);
    }

    pub fn count_state(&self, s: VoxelState) -> usize {
        self.state.iter().filter(|&&v| v == s).count()
    }

    /// True for voxels with a TSDF observation strictly inside the band.
    #[inline]
    pub fn in_surface_band(&self, id: VoxelId) -> bool {
        self.weight[id] > 0.0 && self.tsdf[id].abs() < self.truncation
    }

    fn fuse(&mut self, idx: [usize; 3], sdf: f64) {
        let id = self.spec.linear(idx);
        let v = sdf.clamp(-self.truncation, self.truncation);
        let w = self.weight[id];
        self.tsdf[id] = (self.tsdf[id] * w + v) / (w + 1.0);
        self.weight[id] = w + 1.0;
        self.touch(idx);
    }

    fn mark_free(&mut self, idx: [usize; 3]) {
        let id = self.spec.linear(idx);
        let keep = match self.state[id] {
            VoxelState::Empty => true,
            VoxelState::Occupied => self.weight[id] > 0.0 && self.tsdf[id] < 0.0,
            VoxelState::Unknown => false,
        };
        if !keep {
            self.state[id] = VoxelState::Empty;
            self.touch(idx);
        }
    }

    fn mark_hit(&mut self, idx: [usize; 3]) {
        let id = self.spec.linear(idx);
        if self.state[id] != VoxelState::Occupied {
            self.state[id] = VoxelState::Occupied;
            self.touch(idx);
        }
    }

    /// Integrates one range image. Voxels before each return become empty,
    /// the voxel containing the return becomes occupied and every voxel
    /// within the truncation band of the return gets a running-average
    /// TSDF update. Returns the box of voxels touched by this scan.
    pub fn integrate_depth_scan(
        &mut self,
        pose: &Pose,
        cam: &CameraModel,
        img: &DepthImage,
    ) -> Result<Option<IndexBox>, MapError> {
        let o = pose.position;
        if !self.spec.contains_point(o) {
            return Err(MapError::PoseOutOfBounds([o.x, o.y, o.z]));
        }
        if img.depths.len() != cam.pixel_count() || img.width != cam.image_width {
            return Err(MapError::ImageSizeMismatch {
                got: img.depths.len(),
                expected: cam.pixel_count(),
            });
        }
        let before = self.dirty.take();
        let tau = self.truncation;
        for v in 0..img.height {
            for u in 0..img.width {
                let dir = cam.pixel_ray(pose, u, v);
                let depth = img.at(u, v);
                if !depth.is_finite() {
                    let walk = RayWalk::new(&self.spec, o, dir, cam.max_range).expect("origin checked");
                    for step in walk {
                        self.mark_free(step.index);
                    }
                    continue;
                }
                let walk = RayWalk::new(&self.spec, o, dir, depth + tau).expect("origin checked");
                let mut passed_hit = false;
                for step in walk {
                    let sdf = depth - (self.spec.center(step.index) - o).dot(&dir);
                    if passed_hit {
                        if sdf >= -tau {
                            self.fuse(step.index, sdf);
                        }
                    } else if step.t_exit <= depth {
                        if sdf <= tau {
                            self.fuse(step.index, sdf);
                        }
                        self.mark_free(step.index);
                    } else {
                        self.fuse(step.index, sdf);
                        self.mark_hit(step.index);
                        passed_hit = true;
                    }
                }
            }
        }
        let scan = self.dirty;
        self.dirty = match (before, scan) {
            (Some(a), Some(b)) => Some(a.union(b)),
            (a, b) => a.or(b),
        };
        Ok(scan)
    }

    /// Line of sight from `from` to `to` through the map: blocked by any
    /// occupied voxel crossed before reaching the voxel containing `to`.
    pub fn is_visible(&self, from: Vec3, to: Vec3) -> bool {
        let d = to - from;
        let dist = d.norm();
        if dist == 0.0 {
            return true;
        }
        let target = self.spec.world_to_index(to);
        let Ok(walk) = RayWalk::new(&self.spec, from, d / dist, dist) else {
            return false;
        };
        for step in walk {
            if Some(step.index) == target {
                return true;
            }
            if self.state_at(step.index) == VoxelState::Occupied && step.t_enter < dist - 1e-9 {
                return false;
            }
        }
        true
    }

    /// Map dump: scene container header (magic `VMAP`, occupied count as the
    /// manifest) followed by one state byte per voxel, x-fastest.
    pub fn to_dump_bytes(&self, pose: &Pose) -> Vec<u8> {
        let mut out = Vec::with_capacity(SCENE_HEADER_LEN + self.spec.len());
        let occupied = self.count_state(VoxelState::Occupied) as u64;
        write_header(&mut out, MAP_MAGIC, &self.spec, pose, occupied);
        out.extend(self.state.iter().map(|&s| s as u8));
        out
    }

    /// Restores states (not the TSDF) from a dump.
    pub fn from_dump_bytes(bytes: &[u8]) -> Result<(Self, Pose), SceneError> {
        let header = read_header(bytes, MAP_MAGIC)?;
        let body = &bytes[SCENE_HEADER_LEN..];
        if body.len() != header.spec.len() {
            return Err(SceneError::Format {
                offset: SCENE_HEADER_LEN,
                message: format!("body has {} bytes, expected {}", body.len(), header.spec.len()),
            });
        }
        let mut map = Self::new(header.spec);
        for (i, &b) in body.iter().enumerate() {
            map.state[i] = VoxelState::from_byte(b).ok_or_else(|| SceneError::Format {
                offset: SCENE_HEADER_LEN + i,
                message: format!("bad state byte {b}"),
            })?;
        }
        if map.count_state(VoxelState::Occupied) as u64 != header.count {
            return Err(SceneError::Format {
                offset: SCENE_HEADER_LEN - 8,
                message: "occupied count does not match manifest".into(),
            });
        }
        map.dirty = Some(IndexBox {
            min: [0; 3],
            max: [map.spec.dims[0] - 1, map.spec.dims[1] - 1, map.spec.dims[2] - 1],
        });
        Ok((map, header.pose))
    }
}
