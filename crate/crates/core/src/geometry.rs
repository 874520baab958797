//! Poses, the pinhole camera model, voxel grid indexing and exact voxel ray
//! traversal.
//!
//! Camera convention: yaw rotates about world +z, pitch about the camera's
//! lateral axis, and the forward axis at `pitch = yaw = 0` is world +x.
//! Pitch is kept strictly inside `(-pi/2, pi/2)` by clamping with
//! [`PITCH_EPS`]; there is no roll.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = nalgebra::Vector3<f64>;

/// Linear voxel index, x-fastest.
pub type VoxelId = usize;

/// Margin keeping pitch away from the poles.
pub const PITCH_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("direction is degenerate (from == to)")]
    DegenerateDirection,
    #[error("ray origin {0:?} lies outside the grid")]
    OriginOutsideGrid([f64; 3]),
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w -= 2.0 * PI;
    }
    w
}

pub fn clamp_pitch(p: f64) -> f64 {
    p.clamp(-FRAC_PI_2 + PITCH_EPS, FRAC_PI_2 - PITCH_EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub pitch: f64,
    pub yaw: f64,
}

impl Pose {
    /// Builds a pose, clamping pitch and wrapping yaw into their valid ranges.
    pub fn new(position: Vec3, pitch: f64, yaw: f64) -> Self {
        Self {
            position,
            pitch: clamp_pitch(pitch),
            yaw: wrap_angle(yaw),
        }
    }

    /// Pose at `position` facing `target`.
    pub fn looking_at(position: Vec3, target: Vec3) -> Result<Self, GeometryError> {
        let (pitch, yaw) = look_at_angles(position, target)?;
        Ok(Self::new(position, pitch, yaw))
    }

    pub fn forward(&self) -> Vec3 {
        forward_vector(self.pitch, self.yaw)
    }

    /// Image-right axis (world +x at zero angles maps to right = -y).
    pub fn right(&self) -> Vec3 {
        Vec3::new(self.yaw.sin(), -self.yaw.cos(), 0.0)
    }

    /// Image-up axis, orthogonal to forward and right.
    pub fn up(&self) -> Vec3 {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        Vec3::new(-sp * cy, -sp * sy, cp)
    }

    pub fn with_pitch(mut self, pitch: f64) -> Self {
        self.pitch = clamp_pitch(pitch);
        self
    }
}

pub fn forward_vector(pitch: f64, yaw: f64) -> Vec3 {
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    Vec3::new(cp * cy, cp * sy, sp)
}

/// Pitch and yaw that point the camera forward axis from `from` to `to`.
///
/// A purely vertical direction keeps yaw at 0 and clamps pitch.
pub fn look_at_angles(from: Vec3, to: Vec3) -> Result<(f64, f64), GeometryError> {
    let d = to - from;
    if d.norm() == 0.0 || !d.iter().all(|c| c.is_finite()) {
        return Err(GeometryError::DegenerateDirection);
    }
    let horizontal = d.x.hypot(d.y);
    let pitch = clamp_pitch(d.z.atan2(horizontal));
    let yaw = wrap_angle(d.y.atan2(d.x));
    Ok((pitch, yaw))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub horizontal_fov: f64,
    pub vertical_fov: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub max_range: f64,
    /// Standard deviation of additive depth noise in meters; 0 disables it.
    pub depth_noise_sigma: f64,
}

impl CameraModel {
    pub fn new(
        horizontal_fov: f64,
        vertical_fov: f64,
        image_width: usize,
        image_height: usize,
        max_range: f64,
        depth_noise_sigma: f64,
    ) -> Result<Self, GeometryError> {
        let cam = Self {
            horizontal_fov,
            vertical_fov,
            image_width,
            image_height,
            max_range,
            depth_noise_sigma,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let fov_ok = |f: f64| f > 0.0 && f < PI;
        if !fov_ok(self.horizontal_fov) || !fov_ok(self.vertical_fov) {
            return Err(GeometryError::InvalidCamera("fov must lie in (0, pi)".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(GeometryError::InvalidCamera("max_range must be positive".into()));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(GeometryError::InvalidCamera("image must have pixels".into()));
        }
        if !(self.depth_noise_sigma >= 0.0) {
            return Err(GeometryError::InvalidCamera("noise sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.image_width * self.image_height
    }

    /// Unit ray direction through the center of pixel `(u, v)`; `v` grows downward.
    pub fn pixel_ray(&self, pose: &Pose, u: usize, v: usize) -> Vec3 {
        let tx = (self.horizontal_fov * 0.5).tan();
        let ty = (self.vertical_fov * 0.5).tan();
        let x = ((u as f64 + 0.5) / self.image_width as f64 * 2.0 - 1.0) * tx;
        let y = (1.0 - (v as f64 + 0.5) / self.image_height as f64 * 2.0) * ty;
        (pose.forward() + pose.right() * x + pose.up() * y).normalize()
    }
}

/// True iff `point` is within `max_range` of the camera and inside both
/// half-FOVs of the pinhole frustum.
pub fn in_frustum(pose: &Pose, cam: &CameraModel, point: Vec3) -> bool {
    let d = point - pose.position;
    let dist = d.norm();
    if dist > cam.max_range || dist == 0.0 {
        return false;
    }
    let along = d.dot(&pose.forward());
    if along <= 0.0 {
        return false;
    }
    let lateral = d.dot(&pose.right()).abs();
    let vertical = d.dot(&pose.up()).abs();
    lateral <= along * (cam.horizontal_fov * 0.5).tan()
        && vertical <= along * (cam.vertical_fov * 0.5).tan()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// World position of the minimum corner of voxel (0, 0, 0).
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Result<Self, GeometryError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(GeometryError::InvalidGrid("resolution must be positive".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(GeometryError::InvalidGrid("dims must be >= 1".into()));
        }
        Ok(Self {
            origin,
            resolution,
            dims,
        })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn linear(&self, idx: [usize; 3]) -> VoxelId {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    #[inline]
    pub fn unlinear(&self, id: VoxelId) -> [usize; 3] {
        let x = id % self.dims[0];
        let yz = id / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    pub fn contains_signed(&self, idx: [i64; 3]) -> bool {
        (0..3).all(|a| idx[a] >= 0 && (idx[a] as usize) < self.dims[a])
    }

    /// Checked offset of an index; `None` when leaving the grid.
    #[inline]
    pub fn offset(&self, idx: [usize; 3], delta: [i64; 3]) -> Option<[usize; 3]> {
        let s = [
            idx[0] as i64 + delta[0],
            idx[1] as i64 + delta[1],
            idx[2] as i64 + delta[2],
        ];
        self.contains_signed(s)
            .then(|| [s[0] as usize, s[1] as usize, s[2] as usize])
    }

    pub fn center(&self, idx: [usize; 3]) -> Vec3 {
        self.origin
            + Vec3::new(
                (idx[0] as f64 + 0.5) * self.resolution,
                (idx[1] as f64 + 0.5) * self.resolution,
                (idx[2] as f64 + 0.5) * self.resolution,
            )
    }

    pub fn center_of(&self, id: VoxelId) -> Vec3 {
        self.center(self.unlinear(id))
    }

    /// Continuous voxel coordinates (voxel `i` spans `[i, i+1)`).
    pub fn to_grid_coords(&self, p: Vec3) -> Vec3 {
        (p - self.origin) / self.resolution
    }

    pub fn world_to_index(&self, p: Vec3) -> Option<[usize; 3]> {
        let g = self.to_grid_coords(p);
        let f = [g.x.floor(), g.y.floor(), g.z.floor()];
        if f.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let s = [f[0] as i64, f[1] as i64, f[2] as i64];
        self.contains_signed(s)
            .then(|| [s[0] as usize, s[1] as usize, s[2] as usize])
    }

    pub fn contains_point(&self, p: Vec3) -> bool {
        self.world_to_index(p).is_some()
    }

    pub fn max_corner(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                self.dims[0] as f64 * self.resolution,
                self.dims[1] as f64 * self.resolution,
                self.dims[2] as f64 * self.resolution,
            )
    }

    /// Face neighbors that lie inside the grid.
    pub fn neighbors6(&self, idx: [usize; 3]) -> impl Iterator<Item = [usize; 3]> + '_ {
        FACE_OFFSETS
            .iter()
            .filter_map(move |&d| self.offset(idx, d))
    }
}

pub const FACE_OFFSETS: [[i64; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// All 26 neighbor offsets, in a fixed order.
pub fn neighbor_offsets26() -> impl Iterator<Item = [i64; 3]> {
    (-1..=1).flat_map(|dz| {
        (-1..=1).flat_map(move |dy| {
            (-1..=1).filter_map(move |dx| (dx, dy, dz).ne(&(0, 0, 0)).then_some([dx, dy, dz]))
        })
    })
}

/// One voxel visited by a ray, with the ray parameter interval inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayStep {
    pub index: [usize; 3],
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Amanatides-Woo voxel walk. Yields every voxel the ray enters at a
/// parameter `t <= max_len`, stopping at the grid boundary.
#[derive(Debug, Clone)]
pub struct RayWalk {
    spec: GridSpec,
    cur: [i64; 3],
    step: [i64; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    t_enter: f64,
    max_len: f64,
    done: bool,
}

impl RayWalk {
    pub fn new(spec: &GridSpec, origin: Vec3, dir: Vec3, max_len: f64) -> Result<Self, GeometryError> {
        let idx = spec
            .world_to_index(origin)
            .ok_or(GeometryError::OriginOutsideGrid([origin.x, origin.y, origin.z]))?;
        let cur = [idx[0] as i64, idx[1] as i64, idx[2] as i64];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let lo = spec.origin[a] + cur[a] as f64 * spec.resolution;
            if dir[a] > 0.0 {
                step[a] = 1;
                t_max[a] = (lo + spec.resolution - origin[a]) / dir[a];
                t_delta[a] = spec.resolution / dir[a];
            } else if dir[a] < 0.0 {
                step[a] = -1;
                t_max[a] = (lo - origin[a]) / dir[a];
                t_delta[a] = -spec.resolution / dir[a];
            }
        }
        Ok(Self {
            spec: *spec,
            cur,
            step,
            t_max,
            t_delta,
            t_enter: 0.0,
            max_len: max_len.max(0.0),
            done: false,
        })
    }
}

impl Iterator for RayWalk {
    type Item = RayStep;

    fn next(&mut self) -> Option<RayStep> {
        if self.done {
            return None;
        }
        let axis = if self.t_max[0] <= self.t_max[1] && self.t_max[0] <= self.t_max[2] {
            0
        } else if self.t_max[1] <= self.t_max[2] {
            1
        } else {
            2
        };
        let t_exit = self.t_max[axis];
        let out = RayStep {
            index: [self.cur[0] as usize, self.cur[1] as usize, self.cur[2] as usize],
            t_enter: self.t_enter,
            t_exit,
        };
        if t_exit > self.max_len || !t_exit.is_finite() {
            self.done = true;
        } else {
            self.cur[axis] += self.step[axis];
            self.t_enter = t_exit;
            self.t_max[axis] += self.t_delta[axis];
            if !self.spec.contains_signed(self.cur) {
                self.done = true;
            }
        }
        Some(out)
    }
}

/// Ordered voxels crossed by the segment `origin + t * direction`, `t in [0, max_len]`.
pub fn traverse_ray(
    spec: &GridSpec,
    origin: Vec3,
    direction: Vec3,
    max_len: f64,
) -> Result<Vec<[usize; 3]>, GeometryError> {
    Ok(RayWalk::new(spec, origin, direction, max_len)?
        .map(|s| s.index)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cam() -> CameraModel {
        CameraModel::new(90f64.to_radians(), 60f64.to_radians(), 64, 48, 5.0, 0.0).unwrap()
    }

    #[test]
    fn look_at_examples() {
        let o = Vec3::zeros();
        assert_eq!(look_at_angles(o, Vec3::new(1.0, 0.0, 0.0)).unwrap(), (0.0, 0.0));
        let (p, y) = look_at_angles(o, Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(p, FRAC_PI_2 - PITCH_EPS);
        assert_eq!(y, 0.0);
        let (p, y) = look_at_angles(o, Vec3::new(1.0, 1.0, 0.0)).unwrap();
        assert_eq!(p, 0.0);
        assert!((y - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(look_at_angles(o, o), Err(GeometryError::DegenerateDirection));
    }

    #[test]
    fn yaw_wraps_to_half_open_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        let (_, y) = look_at_angles(Vec3::zeros(), Vec3::new(-1.0, 0.0, 0.0)).unwrap();
        assert_eq!(y, -PI);
    }

    #[test]
    fn frustum_examples() {
        let pose = Pose::new(Vec3::zeros(), 0.0, 0.0);
        let c = cam();
        assert!(in_frustum(&pose, &c, Vec3::new(1.0, 0.0, 0.0)));
        assert!(!in_frustum(&pose, &c, Vec3::new(-1.0, 0.0, 0.0)));
        assert!(!in_frustum(&pose, &c, Vec3::new(5.0 + 1e-9, 0.0, 0.0)));
        assert!(in_frustum(&pose, &c, Vec3::new(5.0, 0.0, 0.0)));
        // 40 deg off-axis horizontally is inside a 90 deg hfov, vertically outside 60 deg.
        let a = 40f64.to_radians();
        assert!(in_frustum(&pose, &c, Vec3::new(a.cos(), a.sin(), 0.0)));
        assert!(!in_frustum(&pose, &c, Vec3::new(a.cos(), 0.0, a.sin())));
    }

    #[test]
    fn camera_frame_is_orthonormal() {
        let pose = Pose::new(Vec3::zeros(), 0.4, -2.1);
        let (f, r, u) = (pose.forward(), pose.right(), pose.up());
        for v in [f, r, u] {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert!(f.dot(&r).abs() < 1e-12 && f.dot(&u).abs() < 1e-12 && r.dot(&u).abs() < 1e-12);
        // Center pixel ray of an even image is near forward; a 1x1 image is exact.
        let one = CameraModel::new(1.0, 1.0, 1, 1, 1.0, 0.0).unwrap();
        assert!((one.pixel_ray(&pose, 0, 0) - f).norm() < 1e-12);
    }

    #[test]
    fn traversal_examples() {
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [10, 10, 10]).unwrap();
        let start = spec.center([2, 2, 2]);
        let walk = traverse_ray(&spec, start, Vec3::x(), 0.3).unwrap();
        assert_eq!(walk, vec![[2, 2, 2], [3, 2, 2], [4, 2, 2], [5, 2, 2]]);
        assert_eq!(traverse_ray(&spec, start, Vec3::x(), 0.0).unwrap(), vec![[2, 2, 2]]);
        assert!(matches!(
            traverse_ray(&spec, Vec3::new(-0.1, 0.0, 0.0), Vec3::x(), 1.0),
            Err(GeometryError::OriginOutsideGrid(_))
        ));
        // Stops at the boundary.
        let walk = traverse_ray(&spec, start, Vec3::x(), 100.0).unwrap();
        assert_eq!(walk.len(), 8);
    }

    /// Slab test of the segment against every voxel box of the grid.
    fn brute_force_walk(spec: &GridSpec, o: Vec3, d: Vec3, len: f64) -> Vec<[usize; 3]> {
        let mut hits = Vec::new();
        for z in 0..spec.dims[2] {
            for y in 0..spec.dims[1] {
                for x in 0..spec.dims[0] {
                    let lo = spec.origin + Vec3::new(x as f64, y as f64, z as f64) * spec.resolution;
                    let hi = lo + Vec3::repeat(spec.resolution);
                    let (mut t0, mut t1) = (0.0f64, len);
                    for a in 0..3 {
                        if d[a] == 0.0 {
                            if o[a] < lo[a] || o[a] >= hi[a] {
                                t0 = f64::INFINITY;
                            }
                            continue;
                        }
                        let (ta, tb) = ((lo[a] - o[a]) / d[a], (hi[a] - o[a]) / d[a]);
                        t0 = t0.max(ta.min(tb));
                        t1 = t1.min(ta.max(tb));
                    }
                    if t0 < t1 {
                        hits.push((t0, [x, y, z]));
                    }
                }
            }
        }
        hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        hits.into_iter().map(|h| h.1).collect()
    }

    #[test]
    fn diagonal_walk_matches_brute_force() {
        let spec = GridSpec::new(Vec3::new(-0.2, 0.1, 0.0), 0.25, [4, 4, 4]).unwrap();
        let o = spec.origin + Vec3::new(0.13, 0.07, 0.21);
        let d = Vec3::new(0.71, 0.52, 0.47).normalize();
        let fast = traverse_ray(&spec, o, d, 10.0).unwrap();
        assert_eq!(fast, brute_force_walk(&spec, o, d, 10.0));
        let short = traverse_ray(&spec, o, d, 0.4).unwrap();
        assert_eq!(short, brute_force_walk(&spec, o, d, 0.4));
    }

    fn unit_dir() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-zero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalize())
    }

    proptest! {
        #[test]
        fn walk_is_distinct_and_face_adjacent(
            ox in 0.0f64..1.6, oy in 0.0f64..1.6, oz in 0.0f64..1.6,
            d in unit_dir(), len in 0.0f64..3.0,
        ) {
            let spec = GridSpec::new(Vec3::zeros(), 0.1, [16, 16, 16]).unwrap();
            let walk = traverse_ray(&spec, Vec3::new(ox, oy, oz), d, len).unwrap();
            let mut seen = std::collections::HashSet::new();
            for w in &walk {
                prop_assert!(seen.insert(*w));
            }
            for pair in walk.windows(2) {
                let manhattan: i64 = (0..3).map(|a| (pair[0][a] as i64 - pair[1][a] as i64).abs()).sum();
                prop_assert_eq!(manhattan, 1);
            }
        }

        #[test]
        fn forward_ray_stays_in_frustum(pitch in -1.5f64..1.5, yaw in -3.1f64..3.1, t in 1e-6f64..0.999) {
            let c = cam();
            let pose = Pose::new(Vec3::new(1.0, 2.0, 3.0), pitch, yaw);
            let p = pose.position + pose.forward() * (t * c.max_range);
            prop_assert!(in_frustum(&pose, &c, p));
        }

        #[test]
        fn look_at_recovers_direction(d in unit_dir()) {
            let (p, y) = look_at_angles(Vec3::zeros(), d).unwrap();
            if p.abs() < FRAC_PI_2 - 1e-3 {
                let f = forward_vector(p, y);
                let angle = f.dot(&d).clamp(-1.0, 1.0).acos();
                prop_assert!(angle < 1e-6);
            }
        }
    }
}
