//! Ground-truth voxel scenes, the binary scene format, a procedural
//! floorplan generator and the simulated depth camera.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{CameraModel, GeometryError, GridSpec, Pose, RayWalk, Vec3, FACE_OFFSETS};

/// Minimum spawn clearance to solid matter, meters.
pub const SPAWN_CLEARANCE: f64 = 0.3;

pub const SCENE_MAGIC: &[u8; 4] = b"VSCN";
pub const SCENE_VERSION: u16 = 1;
/// magic + version + dims + resolution + origin + spawn + count
pub const SCENE_HEADER_LEN: usize = 4 + 2 + 12 + 8 + 24 + 40 + 8;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("scene invariant violated: {0}")]
    Invariant(String),
    #[error("infeasible layout: {0}")]
    InfeasibleLayout(String),
    #[error("pose lies inside solid matter or outside the scene")]
    PoseInsideSolid,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn format_err(offset: usize, message: impl Into<String>) -> SceneError {
    SceneError::Format {
        offset,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthScene {
    spec: GridSpec,
    solid: Vec<bool>,
    spawn: Pose,
}

impl GroundTruthScene {
    /// Validates the sealed-boundary and spawn invariants.
    pub fn new(spec: GridSpec, solid: Vec<bool>, spawn: Pose) -> Result<Self, SceneError> {
        if solid.len() != spec.len() {
            return Err(SceneError::Invariant(format!(
                "solid mask has {} voxels, grid has {}",
                solid.len(),
                spec.len()
            )));
        }
        let scene = Self { spec, solid, spawn };
        scene.check_sealed()?;
        scene.check_spawn()?;
        Ok(scene)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn spawn(&self) -> Pose {
        self.spawn
    }

    pub fn solid_mask(&self) -> &[bool] {
        &self.solid
    }

    #[inline]
    pub fn is_solid(&self, idx: [usize; 3]) -> bool {
        self.solid[self.spec.linear(idx)]
    }

    pub fn solid_count(&self) -> u64 {
        self.solid.iter().filter(|&&s| s).count() as u64
    }

    /// True when the point is inside the grid and in a non-solid voxel.
    pub fn is_free_point(&self, p: Vec3) -> bool {
        self.spec.world_to_index(p).is_some_and(|i| !self.is_solid(i))
    }

    fn check_sealed(&self) -> Result<(), SceneError> {
        let [dx, dy, dz] = self.spec.dims;
        for z in 0..dz {
            for y in 0..dy {
                for x in 0..dx {
                    let boundary = x == 0 || y == 0 || z == 0 || x + 1 == dx || y + 1 == dy || z + 1 == dz;
                    if boundary && !self.is_solid([x, y, z]) {
                        return Err(SceneError::Invariant(format!(
                            "boundary voxel {:?} is not solid",
                            [x, y, z]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Distance from `p` to the nearest solid voxel box, searched up to `radius`.
    /// Returns `radius` when nothing solid is closer.
    pub fn solid_clearance(&self, p: Vec3, radius: f64) -> f64 {
        let res = self.spec.resolution;
        let Some(c) = self.spec.world_to_index(p) else {
            return 0.0;
        };
        let reach = (radius / res).ceil() as i64 + 1;
        let mut best = radius;
        for dz in -reach..=reach {
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let Some(i) = self.spec.offset(c, [dx, dy, dz]) else {
                        continue;
                    };
                    if !self.is_solid(i) {
                        continue;
                    }
                    let lo = self.spec.center(i) - Vec3::repeat(0.5 * res);
                    let hi = lo + Vec3::repeat(res);
                    let q = Vec3::new(
                        p.x.clamp(lo.x, hi.x),
                        p.y.clamp(lo.y, hi.y),
                        p.z.clamp(lo.z, hi.z),
                    );
                    best = best.min((p - q).norm());
                }
            }
        }
        best
    }

    fn check_spawn(&self) -> Result<(), SceneError> {
        if !self.is_free_point(self.spawn.position) {
            return Err(SceneError::Invariant("spawn lies in a solid voxel or outside the grid".into()));
        }
        if self.solid_clearance(self.spawn.position, SPAWN_CLEARANCE) < SPAWN_CLEARANCE {
            return Err(SceneError::Invariant(format!(
                "spawn clearance below {SPAWN_CLEARANCE} m"
            )));
        }
        Ok(())
    }

    /// Non-solid voxels 6-connected to the spawn voxel.
    pub fn reachable_free(&self) -> Vec<bool> {
        let mut seen = vec![false; self.spec.len()];
        let Some(start) = self.spec.world_to_index(self.spawn.position) else {
            return seen;
        };
        let mut queue = VecDeque::from([start]);
        seen[self.spec.linear(start)] = true;
        while let Some(cur) = queue.pop_front() {
            for n in self.spec.neighbors6(cur) {
                let id = self.spec.linear(n);
                if !seen[id] && !self.solid[id] {
                    seen[id] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SCENE_HEADER_LEN + self.spec.len().div_ceil(8));
        write_header(&mut out, SCENE_MAGIC, &self.spec, &self.spawn, self.solid_count());
        let mut body = vec![0u8; self.spec.len().div_ceil(8)];
        for (i, _) in self.solid.iter().enumerate().filter(|(_, &s)| s) {
            body[i / 8] |= 1 << (i % 8);
        }
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SceneError> {
        let header = read_header(bytes, SCENE_MAGIC)?;
        let n = header.spec.len();
        let body = &bytes[SCENE_HEADER_LEN..];
        let expected = n.div_ceil(8);
        if body.len() != expected {
            return Err(format_err(
                SCENE_HEADER_LEN,
                format!("body has {} bytes, expected {}", body.len(), expected),
            ));
        }
        if n % 8 != 0 && body[expected - 1] >> (n % 8) != 0 {
            return Err(format_err(bytes.len() - 1, "non-zero padding bits"));
        }
        let solid: Vec<bool> = (0..n).map(|i| body[i / 8] >> (i % 8) & 1 == 1).collect();
        let count = solid.iter().filter(|&&s| s).count() as u64;
        if count != header.count {
            return Err(format_err(
                SCENE_HEADER_LEN - 8,
                format!("manifest says {} solid voxels, body has {}", header.count, count),
            ));
        }
        Self::new(header.spec, solid, header.pose)
    }
}

pub fn load_scene(bytes: &[u8]) -> Result<GroundTruthScene, SceneError> {
    GroundTruthScene::from_bytes(bytes)
}

pub fn save_scene(scene: &GroundTruthScene) -> Vec<u8> {
    scene.to_bytes()
}

pub(crate) struct ContainerHeader {
    pub spec: GridSpec,
    pub pose: Pose,
    pub count: u64,
}

/// Shared header layout of the scene and map-dump containers.
pub(crate) fn write_header(out: &mut Vec<u8>, magic: &[u8; 4], spec: &GridSpec, pose: &Pose, count: u64) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&SCENE_VERSION.to_le_bytes());
    for d in spec.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&spec.resolution.to_le_bytes());
    for v in [spec.origin.x, spec.origin.y, spec.origin.z] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [pose.position.x, pose.position.y, pose.position.z, pose.pitch, pose.yaw] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&count.to_le_bytes());
}

pub(crate) fn read_header(bytes: &[u8], magic: &[u8; 4]) -> Result<ContainerHeader, SceneError> {
    if bytes.len() < SCENE_HEADER_LEN {
        return Err(format_err(bytes.len(), "truncated header"));
    }
    if &bytes[0..4] != magic {
        return Err(format_err(0, "bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != SCENE_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dims = [u32_at(6) as usize, u32_at(10) as usize, u32_at(14) as usize];
    let resolution = f64_at(18);
    let origin = Vec3::new(f64_at(26), f64_at(34), f64_at(42));
    let spec = GridSpec::new(origin, resolution, dims).map_err(|e| format_err(6, e.to_string()))?;
    let p = [f64_at(50), f64_at(58), f64_at(66), f64_at(74), f64_at(82)];
    if p.iter().any(|v| !v.is_finite()) {
        return Err(format_err(50, "non-finite pose"));
    }
    let pose = Pose {
        position: Vec3::new(p[0], p[1], p[2]),
        pitch: p[3],
        yaw: p[4],
    };
    let count = u64::from_le_bytes(bytes[90..98].try_into().unwrap());
    Ok(ContainerHeader { spec, pose, count })
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    lo: [usize; 2],
    hi: [usize; 2],
}

impl Rect {
    fn size(&self, a: usize) -> usize {
        self.hi[a] - self.lo[a]
    }
    fn area(&self) -> usize {
        self.size(0) * self.size(1)
    }
}

struct WallSplit {
    axis: usize,
    pos: usize,
    span: [usize; 2],
}

/// Deterministic procedural floorplan: a sealed box partitioned into
/// axis-aligned rooms by thick walls with door gaps, plus furniture.
pub fn generate_floorplan(
    seed: u64,
    rooms: usize,
    extent: Vec3,
    resolution: f64,
) -> Result<GroundTruthScene, SceneError> {
    if rooms == 0 {
        return Err(SceneError::InfeasibleLayout("at least one room is required".into()));
    }
    let vox = |m: f64| (m / resolution).round().max(1.0) as usize;
    let dims = [vox(extent.x), vox(extent.y), vox(extent.z)];
    if dims.iter().any(|&d| d < 8) {
        return Err(SceneError::InfeasibleLayout(format!("dims {dims:?} below 8 voxels")));
    }
    let spec = GridSpec::new(Vec3::zeros(), resolution, dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let wall = vox(0.3);
    let min_room = vox(2.0);
    let door_w = vox(1.0).max(3);
    let floor_top = 1;
    let ceil_bottom = dims[2] - 1;
    let door_h = vox(2.2).min(ceil_bottom - floor_top);

    let mut regions = vec![Rect {
        lo: [1, 1],
        hi: [dims[0] - 1, dims[1] - 1],
    }];
    let mut walls = Vec::new();
    while regions.len() < rooms {
        let (ri, _) = regions
            .iter()
            .enumerate()
            .max_by_key(|(i, r)| (r.area(), std::cmp::Reverse(*i)))
            .unwrap();
        let r = regions[ri];
        let axis = if r.size(0) >= r.size(1) { 0 } else { 1 };
        let len = r.size(axis);
        if len < 2 * min_room + wall {
            return Err(SceneError::InfeasibleLayout(format!(
                "cannot fit {rooms} rooms of at least {min_room} voxels"
            )));
        }
        let lo = r.lo[axis] + min_room;
        let hi = r.hi[axis] - min_room - wall;
        let frac: f64 = rng.random_range(0.35..0.65);
        let pos = (r.lo[axis] + (frac * len as f64) as usize).clamp(lo, hi);
        let mut a = r;
        let mut b = r;
        a.hi[axis] = pos;
        b.lo[axis] = pos + wall;
        let other = 1 - axis;
        walls.push(WallSplit {
            axis,
            pos,
            span: [r.lo[other], r.hi[other]],
        });
        regions[ri] = a;
        regions.insert(ri + 1, b);
    }

    let mut solid = vec![true; spec.len()];
    let set = |solid: &mut Vec<bool>, x: usize, y: usize, z: usize, v: bool| {
        solid[x + dims[0] * (y + dims[1] * z)] = v;
    };
    for r in &regions {
        for z in floor_top..ceil_bottom {
            for y in r.lo[1]..r.hi[1] {
                for x in r.lo[0]..r.hi[0] {
                    set(&mut solid, x, y, z, false);
                }
            }
        }
    }
    let in_room = |x: usize, y: usize| {
        regions
            .iter()
            .any(|r| x >= r.lo[0] && x < r.hi[0] && y >= r.lo[1] && y < r.hi[1])
    };

    // One door per split wall; both sides of the opening must be room floor.
    let mut doors = Vec::new();
    for w in &walls {
        let cell = |along: usize, across: usize| -> (usize, usize) {
            if w.axis == 0 {
                (across, along)
            } else {
                (along, across)
            }
        };
        let candidates: Vec<usize> = (w.span[0]..w.span[1].saturating_sub(door_w))
            .filter(|&s| {
                (s..s + door_w).all(|along| {
                    let (bx, by) = cell(along, w.pos - 1);
                    let (ax, ay) = cell(along, w.pos + wall);
                    in_room(bx, by) && in_room(ax, ay)
                })
            })
            .filter(|&s| s >= w.span[0] + 2 && s + door_w + 2 <= w.span[1])
            .collect();
        if candidates.is_empty() {
            return Err(SceneError::InfeasibleLayout("no room for a door".into()));
        }
        let start = candidates[rng.random_range(0..candidates.len())];
        for along in start..start + door_w {
            for across in w.pos..w.pos + wall {
                let (x, y) = cell(along, across);
                for z in floor_top..floor_top + door_h {
                    set(&mut solid, x, y, z, false);
                }
            }
        }
        let mid = cell(start + door_w / 2, w.pos + wall / 2);
        doors.push(((mid.0 as f64 + 0.5) * resolution, (mid.1 as f64 + 0.5) * resolution));
    }

    let spawn_room = regions[0];
    let spawn_xy = (
        (spawn_room.lo[0] + spawn_room.hi[0]) as f64 * 0.5 * resolution,
        (spawn_room.lo[1] + spawn_room.hi[1]) as f64 * 0.5 * resolution,
    );
    let interior_h = (ceil_bottom - floor_top) as f64 * resolution;
    let spawn_z = (floor_top as f64 * resolution + interior_h.min(3.0) * 0.5).max(floor_top as f64 * resolution + 0.4);
    let spawn = Pose::new(
        Vec3::new(
            ((spawn_xy.0 / resolution).floor() + 0.5) * resolution,
            ((spawn_xy.1 / resolution).floor() + 0.5) * resolution,
            ((spawn_z / resolution).floor() + 0.5) * resolution,
        ),
        0.0,
        0.0,
    );

    // Furniture: boxes and cylinders standing on the floor, kept away from
    // walls, doors, the spawn column and each other.
    let margin = 0.8;
    let max_h = (interior_h - 1.0).clamp(0.3, 1.0);
    let mut placed: Vec<(f64, f64, f64)> = Vec::new();
    for r in &regions {
        if !rng.random_bool(0.6) {
            continue;
        }
        let items = rng.random_range(1..=2);
        for _ in 0..items {
            for _attempt in 0..20 {
                let is_box = rng.random_bool(0.5);
                let (hx, hy) = if is_box {
                    (rng.random_range(0.25..0.5), rng.random_range(0.25..0.5))
                } else {
                    let rad = rng.random_range(0.25..0.45);
                    (rad, rad)
                };
                let h = rng.random_range(0.3..=max_h);
                let x0 = r.lo[0] as f64 * resolution + margin + hx;
                let x1 = r.hi[0] as f64 * resolution - margin - hx;
                let y0 = r.lo[1] as f64 * resolution + margin + hy;
                let y1 = r.hi[1] as f64 * resolution - margin - hy;
                if x0 >= x1 || y0 >= y1 {
                    break;
                }
                let cx = rng.random_range(x0..x1);
                let cy = rng.random_range(y0..y1);
                let rad = hx.max(hy) * std::f64::consts::SQRT_2;
                let far = |(px, py): (f64, f64), d: f64| ((cx - px).powi(2) + (cy - py).powi(2)).sqrt() > d;
                if !far(spawn_xy, rad + 1.0)
                    || doors.iter().any(|&d| !far(d, rad + 1.2))
                    || placed.iter().any(|&(px, py, pr)| !far((px, py), rad + pr + margin))
                {
                    continue;
                }
                placed.push((cx, cy, rad));
                let top = floor_top + ((h / resolution).round() as usize).max(1);
                for z in floor_top..top {
                    for y in r.lo[1]..r.hi[1] {
                        for x in r.lo[0]..r.hi[0] {
                            let px = (x as f64 + 0.5) * resolution - cx;
                            let py = (y as f64 + 0.5) * resolution - cy;
                            let inside = if is_box {
                                px.abs() <= hx && py.abs() <= hy
                            } else {
                                px * px + py * py <= hx * hx
                            };
                            if inside {
                                set(&mut solid, x, y, z, true);
                            }
                        }
                    }
                }
                break;
            }
        }
    }

    let scene = GroundTruthScene::new(spec, solid, spawn)?;
    let reach = scene.reachable_free();
    let stranded = scene
        .solid
        .iter()
        .zip(&reach)
        .filter(|(s, r)| !**s && !**r)
        .count();
    if stranded > 0 {
        return Err(SceneError::InfeasibleLayout(format!("{stranded} free voxels unreachable")));
    }
    Ok(scene)
}

/// Range image; `NO_HIT` marks rays without a return within `max_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub depths: Vec<f64>,
}

impl DepthImage {
    pub const NO_HIT: f64 = f64::INFINITY;

    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.depths[v * self.width + u]
    }
}

/// First solid voxel entry distance along a ray, or `None` within `max_len`.
pub fn cast_ray(scene: &GroundTruthScene, origin: Vec3, dir: Vec3, max_len: f64) -> Option<f64> {
    let walk = RayWalk::new(&scene.spec, origin, dir, max_len).ok()?;
    walk.into_iter()
        .find(|s| scene.is_solid(s.index))
        .map(|s| s.t_enter)
        .filter(|&t| t <= max_len)
}

/// Renders a range image by exact voxel ray marching. With noise enabled,
/// each pixel draws from its own stream of `rng_seed`.
pub fn render_depth(
    scene: &GroundTruthScene,
    pose: &Pose,
    cam: &CameraModel,
    rng_seed: u64,
) -> Result<DepthImage, SceneError> {
    if !scene.is_free_point(pose.position) {
        return Err(SceneError::PoseInsideSolid);
    }
    let w = cam.image_width;
    let depths: Vec<f64> = (0..cam.pixel_count())
        .into_par_iter()
        .map(|pix| {
            let dir = cam.pixel_ray(pose, pix % w, pix / w);
            match cast_ray(scene, pose.position, dir, cam.max_range) {
                None => DepthImage::NO_HIT,
                Some(d) if cam.depth_noise_sigma > 0.0 => {
                    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
                    rng.set_stream(pix as u64);
                    let noise = Normal::new(0.0, cam.depth_noise_sigma).unwrap().sample(&mut rng);
                    (d + noise).clamp(1e-4, cam.max_range)
                }
                Some(d) => d.max(1e-4),
            }
        })
        .collect();
    Ok(DepthImage {
        width: w,
        height: cam.image_height,
        depths,
    })
}

/// Faces between solid and non-solid voxels, as (solid voxel, outward axis offset).
pub fn boundary_faces(scene: &GroundTruthScene) -> Vec<([usize; 3], [i64; 3])> {
    let spec = scene.spec;
    let mut faces = Vec::new();
    for id in 0..spec.len() {
        if !scene.solid[id] {
            continue;
        }
        let idx = spec.unlinear(id);
        for d in FACE_OFFSETS {
            if let Some(n) = spec.offset(idx, d) {
                if !scene.is_solid(n) {
                    faces.push((idx, d));
                }
            }
        }
    }
    faces
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> GroundTruthScene {
        let spec = GridSpec::new(Vec3::zeros(), 1.0, [3, 3, 3]).unwrap();
        let mut solid = vec![true; 27];
        solid[13] = false;
        GroundTruthScene::new(spec, solid, Pose::new(Vec3::new(1.5, 1.5, 1.5), 0.0, 0.0)).unwrap()
    }

    #[test]
    fn minimal_scene_is_valid_and_round_trips() {
        let s = minimal();
        assert_eq!(s.solid_count(), 26);
        let bytes = s.to_bytes();
        assert_eq!(bytes.len(), SCENE_HEADER_LEN + 4);
        let back = load_scene(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(save_scene(&back), bytes);
    }

    #[test]
    fn spawn_in_solid_is_rejected() {
        let spec = GridSpec::new(Vec3::zeros(), 1.0, [3, 3, 3]).unwrap();
        let mut solid = vec![true; 27];
        solid[13] = false;
        let err = GroundTruthScene::new(spec, solid, Pose::new(Vec3::new(0.5, 0.5, 0.5), 0.0, 0.0));
        assert!(matches!(err, Err(SceneError::Invariant(_))));
    }

    #[test]
    fn unsealed_boundary_is_rejected() {
        let spec = GridSpec::new(Vec3::zeros(), 1.0, [3, 3, 3]).unwrap();
        let mut solid = vec![true; 27];
        solid[13] = false;
        solid[0] = false;
        let err = GroundTruthScene::new(spec, solid, Pose::new(Vec3::new(1.5, 1.5, 1.5), 0.0, 0.0));
        assert!(matches!(err, Err(SceneError::Invariant(_))));
    }

    #[test]
    fn corrupt_files_report_offsets() {
        let mut bytes = minimal().to_bytes();
        assert!(matches!(load_scene(&bytes[..10]), Err(SceneError::Format { .. })));
        bytes[0] = b'X';
        assert!(matches!(load_scene(&bytes), Err(SceneError::Format { offset: 0, .. })));
        let mut bytes = minimal().to_bytes();
        let n = bytes.len();
        bytes[n - 4] ^= 0x01; // flips one voxel; manifest no longer matches
        assert!(matches!(load_scene(&bytes), Err(SceneError::Format { .. })));
        let mut bytes = minimal().to_bytes();
        bytes.push(0);
        assert!(matches!(load_scene(&bytes), Err(SceneError::Format { .. })));
    }

    #[test]
    fn single_room_is_sealed_and_reachable() {
        let s = generate_floorplan(1, 1, Vec3::new(4.0, 4.0, 3.0), 0.1).unwrap();
        assert_eq!(s.spec().dims, [40, 40, 30]);
        let reach = s.reachable_free();
        for id in 0..s.spec().len() {
            assert_eq!(!s.solid_mask()[id], reach[id]);
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_floorplan(3, 2, Vec3::new(6.0, 5.0, 3.0), 0.1).unwrap();
        let b = generate_floorplan(3, 2, Vec3::new(6.0, 5.0, 3.0), 0.1).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = generate_floorplan(4, 2, Vec3::new(6.0, 5.0, 3.0), 0.1).unwrap();
        assert_ne!(a.to_bytes(), c.to_bytes());
    }

    #[test]
    fn infeasible_layouts_are_reported() {
        assert!(matches!(
            generate_floorplan(1, 6, Vec3::new(4.0, 4.0, 3.0), 0.1),
            Err(SceneError::InfeasibleLayout(_))
        ));
        assert!(matches!(
            generate_floorplan(1, 1, Vec3::new(0.5, 4.0, 3.0), 0.1),
            Err(SceneError::InfeasibleLayout(_))
        ));
    }

    fn wall_scene() -> GroundTruthScene {
        // 6 x 3 x 3 m box, wall face at x = 4.0.
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [60, 30, 30]).unwrap();
        let mut solid = vec![false; spec.len()];
        for id in 0..spec.len() {
            let [x, y, z] = spec.unlinear(id);
            solid[id] = x == 0 || y == 0 || z == 0 || x >= 40 || y == 29 || z == 29;
        }
        GroundTruthScene::new(spec, solid, Pose::new(Vec3::new(2.0, 1.5, 1.5), 0.0, 0.0)).unwrap()
    }

    #[test]
    fn flat_wall_depth() {
        let s = wall_scene();
        let cam = CameraModel::new(1.0, 0.8, 33, 25, 5.0, 0.0).unwrap();
        let pose = Pose::new(Vec3::new(2.0, 1.5, 1.5), 0.0, 0.0);
        let img = render_depth(&s, &pose, &cam, 0).unwrap();
        assert!((img.at(16, 12) - 2.0).abs() <= 0.1);
        let short = CameraModel { max_range: 1.5, ..cam };
        let img = render_depth(&s, &pose, &short, 0).unwrap();
        assert_eq!(img.at(16, 12), DepthImage::NO_HIT);
        let inside = Pose::new(Vec3::new(4.5, 1.5, 1.5), 0.0, 0.0);
        assert!(matches!(render_depth(&s, &inside, &cam, 0), Err(SceneError::PoseInsideSolid)));
    }

    #[test]
    fn oblique_wall_matches_plane_intersection() {
        let s = wall_scene();
        let cam = CameraModel::new(1.0, 0.8, 33, 25, 5.0, 0.0).unwrap();
        let pose = Pose::new(Vec3::new(2.0, 1.5, 1.5), 0.0, 30f64.to_radians());
        let img = render_depth(&s, &pose, &cam, 0).unwrap();
        let diag = 0.1 * 3f64.sqrt();
        for v in 0..cam.image_height {
            for u in 0..cam.image_width {
                let dir = cam.pixel_ray(&pose, u, v);
                let d = img.at(u, v);
                let hit = pose.position + dir * d;
                // Rays reaching the x = 4 face; others end on side walls.
                if (hit.x - 4.0).abs() < 1e-9 {
                    let analytic = (4.0 - pose.position.x) / dir.x;
                    assert!((d - analytic).abs() <= diag, "pixel {u},{v}");
                }
                assert!(d > 0.0 && d <= cam.max_range);
            }
        }
    }

    #[test]
    fn noise_is_seeded_per_pixel() {
        let s = wall_scene();
        let cam = CameraModel::new(1.0, 0.8, 16, 12, 5.0, 0.01).unwrap();
        let pose = Pose::new(Vec3::new(2.0, 1.5, 1.5), 0.0, 0.0);
        let a = render_depth(&s, &pose, &cam, 9).unwrap();
        let b = render_depth(&s, &pose, &cam, 9).unwrap();
        let c = render_depth(&s, &pose, &cam, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.depths.iter().all(|&d| d > 0.0 && d <= cam.max_range));
    }

    #[test]
    fn boundary_faces_of_single_cavity() {
        assert_eq!(boundary_faces(&minimal()).len(), 6);
    }
}
