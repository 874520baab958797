use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::scene::{boundary_faces, GroundTruthScene};
use crate::surface::TriangleMesh;

/// Distance under which a ground-truth sample counts as recalled.
pub const RECALL_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("mesh has no triangles")]
    EmptyMesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryMetrics {
    pub accuracy_cm: f64,
    pub completion_cm: f64,
    pub recall: f64,
}

/// Closest point to `p` on triangle `abc`.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Uniform-grid bucket index over triangles for exact nearest-surface queries.
pub struct TriangleIndex {
    tris: Vec<[Vec3; 3]>,
    cell: f64,
    lo: Vec3,
    dims: [i64; 3],
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl TriangleIndex {
    pub fn new(tris: Vec<[Vec3; 3]>, cell: f64) -> Self {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for t in &tris {
            for v in t {
                lo = lo.inf(v);
                hi = hi.sup(v);
            }
        }
        let span = (hi - lo).map(|s| s.max(0.0));
        let dims = [0, 1, 2].map(|a| (span[a] / cell).floor() as i64 + 1);
        let mut index = Self {
            tris: Vec::new(),
            cell,
            lo,
            dims,
            buckets: HashMap::new(),
        };
        for (i, t) in tris.iter().enumerate() {
            let tlo = t[0].inf(&t[1]).inf(&t[2]);
            let thi = t[0].sup(&t[1]).sup(&t[2]);
            let a = index.cell_of(tlo);
            let b = index.cell_of(thi);
            for z in a[2]..=b[2] {
                for y in a[1]..=b[1] {
                    for x in a[0]..=b[0] {
                        index.buckets.entry([x, y, z]).or_default().push(i as u32);
                    }
                }
            }
        }
        index.tris = tris;
        index
    }

    fn cell_of(&self, p: Vec3) -> [i64; 3] {
        [0, 1, 2].map(|a| (((p[a] - self.lo[a]) / self.cell).floor() as i64).clamp(0, self.dims[a] - 1))
    }

    /// Distance from `p` to the nearest triangle.
    pub fn distance(&self, p: Vec3) -> f64 {
        if self.tris.is_empty() {
            return f64::INFINITY;
        }
        let c = self.cell_of(p);
        // Gap between p and the clamped cell, nonzero when p lies outside the grid.
        let outside = (0..3)
            .map(|a| {
                let lo = self.lo[a] + c[a] as f64 * self.cell;
                (lo - p[a]).max(p[a] - (lo + self.cell)).max(0.0)
            })
            .fold(0.0, f64::max);
        let max_ring = self.dims.iter().copied().max().unwrap_or(1);
        let mut best = f64::INFINITY;
        for r in 0..=max_ring {
            for z in c[2] - r..=c[2] + r {
                for y in c[1] - r..=c[1] + r {
                    for x in c[0] - r..=c[0] + r {
                        let ring = (x - c[0]).abs().max((y - c[1]).abs()).max((z - c[2]).abs());
                        if ring != r {
                            continue;
                        }
                        let Some(bucket) = self.buckets.get(&[x, y, z]) else {
                            continue;
                        };
                        for &t in bucket {
                            let [a, b, cc] = self.tris[t as usize];
                            best = best.min((closest_point_on_triangle(p, a, b, cc) - p).norm());
                        }
                    }
                }
            }
            // Cells beyond ring r are at least this far away.
            if best <= outside.max(r as f64 * self.cell) {
                break;
            }
        }
        best
    }
}

/// Ground-truth surface as two triangles per solid/free boundary face.
pub fn ground_truth_triangles(scene: &GroundTruthScene) -> Vec<[Vec3; 3]> {
    let spec = scene.spec();
    let h = 0.5 * spec.resolution;
    let mut out = Vec::new();
    for (idx, d) in boundary_faces(scene) {
        let axis = d.iter().position(|&v| v != 0).expect("axis offset");
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let mut center = spec.center(idx);
        center[axis] += h * d[axis] as f64;
        let corner = |su: f64, sv: f64| {
            let mut q = center;
            q[u] += su * h;
            q[v] += sv * h;
            q
        };
        let (a, b, c, e) = (corner(-1.0, -1.0), corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0));
        out.push([a, b, c]);
        out.push([a, c, e]);
    }
    out
}

/// `n` points drawn uniformly by area from the triangles.
pub fn sample_triangles(tris: &[[Vec3; 3]], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut cdf = Vec::with_capacity(tris.len());
    let mut total = 0.0;
    for t in tris {
        total += 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm();
        cdf.push(total);
    }
    if tris.is_empty() || total <= 0.0 {
        return Vec::new();
    }
    (0..n)
        .map(|_| {
            let x = rng.random::<f64>() * total;
            let i = cdf.partition_point(|&c| c <= x).min(tris.len() - 1);
            let (mut s, mut t): (f64, f64) = (rng.random(), rng.random());
            if s + t > 1.0 {
                s = 1.0 - s;
                t = 1.0 - t;
            }
            let [a, b, c] = tris[i];
            a + (b - a) * s + (c - a) * t
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Accuracy, completion and recall of `mesh` against the scene's solid
/// boundary, from `n_samples` area-uniform samples on each surface. Each
/// sample is measured exactly against the other surface.
pub fn compute_metrics(
    mesh: &TriangleMesh,
    scene: &GroundTruthScene,
    n_samples: usize,
    seed: u64,
) -> Result<GeometryMetrics, MetricsError> {
    if mesh.triangles.is_empty() {
        return Err(MetricsError::EmptyMesh);
    }
    let rec: Vec<[Vec3; 3]> = (0..mesh.triangles.len()).map(|t| mesh.triangle(t)).collect();
    let gt = ground_truth_triangles(scene);
    compare_surfaces(&rec, &gt, n_samples, seed, 2.0 * scene.spec().resolution)
}

/// Metrics between two triangle soups, `rec` measured against `gt`.
pub fn compare_surfaces(
    rec: &[[Vec3; 3]],
    gt: &[[Vec3; 3]],
    n_samples: usize,
    seed: u64,
    cell: f64,
) -> Result<GeometryMetrics, MetricsError> {
    if rec.is_empty() {
        return Err(MetricsError::EmptyMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rec_pts = sample_triangles(rec, n_samples, &mut rng);
    let gt_pts = sample_triangles(gt, n_samples, &mut rng);
    let rec_index = TriangleIndex::new(rec.to_vec(), cell);
    let gt_index = TriangleIndex::new(gt.to_vec(), cell);
    let acc: Vec<f64> = rec_pts.par_iter().map(|&p| gt_index.distance(p)).collect();
    let comp: Vec<f64> = gt_pts.par_iter().map(|&p| rec_index.distance(p)).collect();
    let recalled = comp.iter().filter(|&&d| d < RECALL_THRESHOLD).count();
    Ok(GeometryMetrics {
        accuracy_cm: 100.0 * mean(&acc),
        completion_cm: 100.0 * mean(&comp),
        recall: recalled as f64 / comp.len().max(1) as f64,
    })
}
