use crate::geometry::Vec3;

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matching unit eigenvectors (as columns of
/// the rotation), unsorted.
pub fn jacobi_eigen_sym3(m: [[f64; 3]; 3]) -> ([f64; 3], [Vec3; 3]) {
    let mut a = m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale: f64 = a.iter().flatten().map(|x| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off <= 1e-15 * scale {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // A <- J^T A J
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let vecs = [0, 1, 2].map(|j| Vec3::new(v[0][j], v[1][j], v[2][j]).normalize());
    ([a[0][0], a[1][1], a[2][2]], vecs)
}

/// Principal axes of a point set, sorted by decreasing variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pca {
    pub mean: Vec3,
    pub variances: [f64; 3],
    pub axes: [Vec3; 3],
    /// Max minus min projection along each axis.
    pub extents: [f64; 3],
}

impl Pca {
    pub fn fit(points: &[Vec3]) -> Self {
        let n = points.len().max(1) as f64;
        let mean = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
        let mut cov = [[0.0; 3]; 3];
        for p in points {
            let d = p - mean;
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += d[i] * d[j] / n;
                }
            }
        }
        let (vals, vecs) = jacobi_eigen_sym3(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
        let axes = order.map(|i| vecs[i]);
        let variances = order.map(|i| vals[i]);
        let extents = axes.map(|ax| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let s = (p - mean).dot(&ax);
                (lo.min(s), hi.max(s))
            });
            if points.is_empty() {
                0.0
            } else {
                hi - lo
            }
        });
        Self {
            mean,
            variances,
            axes,
            extents,
        }
    }
}
