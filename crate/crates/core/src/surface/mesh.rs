use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::LazyLock;

use thiserror::Error;

use crate::geometry::{GridSpec, Vec3};
use crate::map::OccupancyGrid;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    /// Unit length, pointing toward increasing TSDF (free space).
    pub vertex_normals: Vec<Vec3>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                (b - a).cross(&(c - a)).norm() * 0.5
            })
            .sum()
    }
}

/// Cube corner `k` sits at offset `(k & 1, (k >> 1) & 1, (k >> 2) & 1)`.
const fn corner_offset(k: usize) -> [usize; 3] {
    [k & 1, (k >> 1) & 1, (k >> 2) & 1]
}

/// The 12 cube edges as (lower corner, axis).
const EDGES: [(usize, usize); 12] = [
    (0, 0),
    (2, 0),
    (4, 0),
    (6, 0),
    (0, 1),
    (1, 1),
    (4, 1),
    (5, 1),
    (0, 2),
    (1, 2),
    (2, 2),
    (3, 2),
];

fn edge_index(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    let axis = (hi - lo).trailing_zeros() as usize;
    EDGES.iter().position(|&e| e == (lo, axis)).expect("cube edge")
}

/// Corners of each cube face, counter-clockwise seen from outside.
fn face_cycles() -> [[usize; 4]; 6] {
    let mut out = [[0; 4]; 6];
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let corner = |du: usize, dv: usize| (side << axis) | (du << u) | (dv << v);
            let ccw = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
            out[axis * 2 + side] = if side == 1 {
                ccw
            } else {
                [ccw[0], ccw[3], ccw[2], ccw[1]]
            };
        }
    }
    out
}

/// Edge-index loops for each of the 256 inside/outside patterns.
///
/// On every face, each crossing that enters the inside region is joined to
/// the next crossing that leaves it. Ambiguous faces therefore always keep
/// their inside corners apart, and two cubes sharing a face build the same
/// segment, so the surface closes up. The segments chain into loops.
static CASE_TABLE: LazyLock<Vec<Vec<Polygon>>> = LazyLock::new(|| {
    let faces = face_cycles();
    (0..256usize)
        .map(|case| {
            let inside = |k: usize| (case >> k) & 1 == 1;
            let mut next: HashMap<usize, usize> = HashMap::new();
            for cyc in &faces {
                let mut enters = Vec::new();
                let mut leaves = Vec::new();
                for i in 0..4 {
                    let (a, b) = (cyc[i], cyc[(i + 1) % 4]);
                    match (inside(a), inside(b)) {
                        (false, true) => enters.push((i, edge_index(a, b))),
                        (true, false) => leaves.push((i, edge_index(a, b))),
                        _ => {}
                    }
                }
                for &(i, e) in &enters {
                    let (_, l) = (1..=4)
                        .map(|s| (i + s) % 4)
                        .find_map(|j| leaves.iter().find(|&&(lj, _)| lj == j))
                        .copied()
                        .expect("crossings alternate");
                    next.insert(e, l);
                }
            }
            let mut starts: Vec<usize> = next.keys().copied().collect();
            starts.sort_unstable();
            let mut used = [false; 12];
            let mut polys = Vec::new();
            for s in starts {
                if used[s] {
                    continue;
                }
                let mut ring = vec![s as u8];
                used[s] = true;
                let mut cur = next[&s];
                while cur != s {
                    used[cur] = true;
                    ring.push(cur as u8);
                    cur = next[&cur];
                }
                polys.push(triangulate(&ring));
            }
            polys
        })
        .collect()
});

#[derive(Debug, Clone, PartialEq)]
enum Polygon {
    Triangles(Vec<[u8; 3]>),
    /// Fanned around an extra vertex at the loop centroid.
    Centered(Vec<u8>),
}

/// True when two cube edges lie on a common face.
fn share_face(a: u8, b: u8) -> bool {
    let (la, xa) = EDGES[a as usize];
    let (lb, xb) = EDGES[b as usize];
    (0..3).any(|f| f != xa && f != xb && (la >> f) & 1 == (lb >> f) & 1)
}

/// Fans the loop from an apex whose chords never run along a cube face, so
/// neighbors cannot emit the same chord. Loops without such an apex get a
/// centroid vertex instead.
fn triangulate(ring: &[u8]) -> Polygon {
    let n = ring.len();
    if n == 3 {
        return Polygon::Triangles(vec![[ring[0], ring[1], ring[2]]]);
    }
    for apex in 0..n {
        let r: Vec<u8> = (0..n).map(|k| ring[(apex + k) % n]).collect();
        if (2..n - 1).all(|k| !share_face(r[0], r[k])) {
            return Polygon::Triangles((1..n - 1).map(|k| [r[0], r[k], r[k + 1]]).collect());
        }
    }
    Polygon::Centered(ring.to_vec())
}

/// Zero-level surface of the map's TSDF over cubes whose eight corners all
/// carry weight.
pub fn extract_mesh(map: &OccupancyGrid) -> TriangleMesh {
    extract_mesh_from_field(map.spec(), map.tsdf_values(), map.tsdf_weights())
}

/// Marching cubes on a sampled field (values at voxel centers). Negative is
/// inside; a cube is skipped unless all of its corners have positive weight.
pub fn extract_mesh_from_field(spec: &GridSpec, values: &[f64], weights: &[f64]) -> TriangleMesh {
    let [nx, ny, nz] = spec.dims;
    let mut mesh = TriangleMesh::default();
    if nx < 2 || ny < 2 || nz < 2 {
        return mesh;
    }
    let mut vertex_of: HashMap<(usize, usize), usize> = HashMap::new();
    for z in 0..nz - 1 {
        for y in 0..ny - 1 {
            for x in 0..nx - 1 {
                let corners: [usize; 8] = std::array::from_fn(|k| {
                    let o = corner_offset(k);
                    spec.linear([x + o[0], y + o[1], z + o[2]])
                });
                if corners.iter().any(|&c| weights[c] <= 0.0) {
                    continue;
                }
                let mut case = 0usize;
                for (k, &c) in corners.iter().enumerate() {
                    if values[c] < 0.0 {
                        case |= 1 << k;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let mut vertex = |e: u8, mesh: &mut TriangleMesh| {
                    let (lo, axis) = EDGES[e as usize];
                    let a = corners[lo];
                    *vertex_of.entry((a, axis)).or_insert_with(|| {
                        let b = corners[lo | (1 << axis)];
                        let (va, vb) = (values[a], values[b]);
                        let t = va / (va - vb);
                        let pa = spec.center_of(a);
                        let pb = spec.center_of(b);
                        let ga = gradient(spec, values, weights, a);
                        let gb = gradient(spec, values, weights, b);
                        mesh.vertices.push(pa + (pb - pa) * t);
                        mesh.vertex_normals.push(ga + (gb - ga) * t);
                        mesh.vertices.len() - 1
                    })
                };
                for poly in &CASE_TABLE[case] {
                    match poly {
                        Polygon::Triangles(tris) => {
                            for tri in tris {
                                let ids = tri.map(|e| vertex(e, &mut mesh));
                                mesh.triangles.push(ids);
                            }
                        }
                        Polygon::Centered(ring) => {
                            let ids: Vec<usize> = ring.iter().map(|&e| vertex(e, &mut mesh)).collect();
                            let k = ids.len() as f64;
                            let p = ids.iter().map(|&i| mesh.vertices[i]).sum::<Vec3>() / k;
                            let n = ids.iter().map(|&i| mesh.vertex_normals[i]).sum::<Vec3>() / k;
                            mesh.vertices.push(p);
                            mesh.vertex_normals.push(n);
                            let c = mesh.vertices.len() - 1;
                            for j in 0..ids.len() {
                                mesh.triangles.push([ids[j], ids[(j + 1) % ids.len()], c]);
                            }
                        }
                    }
                }
            }
        }
    }
    fix_normals(&mut mesh);
    mesh
}

/// Central-difference gradient over weighted neighbors, one-sided where a
/// neighbor is missing.
pub(crate) fn gradient(spec: &GridSpec, values: &[f64], weights: &[f64], id: usize) -> Vec3 {
    let idx = spec.unlinear(id);
    let mut g = Vec3::zeros();
    for axis in 0..3 {
        let mut d = [0i64; 3];
        d[axis] = 1;
        let plus = spec.offset(idx, d).map(|i| spec.linear(i)).filter(|&i| weights[i] > 0.0);
        d[axis] = -1;
        let minus = spec.offset(idx, d).map(|i| spec.linear(i)).filter(|&i| weights[i] > 0.0);
        g[axis] = match (plus, minus) {
            (Some(p), Some(m)) => (values[p] - values[m]) / (2.0 * spec.resolution),
            (Some(p), None) => (values[p] - values[id]) / spec.resolution,
            (None, Some(m)) => (values[id] - values[m]) / spec.resolution,
            (None, None) => 0.0,
        };
    }
    g
}

/// Normalizes interpolated gradients, falling back to the area-weighted face
/// normal where the gradient vanishes.
fn fix_normals(mesh: &mut TriangleMesh) {
    let mut face_sum = vec![Vec3::zeros(); mesh.vertices.len()];
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| mesh.vertices[i]);
        let n = (b - a).cross(&(c - a));
        for &i in t {
            face_sum[i] += n;
        }
    }
    for (n, f) in mesh.vertex_normals.iter_mut().zip(face_sum) {
        let len = n.norm();
        *n = if len > 1e-12 {
            *n / len
        } else if f.norm() > 1e-12 {
            f.normalize()
        } else {
            Vec3::z()
        };
    }
}

#[derive(Debug, Error)]
pub enum MeshFormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Plain-text mesh: `scanmesh 1`, `vertices N`, `faces M`, then N lines of
/// `x y z nx ny nz sigma` and M lines of `i j k`.
pub fn write_mesh_text(mesh: &TriangleMesh, sigmas: &[f64]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scanmesh 1");
    let _ = writeln!(s, "vertices {}", mesh.vertices.len());
    let _ = writeln!(s, "faces {}", mesh.triangles.len());
    for (i, (p, n)) in mesh.vertices.iter().zip(&mesh.vertex_normals).enumerate() {
        let sigma = sigmas.get(i).copied().unwrap_or(f64::NAN);
        let _ = writeln!(s, "{} {} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z, sigma);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn read_mesh_text(text: &str) -> Result<(TriangleMesh, Vec<f64>), MeshFormatError> {
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| {
        lines.next().ok_or(MeshFormatError::Parse {
            line: 0,
            message: format!("missing {what}"),
        })
    };
    let (ln, magic) = next("header")?;
    if magic.trim() != "scanmesh 1" {
        return Err(MeshFormatError::Parse {
            line: ln + 1,
            message: "expected `scanmesh 1`".into(),
        });
    }
    let count = |(ln, l): (usize, &str), key: &str| -> Result<usize, MeshFormatError> {
        l.strip_prefix(key)
            .and_then(|r| r.trim().parse().ok())
            .ok_or(MeshFormatError::Parse {
                line: ln + 1,
                message: format!("expected `{key} <count>`"),
            })
    };
    let nv = count(next("vertex count")?, "vertices")?;
    let nf = count(next("face count")?, "faces")?;
    let mut mesh = TriangleMesh::default();
    let mut sigmas = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("vertex")?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| MeshFormatError::Parse {
                line: ln + 1,
                message: format!("{e}"),
            })?;
        if v.len() != 7 {
            return Err(MeshFormatError::Parse {
                line: ln + 1,
                message: "vertex needs 7 numbers".into(),
            });
        }
        mesh.vertices.push(Vec3::new(v[0], v[1], v[2]));
        mesh.vertex_normals.push(Vec3::new(v[3], v[4], v[5]));
        sigmas.push(v[6]);
    }
    for _ in 0..nf {
        let (ln, l) = next("face")?;
        let f: Vec<usize> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| MeshFormatError::Parse {
                line: ln + 1,
                message: format!("{e}"),
            })?;
        if f.len() != 3 || f.iter().any(|&i| i >= nv) {
            return Err(MeshFormatError::Parse {
                line: ln + 1,
                message: "face needs 3 valid vertex indices".into(),
            });
        }
        mesh.triangles.push([f[0], f[1], f[2]]);
    }
    Ok((mesh, sigmas))
}
