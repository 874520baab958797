use std::collections::BTreeMap;

use crate::geometry::Vec3;

use super::mesh::TriangleMesh;
use super::uncertainty::UncertaintyField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceElement {
    pub position: Vec3,
    pub normal: Vec3,
    pub sigma: f64,
}

/// One element per mesh vertex, sigma read from the voxel holding it.
pub fn surface_elements(mesh: &TriangleMesh, field: &UncertaintyField) -> Vec<SurfaceElement> {
    mesh.vertices
        .iter()
        .zip(&mesh.vertex_normals)
        .map(|(&position, &normal)| SurfaceElement {
            position,
            normal,
            sigma: field.sigma_at_point(position),
        })
        .collect()
}

/// A kept element together with every original element merged into it.
#[derive(Debug, Clone, PartialEq)]
pub struct DownsampledElement {
    pub element: SurfaceElement,
    /// Index of `element` in the original sequence.
    pub source: usize,
    /// Original indices represented by this element, sorted.
    pub members: Vec<usize>,
}

/// `n_rounds` voxel-grid decimations; round `r` bins at `2^r * base_cell`
/// and keeps the highest-sigma element per bin (ties: lowest index).
pub fn downsample_surface(elements: &[SurfaceElement], n_rounds: usize, base_cell: f64) -> Vec<SurfaceElement> {
    downsample_tracked(elements, n_rounds, base_cell)
        .into_iter()
        .map(|d| d.element)
        .collect()
}

pub fn downsample_tracked(elements: &[SurfaceElement], n_rounds: usize, base_cell: f64) -> Vec<DownsampledElement> {
    let mut cur: Vec<DownsampledElement> = elements
        .iter()
        .enumerate()
        .map(|(i, &e)| DownsampledElement {
            element: e,
            source: i,
            members: vec![i],
        })
        .collect();
    for r in 0..n_rounds {
        let cell = base_cell * (1u64 << r) as f64;
        let mut bins: BTreeMap<[i64; 3], DownsampledElement> = BTreeMap::new();
        for d in cur {
            let key = bin_key(d.element.position, cell);
            match bins.get_mut(&key) {
                None => {
                    bins.insert(key, d);
                }
                Some(kept) => {
                    let replace = d.element.sigma > kept.element.sigma
                        || (d.element.sigma == kept.element.sigma && d.source < kept.source);
                    let mut members = std::mem::take(&mut kept.members);
                    members.extend(&d.members);
                    if replace {
                        *kept = d;
                    }
                    kept.members = members;
                }
            }
        }
        cur = bins
            .into_values()
            .map(|mut d| {
                d.members.sort_unstable();
                d
            })
            .collect();
        cur.sort_by_key(|d| d.source);
    }
    cur
}

fn bin_key(p: Vec3, cell: f64) -> [i64; 3] {
    [p.x, p.y, p.z].map(|c| (c / cell).floor() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;
    use crate::surface::mesh::extract_mesh_from_field;
    use crate::surface::uncertainty::UncertaintyParams;
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;

    fn el(p: Vec3, sigma: f64) -> SurfaceElement {
        SurfaceElement {
            position: p,
            normal: Vec3::z(),
            sigma,
        }
    }

    fn sphere() -> (GridSpec, TriangleMesh) {
        let spec = GridSpec::new(Vec3::repeat(-1.52), 0.04, [76, 76, 76]).unwrap();
        let v: Vec<f64> = (0..spec.len()).map(|i| spec.center_of(i).norm() - 1.0).collect();
        let w = vec![1.0; spec.len()];
        (spec, extract_mesh_from_field(&spec, &v, &w))
    }

    #[test]
    fn empty_mesh_has_no_elements() {
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [4, 4, 4]).unwrap();
        let field = UncertaintyField::new(spec, UncertaintyParams::default());
        assert!(surface_elements(&TriangleMesh::default(), &field).is_empty());
    }

    #[test]
    fn uniform_field_sigma() {
        let spec = GridSpec::new(Vec3::zeros(), 0.1, [16, 16, 16]).unwrap();
        let v: Vec<f64> = (0..spec.len()).map(|i| spec.center_of(i).z - 0.8).collect();
        let mesh = extract_mesh_from_field(&spec, &v, &vec![1.0; spec.len()]);
        let mut field = UncertaintyField::new(spec, UncertaintyParams::default());
        for i in 0..spec.len() {
            field.set_sigma(i, 0.5);
        }
        let els = surface_elements(&mesh, &field);
        assert_eq!(els.len(), mesh.vertices.len());
        assert!(els.iter().all(|e| e.sigma == 0.5));
    }

    #[test]
    fn decayed_hemisphere_has_lower_sigma() {
        let (spec, mesh) = sphere();
        let mut field = UncertaintyField::new(spec, UncertaintyParams::default());
        for i in 0..spec.len() {
            if spec.center_of(i).x > 0.0 {
                field.set_sigma(i, 0.3);
            }
        }
        let els = surface_elements(&mesh, &field);
        let mean = |f: &dyn Fn(&SurfaceElement) -> bool| {
            let s: Vec<f64> = els.iter().filter(|e| f(e)).map(|e| e.sigma).collect();
            s.iter().sum::<f64>() / s.len() as f64
        };
        assert!(mean(&|e| e.position.x > 0.0) < mean(&|e| e.position.x <= 0.0));
    }

    #[test]
    fn zero_rounds_is_identity() {
        let els: Vec<_> = (0..5).map(|i| el(Vec3::repeat(i as f64 * 0.01), 0.1 * i as f64)).collect();
        assert_eq!(downsample_surface(&els, 0, 0.05), els);
    }

    #[test]
    fn one_cell_keeps_max_sigma() {
        let els: Vec<_> = (0..8)
            .map(|i| {
                let o = [i & 1, (i >> 1) & 1, (i >> 2) & 1].map(|b| 0.01 + 0.02 * b as f64);
                el(Vec3::new(o[0], o[1], o[2]), [0.3, 0.1, 0.9, 0.2, 0.4, 0.5, 0.6, 0.7][i])
            })
            .collect();
        let out = downsample_tracked(&els, 1, 0.05);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].element.sigma, 0.9);
        assert_eq!(out[0].members, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn ties_keep_lowest_index() {
        let els = vec![el(Vec3::repeat(0.01), 0.5), el(Vec3::repeat(0.02), 0.5)];
        assert_eq!(downsample_tracked(&els, 1, 0.05)[0].source, 0);
    }

    /// Independent re-binning: per round, group by cell with a hash map and
    /// keep the (max sigma, min index) survivor.
    fn oracle_count(els: &[SurfaceElement], rounds: usize, base: f64) -> usize {
        let mut cur: Vec<(usize, SurfaceElement)> = els.iter().copied().enumerate().collect();
        for r in 0..rounds {
            let cell = base * 2f64.powi(r as i32);
            let mut best: HashMap<(i64, i64, i64), (usize, SurfaceElement)> = HashMap::new();
            for (i, e) in cur {
                let k = (
                    (e.position.x / cell).floor() as i64,
                    (e.position.y / cell).floor() as i64,
                    (e.position.z / cell).floor() as i64,
                );
                best.entry(k)
                    .and_modify(|b| {
                        if e.sigma > b.1.sigma || (e.sigma == b.1.sigma && i < b.0) {
                            *b = (i, e);
                        }
                    })
                    .or_insert((i, e));
            }
            cur = best.into_values().collect();
        }
        cur.len()
    }

    #[test]
    fn sphere_decimation_matches_rebinning() {
        let (spec, mesh) = sphere();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut field = UncertaintyField::new(spec, UncertaintyParams::default());
        for i in 0..spec.len() {
            field.set_sigma(i, rng.random_range(0.01..1.0));
        }
        let els = surface_elements(&mesh, &field);
        assert!(els.len() >= 10_000, "{}", els.len());
        let out = downsample_tracked(&els, 5, 0.025);
        assert_eq!(out.len(), oracle_count(&els, 5, 0.025));
        let total: usize = out.iter().map(|d| d.members.len()).sum();
        assert_eq!(total, els.len());
        // Sizes never grow, and a repeated round changes nothing.
        let mut prev = els.len();
        for r in 0..=5 {
            let n = downsample_surface(&els, r, 0.025).len();
            assert!(n <= prev);
            prev = n;
        }
        let once = downsample_surface(&els, 1, 0.05);
        assert_eq!(downsample_surface(&once, 1, 0.05), once);
    }
}
