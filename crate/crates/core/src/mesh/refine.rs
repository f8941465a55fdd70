use std::collections::HashMap;

use super::{Mesh, TaggedFacet};
use crate::geometry::{self, Point};

struct Midpoints<'a> {
    vertices: &'a mut Vec<Point>,
    index: HashMap<(usize, usize), usize>,
}

impl Midpoints<'_> {
    fn get(&mut self, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&m) = self.index.get(&key) {
            return m;
        }
        let p = geometry::scale(&geometry::add(&self.vertices[a], &self.vertices[b]), 0.5);
        self.vertices.push(p);
        let m = self.vertices.len() - 1;
        self.index.insert(key, m);
        m
    }
}

/// Splits every cell uniformly: triangles into 4 by edge midpoints, tetrahedra
/// into 8 (red refinement, octahedron cut along its shortest diagonal).
/// Facet tags and kinds pass to the child facets, cell regions to the children.
pub fn uniform_refine(mesh: &Mesh) -> Mesh {
    let dim = mesh.dim();
    let mut vertices = mesh.vertices().to_vec();
    let mut mids = Midpoints { vertices: &mut vertices, index: HashMap::new() };
    let mut cells = Vec::with_capacity(mesh.cells_flat().len() * if dim == 2 { 4 } else { 8 });
    let mut regions = Vec::with_capacity(mesh.num_cells() * if dim == 2 { 4 } else { 8 });

    for c in 0..mesh.num_cells() {
        let v = mesh.cell(c);
        let r = mesh.cell_region(c);
        if dim == 2 {
            let (a, b, cc) = (v[0], v[1], v[2]);
            let ab = mids.get(a, b);
            let bc = mids.get(b, cc);
            let ca = mids.get(cc, a);
            cells.extend_from_slice(&[a, ab, ca, ab, b, bc, ca, bc, cc, ab, bc, ca]);
            regions.extend_from_slice(&[r; 4]);
        } else {
            let m = |i: usize, j: usize, mids: &mut Midpoints| mids.get(v[i], v[j]);
            let m01 = m(0, 1, &mut mids);
            let m02 = m(0, 2, &mut mids);
            let m03 = m(0, 3, &mut mids);
            let m12 = m(1, 2, &mut mids);
            let m13 = m(1, 3, &mut mids);
            let m23 = m(2, 3, &mut mids);
            cells.extend_from_slice(&[
                v[0], m01, m02, m03, m01, v[1], m12, m13, m02, m12, v[2], m23, m03, m13, m23, v[3],
            ]);
            let pairs = [(m01, m23), (m02, m13), (m03, m12)];
            let len = |(p, q): (usize, usize)| geometry::distance(&mids.vertices[p], &mids.vertices[q]);
            let mut best = 0;
            for k in 1..3 {
                if len(pairs[k]) < len(pairs[best]) {
                    best = k;
                }
            }
            let (d0, d1) = pairs[best];
            let (a, oa) = pairs[(best + 1) % 3];
            let (b, ob) = pairs[(best + 2) % 3];
            let ring = [a, b, oa, ob];
            for k in 0..4 {
                cells.extend_from_slice(&[d0, d1, ring[k], ring[(k + 1) % 4]]);
            }
            regions.extend_from_slice(&[r; 8]);
        }
    }

    let mut tagged = Vec::new();
    for tf in mesh.tagged_facet_list() {
        let v = &tf.vertices;
        let tag = tf.tag;
        if dim == 2 {
            let m = mids.get(v[0], v[1]);
            tagged.push(TaggedFacet { vertices: vec![v[0], m], tag });
            tagged.push(TaggedFacet { vertices: vec![m, v[1]], tag });
        } else {
            let ab = mids.get(v[0], v[1]);
            let bc = mids.get(v[1], v[2]);
            let ca = mids.get(v[2], v[0]);
            for vs in [[v[0], ab, ca], [ab, v[1], bc], [ca, bc, v[2]], [ab, bc, ca]] {
                tagged.push(TaggedFacet { vertices: vs.to_vec(), tag });
            }
        }
    }

    let kinds = mesh.tag_map();
    let mut out = Mesh::new(dim, vertices, cells, regions, &tagged)
        .expect("uniform refinement of a valid mesh is valid");
    for f in 0..out.num_facets() {
        if let Some(t) = out.facet_tag[f] {
            out.facet_kind[f] = kinds.get(&t).copied();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{FacetKind, TagMap};

    fn two_triangles_with_barrier() -> Mesh {
        let verts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let m = Mesh::new(
            2,
            verts,
            vec![0, 1, 2, 0, 2, 3],
            vec![1, 1],
            &[TaggedFacet { vertices: vec![0, 2], tag: 3 }],
        )
        .unwrap();
        let map: TagMap = [(3, FacetKind::Barrier)].into_iter().collect();
        m.with_tag_map(&map).unwrap()
    }

    #[test]
    fn two_triangles_refine_to_eight() {
        let m = uniform_refine(&two_triangles_with_barrier());
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.num_vertices(), 9);
        assert!((m.total_measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tagged_edge_splits_in_half() {
        let m = uniform_refine(&two_triangles_with_barrier());
        let children: Vec<usize> = m.facets_of_kind(FacetKind::Barrier).collect();
        assert_eq!(children.len(), 2);
        for f in children {
            assert_eq!(m.facet_tag(f), Some(3));
            assert!((m.facet_measure(f).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn tet_red_refinement() {
        let verts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]];
        let tagged = [TaggedFacet { vertices: vec![1, 2, 3], tag: 9 }];
        let m = Mesh::new(3, verts, vec![0, 1, 2, 3, 1, 2, 3, 4], vec![1, 2], &tagged).unwrap();
        let r = uniform_refine(&m);
        assert_eq!(r.num_cells(), 16);
        assert!((r.total_measure() - m.total_measure()).abs() < 1e-14);
        let area: f64 = r.tagged_facets().map(|(f, _)| r.facet_measure(f).unwrap()).sum();
        assert!((area - 3f64.sqrt() / 2.0).abs() < 1e-14);
        let rr = uniform_refine(&r);
        assert_eq!(rr.num_cells(), 128);
        assert!((rr.total_measure() - m.total_measure()).abs() < 1e-14);
    }
}
