use super::Mesh;
use crate::geometry::{self, Point};

/// Barycentric dual quantities of a mesh, stored per cell.
///
/// The box of vertex `v` intersected with cell `T` has measure `|T|/(n+1)`.
/// Inside `T`, the regions of local vertices `i` and `j` are separated by a
/// sub-face whose area vector (oriented from `i` to `j`) is stored in
/// `sub_faces`. The part of a boundary facet belonging to one of its vertices
/// has measure `|F|/n`.
#[derive(Debug, Clone)]
pub struct DualBoxGeometry {
    dim: usize,
    sub_volumes: Vec<f64>,
    sub_faces: Vec<Point>,
    boundary_measures: Vec<f64>,
}

impl DualBoxGeometry {
    pub fn new(mesh: &Mesh) -> Self {
        let dim = mesh.dim();
        let nv = dim + 1;
        let mut sub_volumes = Vec::with_capacity(mesh.num_cells());
        let mut sub_faces = vec![[0.0; 3]; mesh.num_cells() * nv * nv];
        for c in 0..mesh.num_cells() {
            let x = mesh.cell_coords(c);
            sub_volumes.push(mesh.cell_measure(c) / nv as f64);
            for i in 0..nv {
                for j in i + 1..nv {
                    let s = geometry::subface_vector(dim, &x, i, j);
                    sub_faces[(c * nv + i) * nv + j] = s;
                    sub_faces[(c * nv + j) * nv + i] = geometry::scale(&s, -1.0);
                }
            }
        }
        let boundary_measures = (0..mesh.num_facets())
            .map(|f| {
                if mesh.is_boundary_facet(f) {
                    geometry::facet_measure(dim, &mesh.facet_coords(f)) / dim as f64
                } else {
                    0.0
                }
            })
            .collect();
        DualBoxGeometry { dim, sub_volumes, sub_faces, boundary_measures }
    }

    /// Measure of the box piece of local vertex `i` in cell `c` (the same for all `i`).
    pub fn sub_volume(&self, c: usize) -> f64 {
        self.sub_volumes[c]
    }

    /// Area vector of the interface between local vertices `i` and `j` of cell `c`, oriented `i -> j`.
    pub fn sub_face(&self, c: usize, i: usize, j: usize) -> Point {
        let nv = self.dim + 1;
        self.sub_faces[(c * nv + i) * nv + j]
    }

    /// Measure of the part of boundary facet `f` belonging to each of its vertices (0 for interior facets).
    pub fn boundary_sub_face(&self, f: usize) -> f64 {
        self.boundary_measures[f]
    }

    /// Full box volume of every vertex.
    pub fn box_volumes(&self, mesh: &Mesh) -> Vec<f64> {
        let mut vol = vec![0.0; mesh.num_vertices()];
        for c in 0..mesh.num_cells() {
            for &v in mesh.cell(c) {
                vol[v] += self.sub_volumes[c];
            }
        }
        vol
    }
}
