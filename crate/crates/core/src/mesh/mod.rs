//! Conforming simplicial meshes with tagged facets.
//!
//! A [`Mesh`] is immutable once built. Construction orients every cell to
//! positive measure, builds the facet topology, and checks that each tagged
//! facet coincides with a facet of some cell. Facet kinds (fracture, barrier,
//! Dirichlet or Neumann boundary) come from a [`TagMap`] supplied by the
//! scenario, so the same mesh file can serve several problems.

mod dual;
mod generate;
pub mod gmsh;
mod refine;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{self, Point};

pub use dual::DualBoxGeometry;
pub use generate::{BoxSelector, Feature, GridPattern, StructuredGrid};
pub use refine::uniform_refine;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error("unsupported element type {0}")]
    UnsupportedElement(i64),
    #[error("invalid mesh: {0}")]
    Validation(String),
    #[error("unknown facet {0}")]
    UnknownFacet(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Role of a tagged facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetKind {
    Fracture,
    Barrier,
    #[serde(alias = "dirichlet")]
    BoundaryDirichlet,
    #[serde(alias = "neumann")]
    BoundaryNeumann,
}

impl FacetKind {
    pub fn is_boundary(self) -> bool {
        matches!(self, FacetKind::BoundaryDirichlet | FacetKind::BoundaryNeumann)
    }
}

/// Physical tag to facet kind.
pub type TagMap = BTreeMap<i32, FacetKind>;

/// A facet given by its vertices together with an integer tag.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedFacet {
    pub vertices: Vec<usize>,
    pub tag: i32,
}

const NONE: usize = usize::MAX;

fn facet_key(vs: &[usize]) -> [usize; 3] {
    let mut k = [NONE; 3];
    k[..vs.len()].copy_from_slice(vs);
    k[..vs.len()].sort_unstable();
    k
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<usize>,
    cell_region: Vec<i32>,
    facets: Vec<usize>,
    facet_cells: Vec<[usize; 2]>,
    cell_facets: Vec<usize>,
    facet_tag: Vec<Option<i32>>,
    facet_kind: Vec<Option<FacetKind>>,
    vertex_cell_offsets: Vec<usize>,
    vertex_cells: Vec<usize>,
}

impl Mesh {
    /// Builds and validates a mesh. `cells` is flat with stride `dim + 1`.
    pub fn new(
        dim: usize,
        vertices: Vec<Point>,
        mut cells: Vec<usize>,
        cell_region: Vec<i32>,
        tagged: &[TaggedFacet],
    ) -> Result<Self, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::Validation(format!("dimension must be 2 or 3, got {dim}")));
        }
        let nv = dim + 1;
        if cells.len() % nv != 0 {
            return Err(MeshError::Validation("cell array length is not a multiple of dim + 1".into()));
        }
        let ncells = cells.len() / nv;
        if ncells == 0 {
            return Err(MeshError::Validation("mesh has no cells".into()));
        }
        if cell_region.len() != ncells {
            return Err(MeshError::Validation("one region tag per cell required".into()));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= vertices.len()) {
            return Err(MeshError::Validation(format!("vertex index {bad} out of range")));
        }
        for c in 0..ncells {
            let cell = &mut cells[c * nv..(c + 1) * nv];
            let coords: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            let m = geometry::signed_measure(dim, &coords);
            let scale = coords.iter().skip(1).map(|p| geometry::distance(p, &coords[0])).fold(0.0, f64::max);
            if !(m.abs() > 1e-14 * scale.powi(dim as i32)) {
                return Err(MeshError::Validation(format!("cell {c} is degenerate")));
            }
            if m < 0.0 {
                cell.swap(0, 1);
            }
        }

        let mut index: HashMap<[usize; 3], usize> = HashMap::with_capacity(ncells * 2);
        let mut facets = Vec::new();
        let mut facet_cells: Vec<[usize; 2]> = Vec::new();
        let mut cell_facets = vec![NONE; ncells * nv];
        let mut local = [0usize; 3];
        for c in 0..ncells {
            for k in 0..nv {
                let mut m = 0;
                for j in 0..nv {
                    if j != k {
                        local[m] = cells[c * nv + j];
                        m += 1;
                    }
                }
                let key = facet_key(&local[..dim]);
                let f = *index.entry(key).or_insert_with(|| {
                    facets.extend_from_slice(&key[..dim]);
                    facet_cells.push([NONE, NONE]);
                    facet_cells.len() - 1
                });
                let slot = &mut facet_cells[f];
                if slot[0] == NONE {
                    slot[0] = c;
                } else if slot[1] == NONE {
                    slot[1] = c;
                } else {
                    return Err(MeshError::Validation(format!("facet shared by more than two cells (cell {c})")));
                }
                cell_facets[c * nv + k] = f;
            }
        }

        let mut facet_tag = vec![None; facet_cells.len()];
        for tf in tagged {
            if tf.vertices.len() != dim {
                return Err(MeshError::Validation(format!("tagged facet {:?} has wrong arity", tf.vertices)));
            }
            if let Some(&bad) = tf.vertices.iter().find(|&&v| v >= vertices.len()) {
                return Err(MeshError::Validation(format!("vertex index {bad} out of range")));
            }
            match index.get(&facet_key(&tf.vertices)) {
                Some(&f) => {
                    if facet_tag[f].is_none() {
                        facet_tag[f] = Some(tf.tag);
                    }
                }
                None => {
                    return Err(MeshError::Validation(format!(
                        "tagged facet {:?} (tag {}) is not a facet of any cell",
                        tf.vertices, tf.tag
                    )))
                }
            }
        }

        let mut counts = vec![0usize; vertices.len() + 1];
        for &v in &cells {
            counts[v + 1] += 1;
        }
        for i in 0..vertices.len() {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut vertex_cells = vec![0; cells.len()];
        for c in 0..ncells {
            for &v in &cells[c * nv..(c + 1) * nv] {
                vertex_cells[fill[v]] = c;
                fill[v] += 1;
            }
        }

        let nf = facet_cells.len();
        Ok(Mesh {
            dim,
            vertices,
            cells,
            cell_region,
            facets,
            facet_cells,
            cell_facets,
            facet_tag,
            facet_kind: vec![None; nf],
            vertex_cell_offsets: counts,
            vertex_cells,
        })
    }

    /// Resolves facet kinds from tags and checks the placement rules:
    /// fractures and barriers must be interior, boundary kinds must lie on the boundary.
    pub fn with_tag_map(mut self, map: &TagMap) -> Result<Self, MeshError> {
        for f in 0..self.num_facets() {
            let Some(tag) = self.facet_tag[f] else {
                self.facet_kind[f] = None;
                continue;
            };
            let kind = *map
                .get(&tag)
                .ok_or_else(|| MeshError::Validation(format!("facet tag {tag} has no kind in the tag map")))?;
            let interior = self.facet_cells[f][1] != NONE;
            match kind {
                FacetKind::Fracture | FacetKind::Barrier if !interior => {
                    return Err(MeshError::Validation(format!(
                        "{kind:?} facet {:?} (tag {tag}) lies on the domain boundary",
                        self.facet(f)
                    )))
                }
                FacetKind::BoundaryDirichlet | FacetKind::BoundaryNeumann if interior => {
                    return Err(MeshError::Validation(format!(
                        "boundary facet {:?} (tag {tag}) is interior",
                        self.facet(f)
                    )))
                }
                _ => {}
            }
            self.facet_kind[f] = Some(kind);
        }
        Ok(self)
    }

    /// Cell-level helper used by tests and refinement: same mesh, region tags replaced.
    pub fn with_cell_regions(mut self, regions: Vec<i32>) -> Result<Self, MeshError> {
        if regions.len() != self.num_cells() {
            return Err(MeshError::Validation("one region tag per cell required".into()));
        }
        self.cell_region = regions;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_region.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facet_cells.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &Point {
        &self.vertices[v]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }

    pub fn cells_flat(&self) -> &[usize] {
        &self.cells
    }

    pub fn cell_coords(&self, c: usize) -> Vec<Point> {
        self.cell(c).iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_region(&self, c: usize) -> i32 {
        self.cell_region[c]
    }

    pub fn cell_regions(&self) -> &[i32] {
        &self.cell_region
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        geometry::signed_measure(self.dim, &self.cell_coords(c))
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_measure(c)).sum()
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        geometry::centroid(&self.cell_coords(c))
    }

    /// Sorted vertex ids of facet `f`.
    pub fn facet(&self, f: usize) -> &[usize] {
        &self.facets[f * self.dim..(f + 1) * self.dim]
    }

    pub fn facet_coords(&self, f: usize) -> Vec<Point> {
        self.facet(f).iter().map(|&v| self.vertices[v]).collect()
    }

    /// Cells adjacent to facet `f`: the first always exists, the second only for interior facets.
    pub fn facet_cells(&self, f: usize) -> (usize, Option<usize>) {
        let [a, b] = self.facet_cells[f];
        (a, (b != NONE).then_some(b))
    }

    pub fn is_boundary_facet(&self, f: usize) -> bool {
        self.facet_cells[f][1] == NONE
    }

    /// Facet of cell `c` opposite its local vertex `k`.
    pub fn cell_facet(&self, c: usize, k: usize) -> usize {
        self.cell_facets[c * (self.dim + 1) + k]
    }

    /// Cell across the facet opposite local vertex `k`, if any.
    pub fn neighbor(&self, c: usize, k: usize) -> Option<usize> {
        let [a, b] = self.facet_cells[self.cell_facet(c, k)];
        let other = if a == c { b } else { a };
        (other != NONE).then_some(other)
    }

    pub fn facet_tag(&self, f: usize) -> Option<i32> {
        self.facet_tag[f]
    }

    pub fn facet_kind(&self, f: usize) -> Option<FacetKind> {
        self.facet_kind[f]
    }

    /// All tagged facets as `(facet id, tag)`.
    pub fn tagged_facets(&self) -> impl Iterator<Item = (usize, i32)> + '_ {
        self.facet_tag.iter().enumerate().filter_map(|(f, t)| t.map(|t| (f, t)))
    }

    pub fn facets_of_kind(&self, kind: FacetKind) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_facets()).filter(move |&f| self.facet_kind[f] == Some(kind))
    }

    pub fn find_facet(&self, vertices: &[usize]) -> Option<usize> {
        if vertices.len() != self.dim {
            return None;
        }
        let key = facet_key(vertices);
        let first = vertices[0];
        self.vertex_cells(first).iter().find_map(|&c| {
            (0..=self.dim).map(|k| self.cell_facet(c, k)).find(|&f| facet_key(self.facet(f)) == key)
        })
    }

    /// Length (2D) or area (3D) of facet `f`.
    pub fn facet_measure(&self, f: usize) -> Result<f64, MeshError> {
        if f >= self.num_facets() {
            return Err(MeshError::UnknownFacet(f));
        }
        Ok(geometry::facet_measure(self.dim, &self.facet_coords(f)))
    }

    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[self.vertex_cell_offsets[v]..self.vertex_cell_offsets[v + 1]]
    }

    /// Local index of vertex `v` in cell `c`.
    pub fn local_index(&self, c: usize, v: usize) -> Option<usize> {
        self.cell(c).iter().position(|&w| w == v)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        geometry::distance(&lo, &hi)
    }

    /// Largest cell edge length.
    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for c in 0..self.num_cells() {
            let x = self.cell_coords(c);
            for i in 0..x.len() {
                for j in i + 1..x.len() {
                    h = h.max(geometry::distance(&x[i], &x[j]));
                }
            }
        }
        h
    }

    /// Tagged facets as vertex lists (used to rebuild meshes after refinement).
    pub fn tagged_facet_list(&self) -> Vec<TaggedFacet> {
        self.tagged_facets()
            .map(|(f, tag)| TaggedFacet { vertices: self.facet(f).to_vec(), tag })
            .collect()
    }

    /// Facet kinds as a tag map reconstructed from the assigned kinds.
    pub fn tag_map(&self) -> TagMap {
        let mut map = TagMap::new();
        for f in 0..self.num_facets() {
            if let (Some(t), Some(k)) = (self.facet_tag[f], self.facet_kind[f]) {
                map.insert(t, k);
            }
        }
        map
    }
}

/// Loads a Gmsh MSH file (4.1 ASCII, with 2.2 ASCII fallback) and resolves facet kinds.
pub fn load_mesh(path: impl AsRef<Path>, tags: &TagMap) -> Result<Mesh, MeshError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    gmsh::parse_msh(&text, &path.display().to_string())?.with_tag_map(tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TRIANGLES: &str = "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n$Nodes\n1 4 1 4\n2 1 0 4\n1\n2\n3\n4\n\
0 0 0\n1 0 0\n1 1 0\n0 1 0\n$EndNodes\n$Elements\n1 2 1 2\n2 1 2 2\n1 1 2 3\n2 1 3 4\n$EndElements\n";

    pub(crate) fn unit_square_two_triangles() -> Mesh {
        gmsh::parse_msh(TWO_TRIANGLES, "inline").unwrap()
    }

    #[test]
    fn smallest_conforming_mesh() {
        let m = unit_square_two_triangles();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.tagged_facets().count(), 0);
        assert_eq!(m.num_facets(), 5);
        assert!((m.total_measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_conforming_tag_rejected() {
        let m = unit_square_two_triangles();
        let mut verts = m.vertices().to_vec();
        verts.push([0.5, 0.5, 0.0]);
        verts.push([0.5, 1.0, 0.0]);
        let err = Mesh::new(
            2,
            verts,
            m.cells_flat().to_vec(),
            vec![0, 0],
            &[TaggedFacet { vertices: vec![4, 5], tag: 7 }],
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::Validation(_)), "{err}");
    }

    #[test]
    fn degenerate_cell_rejected() {
        let verts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let err = Mesh::new(2, verts, vec![0, 1, 2], vec![0], &[]).unwrap_err();
        assert!(err.to_string().contains("degenerate"));
    }

    #[test]
    fn cells_are_positively_oriented() {
        let verts = vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
        let m = Mesh::new(2, verts, vec![0, 1, 2], vec![0], &[]).unwrap();
        assert!(m.cell_measure(0) > 0.0);
    }

    #[test]
    fn facet_measures() {
        let verts = vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.25, 0.75, 0.0], [0.75, 0.25, 0.0]];
        let m = Mesh::new(2, verts, vec![0, 3, 2, 0, 2, 1], vec![0, 0], &[]).unwrap();
        let f01 = m.find_facet(&[0, 1]).unwrap();
        assert_eq!(m.facet_measure(f01).unwrap(), 1.0);
        let f23 = m.find_facet(&[2, 3]).unwrap();
        assert!((m.facet_measure(f23).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(m.facet_measure(999), Err(MeshError::UnknownFacet(999))));

        let tet = Mesh::new(
            3,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![0, 1, 2, 3],
            vec![0],
            &[],
        )
        .unwrap();
        let f = tet.find_facet(&[0, 1, 2]).unwrap();
        assert_eq!(tet.facet_measure(f).unwrap(), 0.5);
    }

    #[test]
    fn barrier_on_boundary_rejected() {
        let m = unit_square_two_triangles();
        let m = Mesh::new(
            2,
            m.vertices().to_vec(),
            m.cells_flat().to_vec(),
            vec![0, 0],
            &[TaggedFacet { vertices: vec![0, 1], tag: 5 }],
        )
        .unwrap();
        let map: TagMap = [(5, FacetKind::Barrier)].into_iter().collect();
        assert!(m.clone().with_tag_map(&map).is_err());
        let map: TagMap = [(5, FacetKind::BoundaryDirichlet)].into_iter().collect();
        assert!(m.clone().with_tag_map(&map).is_ok());
        assert!(m.with_tag_map(&TagMap::new()).is_err());
    }
}
