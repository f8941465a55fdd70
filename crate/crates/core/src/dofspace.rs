//! Degrees of freedom of the broken P1 space.
//!
//! Every vertex carries one unknown per connected component of its cell fan,
//! where two cells around the vertex are connected when they share a facet
//! through the vertex that is not a barrier. Vertices away from barriers and
//! barrier tips therefore keep a single unknown, while a vertex on a barrier
//! gets one unknown per side.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::mesh::{FacetKind, Mesh};

#[derive(Debug, thiserror::Error)]
pub enum DofError {
    #[error("inconsistent fracture-barrier intersection at vertex {vertex} {position:?}: a fracture facet separates two sub-boxes")]
    InconsistentIntersection { vertex: usize, position: [f64; 3] },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Treatment of vertices where fractures and barriers meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntersectionPolicy {
    /// Pressure is continuous at the crossing: the vertex keeps one unknown.
    #[default]
    #[serde(alias = "fracture_penetrates")]
    FracturePenetrates,
    /// The barrier splits the crossing like any other barrier vertex.
    #[serde(alias = "barrier_cuts")]
    BarrierCuts,
}

impl std::str::FromStr for IntersectionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fracture-penetrates" | "fracture_penetrates" => Ok(Self::FracturePenetrates),
            "barrier-cuts" | "barrier_cuts" => Ok(Self::BarrierCuts),
            other => Err(format!("unknown intersection policy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexClass {
    Plain,
    BarrierInterior,
    BarrierTip,
    FractureBarrierIntersection,
}

impl VertexClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VertexClass::Plain => "plain",
            VertexClass::BarrierInterior => "barrier_interior",
            VertexClass::BarrierTip => "barrier_tip",
            VertexClass::FractureBarrierIntersection => "fracture_barrier_intersection",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    policy: IntersectionPolicy,
    dof_count: usize,
    vertex_offsets: Vec<usize>,
    cell_dofs: Vec<usize>,
    classes: Vec<VertexClass>,
    dof_vertex: Vec<usize>,
}

/// A boundary dof together with the vertex it sits on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryDof {
    pub dof: usize,
    pub vertex: usize,
    pub position: [f64; 3],
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Builds the dof map of the broken space for the given intersection policy.
pub fn build_dof_map(mesh: &Mesh, policy: IntersectionPolicy) -> Result<DofMap, DofError> {
    let dim = mesh.dim();
    let nv = dim + 1;
    let mut touches_barrier = vec![false; mesh.num_vertices()];
    let mut touches_fracture = vec![false; mesh.num_vertices()];
    for f in 0..mesh.num_facets() {
        match mesh.facet_kind(f) {
            Some(FacetKind::Barrier) => mesh.facet(f).iter().for_each(|&v| touches_barrier[v] = true),
            Some(FacetKind::Fracture) => mesh.facet(f).iter().for_each(|&v| touches_fracture[v] = true),
            _ => {}
        }
    }

    let mut cell_dofs = vec![usize::MAX; mesh.num_cells() * nv];
    let mut classes = Vec::with_capacity(mesh.num_vertices());
    let mut vertex_offsets = Vec::with_capacity(mesh.num_vertices() + 1);
    let mut dof_vertex = Vec::with_capacity(mesh.num_vertices());
    let mut next = 0usize;
    let mut parent = Vec::new();
    let mut root_dof = Vec::new();

    for v in 0..mesh.num_vertices() {
        vertex_offsets.push(next);
        let fan = mesh.vertex_cells(v);
        let local = |c: usize| mesh.local_index(c, v).expect("fan cell contains vertex");
        let collapse = !touches_barrier[v]
            || (touches_fracture[v] && policy == IntersectionPolicy::FracturePenetrates);
        if collapse {
            for &c in fan {
                cell_dofs[c * nv + local(c)] = next;
            }
            dof_vertex.push(v);
            next += 1;
            classes.push(match (touches_barrier[v], touches_fracture[v]) {
                (false, _) => VertexClass::Plain,
                (true, _) => VertexClass::FractureBarrierIntersection,
            });
            continue;
        }

        parent.clear();
        parent.extend(0..fan.len());
        let pos = |c: usize| fan.binary_search(&c).expect("neighbor shares the vertex");
        for (a, &c) in fan.iter().enumerate() {
            let lv = local(c);
            for k in 0..nv {
                if k == lv {
                    continue;
                }
                let f = mesh.cell_facet(c, k);
                if mesh.facet_kind(f) == Some(FacetKind::Barrier) {
                    continue;
                }
                if let Some(n) = mesh.neighbor(c, k) {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, pos(n)));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        root_dof.clear();
        root_dof.resize(fan.len(), usize::MAX);
        let start = next;
        for (a, &c) in fan.iter().enumerate() {
            let r = find(&mut parent, a);
            if root_dof[r] == usize::MAX {
                root_dof[r] = next;
                dof_vertex.push(v);
                next += 1;
            }
            cell_dofs[c * nv + local(c)] = root_dof[r];
        }
        let components = next - start;

        if touches_fracture[v] {
            for &c in fan {
                for k in 0..nv {
                    if k == local(c) {
                        continue;
                    }
                    let f = mesh.cell_facet(c, k);
                    if mesh.facet_kind(f) != Some(FacetKind::Fracture) {
                        continue;
                    }
                    let (c0, c1) = mesh.facet_cells(f);
                    if let Some(c1) = c1 {
                        if cell_dofs[c0 * nv + local(c0)] != cell_dofs[c1 * nv + local(c1)] {
                            return Err(DofError::InconsistentIntersection { vertex: v, position: *mesh.vertex(v) });
                        }
                    }
                }
            }
            classes.push(VertexClass::FractureBarrierIntersection);
        } else if components == 1 {
            classes.push(VertexClass::BarrierTip);
        } else {
            classes.push(VertexClass::BarrierInterior);
        }
    }
    vertex_offsets.push(next);
    Ok(DofMap { policy, dof_count: next, vertex_offsets, cell_dofs, classes, dof_vertex })
}

impl DofMap {
    pub fn policy(&self) -> IntersectionPolicy {
        self.policy
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn num_vertices(&self) -> usize {
        self.classes.len()
    }

    /// Dofs of vertex `v`, one per sub-box component (consecutive indices).
    pub fn vertex_dofs(&self, v: usize) -> std::ops::Range<usize> {
        self.vertex_offsets[v]..self.vertex_offsets[v + 1]
    }

    pub fn multiplicity(&self, v: usize) -> usize {
        self.vertex_offsets[v + 1] - self.vertex_offsets[v]
    }

    pub fn class(&self, v: usize) -> VertexClass {
        self.classes[v]
    }

    /// Dof used by cell `c` for its local vertex `k`.
    pub fn cell_dof(&self, mesh: &Mesh, c: usize, k: usize) -> usize {
        self.cell_dofs[c * (mesh.dim() + 1) + k]
    }

    /// Dofs of all local vertices of cell `c`.
    pub fn cell_dofs(&self, c: usize, nv: usize) -> &[usize] {
        &self.cell_dofs[c * nv..(c + 1) * nv]
    }

    pub fn dof_vertex(&self, d: usize) -> usize {
        self.dof_vertex[d]
    }

    /// Number of vertices in each class, in the order plain, interior, tip, intersection.
    pub fn class_counts(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for c in &self.classes {
            out[*c as usize] += 1;
        }
        out
    }

    /// Per-vertex diagnostic table: `vertex,x,y[,z],n_dofs,class`.
    pub fn write_csv(&self, mesh: &Mesh, out: &mut impl Write) -> Result<(), DofError> {
        let dim = mesh.dim();
        if dim == 2 {
            writeln!(out, "vertex,x,y,n_dofs,class")?;
        } else {
            writeln!(out, "vertex,x,y,z,n_dofs,class")?;
        }
        for v in 0..self.num_vertices() {
            let p = mesh.vertex(v);
            write!(out, "{v}")?;
            for x in &p[..dim] {
                write!(out, ",{x}")?;
            }
            writeln!(out, ",{},{}", self.multiplicity(v), self.class(v).as_str())?;
        }
        Ok(())
    }
}

/// Dofs on boundary facets of the given kind. A vertex contributes the dof of
/// each component adjacent to such a facet, so a barrier reaching the boundary
/// contributes both sides.
pub fn boundary_dofs(mesh: &Mesh, dofmap: &DofMap, kind: FacetKind) -> Vec<BoundaryDof> {
    let mut out: Vec<BoundaryDof> = Vec::new();
    for f in mesh.facets_of_kind(kind) {
        let (c, _) = mesh.facet_cells(f);
        for &v in mesh.facet(f) {
            let k = mesh.local_index(c, v).expect("facet vertex in its cell");
            out.push(BoundaryDof { dof: dofmap.cell_dof(mesh, c, k), vertex: v, position: *mesh.vertex(v) });
        }
    }
    out.sort_by_key(|b| b.dof);
    out.dedup_by_key(|b| b.dof);
    out
}

/// Number of regions cut off from the domain boundary by barriers.
///
/// Cells are grouped by adjacency through non-barrier facets; groups without
/// any boundary facet are enclosed. With impermeable barriers the pressure in
/// such a region is undetermined.
pub fn enclosed_compartments(mesh: &Mesh) -> usize {
    let n = mesh.num_cells();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut on_boundary = vec![false; n];
    for f in 0..mesh.num_facets() {
        match mesh.facet_cells(f) {
            (c, None) => on_boundary[c] = true,
            (a, Some(b)) if mesh.facet_kind(f) != Some(FacetKind::Barrier) => {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
            _ => {}
        }
    }
    let mut root_touches = vec![false; n];
    for c in 0..n {
        let r = find(&mut parent, c);
        root_touches[r] |= on_boundary[c];
    }
    (0..n).filter(|&c| find(&mut parent, c) == c && !root_touches[c]).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Feature, GridPattern, Mesh, StructuredGrid, TagMap, TaggedFacet};
    use proptest::prelude::*;

    fn tag_map(pairs: &[(i32, FacetKind)]) -> TagMap {
        pairs.iter().copied().collect()
    }

    /// Independent component count: flood fill over the fan comparing vertex sets.
    fn flood_fill_components(mesh: &Mesh, v: usize) -> usize {
        let fan = mesh.vertex_cells(v).to_vec();
        let dim = mesh.dim();
        let adjacent = |a: usize, b: usize| {
            let shared: Vec<usize> = mesh.cell(a).iter().copied().filter(|x| mesh.cell(b).contains(x)).collect();
            if shared.len() != dim || !shared.contains(&v) {
                return false;
            }
            let f = mesh.find_facet(&shared).unwrap();
            mesh.facet_kind(f) != Some(FacetKind::Barrier)
        };
        let mut seen = vec![false; fan.len()];
        let mut count = 0;
        for s in 0..fan.len() {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(i) = stack.pop() {
                for j in 0..fan.len() {
                    if !seen[j] && adjacent(fan[i], fan[j]) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }

    /// Six triangles around vertex 0 at the origin, with chosen spokes tagged.
    fn hexagon_fan(tags: &[(usize, i32)], map: &TagMap) -> Mesh {
        let mut verts = vec![[0.0, 0.0, 0.0]];
        for k in 0..6 {
            let t = std::f64::consts::PI / 3.0 * k as f64;
            verts.push([t.cos(), t.sin(), 0.0]);
        }
        let mut cells = Vec::new();
        for k in 0..6 {
            cells.extend_from_slice(&[0, 1 + k, 1 + (k + 1) % 6]);
        }
        let tagged: Vec<TaggedFacet> =
            tags.iter().map(|&(spoke, tag)| TaggedFacet { vertices: vec![0, spoke], tag }).collect();
        Mesh::new(2, verts, cells, vec![1; 6], &tagged).unwrap().with_tag_map(map).unwrap()
    }

    #[test]
    fn three_sub_boxes_at_a_branching_vertex() {
        let map = tag_map(&[(5, FacetKind::Barrier)]);
        // two polylines through the centre: spokes 1-4 form one line, spoke 6 branches off
        let m = hexagon_fan(&[(1, 5), (4, 5), (6, 5)], &map);
        let d = build_dof_map(&m, IntersectionPolicy::FracturePenetrates).unwrap();
        assert_eq!(d.multiplicity(0), 3);
        assert_eq!(d.class(0), VertexClass::BarrierInterior);
    }

    #[test]
    fn straight_barrier_gives_two_dofs() {
        let map = tag_map(&[(5, FacetKind::Barrier)]);
        let m = hexagon_fan(&[(1, 5), (4, 5)], &map);
        let d = build_dof_map(&m, IntersectionPolicy::FracturePenetrates).unwrap();
        assert_eq!(d.multiplicity(0), 2);
        // the rim vertices 1 and 4 sit on the domain boundary, where the barrier splits them too
        assert_eq!(d.multiplicity(1), 2);
        assert_eq!(d.dof_count(), 10);
    }

    #[test]
    fn tip_keeps_one_dof() {
        let map = tag_map(&[(5, FacetKind::Barrier)]);
        let m = hexagon_fan(&[(1, 5)], &map);
        let d = build_dof_map(&m, IntersectionPolicy::FracturePenetrates).unwrap();
        assert_eq!(d.multiplicity(0), 1);
        assert_eq!(d.class(0), VertexClass::BarrierTip);
        assert_eq!(d.class(1), VertexClass::BarrierInterior);
    }

    #[test]
    fn crossing_follows_policy() {
        let map = tag_map(&[(5, FacetKind::Barrier), (6, FacetKind::Fracture)]);
        let m = hexagon_fan(&[(1, 5), (4, 5), (2, 6), (5, 6)], &map);
        let pen = build_dof_map(&m, IntersectionPolicy::FracturePenetrates).unwrap();
        assert_eq!(pen.multiplicity(0), 1);
        assert_eq!(pen.class(0), VertexClass::FractureBarrierIntersection);
        let cut = build_dof_map(&m, IntersectionPolicy::BarrierCuts).unwrap();
        assert_eq!(cut.multiplicity(0), 2);
        assert_eq!(cut.class(0), VertexClass::FractureBarrierIntersection);
    }

    #[test]
    fn fracture_facets_stay_within_one_sub_box() {
        let map = tag_map(&[(5, FacetKind::Barrier), (6, FacetKind::Fracture)]);
        let m = hexagon_fan(&[(1, 5), (3, 5), (2, 6), (5, 6)], &map);
        let cut = build_dof_map(&m, IntersectionPolicy::BarrierCuts).unwrap();
        assert_eq!(cut.multiplicity(0), 2);
        for f in m.facets_of_kind(FacetKind::Fracture) {
            let (a, b) = m.facet_cells(f);
            let b = b.unwrap();
            assert_eq!(cut.cell_dof(&m, a, m.local_index(a, 0).unwrap()), cut.cell_dof(&m, b, m.local_index(b, 0).unwrap()));
        }
    }

    #[test]
    fn no_barriers_gives_one_dof_per_vertex() {
        let m = StructuredGrid::unit_square(3, GridPattern::Crossed).build().unwrap();
        let m = m.with_tag_map(&tag_map(&[(1, FacetKind::BoundaryDirichlet), (2, FacetKind::BoundaryDirichlet), (3, FacetKind::BoundaryNeumann), (4, FacetKind::BoundaryNeumann)])).unwrap();
        let d = build_dof_map(&m, IntersectionPolicy::BarrierCuts).unwrap();
        assert_eq!(d.dof_count(), m.num_vertices());
        assert!((0..m.num_vertices()).all(|v| d.class(v) == VertexClass::Plain && d.vertex_dofs(v) == (v..v + 1)));
        let left: Vec<_> = boundary_dofs(&m, &d, FacetKind::BoundaryDirichlet);
        assert_eq!(left.len(), 8);
    }

    #[test]
    fn barrier_ending_on_dirichlet_boundary_marks_both_dofs() {
        // 2x2 square of four triangles around the centre; barrier from the centre to the left edge midpoint
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.5, 0.0],
            [0.5, 0.5, 0.0],
        ];
        let cells = vec![0, 1, 5, 1, 2, 5, 2, 3, 5, 3, 4, 5, 4, 0, 5];
        let tagged = [
            TaggedFacet { vertices: vec![4, 5], tag: 5 },
            TaggedFacet { vertices: vec![0, 4], tag: 1 },
            TaggedFacet { vertices: vec![4, 3], tag: 1 },
        ];
        let map = tag_map(&[(5, FacetKind::Barrier), (1, FacetKind::BoundaryDirichlet)]);
        let m = Mesh::new(2, verts, cells, vec![1; 5], &tagged).unwrap().with_tag_map(&map).unwrap();
        let d = build_dof_map(&m, IntersectionPolicy::FracturePenetrates).unwrap();
        assert_eq!(d.multiplicity(4), 2);
        assert_eq!(d.class(5), VertexClass::BarrierTip);
        let dir = boundary_dofs(&m, &d, FacetKind::BoundaryDirichlet);
        let at4: Vec<_> = dir.iter().filter(|b| b.vertex == 4).collect();
        assert_eq!(at4.len(), 2);
        assert_eq!(dir.len(), 4);
    }

    #[test]
    fn enclosed_square_is_detected() {
        let mut g = StructuredGrid::unit_square(4, GridPattern::Crossed);
        for (p, q) in [([0.25, 0.25], [0.75, 0.25]), ([0.75, 0.25], [0.75, 0.75]), ([0.75, 0.75], [0.25, 0.75]), ([0.25, 0.75], [0.25, 0.25])] {
            g.features.push(Feature::segment(10, p, q));
        }
        let map = tag_map(&[(10, FacetKind::Barrier), (1, FacetKind::BoundaryDirichlet), (2, FacetKind::BoundaryDirichlet), (3, FacetKind::BoundaryNeumann), (4, FacetKind::BoundaryNeumann)]);
        let m = g.build().unwrap().with_tag_map(&map).unwrap();
        assert_eq!(enclosed_compartments(&m), 1);
        let d = build_dof_map(&m, IntersectionPolicy::FracturePenetrates).unwrap();
        // corners of the loop are interior (two sides), none are tips
        assert_eq!(d.class_counts()[2], 0);
        assert_eq!(d.dof_count(), m.num_vertices() + 8);
    }

    #[test]
    fn csv_dump() {
        let map = tag_map(&[(5, FacetKind::Barrier)]);
        let m = hexagon_fan(&[(1, 5), (4, 5)], &map);
        let d = build_dof_map(&m, IntersectionPolicy::FracturePenetrates).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("vertex,x,y,n_dofs,class\n0,0,0,2,barrier_interior\n"));
        assert_eq!(text.lines().count(), 8);
    }

    fn random_barrier_mesh(seed: u64, n: usize, mask: u32, three: bool) -> Mesh {
        let mut g = if three { StructuredGrid::unit_cube(n) } else { StructuredGrid::unit_square(n, GridPattern::Crossed) };
        g.jitter = 0.15;
        g.seed = seed;
        let mut map = TagMap::new();
        for t in 1..=6 {
            map.insert(t, FacetKind::BoundaryNeumann);
        }
        let h = 1.0 / n as f64;
        let mut k = 0;
        for i in 1..n {
            let x = i as f64 * h;
            for (lo, hi) in [(0.0, 0.5), (0.5, 1.0), (0.25, 0.75)] {
                k += 1;
                // one range per grid line keeps features disjoint
                if mask & (1 << (k % 32)) == 0 || k % 3 != (mask as usize >> (i % 8)) % 3 {
                    continue;
                }
                let lo = (lo * n as f64).round() * h;
                let hi = (hi * n as f64).round() * h;
                if hi <= lo {
                    continue;
                }
                let tag = 10 + k as i32;
                if three {
                    g.features.push(Feature::plane_box(tag, vec![x, lo, lo], vec![x, hi, hi]));
                } else if k % 2 == 0 {
                    g.features.push(Feature::segment(tag, [x, lo], [x, hi]));
                } else {
                    g.features.push(Feature::segment(tag, [lo, x], [hi, x]));
                }
                map.insert(tag, FacetKind::Barrier);
            }
        }
        g.build().unwrap().with_tag_map(&map).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn components_match_flood_fill(seed in 0u64..500, mask in any::<u32>(), three in any::<bool>()) {
            let mesh = random_barrier_mesh(seed, if three { 2 } else { 4 }, mask, three);
            prop_assume!(mesh.num_cells() <= 100 || three);
            let d = build_dof_map(&mesh, IntersectionPolicy::FracturePenetrates).unwrap();
            let mut total = 0;
            for v in 0..mesh.num_vertices() {
                let comps = flood_fill_components(&mesh, v);
                prop_assert_eq!(d.multiplicity(v), comps);
                total += comps;
                for &c in mesh.vertex_cells(v) {
                    let k = mesh.local_index(c, v).unwrap();
                    prop_assert!(d.vertex_dofs(v).contains(&d.cell_dof(&mesh, c, k)));
                }
            }
            prop_assert_eq!(d.dof_count(), total);
            let again = build_dof_map(&mesh, IntersectionPolicy::FracturePenetrates).unwrap();
            prop_assert_eq!(&d, &again);
        }

        #[test]
        fn shared_non_barrier_facet_means_shared_dof(seed in 0u64..500, mask in any::<u32>()) {
            let mesh = random_barrier_mesh(seed, 5, mask, false);
            let d = build_dof_map(&mesh, IntersectionPolicy::FracturePenetrates).unwrap();
            for f in 0..mesh.num_facets() {
                let (a, Some(b)) = mesh.facet_cells(f) else { continue };
                let barrier = mesh.facet_kind(f) == Some(FacetKind::Barrier);
                for &v in mesh.facet(f) {
                    let da = d.cell_dof(&mesh, a, mesh.local_index(a, v).unwrap());
                    let db = d.cell_dof(&mesh, b, mesh.local_index(b, v).unwrap());
                    if !barrier {
                        prop_assert_eq!(da, db);
                    } else if d.multiplicity(v) >= 2 {
                        prop_assert_ne!(da, db);
                    }
                }
            }
        }
    }
}
