//! Global system of the box scheme with fractures and barriers.
//!
//! The matrix is the sum of the P1 cell stiffness (resolved through the
//! [`DofMap`](crate::dofspace::DofMap), so each cell only sees the dofs of its
//! own sub-boxes), two-point fracture terms on fracture facets, and the jump
//! coupling on barrier facets. Sources are integrated per sub-box piece,
//! Neumann data per boundary sub-face, and Dirichlet values are eliminated
//! symmetrically.

pub mod flux;
pub mod local;
mod material;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dofspace::{boundary_dofs, DofMap};
use crate::geometry::{self, Point};
use crate::linalg::{SymmetricSparseMatrix, TripletError};
use crate::mesh::{DualBoxGeometry, FacetKind, Mesh};

pub use local::{box_flux_matrix, local_barrier_coupling, local_cell_stiffness, local_fracture_stiffness};
pub use material::{isotropic, BarrierProps, FractureProps, MaterialModel, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum AssemblyError {
    #[error("degenerate cell")]
    DegenerateCell,
    #[error("degenerate facet")]
    DegenerateFacet,
    #[error("barrier facet {facet:?} has the same dofs on both sides")]
    IdenticalSides { facet: Option<usize> },
    #[error("no material for {what} tag {tag}")]
    MissingMaterial { what: &'static str, tag: i32 },
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("Dirichlet value given for dof {dof}, but the system has {n} dofs")]
    DanglingDirichlet { dof: usize, n: usize },
    #[error("no boundary condition for {kind:?} tag {tag}")]
    MissingBoundaryCondition { kind: FacetKind, tag: i32 },
    #[error("cell {cell}: {source}")]
    Cell { cell: usize, source: Box<AssemblyError> },
    #[error("facet {facet}: {source}")]
    Facet { facet: usize, source: Box<AssemblyError> },
    #[error(transparent)]
    Triplet(#[from] TripletError),
}

/// Scalar field over physical space. The second argument is the region tag
/// of the cell the value is requested for, so data can differ on the two
/// sides of a barrier.
pub type Field = Arc<dyn Fn(&Point, i32) -> f64 + Send + Sync>;

pub fn constant_field(v: f64) -> Field {
    Arc::new(move |_, _| v)
}

/// Wraps a region-independent function.
pub fn field(f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Field {
    Arc::new(move |p, _| f(p))
}

/// Boundary data keyed by facet tag, plus optional explicit dof constraints.
///
/// `g_N` follows the outflow convention `-(K grad p) . n = g_N`, so a positive
/// value removes fluid. Untagged boundary facets are no-flow.
#[derive(Clone, Default)]
pub struct BoundaryConditions {
    pub dirichlet: BTreeMap<i32, Field>,
    pub neumann: BTreeMap<i32, Field>,
    pub fixed_dofs: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssemblyMode {
    #[default]
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyOptions {
    pub mode: AssemblyMode,
    /// Fix dof 0 to zero when no Dirichlet value is present.
    pub pin_if_pure_neumann: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { mode: AssemblyMode::Sequential, pin_if_pure_neumann: true }
    }
}

/// Facet-local contribution kept for flux post-processing.
#[derive(Debug, Clone)]
pub struct LocalTerm {
    pub facet: usize,
    pub dofs: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

/// Assembled system with the data needed for balance checks.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub n: usize,
    /// Matrix after symmetric Dirichlet elimination.
    pub matrix: SymmetricSparseMatrix,
    pub rhs: Vec<f64>,
    pub dirichlet: Vec<(usize, f64)>,
    /// Set when the system had no Dirichlet data and dof 0 was fixed to zero.
    pub pinned: Option<usize>,
    /// Matrix and right-hand side before Dirichlet elimination.
    pub raw_matrix: SymmetricSparseMatrix,
    pub raw_rhs: Vec<f64>,
    pub source_rhs: Vec<f64>,
    pub neumann_rhs: Vec<f64>,
    pub fracture_terms: Vec<LocalTerm>,
    pub barrier_terms: Vec<LocalTerm>,
}

type Triplets = Vec<(usize, usize, f64)>;

fn push_local(out: &mut Triplets, dofs: &[usize], a: &DMatrix<f64>) {
    for (i, &di) in dofs.iter().enumerate() {
        for (j, &dj) in dofs.iter().enumerate() {
            out.push((di, dj, a[(i, j)]));
        }
    }
}

fn cell_triplets(
    mesh: &Mesh,
    dofmap: &DofMap,
    materials: &MaterialModel,
    c: usize,
) -> Result<Triplets, AssemblyError> {
    let wrap = |e| AssemblyError::Cell { cell: c, source: Box::new(e) };
    let k = materials.region(mesh.cell_region(c)).map_err(wrap)?;
    let a = local_cell_stiffness(mesh.dim(), &mesh.cell_coords(c), k).map_err(wrap)?;
    let mut out = Vec::with_capacity(a.len());
    push_local(&mut out, dofmap.cell_dofs(c, mesh.dim() + 1), &a);
    Ok(out)
}

/// Dofs of the facet vertices as seen from one adjacent cell.
fn facet_dofs_from(mesh: &Mesh, dofmap: &DofMap, f: usize, c: usize) -> Vec<usize> {
    mesh.facet(f)
        .iter()
        .map(|&v| dofmap.cell_dof(mesh, c, mesh.local_index(c, v).expect("facet vertex in adjacent cell")))
        .collect()
}

fn fracture_term(mesh: &Mesh, dofmap: &DofMap, materials: &MaterialModel, f: usize) -> Result<LocalTerm, AssemblyError> {
    let wrap = |e| AssemblyError::Facet { facet: f, source: Box::new(e) };
    let tag = mesh.facet_tag(f).expect("fracture facets are tagged");
    let props = materials.fracture(tag).map_err(wrap)?;
    let matrix = local_fracture_stiffness(mesh.dim(), &mesh.facet_coords(f), props.aperture, props.permeability)
        .map_err(wrap)?;
    let (c, _) = mesh.facet_cells(f);
    Ok(LocalTerm { facet: f, dofs: facet_dofs_from(mesh, dofmap, f, c), matrix })
}

/// Returns `None` for a facet whose sides share every dof (a barrier segment
/// between two tips), which carries no jump.
fn barrier_term(
    mesh: &Mesh,
    dofmap: &DofMap,
    materials: &MaterialModel,
    f: usize,
) -> Result<Option<LocalTerm>, AssemblyError> {
    let wrap = |e| AssemblyError::Facet { facet: f, source: Box::new(e) };
    let tag = mesh.facet_tag(f).expect("barrier facets are tagged");
    let props = materials.barrier(tag).map_err(wrap)?;
    let (c0, c1) = mesh.facet_cells(f);
    let c1 = c1.expect("barrier facets are interior");
    let minus = facet_dofs_from(mesh, dofmap, f, c0);
    let plus = facet_dofs_from(mesh, dofmap, f, c1);
    if minus == plus {
        if mesh.facet(f).iter().all(|&v| dofmap.multiplicity(v) == 1) {
            return Ok(None);
        }
        return Err(AssemblyError::IdenticalSides { facet: Some(f) });
    }
    let matrix = local_barrier_coupling(
        mesh.dim(),
        &mesh.facet_coords(f),
        props.aperture,
        props.normal_permeability,
        &minus,
        &plus,
    )
    .map_err(wrap)?;
    let dofs = minus.iter().zip(&plus).flat_map(|(&m, &p)| [m, p]).collect();
    Ok(Some(LocalTerm { facet: f, dofs, matrix }))
}

/// Source contribution `q(centroid of B_i ∩ T) |T|/(n+1)` per sub-box piece.
pub fn source_rhs(mesh: &Mesh, dual: &DualBoxGeometry, dofmap: &DofMap, source: &Field) -> Vec<f64> {
    let nv = mesh.dim() + 1;
    let w = geometry::vertex_region_barycentric(nv, 0);
    let (big, small) = (w[0], w[1]);
    let mut rhs = vec![0.0; dofmap.dof_count()];
    for c in 0..mesh.num_cells() {
        let x = mesh.cell_coords(c);
        let sum = x.iter().fold([0.0; 3], |acc, p| geometry::add(&acc, p));
        let vol = dual.sub_volume(c);
        let region = mesh.cell_region(c);
        for (i, &d) in dofmap.cell_dofs(c, nv).iter().enumerate() {
            let p = geometry::add(&geometry::scale(&x[i], big - small), &geometry::scale(&sum, small));
            rhs[d] += source(&p, region) * vol;
        }
    }
    rhs
}

/// Neumann contribution `-g_N(centroid of F_i) |F|/n` for every vertex part
/// `F_i` of each Neumann facet, added to the dof of the adjacent sub-box.
pub fn apply_neumann(
    mesh: &Mesh,
    dual: &DualBoxGeometry,
    dofmap: &DofMap,
    bcs: &BoundaryConditions,
) -> Result<Vec<f64>, AssemblyError> {
    let dim = mesh.dim();
    let w = geometry::vertex_region_barycentric(dim, 0);
    let (big, small) = (w[0], if dim > 1 { w[1] } else { 0.0 });
    let mut rhs = vec![0.0; dofmap.dof_count()];
    for f in mesh.facets_of_kind(FacetKind::BoundaryNeumann) {
        let tag = mesh.facet_tag(f).expect("boundary facets of a kind are tagged");
        let g = bcs
            .neumann
            .get(&tag)
            .ok_or(AssemblyError::MissingBoundaryCondition { kind: FacetKind::BoundaryNeumann, tag })?;
        let x = mesh.facet_coords(f);
        let sum = x.iter().fold([0.0; 3], |acc, p| geometry::add(&acc, p));
        let part = dual.boundary_sub_face(f);
        let (c, _) = mesh.facet_cells(f);
        let region = mesh.cell_region(c);
        for (i, d) in facet_dofs_from(mesh, dofmap, f, c).into_iter().enumerate() {
            let p = geometry::add(&geometry::scale(&x[i], big - small), &geometry::scale(&sum, small));
            rhs[d] -= g(&p, region) * part;
        }
    }
    Ok(rhs)
}

/// Dirichlet values at the boundary dofs, one entry per dof. Where facets of
/// several tags meet, the smallest tag wins.
pub fn dirichlet_values(
    mesh: &Mesh,
    dofmap: &DofMap,
    bcs: &BoundaryConditions,
) -> Result<Vec<(usize, f64)>, AssemblyError> {
    let n = dofmap.dof_count();
    let mut value: Vec<Option<f64>> = vec![None; n];
    let mut facets: Vec<usize> = mesh.facets_of_kind(FacetKind::BoundaryDirichlet).collect();
    facets.sort_by_key(|&f| (mesh.facet_tag(f), f));
    for f in facets {
        let tag = mesh.facet_tag(f).expect("boundary facets of a kind are tagged");
        let g = bcs
            .dirichlet
            .get(&tag)
            .ok_or(AssemblyError::MissingBoundaryCondition { kind: FacetKind::BoundaryDirichlet, tag })?;
        let (c, _) = mesh.facet_cells(f);
        let region = mesh.cell_region(c);
        for (&v, d) in mesh.facet(f).iter().zip(facet_dofs_from(mesh, dofmap, f, c)) {
            if value[d].is_none() {
                value[d] = Some(g(mesh.vertex(v), region));
            }
        }
    }
    for &(d, g) in &bcs.fixed_dofs {
        if d >= n {
            return Err(AssemblyError::DanglingDirichlet { dof: d, n });
        }
        value[d] = Some(g);
    }
    debug_assert!(boundary_dofs(mesh, dofmap, FacetKind::BoundaryDirichlet)
        .iter()
        .all(|b| value[b.dof].is_some()));
    Ok(value.into_iter().enumerate().filter_map(|(d, v)| v.map(|v| (d, v))).collect())
}

/// Assembles the global system.
pub fn assemble_system(
    mesh: &Mesh,
    dual: &DualBoxGeometry,
    dofmap: &DofMap,
    materials: &MaterialModel,
    bcs: &BoundaryConditions,
    source: Option<&Field>,
    options: AssemblyOptions,
) -> Result<SparseSystem, AssemblyError> {
    materials.validate(mesh.dim())?;
    let n = dofmap.dof_count();
    let cells: Vec<Triplets> = match options.mode {
        AssemblyMode::Sequential => (0..mesh.num_cells())
            .map(|c| cell_triplets(mesh, dofmap, materials, c))
            .collect::<Result<_, _>>()?,
        AssemblyMode::Parallel => (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| cell_triplets(mesh, dofmap, materials, c))
            .collect::<Result<_, _>>()?,
    };
    let mut triplets: Triplets = cells.into_iter().flatten().collect();

    let fracture_terms: Vec<LocalTerm> = mesh
        .facets_of_kind(FacetKind::Fracture)
        .map(|f| fracture_term(mesh, dofmap, materials, f))
        .collect::<Result<_, _>>()?;
    let mut barrier_terms = Vec::new();
    for f in mesh.facets_of_kind(FacetKind::Barrier) {
        if let Some(t) = barrier_term(mesh, dofmap, materials, f)? {
            barrier_terms.push(t);
        }
    }
    for t in fracture_terms.iter().chain(&barrier_terms) {
        push_local(&mut triplets, &t.dofs, &t.matrix);
    }
    let raw_matrix = SymmetricSparseMatrix::from_triplets(n, &triplets)?;

    let source_rhs = match source {
        Some(q) => source_rhs(mesh, dual, dofmap, q),
        None => vec![0.0; n],
    };
    let neumann_rhs = apply_neumann(mesh, dual, dofmap, bcs)?;
    let raw_rhs: Vec<f64> = source_rhs.iter().zip(&neumann_rhs).map(|(a, b)| a + b).collect();

    let mut dirichlet = dirichlet_values(mesh, dofmap, bcs)?;
    let mut pinned = None;
    if dirichlet.is_empty() && options.pin_if_pure_neumann && n > 0 {
        dirichlet.push((0, 0.0));
        pinned = Some(0);
    }
    let mut matrix = raw_matrix.clone();
    let mut rhs = raw_rhs.clone();
    matrix.apply_dirichlet(&mut rhs, &dirichlet);
    Ok(SparseSystem {
        n,
        matrix,
        rhs,
        dirichlet,
        pinned,
        raw_matrix,
        raw_rhs,
        source_rhs,
        neumann_rhs,
        fracture_terms,
        barrier_terms,
    })
}
