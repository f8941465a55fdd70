//! Flux diagnostics on a solved system.

use serde::Serialize;

use super::{LocalTerm, MaterialModel, SparseSystem};
use crate::dofspace::DofMap;
use crate::geometry::{self, Point};
use crate::mesh::{DualBoxGeometry, Mesh};

fn term_flux(t: &LocalTerm, p: &[f64], out: &mut [f64]) {
    for (i, &di) in t.dofs.iter().enumerate() {
        out[di] += t.dofs.iter().enumerate().map(|(j, &dj)| t.matrix[(i, j)] * p[dj]).sum::<f64>();
    }
}

/// Outflow of each sub-box through its cell-internal sub-faces, computed from
/// one-sided cell gradients: `sum_T sum_k -(K grad p_h|_T) . S_ik`.
pub fn cell_outflow(
    mesh: &Mesh,
    dual: &DualBoxGeometry,
    dofmap: &DofMap,
    materials: &MaterialModel,
    p: &[f64],
) -> Vec<f64> {
    let dim = mesh.dim();
    let nv = dim + 1;
    let mut out = vec![0.0; dofmap.dof_count()];
    for c in 0..mesh.num_cells() {
        let Some((_, grads)) = geometry::barycentric_gradients(dim, &mesh.cell_coords(c)) else { continue };
        let dofs = dofmap.cell_dofs(c, nv);
        let mut g: Point = [0.0; 3];
        for (j, &d) in dofs.iter().enumerate() {
            g = geometry::add(&g, &geometry::scale(&grads[j], p[d]));
        }
        let k = materials.region(mesh.cell_region(c)).copied().unwrap_or([[0.0; 3]; 3]);
        let mut kg = [0.0; 3];
        for r in 0..dim {
            kg[r] = (0..dim).map(|s| k[r][s] * g[s]).sum();
        }
        for (i, &d) in dofs.iter().enumerate() {
            for kk in 0..nv {
                if kk != i {
                    out[d] -= geometry::dot(&kg, &dual.sub_face(c, i, kk));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterfaceCheck {
    /// Number of barrier-side dofs compared.
    pub dofs: usize,
    pub max_abs_difference: f64,
    /// Largest flux magnitude among the compared dofs.
    pub scale: f64,
}

impl InterfaceCheck {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_abs_difference / self.scale
        } else {
            self.max_abs_difference
        }
    }
}

/// Compares, at every unconstrained barrier-side dof, the flux through the
/// barrier implied by the sub-box balance (source and boundary terms minus
/// cell and fracture outflow) with the assembled coupling `beta M [[p]]`.
pub fn interface_check(
    mesh: &Mesh,
    dual: &DualBoxGeometry,
    dofmap: &DofMap,
    materials: &MaterialModel,
    system: &SparseSystem,
    p: &[f64],
) -> InterfaceCheck {
    let n = system.n;
    let cell = cell_outflow(mesh, dual, dofmap, materials, p);
    let mut fracture = vec![0.0; n];
    for t in &system.fracture_terms {
        term_flux(t, p, &mut fracture);
    }
    let mut coupling = vec![0.0; n];
    let mut on_barrier = vec![false; n];
    for t in &system.barrier_terms {
        term_flux(t, p, &mut coupling);
        for &d in &t.dofs {
            on_barrier[d] = true;
        }
    }
    for &(d, _) in &system.dirichlet {
        on_barrier[d] = false;
    }
    let mut check = InterfaceCheck { dofs: 0, max_abs_difference: 0.0, scale: 0.0 };
    for d in (0..n).filter(|&d| on_barrier[d]) {
        let implied = system.raw_rhs[d] - cell[d] - fracture[d];
        check.dofs += 1;
        check.max_abs_difference = check.max_abs_difference.max((implied - coupling[d]).abs());
        check.scale = check.scale.max(coupling[d].abs()).max(cell[d].abs());
    }
    check
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationReport {
    /// Inflow through the Dirichlet boundary, `(A p - b)_d` at each constrained dof.
    pub dirichlet_inflow: Vec<(usize, f64)>,
    pub total_dirichlet_inflow: f64,
    pub total_source: f64,
    pub total_neumann: f64,
    /// `|sum of inflows + sources| / scale`.
    pub relative_imbalance: f64,
    /// `|sum over unconstrained rows of (A p - b)| / |b|`.
    pub free_row_residual: f64,
}

/// Global balance of boundary fluxes against sources.
pub fn conservation(system: &SparseSystem, p: &[f64]) -> ConservationReport {
    let mut r = system.raw_matrix.mul(p);
    for (ri, bi) in r.iter_mut().zip(&system.raw_rhs) {
        *ri -= bi;
    }
    let mut constrained = vec![false; system.n];
    for &(d, _) in &system.dirichlet {
        constrained[d] = true;
    }
    let dirichlet_inflow: Vec<(usize, f64)> = system.dirichlet.iter().map(|&(d, _)| (d, r[d])).collect();
    let total_dirichlet_inflow: f64 = dirichlet_inflow.iter().map(|x| x.1).sum();
    let total_source: f64 = system.source_rhs.iter().sum();
    let total_neumann: f64 = system.neumann_rhs.iter().sum();
    let scale = dirichlet_inflow.iter().map(|x| x.1.abs()).sum::<f64>()
        + system.raw_rhs.iter().map(|x| x.abs()).sum::<f64>();
    let imbalance = (total_dirichlet_inflow + total_source + total_neumann).abs();
    let free: f64 = (0..system.n).filter(|&i| !constrained[i]).map(|i| r[i]).sum();
    let bnorm = system.rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    ConservationReport {
        dirichlet_inflow,
        total_dirichlet_inflow,
        total_source,
        total_neumann,
        relative_imbalance: if scale > 0.0 { imbalance / scale } else { imbalance },
        free_row_residual: if bnorm > 0.0 { free.abs() / bnorm } else { free.abs() },
    }
}

fn minus_side_flux<'a>(terms: impl Iterator<Item = &'a LocalTerm>, p: &[f64]) -> f64 {
    terms
        .map(|t| {
            (0..t.dofs.len())
                .step_by(2)
                .map(|i| t.dofs.iter().enumerate().map(|(j, &dj)| t.matrix[(i, j)] * p[dj]).sum::<f64>())
                .sum::<f64>()
        })
        .sum()
}

/// Net flux from the minus to the plus side summed over all barrier facets.
pub fn net_barrier_flux(system: &SparseSystem, p: &[f64]) -> f64 {
    minus_side_flux(system.barrier_terms.iter(), p)
}

/// Net flux through the barrier facets carrying a given tag.
pub fn barrier_flux_by_tag(mesh: &Mesh, system: &SparseSystem, p: &[f64], tag: i32) -> f64 {
    minus_side_flux(system.barrier_terms.iter().filter(|t| mesh.facet_tag(t.facet) == Some(tag)), p)
}
