use nalgebra::DMatrix;

use super::material::Tensor;
use super::AssemblyError;
use crate::geometry::{self, Point};

fn apply(k: &Tensor, g: &Point) -> Point {
    [
        k[0][0] * g[0] + k[0][1] * g[1] + k[0][2] * g[2],
        k[1][0] * g[0] + k[1][1] * g[1] + k[1][2] * g[2],
        k[2][0] * g[0] + k[2][1] * g[1] + k[2][2] * g[2],
    ]
}

fn tensor_for(dim: usize, k: &Tensor) -> Tensor {
    let mut t = *k;
    if dim == 2 {
        for i in 0..3 {
            t[2][i] = 0.0;
            t[i][2] = 0.0;
        }
    }
    t
}

/// P1 stiffness `|T| (grad phi_i)^T K grad phi_j` of a simplex.
///
/// For the barycentric dual this coincides with the box flux matrix, see
/// [`box_flux_matrix`].
pub fn local_cell_stiffness(dim: usize, coords: &[Point], k: &Tensor) -> Result<DMatrix<f64>, AssemblyError> {
    let (measure, grads) = geometry::barycentric_gradients(dim, coords).ok_or(AssemblyError::DegenerateCell)?;
    let k = tensor_for(dim, k);
    let n = dim + 1;
    let kg: Vec<Point> = grads.iter().map(|g| apply(&k, g)).collect();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = measure * geometry::dot(&grads[i], &kg[j]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(a)
}

/// Box flux matrix from explicit sub-face integration:
/// `A_ij = sum_k -(K grad phi_j) . S_{i->k}` over the interfaces of vertex `i` inside the cell.
pub fn box_flux_matrix(dim: usize, coords: &[Point], k: &Tensor) -> Result<DMatrix<f64>, AssemblyError> {
    let (_, grads) = geometry::barycentric_gradients(dim, coords).ok_or(AssemblyError::DegenerateCell)?;
    let k = tensor_for(dim, k);
    let n = dim + 1;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for kk in 0..n {
            if kk == i {
                continue;
            }
            let s = geometry::subface_vector(dim, coords, i, kk);
            for j in 0..n {
                a[(i, j)] -= geometry::dot(&apply(&k, &grads[j]), &s);
            }
        }
    }
    Ok(a)
}

/// Tangential fracture term on a facet: `(a k_f / L) [[1,-1],[-1,1]]` for an
/// edge, `a k_f` times the in-plane P1 stiffness for a triangle.
pub fn local_fracture_stiffness(
    dim: usize,
    facet: &[Point],
    aperture: f64,
    permeability: f64,
) -> Result<DMatrix<f64>, AssemblyError> {
    let t = aperture * permeability;
    if dim == 2 {
        let len = geometry::distance(&facet[0], &facet[1]);
        if !(len > 0.0) {
            return Err(AssemblyError::DegenerateFacet);
        }
        let c = t / len;
        Ok(DMatrix::from_row_slice(2, 2, &[c, -c, -c, c]))
    } else {
        let e1 = geometry::sub(&facet[1], &facet[0]);
        let e2 = geometry::sub(&facet[2], &facet[0]);
        let l1 = geometry::norm(&e1);
        if !(l1 > 0.0) {
            return Err(AssemblyError::DegenerateFacet);
        }
        let u = geometry::scale(&e1, 1.0 / l1);
        let n = geometry::cross(&e1, &e2);
        let nn = geometry::norm(&n);
        if !(nn > 0.0) {
            return Err(AssemblyError::DegenerateFacet);
        }
        let w = geometry::cross(&geometry::scale(&n, 1.0 / nn), &u);
        let flat: Vec<Point> = facet
            .iter()
            .map(|p| {
                let d = geometry::sub(p, &facet[0]);
                [geometry::dot(&d, &u), geometry::dot(&d, &w), 0.0]
            })
            .collect();
        local_cell_stiffness(2, &flat, &super::material::isotropic(t))
            .map_err(|_| AssemblyError::DegenerateFacet)
    }
}

/// Facet mass-like matrix `M_ij = |F_i| lambda_j(c_i)`: the integral of the
/// hat function of vertex `j` over the part `F_i` of the facet closest to
/// vertex `i`, evaluated by the centroid rule (exact for linear integrands).
pub fn barrier_weights(dim: usize, facet: &[Point]) -> DMatrix<f64> {
    let n = dim;
    let part = geometry::facet_measure(dim, facet) / n as f64;
    let w = geometry::vertex_region_barycentric(n, 0);
    DMatrix::from_fn(n, n, |i, j| part * if i == j { w[0] } else { w[1] })
}

/// Jump coupling across a barrier facet with dofs ordered
/// `(v0-, v0+, v1-, v1+, ...)`: entry `beta M_ij` for equal sides and
/// `-beta M_ij` for opposite sides, `beta = k_b / a`.
pub fn local_barrier_coupling(
    dim: usize,
    facet: &[Point],
    aperture: f64,
    normal_permeability: f64,
    minus: &[usize],
    plus: &[usize],
) -> Result<DMatrix<f64>, AssemblyError> {
    if minus == plus {
        return Err(AssemblyError::IdenticalSides { facet: None });
    }
    if !(geometry::facet_measure(dim, facet) > 0.0) {
        return Err(AssemblyError::DegenerateFacet);
    }
    let beta = normal_permeability / aperture;
    let m = barrier_weights(dim, facet);
    let n = dim;
    Ok(DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let (i, si) = (r / 2, r % 2);
        let (j, sj) = (c / 2, c % 2);
        let sign = if si == sj { 1.0 } else { -1.0 };
        sign * beta * m[(i, j)]
    }))
}
