use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fmt_num;
use crate::assembly::Field;
use crate::dofspace::DofMap;
use crate::geometry::{self, Point};
use crate::mesh::{Mesh, MeshError};

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("point {0:?} lies outside the mesh")]
    Outside(Point),
    #[error("exact solution missing for region {0}")]
    MissingExact(i32),
    #[error("slice needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("value vector has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

const INSIDE_TOL: f64 = 1e-10;

/// Discrete pressure in the broken P1 space.
///
/// Inside a cell the field is the linear interpolant of the dofs resolved by
/// that cell, so on a barrier the value depends on which side the cell lies.
#[derive(Debug, Clone)]
pub struct SolutionField {
    mesh: Arc<Mesh>,
    cell_dofs: Vec<usize>,
    values: Vec<f64>,
    grads: Vec<Point>,
}

/// Samples along a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub from: Point,
    pub to: Point,
    /// Arclength fraction of each sample in `[0, 1]`.
    pub s: Vec<f64>,
    pub points: Vec<Point>,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Stored {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<usize>,
    regions: Vec<i32>,
    cell_dofs: Vec<usize>,
    values: Vec<f64>,
}

impl SolutionField {
    pub fn new(mesh: Arc<Mesh>, dofmap: &DofMap, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != dofmap.dof_count() {
            return Err(FieldError::Length { got: values.len(), expected: dofmap.dof_count() });
        }
        let nv = mesh.dim() + 1;
        let cell_dofs = (0..mesh.num_cells()).flat_map(|c| dofmap.cell_dofs(c, nv).to_vec()).collect();
        Ok(Self::from_parts(mesh, cell_dofs, values))
    }

    fn from_parts(mesh: Arc<Mesh>, cell_dofs: Vec<usize>, values: Vec<f64>) -> Self {
        let dim = mesh.dim();
        let grads = (0..mesh.num_cells())
            .into_par_iter()
            .flat_map_iter(|c| {
                geometry::barycentric_gradients(dim, &mesh.cell_coords(c)).expect("mesh cells are non-degenerate").1
            })
            .collect();
        SolutionField { mesh, cell_dofs, values, grads }
    }

    /// Field whose dofs interpolate `f` (evaluated with the region of each cell).
    pub fn interpolate(mesh: Arc<Mesh>, dofmap: &DofMap, f: &Field) -> Self {
        let nv = mesh.dim() + 1;
        let mut values = vec![0.0; dofmap.dof_count()];
        for c in 0..mesh.num_cells() {
            for (k, &d) in dofmap.cell_dofs(c, nv).iter().enumerate() {
                values[d] = f(mesh.vertex(mesh.cell(c)[k]), mesh.cell_region(c));
            }
        }
        SolutionField::new(mesh, dofmap, values).expect("length matches")
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        let nv = self.mesh.dim() + 1;
        &self.cell_dofs[c * nv..(c + 1) * nv]
    }

    fn barycentric(&self, c: usize, p: &Point) -> Vec<f64> {
        let nv = self.mesh.dim() + 1;
        let x0 = self.mesh.vertex(self.mesh.cell(c)[0]);
        let d = geometry::sub(p, x0);
        let g = &self.grads[c * nv..(c + 1) * nv];
        let mut l: Vec<f64> = g.iter().map(|gk| geometry::dot(gk, &d)).collect();
        l[0] += 1.0;
        l
    }

    /// Value of the cell-`c` interpolant at `p` (extrapolated if `p` is outside `c`).
    pub fn eval_in_cell(&self, c: usize, p: &Point) -> f64 {
        self.barycentric(c, p).iter().zip(self.cell_dofs(c)).map(|(l, &d)| l * self.values[d]).sum()
    }

    /// Cell containing `p`, found by walking from `start` towards the point.
    pub fn locate(&self, p: &Point, start: usize) -> Option<usize> {
        let n = self.mesh.num_cells();
        let mut c = start.min(n.saturating_sub(1));
        for _ in 0..n {
            let l = self.barycentric(c, p);
            let (k, min) = l.iter().copied().enumerate().fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            if min >= -INSIDE_TOL {
                return Some(c);
            }
            match self.mesh.neighbor(c, k) {
                Some(next) => c = next,
                None => break,
            }
        }
        (0..n).find(|&c| self.barycentric(c, p).iter().all(|&l| l >= -INSIDE_TOL))
    }

    /// All cells containing `p` (within a small tolerance), given one of them.
    fn containing_cells(&self, p: &Point, found: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .mesh
            .cell(found)
            .iter()
            .flat_map(|&v| self.mesh.vertex_cells(v).iter().copied())
            .filter(|&c| self.barycentric(c, p).iter().all(|&l| l >= -INSIDE_TOL))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Value at `p`. Where cells disagree (on a barrier) the side is chosen by
    /// the first offset `o` for which a candidate cell contains `p + o`.
    pub fn eval_with_side(&self, p: &Point, offsets: &[Point], hint: usize) -> Result<(f64, usize), FieldError> {
        let c = self.locate(p, hint).ok_or(FieldError::Outside(*p))?;
        let cells = self.containing_cells(p, c);
        let vals: Vec<f64> = cells.iter().map(|&c| self.eval_in_cell(c, p)).collect();
        let spread = vals.iter().fold(0.0f64, |m, v| m.max((v - vals[0]).abs()));
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if spread <= 1e-12 * scale.max(1e-300) {
            return Ok((vals[0], c));
        }
        let tol = 1e-12 * scale;
        for o in offsets {
            let q = geometry::add(p, o);
            let hits: Vec<usize> = (0..cells.len())
                .filter(|&k| self.barycentric(cells[k], &q).iter().all(|&l| l >= -INSIDE_TOL * 1e-3))
                .collect();
            if let Some(&k) = hits.first() {
                if hits.iter().all(|&j| (vals[j] - vals[k]).abs() <= tol) {
                    return Ok((vals[k], cells[k]));
                }
            }
        }
        Ok((vals[0], c))
    }

    pub fn eval(&self, p: &Point) -> Result<f64, FieldError> {
        self.eval_with_side(p, &self.side_offsets(&[1.0, 0.0, 0.0]), 0).map(|r| r.0)
    }

    /// Offsets tried in order: left normal, right normal, backwards, forwards.
    fn side_offsets(&self, direction: &Point) -> [Point; 4] {
        let eps = 1e-9 * self.mesh.diameter();
        let d = geometry::scale(direction, 1.0 / geometry::norm(direction).max(1e-300));
        let n = self.normal_offset(&d);
        [n, geometry::scale(&n, -1.0), geometry::scale(&d, -eps), geometry::scale(&d, eps)]
    }

    fn normal_offset(&self, direction: &Point) -> Point {
        let eps = 1e-9 * self.mesh.diameter();
        let dim = self.mesh.dim();
        let d = geometry::scale(direction, 1.0 / geometry::norm(direction).max(1e-300));
        let n = if dim == 2 {
            [-d[1], d[0], 0.0]
        } else {
            let axis = (0..3).min_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs())).unwrap();
            let mut e = [0.0; 3];
            e[axis] = 1.0;
            let c = geometry::cross(&d, &e);
            geometry::scale(&c, 1.0 / geometry::norm(&c))
        };
        geometry::scale(&n, eps)
    }

    /// `n` equidistant samples from `p0` to `p1`. On a barrier the side to the
    /// left of the segment (2D) is taken, probed at `1e-9` times the domain
    /// diameter; a barrier crossed by the segment is sampled from the side of `p0`.
    pub fn sample_slice(&self, p0: &Point, p1: &Point, n: usize) -> Result<Profile, FieldError> {
        if n < 2 {
            return Err(FieldError::TooFewSamples(n));
        }
        let dir = geometry::sub(p1, p0);
        let sides = self.side_offsets(&dir);
        let mut hint = 0;
        let mut profile = Profile { from: *p0, to: *p1, s: Vec::new(), points: Vec::new(), values: Vec::new() };
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            let p = geometry::add(p0, &geometry::scale(&dir, s));
            let (v, c) = self.eval_with_side(&p, &sides, hint)?;
            hint = c;
            profile.s.push(s);
            profile.points.push(p);
            profile.values.push(v);
        }
        Ok(profile)
    }

    /// `sqrt(sum_T int_T (p_h - p)^2)` with a rule exact for polynomials of degree 7 per simplex.
    pub fn l2_error(&self, exact: &Field) -> f64 {
        let dim = self.mesh.dim();
        let rule = simplex_rule(dim);
        let sum: f64 = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let x = self.mesh.cell_coords(c);
                let region = self.mesh.cell_region(c);
                let vals: Vec<f64> = self.cell_dofs(c).iter().map(|&d| self.values[d]).collect();
                let mut acc = 0.0;
                for (lambda, w) in &rule {
                    let mut p = [0.0; 3];
                    let mut ph = 0.0;
                    for k in 0..=dim {
                        p = geometry::add(&p, &geometry::scale(&x[k], lambda[k]));
                        ph += lambda[k] * vals[k];
                    }
                    let e = ph - exact(&p, region);
                    acc += w * e * e;
                }
                acc * self.mesh.cell_measure(c)
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        sum.sqrt()
    }

    /// Writes the field in a self-contained JSON form readable by [`SolutionField::load`].
    pub fn save(&self, out: &mut impl Write) -> Result<(), FieldError> {
        let m = &self.mesh;
        let stored = Stored {
            dim: m.dim(),
            vertices: m.vertices().to_vec(),
            cells: m.cells_flat().to_vec(),
            regions: m.cell_regions().to_vec(),
            cell_dofs: self.cell_dofs.clone(),
            values: self.values.clone(),
        };
        serde_json::to_writer(out, &stored)?;
        Ok(())
    }

    pub fn load(text: &str) -> Result<Self, FieldError> {
        let s: Stored = serde_json::from_str(text)?;
        let mesh = Mesh::new(s.dim, s.vertices, s.cells, s.regions, &[])?;
        let expected = mesh.num_cells() * (s.dim + 1);
        if s.cell_dofs.len() != expected {
            return Err(FieldError::Length { got: s.cell_dofs.len(), expected });
        }
        if let Some(&d) = s.cell_dofs.iter().find(|&&d| d >= s.values.len()) {
            return Err(FieldError::Length { got: s.values.len(), expected: d + 1 });
        }
        Ok(Self::from_parts(Arc::new(mesh), s.cell_dofs, s.values))
    }
}

impl Profile {
    /// CSV with header `s,x,y[,z],p` and shortest round-trip number formatting.
    pub fn write_csv(&self, dim: usize, out: &mut impl Write) -> std::io::Result<()> {
        if dim == 2 {
            writeln!(out, "s,x,y,p")?;
        } else {
            writeln!(out, "s,x,y,z,p")?;
        }
        for ((s, p), v) in self.s.iter().zip(&self.points).zip(&self.values) {
            write!(out, "{}", fmt_num(*s))?;
            for x in &p[..dim] {
                write!(out, ",{}", fmt_num(*x))?;
            }
            writeln!(out, ",{}", fmt_num(*v))?;
        }
        Ok(())
    }
}

/// Collapsed Gauss-Legendre rule on the reference simplex: barycentric
/// points and weights summing to one. Four points per direction integrate
/// polynomials of degree 7 exactly in 2D and 3D.
pub fn simplex_rule(dim: usize) -> Vec<(Vec<f64>, f64)> {
    let t = [0.3399810435848563, 0.8611363115940526];
    let w = [0.6521451548625461, 0.3478548451374538];
    let gauss: Vec<(f64, f64)> = [(-t[1], w[1]), (-t[0], w[0]), (t[0], w[0]), (t[1], w[1])]
        .iter()
        .map(|&(x, w)| ((x + 1.0) / 2.0, w / 2.0))
        .collect();
    let mut out = Vec::new();
    if dim == 2 {
        for &(u, wu) in &gauss {
            for &(v, wv) in &gauss {
                let x1 = u;
                let x2 = (1.0 - u) * v;
                out.push((vec![1.0 - x1 - x2, x1, x2], 2.0 * wu * wv * (1.0 - u)));
            }
        }
    } else {
        for &(u, wu) in &gauss {
            for &(v, wv) in &gauss {
                for &(s, ws) in &gauss {
                    let x1 = u;
                    let x2 = (1.0 - u) * v;
                    let x3 = (1.0 - u) * (1.0 - v) * s;
                    let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                    out.push((vec![1.0 - x1 - x2 - x3, x1, x2, x3], 6.0 * wu * wv * ws * jac));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{constant_field, field};
    use crate::dofspace::{build_dof_map, IntersectionPolicy};
    use crate::mesh::{FacetKind, Feature, GridPattern, StructuredGrid, TagMap};

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn rule_integrates_degree_four_monomials() {
        for dim in [2usize, 3] {
            let rule = simplex_rule(dim);
            assert!((rule.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() < 1e-14);
            for a in 0..=4u32 {
                for b in 0..=(4 - a) {
                    for c in 0..=(if dim == 3 { 4 - a - b } else { 0 }) {
                        // int over the reference simplex of x^a y^b z^c = a! b! c! dim! / (a+b+c+dim)! times |T|
                        let exact = factorial(a) * factorial(b) * factorial(c) * factorial(dim as u32)
                            / factorial(a + b + c + dim as u32);
                        let q: f64 = rule
                            .iter()
                            .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32) * if dim == 3 { l[3].powi(c as i32) } else { 1.0 })
                            .sum();
                        assert!((q - exact).abs() < 1e-14, "{dim} {a} {b} {c}");
                    }
                }
            }
        }
    }

    fn square(n: usize) -> (Arc<Mesh>, DofMap) {
        let m = StructuredGrid::unit_square(n, GridPattern::Crossed).build().unwrap();
        let d = build_dof_map(&m, IntersectionPolicy::FracturePenetrates).unwrap();
        (Arc::new(m), d)
    }

    #[test]
    fn linear_interpolant_is_exact() {
        let (m, d) = square(3);
        let f = field(|p| 2.0 * p[0] - p[1] + 0.5);
        let u = SolutionField::interpolate(m, &d, &f);
        assert!(u.l2_error(&f) <= 1e-14);
        let zero = SolutionField::new(u.mesh.clone(), &d, vec![0.0; d.dof_count()]).unwrap();
        assert!((zero.l2_error(&constant_field(1.0)) - 1.0).abs() < 1e-14);
        assert!((u.eval(&[0.37, 0.81, 0.0]).unwrap() - (0.74 - 0.81 + 0.5)).abs() < 1e-14);
        assert!(matches!(u.eval(&[1.5, 0.5, 0.0]), Err(FieldError::Outside(_))));
    }

    #[test]
    fn slices() {
        let (m, d) = square(4);
        let one = SolutionField::interpolate(m.clone(), &d, &constant_field(1.0));
        let p = one.sample_slice(&[0.1, 0.2, 0.0], &[0.9, 0.7, 0.0], 5).unwrap();
        assert_eq!(p.values, vec![1.0; 5]);
        let x = SolutionField::interpolate(m, &d, &field(|p| p[0]));
        let p = x.sample_slice(&[0.0, 0.5, 0.0], &[1.0, 0.5, 0.0], 3).unwrap();
        assert_eq!(p.values, vec![0.0, 0.5, 1.0]);
        assert!(p.s.windows(2).all(|w| w[0] < w[1]));
        let mut buf = Vec::new();
        p.write_csv(2, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s,x,y,p\n0,0,0.5,0\n0.5,0.5,0.5,0.5\n1,1,0.5,1\n");
        assert!(matches!(x.sample_slice(&[0.0; 3], &[1.0, 0.0, 0.0], 1), Err(FieldError::TooFewSamples(1))));
    }

    #[test]
    fn side_selection_on_a_barrier() {
        let mut g = StructuredGrid::unit_square(4, GridPattern::Crossed);
        g.features.push(Feature::segment(10, [0.5, 0.0], [0.5, 1.0]));
        let map: TagMap = [(10, FacetKind::Barrier)].into_iter().collect();
        let mut full = map.clone();
        for t in 1..=4 {
            full.insert(t, FacetKind::BoundaryNeumann);
        }
        let m = g.build().unwrap().with_tag_map(&full).unwrap();
        let d = build_dof_map(&m, IntersectionPolicy::FracturePenetrates).unwrap();
        let f: Field = Arc::new(|p: &Point, _| if p[0] < 0.5 { p[1] } else { 10.0 + p[1] });
        // interpolate with the side given by the cell centroid
        let m = Arc::new(m);
        let nv = 3;
        let mut values = vec![0.0; d.dof_count()];
        for c in 0..m.num_cells() {
            let cx = m.cell_centroid(c);
            for (k, &dof) in d.cell_dofs(c, nv).iter().enumerate() {
                let v = m.vertex(m.cell(c)[k]);
                values[dof] = if cx[0] < 0.5 { v[1] } else { 10.0 + v[1] };
            }
        }
        let u = SolutionField::new(m, &d, values).unwrap();
        assert!(u.l2_error(&f) < 1e-13);
        // moving upwards along x = 0.5 the left side is x < 0.5
        let up = u.sample_slice(&[0.5, 0.0, 0.0], &[0.5, 1.0, 0.0], 5).unwrap();
        assert!(up.values.iter().zip(&up.s).all(|(v, s)| (v - s).abs() < 1e-12), "{:?}", up.values);
        let down = u.sample_slice(&[0.5, 1.0, 0.0], &[0.5, 0.0, 0.0], 5).unwrap();
        assert!(down.values.iter().zip(&down.s).all(|(v, s)| (v - (11.0 - s)).abs() < 1e-12), "{:?}", down.values);
        let across = u.sample_slice(&[0.0, 0.75, 0.0], &[1.0, 0.75, 0.0], 3).unwrap();
        assert!((across.values[1] - 0.75).abs() < 1e-12);
        let back = u.sample_slice(&[1.0, 0.75, 0.0], &[0.0, 0.75, 0.0], 3).unwrap();
        assert!((back.values[1] - 10.75).abs() < 1e-12);

        let mut buf = Vec::new();
        u.save(&mut buf).unwrap();
        let back = SolutionField::load(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.sample_slice(&[0.0, 0.75, 0.0], &[1.0, 0.75, 0.0], 3).unwrap(), across);
    }
}
