//! Built-in structured meshes on boxes.
//!
//! Three cell patterns are available: `Crossed` (2D, four triangles per grid
//! rectangle around an added centre vertex), `Diagonal` (2D, two triangles per
//! rectangle) and `Kuhn` (3D, six tetrahedra per grid box). Grid lines are
//! uniform per axis plus optional extra lines, so features lying on grid lines
//! are resolved exactly. Facets are tagged by feature segments or boxes, and
//! boundary facets by boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Mesh, MeshError, TaggedFacet};
use crate::geometry::{self, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPattern {
    Crossed,
    Diagonal,
    Kuhn,
}

/// Axis-aligned box `[min, max]` with a tag; a degenerate box selects a plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSelector {
    pub tag: i32,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoxSelector {
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.min.iter().zip(&self.max).enumerate().all(|(d, (lo, hi))| p[d] >= lo - tol && p[d] <= hi + tol)
    }
}

/// A tagged interior feature: a 2D segment or an axis-aligned box (planes in 3D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub tag: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<[[f64; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<Vec<f64>>,
}

impl Feature {
    pub fn segment(tag: i32, p: [f64; 2], q: [f64; 2]) -> Self {
        Feature { tag, segment: Some([p, q]), min: None, max: None }
    }

    pub fn plane_box(tag: i32, min: Vec<f64>, max: Vec<f64>) -> Self {
        Feature { tag, segment: None, min: Some(min), max: Some(max) }
    }

    fn contains(&self, p: &Point, tol: f64) -> bool {
        if let Some([a, b]) = self.segment {
            let a = [a[0], a[1], 0.0];
            let b = [b[0], b[1], 0.0];
            let d = geometry::sub(&b, &a);
            let l2 = geometry::dot(&d, &d);
            let t = geometry::dot(&geometry::sub(p, &a), &d) / l2;
            let proj = geometry::add(&a, &geometry::scale(&d, t));
            t >= -tol && t <= 1.0 + tol && geometry::distance(&proj, p) <= tol
        } else if let (Some(lo), Some(hi)) = (&self.min, &self.max) {
            lo.iter().zip(hi).enumerate().all(|(d, (l, h))| p[d] >= l - tol && p[d] <= h + tol)
        } else {
            false
        }
    }

    fn measure(&self) -> Option<f64> {
        self.segment.map(|[a, b]| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt())
    }
}

/// Declarative structured mesh on the box `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredGrid {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Uniform subdivisions per axis.
    pub n: Vec<usize>,
    pub pattern: GridPattern,
    /// Extra grid lines per axis (added to the uniform ones).
    #[serde(default)]
    pub extra: Vec<Vec<f64>>,
    /// Random vertex perturbation as a fraction of the local spacing (at most 0.2).
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub features: Vec<Feature>,
    #[serde(default)]
    pub boundary: Vec<BoxSelector>,
    /// Cell region tags by centroid; first matching box wins, default 1.
    #[serde(default)]
    pub regions: Vec<BoxSelector>,
}

impl StructuredGrid {
    pub fn unit_square(n: usize, pattern: GridPattern) -> Self {
        StructuredGrid {
            min: vec![0.0, 0.0],
            max: vec![1.0, 1.0],
            n: vec![n, n],
            pattern,
            extra: Vec::new(),
            jitter: 0.0,
            seed: 0,
            features: Vec::new(),
            boundary: Self::side_boxes(&[0.0, 0.0], &[1.0, 1.0]),
            regions: Vec::new(),
        }
    }

    pub fn unit_cube(n: usize) -> Self {
        StructuredGrid {
            min: vec![0.0; 3],
            max: vec![1.0; 3],
            n: vec![n; 3],
            pattern: GridPattern::Kuhn,
            extra: Vec::new(),
            jitter: 0.0,
            seed: 0,
            features: Vec::new(),
            boundary: Self::side_boxes(&[0.0; 3], &[1.0; 3]),
            regions: Vec::new(),
        }
    }

    /// Boundary boxes tagged 1 (x min), 2 (x max), 3 (y min), 4 (y max), 5 (z min), 6 (z max).
    pub fn side_boxes(min: &[f64], max: &[f64]) -> Vec<BoxSelector> {
        let mut out = Vec::new();
        let names = [(1, 2), (3, 4), (5, 6)];
        for d in 0..min.len() {
            for (tag, value) in [(names[d].0, min[d]), (names[d].1, max[d])] {
                let mut lo = min.to_vec();
                let mut hi = max.to_vec();
                lo[d] = value;
                hi[d] = value;
                out.push(BoxSelector { tag, min: lo, max: hi });
            }
        }
        out
    }

    fn dim(&self) -> usize {
        self.min.len()
    }

    fn axis(&self, d: usize) -> Vec<f64> {
        let (lo, hi, n) = (self.min[d], self.max[d], self.n[d]);
        let mut xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        if let Some(extra) = self.extra.get(d) {
            xs.extend(extra.iter().copied().filter(|&x| x > lo && x < hi));
        }
        xs.sort_by(f64::total_cmp);
        let tol = 1e-12 * (hi - lo);
        xs.dedup_by(|a, b| (*a - *b).abs() <= tol);
        xs
    }

    pub fn build(&self) -> Result<Mesh, MeshError> {
        let dim = self.dim();
        let ok_pattern = matches!(
            (dim, self.pattern),
            (2, GridPattern::Crossed) | (2, GridPattern::Diagonal) | (3, GridPattern::Kuhn)
        );
        if !ok_pattern || self.max.len() != dim || self.n.len() != dim || self.n.contains(&0) {
            return Err(MeshError::Validation(format!(
                "structured grid: pattern {:?} needs matching min/max/n of dimension {}",
                self.pattern,
                if self.pattern == GridPattern::Kuhn { 3 } else { 2 }
            )));
        }
        if !(0.0..=0.2).contains(&self.jitter) {
            return Err(MeshError::Validation("jitter must lie in [0, 0.2]".into()));
        }
        let axes: Vec<Vec<f64>> = (0..dim).map(|d| self.axis(d)).collect();
        let diam = (0..dim).map(|d| (self.max[d] - self.min[d]).powi(2)).sum::<f64>().sqrt();
        let tol = 1e-10 * diam;

        let mut vertices: Vec<Point> = Vec::new();
        let mut spacing: Vec<f64> = Vec::new();
        let mut cells = Vec::new();
        let local_h = |d: usize, i: usize| {
            let a = &axes[d];
            let left = if i > 0 { a[i] - a[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < a.len() { a[i + 1] - a[i] } else { f64::INFINITY };
            left.min(right)
        };
        if dim == 2 {
            let (nx, ny) = (axes[0].len(), axes[1].len());
            for j in 0..ny {
                for i in 0..nx {
                    vertices.push([axes[0][i], axes[1][j], 0.0]);
                    spacing.push(local_h(0, i).min(local_h(1, j)));
                }
            }
            let id = |i: usize, j: usize| j * nx + i;
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                    match self.pattern {
                        GridPattern::Crossed => {
                            let hx = axes[0][i + 1] - axes[0][i];
                            let hy = axes[1][j + 1] - axes[1][j];
                            vertices.push([axes[0][i] + 0.5 * hx, axes[1][j] + 0.5 * hy, 0.0]);
                            spacing.push(0.5 * hx.min(hy));
                            let m = vertices.len() - 1;
                            cells.extend_from_slice(&[a, b, m, b, c, m, c, d, m, d, a, m]);
                        }
                        _ => cells.extend_from_slice(&[a, b, c, a, c, d]),
                    }
                }
            }
        } else {
            let (nx, ny, nz) = (axes[0].len(), axes[1].len(), axes[2].len());
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        vertices.push([axes[0][i], axes[1][j], axes[2][k]]);
                        spacing.push(local_h(0, i).min(local_h(1, j)).min(local_h(2, k)));
                    }
                }
            }
            let id = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            for k in 0..nz - 1 {
                for j in 0..ny - 1 {
                    for i in 0..nx - 1 {
                        for p in perms {
                            let mut c = [i, j, k];
                            cells.push(id(c[0], c[1], c[2]));
                            for &axis in &p {
                                c[axis] += 1;
                                cells.push(id(c[0], c[1], c[2]));
                            }
                        }
                    }
                }
            }
        }

        if self.jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for (v, p) in vertices.iter_mut().enumerate() {
                let on_boundary = (0..dim).any(|d| {
                    (p[d] - self.min[d]).abs() <= tol || (p[d] - self.max[d]).abs() <= tol
                });
                let on_line = (0..dim).any(|d| {
                    self.extra.get(d).is_some_and(|e| e.iter().any(|x| (p[d] - x).abs() <= tol))
                });
                let on_feature = self.features.iter().any(|f| f.contains(p, tol));
                let shift: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
                if on_boundary || on_line || on_feature {
                    continue;
                }
                for d in 0..dim {
                    p[d] += self.jitter * spacing[v] * shift[d];
                }
            }
        }

        let ncells = cells.len() / (dim + 1);
        let regions: Vec<i32> = (0..ncells)
            .map(|c| {
                let pts: Vec<Point> = cells[c * (dim + 1)..(c + 1) * (dim + 1)].iter().map(|&v| vertices[v]).collect();
                let centroid = geometry::centroid(&pts);
                self.regions.iter().find(|r| r.contains(&centroid, tol)).map_or(1, |r| r.tag)
            })
            .collect();

        let untagged = Mesh::new(dim, vertices, cells, regions, &[])?;
        let mut tagged = Vec::new();
        let mut covered = vec![0.0; self.features.len()];
        for f in 0..untagged.num_facets() {
            let coords = untagged.facet_coords(f);
            let tag = if untagged.is_boundary_facet(f) {
                self.boundary.iter().find(|b| coords.iter().all(|p| b.contains(p, tol))).map(|b| b.tag)
            } else {
                self.features.iter().enumerate().find(|(_, ft)| coords.iter().all(|p| ft.contains(p, tol))).map(
                    |(k, ft)| {
                        covered[k] += geometry::facet_measure(dim, &coords);
                        ft.tag
                    },
                )
            };
            if let Some(tag) = tag {
                tagged.push(TaggedFacet { vertices: untagged.facet(f).to_vec(), tag });
            }
        }
        for (k, ft) in self.features.iter().enumerate() {
            if let Some(len) = ft.measure() {
                if (covered[k] - len).abs() > 1e-9 * len {
                    return Err(MeshError::Validation(format!(
                        "feature {} is not resolved by the grid (covered {} of {})",
                        ft.tag, covered[k], len
                    )));
                }
            } else if covered[k] == 0.0 {
                return Err(MeshError::Validation(format!("feature {} selects no interior facet", ft.tag)));
            }
        }
        Mesh::new(
            dim,
            untagged.vertices().to_vec(),
            untagged.cells_flat().to_vec(),
            untagged.cell_regions().to_vec(),
            &tagged,
        )
    }
}
