//! Small-vector geometry on simplices.
//!
//! Points are stored as `[f64; 3]` in both 2D and 3D; in 2D the third
//! coordinate is zero and ignored. The barycentric subdivision helpers
//! enumerate the "flag" simplices (vertex, edge midpoint, face centroid,
//! cell centroid) that make up the dual boxes.

use nalgebra::{Matrix2, Matrix3};

pub type Point = [f64; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

pub fn centroid(points: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in points {
        c = add(&c, p);
    }
    scale(&c, 1.0 / points.len() as f64)
}

/// Signed measure of a full-dimensional simplex (triangle in 2D, tetrahedron in 3D).
pub fn signed_measure(dim: usize, coords: &[Point]) -> f64 {
    match dim {
        2 => {
            let a = sub(&coords[1], &coords[0]);
            let b = sub(&coords[2], &coords[0]);
            0.5 * (a[0] * b[1] - a[1] * b[0])
        }
        3 => {
            let a = sub(&coords[1], &coords[0]);
            let b = sub(&coords[2], &coords[0]);
            let c = sub(&coords[3], &coords[0]);
            dot(&a, &cross(&b, &c)) / 6.0
        }
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Measure of a codimension-1 simplex: edge length in 2D, triangle area in 3D.
pub fn facet_measure(dim: usize, coords: &[Point]) -> f64 {
    match dim {
        2 => distance(&coords[0], &coords[1]),
        3 => 0.5 * norm(&cross(&sub(&coords[1], &coords[0]), &sub(&coords[2], &coords[0]))),
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Area vector (unnormalized normal scaled by measure) of a codimension-1 simplex.
/// Orientation follows the vertex order; callers fix the sign.
pub fn facet_area_vector(dim: usize, coords: &[Point]) -> Point {
    match dim {
        2 => {
            let t = sub(&coords[1], &coords[0]);
            [t[1], -t[0], 0.0]
        }
        3 => scale(&cross(&sub(&coords[1], &coords[0]), &sub(&coords[2], &coords[0])), 0.5),
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Gradients of the barycentric coordinates of a full-dimensional simplex,
/// together with its (positive) measure. Returns `None` for degenerate cells.
pub fn barycentric_gradients(dim: usize, coords: &[Point]) -> Option<(f64, Vec<Point>)> {
    let measure = signed_measure(dim, coords).abs();
    let mut grads = vec![[0.0; 3]; dim + 1];
    match dim {
        2 => {
            let j = Matrix2::new(
                coords[1][0] - coords[0][0],
                coords[2][0] - coords[0][0],
                coords[1][1] - coords[0][1],
                coords[2][1] - coords[0][1],
            );
            let inv = j.try_inverse()?;
            for k in 0..2 {
                grads[k + 1] = [inv[(k, 0)], inv[(k, 1)], 0.0];
            }
        }
        3 => {
            let mut j = Matrix3::zeros();
            for c in 0..3 {
                for r in 0..3 {
                    j[(r, c)] = coords[c + 1][r] - coords[0][r];
                }
            }
            let inv = j.try_inverse()?;
            for k in 0..3 {
                grads[k + 1] = [inv[(k, 0)], inv[(k, 1)], inv[(k, 2)]];
            }
        }
        _ => return None,
    }
    if !(measure > 0.0) || grads.iter().flatten().any(|g| !g.is_finite()) {
        return None;
    }
    let g0 = grads[1..].iter().fold([0.0; 3], |acc, g| sub(&acc, g));
    grads[0] = g0;
    Some((measure, grads))
}

/// All orderings of `items` (small sets only: at most 4 elements here).
fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &first) in items.iter().enumerate() {
        let rest: Vec<usize> = items.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &v)| v).collect();
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// Flag simplices of the barycentric subdivision belonging to vertex `i`.
///
/// Each flag is the chain of centroids `b({i}), b({i,j}), b({i,j,k}), ...`
/// over an ordering of the remaining vertices. All flags have equal measure
/// `|S| / m!` where `m` is the number of simplex vertices.
pub fn vertex_flags(coords: &[Point], i: usize) -> Vec<Vec<Point>> {
    let others: Vec<usize> = (0..coords.len()).filter(|&k| k != i).collect();
    permutations(&others)
        .into_iter()
        .map(|order| {
            let mut chain = Vec::with_capacity(coords.len());
            let mut members = vec![i];
            chain.push(coords[i]);
            for k in order {
                members.push(k);
                let pts: Vec<Point> = members.iter().map(|&m| coords[m]).collect();
                chain.push(centroid(&pts));
            }
            chain
        })
        .collect()
}

/// Centroid of the vertex region `{x : lambda_i(x) >= lambda_k(x) for all k}`
/// of a simplex (the piece of the dual box around vertex `i`).
pub fn vertex_region_centroid(coords: &[Point], i: usize) -> Point {
    let flags = vertex_flags(coords, i);
    let cs: Vec<Point> = flags.iter().map(|f| centroid(f)).collect();
    centroid(&cs)
}

/// Barycentric coordinates of the vertex-region centroid of an `m`-vertex simplex.
pub fn vertex_region_barycentric(m: usize, i: usize) -> Vec<f64> {
    let unit: Vec<Point> = (0..m)
        .map(|k| {
            let mut p = [0.0; 3];
            if k > 0 {
                p[k - 1] = 1.0;
            }
            p
        })
        .collect();
    let c = vertex_region_centroid(&unit, i);
    let mut lambda = vec![0.0; m];
    lambda[0] = 1.0 - c.iter().take(m - 1).sum::<f64>();
    for k in 1..m {
        lambda[k] = c[k - 1];
    }
    lambda
}

/// Pieces of the internal dual interface between the regions of vertices `i`
/// and `j` inside a full-dimensional simplex. Each piece is a codimension-1
/// simplex; its area vector is oriented from `i` towards `j`.
pub fn subface_pieces(dim: usize, coords: &[Point], i: usize, j: usize) -> Vec<(Vec<Point>, Point)> {
    let others: Vec<usize> = (0..coords.len()).filter(|&k| k != i && k != j).collect();
    let edge = sub(&coords[j], &coords[i]);
    permutations(&others)
        .into_iter()
        .map(|order| {
            let mut members = vec![i, j];
            let mut chain = vec![centroid(&[coords[i], coords[j]])];
            for k in order {
                members.push(k);
                let pts: Vec<Point> = members.iter().map(|&m| coords[m]).collect();
                chain.push(centroid(&pts));
            }
            let mut area = facet_area_vector(dim, &chain);
            if dot(&area, &edge) < 0.0 {
                area = scale(&area, -1.0);
            }
            (chain, area)
        })
        .collect()
}

/// Area vector of the sub-face separating the dual regions of `i` and `j` in a cell.
pub fn subface_vector(dim: usize, coords: &[Point], i: usize, j: usize) -> Point {
    subface_pieces(dim, coords, i, j)
        .iter()
        .fold([0.0; 3], |acc, (_, a)| add(&acc, a))
}

/// Outward unit normal of a cell facet, given the cell's remaining vertex.
pub fn outward_normal(dim: usize, facet: &[Point], opposite: &Point) -> Point {
    let a = facet_area_vector(dim, facet);
    let n = scale(&a, 1.0 / norm(&a));
    if dot(&n, &sub(opposite, &facet[0])) > 0.0 {
        scale(&n, -1.0)
    } else {
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn region_centroid_weights() {
        let w2 = vertex_region_barycentric(2, 0);
        assert!(close(w2[0], 0.75, 1e-15) && close(w2[1], 0.25, 1e-15));
        let w3 = vertex_region_barycentric(3, 1);
        assert!(close(w3[1], 11.0 / 18.0, 1e-15));
        assert!(close(w3[0], 7.0 / 36.0, 1e-15) && close(w3[2], 7.0 / 36.0, 1e-15));
        let w4 = vertex_region_barycentric(4, 2);
        assert!(close(w4.iter().sum::<f64>(), 1.0, 1e-15));
        assert!(w4[2] > w4[0]);
    }

    #[test]
    fn gradients_of_unit_triangle() {
        let t = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let (m, g) = barycentric_gradients(2, &t).unwrap();
        assert!(close(m, 0.5, 1e-15));
        assert_eq!(g[0], [-1.0, -1.0, 0.0]);
        assert_eq!(g[1], [1.0, 0.0, 0.0]);
        assert_eq!(g[2], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn degenerate_cell_has_no_gradients() {
        let t = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(barycentric_gradients(2, &t).is_none());
    }

    #[test]
    fn tet_subfaces_close_each_vertex_region() {
        let t = [[0.1, 0.0, 0.2], [1.3, 0.1, 0.0], [0.2, 0.9, 0.1], [0.3, 0.2, 1.1]];
        for i in 0..4 {
            let mut total = [0.0; 3];
            for j in 0..4 {
                if j != i {
                    total = add(&total, &subface_vector(3, &t, i, j));
                }
            }
            // faces of the tet containing i: each contributes a third of its outward area
            for skip in 0..4 {
                if skip == i {
                    continue;
                }
                let face: Vec<Point> = (0..4).filter(|&k| k != skip).map(|k| t[k]).collect();
                let n = outward_normal(3, &face, &t[skip]);
                total = add(&total, &scale(&n, facet_measure(3, &face) / 3.0));
            }
            assert!(norm(&total) < 1e-14, "vertex {i}: {total:?}");
        }
    }
}
