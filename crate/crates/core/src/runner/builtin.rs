//! Built-in benchmark scenarios.
//!
//! Meshes for the unstructured 2D cases ship in `data/meshes`; the 3D cube
//! and the four-barrier validity case use generated structured grids.

use std::collections::BTreeMap;

use super::scenario::{Materials, MeshSource, Outputs, Permeability, RegionExpr, Scenario, SliceSpec, SolverSettings};
use super::RunError;
use crate::assembly::{BarrierProps, FractureProps};
use crate::dofspace::IntersectionPolicy;
use crate::mesh::{BoxSelector, FacetKind, Feature, GridPattern, StructuredGrid, TagMap};

const EX57_TANGENTIAL: [(&str, f64); 3] = [("1e-3", 1e-3), ("1", 1.0), ("1e3", 1e3)];

/// Names of all built-in scenarios.
pub fn builtin_names() -> Vec<String> {
    let mut names: Vec<String> =
        ["patch_linear", "barrier_1d", "ex51", "ex52_vertical", "ex52_slanted", "ex53"].map(String::from).to_vec();
    for flow in ["a", "b"] {
        for policy in ["penetrates", "cuts"] {
            names.push(format!("ex54{flow}_{policy}"));
        }
    }
    names.push("ex55".into());
    names.push("ex56".into());
    for sub in ["a", "b"] {
        for (label, _) in EX57_TANGENTIAL {
            names.push(format!("ex57{sub}_kt{label}"));
            names.push(format!("ex57{sub}_kt{label}_ref"));
        }
    }
    names
}

/// All built-in scenarios, in [`builtin_names`] order.
pub fn builtin_scenarios() -> Vec<Scenario> {
    builtin_names().iter().map(|n| builtin(n).expect("listed names resolve")).collect()
}

pub fn builtin(name: &str) -> Result<Scenario, RunError> {
    let unknown = || RunError::UnknownScenario(name.to_string());
    let s = match name {
        "patch_linear" => patch_linear(),
        "barrier_1d" => barrier_1d("meshes/square_split_256.msh", 1e-3, 1e-8),
        "ex51" => ex51(),
        "ex52_vertical" => ex52(true),
        "ex52_slanted" => ex52(false),
        "ex53" => ex53(),
        "ex55" => ex55(),
        "ex56" => ex56(16),
        _ => {
            if let Some(rest) = name.strip_prefix("ex54") {
                let (flow, policy) = rest.split_once('_').ok_or_else(unknown)?;
                let policy = match policy {
                    "penetrates" => IntersectionPolicy::FracturePenetrates,
                    "cuts" => IntersectionPolicy::BarrierCuts,
                    _ => return Err(unknown()),
                };
                match flow {
                    "a" | "b" => ex54(flow == "a", policy),
                    _ => return Err(unknown()),
                }
            } else if let Some(rest) = name.strip_prefix("ex57") {
                let (sub, rest) = rest.split_at_checked(1).ok_or_else(unknown)?;
                let rest = rest.strip_prefix("_kt").ok_or_else(unknown)?;
                let (label, reference) = match rest.strip_suffix("_ref") {
                    Some(l) => (l, true),
                    None => (rest, false),
                };
                let k_tau = EX57_TANGENTIAL.iter().find(|(l, _)| *l == label).ok_or_else(unknown)?.1;
                let top_bottom = match sub {
                    "a" => true,
                    "b" => false,
                    _ => return Err(unknown()),
                };
                if reference {
                    strip_reference(top_bottom, k_tau, 220)
                } else {
                    ex57(top_bottom, k_tau, 70)
                }
            } else {
                return Err(unknown());
            }
        }
    };
    Ok(Scenario { name: name.to_string(), ..s })
}

fn tags(items: &[(i32, FacetKind)]) -> TagMap {
    items.iter().copied().collect()
}

fn exprs(items: &[(i32, &str)]) -> BTreeMap<i32, RegionExpr> {
    items.iter().map(|&(t, e)| (t, e.into())).collect()
}

fn barriers(tags: impl IntoIterator<Item = i32>, aperture: f64, k: f64) -> BTreeMap<i32, BarrierProps> {
    tags.into_iter()
        .map(|t| (t, BarrierProps { aperture, normal_permeability: k, tangential_permeability: None }))
        .collect()
}

fn base(name: &str, description: &str, mesh: MeshSource, tag_map: TagMap, materials: Materials) -> Scenario {
    Scenario {
        name: name.to_string(),
        description: description.to_string(),
        mesh,
        refine: 0,
        tags: tag_map,
        materials,
        dirichlet: BTreeMap::new(),
        neumann: BTreeMap::new(),
        source: None,
        exact: None,
        policy: IntersectionPolicy::default(),
        solver: SolverSettings::default(),
        outputs: Outputs::default(),
        pure_neumann: false,
        base_dir: None,
    }
}

fn file(path: &str) -> MeshSource {
    MeshSource::File(path.into())
}

fn uniform(k: f64) -> Materials {
    Materials { default: Some(Permeability::Scalar(k)), ..Default::default() }
}

use FacetKind::{Barrier, BoundaryDirichlet as Dir, BoundaryNeumann as Neu, Fracture};

fn patch_linear() -> Scenario {
    let mut s = base(
        "patch_linear",
        "unit square without features, g_D = x on the whole boundary; the scheme reproduces p = x",
        MeshSource::Grid(StructuredGrid { jitter: 0.15, seed: 7, ..StructuredGrid::unit_square(8, GridPattern::Crossed) }),
        tags(&[(1, Dir), (2, Dir), (3, Dir), (4, Dir)]),
        uniform(1.0),
    );
    s.dirichlet = exprs(&[(1, "x"), (2, "x"), (3, "x"), (4, "x")]);
    s.exact = Some("x".into());
    s.outputs.slices = vec![SliceSpec::new("mid", &[0.0, 0.5], &[1.0, 0.5])];
    s
}

/// Full-height barrier at `x = 0.5` on a mesh tagged like `square_split_*.msh`,
/// with `p = 0` on the left, `p = 1` on the right and the series-resistance
/// solution attached as exact solution.
pub fn barrier_1d(mesh_file: &str, aperture: f64, k_b: f64) -> Scenario {
    let slope = 1.0 / (1.0 + aperture / k_b);
    let jump = slope * aperture / k_b;
    let mut s = base(
        "barrier_1d",
        "full-height barrier at x = 0.5 between p = 0 and p = 1; piecewise linear exact solution",
        file(mesh_file),
        tags(&[(1, Dir), (2, Dir), (3, Neu), (4, Neu), (10, Barrier)]),
        Materials { barriers: barriers([10], aperture, k_b), ..uniform(1.0) },
    );
    s.dirichlet = exprs(&[(1, "0"), (2, "1")]);
    s.neumann = exprs(&[(3, "0"), (4, "0")]);
    let left = format!("{slope} * x");
    let right = format!("{slope} * x + {jump}");
    s.exact = Some(RegionExpr::per_region([(1, left.as_str()), (2, right.as_str())]));
    s.outputs.slices = vec![SliceSpec::new("horizontal", &[0.0, 0.75], &[1.0, 0.75])];
    s
}

fn ex51() -> Scenario {
    let minus = "sin(x) * sin(y)";
    let plus = "sin(x) * sin(y) + cos(0.5) * sin(y)";
    let mut s = base(
        "ex51",
        "convergence test: barrier x = 0.5 with k_b/a = 1 and a manufactured piecewise smooth solution",
        file("meshes/square_split_256.msh"),
        tags(&[(1, Dir), (2, Dir), (3, Dir), (4, Dir), (10, Barrier)]),
        Materials { barriers: barriers([10], 1e-3, 1e-3), ..uniform(1.0) },
    );
    let p = RegionExpr::per_region([(1, minus), (2, plus)]);
    s.dirichlet = (1..=4).map(|t| (t, p.clone())).collect();
    s.source = Some(RegionExpr::per_region([(1, "2 * sin(x) * sin(y)"), (2, "2 * sin(x) * sin(y) + cos(0.5) * sin(y)")]));
    s.exact = Some(p);
    s
}

fn ex52(vertical: bool) -> Scenario {
    let (mesh, description, slice) = if vertical {
        (
            "meshes/ex52_vertical.msh",
            "single barrier (0.5,0.5)-(0.5,1), k_b/a = 1e-5, flow from right to left",
            SliceSpec::new("horizontal", &[0.0, 0.75], &[1.0, 0.75]),
        )
    } else {
        (
            "meshes/ex52_slanted.msh",
            "single barrier (0.25,0.75)-(0.75,0.25), k_b/a = 1e-5, flow from right to left",
            SliceSpec::new("horizontal", &[0.0, 0.5], &[1.0, 0.5]),
        )
    };
    let mut s = base(
        "",
        description,
        file(mesh),
        tags(&[(1, Dir), (2, Dir), (3, Neu), (4, Neu), (10, Barrier)]),
        Materials { barriers: barriers([10], 1e-3, 1e-8), ..uniform(1.0) },
    );
    s.dirichlet = exprs(&[(1, "0"), (2, "1")]);
    s.neumann = exprs(&[(3, "0"), (4, "0")]);
    s.outputs.slices = vec![slice];
    s
}

fn ex53() -> Scenario {
    let mut t = vec![(1, Neu), (2, Dir), (3, Neu), (4, Neu)];
    t.extend((10..16).map(|k| (k, Barrier)));
    let mut s = base(
        "",
        "regular network of six barriers, a = k_b = 1e-4, unit inflow on the left, p = 1 on the right",
        file("meshes/ex53_regular.msh"),
        tags(&t),
        Materials { barriers: barriers(10..16, 1e-4, 1e-4), ..uniform(1.0) },
    );
    s.neumann = exprs(&[(1, "-1"), (3, "0"), (4, "0")]);
    s.dirichlet = exprs(&[(2, "1")]);
    s.outputs.slices = vec![SliceSpec::new("diagonal", &[0.0, 0.1], &[0.9, 1.0])];
    s
}

/// Tags 10..=19 follow the rows of `networks/complex.csv`.
const EX54_FRACTURES: [i32; 8] = [10, 11, 12, 15, 16, 17, 18, 19];
const EX54_BARRIERS: [i32; 2] = [13, 14];

fn ex54(top_bottom: bool, policy: IntersectionPolicy) -> Scenario {
    let mut t = vec![(1, Neu), (2, Neu), (3, Neu), (4, Neu)];
    t.extend(EX54_FRACTURES.iter().map(|&k| (k, Fracture)));
    t.extend(EX54_BARRIERS.iter().map(|&k| (k, Barrier)));
    let (dir, neu) = if top_bottom { ([(4, "4"), (3, "1")], [1, 2]) } else { ([(1, "4"), (2, "1")], [3, 4]) };
    for (tag, _) in dir {
        t.retain(|e| e.0 != tag);
        t.push((tag, Dir));
    }
    let fractures = EX54_FRACTURES
        .iter()
        .map(|&k| (k, FractureProps { aperture: 1e-4, permeability: 1e4 }))
        .collect();
    let mut s = base(
        "",
        if top_bottom {
            "complex network of 8 fractures and 2 barriers, flow from top to bottom"
        } else {
            "complex network of 8 fractures and 2 barriers, flow from left to right"
        },
        file("meshes/ex54_complex.msh"),
        tags(&t),
        Materials { fractures, barriers: barriers(EX54_BARRIERS, 1e-4, 1e-4), ..uniform(1.0) },
    );
    s.dirichlet = exprs(&dir);
    s.neumann = neu.iter().map(|&k| (k, "0".into())).collect();
    s.policy = policy;
    s.outputs.slices = vec![SliceSpec::new("oblique", &[0.0, 0.5], &[1.0, 0.9])];
    s
}

fn ex55() -> Scenario {
    let mut t = vec![(1, Dir), (2, Dir), (3, Neu), (4, Neu)];
    t.extend((10..74).map(|k| (k, Barrier)));
    let mut s = base(
        "",
        "realistic network of 64 barriers on 700 m x 600 m (mesh file not shipped)",
        file("meshes/ex55_realistic.msh"),
        tags(&t),
        Materials { barriers: barriers(10..74, 1e-2, 1e-18), ..uniform(1e-14) },
    );
    s.dirichlet = exprs(&[(1, "1013250"), (2, "0")]);
    s.neumann = exprs(&[(3, "0"), (4, "0")]);
    s.outputs.slices = vec![
        SliceSpec::new("diagonal", &[0.0, 0.0], &[700.0, 600.0]),
        SliceSpec::new("vertical", &[625.0, 0.0], &[625.0, 600.0]),
    ];
    s
}

fn cube_box(tag: i32, min: [f64; 3], max: [f64; 3]) -> BoxSelector {
    BoxSelector { tag, min: min.to_vec(), max: max.to_vec() }
}

/// Unit cube with nine axis-aligned barriers on a Kuhn grid with `n` cells per axis
/// (`n` must be a multiple of 8).
pub fn ex56(n: usize) -> Scenario {
    let mut features = Vec::new();
    let mut tag = 10;
    for (c, lo, hi) in [(0.5, 0.0, 1.0), (0.75, 0.5, 1.0), (0.625, 0.5, 0.75)] {
        for axis in 0..3 {
            let mut min = vec![lo; 3];
            let mut max = vec![hi; 3];
            min[axis] = c;
            max[axis] = c;
            features.push(Feature::plane_box(tag, min, max));
            tag += 1;
        }
    }
    let grid = StructuredGrid {
        features,
        boundary: vec![cube_box(1, [0.875; 3], [1.0; 3]), cube_box(2, [0.0; 3], [0.25; 3])],
        regions: vec![
            cube_box(2, [0.5, 0.0, 0.0], [1.0, 0.5, 1.0]),
            cube_box(2, [0.75, 0.5, 0.5], [1.0, 0.75, 1.0]),
            cube_box(2, [0.625, 0.5, 0.5], [0.75, 0.625, 0.75]),
        ],
        ..StructuredGrid::unit_cube(n)
    };
    let mut t = vec![(1, Dir), (2, Neu)];
    t.extend((10..19).map(|k| (k, Barrier)));
    let mut matrix = BTreeMap::new();
    matrix.insert(2, Permeability::Scalar(0.1));
    let mut s = base(
        "ex56",
        "unit cube with nine barriers, two matrix regions, p = 1 near (1,1,1) and unit inflow near the origin",
        MeshSource::Grid(grid),
        tags(&t),
        Materials { matrix, default: Some(Permeability::Scalar(1.0)), barriers: barriers(10..19, 1e-4, 1e-4), ..Default::default() },
    );
    s.dirichlet = exprs(&[(1, "1")]);
    s.neumann = exprs(&[(2, "-1")]);
    s.outputs.slices = vec![SliceSpec::new("diagonal", &[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0])];
    s
}

const EX57_APERTURE: f64 = 1e-3;
const EX57_NORMAL: f64 = 1e-3;
/// Barrier axes of the validity case; the first and third carry the varied tangential permeability.
const EX57_AXES: [([f64; 2], [f64; 2]); 4] =
    [([0.3, 0.2], [1.0, 0.2]), ([0.0, 0.4], [0.7, 0.4]), ([0.3, 0.6], [1.0, 0.6]), ([0.0, 0.8], [0.7, 0.8])];

fn ex57_boundary(s: &mut Scenario, top_bottom: bool) {
    if top_bottom {
        s.dirichlet = exprs(&[(3, "0"), (4, "1")]);
        s.neumann = exprs(&[(1, "0"), (2, "0")]);
    } else {
        s.dirichlet = [1, 2, 3, 4].map(|t| (t, "(2*x - 1) * (3*x - 1)".into())).into_iter().collect();
    }
    let kinds = if top_bottom { [Neu, Neu, Dir, Dir] } else { [Dir; 4] };
    for (t, k) in (1..=4).zip(kinds) {
        s.tags.insert(t, k);
    }
    s.outputs.slices = vec![SliceSpec { samples: 1001, ..SliceSpec::new("profile", &[0.65, 0.0], &[0.65, 1.0]) }];
}

/// Four-barrier validity case with the hybrid barrier model on a crossed grid
/// with `n` cells per axis (`n` a multiple of 10).
pub fn ex57(top_bottom: bool, k_tau: f64, n: usize) -> Scenario {
    let grid = StructuredGrid {
        features: EX57_AXES.iter().enumerate().map(|(i, (p, q))| Feature::segment(10 + i as i32, *p, *q)).collect(),
        ..StructuredGrid::unit_square(n, GridPattern::Crossed)
    };
    let mut props = barriers(10..14, EX57_APERTURE, EX57_NORMAL);
    for t in [10, 12] {
        props.get_mut(&t).expect("present").tangential_permeability = Some(k_tau);
    }
    for t in [11, 13] {
        props.get_mut(&t).expect("present").tangential_permeability = Some(EX57_NORMAL);
    }
    let mut s = base(
        "",
        "four barriers with a = k_n = 1e-3 and varied tangential permeability, hybrid model",
        MeshSource::Grid(grid),
        (10..14).map(|t| (t, Barrier)).collect(),
        Materials { barriers: props, ..uniform(1.0) },
    );
    ex57_boundary(&mut s, top_bottom);
    s
}

/// Equi-dimensional reference for [`ex57`]: each barrier is resolved as a strip
/// of width `a` with permeability `diag(k_tau, k_n)` on a grid with `n` cells
/// per axis plus the strip edges.
pub fn strip_reference(top_bottom: bool, k_tau: f64, n: usize) -> Scenario {
    let half = EX57_APERTURE / 2.0;
    let ys: Vec<f64> = EX57_AXES.iter().flat_map(|(p, _)| [p[1] - half, p[1] + half]).collect();
    let regions = EX57_AXES
        .iter()
        .enumerate()
        .map(|(i, (p, q))| BoxSelector {
            tag: if i % 2 == 0 { 2 } else { 3 },
            min: vec![p[0], p[1] - half],
            max: vec![q[0], q[1] + half],
        })
        .collect();
    let grid = StructuredGrid {
        extra: vec![vec![0.3, 0.7], ys],
        regions,
        ..StructuredGrid::unit_square(n, GridPattern::Diagonal)
    };
    let mut matrix = BTreeMap::new();
    matrix.insert(2, Permeability::Tensor(vec![vec![k_tau, 0.0], vec![0.0, EX57_NORMAL]]));
    matrix.insert(3, Permeability::Scalar(EX57_NORMAL));
    let mut s = base(
        "",
        "equi-dimensional reference for the four-barrier validity case, barriers resolved as thin strips",
        MeshSource::Grid(grid),
        TagMap::new(),
        Materials { matrix, default: Some(Permeability::Scalar(1.0)), ..Default::default() },
    );
    ex57_boundary(&mut s, top_bottom);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_resolve_and_are_unique() {
        let names = builtin_names();
        let set: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(set.len(), names.len());
        for n in &names {
            assert_eq!(&builtin(n).unwrap().name, n);
        }
        assert!(builtin("ex99").is_err());
        assert!(builtin("ex54c_cuts").is_err());
        assert!(builtin("ex57a_kt2").is_err());
    }

    #[test]
    fn recorded_parameters() {
        let s = builtin("ex55").unwrap();
        assert_eq!(s.dirichlet[&1], RegionExpr::Single("1013250".into()));
        assert_eq!(s.materials.barriers.len(), 64);
        assert!(matches!(s.check_available(), Err(RunError::MissingData { .. })));

        let s = builtin("ex54b_cuts").unwrap();
        assert_eq!(s.policy, IntersectionPolicy::BarrierCuts);
        assert_eq!(s.materials.fractures.len(), 8);
        assert_eq!(s.materials.barriers.len(), 2);

        let s = builtin("ex57b_kt1e3").unwrap();
        assert_eq!(s.materials.barriers[&10].tangential_permeability, Some(1e3));
        assert_eq!(s.materials.barriers[&11].tangential_permeability, Some(1e-3));
        assert_eq!(s.dirichlet[&3], RegionExpr::Single("(2*x - 1) * (3*x - 1)".into()));
    }

    #[test]
    fn shipped_scenarios_build_and_validate() {
        for name in ["barrier_1d", "ex51", "ex52_vertical", "ex52_slanted", "ex53", "ex54a_cuts"] {
            let s = builtin(name).unwrap();
            let mesh = s.build_mesh().unwrap();
            s.validate(&mesh).unwrap();
        }
        let m = builtin("ex52_vertical").unwrap().build_mesh().unwrap();
        let on_barrier = m
            .facets_of_kind(FacetKind::Barrier)
            .flat_map(|f| m.facet_coords(f))
            .all(|p| (p[0] - 0.5).abs() < 1e-12 && p[1] >= 0.5 - 1e-12);
        assert!(on_barrier);
    }

    #[test]
    fn generated_grids_resolve_features() {
        let s = ex56(8);
        let mesh = s.build_mesh().unwrap();
        s.validate(&mesh).unwrap();
        assert_eq!(mesh.cell_regions().iter().filter(|&&r| r == 2).count() % 6, 0);
        let s = ex57(true, 1.0, 20);
        s.validate(&s.build_mesh().unwrap()).unwrap();
        let s = strip_reference(false, 1.0, 20);
        let mesh = s.build_mesh().unwrap();
        s.validate(&mesh).unwrap();
        let strip: f64 = (0..mesh.num_cells()).filter(|&c| mesh.cell_region(c) != 1).map(|c| mesh.cell_measure(c)).sum();
        assert!((strip - 1e-3 * 2.8).abs() < 1e-12, "{strip}");
    }
}
