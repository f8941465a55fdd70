use std::collections::BTreeMap;
use std::process::Command;
use std::sync::Arc;

use boxdfm::dofspace::{build_dof_map, IntersectionPolicy};
use boxdfm::mesh::{FacetKind, Feature, GridPattern, Mesh, StructuredGrid, TagMap};
use boxdfm::runner::{
    self, barrier_1d, builtin, convergence_order, ex56, run_scenario, solve_on_mesh, write_solution_vtk, MeshSource,
    RegionExpr, Scenario, SolutionField,
};
use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_boxdfm"))
}

#[test]
fn linear_patch_is_exact() {
    let out = run_scenario(&builtin("patch_linear").unwrap(), None).unwrap();
    let err = (0..out.mesh.num_vertices())
        .map(|v| (out.field.values()[out.dofmap.vertex_dofs(v).start] - out.mesh.vertex(v)[0]).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-12, "{err}");
    assert!(out.report.l2_error.unwrap() <= 1e-12);
}

#[test]
fn barrier_1d_slice_has_two_linear_branches() {
    let s = barrier_1d("meshes/square_split_fine.msh", 1e-3, 1e-8);
    let out = run_scenario(&s, None).unwrap();
    let slope = 1.0 / (1.0 + 1e5);
    let jump = slope * 1e5;
    let (_, profile) = &out.profiles[0];
    for (p, v) in profile.points.iter().zip(&profile.values) {
        let exact = if p[0] <= 0.5 { slope * p[0] } else { slope * p[0] + jump };
        assert!((v - exact).abs() < 1e-10, "x = {}: {v} vs {exact}", p[0]);
    }
    for d in [1e-3, 1e-6, 1e-9] {
        let left = out.field.eval(&[0.5 - d, 0.75, 0.0]).unwrap();
        let right = out.field.eval(&[0.5 + d, 0.75, 0.0]).unwrap();
        assert!((left - slope * (0.5 - d)).abs() < 1e-10);
        assert!((right - slope * (0.5 + d) - jump).abs() < 1e-10);
    }
}

#[test]
fn diagnostics_on_single_barrier() {
    for name in ["ex52_vertical", "ex52_slanted"] {
        let out = run_scenario(&builtin(name).unwrap(), None).unwrap();
        let throughput: f64 = out.conservation.dirichlet_inflow.iter().map(|x| x.1.abs()).sum::<f64>() / 2.0;
        assert!(throughput > 0.0);
        let check = &out.report.interface;
        assert!(check.max_abs_difference <= 1e-9 * throughput, "{name}: {check:?}");
        assert!(out.conservation.free_row_residual <= 1e-10, "{name}");
        assert!(out.report.conservation.relative_imbalance <= 1e-8, "{name}");
    }
}

#[test]
fn barrier_plane_in_3d_is_exact() {
    let grid = StructuredGrid {
        jitter: 0.1,
        seed: 5,
        features: vec![Feature::plane_box(10, vec![0.5, 0.0, 0.0], vec![0.5, 1.0, 1.0])],
        regions: vec![boxdfm::mesh::BoxSelector { tag: 2, min: vec![0.5, 0.0, 0.0], max: vec![1.0, 1.0, 1.0] }],
        ..StructuredGrid::unit_cube(4)
    };
    let mut s = barrier_1d("unused.msh", 1e-2, 1e-4);
    s.mesh = MeshSource::Grid(grid);
    s.outputs.slices.clear();
    for t in 3..=6 {
        s.tags.insert(t, FacetKind::BoundaryNeumann);
        s.neumann.insert(t, "0".into());
    }
    let out = run_scenario(&s, None).unwrap();
    let exact = s.exact.as_ref().unwrap().compile().unwrap();
    let interp = SolutionField::interpolate(out.mesh.clone(), &out.dofmap, &exact);
    let err = out.field.values().iter().zip(interp.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
    let profile = out.field.sample_slice(&[0.0, 0.3, 0.3], &[1.0, 0.3, 0.3], 5).unwrap();
    assert!((profile.values[2] - 0.5 / 101.0).abs() < 1e-10);
}

#[test]
fn cube_benchmark_runs() {
    let out = run_scenario(&ex56(8), None).unwrap();
    assert!(out.report.conservation.relative_imbalance <= 1e-8);
    assert!(out.report.summary.extra_dofs > 0);
    let (_, profile) = &out.profiles[0];
    assert_eq!(profile.values.len(), 201);
    assert!(profile.values.iter().all(|v| v.is_finite()));
    // Inflow near the origin, p = 1 near (1,1,1): pressure is higher at the start.
    assert!(profile.values[0] > profile.values[200]);
    assert!((profile.values[200] - 1.0).abs() < 1e-12);
}

#[test]
fn pure_neumann_pins_one_dof() {
    let mut s = builtin("patch_linear").unwrap();
    for t in 1..=4 {
        s.tags.insert(t, FacetKind::BoundaryNeumann);
    }
    s.dirichlet.clear();
    s.neumann = [(1, "1"), (2, "-1"), (3, "0"), (4, "0")].map(|(t, e)| (t, RegionExpr::from(e))).into_iter().collect();
    s.exact = None;
    assert!(run_scenario(&s, None).is_err());
    s.pure_neumann = true;
    let out = run_scenario(&s, None).unwrap();
    assert_eq!(out.report.pinned_dof, Some(0));
    assert!(out.report.warnings.iter().any(|w| w.contains("pure Neumann")));
    let p0 = out.field.values()[0];
    let x0 = out.mesh.vertex(0)[0];
    for v in 0..out.mesh.num_vertices() {
        let p = out.field.values()[out.dofmap.vertex_dofs(v).start];
        assert!((p - p0 - (out.mesh.vertex(v)[0] - x0)).abs() < 1e-9);
    }
}

#[test]
fn vtk_point_counts_and_idempotence() {
    let boundary: TagMap = (1..=4).map(|t| (t, FacetKind::BoundaryDirichlet)).collect();
    let two = StructuredGrid::unit_square(1, GridPattern::Diagonal).build().unwrap().with_tag_map(&boundary);
    let two = Arc::new(two.unwrap());
    let dm = build_dof_map(&two, IntersectionPolicy::default()).unwrap();
    let f = SolutionField::new(two, &dm, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let mut a = Vec::new();
    write_solution_vtk(&f, &mut a).unwrap();
    let text = String::from_utf8(a.clone()).unwrap();
    assert!(text.contains("POINTS 4 double"));
    assert!(text.contains("CELLS 2 8"));
    let mut b = Vec::new();
    write_solution_vtk(&f, &mut b).unwrap();
    assert_eq!(a, b);

    let out = run_scenario(&builtin("ex52_vertical").unwrap(), None).unwrap();
    let mut c = Vec::new();
    write_solution_vtk(&out.field, &mut c).unwrap();
    let text = String::from_utf8(c).unwrap();
    let expected: usize = (0..out.mesh.num_vertices()).map(|v| out.dofmap.multiplicity(v)).sum();
    assert!(text.contains(&format!("POINTS {expected} double")));
    assert!(expected > out.mesh.num_vertices());
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let s = builtin("ex54b_cuts").unwrap();
    run_scenario(&s, Some(&dir.path().join("a"))).unwrap();
    run_scenario(&s, Some(&dir.path().join("b"))).unwrap();
    for f in ["slice_oblique.csv", "solution.vtk", "features.vtk", "dofs.csv", "solution.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn scenario_json_round_trip_runs() {
    let dir = tempfile::tempdir().unwrap();
    let s = builtin("ex52_slanted").unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, s.to_json()).unwrap();
    let loaded = Scenario::from_file(&path).unwrap();
    let a = run_scenario(&s, None).unwrap();
    let b = run_scenario(&loaded, None).unwrap();
    assert_eq!(a.field.values(), b.field.values());
}

#[test]
fn cli_run_slice_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let st = bin().args(["run", "barrier_1d", "--out"]).arg(&out).args(["--precond", "jacobi"]).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let stdout = String::from_utf8(st.stdout).unwrap();
    assert!(stdout.contains("barrier_interior"));
    for f in ["report.json", "solution.vtk", "features.vtk", "slice_horizontal.csv", "dofs.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["solver"]["preconditioner"], "jacobi");

    let st = bin().arg("slice").arg(&out).args(["--from", "0,0.25", "--to", "1,0.25", "-n", "3"]).output().unwrap();
    assert!(st.status.success());
    let csv = String::from_utf8(st.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "s,x,y,p");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,0,0.25,"));

    let st = bin().args(["run", "ex55", "--out"]).arg(dir.path().join("x")).output().unwrap();
    assert_eq!(st.status.code(), Some(4));
    let st = bin().args(["run", "no_such_scenario"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": 1}").unwrap();
    let st = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let st = bin().args(["run", "ex52_vertical", "--tol", "1e-14", "--precond", "none", "--out"]).arg(dir.path().join("y")).output().unwrap();
    assert!(st.status.success());

    let st = bin().args(["list"]).output().unwrap();
    let text = String::from_utf8(st.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("ex55") && l.contains("unavailable")));
    assert!(text.lines().any(|l| l.starts_with("ex51") && l.contains("available")));

    let csv = dir.path().join("conv.csv");
    let st = bin().args(["convergence", "barrier_1d", "--levels", "2", "--csv"]).arg(&csv).output().unwrap();
    assert!(st.status.success());
    let table = std::fs::read_to_string(csv).unwrap();
    assert!(table.starts_with("level,ndof,l2_error,order\n"));
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn convergence_of_exact_solution_reports_no_orders() {
    let r = runner::run_convergence_study(&builtin("barrier_1d").unwrap(), 2, (1.9, 2.1)).unwrap();
    assert!(r.exact && r.pass);
    assert!(r.rows.iter().all(|row| row.l2_error <= 1e-10 && row.order.is_none()));
    assert_eq!(convergence_order(&[4.0, 1.0]).unwrap(), vec![2.0]);
}

/// Number of cell groups around `v` connected through non-barrier facets containing `v`.
fn components_at(mesh: &Mesh, v: usize) -> usize {
    let cells = mesh.vertex_cells(v).to_vec();
    let mut parent: BTreeMap<usize, usize> = cells.iter().map(|&c| (c, c)).collect();
    fn find(p: &mut BTreeMap<usize, usize>, x: usize) -> usize {
        let mut r = x;
        while p[&r] != r {
            r = p[&r];
        }
        r
    }
    for &c in &cells {
        for k in 0..=mesh.dim() {
            let f = mesh.cell_facet(c, k);
            if !mesh.facet(f).contains(&v) || mesh.facet_kind(f) == Some(FacetKind::Barrier) {
                continue;
            }
            if let Some(n) = mesh.neighbor(c, k) {
                let (a, b) = (find(&mut parent, c), find(&mut parent, n));
                parent.insert(a.max(b), a.min(b));
            }
        }
    }
    let roots: std::collections::BTreeSet<usize> = cells.iter().map(|&c| find(&mut parent, c)).collect();
    roots.len()
}

fn barrier_grid(mask: u8, jitter: f64, seed: u64) -> Scenario {
    let segments = [
        ([0.5, 0.0], [0.5, 1.0]),
        ([0.0, 0.25], [0.75, 0.25]),
        ([0.25, 0.5], [0.25, 0.875]),
        ([0.625, 0.625], [1.0, 0.625]),
    ];
    let chosen: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
    let mut s = barrier_1d("unused.msh", 1e-2, 1e-2);
    s.mesh = MeshSource::Grid(StructuredGrid {
        jitter,
        seed,
        features: chosen.iter().map(|&i| Feature::segment(20 + i as i32, segments[i].0, segments[i].1)).collect(),
        ..StructuredGrid::unit_square(8, GridPattern::Crossed)
    });
    s.tags.remove(&10);
    s.materials.barriers.clear();
    s.exact = None;
    for &i in &chosen {
        s.tags.insert(20 + i as i32, FacetKind::Barrier);
        s.materials.barriers.insert(20 + i as i32, boxdfm::assembly::BarrierProps {
            aperture: 1e-2,
            normal_permeability: 1e-3,
            tangential_permeability: None,
        });
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dof_count_matches_recount(mask in 1u8..16, jitter in 0.0f64..0.2, seed in 0u64..1000) {
        let s = barrier_grid(mask, jitter, seed);
        let mesh = s.build_mesh().unwrap();
        let dm = build_dof_map(&mesh, IntersectionPolicy::default()).unwrap();
        let recount: usize = (0..mesh.num_vertices()).map(|v| components_at(&mesh, v)).sum();
        prop_assert_eq!(dm.dof_count(), recount);
        for v in 0..mesh.num_vertices() {
            prop_assert_eq!(dm.multiplicity(v), components_at(&mesh, v));
        }
        let out = solve_on_mesh(&s, Arc::new(mesh)).unwrap();
        prop_assert!(out.report.conservation.relative_imbalance <= 1e-8);
    }

    #[test]
    fn slices_are_ordered_and_sized(
        x0 in 0.0f64..1.0, y0 in 0.0f64..1.0, x1 in 0.0f64..1.0, y1 in 0.0f64..1.0, n in 2usize..60,
    ) {
        prop_assume!((x1 - x0).abs() + (y1 - y0).abs() > 1e-6);
        let out = run_scenario(&barrier_grid(0b1011, 0.1, 1), None).unwrap();
        let prof = out.field.sample_slice(&[x0, y0, 0.0], &[x1, y1, 0.0], n).unwrap();
        prop_assert_eq!(prof.values.len(), n);
        prop_assert!(prof.s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(prof.values.iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v)));
    }

    #[test]
    fn interpolated_linear_fields_have_zero_error(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
        let s = barrier_grid(0b0101, 0.15, 9);
        let mesh = Arc::new(s.build_mesh().unwrap());
        let dm = build_dof_map(&mesh, IntersectionPolicy::default()).unwrap();
        let f = boxdfm::assembly::field(move |p| a + b * p[0] + c * p[1]);
        let field = SolutionField::interpolate(mesh, &dm, &f);
        prop_assert!(field.l2_error(&f) <= 1e-13);
        let v = field.eval(&[0.3, 0.7, 0.0]).unwrap();
        prop_assert!((v - (a + b * 0.3 + c * 0.7)).abs() <= 1e-12);
    }
}
