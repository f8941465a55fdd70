//! Scenario execution: mesh → dofs → assembly → solve → diagnostics and outputs.

mod builtin;
mod expr;
mod scenario;
mod solution;
mod vtk;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

pub use builtin::{barrier_1d, builtin, builtin_names, builtin_scenarios, ex56, ex57, strip_reference};
pub use expr::{Expr, ExprError};
pub use scenario::{
    data_dir, Materials, MeshSource, Outputs, Permeability, RegionExpr, Scenario, SliceSpec, SolverSettings,
};
pub use solution::{simplex_rule, FieldError, Profile, SolutionField};
pub use vtk::{write_feature_vtk, write_solution_vtk};

use crate::assembly::flux::{self, ConservationReport, InterfaceCheck};
use crate::assembly::{assemble_system, AssemblyError, AssemblyMode, AssemblyOptions, MaterialModel, SparseSystem};
use crate::dofspace::{build_dof_map, DofError, DofMap};
use crate::linalg::{cg_solve, write_vector_market, SolveError, SolverReport};
use crate::mesh::{uniform_refine, DualBoxGeometry, Mesh, MeshError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Validation(String),
    #[error("unknown scenario {0:?}; see `boxdfm list`")]
    UnknownScenario(String),
    #[error("missing data file {}: {msg}", path.display())]
    MissingData { path: PathBuf, msg: String },
    #[error("need at least two positive errors, got {0:?}")]
    InvalidErrors(Vec<f64>),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("dof map: {0}")]
    Dof(#[from] DofError),
    #[error("assembly: {0}")]
    Assembly(#[from] AssemblyError),
    #[error("solver: {0}")]
    Solve(#[from] SolveError),
    #[error("evaluation: {0}")]
    Field(#[from] FieldError),
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("writing {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario {scenario}: {source}")]
    Context { scenario: String, source: Box<RunError> },
}

impl RunError {
    /// Process exit code: 2 validation, 3 solver failure, 4 missing data, 1 other I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Context { source, .. } => source.exit_code(),
            RunError::MissingData { .. } => 4,
            RunError::Mesh(MeshError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => 4,
            RunError::Solve(_) => 3,
            RunError::Io { .. } => 1,
            _ => 2,
        }
    }

    fn in_scenario(self, name: &str) -> RunError {
        match self {
            RunError::Context { .. } => self,
            e => RunError::Context { scenario: name.to_string(), source: Box::new(e) },
        }
    }
}

/// Counts of vertices per class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofSummary {
    pub vertices: usize,
    pub cells: usize,
    pub dofs: usize,
    /// Dofs beyond one per vertex, created by barrier splitting.
    pub extra_dofs: usize,
    pub classes: BTreeMap<&'static str, usize>,
    pub policy: crate::dofspace::IntersectionPolicy,
}

impl DofSummary {
    pub fn new(mesh: &Mesh, dofmap: &DofMap) -> Self {
        use crate::dofspace::VertexClass::*;
        let counts = dofmap.class_counts();
        let classes = [Plain, BarrierInterior, BarrierTip, FractureBarrierIntersection]
            .iter()
            .zip(counts)
            .map(|(c, n)| (c.as_str(), n))
            .collect();
        DofSummary {
            vertices: mesh.num_vertices(),
            cells: mesh.num_cells(),
            dofs: dofmap.dof_count(),
            extra_dofs: dofmap.dof_count() - mesh.num_vertices(),
            classes,
            policy: dofmap.policy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationSummary {
    pub total_dirichlet_inflow: f64,
    pub total_source: f64,
    pub total_neumann: f64,
    pub relative_imbalance: f64,
}

impl From<&ConservationReport> for ConservationSummary {
    fn from(c: &ConservationReport) -> Self {
        ConservationSummary {
            total_dirichlet_inflow: c.total_dirichlet_inflow,
            total_source: c.total_source,
            total_neumann: c.total_neumann,
            relative_imbalance: c.relative_imbalance,
        }
    }
}

/// Machine-readable summary of a run, written as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub dim: usize,
    pub summary: DofSummary,
    pub pinned_dof: Option<usize>,
    pub solver: SolverReport,
    pub conservation: ConservationSummary,
    pub interface: InterfaceCheck,
    pub net_barrier_flux: f64,
    pub barrier_flux_by_tag: BTreeMap<i32, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_error: Option<f64>,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
}

/// Everything produced by one solve.
pub struct RunOutcome {
    pub mesh: Arc<Mesh>,
    pub dofmap: DofMap,
    pub materials: MaterialModel,
    pub system: SparseSystem,
    pub field: SolutionField,
    pub conservation: ConservationReport,
    pub report: RunReport,
    pub profiles: Vec<(String, Profile)>,
}

/// Builds the mesh of `scenario`, solves and writes outputs to `out_dir` when given.
pub fn run_scenario(scenario: &Scenario, out_dir: Option<&Path>) -> Result<RunOutcome, RunError> {
    let run = || {
        let mesh = Arc::new(scenario.build_mesh()?);
        let mut outcome = solve_on_mesh(scenario, mesh)?;
        if let Some(dir) = out_dir {
            outcome.report.outputs = write_outputs(scenario, &outcome, dir)?;
            write_file(&dir.join("report.json"), |w| {
                serde_json::to_writer_pretty(&mut *w, &outcome.report).map_err(std::io::Error::other)?;
                writeln!(w)
            })?;
        }
        Ok(outcome)
    };
    run().map_err(|e: RunError| e.in_scenario(&scenario.name))
}

/// Solves `scenario` on an already built mesh without writing files.
pub fn solve_on_mesh(scenario: &Scenario, mesh: Arc<Mesh>) -> Result<RunOutcome, RunError> {
    scenario.validate(&mesh)?;
    let dim = mesh.dim();
    let dofmap = build_dof_map(&mesh, scenario.policy)?;
    let dual = DualBoxGeometry::new(&mesh);
    let materials = scenario.materials.model(dim)?;
    let bcs = scenario.boundary_conditions()?;
    let source = scenario.source.as_ref().map(RegionExpr::compile).transpose()?;
    let options = AssemblyOptions {
        mode: if scenario.solver.parallel { AssemblyMode::Parallel } else { AssemblyMode::Sequential },
        pin_if_pure_neumann: scenario.pure_neumann,
    };
    let system = assemble_system(&mesh, &dual, &dofmap, &materials, &bcs, source.as_ref(), options)?;
    let max_iter = scenario.solver.max_iter.unwrap_or(10 * system.n + 1000);
    let (p, solver) = solve_polished(&system, scenario.solver.tol, max_iter, scenario.solver.preconditioner)?;

    let conservation = flux::conservation(&system, &p);
    let interface = flux::interface_check(&mesh, &dual, &dofmap, &materials, &system, &p);
    let net_barrier_flux = flux::net_barrier_flux(&system, &p);
    let barrier_flux_by_tag = scenario
        .materials
        .barriers
        .keys()
        .map(|&t| (t, flux::barrier_flux_by_tag(&mesh, &system, &p, t)))
        .collect();
    let field = SolutionField::new(mesh.clone(), &dofmap, p)?;
    let l2_error = scenario.exact.as_ref().map(|e| e.compile().map(|f| field.l2_error(&f))).transpose()?;
    let profiles = scenario
        .outputs
        .slices
        .iter()
        .map(|s| Ok((s.name.clone(), field.sample_slice(&to_point(&s.from), &to_point(&s.to), s.samples)?)))
        .collect::<Result<Vec<_>, RunError>>()?;
    let report = RunReport {
        scenario: scenario.name.clone(),
        dim,
        summary: DofSummary::new(&mesh, &dofmap),
        pinned_dof: system.pinned,
        solver,
        conservation: (&conservation).into(),
        interface,
        net_barrier_flux,
        barrier_flux_by_tag,
        l2_error,
        warnings: scenario.warnings(&mesh),
        outputs: Vec::new(),
    };
    Ok(RunOutcome { mesh, dofmap, materials, system, field, conservation, report, profiles })
}

/// Shortest round-trip decimal, switching to exponent form for very small or large magnitudes.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) || !a.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// CG to `tol`, followed by up to three rounds of iterative refinement that
/// are kept only while they lower the true residual. Small fluxes through
/// nearly impermeable barriers need residuals well below the requested
/// tolerance for the boundary-flux balance to close.
fn solve_polished(
    system: &SparseSystem,
    tol: f64,
    max_iter: usize,
    preconditioner: crate::linalg::Preconditioner,
) -> Result<(Vec<f64>, SolverReport), RunError> {
    let a = &system.matrix;
    let b = &system.rhs;
    let (mut x, mut report) = cg_solve(a, b, tol, max_iter, preconditioner)?;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((x, report));
    }
    let residual = |x: &[f64]| -> Vec<f64> { a.mul(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let mut r = residual(&x);
    for _ in 0..3 {
        let rnorm = norm(&r);
        if rnorm <= 1e-15 * bnorm {
            break;
        }
        let (d, sub) = match cg_solve(a, &r, 1e-3, report.iterations.max(50), preconditioner) {
            Ok(v) => v,
            Err(SolveError::NotConverged { solution, report }) => (solution, report),
            Err(e) => return Err(e.into()),
        };
        let candidate: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + di).collect();
        let rc = residual(&candidate);
        report.iterations += sub.iterations;
        if norm(&rc) >= rnorm {
            break;
        }
        x = candidate;
        r = rc;
    }
    report.relative_residual = norm(&r) / bnorm;
    Ok((x, report))
}

pub(crate) fn to_point(v: &[f64]) -> crate::geometry::Point {
    let mut p = [0.0; 3];
    for (a, b) in p.iter_mut().zip(v) {
        *a = *b;
    }
    p
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), RunError> {
    let io = |source| RunError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    f(&mut w).and_then(|_| w.flush()).map_err(io)
}

fn write_outputs(scenario: &Scenario, o: &RunOutcome, dir: &Path) -> Result<Vec<String>, RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| {
        write_file(&dir.join(name), f)?;
        written.push(name.to_string());
        Ok::<(), RunError>(())
    };
    emit("solution.json", &|w| o.field.save(w).map_err(std::io::Error::other))?;
    emit("dofs.csv", &|w| o.dofmap.write_csv(&o.mesh, w).map_err(std::io::Error::other))?;
    if scenario.outputs.vtk {
        emit("solution.vtk", &|w| write_solution_vtk(&o.field, w))?;
        if o.mesh.tagged_facets().any(|(f, _)| !o.mesh.is_boundary_facet(f)) {
            emit("features.vtk", &|w| write_feature_vtk(&o.mesh, w))?;
        }
    }
    for (name, profile) in &o.profiles {
        emit(&format!("slice_{name}.csv"), &|w| profile.write_csv(o.mesh.dim(), w))?;
    }
    if scenario.outputs.matrix_market {
        emit("matrix.mtx", &|w| o.system.matrix.write_matrix_market(w))?;
        emit("rhs.mtx", &|w| write_vector_market(&o.system.rhs, w))?;
    }
    Ok(written)
}

/// `order_k = log2(e_{k-1} / e_k)`.
pub fn convergence_order(errors: &[f64]) -> Result<Vec<f64>, RunError> {
    if errors.len() < 2 || errors.iter().any(|e| !(*e > 0.0)) {
        return Err(RunError::InvalidErrors(errors.to_vec()));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub ndof: usize,
    pub l2_error: f64,
    /// Absent on the coarsest level and when errors are at rounding level.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub rows: Vec<ConvergenceRow>,
    pub window: (f64, f64),
    /// Every error is at rounding level, so no order is meaningful.
    pub exact: bool,
    pub pass: bool,
}

impl ConvergenceReport {
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "level,ndof,l2_error,order")?;
        for r in &self.rows {
            let order = r.order.map_or(String::new(), fmt_num);
            writeln!(out, "{},{},{},{}", r.level, r.ndof, fmt_num(r.l2_error), order)?;
        }
        Ok(())
    }
}

/// Errors below this are treated as rounding noise.
const ROUNDING_LEVEL: f64 = 1e-11;

/// Solves on `levels + 1` successive uniform refinements and checks the observed
/// orders against `window`.
pub fn run_convergence_study(
    scenario: &Scenario,
    levels: usize,
    window: (f64, f64),
) -> Result<ConvergenceReport, RunError> {
    let run = || {
        let exact = scenario
            .exact
            .as_ref()
            .ok_or_else(|| RunError::Validation("convergence study needs an exact solution".into()))?;
        exact.compile()?;
        let mut mesh = Arc::new(scenario.build_mesh()?);
        let mut rows: Vec<ConvergenceRow> = Vec::new();
        for level in 0..=levels {
            if level > 0 {
                mesh = Arc::new(uniform_refine(&mesh));
            }
            let out = solve_on_mesh(scenario, mesh.clone())?;
            let e = out.report.l2_error.expect("exact solution present");
            let order = rows
                .last()
                .filter(|prev| prev.l2_error > ROUNDING_LEVEL && e > ROUNDING_LEVEL)
                .map(|prev| (prev.l2_error / e).log2());
            rows.push(ConvergenceRow { level, ndof: out.dofmap.dof_count(), l2_error: e, order });
        }
        let is_exact = rows.iter().all(|r| r.l2_error <= ROUNDING_LEVEL);
        let orders: Vec<f64> = rows.iter().filter_map(|r| r.order).collect();
        let pass = is_exact || (!orders.is_empty() && orders.iter().all(|o| (window.0..=window.1).contains(o)));
        Ok(ConvergenceReport { scenario: scenario.name.clone(), rows, window, exact: is_exact, pass })
    };
    run().map_err(|e: RunError| e.in_scenario(&scenario.name))
}

#[cfg(test)]
mod tests;
