use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boxdfm::runner::{self, RunError, Scenario, SolutionField};
use boxdfm::{IntersectionPolicy, Preconditioner};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "boxdfm", version, about = "Box-method DFM solver with low-permeable barriers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario (JSON file or built-in name) and write its outputs.
    Run {
        scenario: String,
        /// Number of uniform refinements (replaces the scenario's value).
        #[arg(long)]
        refine: Option<usize>,
        #[arg(long)]
        policy: Option<IntersectionPolicy>,
        /// Output directory [default: out/<scenario name>].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        precond: Option<Preconditioner>,
        /// Assemble cell contributions in parallel.
        #[arg(long)]
        parallel: bool,
        /// Also write the assembled system in Matrix Market format.
        #[arg(long)]
        matrix_market: bool,
    },
    /// Solve on successive uniform refinements and report L2 errors and orders.
    Convergence {
        scenario: String,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 1.9)]
        min_order: f64,
        #[arg(long, default_value_t = 2.1)]
        max_order: f64,
        /// Write the table to this CSV file as well.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    List,
    /// Print a scenario as JSON.
    Show { scenario: String },
    /// Sample a saved solution along a segment and print CSV.
    Slice {
        /// Output directory of a previous run (containing solution.json).
        solution_dir: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        to: Vec<f64>,
        #[arg(short = 'n', default_value_t = 101)]
        samples: usize,
    },
}

fn resolve(name: &str) -> Result<Scenario, RunError> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "json") || path.exists() {
        Scenario::from_file(path)
    } else {
        runner::builtin(name)
    }
}

fn execute(cmd: Command) -> Result<(), RunError> {
    match cmd {
        Command::Run { scenario, refine, policy, out, tol, precond, parallel, matrix_market } => {
            let mut s = resolve(&scenario)?;
            if let Some(r) = refine {
                s.refine = r;
            }
            if let Some(p) = policy {
                s.policy = p;
            }
            if let Some(t) = tol {
                s.solver.tol = t;
            }
            if let Some(p) = precond {
                s.solver.preconditioner = p;
            }
            s.solver.parallel |= parallel;
            s.outputs.matrix_market |= matrix_market;
            let out = out.unwrap_or_else(|| Path::new("out").join(&s.name));
            let o = runner::run_scenario(&s, Some(&out))?;
            let r = &o.report;
            println!("scenario        {}", r.scenario);
            println!("mesh            {} vertices, {} cells", r.summary.vertices, r.summary.cells);
            println!("dofs            {} ({} extra from barriers)", r.summary.dofs, r.summary.extra_dofs);
            for (class, n) in &r.summary.classes {
                println!("  {class:<30}{n}");
            }
            if let Some(d) = r.pinned_dof {
                println!("pinned dof      {d} (pure Neumann)");
            }
            println!(
                "solver          {} iterations, relative residual {:e} ({})",
                r.solver.iterations, r.solver.relative_residual, r.solver.preconditioner
            );
            println!("imbalance       {:e}", r.conservation.relative_imbalance);
            println!("barrier flux    {:e}", r.net_barrier_flux);
            if let Some(e) = r.l2_error {
                println!("L2 error        {e:e}");
            }
            for w in &r.warnings {
                println!("warning: {w}");
            }
            println!("outputs         {} ({})", out.display(), r.outputs.join(", "));
        }
        Command::Convergence { scenario, levels, min_order, max_order, csv } => {
            let s = resolve(&scenario)?;
            let report = runner::run_convergence_study(&s, levels, (min_order, max_order))?;
            report.write_csv(&mut std::io::stdout()).map_err(|source| RunError::Io { path: "stdout".into(), source })?;
            if let Some(path) = csv {
                let mut f = std::fs::File::create(&path).map_err(|source| RunError::Io { path: path.clone(), source })?;
                report.write_csv(&mut f).map_err(|source| RunError::Io { path, source })?;
            }
            let verdict = if report.pass { "PASS" } else { "FAIL" };
            let note = if report.exact { " (errors at rounding level)" } else { "" };
            eprintln!("{verdict}: orders within [{min_order}, {max_order}]{note}");
            if !report.pass {
                return Err(RunError::Validation("observed orders outside the target window".into()));
            }
        }
        Command::List => {
            for s in runner::builtin_scenarios() {
                let status = match s.check_available() {
                    Ok(()) => "available".to_string(),
                    Err(e) => format!("unavailable: {e}"),
                };
                println!("{:<22} {:<12} {}", s.name, status, s.description);
            }
        }
        Command::Show { scenario } => println!("{}", resolve(&scenario)?.to_json()),
        Command::Slice { solution_dir, from, to, samples } => {
            let path = solution_dir.join("solution.json");
            let text = std::fs::read_to_string(&path)
                .map_err(|e| RunError::MissingData { path: path.clone(), msg: e.to_string() })?;
            let field = SolutionField::load(&text)?;
            let dim = field.mesh().dim();
            if from.len() != dim || to.len() != dim {
                return Err(RunError::Validation(format!("--from and --to need {dim} components")));
            }
            let point = |v: &[f64]| {
                let mut p = [0.0; 3];
                p[..dim].copy_from_slice(v);
                p
            };
            let profile = field.sample_slice(&point(&from), &point(&to), samples)?;
            profile
                .write_csv(dim, &mut std::io::stdout())
                .map_err(|source| RunError::Io { path: "stdout".into(), source })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
