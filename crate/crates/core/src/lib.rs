//! Box-method discrete fracture model for steady single-phase Darcy flow,
//! extended to low-permeable barriers through a broken P1 space.
//!
//! The pipeline is [`mesh`] → [`dofspace`] → [`assembly`] → [`linalg`], with
//! [`runner`] tying it together around declarative scenarios.

pub mod assembly;
pub mod dofspace;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod runner;

pub use assembly::{AssemblyError, MaterialModel, SparseSystem};
pub use dofspace::{DofError, DofMap, IntersectionPolicy, VertexClass};
pub use linalg::{cg_solve, Preconditioner, SolveError, SolverReport, SymmetricSparseMatrix};
pub use mesh::{FacetKind, Mesh, MeshError, TagMap};
pub use runner::{RunError, Scenario, SolutionField};
