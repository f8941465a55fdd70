//! Sparse symmetric storage, preconditioned conjugate gradients and dense
//! checks used by the property suite.

mod cg;
mod csr;
mod dense;
mod precond;

pub use cg::{cg_solve, SolveError, SolverReport};
pub use csr::{write_vector_market, SymmetricSparseMatrix, TripletError};
pub use dense::{dense_solve, dense_spd_check, DenseSpdReport};
pub use precond::Preconditioner;
