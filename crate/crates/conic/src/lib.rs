//! Solver-agnostic conic programs (linear / second-order-cone / PSD blocks)
//! over a flat variable vector, plus an internal first-order solver
//! fulfilling the solve contract.
//!
//! Programs are immutable after assembly; distinct programs may be solved
//! concurrently.

mod accel;
mod canon;
mod cones;
mod eig;
mod equil;
mod expr;
mod ldl;
mod program;
mod solver;
mod sparse;

pub use canon::{canonicalize, Canonical, ConeLayout};
pub use cones::{mat_to_svec, project_soc, svec_to_mat};
pub use eig::{min_eigenvalue, sym_eigen, SymEig};
pub use expr::{LinExpr, VarId};
pub use program::{ConicProgram, PsdBlock, PsdId, RowId, Sense, SocBlock, SocId};
pub use solver::{
    solve, ConicSolution, PreparedSolver, ResidualReport, SolveStatus, SolverOptions, Tolerances,
    WarmStart,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("malformed program: {0}")]
    BadProgram(String),
    #[error("asymmetric matrix: {0}")]
    AsymmetricInput(String),
    #[error("linear algebra failure: {0}")]
    Numerical(String),
}
