//! Geometric programs: posynomial algebra, the log-space convex form and a
//! barrier solver whose answers are certified by KKT residuals.

mod convex;
mod kkt;
mod posynomial;
mod problem;
mod solver;

pub use convex::{log_transform, AffineForm, ConvexProgram, LogSumExp, LseEval};
pub use kkt::{verify_kkt, KktReport};
pub use posynomial::{Monomial, Posynomial, VarId};
pub use problem::GpProblem;
pub use solver::{solve, GpSolution, SolveStatus, SolverOptions};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GpError {
    #[error("monomial coefficient must be finite and nonnegative, got {0}")]
    InvalidCoefficient(f64),
    #[error("exponent of {var} must be finite, got {exponent}")]
    InvalidExponent { var: VarId, exponent: f64 },
    #[error("variable {var} must be positive, got {value}")]
    NonPositiveValue { var: VarId, value: f64 },
    #[error("variable {0} is not declared")]
    UnknownVariable(VarId),
    #[error("objective has no nonzero term")]
    EmptyObjective,
    #[error("inequality constraint {0} has only zero coefficients")]
    DegenerateConstraint(usize),
    #[error("equality constraint {0} has a zero coefficient")]
    DegenerateEquality(usize),
    #[error("expected {expected} variable values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
