//! Dense small-matrix numerics shared by every analysis module.

mod eigen;
mod expm;
mod linsolve;
mod matrix;
mod roots;

use thiserror::Error;

pub use eigen::{eigenvalues, real_eigenvalues, spectral_radius};
pub use expm::{expm, expm_integral, expm_with_forcing};
pub use linsolve::{determinant, solve_complex, solve_linear, solve_matrix, Lu, CONDITION_LIMIT};
pub use matrix::{dot, norm2, outer, Matrix};
pub use roots::{find_root, find_root_default, try_find_root, DEFAULT_RELATIVE_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("eigenvalue iteration did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("matrix is singular to working precision (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
}
