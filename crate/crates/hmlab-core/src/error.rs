use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not converge: estimated error {estimated:.3e} above tolerance {tolerance:.3e}")]
    QuadratureNonConvergence { estimated: f64, tolerance: f64 },

    #[error("degenerate frame input: intermediate norm {norm:.3e} below 1 - 1e-6 (jet bug?)")]
    DegenerateFrame { norm: f64 },

    #[error("finite-difference Richardson check failed: relative disagreement {disagreement:.3e} above {tolerance:.3e}")]
    RichardsonDisagreement { disagreement: f64, tolerance: f64 },

    #[error("Newton inversion did not converge after {iterations} iterations, residual {residual:.3e} (outside bi-Lipschitz regime?)")]
    NewtonNonConvergence { iterations: usize, residual: f64 },

    #[error("Jacobian is numerically singular: |det J| = {det:.3e} below threshold {threshold:.3e}")]
    SingularJacobian { det: f64, threshold: f64 },

    #[error("coefficient matrix not elliptic at face centered {location:?}: min symmetric-part eigenvalue {eigenvalue:.3e}")]
    EllipticityViolation { location: Vec<f64>, eigenvalue: f64 },

    #[error("linear programming solver failed: {0}")]
    Lp(String),

    #[error("Krylov solver did not converge after {iterations} iterations, relative residual {residual:.3e}")]
    KrylovNonConvergence { iterations: usize, residual: f64 },

    #[error("evaluation at a non-differentiability point x = {x:?}")]
    NonDifferentiable { x: Vec<f64> },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
