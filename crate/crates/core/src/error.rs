use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("GLL root finding did not converge for order {order} (root {root})")]
    RootFinding { order: usize, root: usize },

    #[error("point {value} lies outside the reference interval [-1, 1]")]
    OutsideReference { value: f64 },

    #[error("element {element}: non-positive Jacobian {det:e} at reference point ({:.6}, {:.6}, {:.6})", .reference[0], .reference[1], .reference[2])]
    NonPositiveJacobian {
        element: usize,
        reference: [f64; 3],
        det: f64,
    },

    #[error("mesh topology: {0}")]
    Topology(String),

    #[error("mesh file parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("field length {got} does not match space with {expected} local points")]
    SpaceMismatch { expected: usize, got: usize },

    #[error("unknown boundary tag `{0}`")]
    UnknownTag(String),

    #[error("boundary condition: {0}")]
    Boundary(String),

    #[error("CG breakdown at iteration {iteration}: <p, Ap> = {curvature:e}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("GMRES least-squares breakdown at iteration {iteration}")]
    GmresBreakdown { iteration: usize },

    #[error("non-positive diagonal {value:e} at local point {point} ({:.6}, {:.6}, {:.6})", .location[0], .location[1], .location[2])]
    NonPositiveDiagonal {
        point: usize,
        location: [f64; 3],
        value: f64,
    },

    #[error("dense factorization failed: {0}")]
    Factorization(String),

    #[error("time moved backwards: {requested} < {current}")]
    TimeReversal { requested: f64, current: f64 },

    #[error("non-finite value in field `{field}` at step {step}")]
    NonFinite { field: String, step: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SpaceMismatch { expected, got })
    }
}
