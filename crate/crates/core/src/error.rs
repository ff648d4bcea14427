use thiserror::Error;

/// Errors produced by the analysis routines.
///
/// Validation problems with a structure description are not errors; they are
/// collected in a [`crate::model::ValidationReport`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("coordinate index {index} out of range for {len} coordinates")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("member {member} has zero length (nodes {tail} and {head} coincide)")]
    DegenerateGeometry {
        member: usize,
        tail: usize,
        head: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("mass matrix restricted to the free coordinates is not positive definite")]
    SingularMass,

    #[error("tangent stiffness is singular on the free coordinates ({nullity} null directions)")]
    SingularStiffness {
        nullity: usize,
        /// Orthonormal basis of the detected null directions, one vector per entry.
        null_directions: Vec<Vec<f64>>,
    },

    #[error("equilibrium iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        /// Free coordinates of the best iterate found.
        best: Vec<f64>,
    },

    #[error("substep {substep}: {source}")]
    Substep {
        substep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("anchored prestress system is singular")]
    InconsistentAnchors,

    #[error("prestress infeasible: string element {element} would carry {force:.6e} N")]
    InfeasiblePrestress { element: usize, force: f64 },

    #[error("expected {expected} anchors, got {found}")]
    AnchorCount { expected: usize, found: usize },

    #[error("non-physical force {force:.6e} N for element {element} (axial stiffness {axial_stiffness:.6e} N)")]
    NonPhysicalForce {
        element: usize,
        force: f64,
        axial_stiffness: f64,
    },

    #[error("integration diverged at t = {time:.6e} s")]
    Diverged { time: f64 },

    #[error("nnls did not terminate within {0} iterations")]
    IterationLimit(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
