use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pore {pore} is not aligned with the element grid: {detail}")]
    PoreAlignment { pore: usize, detail: String },

    #[error("pore geometry error: {0}")]
    Geometry(String),

    #[error("pore {pore} does not form a closed ring: {detail}")]
    Topology { pore: usize, detail: String },

    #[error("non-positive Jacobian (J = {jacobian:.3e})")]
    InvertedMaterial { jacobian: f64 },

    #[error("element {element} inverted at Gauss point {gauss_point} (det = {det:.3e})")]
    ElementInversion {
        element: usize,
        gauss_point: usize,
        det: f64,
    },

    #[error("plane-stress iteration failed (residual sigma33 = {residual:.3e} after {iterations} iterations)")]
    PlaneStress { residual: f64, iterations: usize },

    #[error("element {element}: plane-stress iteration failed: {source}")]
    ElementPlaneStress {
        element: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular tangent: zero pivot at equation {equation}")]
    SingularMatrix { equation: usize },

    #[error("Newton iteration did not converge (last converged load factor {last_load_factor:.6}): {reason}")]
    NonConvergence {
        last_load_factor: f64,
        reason: String,
    },

    #[error("pore {pore} collapsed (perimeter {perimeter:.3e})")]
    CollapsedPore { pore: usize, perimeter: f64 },

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

impl Error {
    /// Stable machine-readable code, printed by the CLI and mapped to exit codes.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "E_CONFIG",
            Error::PoreAlignment { .. } => "E_PORE_ALIGNMENT",
            Error::Geometry(_) => "E_GEOMETRY",
            Error::Topology { .. } => "E_TOPOLOGY",
            Error::InvertedMaterial { .. } => "E_INVERTED_MATERIAL",
            Error::ElementInversion { .. } => "E_ELEMENT_INVERSION",
            Error::PlaneStress { .. } | Error::ElementPlaneStress { .. } => "E_PLANE_STRESS",
            Error::SingularMatrix { .. } => "E_SINGULAR",
            Error::NonConvergence { .. } => "E_FE_NONCONVERGENCE",
            Error::CollapsedPore { .. } => "E_COLLAPSED_PORE",
            Error::Optimizer(_) => "E_OPTIMIZER",
            Error::NonFinite(_) => "E_NON_FINITE",
            Error::Io { .. } => "E_IO",
            Error::Parse { .. } => "E_PARSE",
        }
    }

    /// Errors after which the load step is retried with a smaller increment.
    pub fn is_recoverable_by_cutback(&self) -> bool {
        matches!(
            self,
            Error::ElementInversion { .. }
                | Error::InvertedMaterial { .. }
                | Error::PlaneStress { .. }
                | Error::ElementPlaneStress { .. }
                | Error::SingularMatrix { .. }
                | Error::NonConvergence { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
