use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to point at the
/// offending mesh entity or solver stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("topology error: {0}")]
    Topology(String),
    #[error("inconsistent element orientation across edge ({v0}, {v1})")]
    Orientation { v0: usize, v1: usize },
    #[error("degenerate geometry in element {element}: {what}")]
    Geometry { element: usize, what: String },
    #[error("element {element} inverted or collapsed (J = {j:.3e})")]
    ElementInversion { element: usize, j: f64 },
    #[error("lagged normal nearly parallel to deformed edge tangent on edge {edge} (|P_perp| = {norm:.3e}); rotation per load step too large")]
    ProjectionDegenerate { edge: usize, norm: f64 },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("condensation block singular in element {element}; consider refining the load schedule or regularizing the moment block")]
    SingularCondensation { element: usize },
    #[error("linear system singular at equation {eq} (pivot {pivot:.3e}); system appears under-constrained")]
    SingularSystem { eq: usize, pivot: f64 },
    #[error("Newton did not converge after {iterations} iterations; residual history: {history:?}")]
    Nonconvergence { iterations: usize, history: Vec<f64> },
    #[error("load stepping failed near lambda = {lambda}: {source}")]
    LoadStepFailed {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown benchmark case '{0}'")]
    UnknownCase(String),
    #[error("probe '{0}' not found")]
    ProbeNotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("mesh file format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
