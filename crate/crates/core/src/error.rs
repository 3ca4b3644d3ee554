use thiserror::Error;

/// Every failure the engine can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("numeric error at {at:?}: {msg}")]
    Numeric { msg: String, at: Vec<f64> },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("geometry error at node {node}: {msg}")]
    Geometry { node: usize, msg: String },
    #[error("transversality error at node {node}: {msg}")]
    Transversality { node: usize, msg: String },
    #[error("non-contraction: ratios {ratios:?}")]
    NonContraction { ratios: Vec<f64> },
    #[error("hyperbolicity violation: {0}")]
    Hyperbolicity(String),
    #[error("immersion violation: {0}")]
    Immersion(String),
    #[error("truncation error: {0}")]
    Truncation(String),
    #[error("scheme error: {0}")]
    Scheme(String),
    #[error("continuation error at t = ({re}, {im}): {msg}")]
    Continuation { re: f64, im: f64, msg: String },
    #[error("locality error at node {node}: {msg}")]
    Locality { node: usize, msg: String },
    #[error("hypothesis error: {0}")]
    Hypothesis(String),
    #[error("containment failure: {0}")]
    Containment(String),
}

impl Error {
    /// Short machine-readable tag used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Numeric { .. } => "numeric",
            Error::Domain(_) => "domain",
            Error::Geometry { .. } => "geometry",
            Error::Transversality { .. } => "transversality",
            Error::NonContraction { .. } => "non_contraction",
            Error::Hyperbolicity(_) => "hyperbolicity",
            Error::Immersion(_) => "immersion",
            Error::Truncation(_) => "truncation",
            Error::Scheme(_) => "scheme",
            Error::Continuation { .. } => "continuation",
            Error::Locality { .. } => "locality",
            Error::Hypothesis(_) => "hypothesis",
            Error::Containment(_) => "containment",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
