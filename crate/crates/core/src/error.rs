use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// One entry per violated model constraint.
    #[error("invalid model parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Feller condition a>sigma required for {0}")]
    FellerRequired(&'static str),

    #[error("{what} = {value} lies outside the domain {domain}")]
    OutsideDomain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("mgf explodes before t = {t}")]
    MgfExplodes { t: f64 },

    #[error("complex argument in closed form: {0}")]
    ComplexArgument(String),

    #[error("series cap exceeded: |z| = {0} > 50")]
    SeriesCap(f64),

    #[error("internal defect: {0}")]
    Internal(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {}", .0.join("; "))]
    Precondition(Vec<String>),

    #[error("censored estimate: probabilities at t = {ts:?} are outside (0,1) with {n_paths} paths (floor {floor:e})")]
    Censored { ts: Vec<f64>, n_paths: u64, floor: f64 },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
