use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("singular channel: element {element} coincides with the user")]
    SingularChannel { element: usize },

    #[error("target coincides with array element {element}")]
    CoincidentTarget { element: usize },

    #[error("case mismatch: {0}")]
    CaseMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("closed form undefined near the rho = R pole (rho/R = {ratio:.4})")]
    NearPole { ratio: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("subproblem failed: {0}")]
    Subproblem(String),

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
