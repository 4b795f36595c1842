use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample covariance is singular and lambda = 0")]
    SingularInput,

    #[error("regressors of equation {equation} are rank deficient")]
    RankDeficientRegressors { equation: usize },

    #[error("GLS normal matrix is singular")]
    SingularNormalMatrix,

    #[error("residual covariance is singular (T < N or exact fit); FGLS is undefined")]
    SingularSigmaHat,

    #[error("lattice design needs a perfect-square size, got {n}")]
    NotPerfectSquare { n: usize },

    #[error("training split of fold {fold} leaves equation {equation} rank deficient")]
    RankDeficientTrainingSplit { fold: usize, equation: usize },

    #[error("every lambda failed on at least one fold")]
    NoValidLambda,

    #[error("size {n} exceeds the cap of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("Gamma_SS block is singular")]
    SingularGammaSS,

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    ConfigInvalid(Vec<String>),

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("shape mismatch in {file}: {detail}")]
    ShapeMismatch { file: PathBuf, detail: String },

    #[error("parse error in {file}: {detail}")]
    Parse { file: PathBuf, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short name used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonFinite { .. } => "NonFinite",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::SingularInput => "SingularInput",
            Error::RankDeficientRegressors { .. } => "RankDeficientRegressors",
            Error::SingularNormalMatrix => "SingularNormalMatrix",
            Error::SingularSigmaHat => "SingularSigmaHat",
            Error::NotPerfectSquare { .. } => "NotPerfectSquare",
            Error::RankDeficientTrainingSplit { .. } => "RankDeficientTrainingSplit",
            Error::NoValidLambda => "NoValidLambda",
            Error::TooLarge { .. } => "TooLarge",
            Error::SingularGammaSS => "SingularGammaSS",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::MissingFile(_) => "MissingFile",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::Parse { .. } => "Parse",
            Error::Io(_) => "IoError",
            Error::Json(_) => "IoError",
        }
    }
}
