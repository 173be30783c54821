use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value in field `{0}`")]
    NonFinite(String),

    #[error("unresolved field: spectral tail fraction {tail:.3e} exceeds {limit:.1e}")]
    Unresolved { tail: f64, limit: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("evolution produced NaN/Inf at step {step} (t = {time})")]
    Blowup { step: usize, time: f64 },

    #[error("Picard iteration diverged; contraction ratios {ratios:?}")]
    PicardDivergence { ratios: Vec<f64> },

    #[error("band limit violated: {detail}; need N >= {required_n}")]
    BandLimit { detail: String, required_n: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("sinogram error: {0}")]
    Sinogram(String),

    #[error("noise amplification factor {factor:.2} exceeds {limit}")]
    NoiseAmplification { factor: f64, limit: f64 },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
