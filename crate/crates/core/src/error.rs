use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid dimensions {width}x{height} for {len} values")]
    Dimensions {
        width: usize,
        height: usize,
        len: usize,
    },

    #[error("non-finite value at pixel ({x}, {y})")]
    NonFinite { x: usize, y: usize },

    #[error("grid size mismatch: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),

    #[error("contour vanished: level set has a uniform sign")]
    ContourVanished,

    #[error("{family}: value {value} outside support ({support})")]
    Support {
        family: &'static str,
        value: f64,
        support: &'static str,
    },

    #[error("{region} region model failed: {source}")]
    RegionSupport {
        region: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{family}: natural parameter {eta:?} outside the natural domain")]
    Domain { family: &'static str, eta: Vec<f64> },

    #[error("{family}: estimation failed: {cause}")]
    Estimation { family: &'static str, cause: String },

    #[error("empty region: {0}")]
    EmptyRegion(&'static str),

    #[error("moment order {0} out of range (0..=30)")]
    OrderRange(usize),

    #[error("moment order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),

    #[error("shape out of canvas: {0}")]
    OutOfCanvas(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("non-finite energy at outer iteration {0}")]
    NonFiniteEnergy(usize),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
