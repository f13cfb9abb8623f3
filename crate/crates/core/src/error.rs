use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("rotation is not orthonormal (max |RᵀR - I| = {0:e})")]
    NotOrthonormal(f64),
    #[error("rotation has determinant {0}, expected +1")]
    Reflection(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("feature stride must be positive")]
    InvalidStride,
    #[error("ray direction has zero length")]
    ZeroDirection,
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("cell ({i}, {j}) outside the {rows}x{cols} feature grid")]
    PixelOutOfGrid {
        i: usize,
        j: usize,
        rows: usize,
        cols: usize,
    },
    #[error("invalid box: {0}")]
    InvalidBox(String),
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("scene invariant violated at `{path}`: {message}")]
    Invariant { path: String, message: String },
    #[error("invalid generator parameters: {0}")]
    Params(String),
    #[error("scene I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SceneError {
    pub(crate) fn invariant(path: impl Into<String>, message: impl ToString) -> Self {
        SceneError::Invariant {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasError {
    #[error("camera {0} not present in scene")]
    UnknownCamera(usize),
    #[error("march step must be positive, got {0}")]
    BadMarchStep(f64),
    #[error("malformed mask file: {0}")]
    Format(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CbsError {
    #[error("lambda must be >= 1, got {0}")]
    BadLambda(f64),
    #[error("keeping ratio must lie in (0, 1], got {0}")]
    BadRatio(f64),
    #[error("salience grid is invalid: {0}")]
    BadSalience(String),
    #[error("label {label} at token {index} outside [0, {classes})")]
    BadLabel { index: usize, label: usize, classes: usize },
    #[error("length mismatch: {0}")]
    Shape(String),
    #[error("grid mismatch: tokens are {tokens:?}, mask is {mask:?}")]
    GridMismatch {
        tokens: (usize, usize),
        mask: (usize, usize),
    },
    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RayPeError {
    #[error("need at least {min} anchors, got {got}")]
    TooFewAnchors { min: usize, got: usize },
    #[error("depth range must satisfy 0 < d_min < d_max, got [{0}, {1}]")]
    BadDepthRange(f64, f64),
    #[error("embedding dimension must be >= 2, got {0}")]
    BadEmbedDim(usize),
    #[error("anchor dump check failed: {0}")]
    Dump(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("malformed image: {0}")]
    Format(String),
    #[error("token index {index} outside a {rows}x{cols} grid")]
    TokenOutOfRange { index: usize, rows: usize, cols: usize },
}
