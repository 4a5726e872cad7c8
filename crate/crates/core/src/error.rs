use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by mesh I/O, fitting, texture processing and matching.
#[derive(Error, Debug)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("OBJ parse error at line {line}: {msg}")]
    ObjParse { line: usize, msg: String },

    #[error("non-triangle face at line {line} ({verts} vertices)")]
    NonTriangleFace { line: usize, verts: usize },

    #[error("mesh has no texture coordinates (vt records required)")]
    MissingUvs,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid landmarks: {0}")]
    InvalidLandmarks(String),

    #[error("json error in {path}: {msg}")]
    Json { path: PathBuf, msg: String },

    #[error("config error in {path}: {msg}")]
    Config { path: PathBuf, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "triplane texel collision at resolution {resolution}: vertices {vertex_a} (uv {uv_a:?}) \
         and {vertex_b} (uv {uv_b:?}) map to the same texel{hint}",
        hint = match .min_resolution {
            Some(r) => format!("; minimum collision-free resolution is {r}"),
            None => "; the UVs coincide, no resolution separates them".to_string(),
        }
    )]
    TexelCollision {
        vertex_a: usize,
        vertex_b: usize,
        uv_a: [f64; 2],
        uv_b: [f64; 2],
        resolution: usize,
        min_resolution: Option<usize>,
    },

    #[error("vertex {vertex} has no valid triplane texel")]
    MissingTexel { vertex: usize },

    #[error("point at or behind the camera plane (depth {depth:.3e})")]
    BehindCamera { depth: f64 },

    #[error("too few landmarks: {got} (at least {required} required for pose observability)")]
    TooFewLandmarks { got: usize, required: usize },

    #[error("geometry fit diverged at iteration {iteration}: loss became non-finite")]
    GeomFitDiverged {
        iteration: usize,
        /// Last finite state: (mesh, pose, report serialized elsewhere by the caller).
        partial: Box<crate::geomfit::GeomFitPartial>,
    },

    #[error("texture fit diverged at level {level} iteration {iteration}")]
    TexFitDiverged {
        level: usize,
        iteration: usize,
        partial: Box<crate::texfit::TexFitPartial>,
    },

    #[error("image dimension mismatch: {expected} vs {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid image file {path}: {msg}")]
    ImageFormat { path: PathBuf, msg: String },

    #[error("downsampling requested: {from} -> {to} (upsample only)")]
    Downsample { from: usize, to: usize },

    #[error("mask interior is empty")]
    EmptyMaskInterior,

    #[error("mask touches the image border (a guard band of at least 1 texel is required)")]
    MaskTouchesBorder,

    #[error("empty pixel region: {0}")]
    EmptyRegion(String),

    #[error("missing required labels: {}", .0.join(", "))]
    MissingLabels(Vec<String>),

    #[error("unknown label color {color:?} at texel ({x}, {y})")]
    UnknownLabelColor { color: [u8; 3], x: usize, y: usize },

    #[error("zero-norm vector in cosine similarity")]
    ZeroNormVector,

    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    EmbeddingDim { expected: usize, got: usize },

    #[error("catalog has no entries in category {0}")]
    EmptyCategory(String),

    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),

    #[error("pipeline stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn stage(stage: &'static str, source: Error) -> Self {
        Error::Stage { stage, source: Box::new(source) }
    }

    /// True for errors caused by bad configuration or unreadable inputs, as
    /// opposed to failures inside a fitting stage.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Json { .. } | Error::Io { .. })
    }
}
