use alloc::string::String;

/// Errors produced by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("icosphere subdivision level {requested} exceeds the limit of {max}")]
    SubdivisionLimit { requested: u32, max: u32 },
    #[error("mesh has no vertices or no faces")]
    EmptyMesh,
    #[error("mesh has zero extent")]
    DegenerateMesh,
    #[error("vertex {0} has no neighbors")]
    IsolatedVertex(usize),
    #[error("non-manifold mesh: {0}")]
    NonManifold(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid camera rig: {0}")]
    InvalidRig(String),
    #[error("zero-length normal")]
    ZeroNormal,
    #[error("buffer is {actual_width}x{actual_height}, camera expects {expected_width}x{expected_height}")]
    BufferMismatch {
        expected_width: usize,
        expected_height: usize,
        actual_width: usize,
        actual_height: usize,
    },
    #[error("tile size mismatch: {0}")]
    TileSizeMismatch(String),
    #[error("bundle image is {width}x{height}; expected width = 2*height with 4x2 square tiles")]
    BadAspect { width: usize, height: usize },
    #[error("bundle has no foreground pixels{0}")]
    AllBackground(String),
    #[error("mesh bounding box exceeds the normalized cube [-1.01, 1.01]^3")]
    OutsideNormalizedCube,
    #[error("no vertex is visible in any view (rig and bundle disagree)")]
    NoVisibleVertices,
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("mesh has zero surface area")]
    ZeroArea,
    #[error("image dimensions differ: {0}")]
    ImageMismatch(String),
    #[error("rig has {rig} views but bundle has {bundle}")]
    RigMismatch { rig: usize, bundle: usize },
    #[error("array shapes differ: {left} vs {right}")]
    ShapeMismatch { left: usize, right: usize },
    #[error("invalid control schedule: {0}")]
    InvalidSchedule(String),
}

pub type Result<T> = core::result::Result<T, Error>;
