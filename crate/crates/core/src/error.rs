use thiserror::Error;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid development:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),

    #[error("surface is not a sphere: {0}")]
    Topology(String),

    #[error("metric is not convex:\n  {}", .0.iter().map(|(v, d)| format!("vertex {v} has deficit {d} outside (0, 2π)")).collect::<Vec<_>>().join("\n  "))]
    NonConvex(Vec<(usize, f64)>),

    #[error("degenerate triangle with sides ({0}, {1}, {2})")]
    DegenerateTriangle(f64, f64, f64),

    #[error("no spherical triangle with sides ({0}, {1}, {2})")]
    NoSphericalTriangle(f64, f64, f64),

    /// A sine in a derivative denominator fell below the threshold. Callers
    /// that step along a path treat this as a request for a smaller step.
    #[error("near-degenerate angle configuration (sine {0:e})")]
    NearDegenerate(f64),

    #[error("points are collinear")]
    Collinear,

    #[error("flip refused: quadrilateral around edge {edge} is not strictly convex")]
    FlipRefused { edge: usize },

    #[error("flip limit of {limit} exceeded")]
    FlipLimit { limit: usize },

    #[error("bad edge {edge} cannot be flipped; weights are not admissible")]
    Inadmissible { edge: usize },

    #[error("no pyramid over face {face} (Cayley-Menger determinant {cm:e})")]
    NoPyramid { face: usize, cm: f64 },

    #[error("invalid generalized polytope: {0}")]
    InvalidPolytope(String),

    #[error("no admissible initial radius after {doublings} doublings")]
    InitialRadius { doublings: usize },

    #[error("continuation stalled at t = {t:e} with step {dt:e}: {reason}")]
    StepTooSmall { t: f64, dt: f64, reason: String },

    #[error("face placement does not close up (residual {residual:e})")]
    Closure { residual: f64 },

    #[error("apex iteration did not converge in {iterations} iterations")]
    ApexIterations { iterations: usize },

    #[error("vertex count mismatch: {0} vs {1}")]
    VertexMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
