use thiserror::Error;

/// Errors raised by gait synthesis, modification and scenario handling.
#[derive(Debug, Error)]
pub enum GaitError {
    #[error("invalid mechanism model: {0}")]
    InvalidModel(String),

    #[error("degenerate footprint: {0}")]
    DegenerateFootprint(String),

    #[error("invalid gait parameters: {0}")]
    InvalidParameters(String),

    #[error("{leg} leg cannot reach: required {required:.4} m, available {available:.4} m")]
    Unreachable {
        leg: &'static str,
        required: f64,
        available: f64,
    },

    #[error("semi-inverse trunk solver failed at sample {sample}: |Mx| = {mx:.3e} N·m, |My| = {my:.3e} N·m")]
    TrunkSolver { sample: usize, mx: f64, my: f64 },

    #[error("gait is not cyclic: mirror mismatch {mismatch:.3e} rad")]
    NonCyclic { mismatch: f64 },

    #[error("invalid modification: {0}")]
    InvalidModification(String),

    #[error("compensation on joint {0} is not allowed (allowed: 3, 4, 15, 16)")]
    DisallowedJoint(usize),

    #[error("trajectory: {0}")]
    Trajectory(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = GaitError> = std::result::Result<T, E>;
