use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("vanishing points incompatible with centered principal point")]
    IncompatibleVanishingPoints,

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("point projects to infinity")]
    AtInfinity,

    #[error("image ray is parallel to the ground plane (point on the horizon)")]
    Horizon,

    #[error("ground intersection lies behind the camera")]
    BehindCamera,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate record for track {track_id} frame {frame_index} on lines {first_line} and {second_line}")]
    DuplicateRecord {
        track_id: i64,
        frame_index: u64,
        first_line: usize,
        second_line: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
