use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("altitude must be non-negative, got {0}")]
    NegativeAltitude(f64),
    #[error("segment endpoints coincide")]
    DegenerateSegment,
    #[error("cylinder needs positive radius and height (radius {radius}, height {height})")]
    InvalidCylinder { radius: f64, height: f64 },
    #[error("field-of-view angle must lie strictly between 0 and 90 degrees, got {0}")]
    InvalidFov(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment: {0}")]
    Invalid(String),
    #[error("could not place {requested} non-overlapping obstacles after {attempts} attempts")]
    Placement { requested: usize, attempts: usize },
    #[error("episode already finished at step {0}")]
    EpisodeFinished(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("invalid reward parameters: {0}")]
    Invalid(String),
    #[error("positive reward needs altitude > 0, got {0}")]
    NonPositiveAltitude(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QNetError {
    #[error("input dimension mismatch: network expects {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("replay buffer holds {available} experiences, {requested} requested")]
    Underfilled { available: usize, requested: usize },
    #[error("invalid network: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Network(#[from] QNetError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("{key} = {value} is outside the allowed range {min}–{max} ({label})")]
    OutOfRange {
        key: String,
        value: f64,
        min: f64,
        max: f64,
        label: &'static str,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Top-level error for training and evaluation runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    QNet(#[from] QNetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Schema(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
