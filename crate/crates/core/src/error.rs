use std::io;

use thiserror::Error;

/// Errors produced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: negative power value {value} W")]
    NegativeWatts { line: usize, value: f64 },

    #[error("series is empty")]
    EmptySeries,

    #[error("range [{start}, {start}+{len}) exceeds series of length {available}")]
    OutOfRange {
        start: usize,
        len: usize,
        available: usize,
    },

    #[error("reference pattern of {template} samples is longer than the day ({day} samples)")]
    TemplateLongerThanDay { template: usize, day: usize },

    #[error("delta must lie strictly between 0 and 1, got {0}")]
    DeltaOutOfRange(f64),

    #[error("DTW input sequence is empty")]
    EmptySequence,

    #[error("invalid single usage profile model: {0}")]
    InvalidSupro(String),

    #[error("invalid usage intensity: {0}")]
    InvalidIntensity(String),

    #[error("empirical distribution needs at least one sample")]
    EmptyInput,

    #[error("invalid turn-on time {0} (must be a second of the day)")]
    InvalidTurnOn(u32),

    #[error("could not place usage {usage} without overlap after {retries} retries")]
    PlacementFailed { usage: usize, retries: usize },

    #[error("invalid tariff schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
