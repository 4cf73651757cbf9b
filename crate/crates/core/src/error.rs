use thiserror::Error;

use crate::geometry::Vec2;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("scenario generation failed in zone {zone}: {reason}")]
    Generation { zone: usize, reason: String },

    #[error("point ({}, {}) lies outside the grid extent", .0.x, .0.y)]
    OutOfExtent(Vec2),

    #[error("resolution {0} m is not on the resolution ladder")]
    NotOnLadder(f64),

    #[error("region has zero area")]
    EmptyRegion,

    #[error("frame timestamp {frame} precedes last integration at {last}")]
    StaleFrame { frame: f64, last: f64 },

    #[error("mapping time {t_m} s exceeds the update interval {interval} s")]
    TimingViolation { t_m: f64, interval: f64 },

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("no path from start to goal")]
    NoPath,

    #[error("baseline ledger missing or zero")]
    MissingBaseline,

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
