//! Deterministic closed-loop simulator for environment-adaptive UAV
//! navigation: a point-mass UAV senses a 2D world, builds a multi-resolution
//! occupancy map, and picks its speed, mapping rate and map resolution from
//! what it sees.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapters;
pub mod config;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod pipeline;
pub mod planner;
pub mod world;

pub use adapters::{AdapterConfig, LookupTable, NavStrategy};
pub use config::MissionConfig;
pub use error::{Error, Result};
pub use geometry::{Aabb, Vec2};
pub use harness::{BatchResult, BatchSpec, MetricsRow, ScenarioEntry, TraceKind};
pub use pipeline::{
    run_mission, MissionLog, MissionSummary, StrategyMode, TerminalStatus, TimingModel,
};
pub use world::Scenario;
