//! Discrete-time navigation pipeline: sensing, mapping, strategy selection,
//! planning and control on one simulated clock.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::adapters::{
    baseline_strategy, eans_step, lookup_table_strategy, EansInputs, EansTrace, LookupTable,
    NavStrategy,
};
use crate::config::MissionConfig;
use crate::dynamics::{collision_check, Tracker, UavState};
use crate::energy::EnergyLedger;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::grid::{GridGeometry, MultiResolutionMap};
use crate::planner::{closest_approach, plan, trajectory_blocked, Trajectory};
use crate::world::{sense, Scenario};

/// Compute latencies of the pipeline stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingModel {
    /// Seconds per map cell in the sensed footprint.
    pub mapping_unit_cost: f64,
    /// Planning latency (s).
    pub t_p: f64,
    /// Command conversion latency (s).
    pub t_o: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self {
            mapping_unit_cost: 2e-6,
            t_p: 0.02,
            t_o: 0.005,
        }
    }
}

impl TimingModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.mapping_unit_cost >= 0.0) || !(self.t_p >= 0.0) || !(self.t_o >= 0.0) {
            return Err(Error::Config("timing costs must be non-negative".into()));
        }
        Ok(())
    }

    pub fn mapping_latency(&self, r: f64, d_c: f64) -> f64 {
        mapping_latency(r, d_c, self.mapping_unit_cost)
    }
}

/// Simulated time to integrate one frame: unit cost times the number of
/// cells of size `r` in a `d_c` by `d_c` footprint.
pub fn mapping_latency(r: f64, d_c: f64, unit_cost: f64) -> f64 {
    unit_cost * (d_c / r).powi(2)
}

/// Time from capture to command: `(sigma - 1) / h + t_m + t_p + t_o`.
/// Fails when one map update does not fit in a frame interval.
pub fn reaction_time(h: f64, sigma: u32, t_m: f64, t_p: f64, t_o: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Config("mapping frequency must be positive".into()));
    }
    if t_m > 1.0 / h {
        return Err(Error::TimingViolation {
            t_m,
            interval: 1.0 / h,
        });
    }
    Ok((sigma as f64 - 1.0) / h + t_m + t_p + t_o)
}

/// Strategy source of a mission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyMode {
    Baseline,
    LookupTable,
    Eans,
    /// A constant strategy, for controlled experiments.
    Fixed(NavStrategy),
}

impl StrategyMode {
    pub const ALL: [StrategyMode; 3] = [
        StrategyMode::Baseline,
        StrategyMode::LookupTable,
        StrategyMode::Eans,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyMode::Baseline => "baseline",
            StrategyMode::LookupTable => "lookup-table",
            StrategyMode::Eans => "eans",
            StrategyMode::Fixed(_) => "fixed",
        }
    }
}

impl fmt::Display for StrategyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(StrategyMode::Baseline),
            "lookup-table" | "lookup" | "lut" => Ok(StrategyMode::LookupTable),
            "eans" => Ok(StrategyMode::Eans),
            other => Err(Error::Usage(format!(
                "unknown mode '{other}' (expected baseline, lookup-table or eans)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalStatus {
    Goal,
    Collision,
    Timeout,
    PlanFailure,
}

impl TerminalStatus {
    pub fn name(&self) -> &'static str {
        match self {
            TerminalStatus::Goal => "goal",
            TerminalStatus::Collision => "collision",
            TerminalStatus::Timeout => "timeout",
            TerminalStatus::PlanFailure => "plan-failure",
        }
    }
}

impl fmt::Display for TerminalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const LOG_FORMAT: &str = "eans-mission-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub scenario: String,
    pub mode: StrategyMode,
    pub seed: u64,
    pub config: MissionConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    /// Active strategy.
    pub v_max: f64,
    pub h: f64,
    /// Active map resolution.
    pub r: f64,
    /// Fraction of the coming step the pipeline is busy.
    pub busy: f64,
    /// Obstacle pixels of the latest frame.
    pub rho: u32,
    /// Risk fields of the latest strategy evaluation, when the mode has them.
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    pub d: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapUpdateRecord {
    pub t: f64,
    pub frame: u64,
    pub r: f64,
    pub cells_touched: usize,
    pub rho: u32,
    /// Simulated mapping latency of this frame.
    pub t_m: f64,
    pub newly_occupied: bool,
}

/// One strategy evaluation. For EANS, `eans` carries the inputs needed to
/// re-check the frequency bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyRecord {
    pub t: f64,
    pub strategy: NavStrategy,
    pub eans: Option<EansRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EansRecord {
    pub v: f64,
    pub d: f64,
    pub sigma: u32,
    pub a_max: f64,
    /// Mapping latency the frequency adapter planned with.
    pub t_m: f64,
    /// `t_m + t_p + t_o`.
    pub t_s: f64,
    pub h: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub forced: bool,
    pub trace: EansTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplanRecord {
    pub t: f64,
    pub reason: ReplanReason,
    pub r: f64,
    pub length: f64,
    /// Time the new trajectory takes effect.
    pub ready: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplanReason {
    Initial,
    Requested,
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRecord {
    pub t: f64,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningRecord {
    pub t: f64,
    pub message: String,
}

/// Mission outcome and totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub status: TerminalStatus,
    pub t: f64,
    pub ticks: u64,
    pub frames: u64,
    pub path_length: f64,
    /// Sum of simulated mapping latencies.
    pub mapping_total_s: f64,
    /// Simulated time the pipeline spent busy.
    pub busy_s: f64,
    pub replans: u64,
    pub resolution_switches: u64,
    pub energy: EnergyLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header(LogHeader),
    Tick(TickRecord),
    MapUpdate(MapUpdateRecord),
    Strategy(StrategyRecord),
    Replan(ReplanRecord),
    Resolution(ResolutionRecord),
    Warning(WarningRecord),
    Terminal(MissionSummary),
}

/// Header, per-tick and per-event records, and exactly one terminal record.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionLog {
    pub records: Vec<LogRecord>,
    /// Wall-clock time spent in map integration. Not serialized.
    pub mapping_wall: Duration,
}

impl MissionLog {
    pub fn header(&self) -> &LogHeader {
        match self.records.first() {
            Some(LogRecord::Header(h)) => h,
            _ => panic!("mission log without header"),
        }
    }

    pub fn summary(&self) -> &MissionSummary {
        match self.records.last() {
            Some(LogRecord::Terminal(s)) => s,
            _ => panic!("mission log without terminal record"),
        }
    }

    pub fn ticks(&self) -> impl Iterator<Item = &TickRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Tick(t) => Some(t),
            _ => None,
        })
    }

    pub fn strategies(&self) -> impl Iterator<Item = &StrategyRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Strategy(s) => Some(s),
            _ => None,
        })
    }

    pub fn map_updates(&self) -> impl Iterator<Item = &MapUpdateRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::MapUpdate(m) => Some(m),
            _ => None,
        })
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses and checks a log: versioned header first, one terminal record
    /// last, strictly increasing tick times.
    pub fn read_jsonl(r: impl BufRead) -> Result<Self> {
        let mut records = Vec::new();
        for line in r.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                records.push(serde_json::from_str::<LogRecord>(&line)?);
            }
        }
        match records.first() {
            Some(LogRecord::Header(h)) if h.format == LOG_FORMAT && h.version == LOG_VERSION => {}
            Some(LogRecord::Header(h)) => {
                return Err(Error::Scenario(format!(
                    "unsupported log format {} v{}",
                    h.format, h.version
                )))
            }
            _ => return Err(Error::Scenario("log does not start with a header".into())),
        }
        let terminals = records
            .iter()
            .filter(|r| matches!(r, LogRecord::Terminal(_)))
            .count();
        if terminals != 1 || !matches!(records.last(), Some(LogRecord::Terminal(_))) {
            return Err(Error::Scenario(
                "log must end with exactly one terminal record".into(),
            ));
        }
        let log = Self {
            records,
            mapping_wall: Duration::ZERO,
        };
        let times: Vec<f64> = log.ticks().map(|t| t.t).collect();
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Scenario(
                "tick timestamps are not strictly increasing".into(),
            ));
        }
        Ok(log)
    }
}

/// Default simulated-time limit: ten times the straight-line flight at 0.5 m/s.
pub fn default_timeout(scenario: &Scenario) -> f64 {
    10.0 * scenario.start.distance(scenario.goal) / baseline_strategy().v_max
}

/// Work whose result lands after its compute latency.
struct Pending {
    ready: f64,
    strategy: NavStrategy,
    trajectory: Option<Trajectory>,
}

/// Busy intervals of the single compute resource.
#[derive(Default)]
struct BusyTracker {
    intervals: Vec<(f64, f64)>,
    free_at: f64,
}

impl BusyTracker {
    /// Queues `duration` of work submitted at `t`; returns its finish time.
    fn submit(&mut self, t: f64, duration: f64) -> f64 {
        let start = t.max(self.free_at);
        let end = start + duration;
        if duration > 0.0 {
            self.intervals.push((start, end));
        }
        self.free_at = end;
        end
    }

    /// Busy time within `[t0, t1)`; forgets intervals that ended.
    fn overlap(&mut self, t0: f64, t1: f64) -> f64 {
        let busy = self
            .intervals
            .iter()
            .map(|&(a, b)| (b.min(t1) - a.max(t0)).max(0.0))
            .sum();
        self.intervals.retain(|&(_, b)| b > t1);
        busy
    }
}

const TIME_EPS: f64 = 1e-9;
/// The sensor points at the trajectory point this far ahead: a fixed
/// distance (m) plus a speed-proportional part (s).
const SENSOR_AIM_MIN: f64 = 1.0;
const SENSOR_AIM_TIME: f64 = 0.5;

/// Runs one closed-loop mission to a terminal status.
///
/// Every `1/H` of simulated time the UAV senses, integrates the frame into
/// its map (busy for `t_m`), evaluates the mode's strategy and replans when
/// asked to or when the current trajectory became blocked (busy for `t_p`).
/// The resulting strategy and trajectory take effect once that work is
/// done. Dynamics advance every `dt` with `v_cmd = v_max`.
pub fn run_mission(
    scenario: &Scenario,
    mode: &StrategyMode,
    cfg: &MissionConfig,
    seed: u64,
) -> Result<MissionLog> {
    run_mission_named(scenario, "scenario", mode, cfg, seed)
}

/// [`run_mission`] with a scenario id recorded in the log header.
pub fn run_mission_named(
    scenario: &Scenario,
    scenario_id: &str,
    mode: &StrategyMode,
    cfg: &MissionConfig,
    seed: u64,
) -> Result<MissionLog> {
    cfg.validate()?;
    let dyn_cfg = &cfg.dynamics;
    scenario.validate(dyn_cfg.uav_radius)?;
    let sensor = &scenario.sensor;
    let d_c = sensor.max_range;
    let adapter = &cfg.adapter;
    let geometry = GridGeometry::from_bounds(&scenario.bounds);
    let mut map = MultiResolutionMap::new(geometry, adapter.ladder.clone())?;
    let lookup: Option<LookupTable> = match mode {
        StrategyMode::LookupTable => {
            let table = cfg.lookup_table(sensor.pixel_capacity);
            table.validate(adapter, sensor.pixel_capacity)?;
            Some(table)
        }
        _ => None,
    };
    if let StrategyMode::Fixed(s) = mode {
        if !s.is_valid_for(adapter) {
            return Err(Error::Config(format!(
                "fixed strategy {s:?} outside the configured ranges"
            )));
        }
    }
    let timeout = cfg.timeout.unwrap_or_else(|| default_timeout(scenario));
    let radius = dyn_cfg.planning_radius();
    let dt = dyn_cfg.dt;
    let a_max = adapter.a_max;
    let goal = scenario.goal;

    let mut records = vec![LogRecord::Header(LogHeader {
        format: LOG_FORMAT.into(),
        version: LOG_VERSION,
        scenario: scenario_id.into(),
        mode: *mode,
        seed,
        config: cfg.clone(),
    })];

    let mut strategy = match mode {
        StrategyMode::Baseline | StrategyMode::LookupTable => baseline_strategy(),
        StrategyMode::Fixed(s) => *s,
        StrategyMode::Eans => NavStrategy {
            v_max: adapter.v_lo(),
            h: *adapter.frequency_list.last().expect("validated"),
            r: adapter.ladder.finest(),
            replan: false,
        },
    };
    let mut state = UavState::at_rest(scenario.start);
    let mut trajectory: Option<(Trajectory, Tracker)> = None;
    let mut pending: Vec<Pending> = Vec::new();
    let mut busy = BusyTracker::default();
    let mut energy = EnergyLedger::default();
    let mut next_frame = 0.0;
    let mut frames = 0u64;
    let mut rho = 0u32;
    let mut risk: Option<(f64, f64, f64)> = None;
    let mut mapping_total = 0.0;
    let mut mapping_wall = Duration::ZERO;
    let mut busy_total = 0.0;
    let mut path_length = 0.0;
    let mut replans = 0u64;
    let mut switches = 0u64;
    let mut plan_failed = false;
    let mut k: u64 = 0;

    let status = loop {
        let t = k as f64 * dt;

        if t + TIME_EPS >= next_frame {
            frames += 1;
            let aim = match trajectory.as_mut() {
                Some((traj, tracker)) => {
                    let s = tracker.project(traj, state.position);
                    tracker.point_at(traj, s + SENSOR_AIM_TIME * state.speed() + SENSOR_AIM_MIN)
                }
                None => goal,
            };
            let heading = match (aim - state.position).normalized() {
                Some(dir) => dir.angle(),
                None => state.velocity.angle(),
            };
            let frame = sense(scenario, state.position, heading, t);
            rho = frame.obstacle_pixels;
            let r_int = map.resolution();
            let wall = Instant::now();
            let finest_before = map.finest().occupied_count();
            let (touched, grew) = map.integrate(&frame, adapter.sigma)?;
            let evidence_grew = map.finest().occupied_count() > finest_before;
            mapping_wall += wall.elapsed();
            let t_m = cfg.timing.mapping_latency(r_int, d_c);
            mapping_total += t_m;
            records.push(LogRecord::MapUpdate(MapUpdateRecord {
                t,
                frame: frames,
                r: r_int,
                cells_touched: touched,
                rho,
                t_m,
                newly_occupied: grew,
            }));

            let remaining = trajectory
                .as_ref()
                .map(|(traj, tracker)| traj.suffix(tracker.segment(), state.position));
            let (mut next, eans) = match mode {
                StrategyMode::Baseline => (baseline_strategy(), None),
                StrategyMode::Fixed(s) => (*s, None),
                StrategyMode::LookupTable => (
                    lookup_table_strategy(rho, lookup.as_ref().expect("built above"))?,
                    None,
                ),
                StrategyMode::Eans => {
                    let span = state.position.distance(goal);
                    let (length, approach) = match &remaining {
                        Some(rem) => {
                            let window = rem.prefix(d_c);
                            let step = map.ladder().finest() / 2.0;
                            (
                                rem.length(),
                                closest_approach(&window, map.finest(), d_c, step),
                            )
                        }
                        None => (span, None),
                    };
                    let inputs = EansInputs {
                        velocity: state.velocity,
                        approach,
                        max_range: d_c,
                        obstacle_pixels: rho,
                        pixel_capacity: sensor.pixel_capacity,
                        length,
                        span,
                    };
                    let out = eans_step(&inputs, adapter, &cfg.timing, &geometry)?;
                    let tr = out.trace;
                    risk = Some((tr.beta, tr.eta, tr.d));
                    let t_m_plan = cfg.timing.mapping_latency(adapter.ladder.finest(), d_c);
                    if tr.forced_frequency {
                        records.push(LogRecord::Warning(WarningRecord {
                            t,
                            message: format!(
                                "no frequency supports v = {} at d = {}; forced {} Hz",
                                out.strategy.v_max, tr.d, out.strategy.h
                            ),
                        }));
                    }
                    let rec = EansRecord {
                        v: out.strategy.v_max,
                        d: tr.d,
                        sigma: adapter.sigma,
                        a_max,
                        t_m: t_m_plan,
                        t_s: t_m_plan + cfg.timing.t_p + cfg.timing.t_o,
                        h: out.strategy.h,
                        h_min: tr.h_min,
                        h_max: tr.h_max,
                        forced: tr.forced_frequency,
                        trace: tr,
                    };
                    (out.strategy, Some(rec))
                }
            };

            let from = map.resolution();
            let switched = map.set_resolution(next.r)?;
            if switched {
                switches += 1;
                records.push(LogRecord::Resolution(ResolutionRecord {
                    t,
                    from,
                    to: next.r,
                }));
            }

            let reason = if trajectory.is_none() && pending.iter().all(|p| p.trajectory.is_none()) {
                Some(ReplanReason::Initial)
            } else if next.replan {
                Some(ReplanReason::Requested)
            } else if evidence_grew
                && remaining
                    .as_ref()
                    .is_some_and(|rem| trajectory_blocked(rem, map.finest(), radius))
            {
                Some(ReplanReason::Blocked)
            } else {
                None
            };

            let mut new_traj = None;
            if let Some(reason) = reason {
                let attempt = plan(map.finest(), state.position, goal, radius, t);
                match attempt {
                    Ok(res) => {
                        replans += 1;
                        new_traj = Some((res.trajectory, reason));
                    }
                    Err(Error::NoPath) => plan_failed = true,
                    Err(e) => return Err(e),
                }
            }
            next.r = map.resolution();

            let work = t_m
                + if new_traj.is_some() {
                    cfg.timing.t_p
                } else {
                    0.0
                };
            let ready = busy.submit(t, work);
            records.push(LogRecord::Strategy(StrategyRecord {
                t,
                strategy: next,
                eans,
            }));
            if let Some((traj, reason)) = &new_traj {
                records.push(LogRecord::Replan(ReplanRecord {
                    t,
                    reason: *reason,
                    r: map.ladder().finest(),
                    length: traj.length(),
                    ready,
                }));
            }
            pending.push(Pending {
                ready,
                strategy: next,
                trajectory: new_traj.map(|(tr, _)| tr),
            });
            next_frame += 1.0 / next.h;
            if next_frame < t {
                next_frame = t + 1.0 / next.h;
            }
        }

        while pending.first().is_some_and(|p| p.ready <= t + TIME_EPS) {
            let p = pending.remove(0);
            strategy = p.strategy;
            if let Some(traj) = p.trajectory {
                let tracker = Tracker::new(&traj).with_corner_caps(
                    &traj,
                    dyn_cfg.lookahead_time,
                    dyn_cfg.corner_tolerance,
                );
                trajectory = Some((traj, tracker));
            }
        }

        let busy_frac = busy.overlap(t, t + dt) / dt;
        records.push(LogRecord::Tick(TickRecord {
            t,
            x: state.position.x,
            y: state.position.y,
            speed: state.speed(),
            v_max: strategy.v_max,
            h: strategy.h,
            r: map.resolution(),
            busy: busy_frac,
            rho,
            beta: risk.map(|r| r.0),
            eta: risk.map(|r| r.1),
            d: risk.map(|r| r.2),
        }));

        if collision_check(&state, scenario, dyn_cfg.uav_radius) {
            break TerminalStatus::Collision;
        }
        if state.position.distance(goal) < dyn_cfg.uav_radius {
            break TerminalStatus::Goal;
        }
        if plan_failed {
            break TerminalStatus::PlanFailure;
        }
        if t >= timeout {
            break TerminalStatus::Timeout;
        }

        let next_state = match trajectory.as_mut() {
            Some((traj, tracker)) => {
                let lookahead = dyn_cfg.lookahead(state.speed());
                tracker.step(&state, traj, strategy.v_max, a_max, dt, lookahead)
            }
            None => brake(&state, a_max, dt),
        };
        let avg_speed = 0.5 * (state.speed() + next_state.speed());
        energy.accrue_split(&cfg.power, avg_speed, busy_frac, dt);
        busy_total += busy_frac * dt;
        path_length += state.position.distance(next_state.position);
        state = UavState {
            time: (k + 1) as f64 * dt,
            ..next_state
        };
        k += 1;
    };

    records.push(LogRecord::Terminal(MissionSummary {
        status,
        t: k as f64 * dt,
        ticks: k + 1,
        frames,
        path_length,
        mapping_total_s: mapping_total,
        busy_s: busy_total,
        replans,
        resolution_switches: switches,
        energy,
    }));
    Ok(MissionLog {
        records,
        mapping_wall,
    })
}

/// Decelerates in place along the current velocity.
fn brake(state: &UavState, a_max: f64, dt: f64) -> UavState {
    let speed = state.speed();
    let new_speed = (speed - a_max * dt).max(0.0);
    let dir = state.velocity.normalized().unwrap_or(Vec2::ZERO);
    UavState {
        position: state.position + dir * (0.5 * (speed + new_speed) * dt),
        velocity: dir * new_speed,
        time: state.time + dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_examples() {
        assert!((mapping_latency(0.1, 5.0, 2e-6) - 5.0e-3).abs() < 1e-15);
        assert!((mapping_latency(0.5, 5.0, 2e-6) - 2.0e-4).abs() < 1e-15);
        assert!(mapping_latency(0.1, 5.0, 1e-9) > mapping_latency(0.5, 5.0, 1e-9));
    }

    #[test]
    fn reaction_time_examples() {
        let t = reaction_time(10.0, 3, 0.02, 0.02, 0.01).unwrap();
        assert!((t - 0.25).abs() < 1e-12);
        let t = reaction_time(7.0, 1, 0.01, 0.02, 0.005).unwrap();
        assert!((t - 0.035).abs() < 1e-12);
        assert!(matches!(
            reaction_time(30.0, 3, 0.04, 0.0, 0.0),
            Err(Error::TimingViolation { .. })
        ));
    }

    #[test]
    fn busy_tracker_queues_work() {
        let mut b = BusyTracker::default();
        assert_eq!(b.submit(0.0, 0.015), 0.015);
        assert_eq!(b.submit(0.01, 0.01), 0.025);
        assert!((b.overlap(0.0, 0.01) - 0.01).abs() < 1e-15);
        assert!((b.overlap(0.01, 0.02) - 0.01).abs() < 1e-15);
        assert!((b.overlap(0.02, 0.03) - 0.005).abs() < 1e-15);
        assert_eq!(b.overlap(0.03, 0.04), 0.0);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in StrategyMode::ALL {
            assert_eq!(m.name().parse::<StrategyMode>().unwrap(), m);
        }
        assert!(matches!(
            "fast".parse::<StrategyMode>(),
            Err(Error::Usage(_))
        ));
    }
}
