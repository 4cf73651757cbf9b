//! Batch runner, density sweeps and trace export.
//!
//! Missions are independent jobs. They run on the rayon pool and results are
//! collected in job order, so outputs do not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::MissionConfig;
use crate::energy::EnergyLedger;
use crate::error::{Error, Result};
use crate::pipeline::{run_mission_named, MissionLog, StrategyMode, TerminalStatus};
use crate::world::{presets, Scenario};

/// Where a batch gets its scenario from.
#[derive(Debug, Clone)]
pub enum ScenarioSource {
    /// A named preset, regenerated for every seed.
    Preset(String),
    /// A fixed scenario; the seed only reaches the mission.
    Fixed(Scenario),
}

#[derive(Debug, Clone)]
pub struct ScenarioEntry {
    pub id: String,
    pub source: ScenarioSource,
}

impl ScenarioEntry {
    pub fn preset(name: &str) -> Self {
        Self {
            id: name.to_string(),
            source: ScenarioSource::Preset(name.to_string()),
        }
    }

    pub fn fixed(id: &str, scenario: Scenario) -> Self {
        Self {
            id: id.to_string(),
            source: ScenarioSource::Fixed(scenario),
        }
    }

    /// Loads a scenario file, or resolves a preset name when no such file exists.
    pub fn resolve(arg: &str) -> Result<Self> {
        let path = Path::new(arg);
        if path.is_file() {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or(arg);
            return Ok(Self::fixed(id, Scenario::load(path)?));
        }
        presets::by_name(arg, 0)?;
        Ok(Self::preset(arg))
    }

    pub fn instantiate(&self, seed: u64) -> Result<Scenario> {
        match &self.source {
            ScenarioSource::Preset(name) => presets::by_name(name, seed),
            ScenarioSource::Fixed(s) => Ok(s.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchSpec {
    pub scenarios: Vec<ScenarioEntry>,
    pub modes: Vec<StrategyMode>,
    pub seeds: Vec<u64>,
    pub config: MissionConfig,
}

impl BatchSpec {
    fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.modes.is_empty() || self.seeds.is_empty() {
            return Err(Error::Usage(
                "a batch needs at least one scenario, mode and seed".into(),
            ));
        }
        self.config.validate()
    }
}

/// One mission's metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub mode: String,
    pub scenario: String,
    pub seed: u64,
    pub status: String,
    pub mapping_total_ms: f64,
    pub mapping_avg_ms: f64,
    /// Simulated share of mission time the pipeline was busy. Not a CPU measurement.
    pub compute_busy_pct: f64,
    pub trajectory_length_m: f64,
    pub flight_time_s: f64,
    pub flight_j: f64,
    pub compute_j: f64,
    /// Total energy relative to the baseline mission on the same scenario and seed.
    pub energy_pct: Option<f64>,
}

impl MetricsRow {
    pub fn from_log(scenario: &str, log: &MissionLog) -> Self {
        let s = log.summary();
        let frames = s.frames.max(1) as f64;
        Self {
            mode: log.header().mode.name().to_string(),
            scenario: scenario.to_string(),
            seed: log.header().seed,
            status: s.status.name().to_string(),
            mapping_total_ms: s.mapping_total_s * 1e3,
            mapping_avg_ms: s.mapping_total_s * 1e3 / frames,
            compute_busy_pct: if s.t > 0.0 {
                s.busy_s / s.t * 100.0
            } else {
                0.0
            },
            trajectory_length_m: s.path_length,
            flight_time_s: s.t,
            flight_j: s.energy.flight_j,
            compute_j: s.energy.compute_j,
            energy_pct: None,
        }
    }

    pub fn energy(&self) -> EnergyLedger {
        EnergyLedger {
            flight_j: self.flight_j,
            compute_j: self.compute_j,
        }
    }
}

/// Means over the missions of one (scenario, mode) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scenario: String,
    pub mode: String,
    pub missions: usize,
    pub goals: usize,
    pub collisions: usize,
    pub mapping_total_ms: f64,
    pub mapping_avg_ms: f64,
    pub compute_busy_pct: f64,
    pub trajectory_length_m: f64,
    pub flight_time_s: f64,
    pub flight_j: f64,
    pub compute_j: f64,
    pub energy_pct: Option<f64>,
}

/// Fills `energy_pct` from the baseline row sharing scenario and seed.
pub fn normalize_energy(rows: &mut [MetricsRow]) {
    let baselines: BTreeMap<(String, u64), f64> = rows
        .iter()
        .filter(|r| r.mode == StrategyMode::Baseline.name())
        .map(|r| ((r.scenario.clone(), r.seed), r.energy().total()))
        .collect();
    for row in rows.iter_mut() {
        row.energy_pct = baselines
            .get(&(row.scenario.clone(), row.seed))
            .filter(|&&b| b > 0.0)
            .map(|&b| row.energy().total() / b * 100.0);
    }
}

/// Per-(scenario, mode) means, in first-appearance order.
pub fn aggregate(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.scenario.clone(), r.mode.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let n = g.len() as f64;
            let mean = |f: fn(&MetricsRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / n;
            let pct: Vec<f64> = g.iter().filter_map(|r| r.energy_pct).collect();
            AggregateRow {
                scenario: key.0,
                mode: key.1,
                missions: g.len(),
                goals: g
                    .iter()
                    .filter(|r| r.status == TerminalStatus::Goal.name())
                    .count(),
                collisions: g
                    .iter()
                    .filter(|r| r.status == TerminalStatus::Collision.name())
                    .count(),
                mapping_total_ms: mean(|r| r.mapping_total_ms),
                mapping_avg_ms: mean(|r| r.mapping_avg_ms),
                compute_busy_pct: mean(|r| r.compute_busy_pct),
                trajectory_length_m: mean(|r| r.trajectory_length_m),
                flight_time_s: mean(|r| r.flight_time_s),
                flight_j: mean(|r| r.flight_j),
                compute_j: mean(|r| r.compute_j),
                energy_pct: (pct.len() == g.len()).then(|| pct.iter().sum::<f64>() / n),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MissionRun {
    pub scenario: String,
    pub log: MissionLog,
}

impl MissionRun {
    pub fn file_name(&self) -> String {
        let h = self.log.header();
        format!(
            "{}__{}__s{}.jsonl",
            sanitize(&self.scenario),
            h.mode.name(),
            h.seed
        )
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub rows: Vec<MetricsRow>,
    pub aggregates: Vec<AggregateRow>,
    pub missions: Vec<MissionRun>,
}

impl BatchResult {
    pub fn collisions(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.status == TerminalStatus::Collision.name())
            .count()
    }

    /// Wall-clock time spent in map integration across all missions.
    pub fn mapping_wall(&self) -> Duration {
        self.missions.iter().map(|m| m.log.mapping_wall).sum()
    }

    /// Writes `metrics.csv`, `aggregate.csv` and one JSONL log per mission under `logs/`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let logs = dir.join("logs");
        fs::create_dir_all(&logs)?;
        fs::write(dir.join("metrics.csv"), to_csv(&self.rows)?)?;
        fs::write(dir.join("aggregate.csv"), to_csv(&self.aggregates)?)?;
        for m in &self.missions {
            fs::write(logs.join(m.file_name()), m.log.to_jsonl())?;
        }
        Ok(())
    }
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn run_jobs(spec: &BatchSpec, parallel: bool) -> Result<BatchResult> {
    spec.validate()?;
    let jobs: Vec<(&ScenarioEntry, u64, &StrategyMode)> = spec
        .scenarios
        .iter()
        .flat_map(|sc| {
            spec.seeds
                .iter()
                .flat_map(move |&seed| spec.modes.iter().map(move |m| (sc, seed, m)))
        })
        .collect();
    let one = |&(entry, seed, mode): &(&ScenarioEntry, u64, &StrategyMode)| -> Result<MissionRun> {
        let scenario = entry.instantiate(seed)?;
        let log = run_mission_named(&scenario, &entry.id, mode, &spec.config, seed)?;
        log::debug!(
            "{} {} seed {}: {}",
            entry.id,
            mode,
            seed,
            log.summary().status.name()
        );
        Ok(MissionRun {
            scenario: entry.id.clone(),
            log,
        })
    };
    let missions: Vec<MissionRun> = if parallel {
        jobs.par_iter().map(one).collect::<Result<_>>()?
    } else {
        jobs.iter().map(one).collect::<Result<_>>()?
    };
    let mut rows: Vec<MetricsRow> = missions
        .iter()
        .map(|m| MetricsRow::from_log(&m.scenario, &m.log))
        .collect();
    normalize_energy(&mut rows);
    let aggregates = aggregate(&rows);
    Ok(BatchResult {
        rows,
        aggregates,
        missions,
    })
}

/// Runs every (scenario, seed, mode) tuple on the rayon pool.
pub fn run(spec: &BatchSpec) -> Result<BatchResult> {
    run_jobs(spec, true)
}

/// Same as [`run`] on the calling thread.
pub fn run_sequential(spec: &BatchSpec) -> Result<BatchResult> {
    run_jobs(spec, false)
}

pub const MAX_SWEEP_DENSITY: f64 = 0.4;

/// One cell of a density sweep; metric columns are empty on skipped rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub density: f64,
    pub mode: String,
    pub seed: u64,
    pub status: String,
    pub flight_time_s: Option<f64>,
    pub energy_pct: Option<f64>,
    pub compute_busy_pct: Option<f64>,
    pub mapping_total_ms: Option<f64>,
    pub trajectory_length_m: Option<f64>,
    pub warning: Option<String>,
}

pub const SKIPPED: &str = "skipped";

/// Runs uniform fields of each density with shared seeds across modes.
///
/// A density whose field cannot be generated for some seed yields one
/// `skipped` row per mode carrying the generation error.
pub fn density_sweep(
    densities: &[f64],
    modes: &[StrategyMode],
    seeds: &[u64],
    config: &MissionConfig,
) -> Result<Vec<SweepRow>> {
    if let Some(d) = densities
        .iter()
        .find(|d| !(0.0..=MAX_SWEEP_DENSITY).contains(*d))
    {
        return Err(Error::Usage(format!(
            "density {d} outside [0, {MAX_SWEEP_DENSITY}]"
        )));
    }
    let mut out = Vec::new();
    for &density in densities {
        let name = format!("uniform-{density}");
        let mut fixed = Vec::new();
        for &seed in seeds {
            match presets::uniform(density, seed) {
                Ok(s) => fixed.push((seed, s)),
                Err(e) => {
                    log::warn!("density {density} seed {seed}: {e}");
                    out.extend(modes.iter().map(|m| SweepRow {
                        density,
                        mode: m.name().to_string(),
                        seed,
                        status: SKIPPED.to_string(),
                        flight_time_s: None,
                        energy_pct: None,
                        compute_busy_pct: None,
                        mapping_total_ms: None,
                        trajectory_length_m: None,
                        warning: Some(e.to_string()),
                    }));
                }
            }
        }
        for (seed, scenario) in fixed {
            let spec = BatchSpec {
                scenarios: vec![ScenarioEntry::fixed(&name, scenario)],
                modes: modes.to_vec(),
                seeds: vec![seed],
                config: config.clone(),
            };
            out.extend(run(&spec)?.rows.into_iter().map(|r| SweepRow {
                density,
                mode: r.mode,
                seed,
                status: r.status,
                flight_time_s: Some(r.flight_time_s),
                energy_pct: r.energy_pct,
                compute_busy_pct: Some(r.compute_busy_pct),
                mapping_total_ms: Some(r.mapping_total_ms),
                trajectory_length_m: Some(r.trajectory_length_m),
                warning: None,
            }));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    VelocityCurve,
    BusyCurve,
    PathHeatmap,
}

impl TraceKind {
    pub const ALL: [TraceKind; 3] = [
        TraceKind::VelocityCurve,
        TraceKind::BusyCurve,
        TraceKind::PathHeatmap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TraceKind::VelocityCurve => "velocity-curve",
            TraceKind::BusyCurve => "busy-curve",
            TraceKind::PathHeatmap => "path-heatmap",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown trace kind `{s}` (velocity-curve, busy-curve, path-heatmap)"
                ))
            })
    }
}

#[derive(Serialize)]
struct TraceRow {
    t: f64,
    x: f64,
    y: f64,
    speed: f64,
    busy: f64,
    #[serde(rename = "H")]
    h: f64,
    #[serde(rename = "R")]
    r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<u32>,
}

/// One CSV row per tick. Velocity curves add the commanded `v_max`, busy
/// curves the perceived density `rho`.
pub fn export_trace(log: &MissionLog, kind: TraceKind) -> Result<String> {
    let rows: Vec<TraceRow> = log
        .ticks()
        .map(|k| TraceRow {
            t: k.t,
            x: k.x,
            y: k.y,
            speed: k.speed,
            busy: k.busy,
            h: k.h,
            r: k.r,
            v_max: (kind == TraceKind::VelocityCurve).then_some(k.v_max),
            rho: (kind == TraceKind::BusyCurve).then_some(k.rho),
        })
        .collect();
    to_csv(&rows)
}

/// Reads a mission log file and writes its trace next to `out`.
pub fn export_trace_file(
    log_path: impl AsRef<Path>,
    kind: TraceKind,
    out: impl AsRef<Path>,
) -> Result<PathBuf> {
    let file = fs::File::open(log_path)?;
    let log = MissionLog::read_jsonl(std::io::BufReader::new(file))?;
    let out = out.as_ref().to_path_buf();
    fs::write(&out, export_trace(&log, kind)?)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mode: &str, seed: u64, flight: f64) -> MetricsRow {
        MetricsRow {
            mode: mode.into(),
            scenario: "s".into(),
            seed,
            status: "goal".into(),
            mapping_total_ms: 1.0,
            mapping_avg_ms: 0.1,
            compute_busy_pct: 10.0,
            trajectory_length_m: 20.0,
            flight_time_s: 5.0,
            flight_j: flight,
            compute_j: 0.0,
            energy_pct: None,
        }
    }

    #[test]
    fn energy_is_relative_to_matching_baseline() {
        let mut rows = vec![
            row("baseline", 0, 200.0),
            row("eans", 0, 50.0),
            row("eans", 1, 50.0),
        ];
        normalize_energy(&mut rows);
        assert_eq!(rows[0].energy_pct, Some(100.0));
        assert_eq!(rows[1].energy_pct, Some(25.0));
        assert_eq!(rows[2].energy_pct, None);
    }

    #[test]
    fn aggregate_keeps_first_appearance_order() {
        let rows = vec![
            row("eans", 0, 1.0),
            row("baseline", 0, 3.0),
            row("eans", 1, 3.0),
        ];
        let agg = aggregate(&rows);
        assert_eq!(
            agg.iter().map(|a| a.mode.as_str()).collect::<Vec<_>>(),
            ["eans", "baseline"]
        );
        assert_eq!(agg[0].missions, 2);
        assert_eq!(agg[0].flight_j, 2.0);
        assert_eq!(agg[0].energy_pct, None);
    }

    #[test]
    fn trace_kinds_parse() {
        for k in TraceKind::ALL {
            assert_eq!(k.name().parse::<TraceKind>().unwrap(), k);
        }
        assert!(matches!(
            "heatmap".parse::<TraceKind>(),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn sweep_rejects_out_of_range_density() {
        let r = density_sweep(
            &[0.5],
            &[StrategyMode::Baseline],
            &[0],
            &MissionConfig::default(),
        );
        assert!(matches!(r, Err(Error::Usage(_))));
    }
}
