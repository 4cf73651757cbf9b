use eans_core::adapters::NavStrategy;
use eans_core::pipeline::{mapping_latency, LogRecord, MissionLog, TerminalStatus};
use eans_core::world::{presets, Obstacle, SensorConfig};
use eans_core::{run_mission, Aabb, MissionConfig, Scenario, StrategyMode, Vec2};

fn open_field(length: f64) -> Scenario {
    Scenario {
        bounds: Aabb::new(Vec2::ZERO, Vec2::new(length, 10.0)),
        start: Vec2::new(1.0, 5.0),
        goal: Vec2::new(length - 1.0, 5.0),
        obstacles: vec![],
        seed: 0,
        sensor: SensorConfig::default(),
    }
}

fn mean_speed(log: &MissionLog) -> f64 {
    let s = log.summary();
    s.path_length / s.t
}

#[test]
fn empty_field_baseline_cruises_at_half_a_meter_per_second() {
    let cfg = MissionConfig::default();
    let log = run_mission(&open_field(22.0), &StrategyMode::Baseline, &cfg, 0).unwrap();
    assert_eq!(log.summary().status, TerminalStatus::Goal);
    let v = mean_speed(&log);
    assert!((v - 0.5).abs() <= 0.025, "mean speed {v}");
    assert!(log
        .ticks()
        .all(|k| k.h == 30.0 && k.r == 0.1 && k.v_max == 0.5));
}

#[test]
fn empty_field_eans_reaches_top_speed_at_cheapest_settings() {
    let cfg = MissionConfig::default();
    let log = run_mission(&open_field(40.0), &StrategyMode::Eans, &cfg, 0).unwrap();
    assert_eq!(log.summary().status, TerminalStatus::Goal);
    let top = log.ticks().map(|k| k.speed).fold(0.0, f64::max);
    assert!((top - 3.5).abs() < 1e-6, "top speed {top}");

    // Composed oracle for the open-space state: d = d_c, speed bounded at the
    // fastest rate, then the slowest listed rate that keeps it safe.
    let a = &cfg.adapter;
    let d_c = SensorConfig::default().max_range;
    let t_m = cfg.timing.mapping_unit_cost * (d_c / a.ladder.finest()).powi(2);
    let t_s = t_m + cfg.timing.t_p + cfg.timing.t_o;
    let h_top = *a.frequency_list.last().unwrap();
    let t_r = (a.sigma as f64 - 1.0) / h_top + t_s;
    let v = ((t_r * a.a_max).powi(2) + 2.0 * d_c * a.a_max).sqrt() - t_r * a.a_max;
    let v = v.clamp(a.velocity_range[0], a.velocity_range[1]);
    let h_min = 2.0 * (a.sigma as f64 - 1.0) * a.a_max * v
        / (2.0 * d_c * a.a_max - v * v - 2.0 * a.a_max * v * t_s);
    let h = a
        .frequency_list
        .iter()
        .copied()
        .find(|&h| h >= h_min && h <= 1.0 / t_m)
        .unwrap();

    let cruise: Vec<_> = log.ticks().filter(|k| k.speed > 3.5 - 1e-9).collect();
    assert!(!cruise.is_empty());
    for k in cruise {
        assert_eq!((k.v_max, k.h, k.r), (v, h, a.ladder.coarsest()));
    }
}

#[test]
fn impassable_wall_ends_in_plan_failure() {
    let mut sc = open_field(20.0);
    sc.obstacles.push(Obstacle::Rect {
        min: Vec2::new(9.0, -1.0),
        max: Vec2::new(10.0, 11.0),
    });
    let log = run_mission(&sc, &StrategyMode::Baseline, &MissionConfig::default(), 0).unwrap();
    assert_eq!(log.summary().status, TerminalStatus::PlanFailure);
}

#[test]
fn every_tick_respects_the_mapping_interval() {
    let cfg = MissionConfig::default();
    let unit = cfg.timing.mapping_unit_cost;
    for mode in StrategyMode::ALL {
        let sc = presets::uniform(0.15, 3).unwrap();
        let log = run_mission(&sc, &mode, &cfg, 3).unwrap();
        for k in log.ticks() {
            assert!(
                mapping_latency(k.r, sc.sensor.max_range, unit) <= 1.0 / k.h + 1e-12,
                "{mode} at t={}",
                k.t
            );
        }
    }
}

#[test]
fn logs_are_deterministic_and_round_trip() {
    let cfg = MissionConfig::default();
    let sc = presets::uniform(0.1, 5).unwrap();
    let a = run_mission(&sc, &StrategyMode::Eans, &cfg, 5)
        .unwrap()
        .to_jsonl();
    let b = run_mission(&sc, &StrategyMode::Eans, &cfg, 5)
        .unwrap()
        .to_jsonl();
    assert_eq!(a, b);
    let back = MissionLog::read_jsonl(a.as_bytes()).unwrap();
    assert_eq!(back.to_jsonl(), a);
    assert!(matches!(back.records.last(), Some(LogRecord::Terminal(_))));
}

#[test]
fn truncated_log_is_rejected() {
    let log = run_mission(
        &open_field(8.0),
        &StrategyMode::Eans,
        &MissionConfig::default(),
        0,
    )
    .unwrap()
    .to_jsonl();
    let cut: String = log.lines().take(20).map(|l| format!("{l}\n")).collect();
    assert!(MissionLog::read_jsonl(cut.as_bytes()).is_err());
    let headless: String = log.lines().skip(1).map(|l| format!("{l}\n")).collect();
    assert!(MissionLog::read_jsonl(headless.as_bytes()).is_err());
}

#[test]
fn busy_fraction_grows_with_mapping_rate() {
    let cfg = MissionConfig::default();
    let sc = open_field(12.0);
    let mut last = -1.0;
    for &h in &cfg.adapter.frequency_list {
        let mode = StrategyMode::Fixed(NavStrategy {
            v_max: 1.0,
            h,
            r: 0.1,
            replan: false,
        });
        let s = *run_mission(&sc, &mode, &cfg, 0).unwrap().summary();
        assert_eq!(s.status, TerminalStatus::Goal);
        let busy = s.busy_s / s.t;
        assert!(busy >= last - 1e-12, "H = {h}: {busy} < {last}");
        last = busy;
    }
}

#[test]
fn invalid_configuration_fails_at_startup() {
    let mut cfg = MissionConfig::default();
    cfg.adapter.phi = 0.0;
    assert!(run_mission(&open_field(8.0), &StrategyMode::Eans, &cfg, 0).is_err());
    let off_ladder = StrategyMode::Fixed(NavStrategy {
        v_max: 1.0,
        h: 30.0,
        r: 0.12,
        replan: false,
    });
    assert!(run_mission(&open_field(8.0), &off_ladder, &MissionConfig::default(), 0).is_err());
}
