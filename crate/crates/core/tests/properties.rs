use eans_core::adapters::{adapt_resolution, eans_step, risk_weight, AdapterConfig, EansInputs};
use eans_core::dynamics::{emergency_stop_distance, Tracker, UavState};
use eans_core::energy::{EnergyLedger, PowerModel};
use eans_core::grid::{manhattan_distance, GridGeometry, GridIndex, OccupancyGrid};
use eans_core::pipeline::TimingModel;
use eans_core::planner::{closest_approach, plan, trajectory_metrics, ClosestApproach, Trajectory};
use eans_core::world::{generate_scenario, sense, GenParams, Obstacle, SensorConfig};
use eans_core::{Aabb, Scenario, Vec2};
use proptest::prelude::*;

const W: f64 = 6.0;

fn geometry() -> GridGeometry {
    GridGeometry::from_bounds(&Aabb::new(Vec2::ZERO, Vec2::new(W, W)))
}

fn point() -> impl Strategy<Value = Vec2> {
    (0.0..W, 0.0..W).prop_map(|(x, y)| Vec2::new(x, y))
}

fn level() -> impl Strategy<Value = f64> {
    prop::sample::select(AdapterConfig::default().ladder.levels().to_vec())
}

fn cells(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..60usize, 0..60usize), 0..n)
}

fn grid_with(cells: &[(usize, usize)]) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(geometry(), 0.1);
    for &(x, y) in cells {
        g.set_occupied(GridIndex::new(x, y), 1);
    }
    g
}

fn square_distance(p: Vec2, g: &OccupancyGrid, idx: GridIndex) -> f64 {
    let r = g.cell_size();
    let lo = g.cell_center(idx) - Vec2::new(r / 2.0, r / 2.0);
    Aabb::new(lo, lo + Vec2::new(r, r)).distance_to(p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn manhattan_is_a_metric(a in point(), b in point(), c in point(), r in level()) {
        let g = geometry();
        let m = |p, q| manhattan_distance(&g, p, q, r).unwrap();
        prop_assert_eq!(m(a, b), m(b, a));
        prop_assert_eq!(m(a, a), 0);
        prop_assert!(m(a, c) <= m(a, b) + m(b, c));
        let same = g.index(a, r).unwrap() == g.index(b, r).unwrap();
        prop_assert_eq!(m(a, b) == 0, same);
    }

    #[test]
    fn coarsening_by_an_integer_factor_never_separates(
        a in point(), b in point(),
        (r1, k) in prop::sample::select(vec![(0.1, 2u32), (0.1, 3), (0.1, 4), (0.1, 5), (0.15, 2), (0.15, 3), (0.2, 2), (0.25, 2)]),
    ) {
        let g = geometry();
        let r2 = r1 * k as f64;
        prop_assert!(manhattan_distance(&g, a, b, r2).unwrap() <= manhattan_distance(&g, a, b, r1).unwrap());
    }

    #[test]
    fn planned_paths_keep_clearance(occ in cells(40), radius in 0.15..0.4f64) {
        let g = grid_with(&occ);
        let (s, t) = (Vec2::new(0.35, 3.05), Vec2::new(5.65, 3.05));
        let far = |p: Vec2| g.occupied_cells().all(|c| square_distance(p, &g, c) >= radius);
        prop_assume!(far(s) && far(t));
        if let Ok(res) = plan(&g, s, t, radius, 0.0) {
            let (l, l_bar) = trajectory_metrics(&res.trajectory);
            prop_assert!(l >= l_bar - 1e-9);
            for w in res.trajectory.waypoints.windows(2) {
                let n = (w[0].distance(w[1]) / 0.01).ceil().max(1.0) as usize;
                for k in 0..=n {
                    let p = w[0].lerp(w[1], k as f64 / n as f64);
                    for c in g.occupied_cells() {
                        prop_assert!(square_distance(p, &g, c) >= radius - 1e-9, "{:?} too close to {:?}", p, c);
                    }
                }
            }
        }
    }

    #[test]
    fn closest_approach_shrinks_as_cells_are_added(occ in cells(15), extra in (0..60usize, 0..60usize)) {
        let traj = Trajectory::new(vec![Vec2::new(0.5, 0.5), Vec2::new(3.0, 4.0), Vec2::new(5.5, 2.0)], 0.0).unwrap();
        let dist = |g: &OccupancyGrid| closest_approach(&traj, g, 3.0, 0.05).map_or(f64::INFINITY, |c| c.dist);
        let mut g = grid_with(&occ);
        let before = dist(&g);
        g.set_occupied(GridIndex::new(extra.0, extra.1), 1);
        prop_assert!(dist(&g) <= before);
    }

    #[test]
    fn risk_weight_symmetry_and_scale(
        v in (-5.0..5.0f64, -5.0..5.0f64), grad in (-5.0..5.0f64, -5.0..5.0f64),
        k in 0.01..100.0f64, m in 0.01..100.0f64, alpha in 0.1..10.0f64,
    ) {
        let (v, grad) = (Vec2::new(v.0, v.1), Vec2::new(grad.0, grad.1));
        prop_assume!(v.norm() > 1e-6 && grad.norm() > 1e-6);
        let base = risk_weight(v, Some(grad), alpha);
        let scaled = risk_weight(v * k, Some(grad * m), alpha);
        prop_assert!((base.beta - scaled.beta).abs() < 1e-12);
        prop_assert!((base.eta - scaled.eta).abs() < 1e-12);
        let flipped = risk_weight(-v, Some(grad), alpha);
        prop_assert!((flipped.eta - (1.0 - base.eta)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&base.eta));
    }

    #[test]
    fn resolution_adapter_postcondition(p_t in point(), p_o in point(), p in 0.0..1.0f64) {
        let cfg = AdapterConfig::default();
        let g = geometry();
        let choice = adapt_resolution(p, Some((p_t, p_o)), &g, &cfg.ladder, cfg.phi);
        if p < cfg.phi {
            prop_assert_eq!((choice.r, choice.replan), (cfg.ladder.finest(), true));
        } else {
            prop_assert!(!choice.replan);
            // Oracle: walk the ladder and stop at the first merged level.
            let mut expect = cfg.ladder.finest();
            for &r in &cfg.ladder.levels()[1..] {
                if manhattan_distance(&g, p_t, p_o, r).unwrap() == 0 {
                    break;
                }
                expect = r;
            }
            prop_assert_eq!(choice.r, expect);
            if choice.r > cfg.ladder.finest() {
                prop_assert!(manhattan_distance(&g, p_t, p_o, choice.r).unwrap() > 0);
            }
        }
    }

    #[test]
    fn eans_step_always_yields_a_valid_strategy(
        vel in (-3.5..3.5f64, -3.5..3.5f64), obstacle in prop::option::of((point(), 0.0..5.0f64, 0.0..6.3f64)),
        rho in 0..=64u32, length in 1.0..60.0f64, span_frac in 0.2..1.0f64,
    ) {
        let cfg = AdapterConfig::default();
        let approach = obstacle.map(|(p_t, dist, theta)| {
            let p_o = p_t + Vec2::from_angle(theta) * dist;
            ClosestApproach { p_t, p_o, dist: p_t.distance(p_o) }
        });
        let inputs = EansInputs {
            velocity: Vec2::new(vel.0, vel.1),
            approach,
            max_range: 5.0,
            obstacle_pixels: rho,
            pixel_capacity: 64,
            length,
            span: length * span_frac,
        };
        let out = eans_step(&inputs, &cfg, &TimingModel::default(), &GridGeometry::from_bounds(
            &Aabb::new(Vec2::new(-10.0, -10.0), Vec2::new(20.0, 20.0)))).unwrap();
        prop_assert!(out.strategy.is_valid_for(&cfg), "{:?}", out.strategy);
        prop_assert!(out.trace.d >= 0.0 && out.trace.d <= 5.0);
    }

    #[test]
    fn speed_changes_are_acceleration_limited(cmds in prop::collection::vec(0.0..4.0f64, 1..400), a in 0.5..5.0f64) {
        let traj = Trajectory::new(vec![Vec2::ZERO, Vec2::new(30.0, 0.0), Vec2::new(30.0, 30.0)], 0.0).unwrap();
        let mut tracker = Tracker::new(&traj);
        let mut s = UavState::at_rest(Vec2::ZERO);
        let dt = 0.01;
        for &v in &cmds {
            let next = tracker.step(&s, &traj, v, a, dt, 0.3f64.max(s.speed() * 0.3));
            prop_assert!((next.speed() - s.speed()).abs() <= a * dt + 1e-12);
            if s.speed() <= v {
                prop_assert!(next.speed() <= v + 1e-12);
            }
            s = next;
        }
    }

    #[test]
    fn reaction_then_braking_covers_the_decomposed_distance(v in 0.5..3.5f64, t_r in 0.0..1.0f64, a in 0.5..5.0f64) {
        let traj = Trajectory::new(vec![Vec2::ZERO, Vec2::new(100.0, 0.0)], 0.0).unwrap();
        let mut tracker = Tracker::new(&traj);
        let dt = 0.01;
        let mut s = UavState { position: Vec2::new(1.0, 0.0), velocity: Vec2::new(v, 0.0), time: 0.0 };
        let start = s.position.x;
        for _ in 0..(t_r / dt).round() as usize {
            s = tracker.step(&s, &traj, v, a, dt, 0.5);
        }
        while s.speed() > 0.0 {
            s = tracker.step(&s, &traj, 0.0, a, dt, 0.5);
        }
        let expect = v * (t_r / dt).round() * dt + emergency_stop_distance(v, a);
        prop_assert!((s.position.x - start - expect).abs() <= v * dt, "{} vs {}", s.position.x - start, expect);
    }

    #[test]
    fn empty_field_flights_converge(v in 0.5..3.5f64, gx in 2.0..20.0f64, gy in -5.0..5.0f64) {
        let goal = Vec2::new(gx, gy);
        let traj = Trajectory::straight(Vec2::ZERO, goal, 0.1, 0.0);
        let mut tracker = Tracker::new(&traj);
        let mut s = UavState::at_rest(Vec2::ZERO);
        let budget = (goal.norm() / v + v / 2.0 + 5.0) / 0.01;
        let mut steps = 0.0;
        while s.position.distance(goal) >= 0.2 {
            s = tracker.step(&s, &traj, v, 2.0, 0.01, 0.2f64.max(s.speed() * 0.3));
            steps += 1.0;
            prop_assert!(steps < budget);
        }
    }

    #[test]
    fn energy_properties(v1 in 0.0..5.0f64, dv in 0.001..5.0f64, b1 in 0.0..0.999f64, db in 0.001..1.0f64, dt in 0.001..1.0f64) {
        let m = PowerModel::default();
        prop_assert!(m.flight_power(v1 + dv) > m.flight_power(v1));
        let (mut lo, mut hi) = (EnergyLedger::default(), EnergyLedger::default());
        lo.accrue_split(&m, v1, b1, dt);
        hi.accrue_split(&m, v1, (b1 + db).min(1.0), dt);
        prop_assert!(hi.compute_j > lo.compute_j);
        let mut halves = EnergyLedger::default();
        halves.accrue_split(&m, v1, b1, dt / 2.0);
        halves.accrue_split(&m, v1, b1, dt / 2.0);
        prop_assert!((halves.flight_j - lo.flight_j).abs() < 1e-12 * lo.flight_j.max(1.0));
        prop_assert!((halves.compute_j - lo.compute_j).abs() < 1e-12 * lo.compute_j.max(1.0));
    }
}

fn field(obstacles: Vec<Obstacle>) -> Scenario {
    Scenario {
        bounds: Aabb::new(Vec2::ZERO, Vec2::new(20.0, 20.0)),
        start: Vec2::new(1.0, 1.0),
        goal: Vec2::new(19.0, 19.0),
        obstacles,
        seed: 0,
        sensor: SensorConfig::default(),
    }
}

fn circle() -> impl Strategy<Value = Obstacle> {
    ((2.0..18.0f64, 2.0..18.0f64), 0.2..1.5f64).prop_map(|((x, y), radius)| Obstacle::Circle {
        center: Vec2::new(x, y),
        radius,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn frames_stay_within_range(obs in prop::collection::vec(circle(), 0..20), pose in (0.5..19.5f64, 0.5..19.5f64), heading in -3.2..3.2f64) {
        let sc = field(obs);
        let pose = Vec2::new(pose.0, pose.1);
        let f = sense(&sc, pose, heading, 0.0);
        prop_assert!(f.hits.iter().all(|h| h.end.distance(pose) <= sc.sensor.max_range + 1e-9));
        prop_assert!(f.obstacle_pixels <= sc.sensor.pixel_capacity);
    }

    #[test]
    fn adding_an_obstacle_never_lowers_pixel_count(obs in prop::collection::vec(circle(), 0..10), extra in circle(), heading in -3.2..3.2f64) {
        let pose = Vec2::new(10.0, 10.0);
        let mut sc = field(obs);
        prop_assume!(sc.obstacles.iter().chain([&extra]).all(|o| !o.contains(pose)));
        let before = sense(&sc, pose, heading, 0.0).obstacle_pixels;
        sc.obstacles.push(extra);
        prop_assert!(sense(&sc, pose, heading, 0.0).obstacle_pixels >= before);
    }

    #[test]
    fn generation_is_deterministic(seed in 0..1000u64, density in 0.0..0.2f64) {
        let p = GenParams::uniform(20.0, 10.0, density, seed);
        match (generate_scenario(&p), generate_scenario(&p)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.to_json(), b.to_json());
                prop_assert_eq!(sense(&a, a.start, 0.0, 0.0), sense(&b, b.start, 0.0, 0.0));
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "generation outcome differs between runs"),
        }
    }
}
