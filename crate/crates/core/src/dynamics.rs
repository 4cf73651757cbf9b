//! Planar point-mass UAV: acceleration-limited speed, pure-pursuit steering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_on_segment, Vec2};
use crate::planner::Trajectory;
use crate::world::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub time: f64,
}

impl UavState {
    pub fn at_rest(position: Vec2) -> Self {
        Self {
            position,
            velocity: Vec2::ZERO,
            time: 0.0,
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Lookahead distance per unit speed (s).
    pub lookahead_time: f64,
    /// Minimum lookahead distance (m).
    pub min_lookahead: f64,
    pub uav_radius: f64,
    /// Extra planning clearance on top of `uav_radius` (m).
    pub clearance: f64,
    /// Largest corner cut tolerated when speed is capped at turns (m).
    pub corner_tolerance: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            lookahead_time: 0.3,
            min_lookahead: 0.2,
            uav_radius: 0.2,
            clearance: 0.15,
            corner_tolerance: 0.08,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.lookahead_time >= 0.0) || !(self.min_lookahead > 0.0) {
            return Err(Error::Config(
                "dt and lookahead parameters must be positive".into(),
            ));
        }
        if !(self.uav_radius > 0.0) || !(self.clearance >= 0.0) || !(self.corner_tolerance > 0.0) {
            return Err(Error::Config(
                "uav_radius and corner_tolerance must be positive, clearance non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn lookahead(&self, speed: f64) -> f64 {
        self.min_lookahead.max(speed * self.lookahead_time)
    }

    pub fn planning_radius(&self) -> f64 {
        self.uav_radius + self.clearance
    }
}

/// Braking distance from speed `v` at deceleration `a_max`.
pub fn emergency_stop_distance(v: f64, a_max: f64) -> f64 {
    v * v / (2.0 * a_max)
}

/// True iff the UAV body (a disc of `uav_radius`) overlaps an obstacle.
/// Touching exactly at the radius does not count.
pub fn collision_check(state: &UavState, scenario: &Scenario, uav_radius: f64) -> bool {
    scenario
        .obstacles
        .iter()
        .any(|o| o.distance_to(state.position) < uav_radius)
}

/// Progress of a UAV along one trajectory.
#[derive(Debug, Clone)]
pub struct Tracker {
    /// Cumulative arc length at each waypoint.
    cum: Vec<f64>,
    segment: usize,
    /// Speed limit at each waypoint (infinite where the path is straight).
    caps: Vec<f64>,
}

/// How far ahead (in segments) the projection search looks.
const PROJECTION_WINDOW: usize = 64;
/// Half-width of the arc window over which a waypoint's turn is measured (m).
const TURN_WINDOW: f64 = 0.3;
/// Speed caps at corners never go below this (m/s).
const MIN_CORNER_SPEED: f64 = 0.3;

/// Largest speed `v'` reachable this step from `v` such that the UAV can
/// still slow to `v_end` within `dist` after travelling `(v + v') dt / 2`.
fn approach_cap(dist: f64, v_end: f64, v: f64, a_max: f64, dt: f64) -> f64 {
    let disc =
        a_max * a_max * dt * dt + 4.0 * (v_end * v_end + 2.0 * a_max * dist - a_max * v * dt);
    (0.5 * (disc.max(0.0).sqrt() - a_max * dt)).max(0.0)
}

impl Tracker {
    pub fn new(traj: &Trajectory) -> Self {
        let mut cum = Vec::with_capacity(traj.waypoints.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in traj.waypoints.windows(2) {
            acc += w[0].distance(w[1]);
            cum.push(acc);
        }
        let caps = vec![f64::INFINITY; cum.len()];
        Self {
            cum,
            segment: 0,
            caps,
        }
    }

    /// Caps speed at turns so that pure pursuit with a lookahead of
    /// `lookahead_time` times speed cuts corners by at most `tolerance`.
    pub fn with_corner_caps(
        mut self,
        traj: &Trajectory,
        lookahead_time: f64,
        tolerance: f64,
    ) -> Self {
        if lookahead_time <= 0.0 {
            return self;
        }
        let n = traj.waypoints.len();
        for i in 1..n.saturating_sub(1) {
            let s = self.cum[i];
            let p = traj.waypoints[i];
            let before = p - self.point_at(traj, s - TURN_WINDOW);
            let after = self.point_at(traj, s + TURN_WINDOW) - p;
            let (Some(b), Some(a)) = (before.normalized(), after.normalized()) else {
                continue;
            };
            let half_sin = ((1.0 - b.dot(a).clamp(-1.0, 1.0)) / 2.0).sqrt();
            if half_sin > 1e-6 {
                let lookahead = 2.0 * tolerance / half_sin;
                self.caps[i] = (lookahead / lookahead_time).max(MIN_CORNER_SPEED);
            }
        }
        self
    }

    pub fn segment(&self) -> usize {
        self.segment
    }

    pub fn total_length(&self) -> f64 {
        *self.cum.last().expect("non-empty")
    }

    /// Projects `pos` onto the trajectory near the current progress and
    /// returns the arc length of the projection.
    pub fn project(&mut self, traj: &Trajectory, pos: Vec2) -> f64 {
        let n = traj.waypoints.len() - 1;
        let lo = self.segment.saturating_sub(2);
        let hi = (self.segment + PROJECTION_WINDOW).min(n);
        let mut best = (f64::INFINITY, self.segment, 0.0);
        for seg in lo..hi {
            let (a, b) = (traj.waypoints[seg], traj.waypoints[seg + 1]);
            let (q, t) = project_on_segment(pos, a, b);
            let d = q.distance(pos);
            if d < best.0 - 1e-12 {
                best = (
                    d,
                    seg,
                    self.cum[seg] + t * (self.cum[seg + 1] - self.cum[seg]),
                );
            }
        }
        self.segment = best.1;
        best.2
    }

    /// Point at arc length `s` (clamped to the trajectory).
    pub fn point_at(&self, traj: &Trajectory, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.total_length());
        let seg = match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => return traj.waypoints[i],
            Err(i) => i.saturating_sub(1).min(traj.waypoints.len() - 2),
        };
        let len = self.cum[seg + 1] - self.cum[seg];
        let t = if len > 0.0 {
            (s - self.cum[seg]) / len
        } else {
            0.0
        };
        traj.waypoints[seg].lerp(traj.waypoints[seg + 1], t)
    }

    /// Advances the UAV by one step of `dt`.
    ///
    /// The target speed is `v_cmd`, further capped so the UAV can still stop
    /// at the trajectory's end, and slow to any waypoint cap ahead, after
    /// this step; speed moves toward it by at most `a_max dt`.
    /// The UAV steers straight at the lookahead point.
    pub fn step(
        &mut self,
        state: &UavState,
        traj: &Trajectory,
        v_cmd: f64,
        a_max: f64,
        dt: f64,
        lookahead: f64,
    ) -> UavState {
        let pos = state.position;
        let speed = state.speed();
        let s = self.project(traj, pos);
        let end = traj.end();
        let target = self.point_at(traj, s + lookahead);
        let to_end = (self.total_length() - s) + pos.distance(self.point_at(traj, s));
        let dir = (target - pos)
            .normalized()
            .or_else(|| state.velocity.normalized())
            .unwrap_or(Vec2::ZERO);

        let mut v_target = v_cmd
            .max(0.0)
            .min(approach_cap(to_end, 0.0, speed, a_max, dt));
        let horizon = speed * speed / (2.0 * a_max) + speed * dt + TURN_WINDOW;
        for j in self.segment + 1..self.caps.len() {
            let dist = self.cum[j] - s;
            if dist > horizon {
                break;
            }
            if dist >= 0.0 && self.caps[j].is_finite() {
                v_target = v_target.min(approach_cap(dist, self.caps[j], speed, a_max, dt));
            }
        }
        let dv = (v_target - speed).clamp(-a_max * dt, a_max * dt);
        let new_speed = (speed + dv).max(0.0);
        let travel = 0.5 * (speed + new_speed) * dt;
        // Never step past the end point.
        let new_pos = if target == end && travel >= pos.distance(end) {
            end
        } else {
            pos + dir * travel
        };
        UavState {
            position: new_pos,
            velocity: dir * new_speed,
            time: state.time + dt,
        }
    }
}

/// One integration step along `traj` from a fresh projection.
pub fn step(
    state: &UavState,
    traj: &Trajectory,
    v_cmd: f64,
    a_max: f64,
    dt: f64,
    lookahead: f64,
) -> Result<UavState> {
    if traj.waypoints.len() < 2 {
        return Err(Error::EmptyTrajectory);
    }
    if !(dt > 0.0) {
        return Err(Error::Config("dt must be positive".into()));
    }
    let mut tracker = Tracker::new(traj);
    tracker.segment = 0;
    // Global search for a stateless step.
    let mut best = (f64::INFINITY, 0);
    for seg in 0..traj.waypoints.len() - 1 {
        let (q, _) =
            project_on_segment(state.position, traj.waypoints[seg], traj.waypoints[seg + 1]);
        let d = q.distance(state.position);
        if d < best.0 {
            best = (d, seg);
        }
    }
    tracker.segment = best.1;
    Ok(tracker.step(state, traj, v_cmd, a_max, dt, lookahead))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use crate::world::{Obstacle, SensorConfig};

    fn line(len: f64) -> Trajectory {
        Trajectory::straight(Vec2::ZERO, Vec2::new(len, 0.0), 0.14, 0.0)
    }

    #[test]
    fn one_step_from_rest() {
        let s = step(
            &UavState::at_rest(Vec2::ZERO),
            &line(10.0),
            2.0,
            2.0,
            0.01,
            0.2,
        )
        .unwrap();
        assert!((s.speed() - 0.02).abs() < 1e-12);
        assert!((s.time - 0.01).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_arrival_time() {
        let traj = line(10.0);
        let mut tracker = Tracker::new(&traj);
        let mut s = UavState::at_rest(Vec2::ZERO);
        let dt = 0.01;
        let mut steps = 0;
        while s.position.distance(traj.end()) > 1e-6 && steps < 10_000 {
            s = tracker.step(&s, &traj, 2.0, 2.0, dt, 0.2_f64.max(0.3 * s.speed()));
            steps += 1;
        }
        // 1 s accelerating, 4 s cruising, 1 s braking
        assert!((s.time - 6.0).abs() <= 2.0 * dt, "arrived at {}", s.time);
    }

    #[test]
    fn zero_command_brakes_over_stop_distance() {
        let traj = line(50.0);
        let mut tracker = Tracker::new(&traj);
        let dt = 0.01;
        let mut s = UavState {
            position: Vec2::ZERO,
            velocity: Vec2::new(2.0, 0.0),
            time: 0.0,
        };
        while s.speed() > 0.0 {
            s = tracker.step(&s, &traj, 0.0, 2.0, dt, 0.6);
        }
        assert!((s.time - 1.0).abs() <= dt + 1e-9);
        assert!((s.position.x - emergency_stop_distance(2.0, 2.0)).abs() <= 2.0 * dt);
    }

    #[test]
    fn stop_distance_examples() {
        assert_eq!(emergency_stop_distance(0.0, 2.0), 0.0);
        assert_eq!(emergency_stop_distance(2.0, 2.0), 1.0);
        assert_eq!(emergency_stop_distance(3.5, 2.0), 3.0625);
    }

    #[test]
    fn collision_examples() {
        let mut sc = Scenario {
            bounds: Aabb::new(Vec2::ZERO, Vec2::new(10.0, 10.0)),
            start: Vec2::new(1.0, 1.0),
            goal: Vec2::new(9.0, 9.0),
            obstacles: vec![],
            seed: 0,
            sensor: SensorConfig::default(),
        };
        let at = |p| UavState::at_rest(p);
        assert!(!collision_check(&at(Vec2::new(5.0, 5.0)), &sc, 0.2));
        sc.obstacles.push(Obstacle::Circle {
            center: Vec2::new(5.0, 5.0),
            radius: 1.0,
        });
        assert!(collision_check(&at(Vec2::new(5.0, 5.0)), &sc, 0.2));
        // exactly at uav_radius from the surface: no collision
        assert!(!collision_check(&at(Vec2::new(6.25, 5.0)), &sc, 0.25));
        assert!(collision_check(&at(Vec2::new(6.2, 5.0)), &sc, 0.25));
    }

    #[test]
    fn empty_trajectory_rejected() {
        let t = Trajectory {
            waypoints: vec![Vec2::ZERO],
            created_at: 0.0,
        };
        assert!(step(&UavState::at_rest(Vec2::ZERO), &t, 1.0, 2.0, 0.01, 0.2).is_err());
    }
}
