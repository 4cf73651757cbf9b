//! Ground-truth obstacle fields, scenario generation and a ray-cast range sensor.
//!
//! Scenarios are immutable once built and can be shared freely between
//! concurrently running missions.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec2};

/// Range sensor model: a fan of rays cast from the UAV pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    /// Maximum detection range `d_c` in meters.
    pub max_range: f64,
    /// Field of view in radians, centered on the heading.
    pub fov: f64,
    pub ray_count: u32,
    /// Normalizer for the obstacle pixel count (`rho*_c`).
    pub pixel_capacity: u32,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            max_range: 5.0,
            fov: PI / 2.0,
            ray_count: 64,
            pixel_capacity: 64,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_range > 0.0) {
            return Err(Error::Config("sensor max_range must be positive".into()));
        }
        if !(self.fov > 0.0 && self.fov <= TAU + 1e-12) {
            return Err(Error::Config("sensor fov must lie in (0, 2*pi]".into()));
        }
        if self.ray_count < 8 {
            return Err(Error::Config("sensor ray_count must be at least 8".into()));
        }
        if self.pixel_capacity < self.ray_count {
            return Err(Error::Config(
                "sensor pixel_capacity must be at least ray_count".into(),
            ));
        }
        Ok(())
    }

    /// Ray directions (radians) for a given heading.
    pub fn ray_angles(&self, heading: f64) -> impl Iterator<Item = f64> + '_ {
        let n = self.ray_count as usize;
        let full_circle = self.fov >= TAU - 1e-9;
        (0..n).map(move |i| {
            if full_circle {
                heading + TAU * i as f64 / n as f64
            } else {
                heading - self.fov / 2.0 + self.fov * i as f64 / (n - 1) as f64
            }
        })
    }
}

/// Obstacle primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Obstacle {
    Circle { center: Vec2, radius: f64 },
    Rect { min: Vec2, max: Vec2 },
}

impl Obstacle {
    pub fn contains(&self, p: Vec2) -> bool {
        match *self {
            Obstacle::Circle { center, radius } => p.distance(center) < radius,
            Obstacle::Rect { min, max } => {
                p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y
            }
        }
    }

    /// Distance from `p` to the obstacle boundary, zero inside.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        match *self {
            Obstacle::Circle { center, radius } => (p.distance(center) - radius).max(0.0),
            Obstacle::Rect { min, max } => Aabb::new(min, max).distance_to(p),
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        match *self {
            Obstacle::Circle { center, radius } => Aabb::new(
                center - Vec2::new(radius, radius),
                center + Vec2::new(radius, radius),
            ),
            Obstacle::Rect { min, max } => Aabb::new(min, max),
        }
    }

    /// Smallest ray parameter `t >= 0` at which `origin + t * dir` enters the
    /// obstacle. `dir` must be a unit vector.
    pub fn ray_intersection(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        match *self {
            Obstacle::Circle { center, radius } => {
                let oc = origin - center;
                let b = oc.dot(dir);
                let c = oc.norm_sq() - radius * radius;
                if c <= 0.0 {
                    return Some(0.0);
                }
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let t = -b - disc.sqrt();
                (t >= 0.0).then_some(t)
            }
            Obstacle::Rect { min, max } => {
                let mut t_enter = 0.0_f64;
                let mut t_exit = f64::INFINITY;
                for (o, d, lo, hi) in [
                    (origin.x, dir.x, min.x, max.x),
                    (origin.y, dir.y, min.y, max.y),
                ] {
                    if d.abs() < 1e-15 {
                        if o < lo || o > hi {
                            return None;
                        }
                    } else {
                        let (mut t0, mut t1) = ((lo - o) / d, (hi - o) / d);
                        if t0 > t1 {
                            std::mem::swap(&mut t0, &mut t1);
                        }
                        t_enter = t_enter.max(t0);
                        t_exit = t_exit.min(t1);
                        if t_enter > t_exit {
                            return None;
                        }
                    }
                }
                Some(t_enter)
            }
        }
    }
}

/// A mission environment: bounds, start/goal, and static obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub bounds: Aabb,
    pub start: Vec2,
    pub goal: Vec2,
    pub obstacles: Vec<Obstacle>,
    pub seed: u64,
    pub sensor: SensorConfig,
}

impl Scenario {
    /// Checks the structural invariants; `uav_radius` inflates obstacles
    /// around the start and goal.
    pub fn validate(&self, uav_radius: f64) -> Result<()> {
        self.sensor.validate()?;
        if !(self.bounds.area() > 0.0) {
            return Err(Error::Scenario("bounds must have positive area".into()));
        }
        for (name, p) in [("start", self.start), ("goal", self.goal)] {
            if !self.bounds.contains(p) {
                return Err(Error::Scenario(format!("{name} lies outside bounds")));
            }
            if self.obstacles.iter().any(|o| o.distance_to(p) < uav_radius) {
                return Err(Error::Scenario(format!(
                    "{name} lies within {uav_radius} m of an obstacle"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Distance from `p` to the closest obstacle surface (infinite if none).
    pub fn clearance(&self, p: Vec2) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// One ray of a sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    pub end: Vec2,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub timestamp: f64,
    pub origin: Vec2,
    pub hits: Vec<RayHit>,
    /// Obstacle pixel count `rho_c`, saturated at the sensor capacity.
    pub obstacle_pixels: u32,
}

/// Casts the sensor's ray fan from `pose` and reports the first obstacle
/// intersection of each ray within range.
pub fn sense(scenario: &Scenario, pose: Vec2, heading: f64, timestamp: f64) -> SensorFrame {
    let sensor = &scenario.sensor;
    let range = sensor.max_range;
    let nearby: Vec<&Obstacle> = scenario
        .obstacles
        .iter()
        .filter(|o| o.distance_to(pose) <= range)
        .collect();

    let mut hit_count = 0u32;
    let hits = sensor
        .ray_angles(heading)
        .map(|theta| {
            let dir = Vec2::from_angle(theta);
            let t = nearby
                .iter()
                .filter_map(|o| o.ray_intersection(pose, dir))
                .filter(|&t| t <= range)
                .fold(f64::INFINITY, f64::min);
            if t.is_finite() {
                hit_count += 1;
                RayHit {
                    end: pose + dir * t,
                    hit: true,
                }
            } else {
                RayHit {
                    end: pose + dir * range,
                    hit: false,
                }
            }
        })
        .collect();

    SensorFrame {
        timestamp,
        origin: pose,
        hits,
        obstacle_pixels: hit_count.min(sensor.pixel_capacity),
    }
}

/// Samples per axis used by [`obstacle_density`] along the longer side.
const DENSITY_SAMPLES: usize = 512;

/// Occupied-area fraction of `region`, measured on a deterministic raster of
/// cell-center samples.
pub fn obstacle_density(scenario: &Scenario, region: &Aabb) -> Result<f64> {
    if !(region.area() > 0.0) {
        return Err(Error::EmptyRegion);
    }
    let relevant: Vec<&Obstacle> = scenario
        .obstacles
        .iter()
        .filter(|o| o.bounding_box().intersection(region).is_some())
        .collect();
    let step = region.width().max(region.height()) / DENSITY_SAMPLES as f64;
    let nx = (region.width() / step).ceil().max(1.0) as usize;
    let ny = (region.height() / step).ceil().max(1.0) as usize;
    let (sx, sy) = (region.width() / nx as f64, region.height() / ny as f64);
    let mut covered = 0usize;
    for j in 0..ny {
        let y = region.min.y + (j as f64 + 0.5) * sy;
        for i in 0..nx {
            let p = Vec2::new(region.min.x + (i as f64 + 0.5) * sx, y);
            if relevant.iter().any(|o| o.contains(p)) {
                covered += 1;
            }
        }
    }
    Ok(covered as f64 / (nx * ny) as f64)
}

/// A vertical strip of the world with a target obstacle density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub x_min: f64,
    pub x_max: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    pub width: f64,
    pub height: f64,
    pub zones: Vec<Zone>,
    pub start: Vec2,
    pub goal: Vec2,
    pub seed: u64,
    /// Obstacle-free radius kept around start and goal.
    pub keep_out: f64,
    pub radius_range: (f64, f64),
    /// Fraction of obstacles drawn as axis-aligned boxes instead of circles.
    pub rect_fraction: f64,
    /// Obstacles that would leave no route from start to goal with this much
    /// clearance are not placed. Zero disables the check.
    #[serde(default = "default_passage_radius")]
    pub passage_radius: f64,
    pub sensor: SensorConfig,
}

fn default_passage_radius() -> f64 {
    0.75
}

impl GenParams {
    /// Single-zone field of the given density spanning the whole width.
    pub fn uniform(width: f64, height: f64, density: f64, seed: u64) -> Self {
        Self {
            width,
            height,
            zones: vec![Zone {
                x_min: 0.0,
                x_max: width,
                density,
            }],
            start: Vec2::new(1.5, height / 2.0),
            goal: Vec2::new(width - 1.5, height / 2.0),
            seed,
            keep_out: 1.2,
            radius_range: (0.3, 0.7),
            rect_fraction: 0.2,
            passage_radius: default_passage_radius(),
            sensor: SensorConfig::default(),
        }
    }
}

/// Coverage raster resolution used while placing obstacles.
const GEN_STEP: f64 = 0.05;
const GEN_MAX_ATTEMPTS: usize = 50_000;
/// Accepted relative deviation from the requested zone density.
const GEN_TOLERANCE: f64 = 0.04;

struct CoverageRaster {
    min: Vec2,
    nx: usize,
    ny: usize,
    cells: Vec<bool>,
    covered: usize,
}

impl CoverageRaster {
    fn new(region: &Aabb) -> Self {
        let nx = (region.width() / GEN_STEP).round().max(1.0) as usize;
        let ny = (region.height() / GEN_STEP).round().max(1.0) as usize;
        Self {
            min: region.min,
            nx,
            ny,
            cells: vec![false; nx * ny],
            covered: 0,
        }
    }

    fn fraction(&self) -> f64 {
        self.covered as f64 / self.cells.len() as f64
    }

    fn cells_of(&self, o: &Obstacle) -> Vec<usize> {
        let bb = o.bounding_box();
        let i0 = (((bb.min.x - self.min.x) / GEN_STEP).floor().max(0.0)) as usize;
        let j0 = (((bb.min.y - self.min.y) / GEN_STEP).floor().max(0.0)) as usize;
        let i1 = (((bb.max.x - self.min.x) / GEN_STEP).ceil() as usize).min(self.nx);
        let j1 = (((bb.max.y - self.min.y) / GEN_STEP).ceil() as usize).min(self.ny);
        let mut out = Vec::new();
        for j in j0..j1 {
            for i in i0..i1 {
                let p =
                    self.min + Vec2::new((i as f64 + 0.5) * GEN_STEP, (j as f64 + 0.5) * GEN_STEP);
                if o.contains(p) {
                    out.push(j * self.nx + i);
                }
            }
        }
        out
    }

    fn new_cells(&self, cells: &[usize]) -> usize {
        cells.iter().filter(|&&c| !self.cells[c]).count()
    }

    fn mark(&mut self, cells: &[usize]) {
        for &c in cells {
            if !self.cells[c] {
                self.cells[c] = true;
                self.covered += 1;
            }
        }
    }
}

/// Raster of cells too close to an obstacle for a disc of the passage
/// radius, used to keep start and goal connected.
struct PassageRaster {
    step: f64,
    nx: usize,
    ny: usize,
    radius: f64,
    blocked: Vec<bool>,
    start: usize,
    goal: usize,
}

impl PassageRaster {
    const STEP: f64 = 0.1;

    fn new(width: f64, height: f64, radius: f64, start: Vec2, goal: Vec2) -> Self {
        let step = Self::STEP;
        let nx = (width / step).ceil().max(1.0) as usize;
        let ny = (height / step).ceil().max(1.0) as usize;
        let cell = |p: Vec2| {
            let i = ((p.x / step).floor().max(0.0) as usize).min(nx - 1);
            let j = ((p.y / step).floor().max(0.0) as usize).min(ny - 1);
            j * nx + i
        };
        Self {
            step,
            nx,
            ny,
            radius,
            blocked: vec![false; nx * ny],
            start: cell(start),
            goal: cell(goal),
        }
    }

    /// Unblocked cells whose center lies within the passage radius of `o`.
    fn footprint(&self, o: &Obstacle) -> Vec<usize> {
        let bb = o.bounding_box().expanded(self.radius);
        let i0 = (bb.min.x / self.step).floor().max(0.0) as usize;
        let j0 = (bb.min.y / self.step).floor().max(0.0) as usize;
        let i1 = ((bb.max.x / self.step).ceil().max(0.0) as usize).min(self.nx);
        let j1 = ((bb.max.y / self.step).ceil().max(0.0) as usize).min(self.ny);
        let mut out = Vec::new();
        for j in j0..j1 {
            for i in i0..i1 {
                let f = j * self.nx + i;
                let c = Vec2::new((i as f64 + 0.5) * self.step, (j as f64 + 0.5) * self.step);
                if !self.blocked[f] && o.distance_to(c) < self.radius {
                    out.push(f);
                }
            }
        }
        out
    }

    /// 4-connected flood fill from start to goal with `extra` also blocked.
    fn connected_with(&mut self, extra: &[usize]) -> bool {
        for &f in extra {
            self.blocked[f] = true;
        }
        let mut seen = vec![false; self.blocked.len()];
        let mut stack = vec![self.start];
        seen[self.start] = true;
        let mut found = false;
        while let Some(f) = stack.pop() {
            if f == self.goal {
                found = true;
                break;
            }
            let (i, j) = (f % self.nx, f / self.nx);
            let mut push = |n: usize| {
                if !seen[n] && !self.blocked[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if i > 0 {
                push(f - 1);
            }
            if i + 1 < self.nx {
                push(f + 1);
            }
            if j > 0 {
                push(f - self.nx);
            }
            if j + 1 < self.ny {
                push(f + self.nx);
            }
        }
        for &f in extra {
            self.blocked[f] = false;
        }
        found
    }

    fn block(&mut self, cells: &[usize]) {
        for &f in cells {
            self.blocked[f] = true;
        }
    }
}

/// Generates a deterministic obstacle field with per-zone target densities,
/// keeping a route of `passage_radius` clearance from start to goal.
pub fn generate_scenario(params: &GenParams) -> Result<Scenario> {
    params.sensor.validate()?;
    let bounds = Aabb::new(Vec2::ZERO, Vec2::new(params.width, params.height));
    if !(bounds.area() > 0.0) {
        return Err(Error::Scenario("bounds must have positive area".into()));
    }
    let (r_lo, r_hi) = params.radius_range;
    if !(r_lo > 0.0 && r_hi >= r_lo) {
        return Err(Error::Config("invalid obstacle radius range".into()));
    }
    if !(params.passage_radius >= 0.0) {
        return Err(Error::Config("passage_radius must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut obstacles = Vec::new();
    let mut passage = (params.passage_radius > 0.0).then(|| {
        PassageRaster::new(
            params.width,
            params.height,
            params.passage_radius,
            params.start,
            params.goal,
        )
    });

    for (zi, zone) in params.zones.iter().enumerate() {
        if !(0.0..=1.0).contains(&zone.density) {
            return Err(Error::Generation {
                zone: zi,
                reason: "density outside [0, 1]".into(),
            });
        }
        let region = Aabb::new(
            Vec2::new(zone.x_min, 0.0),
            Vec2::new(zone.x_max, params.height),
        );
        if !(region.area() > 0.0) {
            return Err(Error::Generation {
                zone: zi,
                reason: "zone has zero area".into(),
            });
        }
        if zone.density == 0.0 {
            continue;
        }
        let mut raster = CoverageRaster::new(&region);
        let total = raster.cells.len() as f64;
        let low = zone.density * (1.0 - GEN_TOLERANCE);
        let high = zone.density * (1.0 + GEN_TOLERANCE);
        let mut attempts = 0;
        while raster.fraction() < low {
            attempts += 1;
            if attempts > GEN_MAX_ATTEMPTS {
                return Err(Error::Generation {
                    zone: zi,
                    reason: format!(
                        "reached {:.3} of requested {:.3} after {GEN_MAX_ATTEMPTS} placements",
                        raster.fraction(),
                        zone.density
                    ),
                });
            }
            // Shrink candidates as the zone fills up so the last placements can
            // land inside the tolerance band.
            let deficit_area = (zone.density - raster.fraction()) * region.area();
            let r_cap = r_hi.min((deficit_area / PI).sqrt().max(r_lo));
            let radius = rng.gen_range(r_lo..=r_cap);
            if radius * 2.0 >= region.width() || radius * 2.0 >= region.height() {
                continue;
            }
            let cx = rng.gen_range(region.min.x + radius..region.max.x - radius);
            let cy = rng.gen_range(region.min.y + radius..region.max.y - radius);
            let center = Vec2::new(cx, cy);
            let obstacle = if rng.gen_bool(params.rect_fraction.clamp(0.0, 1.0)) {
                let aspect = rng.gen_range(0.5..2.0_f64).sqrt();
                let half = Vec2::new(radius * aspect, radius / aspect) * (PI.sqrt() / 2.0);
                let (min, max) = (center - half, center + half);
                if !region.contains(min) || max.x > region.max.x || max.y > region.max.y {
                    continue;
                }
                Obstacle::Rect { min, max }
            } else {
                Obstacle::Circle { center, radius }
            };
            if obstacle.distance_to(params.start) < params.keep_out
                || obstacle.distance_to(params.goal) < params.keep_out
            {
                continue;
            }
            let cells = raster.cells_of(&obstacle);
            let after = (raster.covered + raster.new_cells(&cells)) as f64 / total;
            if after > high {
                continue;
            }
            if let Some(pr) = passage.as_mut() {
                let blocked = pr.footprint(&obstacle);
                if !blocked.is_empty() && !pr.connected_with(&blocked) {
                    continue;
                }
                pr.block(&blocked);
            }
            raster.mark(&cells);
            obstacles.push(obstacle);
        }
    }

    let scenario = Scenario {
        bounds,
        start: params.start,
        goal: params.goal,
        obstacles,
        seed: params.seed,
        sensor: params.sensor,
    };
    scenario.validate(params.keep_out.min(0.5))?;
    Ok(scenario)
}

/// Built-in scenario families.
pub mod presets {
    use super::*;

    pub const PARK_LENGTH: f64 = 60.0;
    pub const PARK_WIDTH: f64 = 20.0;
    /// Dense / open / dense zone densities of the park layout.
    pub const PARK_DENSITIES: [f64; 3] = [0.25, 0.02, 0.25];

    pub fn park_params(seed: u64) -> GenParams {
        let third = PARK_LENGTH / 3.0;
        GenParams {
            zones: PARK_DENSITIES
                .iter()
                .enumerate()
                .map(|(i, &density)| Zone {
                    x_min: i as f64 * third,
                    x_max: (i + 1) as f64 * third,
                    density,
                })
                .collect(),
            ..GenParams::uniform(PARK_LENGTH, PARK_WIDTH, 0.0, seed)
        }
    }

    /// Three-zone park: forest, open street, forest.
    pub fn park(seed: u64) -> Result<Scenario> {
        generate_scenario(&park_params(seed))
    }

    /// Obstacle-free field with the park's dimensions.
    pub fn empty(seed: u64) -> Result<Scenario> {
        generate_scenario(&GenParams::uniform(PARK_LENGTH, PARK_WIDTH, 0.0, seed))
    }

    pub const UNIFORM_LENGTH: f64 = 30.0;
    pub const UNIFORM_WIDTH: f64 = 12.0;

    /// Single-density field used for density tiers and sweeps.
    pub fn uniform(density: f64, seed: u64) -> Result<Scenario> {
        generate_scenario(&GenParams::uniform(
            UNIFORM_LENGTH,
            UNIFORM_WIDTH,
            density,
            seed,
        ))
    }

    /// Resolves a preset name: `empty`, `park`, or `uniform-<density>`.
    pub fn by_name(name: &str, seed: u64) -> Result<Scenario> {
        match name {
            "empty" => empty(seed),
            "park" => park(seed),
            _ => match name.strip_prefix("uniform-").map(str::parse::<f64>) {
                Some(Ok(density)) => uniform(density, seed),
                _ => Err(Error::Usage(format!("unknown scenario preset `{name}`"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_field() -> Scenario {
        Scenario {
            bounds: Aabb::new(Vec2::ZERO, Vec2::new(20.0, 20.0)),
            start: Vec2::new(1.0, 10.0),
            goal: Vec2::new(19.0, 10.0),
            obstacles: vec![],
            seed: 0,
            sensor: SensorConfig {
                ray_count: 9,
                pixel_capacity: 9,
                ..Default::default()
            },
        }
    }

    fn wall_at(x: f64) -> Obstacle {
        Obstacle::Rect {
            min: Vec2::new(x, 0.0),
            max: Vec2::new(x + 0.5, 20.0),
        }
    }

    #[test]
    fn empty_field_all_rays_miss() {
        let s = open_field();
        let f = sense(&s, Vec2::new(5.0, 10.0), 0.0, 0.0);
        assert_eq!(f.obstacle_pixels, 0);
        assert!(f.hits.iter().all(|h| !h.hit));
        for h in &f.hits {
            assert!((h.end.distance(f.origin) - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn center_ray_hits_wall_at_three_meters() {
        let mut s = open_field();
        s.obstacles.push(wall_at(8.0));
        let f = sense(&s, Vec2::new(5.0, 10.0), 0.0, 0.0);
        let center = f.hits[4];
        assert!(center.hit);
        // analytic: perpendicular wall face at x = 8
        assert!((center.end.distance(f.origin) - 3.0).abs() < 1e-9);
        for h in f.hits.iter().filter(|h| h.hit) {
            assert!((h.end.x - 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wall_beyond_range_is_invisible() {
        let mut s = open_field();
        s.obstacles.push(wall_at(11.0));
        let f = sense(&s, Vec2::new(5.0, 10.0), 0.0, 0.0);
        assert!(f.hits.iter().all(|h| !h.hit));
        assert_eq!(f.obstacle_pixels, 0);
    }

    #[test]
    fn density_fixtures() {
        let mut s = open_field();
        let region = Aabb::new(Vec2::new(2.0, 2.0), Vec2::new(6.0, 6.0));
        assert_eq!(obstacle_density(&s, &region).unwrap(), 0.0);
        s.obstacles.push(Obstacle::Rect {
            min: Vec2::new(1.0, 1.0),
            max: Vec2::new(7.0, 7.0),
        });
        assert_eq!(obstacle_density(&s, &region).unwrap(), 1.0);
        s.obstacles[0] = Obstacle::Rect {
            min: Vec2::new(0.0, 0.0),
            max: Vec2::new(4.0, 10.0),
        };
        assert!((obstacle_density(&s, &region).unwrap() - 0.5).abs() < 0.02);
        let flat = Aabb::new(Vec2::new(1.0, 1.0), Vec2::new(1.0, 3.0));
        assert!(matches!(
            obstacle_density(&s, &flat),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn zero_density_zone_is_empty() {
        let s = generate_scenario(&GenParams::uniform(20.0, 10.0, 0.0, 7)).unwrap();
        assert!(s.obstacles.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = presets::park(3).unwrap();
        let b = presets::park(3).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = presets::park(4).unwrap();
        assert_ne!(a.obstacles, c.obstacles);
    }

    #[test]
    fn impossible_density_names_the_zone() {
        let mut p = GenParams::uniform(6.0, 3.0, 0.95, 1);
        p.zones.insert(
            0,
            Zone {
                x_min: 0.0,
                x_max: 0.0,
                density: 0.1,
            },
        );
        match generate_scenario(&p) {
            Err(Error::Generation { zone, .. }) => assert_eq!(zone, 0),
            other => panic!("expected generation error, got {other:?}"),
        }
        let p = GenParams::uniform(6.0, 3.0, 0.95, 1);
        assert!(matches!(
            generate_scenario(&p),
            Err(Error::Generation { zone: 0, .. })
        ));
    }

    #[test]
    fn loader_rejects_unknown_fields() {
        let mut v: serde_json::Value = serde_json::from_str(&open_field().to_json()).unwrap();
        v["wind"] = serde_json::json!(3.0);
        assert!(Scenario::from_json(&v.to_string()).is_err());
        let ok = Scenario::from_json(&open_field().to_json()).unwrap();
        assert_eq!(ok, open_field());
    }

    #[test]
    fn rect_ray_intersection_from_inside_and_outside() {
        let r = Obstacle::Rect {
            min: Vec2::new(2.0, -1.0),
            max: Vec2::new(3.0, 1.0),
        };
        assert_eq!(
            r.ray_intersection(Vec2::ZERO, Vec2::new(1.0, 0.0)),
            Some(2.0)
        );
        assert_eq!(r.ray_intersection(Vec2::ZERO, Vec2::new(-1.0, 0.0)), None);
        assert_eq!(
            r.ray_intersection(Vec2::new(2.5, 0.0), Vec2::new(1.0, 0.0)),
            Some(0.0)
        );
        let c = Obstacle::Circle {
            center: Vec2::new(5.0, 0.0),
            radius: 1.0,
        };
        assert!((c.ray_intersection(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap() - 4.0).abs() < 1e-12);
    }
}
