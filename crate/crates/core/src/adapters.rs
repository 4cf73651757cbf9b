//! Velocity, mapping-frequency and mapping-resolution adapters, and the two
//! comparison strategies (static baseline, obstacle-count lookup table).
//!
//! Every function here is pure; a mission calls [`eans_step`] once per
//! mapping frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::grid::{manhattan_distance, GridGeometry, ResolutionLadder};
use crate::pipeline::{reaction_time, TimingModel};
use crate::planner::ClosestApproach;

/// Velocity decrement used when no mapping frequency can support the
/// requested speed.
pub const VELOCITY_BACKOFF_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdapterConfig {
    /// Sigmoid rate of the risk weight.
    pub alpha: f64,
    /// Blend between heading risk and obstacle distance, in (0, 1).
    pub lambda: f64,
    /// Scale of the obstacle-density term of the optimal length.
    pub gamma: f64,
    /// Sensitivity of the trajectory probability to excess length.
    pub epsilon: f64,
    /// Probability threshold below which the map is refined and replanned.
    pub phi: f64,
    /// Captures needed to confirm an obstacle cell.
    pub sigma: u32,
    /// Maximum acceleration (m/s^2).
    pub a_max: f64,
    /// Allowed flight speeds `[v_lo, v_hi]` (m/s).
    pub velocity_range: [f64; 2],
    /// Allowed mapping frequencies (Hz), strictly increasing.
    pub frequency_list: Vec<f64>,
    pub ladder: ResolutionLadder,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            lambda: 0.5,
            gamma: 1.0,
            epsilon: 2.0,
            phi: 0.6,
            sigma: 3,
            a_max: 2.0,
            velocity_range: [0.5, 3.5],
            frequency_list: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            ladder: ResolutionLadder::default(),
        }
    }
}

impl AdapterConfig {
    pub fn v_lo(&self) -> f64 {
        self.velocity_range[0]
    }

    pub fn v_hi(&self) -> f64 {
        self.velocity_range[1]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad("lambda must lie in (0, 1)");
        }
        if !(self.gamma > 0.0) || !(self.epsilon > 0.0) {
            return bad("gamma and epsilon must be positive");
        }
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return bad("phi must lie in (0, 1]");
        }
        if self.sigma < 1 {
            return bad("sigma must be at least 1");
        }
        if !(self.a_max > 0.0) {
            return bad("a_max must be positive");
        }
        let [lo, hi] = self.velocity_range;
        if !(lo > 0.0 && hi >= lo) {
            return bad("velocity_range must satisfy 0 < v_lo <= v_hi");
        }
        if self.frequency_list.is_empty()
            || self.frequency_list[0] <= 0.0
            || self.frequency_list.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("frequency_list must be positive and strictly increasing");
        }
        ResolutionLadder::new(self.ladder.levels().to_vec())?;
        Ok(())
    }
}

/// Output of one strategy evaluation: speed cap, mapping rate, cell size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavStrategy {
    pub v_max: f64,
    pub h: f64,
    pub r: f64,
    pub replan: bool,
}

impl NavStrategy {
    /// Checks the strategy against the configured ranges.
    pub fn is_valid_for(&self, cfg: &AdapterConfig) -> bool {
        let [lo, hi] = cfg.velocity_range;
        self.v_max >= lo - 1e-12
            && self.v_max <= hi + 1e-12
            && cfg
                .frequency_list
                .iter()
                .any(|&f| (f - self.h).abs() < 1e-9)
            && cfg.ladder.contains(self.r)
    }
}

/// Result of [`risk_weight`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskWeight {
    /// Cosine between velocity and obstacle gradient.
    pub beta: f64,
    pub eta: f64,
    /// Set when an obstacle is present but the velocity is zero.
    pub degenerate: bool,
}

/// Sigmoid risk weight `eta = 1 / (1 + exp(alpha * beta))` of flying along
/// `velocity` given the obstacle gradient `gradient` (pointing from the
/// obstacle toward the trajectory). No obstacle means zero risk.
pub fn risk_weight(velocity: Vec2, gradient: Option<Vec2>, alpha: f64) -> RiskWeight {
    let Some(grad) = gradient else {
        return RiskWeight {
            beta: 0.0,
            eta: 0.0,
            degenerate: false,
        };
    };
    let denom = velocity.norm() * grad.norm();
    if !(denom > 0.0) {
        return RiskWeight {
            beta: 0.0,
            eta: 0.5,
            degenerate: true,
        };
    }
    let beta = (velocity.dot(grad) / denom).clamp(-1.0, 1.0);
    RiskWeight {
        beta,
        eta: 1.0 / (1.0 + (alpha * beta).exp()),
        degenerate: false,
    }
}

/// Effective perceived distance `lambda (1 - eta) d_c + (1 - lambda) dist`,
/// clamped to `[0, d_c]`.
pub fn effective_distance(eta: f64, obstacle_dist: f64, d_c: f64, lambda: f64) -> f64 {
    (lambda * (1.0 - eta) * d_c + (1.0 - lambda) * obstacle_dist).clamp(0.0, d_c)
}

/// Largest speed whose reaction distance plus braking distance fits in `d`:
/// the positive root of `v t_r + v^2 / (2 a_max) = d`.
pub fn velocity_bound(d: f64, t_r: f64, a_max: f64) -> f64 {
    let k = t_r * a_max;
    // Rationalized form of sqrt(k^2 + 2 d a) - k; avoids cancellation.
    let s = (k * k + 2.0 * d * a_max).sqrt();
    if s + k > 0.0 {
        2.0 * d * a_max / (s + k)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityLimit {
    pub pre_clamp: f64,
    pub v: f64,
    /// The lower speed limit exceeds the safe bound; a replan is warranted.
    pub below_floor: bool,
}

/// [`velocity_bound`] clamped to `[v_lo, v_hi]`.
pub fn max_velocity(d: f64, t_r: f64, a_max: f64, velocity_range: [f64; 2]) -> VelocityLimit {
    let pre = velocity_bound(d.max(0.0), t_r.max(0.0), a_max);
    let [lo, hi] = velocity_range;
    VelocityLimit {
        pre_clamp: pre,
        v: pre.clamp(lo, hi),
        below_floor: pre < lo,
    }
}

/// Lower bound on the mapping frequency that keeps `v` safe within `d`;
/// `None` when no frequency can (non-positive denominator).
pub fn frequency_lower_bound(v: f64, d: f64, sigma: u32, a_max: f64, t_s: f64) -> Option<f64> {
    let denom = 2.0 * d * a_max - v * v - 2.0 * a_max * v * t_s;
    (denom > 0.0).then(|| 2.0 * (sigma as f64 - 1.0) * a_max * v / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyChoice {
    pub h: f64,
    pub h_min: f64,
    pub h_max: f64,
}

/// Smallest listed frequency in `[H_min, 1 / t_m]`, or `None` if infeasible.
#[allow(clippy::too_many_arguments)]
pub fn frequency_select(
    v: f64,
    d: f64,
    sigma: u32,
    a_max: f64,
    t_m: f64,
    t_p: f64,
    t_o: f64,
    frequency_list: &[f64],
) -> Option<FrequencyChoice> {
    let t_s = t_m + t_p + t_o;
    let h_min = frequency_lower_bound(v, d, sigma, a_max, t_s)?;
    let h_max = if t_m > 0.0 { 1.0 / t_m } else { f64::INFINITY };
    frequency_list
        .iter()
        .copied()
        .find(|&h| h >= h_min && h <= h_max)
        .map(|h| FrequencyChoice { h, h_min, h_max })
}

/// Density-adjusted optimal length `(1 + gamma rho / rho*) L_bar`.
pub fn optimal_length(l_bar: f64, rho: u32, rho_star: u32, gamma: f64) -> Result<f64> {
    if rho_star == 0 {
        return Err(Error::Config("pixel capacity must be positive".into()));
    }
    Ok((1.0 + gamma * rho as f64 / rho_star as f64) * l_bar)
}

/// Probability that the current trajectory is acceptably short:
/// `exp(-(eps / L_bar)(L - L*))` for `L >= L*`, and 1 below `L*`.
pub fn trajectory_probability(l: f64, l_star: f64, l_bar: f64, epsilon: f64) -> f64 {
    if l < l_star || !(l_bar > 0.0) {
        return 1.0;
    }
    (-(epsilon / l_bar) * (l - l_star)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionChoice {
    pub r: f64,
    pub replan: bool,
}

/// Mapping-resolution adapter.
///
/// Starts from the finest level. When `p >= phi` it walks the coarser
/// levels in order, keeping each level at which the trajectory endpoint and
/// the obstacle endpoint still fall in different cells, and stops at the
/// first level where they merge. When `p < phi` it stays at the finest level
/// and requests a replan. Without obstacle endpoints every level is
/// acceptable.
pub fn adapt_resolution(
    p: f64,
    endpoints: Option<(Vec2, Vec2)>,
    geometry: &GridGeometry,
    ladder: &ResolutionLadder,
    phi: f64,
) -> ResolutionChoice {
    let levels = ladder.levels();
    let mut r_c = levels[0];
    if p < phi {
        return ResolutionChoice {
            r: r_c,
            replan: true,
        };
    }
    for &r in &levels[1..] {
        let separated = match endpoints {
            None => true,
            Some((p_t, p_o)) => manhattan_distance(geometry, p_t, p_o, r).is_ok_and(|m| m > 0),
        };
        if separated {
            r_c = r;
        } else {
            break;
        }
    }
    ResolutionChoice {
        r: r_c,
        replan: false,
    }
}

/// Everything the adapters read from the mission at one frame.
#[derive(Debug, Clone, Copy)]
pub struct EansInputs {
    pub velocity: Vec2,
    pub approach: Option<ClosestApproach>,
    /// Sensor range `d_c`.
    pub max_range: f64,
    pub obstacle_pixels: u32,
    pub pixel_capacity: u32,
    /// Remaining trajectory length `L`.
    pub length: f64,
    /// Straight-line distance to the goal `L_bar`.
    pub span: f64,
}

/// Intermediate quantities of one [`eans_step`], kept for the mission log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EansTrace {
    pub beta: f64,
    pub eta: f64,
    pub obstacle_dist: f64,
    pub d: f64,
    pub t_r: f64,
    pub v_pre_clamp: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub backoff_steps: u32,
    pub forced_frequency: bool,
    pub degenerate_risk: bool,
    pub l_star: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EansOutput {
    pub strategy: NavStrategy,
    pub trace: EansTrace,
}

/// Runs the velocity, frequency and resolution adapters in that order.
///
/// Speed is bounded at the fastest admissible mapping rate, then the
/// slowest rate that keeps that speed safe is chosen. Mapping latency is
/// taken at the finest ladder level, the worst case over any resolution the
/// resolution adapter may pick afterwards.
pub fn eans_step(
    inputs: &EansInputs,
    cfg: &AdapterConfig,
    timing: &TimingModel,
    geometry: &GridGeometry,
) -> Result<EansOutput> {
    let d_c = inputs.max_range;
    let gradient = inputs.approach.map(|a| a.p_t - a.p_o);
    let risk = risk_weight(inputs.velocity, gradient, cfg.alpha);
    let obstacle_dist = inputs.approach.map_or(d_c, |a| a.dist.min(d_c));
    let d = effective_distance(risk.eta, obstacle_dist, d_c, cfg.lambda);

    let t_m = timing.mapping_latency(cfg.ladder.finest(), d_c);
    let h_top = cfg
        .frequency_list
        .iter()
        .rev()
        .copied()
        .find(|&h| t_m <= 1.0 / h)
        .ok_or_else(|| {
            Error::Config("no listed frequency admits the finest mapping latency".into())
        })?;
    let t_r = reaction_time(h_top, cfg.sigma, t_m, timing.t_p, timing.t_o)?;
    let limit = max_velocity(d, t_r, cfg.a_max, cfg.velocity_range);

    let mut v = limit.v;
    let mut backoff_steps = 0;
    let mut forced = false;
    let choice = loop {
        if let Some(c) = frequency_select(
            v,
            d,
            cfg.sigma,
            cfg.a_max,
            t_m,
            timing.t_p,
            timing.t_o,
            &cfg.frequency_list,
        ) {
            break c;
        }
        if v <= cfg.v_lo() {
            forced = true;
            log::warn!(
                "no mapping frequency supports v = {v} m/s at d = {d} m; forcing the highest rate"
            );
            let t_s = t_m + timing.t_p + timing.t_o;
            break FrequencyChoice {
                h: *cfg.frequency_list.last().expect("validated non-empty"),
                h_min: frequency_lower_bound(v, d, cfg.sigma, cfg.a_max, t_s)
                    .unwrap_or(f64::INFINITY),
                h_max: 1.0 / t_m,
            };
        }
        v = (v - VELOCITY_BACKOFF_STEP).max(cfg.v_lo());
        backoff_steps += 1;
    };

    let l_star = optimal_length(
        inputs.span,
        inputs.obstacle_pixels,
        inputs.pixel_capacity,
        cfg.gamma,
    )?;
    let p = trajectory_probability(inputs.length, l_star, inputs.span, cfg.epsilon);
    let res = adapt_resolution(
        p,
        inputs.approach.map(|a| (a.p_t, a.p_o)),
        geometry,
        &cfg.ladder,
        cfg.phi,
    );

    Ok(EansOutput {
        strategy: NavStrategy {
            v_max: v,
            h: choice.h,
            r: res.r,
            replan: res.replan || limit.below_floor,
        },
        trace: EansTrace {
            beta: risk.beta,
            eta: risk.eta,
            obstacle_dist,
            d,
            t_r,
            v_pre_clamp: limit.pre_clamp,
            h_min: choice.h_min,
            h_max: choice.h_max,
            backoff_steps,
            forced_frequency: forced,
            degenerate_risk: risk.degenerate,
            l_star,
            probability: p,
        },
    })
}

/// One row of the lookup table: applies while `obstacle_pixels <= max_pixels`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LookupRow {
    pub max_pixels: u32,
    pub v: f64,
    pub h: f64,
    pub r: f64,
}

/// Threshold table indexed by the obstacle pixel count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LookupTable {
    pub rows: Vec<LookupRow>,
}

/// Velocity ceiling of the lookup-table design.
pub const LOOKUP_MAX_VELOCITY: f64 = 2.5;

impl LookupTable {
    /// Five rows at 0, 1/8, 1/4, 1/2 and all of the pixel capacity, from
    /// (2.5 m/s, 5 Hz, 0.5 m) down to (0.5 m/s, 30 Hz, 0.1 m).
    pub fn default_for(pixel_capacity: u32) -> Self {
        let cut = |num: u32, den: u32| (pixel_capacity * num) / den;
        Self {
            rows: vec![
                LookupRow {
                    max_pixels: 0,
                    v: 2.5,
                    h: 5.0,
                    r: 0.5,
                },
                LookupRow {
                    max_pixels: cut(1, 8),
                    v: 2.0,
                    h: 10.0,
                    r: 0.4,
                },
                LookupRow {
                    max_pixels: cut(1, 4),
                    v: 1.5,
                    h: 15.0,
                    r: 0.3,
                },
                LookupRow {
                    max_pixels: cut(1, 2),
                    v: 1.0,
                    h: 20.0,
                    r: 0.2,
                },
                LookupRow {
                    max_pixels: pixel_capacity,
                    v: 0.5,
                    h: 30.0,
                    r: 0.1,
                },
            ],
        }
    }

    pub fn validate(&self, cfg: &AdapterConfig, pixel_capacity: u32) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Config("lookup table is empty".into()));
        }
        if self
            .rows
            .windows(2)
            .any(|w| w[1].max_pixels <= w[0].max_pixels)
        {
            return Err(Error::Config(
                "lookup cutoffs must be strictly increasing".into(),
            ));
        }
        if self
            .rows
            .last()
            .is_none_or(|r| r.max_pixels < pixel_capacity)
        {
            return Err(Error::Config(
                "lookup table does not cover the pixel capacity".into(),
            ));
        }
        for row in &self.rows {
            let s = NavStrategy {
                v_max: row.v,
                h: row.h,
                r: row.r,
                replan: false,
            };
            if !s.is_valid_for(cfg) || row.v > LOOKUP_MAX_VELOCITY {
                return Err(Error::Config(format!(
                    "lookup row {row:?} outside allowed ranges"
                )));
            }
        }
        Ok(())
    }
}

/// First row whose cutoff is at or above `obstacle_pixels` (a count on a
/// cutoff selects that row).
pub fn lookup_table_strategy(obstacle_pixels: u32, table: &LookupTable) -> Result<NavStrategy> {
    table
        .rows
        .iter()
        .find(|row| obstacle_pixels <= row.max_pixels)
        .map(|row| NavStrategy {
            v_max: row.v,
            h: row.h,
            r: row.r,
            replan: false,
        })
        .ok_or_else(|| Error::Config(format!("no lookup row covers {obstacle_pixels} pixels")))
}

/// The static conservative strategy: 0.5 m/s, 30 Hz, 0.1 m.
pub fn baseline_strategy() -> NavStrategy {
    NavStrategy {
        v_max: 0.5,
        h: 30.0,
        r: 0.1,
        replan: false,
    }
}
