//! Grid path planning and trajectory queries.
//!
//! Unknown cells are traversable; only occupied cells (inflated by the UAV
//! radius) block. A start cell swallowed by inflation may be left through
//! inflated cells, but a path can never re-enter inflation from free space.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{polyline_length, project_on_segment, Vec2};
use crate::grid::{CellState, GridIndex, OccupancyGrid};

/// Waypoint polyline from the UAV's position to the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Vec2>,
    pub created_at: f64,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Vec2>, created_at: f64) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::EmptyTrajectory);
        }
        Ok(Self {
            waypoints,
            created_at,
        })
    }

    /// Straight segment densified so no two consecutive points are farther
    /// apart than `spacing`.
    pub fn straight(a: Vec2, b: Vec2, spacing: f64, created_at: f64) -> Self {
        Self {
            waypoints: densify(&[a, b], spacing),
            created_at,
        }
    }

    pub fn start(&self) -> Vec2 {
        self.waypoints[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.waypoints.last().expect("trajectory has waypoints")
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.waypoints)
    }

    /// Remainder of the trajectory starting at `from`, assumed to lie on or
    /// near segment `segment`.
    pub fn suffix(&self, segment: usize, from: Vec2) -> Trajectory {
        let seg = segment.min(self.waypoints.len() - 2);
        let mut pts = Vec::with_capacity(self.waypoints.len() - seg);
        pts.push(from);
        pts.extend_from_slice(&self.waypoints[seg + 1..]);
        Trajectory {
            waypoints: pts,
            created_at: self.created_at,
        }
    }

    /// Leading part of the trajectory up to arc length `max_len`.
    pub fn prefix(&self, max_len: f64) -> Trajectory {
        let mut pts = vec![self.waypoints[0]];
        let mut acc = 0.0;
        for w in self.waypoints.windows(2) {
            let len = w[0].distance(w[1]);
            if acc + len >= max_len {
                let t = if len > 0.0 {
                    (max_len - acc) / len
                } else {
                    0.0
                };
                pts.push(w[0].lerp(w[1], t.clamp(0.0, 1.0)));
                break;
            }
            acc += len;
            pts.push(w[1]);
        }
        if pts.len() < 2 {
            pts.push(pts[0]);
        }
        Trajectory {
            waypoints: pts,
            created_at: self.created_at,
        }
    }
}

/// `(L, L_bar)`: arc length and straight-line endpoint distance.
pub fn trajectory_metrics(traj: &Trajectory) -> (f64, f64) {
    (traj.length(), traj.start().distance(traj.end()))
}

/// Inserts points so consecutive points are at most `spacing` apart.
pub fn densify(vertices: &[Vec2], spacing: f64) -> Vec<Vec2> {
    let mut out = vec![vertices[0]];
    for w in vertices.windows(2) {
        let n = (w[0].distance(w[1]) / spacing).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(w[0].lerp(w[1], k as f64 / n as f64));
        }
    }
    out
}

/// Drops interior points that are collinear with their neighbours.
fn simplify(points: &[Vec2]) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::with_capacity(points.len());
    for &p in points {
        if out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            let (ab, bp) = (b - a, p - b);
            let cross = ab.x * bp.y - ab.y * bp.x;
            if cross.abs() <= 1e-12 * (ab.norm() * bp.norm()).max(1e-300) && ab.dot(bp) >= 0.0 {
                out.pop();
            }
        }
        if out.last() != Some(&p) || out.is_empty() {
            out.push(p);
        }
    }
    if out.len() == 1 {
        out.push(out[0]);
    }
    out
}

/// Blocking level of each cell for planning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Blocking {
    Clear,
    Inflated,
    Occupied,
}

/// Occupancy inflated by a clearance radius.
#[derive(Debug, Clone)]
pub struct InflatedGrid<'a> {
    grid: &'a OccupancyGrid,
    level: Vec<Blocking>,
    /// Distance from each cell's center to the nearest occupied square,
    /// capped at the inflation radius.
    clearance: Vec<f64>,
}

impl<'a> InflatedGrid<'a> {
    /// Marks every cell whose square comes within `radius` of an occupied
    /// cell's square as inflated, so any path through clear cells keeps
    /// `radius` from every occupied cell.
    pub fn new(grid: &'a OccupancyGrid, radius: f64) -> Self {
        let (nx, ny) = grid.dims();
        let offsets = inflation_offsets(radius, grid.cell_size());
        let mut level = vec![Blocking::Clear; nx * ny];
        let mut clearance = vec![radius; nx * ny];
        for idx in grid.occupied_cells() {
            for o in &offsets {
                let (x, y) = (idx.x as isize + o.dx, idx.y as isize + o.dy);
                if x >= 0 && y >= 0 && (x as usize) < nx && (y as usize) < ny {
                    let f = y as usize * nx + x as usize;
                    if level[f] == Blocking::Clear {
                        level[f] = Blocking::Inflated;
                    }
                    clearance[f] = clearance[f].min(o.center_dist);
                }
            }
        }
        for idx in grid.occupied_cells() {
            level[grid.flat(idx)] = Blocking::Occupied;
        }
        Self {
            grid,
            level,
            clearance,
        }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        self.grid
    }

    pub fn level(&self, idx: GridIndex) -> Blocking {
        self.level[self.grid.flat(idx)]
    }

    pub fn is_clear(&self, idx: GridIndex) -> bool {
        self.level(idx) == Blocking::Clear
    }

    pub fn clearance(&self, idx: GridIndex) -> f64 {
        self.clearance[self.grid.flat(idx)]
    }

    /// Whether a move from `from` into `to` is allowed. Inflated cells can
    /// only be entered from blocked cells of strictly smaller clearance, so
    /// a start inside the inflation can only move outward; `goal` may always
    /// be entered unless occupied.
    pub fn can_enter(&self, from: GridIndex, to: GridIndex, goal: GridIndex) -> bool {
        match self.level(to) {
            Blocking::Clear => true,
            Blocking::Occupied => false,
            Blocking::Inflated => {
                to == goal
                    || (self.level(from) != Blocking::Clear
                        && self.clearance(to) > self.clearance(from) + 1e-12)
            }
        }
    }

    /// 8-connected successors of `cell` with move costs in cell units.
    /// Diagonal moves may not squeeze between occupied cells.
    pub fn successors(
        &self,
        cell: GridIndex,
        goal: GridIndex,
    ) -> impl Iterator<Item = (GridIndex, f64)> + '_ {
        let (nx, ny) = self.grid.dims();
        const MOVES: [(isize, isize); 8] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        MOVES.iter().filter_map(move |&(dx, dy)| {
            let (x, y) = (cell.x as isize + dx, cell.y as isize + dy);
            if x < 0 || y < 0 || x as usize >= nx || y as usize >= ny {
                return None;
            }
            let to = GridIndex::new(x as usize, y as usize);
            if !self.can_enter(cell, to, goal) {
                return None;
            }
            if dx != 0 && dy != 0 {
                let a = GridIndex::new(x as usize, cell.y);
                let b = GridIndex::new(cell.x, y as usize);
                if self.level(a) == Blocking::Occupied || self.level(b) == Blocking::Occupied {
                    return None;
                }
                Some((to, std::f64::consts::SQRT_2))
            } else {
                Some((to, 1.0))
            }
        })
    }

    /// True when every cell crossed by `a`-`b` is clear.
    pub fn line_of_sight(&self, a: Vec2, b: Vec2) -> bool {
        let mut clear = true;
        self.grid.traverse(a, b, |f| {
            if self.level[f] != Blocking::Clear {
                clear = false;
            }
        });
        clear
    }
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    /// Raw 8-connected cell path from start cell to goal cell.
    pub cell_path: Vec<GridIndex>,
    /// Cost of `cell_path` in cell units (1 straight, sqrt 2 diagonal).
    pub cell_cost: f64,
}

#[derive(PartialEq)]
struct Node {
    f: f64,
    g: f64,
    cell: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn octile(a: GridIndex, b: GridIndex) -> f64 {
    let dx = a.x.abs_diff(b.x) as f64;
    let dy = a.y.abs_diff(b.y) as f64;
    dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
}

/// 8-connected A* over the inflated grid, followed by line-of-sight
/// shortcutting and densification to one cell diagonal.
pub fn plan(
    grid: &OccupancyGrid,
    start: Vec2,
    goal: Vec2,
    uav_radius: f64,
    now: f64,
) -> Result<PlanResult> {
    let inflated = InflatedGrid::new(grid, uav_radius);
    plan_on(&inflated, start, goal, now)
}

pub fn plan_on(
    inflated: &InflatedGrid<'_>,
    start: Vec2,
    goal: Vec2,
    now: f64,
) -> Result<PlanResult> {
    let grid = inflated.grid();
    let s = grid.index_of(start)?;
    let g = grid.index_of(goal)?;
    if grid.state(g) == CellState::Occupied {
        return Err(Error::NoPath);
    }
    let (nx, ny) = grid.dims();
    let mut g_score = vec![f64::INFINITY; nx * ny];
    let mut parent = vec![usize::MAX; nx * ny];
    let mut closed = vec![false; nx * ny];
    let mut open = BinaryHeap::new();
    let (sf, gf) = (grid.flat(s), grid.flat(g));
    g_score[sf] = 0.0;
    open.push(Node {
        f: octile(s, g),
        g: 0.0,
        cell: sf,
    });

    while let Some(Node { g: gc, cell, .. }) = open.pop() {
        if closed[cell] {
            continue;
        }
        closed[cell] = true;
        if cell == gf {
            break;
        }
        let here = grid.unflat(cell);
        for (next, cost) in inflated.successors(here, g) {
            let nf = grid.flat(next);
            let tentative = gc + cost;
            if !closed[nf] && tentative < g_score[nf] {
                g_score[nf] = tentative;
                parent[nf] = cell;
                open.push(Node {
                    f: tentative + octile(next, g),
                    g: tentative,
                    cell: nf,
                });
            }
        }
    }
    if !closed[gf] {
        return Err(Error::NoPath);
    }

    let mut cell_path = vec![g];
    let mut cur = gf;
    while cur != sf {
        cur = parent[cur];
        cell_path.push(grid.unflat(cur));
    }
    cell_path.reverse();

    let mut points = Vec::with_capacity(cell_path.len() + 1);
    points.push(start);
    points.extend(
        cell_path[1..cell_path.len().saturating_sub(1)]
            .iter()
            .map(|&c| grid.cell_center(c)),
    );
    points.push(goal);

    let vertices = shortcut(inflated, &points);
    let spacing = grid.cell_size() * std::f64::consts::SQRT_2;
    Ok(PlanResult {
        trajectory: Trajectory {
            waypoints: densify(&vertices, spacing),
            created_at: now,
        },
        cell_cost: g_score[gf],
        cell_path,
    })
}

/// Greedy line-of-sight shortcutting. Anchors inside blocked cells are not
/// shortcut, so an escape from inflation follows the raw cell path.
fn shortcut(inflated: &InflatedGrid<'_>, points: &[Vec2]) -> Vec<Vec2> {
    let grid = inflated.grid();
    let blocked_at = |p: Vec2| {
        grid.index_of(p)
            .map(|i| !inflated.is_clear(i))
            .unwrap_or(true)
    };
    let mut out = vec![points[0]];
    let mut i = 0;
    while i < points.len() - 1 {
        let mut next = i + 1;
        if !blocked_at(points[i]) {
            // Farthest visible point; scan back from the end.
            let mut j = points.len() - 1;
            while j > i + 1 {
                if inflated.line_of_sight(points[i], points[j]) {
                    break;
                }
                j -= 1;
            }
            next = j;
        }
        out.push(points[next]);
        i = next;
    }
    out
}

/// A cell near an occupied cell, relative to it.
#[derive(Debug, Clone, Copy)]
struct Offset {
    dx: isize,
    dy: isize,
    /// Distance from this cell's center to the occupied cell's square.
    center_dist: f64,
}

/// Offsets of cells whose square comes within `radius` of a cell's square,
/// for a grid of cell size `r`.
fn inflation_offsets(radius: f64, r: f64) -> Vec<Offset> {
    let reach = (radius / r + 1.0).ceil() as isize;
    let mut offsets = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let gap = |d: isize| ((d.abs() as f64 - 1.0) * r).max(0.0);
            if gap(dx).hypot(gap(dy)) < radius {
                let half = |d: isize| ((d.abs() as f64 - 0.5) * r).max(0.0);
                offsets.push(Offset {
                    dx,
                    dy,
                    center_dist: half(dx).hypot(half(dy)),
                });
            }
        }
    }
    offsets
}

/// True when the trajectory crosses a cell within `radius` of an occupied
/// cell. Blocked cells at the beginning of the trajectory are ignored while
/// their clearance keeps growing (the UAV escaping an inflated region).
pub fn trajectory_blocked(traj: &Trajectory, grid: &OccupancyGrid, radius: f64) -> bool {
    if grid.occupied_count() == 0 {
        return false;
    }
    let (nx, ny) = grid.dims();
    let offsets = inflation_offsets(radius, grid.cell_size());
    let states = grid.states();
    let clearance = |f: usize| {
        let (x, y) = ((f % nx) as isize, (f / nx) as isize);
        offsets
            .iter()
            .filter(|o| {
                let (cx, cy) = (x + o.dx, y + o.dy);
                cx >= 0
                    && cy >= 0
                    && (cx as usize) < nx
                    && (cy as usize) < ny
                    && states[cy as usize * nx + cx as usize] == CellState::Occupied
            })
            .map(|o| o.center_dist)
            .fold(f64::INFINITY, f64::min)
    };
    let mut escaping = true;
    let mut prev = 0.0;
    let mut last = usize::MAX;
    let mut blocked = false;
    for w in traj.waypoints.windows(2) {
        if blocked {
            break;
        }
        grid.traverse(w[0], w[1], |f| {
            if blocked || f == last {
                return;
            }
            last = f;
            let c = clearance(f);
            if c.is_infinite() {
                escaping = false;
            } else if !escaping || c < prev - 1e-12 {
                blocked = true;
            }
            prev = c;
        });
    }
    blocked
}

/// Endpoints of the closest approach between a trajectory and the map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosestApproach {
    /// Trajectory sample point closest to an obstacle.
    pub p_t: Vec2,
    /// Center of that obstacle cell.
    pub p_o: Vec2,
    pub dist: f64,
}

/// Closest approach between occupied cells and trajectory samples taken every
/// `step` meters of arc length (plus the final point). `None` when no
/// occupied cell lies within `max_range` of the trajectory.
pub fn closest_approach(
    traj: &Trajectory,
    grid: &OccupancyGrid,
    max_range: f64,
    step: f64,
) -> Option<ClosestApproach> {
    if grid.occupied_count() == 0 {
        return None;
    }
    let vertices = simplify(&traj.waypoints);
    let mut lo = vertices[0];
    let mut hi = vertices[0];
    for v in &vertices {
        lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    lo = lo - Vec2::new(max_range, max_range);
    hi += Vec2::new(max_range, max_range);

    // (arc offset, start, end, length) per segment
    let mut segments = Vec::with_capacity(vertices.len());
    let mut acc = 0.0;
    for w in vertices.windows(2) {
        let len = w[0].distance(w[1]);
        segments.push((acc, w[0], w[1], len));
        acc += len;
    }
    let total = acc;
    let end = *vertices.last().expect("non-empty");

    let mut best: Option<(f64, Vec2, Vec2)> = None;
    let mut consider = |d: f64, pt: Vec2, po: Vec2| {
        if d <= max_range && best.is_none_or(|(bd, _, _)| d < bd) {
            best = Some((d, pt, po));
        }
    };

    for idx in grid.occupied_cells() {
        let c = grid.cell_center(idx);
        if c.x < lo.x || c.y < lo.y || c.x > hi.x || c.y > hi.y {
            continue;
        }
        consider(c.distance(end), end, c);
        for &(s0, a, b, len) in &segments {
            if len <= 0.0 {
                continue;
            }
            let k_min = (s0 / step - 1e-9).ceil();
            let k_max = ((s0 + len).min(total) / step + 1e-9).floor();
            if k_max < k_min {
                continue;
            }
            let (_, t) = project_on_segment(c, a, b);
            let k_star = ((s0 + t * len) / step).floor();
            for k in [k_star, k_star + 1.0] {
                let k = k.clamp(k_min, k_max);
                let u = ((k * step - s0) / len).clamp(0.0, 1.0);
                let p = a.lerp(b, u);
                consider(p.distance(c), p, c);
            }
        }
    }
    best.map(|(dist, p_t, p_o)| ClosestApproach { p_t, p_o, dist })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;

    fn grid(w: f64, h: f64, r: f64) -> OccupancyGrid {
        OccupancyGrid::new(
            GridGeometry {
                origin: Vec2::ZERO,
                extent: Vec2::new(w, h),
            },
            r,
        )
    }

    #[test]
    fn empty_grid_gives_straight_line() {
        let g = grid(10.0, 5.0, 0.1);
        let res = plan(&g, Vec2::new(0.5, 0.5), Vec2::new(9.5, 4.5), 0.2, 0.0).unwrap();
        let (l, lbar) = trajectory_metrics(&res.trajectory);
        assert!((l - lbar).abs() < 1e-9);
        let spacing = 0.1 * std::f64::consts::SQRT_2;
        for w in res.trajectory.waypoints.windows(2) {
            assert!(w[0].distance(w[1]) <= spacing + 1e-12);
        }
    }

    #[test]
    fn goal_in_occupied_cell_fails() {
        let mut g = grid(5.0, 5.0, 0.1);
        let goal = Vec2::new(4.05, 4.05);
        g.set_occupied(g.index_of(goal).unwrap(), 1);
        assert!(matches!(
            plan(&g, Vec2::new(0.5, 0.5), goal, 0.2, 0.0),
            Err(Error::NoPath)
        ));
    }

    #[test]
    fn wall_without_gap_fails() {
        let mut g = grid(4.0, 4.0, 0.2);
        for y in 0..20 {
            g.set_occupied(GridIndex::new(10, y), 1);
        }
        assert!(matches!(
            plan(&g, Vec2::new(0.5, 2.0), Vec2::new(3.5, 2.0), 0.1, 0.0),
            Err(Error::NoPath)
        ));
    }

    #[test]
    fn inflated_start_can_escape() {
        let mut g = grid(4.0, 4.0, 0.1);
        g.set_occupied(GridIndex::new(20, 20), 1);
        // start just next to the occupied cell, well inside inflation
        let res = plan(&g, Vec2::new(2.15, 2.05), Vec2::new(3.8, 3.8), 0.4, 0.0).unwrap();
        assert!(res.trajectory.length() > 0.0);
        // re-entering inflation from clear space is not allowed
        let inf = InflatedGrid::new(&g, 0.4);
        let goal = GridIndex::new(0, 0);
        assert_eq!(inf.level(GridIndex::new(20, 16)), Blocking::Inflated);
        assert!(inf.is_clear(GridIndex::new(20, 15)));
        assert!(!inf.can_enter(GridIndex::new(20, 15), GridIndex::new(20, 16), goal));
        assert!(inf.can_enter(GridIndex::new(20, 16), GridIndex::new(20, 15), goal));
        assert!(inf.can_enter(GridIndex::new(20, 17), GridIndex::new(20, 16), goal));
        assert!(!inf.can_enter(GridIndex::new(20, 16), GridIndex::new(20, 17), goal));
    }

    #[test]
    fn metrics_examples() {
        let t = Trajectory::new(vec![Vec2::ZERO, Vec2::new(20.0, 0.0)], 0.0).unwrap();
        assert_eq!(trajectory_metrics(&t), (20.0, 20.0));
        let t = Trajectory::new(
            vec![Vec2::ZERO, Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0)],
            0.0,
        )
        .unwrap();
        let (l, lbar) = trajectory_metrics(&t);
        assert_eq!(l, 20.0);
        assert!((lbar - 14.142135623730951).abs() < 1e-12);
        let dense = Trajectory::straight(Vec2::ZERO, Vec2::new(20.0, 0.0), 0.013, 0.0);
        let (l, lbar) = trajectory_metrics(&dense);
        assert!((l - 20.0).abs() < 1e-9 && (lbar - 20.0).abs() < 1e-9);
        assert!(Trajectory::new(vec![Vec2::ZERO], 0.0).is_err());
    }

    #[test]
    fn closest_approach_none_without_obstacles() {
        let g = grid(10.0, 4.0, 0.1);
        let t = Trajectory::straight(Vec2::new(0.0, 2.0), Vec2::new(9.0, 2.0), 0.14, 0.0);
        assert!(closest_approach(&t, &g, 5.0, 0.05).is_none());
    }

    #[test]
    fn closest_approach_on_trajectory_is_within_a_cell() {
        let mut g = grid(10.0, 4.0, 0.1);
        g.set_occupied(g.index_of(Vec2::new(5.0, 2.0)).unwrap(), 1);
        let t = Trajectory::straight(Vec2::new(0.0, 2.0), Vec2::new(9.0, 2.0), 0.14, 0.0);
        let ca = closest_approach(&t, &g, 5.0, 0.05).unwrap();
        assert!(ca.dist <= 0.1 * std::f64::consts::SQRT_2);
    }

    #[test]
    fn prefix_and_suffix() {
        let t = Trajectory::new(
            vec![Vec2::ZERO, Vec2::new(4.0, 0.0), Vec2::new(4.0, 4.0)],
            0.0,
        )
        .unwrap();
        let p = t.prefix(5.0);
        assert!((p.length() - 5.0).abs() < 1e-12);
        assert_eq!(p.end(), Vec2::new(4.0, 1.0));
        let s = t.suffix(1, Vec2::new(4.0, 2.0));
        assert_eq!(s.waypoints, vec![Vec2::new(4.0, 2.0), Vec2::new(4.0, 4.0)]);
        assert!((t.prefix(100.0).length() - 8.0).abs() < 1e-12);
    }
}
