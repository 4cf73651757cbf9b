//! Multi-resolution occupancy grid with hit-count confirmation.
//!
//! A cell moves from unknown to occupied only after it has been hit in
//! `sigma` distinct frames. Occupied cells are never cleared by free-space
//! carving; only a resolution change (which rebuilds the grid) resets them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec2};
use crate::world::SensorFrame;

/// Slack added before flooring so that points on a cell boundary land in the
/// upper cell despite rounding (`0.3 / 0.1 = 2.9999999999999996`).
const INDEX_EPS: f64 = 1e-9;

/// Ordered cell sizes, finest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResolutionLadder {
    levels: Vec<f64>,
}

impl Default for ResolutionLadder {
    /// 0.10, 0.15, ..., 0.50 m.
    fn default() -> Self {
        Self {
            levels: (0..9).map(|i| (10.0 + 5.0 * i as f64) / 100.0).collect(),
        }
    }
}

impl ResolutionLadder {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("resolution ladder is empty".into()));
        }
        if levels.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Config(
                "resolution ladder entries must be positive".into(),
            ));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "resolution ladder must be strictly increasing".into(),
            ));
        }
        Ok(Self { levels })
    }

    /// Every level must split `extent` into at least 4 cells per axis.
    pub fn validate_for(&self, extent: Vec2) -> Result<()> {
        Self::new(self.levels.clone())?;
        let coarsest = self.coarsest();
        if extent.x / coarsest < 4.0 || extent.y / coarsest < 4.0 {
            return Err(Error::Config(format!(
                "resolution {coarsest} m gives fewer than 4 cells per axis"
            )));
        }
        Ok(())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn finest(&self) -> f64 {
        self.levels[0]
    }

    pub fn coarsest(&self) -> f64 {
        *self.levels.last().expect("non-empty ladder")
    }

    pub fn position(&self, r: f64) -> Option<usize> {
        self.levels.iter().position(|&l| (l - r).abs() < 1e-9)
    }

    pub fn contains(&self, r: f64) -> bool {
        self.position(r).is_some()
    }
}

/// Integer cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridIndex {
    pub x: usize,
    pub y: usize,
}

impl GridIndex {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: GridIndex) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

/// Map frame shared by all resolutions: an origin and a metric extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: Vec2,
    pub extent: Vec2,
}

impl GridGeometry {
    pub fn from_bounds(bounds: &Aabb) -> Self {
        Self {
            origin: bounds.min,
            extent: bounds.size(),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let d = p - self.origin;
        d.x >= 0.0 && d.y >= 0.0 && d.x < self.extent.x && d.y < self.extent.y
    }

    pub fn dims(&self, r: f64) -> (usize, usize) {
        (
            ((self.extent.x / r) - INDEX_EPS).ceil().max(1.0) as usize,
            ((self.extent.y / r) - INDEX_EPS).ceil().max(1.0) as usize,
        )
    }

    /// `floor((p - origin) / r)` per axis; half-open cells.
    pub fn index(&self, p: Vec2, r: f64) -> Result<GridIndex> {
        world_to_index(self.origin, r, p).and_then(|idx| {
            let (nx, ny) = self.dims(r);
            if self.contains(p) && idx.x < nx && idx.y < ny {
                Ok(idx)
            } else {
                Err(Error::OutOfExtent(p))
            }
        })
    }
}

/// `floor((point - origin) / r)` per axis. Fails for points below the origin.
pub fn world_to_index(origin: Vec2, r: f64, point: Vec2) -> Result<GridIndex> {
    let fx = ((point.x - origin.x) / r + INDEX_EPS).floor();
    let fy = ((point.y - origin.y) / r + INDEX_EPS).floor();
    if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
        return Err(Error::OutOfExtent(point));
    }
    Ok(GridIndex::new(fx as usize, fy as usize))
}

/// Manhattan distance between the cells holding `a` and `b` at cell size `r`.
pub fn manhattan_distance(geometry: &GridGeometry, a: Vec2, b: Vec2, r: f64) -> Result<usize> {
    Ok(geometry.index(a, r)?.manhattan(geometry.index(b, r)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    Unknown,
    Free,
    Occupied,
}

impl CellState {
    fn glyph(self) -> char {
        match self {
            CellState::Occupied => '0',
            CellState::Unknown => '1',
            CellState::Free => '2',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    cell_size: f64,
    nx: usize,
    ny: usize,
    state: Vec<CellState>,
    hits: Vec<u32>,
    /// Flat indices of occupied cells in the order they became occupied.
    occupied: Vec<usize>,
    last_integration: f64,
    /// Scratch: frame stamp of the last hit per cell, for once-per-frame counting.
    hit_stamp: Vec<u32>,
    frame_counter: u32,
}

impl OccupancyGrid {
    pub fn new(geometry: GridGeometry, cell_size: f64) -> Self {
        let (nx, ny) = geometry.dims(cell_size);
        Self {
            geometry,
            cell_size,
            nx,
            ny,
            state: vec![CellState::Unknown; nx * ny],
            hits: vec![0; nx * ny],
            occupied: Vec::new(),
            last_integration: f64::NEG_INFINITY,
            hit_stamp: vec![0; nx * ny],
            frame_counter: 0,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn flat(&self, idx: GridIndex) -> usize {
        idx.y * self.nx + idx.x
    }

    pub fn unflat(&self, flat: usize) -> GridIndex {
        GridIndex::new(flat % self.nx, flat / self.nx)
    }

    pub fn index_of(&self, p: Vec2) -> Result<GridIndex> {
        self.geometry.index(p, self.cell_size)
    }

    pub fn cell_center(&self, idx: GridIndex) -> Vec2 {
        self.geometry.origin
            + Vec2::new(
                (idx.x as f64 + 0.5) * self.cell_size,
                (idx.y as f64 + 0.5) * self.cell_size,
            )
    }

    pub fn state(&self, idx: GridIndex) -> CellState {
        self.state[self.flat(idx)]
    }

    pub fn hit_count(&self, idx: GridIndex) -> u32 {
        self.hits[self.flat(idx)]
    }

    pub fn states(&self) -> &[CellState] {
        &self.state
    }

    pub fn hit_counts(&self) -> &[u32] {
        &self.hits
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = GridIndex> + '_ {
        self.occupied.iter().map(|&f| self.unflat(f))
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    /// Marks a cell occupied directly. Used for fixtures and planning tests.
    pub fn set_occupied(&mut self, idx: GridIndex, sigma: u32) {
        let f = self.flat(idx);
        self.hits[f] = self.hits[f].max(sigma);
        if self.state[f] != CellState::Occupied {
            self.state[f] = CellState::Occupied;
            self.occupied.push(f);
        }
    }

    pub fn set_free(&mut self, idx: GridIndex) {
        let f = self.flat(idx);
        if self.state[f] == CellState::Unknown {
            self.state[f] = CellState::Free;
        }
    }

    /// Integrates one sensor frame. Cells traversed before a ray's endpoint are
    /// carved free (occupied cells excepted); each cell holding a hit endpoint
    /// gains one hit per frame and becomes occupied on reaching `sigma`.
    /// Returns the number of cell visits.
    pub fn integrate_frame(&mut self, frame: &SensorFrame, sigma: u32) -> Result<usize> {
        if sigma == 0 {
            return Err(Error::Config("sigma must be at least 1".into()));
        }
        if frame.timestamp < self.last_integration {
            return Err(Error::StaleFrame {
                frame: frame.timestamp,
                last: self.last_integration,
            });
        }
        if !self.geometry.contains(frame.origin) {
            return Err(Error::OutOfExtent(frame.origin));
        }
        self.last_integration = frame.timestamp;
        self.frame_counter = self.frame_counter.wrapping_add(1).max(1);
        let stamp = self.frame_counter;

        let mut touched = 0usize;
        let mut hit_cells = Vec::new();
        for ray in &frame.hits {
            let end_inside = self.geometry.contains(ray.end);
            let mut cells = Vec::new();
            self.traverse(frame.origin, ray.end, |f| cells.push(f));
            touched += cells.len();
            let carve_len = if ray.hit && end_inside {
                cells.len() - 1
            } else {
                cells.len()
            };
            for &f in &cells[..carve_len] {
                if self.state[f] == CellState::Unknown {
                    self.state[f] = CellState::Free;
                }
            }
            if ray.hit && end_inside {
                let f = *cells.last().expect("traversal includes the origin cell");
                if self.hit_stamp[f] != stamp {
                    self.hit_stamp[f] = stamp;
                    hit_cells.push(f);
                }
            }
        }
        for f in hit_cells {
            self.hits[f] = self.hits[f].saturating_add(1);
            if self.hits[f] >= sigma && self.state[f] != CellState::Occupied {
                self.state[f] = CellState::Occupied;
                self.occupied.push(f);
            }
        }
        Ok(touched)
    }

    /// Visits the flat index of every cell the segment `a`-`b` passes through,
    /// in order from `a`. `a` must be inside the extent; the segment is clipped
    /// to the extent.
    pub fn traverse(&self, a: Vec2, b: Vec2, mut visit: impl FnMut(usize)) {
        let r = self.cell_size;
        let ga = (a - self.geometry.origin) * (1.0 / r);
        let mut gb = (b - self.geometry.origin) * (1.0 / r);
        let (nx, ny) = (self.nx as f64, self.ny as f64);
        // Clip the far end to the grid box.
        let d = gb - ga;
        let mut t_max = 1.0_f64;
        for (p, dp, hi) in [(ga.x, d.x, nx), (ga.y, d.y, ny)] {
            if dp > 0.0 && p + dp > hi {
                t_max = t_max.min((hi - p) / dp);
            } else if dp < 0.0 && p + dp < 0.0 {
                t_max = t_max.min(-p / dp);
            }
        }
        if t_max < 1.0 {
            gb = ga + d * (t_max * (1.0 - 1e-12));
        }

        let clampi = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        let (mut ix, mut iy) = (
            clampi(ga.x + INDEX_EPS, self.nx),
            clampi(ga.y + INDEX_EPS, self.ny),
        );
        let (ex, ey) = (
            clampi(gb.x + INDEX_EPS, self.nx),
            clampi(gb.y + INDEX_EPS, self.ny),
        );
        let d = gb - ga;
        let step_x: isize = if d.x > 0.0 { 1 } else { -1 };
        let step_y: isize = if d.y > 0.0 { 1 } else { -1 };
        let t_delta_x = if d.x != 0.0 {
            (1.0 / d.x).abs()
        } else {
            f64::INFINITY
        };
        let t_delta_y = if d.y != 0.0 {
            (1.0 / d.y).abs()
        } else {
            f64::INFINITY
        };
        let mut t_next_x = if d.x > 0.0 {
            ((ix + 1) as f64 - ga.x) / d.x
        } else if d.x < 0.0 {
            (ix as f64 - ga.x) / d.x
        } else {
            f64::INFINITY
        };
        let mut t_next_y = if d.y > 0.0 {
            ((iy + 1) as f64 - ga.y) / d.y
        } else if d.y < 0.0 {
            (iy as f64 - ga.y) / d.y
        } else {
            f64::INFINITY
        };

        visit(iy * self.nx + ix);
        let max_steps = ix.abs_diff(ex) + iy.abs_diff(ey);
        for _ in 0..max_steps {
            if ix == ex && iy == ey {
                break;
            }
            if t_next_x < t_next_y {
                ix = (ix as isize + step_x).clamp(0, self.nx as isize - 1) as usize;
                t_next_x += t_delta_x;
            } else {
                iy = (iy as isize + step_y).clamp(0, self.ny as isize - 1) as usize;
                t_next_y += t_delta_y;
            }
            visit(iy * self.nx + ix);
        }
    }

    /// Re-expresses the grid at `r_new` by conservative pooling: a target cell
    /// is occupied if any overlapped source cell is, free only if all are,
    /// unknown otherwise. Hit counts are carried only by occupied cells.
    pub fn resample(&self, r_new: f64, ladder: &ResolutionLadder) -> Result<OccupancyGrid> {
        if !ladder.contains(r_new) {
            return Err(Error::NotOnLadder(r_new));
        }
        if (r_new - self.cell_size).abs() < 1e-12 {
            return Ok(self.clone());
        }
        let mut out = OccupancyGrid::new(self.geometry, r_new);
        let ranges = |n_out: usize, n_src: usize| -> Vec<(usize, usize)> {
            (0..n_out)
                .map(|i| {
                    let lo = i as f64 * r_new / self.cell_size;
                    let hi = (i + 1) as f64 * r_new / self.cell_size;
                    let a = ((lo + INDEX_EPS).floor() as usize).min(n_src);
                    let b = ((hi - INDEX_EPS).ceil() as usize).clamp(a, n_src);
                    (a, b)
                })
                .collect()
        };
        let xr = ranges(out.nx, self.nx);
        let yr = ranges(out.ny, self.ny);
        for (oy, &(y0, y1)) in yr.iter().enumerate() {
            for (ox, &(x0, x1)) in xr.iter().enumerate() {
                let mut any_occ = false;
                let mut all_free = x1 > x0 && y1 > y0;
                let mut max_hits = 0;
                for sy in y0..y1 {
                    for sx in x0..x1 {
                        let f = sy * self.nx + sx;
                        match self.state[f] {
                            CellState::Occupied => {
                                any_occ = true;
                                max_hits = max_hits.max(self.hits[f]);
                            }
                            CellState::Unknown => all_free = false,
                            CellState::Free => {}
                        }
                    }
                }
                let f = oy * out.nx + ox;
                if any_occ {
                    out.state[f] = CellState::Occupied;
                    out.hits[f] = max_hits;
                    out.occupied.push(f);
                } else if all_free {
                    out.state[f] = CellState::Free;
                }
            }
        }
        out.last_integration = self.last_integration;
        Ok(out)
    }

    /// Center of the occupied cell closest to `point` within `max_range`.
    pub fn nearest_obstacle(&self, point: Vec2, max_range: f64) -> Result<Option<Vec2>> {
        if !self.geometry.contains(point) {
            return Err(Error::OutOfExtent(point));
        }
        let mut best: Option<(f64, usize)> = None;
        for &f in &self.occupied {
            let d = self.cell_center(self.unflat(f)).distance(point);
            if d <= max_range && best.is_none_or(|(bd, bf)| d < bd || (d == bd && f < bf)) {
                best = Some((d, f));
            }
        }
        Ok(best.map(|(_, f)| self.cell_center(self.unflat(f))))
    }

    /// Plain-text greymap (PGM `P2`, maxval 2): 0 occupied, 1 unknown, 2 free.
    /// The first raster row is the top (max y) of the map.
    pub fn to_pgm(&self) -> String {
        let mut out = format!(
            "P2\n# cell_size {}\n{} {}\n2\n",
            self.cell_size, self.nx, self.ny
        );
        for y in (0..self.ny).rev() {
            let row: Vec<String> = (0..self.nx)
                .map(|x| self.state[y * self.nx + x].glyph().to_string())
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Active map plus the finest-resolution evidence it is rebuilt from.
#[derive(Debug, Clone)]
pub struct MultiResolutionMap {
    ladder: ResolutionLadder,
    finest: OccupancyGrid,
    /// `None` while the finest grid is the active one.
    coarse: Option<OccupancyGrid>,
}

impl MultiResolutionMap {
    pub fn new(geometry: GridGeometry, ladder: ResolutionLadder) -> Result<Self> {
        ladder.validate_for(geometry.extent)?;
        let finest = OccupancyGrid::new(geometry, ladder.finest());
        Ok(Self {
            finest,
            coarse: None,
            ladder,
        })
    }

    pub fn ladder(&self) -> &ResolutionLadder {
        &self.ladder
    }

    pub fn active(&self) -> &OccupancyGrid {
        self.coarse.as_ref().unwrap_or(&self.finest)
    }

    pub fn finest(&self) -> &OccupancyGrid {
        &self.finest
    }

    pub fn resolution(&self) -> f64 {
        self.active().cell_size()
    }

    /// Integrates into the active grid (and the retained finest evidence).
    /// Returns the active grid's touched-cell count and whether any active
    /// cell became occupied.
    pub fn integrate(&mut self, frame: &SensorFrame, sigma: u32) -> Result<(usize, bool)> {
        match self.coarse.as_mut() {
            Some(active) => {
                let before = active.occupied_count();
                let touched = active.integrate_frame(frame, sigma)?;
                let grew = active.occupied_count() > before;
                self.finest.integrate_frame(frame, sigma)?;
                Ok((touched, grew))
            }
            None => {
                let before = self.finest.occupied_count();
                let touched = self.finest.integrate_frame(frame, sigma)?;
                Ok((touched, self.finest.occupied_count() > before))
            }
        }
    }

    /// Switches the active resolution, rebuilding from the finest evidence.
    /// Returns `true` when the resolution actually changed.
    pub fn set_resolution(&mut self, r: f64) -> Result<bool> {
        if !self.ladder.contains(r) {
            return Err(Error::NotOnLadder(r));
        }
        if (r - self.resolution()).abs() < 1e-12 {
            return Ok(false);
        }
        self.coarse = if (r - self.ladder.finest()).abs() < 1e-12 {
            None
        } else {
            Some(self.finest.resample(r, &self.ladder)?)
        };
        Ok(true)
    }
}
