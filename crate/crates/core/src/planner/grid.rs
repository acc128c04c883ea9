//! 2D occupancy grid with run-length-encoded text form and grid traversal.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::planner::PlannerError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Obstacle,
    Unknown,
}

impl CellState {
    fn symbol(self) -> char {
        match self {
            CellState::Free => '.',
            CellState::Obstacle => '#',
            CellState::Unknown => '?',
        }
    }

    fn from_symbol(c: char) -> Option<Self> {
        match c {
            '.' => Some(CellState::Free),
            '#' => Some(CellState::Obstacle),
            '?' => Some(CellState::Unknown),
            _ => None,
        }
    }
}

/// Row-major grid; cell `(ix, iy)` covers
/// `[origin.x + ix*res, origin.x + (ix+1)*res) x [origin.y + iy*res, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid<T> {
    width: usize,
    height: usize,
    resolution: T,
    origin: Vec2<T>,
    cells: Vec<CellState>,
}

impl<T: Real> OccupancyGrid<T> {
    pub fn new(width: usize, height: usize, resolution: T, origin: Vec2<T>) -> Result<Self, PlannerError> {
        if !(resolution > T::zero()) || !resolution.is_finite() {
            return Err(PlannerError::InvalidGrid("resolution must be positive".into()));
        }
        if width == 0 || height == 0 {
            return Err(PlannerError::InvalidGrid("grid must have at least one cell".into()));
        }
        if !origin.is_finite() {
            return Err(PlannerError::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { width, height, resolution, origin, cells: vec![CellState::Free; width * height] })
    }

    /// Parses run-length-encoded rows, listed top (highest `y`) first. Each row
    /// is a sequence of `[count]symbol` runs with symbols `.` free, `#`
    /// obstacle, `?` unknown; a missing count means one.
    pub fn from_rle(rows: &[String], resolution: T, origin: Vec2<T>) -> Result<Self, PlannerError> {
        let height = rows.len();
        let decoded: Vec<Vec<CellState>> = rows
            .iter()
            .enumerate()
            .map(|(k, r)| decode_row(r).map_err(|e| PlannerError::InvalidGrid(format!("row {k}: {e}"))))
            .collect::<Result<_, _>>()?;
        let width = decoded.first().map_or(0, Vec::len);
        if let Some(k) = decoded.iter().position(|r| r.len() != width) {
            return Err(PlannerError::InvalidGrid(format!(
                "row {k} has {} cells, expected {width}",
                decoded[k].len()
            )));
        }
        let mut g = Self::new(width, height, resolution, origin)?;
        for (k, row) in decoded.into_iter().enumerate() {
            let iy = height - 1 - k;
            for (ix, c) in row.into_iter().enumerate() {
                g.set(ix, iy, c);
            }
        }
        Ok(g)
    }

    pub fn to_rle(&self) -> Vec<String> {
        (0..self.height)
            .rev()
            .map(|iy| {
                let mut out = String::new();
                let mut ix = 0;
                while ix < self.width {
                    let c = self.state(ix, iy);
                    let mut n = 1;
                    while ix + n < self.width && self.state(ix + n, iy) == c {
                        n += 1;
                    }
                    if n > 1 {
                        out.push_str(&n.to_string());
                    }
                    out.push(c.symbol());
                    ix += n;
                }
                out
            })
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> T {
        self.resolution
    }

    pub fn origin(&self) -> Vec2<T> {
        self.origin
    }

    pub fn state(&self, ix: usize, iy: usize) -> CellState {
        self.cells[iy * self.width + ix]
    }

    pub fn set(&mut self, ix: usize, iy: usize, s: CellState) {
        self.cells[iy * self.width + ix] = s;
    }

    pub fn cell_of(&self, p: Vec2<T>) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx < T::zero() || fy < T::zero() {
            return None;
        }
        let (ix, iy) = (fx.to_usize()?, fy.to_usize()?);
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2<T> {
        let half = T::lit(0.5);
        Vec2::new(
            self.origin.x + (T::lit(ix as f64) + half) * self.resolution,
            self.origin.y + (T::lit(iy as f64) + half) * self.resolution,
        )
    }

    pub fn is_obstacle_at(&self, p: Vec2<T>) -> bool {
        self.cell_of(p).is_some_and(|(ix, iy)| self.state(ix, iy) == CellState::Obstacle)
    }

    pub fn obstacle_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == CellState::Obstacle).count()
    }

    /// Walks the cells pierced by the ray `start + t*dir`, `t` in
    /// `[0, max_t]`, calling `f(ix, iy, t_enter, t_exit)` in order until `f`
    /// returns `false` or the ray leaves the grid. `dir` need not be unit.
    pub fn traverse(&self, start: Vec2<T>, dir: Vec2<T>, max_t: T, mut f: impl FnMut(usize, usize, T, T) -> bool) {
        let Some((mut ix, mut iy)) = self.cell_of(start) else { return };
        let inf = T::infinity();
        let res = self.resolution;
        let step_x: isize = if dir.x > T::zero() { 1 } else { -1 };
        let step_y: isize = if dir.y > T::zero() { 1 } else { -1 };
        let next_boundary = |i: usize, step: isize, o: T, s: T, d: T| -> (T, T) {
            if d == T::zero() {
                return (inf, inf);
            }
            let edge_index = if step > 0 { i + 1 } else { i };
            let edge = o + T::lit(edge_index as f64) * res;
            ((edge - s) / d, (res / d).abs())
        };
        let (mut t_max_x, dt_x) = next_boundary(ix, step_x, self.origin.x, start.x, dir.x);
        let (mut t_max_y, dt_y) = next_boundary(iy, step_y, self.origin.y, start.y, dir.y);
        let mut t = T::zero();
        loop {
            let t_exit = t_max_x.min(t_max_y).min(max_t);
            if !f(ix, iy, t, t_exit) || t_exit >= max_t {
                return;
            }
            if t_max_x < t_max_y {
                let nx = ix as isize + step_x;
                if nx < 0 || nx as usize >= self.width {
                    return;
                }
                ix = nx as usize;
                t = t_max_x;
                t_max_x += dt_x;
            } else {
                let ny = iy as isize + step_y;
                if ny < 0 || ny as usize >= self.height {
                    return;
                }
                iy = ny as usize;
                t = t_max_y;
                t_max_y += dt_y;
            }
        }
    }
}

fn decode_row(row: &str) -> Result<Vec<CellState>, String> {
    let mut out = Vec::new();
    let mut count = String::new();
    for c in row.chars() {
        if c.is_ascii_digit() {
            count.push(c);
            continue;
        }
        let state = CellState::from_symbol(c).ok_or_else(|| format!("unknown cell symbol {c:?}"))?;
        let n = if count.is_empty() { 1 } else { count.parse::<usize>().map_err(|e| e.to_string())? };
        out.extend(std::iter::repeat_n(state, n));
        count.clear();
    }
    if !count.is_empty() {
        return Err("trailing run length without a symbol".into());
    }
    Ok(out)
}
