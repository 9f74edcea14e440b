use serde::{Deserialize, Serialize};

use crate::scene::{pixel_to_world_unchecked, CameraIntrinsics, FrameObservation, SceneSpec, FLOOR_CLEARANCE};

/// `(row, col)`; rows follow world y, columns world x.
pub type CellIdx = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Unknown,
    Free,
    Occupied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub cell_size: f64,
    /// World xy of the corner of cell (0, 0).
    pub origin: [f64; 2],
    pub rows: usize,
    pub cols: usize,
    cells: Vec<Cell>,
    /// Cells the agent bumped into, or hit by a ray after being sensed free.
    /// They keep their sensed state but are never planned through.
    blocked: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(origin: [f64; 2], rows: usize, cols: usize, cell_size: f64) -> Self {
        Self {
            cell_size,
            origin,
            rows,
            cols,
            cells: vec![Cell::Unknown; rows * cols],
            blocked: vec![false; rows * cols],
        }
    }

    /// Grid covering the scene footprint.
    pub fn for_scene(scene: &SceneSpec, cell_size: f64) -> Self {
        let b = &scene.bounds;
        let cols = ((b.max[0] - b.min[0]) / cell_size).ceil() as usize;
        let rows = ((b.max[1] - b.min[1]) / cell_size).ceil() as usize;
        Self::new([b.min[0], b.min[1]], rows, cols, cell_size)
    }

    #[inline]
    pub fn get(&self, (r, c): CellIdx) -> Cell {
        self.cells[r * self.cols + c]
    }

    pub fn set(&mut self, (r, c): CellIdx, state: Cell) {
        self.cells[r * self.cols + c] = state;
    }

    /// Exclude a cell from planning for the rest of the episode.
    pub fn mark_blocked(&mut self, (r, c): CellIdx) {
        self.blocked[r * self.cols + c] = true;
    }

    pub fn is_blocked(&self, (r, c): CellIdx) -> bool {
        self.blocked[r * self.cols + c]
    }

    /// Free and not blocked.
    pub fn is_free(&self, cell: CellIdx) -> bool {
        self.get(cell) == Cell::Free && !self.is_blocked(cell)
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<CellIdx> {
        let c = ((x - self.origin[0]) / self.cell_size).floor();
        let r = ((y - self.origin[1]) / self.cell_size).floor();
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    pub fn cell_center(&self, (r, c): CellIdx) -> [f64; 2] {
        [
            self.origin[0] + (c as f64 + 0.5) * self.cell_size,
            self.origin[1] + (r as f64 + 0.5) * self.cell_size,
        ]
    }

    pub fn count(&self, state: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// 4-neighbours inside the grid.
    pub fn neighbors4(&self, (r, c): CellIdx) -> impl Iterator<Item = CellIdx> + '_ {
        let (rows, cols) = (self.rows as isize, self.cols as isize);
        [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .filter_map(move |(dr, dc)| {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                (nr >= 0 && nc >= 0 && nr < rows && nc < cols).then_some((nr as usize, nc as usize))
            })
    }

    /// Planning copy: blocked cells become occupied, then free cells within
    /// `radius_cells` (Euclidean, in cells) of an occupied cell become
    /// occupied too, so a disc agent can follow the result.
    pub fn inflated(&self, radius_cells: usize) -> OccupancyGrid {
        let mut base = self.clone();
        for (cell, &b) in base.cells.iter_mut().zip(&self.blocked) {
            if b {
                *cell = Cell::Occupied;
            }
        }
        let mut out = base.clone();
        let r = radius_cells as isize;
        for row in 0..self.rows {
            for col in 0..self.cols {
                if radius_cells == 0 || base.get((row, col)) != Cell::Occupied {
                    continue;
                }
                for dr in -r..=r {
                    for dc in -r..=r {
                        if dr * dr + dc * dc > r * r {
                            continue;
                        }
                        let (nr, nc) = (row as isize + dr, col as isize + dc);
                        if nr < 0 || nc < 0 || nr >= self.rows as isize || nc >= self.cols as isize {
                            continue;
                        }
                        let i = nr as usize * self.cols + nc as usize;
                        if out.cells[i] == Cell::Free {
                            out.cells[i] = Cell::Occupied;
                        }
                    }
                }
            }
        }
        out
    }

    /// Overwrite a cell's state and clear its block (planning copies only).
    pub(crate) fn force(&mut self, (r, c): CellIdx, state: Cell) {
        let i = r * self.cols + c;
        self.cells[i] = state;
        self.blocked[i] = false;
    }
}

/// Integrate one depth frame.
///
/// Each image column shares a single horizontal bearing (the camera has no
/// pitch). The column's nearest non-floor hit, usually the central-row return,
/// ends the ray: cells before it become free and its cell occupied. A hit on a
/// cell that was already free before this frame leaves it free and marks it
/// blocked for planning instead, so the free-cell count never decreases.
/// Columns with no such hit are free out to the sensor's maximum range.
pub fn update_occupancy(grid: &mut OccupancyGrid, frame: &FrameObservation, k: &CameraIntrinsics) {
    let pose = frame.pose;
    let origin = [pose.x, pose.y];
    let mut hits: Vec<CellIdx> = Vec::new();
    let step = grid.cell_size / 4.0;
    let before = grid.cells.clone();

    for u in 0..frame.width {
        let slope = (u as f64 - k.cx) / k.fx;
        let mut nearest: Option<(f64, [f64; 2])> = None;
        for v in 0..frame.height {
            let d = frame.depth_at(u, v);
            if d <= 0.0 {
                continue;
            }
            let p = pixel_to_world_unchecked(u as f64, v as f64, d, k, &pose);
            if p[2] <= FLOOR_CLEARANCE {
                continue;
            }
            let r = ((p[0] - origin[0]).powi(2) + (p[1] - origin[1]).powi(2)).sqrt();
            if nearest.is_none_or(|(best, _)| r < best) {
                nearest = Some((r, [p[0], p[1]]));
            }
        }
        // Horizontal unit direction of this column.
        let fwd = [pose.yaw.cos(), pose.yaw.sin()];
        let right = [pose.yaw.sin(), -pose.yaw.cos()];
        let dir = {
            let d = [fwd[0] + slope * right[0], fwd[1] + slope * right[1]];
            let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
            [d[0] / n, d[1] / n]
        };
        let (length, hit_cell) = match nearest {
            Some((r, p)) => {
                let nudged = [p[0] + 1e-6 * dir[0], p[1] + 1e-6 * dir[1]];
                (r, grid.cell_of(nudged[0], nudged[1]))
            }
            None => (k.max_range * (1.0 + slope * slope).sqrt(), None),
        };
        let mut t = 0.0;
        while t < length {
            let (x, y) = (origin[0] + t * dir[0], origin[1] + t * dir[1]);
            match grid.cell_of(x, y) {
                Some(c) if Some(c) == hit_cell => break,
                Some(c) => grid.set(c, Cell::Free),
                None => break,
            }
            t += step;
        }
        if let Some(c) = hit_cell {
            hits.push(c);
        }
    }
    for c in hits {
        if before[c.0 * grid.cols + c.1] == Cell::Free {
            grid.mark_blocked(c);
        } else {
            grid.set(c, Cell::Occupied);
        }
    }
}

/// Fraction of fully free ground-truth cells (cell square clear of every
/// blocking box and inside the bounds) that the grid marks free.
pub fn explored_fraction(grid: &OccupancyGrid, scene: &SceneSpec) -> f64 {
    let mut total = 0usize;
    let mut seen = 0usize;
    let half = grid.cell_size / 2.0;
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let [x, y] = grid.cell_center((r, c));
            let inside = x - half >= scene.bounds.min[0]
                && x + half <= scene.bounds.max[0]
                && y - half >= scene.bounds.min[1]
                && y + half <= scene.bounds.max[1];
            let clear = scene.blocking_boxes().all(|b| {
                x + half <= b.min[0] || x - half >= b.max[0] || y + half <= b.min[1] || y - half >= b.max[1]
            });
            if inside && clear {
                total += 1;
                if grid.is_free((r, c)) {
                    seen += 1;
                }
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        seen as f64 / total as f64
    }
}
