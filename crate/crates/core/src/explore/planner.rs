use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::occupancy::{CellIdx, OccupancyGrid};

pub const UNREACHABLE: u32 = u32::MAX;

fn manhattan(a: CellIdx, b: CellIdx) -> u32 {
    (a.0.abs_diff(b.0) + a.1.abs_diff(b.1)) as u32
}

/// A* over 4-connected free cells with unit cost and a Manhattan heuristic.
/// Unknown cells are blocked. The open set pops by `(f, h, row, col)`, so ties
/// are broken deterministically. The start cell is expanded even if it is not
/// free. Returns the cell sequence from `start` to `goal` inclusive.
pub fn plan_path(grid: &OccupancyGrid, start: CellIdx, goal: CellIdx) -> Option<Vec<CellIdx>> {
    if !grid.is_free(goal) {
        return None;
    }
    let n = grid.rows * grid.cols;
    let idx = |(r, c): CellIdx| r * grid.cols + c;
    let mut g = vec![UNREACHABLE; n];
    let mut parent: Vec<Option<CellIdx>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    g[idx(start)] = 0;
    let h0 = manhattan(start, goal);
    open.push(Reverse((h0, h0, start.0, start.1)));

    while let Some(Reverse((_, _, r, c))) = open.pop() {
        let cur = (r, c);
        if closed[idx(cur)] {
            continue;
        }
        closed[idx(cur)] = true;
        if cur == goal {
            let mut path = vec![cur];
            let mut at = cur;
            while let Some(p) = parent[idx(at)] {
                path.push(p);
                at = p;
            }
            path.reverse();
            return Some(path);
        }
        let g_cur = g[idx(cur)];
        for nb in grid.neighbors4(cur) {
            if !grid.is_free(nb) || closed[idx(nb)] {
                continue;
            }
            let g_new = g_cur + 1;
            if g_new < g[idx(nb)] {
                g[idx(nb)] = g_new;
                parent[idx(nb)] = Some(cur);
                let h = manhattan(nb, goal);
                open.push(Reverse((g_new + h, h, nb.0, nb.1)));
            }
        }
    }
    None
}

/// Breadth-first step distances from `source` over 4-connected free cells
/// (the source itself is always expanded). Row-major; `UNREACHABLE` elsewhere.
pub fn bfs_distances(grid: &OccupancyGrid, source: CellIdx) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; grid.rows * grid.cols];
    let mut queue = VecDeque::new();
    dist[source.0 * grid.cols + source.1] = 0;
    queue.push_back(source);
    while let Some(cur) = queue.pop_front() {
        let d = dist[cur.0 * grid.cols + cur.1];
        for nb in grid.neighbors4(cur) {
            let i = nb.0 * grid.cols + nb.1;
            if dist[i] == UNREACHABLE && grid.is_free(nb) {
                dist[i] = d + 1;
                queue.push_back(nb);
            }
        }
    }
    dist
}
