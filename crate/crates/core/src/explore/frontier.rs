use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::occupancy::{Cell, CellIdx, OccupancyGrid};
use super::planner::{bfs_distances, UNREACHABLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[serde(rename = "random")]
    RandomGoals,
    Frontier,
}

impl Policy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::RandomGoals => "random",
            Policy::Frontier => "frontier",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" | "random-goals" => Ok(Policy::RandomGoals),
            "frontier" => Ok(Policy::Frontier),
            other => Err(format!("unknown policy `{other}` (expected random|frontier)")),
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Free cells with at least one unknown 4-neighbour, in row-major order.
pub fn frontier_cells(grid: &OccupancyGrid) -> Vec<CellIdx> {
    let mut out = Vec::new();
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            if grid.get((r, c)) == Cell::Free && grid.neighbors4((r, c)).any(|n| grid.get(n) == Cell::Unknown) {
                out.push((r, c));
            }
        }
    }
    out
}

/// Frontier cells grouped by 8-connectivity. Clusters are ordered by their
/// first cell in row-major order; members are row-major within a cluster.
pub fn frontier_clusters(grid: &OccupancyGrid) -> Vec<Vec<CellIdx>> {
    let cells = frontier_cells(grid);
    let mut is_frontier = vec![false; grid.rows * grid.cols];
    for &(r, c) in &cells {
        is_frontier[r * grid.cols + c] = true;
    }
    let mut visited = vec![false; grid.rows * grid.cols];
    let mut clusters = Vec::new();
    for &seed in &cells {
        if visited[seed.0 * grid.cols + seed.1] {
            continue;
        }
        visited[seed.0 * grid.cols + seed.1] = true;
        let mut stack = vec![seed];
        let mut members = Vec::new();
        while let Some((r, c)) = stack.pop() {
            members.push((r, c));
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr >= grid.rows as isize || nc >= grid.cols as isize {
                        continue;
                    }
                    let i = nr as usize * grid.cols + nc as usize;
                    if is_frontier[i] && !visited[i] {
                        visited[i] = true;
                        stack.push((nr as usize, nc as usize));
                    }
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters
}

/// One goal per frontier cluster: the member nearest the cluster centroid
/// (ties to the lowest `(row, col)`).
pub fn frontier_goals(grid: &OccupancyGrid) -> Vec<CellIdx> {
    frontier_clusters(grid)
        .into_iter()
        .map(|members| {
            let n = members.len() as f64;
            let cr = members.iter().map(|m| m.0 as f64).sum::<f64>() / n;
            let cc = members.iter().map(|m| m.1 as f64).sum::<f64>() / n;
            let mut best = members[0];
            let mut best_d = f64::INFINITY;
            for &m in &members {
                let d = (m.0 as f64 - cr).powi(2) + (m.1 as f64 - cc).powi(2);
                if d < best_d {
                    best_d = d;
                    best = m;
                }
            }
            best
        })
        .collect()
}

/// Pick the next exploration goal, or `None` when nothing is left.
///
/// `RandomGoals` draws uniformly from free cells reachable from `agent`.
/// `Frontier` takes the frontier goal with the smallest path distance, ties to
/// the lowest `(row, col)`. Cells in `excluded` are never returned.
pub fn next_goal<R: Rng + ?Sized>(
    policy: Policy,
    grid: &OccupancyGrid,
    agent: CellIdx,
    rng: &mut R,
    excluded: &BTreeSet<CellIdx>,
) -> Option<CellIdx> {
    let dist = bfs_distances(grid, agent);
    let reach = |c: CellIdx| dist[c.0 * grid.cols + c.1];
    match policy {
        Policy::RandomGoals => {
            let candidates: Vec<CellIdx> = (0..grid.rows)
                .flat_map(|r| (0..grid.cols).map(move |c| (r, c)))
                .filter(|&c| grid.is_free(c) && reach(c) != UNREACHABLE && !excluded.contains(&c))
                .collect();
            if candidates.is_empty() {
                None
            } else {
                Some(candidates[rng.random_range(0..candidates.len())])
            }
        }
        Policy::Frontier => frontier_goals(grid)
            .into_iter()
            .filter(|&c| reach(c) != UNREACHABLE && !excluded.contains(&c))
            .min_by_key(|&c| (reach(c), c.0, c.1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid_from(rows: &[&str]) -> OccupancyGrid {
        let mut g = OccupancyGrid::new([0.0, 0.0], rows.len(), rows[0].len(), 0.1);
        for (r, line) in rows.iter().enumerate() {
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '.' => g.set((r, c), Cell::Free),
                    '#' => g.set((r, c), Cell::Occupied),
                    _ => {}
                }
            }
        }
        g
    }

    #[test]
    fn unknown_grid_has_no_frontier() {
        let g = OccupancyGrid::new([0.0, 0.0], 5, 5, 0.1);
        assert!(frontier_goals(&g).is_empty());
    }

    #[test]
    fn lone_free_cell_is_its_own_frontier() {
        let g = grid_from(&["???", "?.?", "???"]);
        assert_eq!(frontier_goals(&g), vec![(1, 1)]);
    }

    #[test]
    fn frontier_single_candidate() {
        let g = grid_from(&["#####", "#...?", "#####"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let goal = next_goal(Policy::Frontier, &g, (1, 1), &mut rng, &BTreeSet::new());
        assert_eq!(goal, Some((1, 3)));
    }

    #[test]
    fn frontier_prefers_nearer_by_path() {
        // Frontier cells at path distance 3 (left) and 7 (right).
        let g = grid_from(&["#############", "?...........?", "#############"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let start = (1, 4);
        let dist = bfs_distances(&g, start);
        let goals = frontier_goals(&g);
        let mut ds: Vec<u32> = goals.iter().map(|c| dist[c.0 * g.cols + c.1]).collect();
        ds.sort_unstable();
        assert_eq!(ds, vec![3, 7]);
        let goal = next_goal(Policy::Frontier, &g, start, &mut rng, &BTreeSet::new()).unwrap();
        assert_eq!(dist[goal.0 * g.cols + goal.1], 3);
    }

    #[test]
    fn excluded_goals_are_skipped() {
        let g = grid_from(&["#####", "#...?", "#####"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ex = BTreeSet::from([(1, 3)]);
        assert_eq!(next_goal(Policy::Frontier, &g, (1, 1), &mut rng, &ex), None);
    }

    #[test]
    fn random_goals_uniform_over_reachable() {
        // four reachable free cells; the right pocket is walled off
        let g = grid_from(&["######", "#..#.#", "#..#.#", "######"]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = std::collections::BTreeMap::new();
        let n = 10_000;
        for _ in 0..n {
            let c = next_goal(Policy::RandomGoals, &g, (1, 1), &mut rng, &BTreeSet::new()).unwrap();
            *counts.entry(c).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 4);
        for (cell, k) in counts {
            let f = k as f64 / n as f64;
            assert!((f - 0.25).abs() <= 0.02, "{cell:?}: {f}");
        }
    }

    #[test]
    fn frontiers_match_brute_force_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let mut g = OccupancyGrid::new([0.0, 0.0], 50, 50, 0.1);
            for r in 0..50 {
                for c in 0..50 {
                    let s = match rng.random_range(0..3) {
                        0 => Cell::Unknown,
                        1 => Cell::Free,
                        _ => Cell::Occupied,
                    };
                    g.set((r, c), s);
                }
            }
            // definition scan
            let mut expected = BTreeSet::new();
            for r in 0..50usize {
                for c in 0..50usize {
                    if g.get((r, c)) != Cell::Free {
                        continue;
                    }
                    let nbs = [(r as i64 - 1, c as i64), (r as i64 + 1, c as i64), (r as i64, c as i64 - 1), (r as i64, c as i64 + 1)];
                    if nbs.iter().any(|&(a, b)| (0..50).contains(&a) && (0..50).contains(&b) && g.get((a as usize, b as usize)) == Cell::Unknown) {
                        expected.insert((r, c));
                    }
                }
            }
            let clusters = frontier_clusters(&g);
            let got: BTreeSet<CellIdx> = clusters.iter().flatten().copied().collect();
            assert_eq!(got, expected);
            assert_eq!(clusters.iter().map(Vec::len).sum::<usize>(), expected.len());
            // clusters are 8-connected and mutually non-adjacent
            let label: std::collections::BTreeMap<CellIdx, usize> = clusters
                .iter()
                .enumerate()
                .flat_map(|(i, m)| m.iter().map(move |&c| (c, i)))
                .collect();
            for (&(r, c), &l) in &label {
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let n = ((r as i64 + dr) as usize, (c as i64 + dc) as usize);
                        if let Some(&l2) = label.get(&n) {
                            assert_eq!(l, l2);
                        }
                    }
                }
            }
            let goals = frontier_goals(&g);
            assert_eq!(goals.len(), clusters.len());
            for (goal, members) in goals.iter().zip(&clusters) {
                assert!(members.contains(goal));
            }
        }
    }
}
