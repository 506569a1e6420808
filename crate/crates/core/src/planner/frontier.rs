use std::collections::VecDeque;

use crate::geometry::{wrap_angle, Vec2};
use crate::world::{traverse_cells, OccupancyGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct Frontier {
    /// Cluster centroid snapped to the nearest cell of the cluster.
    pub position: Vec2,
    pub cell: (i64, i64),
    pub cluster_size: usize,
    pub visited: bool,
}

const NEIGHBORS_4: [(i64, i64); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

pub(crate) fn is_frontier_cell(grid: &OccupancyGrid, r: i64, c: i64) -> bool {
    grid.is_free(r, c)
        && NEIGHBORS_4
            .iter()
            .any(|&(dr, dc)| grid.in_bounds(r + dr, c + dc) && grid.is_unknown(r + dr, c + dc))
}

/// Free cells with an unknown 4-neighbour, grouped into 8-connected clusters.
/// Clusters smaller than `min_cluster` cells are dropped.
pub fn detect_frontiers(grid: &OccupancyGrid, min_cluster: usize) -> Vec<Frontier> {
    let (rows, cols) = (grid.rows as i64, grid.cols as i64);
    let mut is_f = vec![false; grid.rows * grid.cols];
    for r in 0..rows {
        for c in 0..cols {
            is_f[(r * cols + c) as usize] = is_frontier_cell(grid, r, c);
        }
    }
    let mut seen = vec![false; is_f.len()];
    let mut out = Vec::new();
    for start in 0..is_f.len() {
        if !is_f[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut cluster = Vec::new();
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            let (r, c) = (k as i64 / cols, k as i64 % cols);
            cluster.push((r, c));
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if (dr, dc) == (0, 0) || !grid.in_bounds(nr, nc) {
                        continue;
                    }
                    let nk = (nr * cols + nc) as usize;
                    if is_f[nk] && !seen[nk] {
                        seen[nk] = true;
                        queue.push_back(nk);
                    }
                }
            }
        }
        if cluster.len() < min_cluster.max(1) {
            continue;
        }
        cluster.sort_unstable();
        let n = cluster.len() as f64;
        let centroid = cluster
            .iter()
            .fold(Vec2::ZERO, |a, &(r, c)| a + grid.cell_center(r, c))
            / n;
        let mut best = cluster[0];
        let mut best_d = f64::INFINITY;
        for &(r, c) in &cluster {
            let d = grid.cell_center(r, c).distance(centroid);
            if d < best_d {
                best_d = d;
                best = (r, c);
            }
        }
        out.push(Frontier {
            position: grid.cell_center(best.0, best.1),
            cell: best,
            cluster_size: cluster.len(),
            visited: false,
        });
    }
    out
}

/// Unknown cells inside the FOV wedge with apex at the frontier, pointing
/// away from the robot, within `range` and not hidden behind known walls.
pub fn information_gain(
    grid: &OccupancyGrid,
    robot: Vec2,
    frontier: &Frontier,
    fov: f64,
    range: f64,
) -> usize {
    let apex = frontier.position;
    let axis = (apex - robot).angle();
    let res = grid.resolution;
    let (ar, ac) = grid.cell_of(apex);
    let reach = (range / res).ceil() as i64 + 1;
    let mut count = 0;
    for r in ar - reach..=ar + reach {
        for c in ac - reach..=ac + reach {
            if !grid.in_bounds(r, c) || !grid.is_unknown(r, c) {
                continue;
            }
            let center = grid.cell_center(r, c);
            let v = center - apex;
            let d = v.norm();
            if d > range || d < 1e-12 {
                continue;
            }
            if wrap_angle(v.angle() - axis).abs() > fov / 2.0 {
                continue;
            }
            let dir = v / d;
            let blocked = traverse_cells(apex, dir, d, res, |rr, cc, _| {
                (rr, cc) != (r, c) && grid.is_occupied(rr, cc)
            });
            if blocked.is_none() {
                count += 1;
            }
        }
    }
    count
}
