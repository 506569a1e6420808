use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::geometry::Vec2;
use crate::world::{traverse_cells, OccupancyGrid};

/// Cells the robot may occupy: known free, with no known-occupied cell
/// within `clearance` cells (Chebyshev distance).
#[derive(Clone, Debug)]
pub struct Traversability {
    rows: usize,
    cols: usize,
    resolution: f64,
    mask: Vec<bool>,
}

impl Traversability {
    pub fn new(grid: &OccupancyGrid, clearance: usize) -> Self {
        let (rows, cols) = (grid.rows, grid.cols);
        let k = clearance as i64;
        let mut blocked = vec![false; rows * cols];
        for r in 0..rows as i64 {
            for c in 0..cols as i64 {
                if !grid.is_occupied(r, c) {
                    continue;
                }
                for rr in (r - k).max(0)..=(r + k).min(rows as i64 - 1) {
                    for cc in (c - k).max(0)..=(c + k).min(cols as i64 - 1) {
                        blocked[rr as usize * cols + cc as usize] = true;
                    }
                }
            }
        }
        let mask = (0..rows * cols)
            .map(|i| !blocked[i] && grid.is_free((i / cols) as i64, (i % cols) as i64))
            .collect();
        Traversability {
            rows,
            cols,
            resolution: grid.resolution,
            mask,
        }
    }

    pub fn is_traversable(&self, row: i64, col: i64) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.rows
            && (col as usize) < self.cols
            && self.mask[row as usize * self.cols + col as usize]
    }

    fn cell_of(&self, p: Vec2) -> (i64, i64) {
        (
            (p.y / self.resolution).floor() as i64,
            (p.x / self.resolution).floor() as i64,
        )
    }

    fn cell_center(&self, row: i64, col: i64) -> Vec2 {
        Vec2::new(
            (col as f64 + 0.5) * self.resolution,
            (row as f64 + 0.5) * self.resolution,
        )
    }

    /// Nearest traversable cell to `p` within `radius` cells, ties broken by
    /// row then column.
    pub fn snap(&self, p: Vec2, radius: usize) -> Option<(i64, i64)> {
        let (r0, c0) = self.cell_of(p);
        if self.is_traversable(r0, c0) {
            return Some((r0, c0));
        }
        let k = radius as i64;
        let mut best: Option<(f64, (i64, i64))> = None;
        for r in r0 - k..=r0 + k {
            for c in c0 - k..=c0 + k {
                if !self.is_traversable(r, c) {
                    continue;
                }
                let d = self.cell_center(r, c).distance(p);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, (r, c)));
                }
            }
        }
        best.map(|(_, cell)| cell)
    }

    /// Straight segment whose swept cells are all traversable.
    pub fn segment_clear(&self, a: Vec2, b: Vec2) -> bool {
        let d = b - a;
        let Some(dir) = d.normalized() else {
            let (r, c) = self.cell_of(a);
            return self.is_traversable(r, c);
        };
        traverse_cells(a, dir, d.norm(), self.resolution, |r, c, _| {
            !self.is_traversable(r, c)
        })
        .is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannedPath {
    /// Start point, shortcut corners, end point.
    pub waypoints: Vec<Vec2>,
    /// Raw A* cell sequence.
    pub cells: Vec<(i64, i64)>,
    /// A* cost of the cell sequence (m).
    pub cost: f64,
}

impl PlannedPath {
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

/// Cells a start or goal point may be moved to when it sits inside the
/// inflated obstacle margin.
pub const SNAP_RADIUS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, then larger g (deeper), then lower index.
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const MOVES: [(i64, i64); 8] = [
    (0, 1),
    (1, 0),
    (0, -1),
    (-1, 0),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

fn octile(a: (i64, i64), b: (i64, i64)) -> f64 {
    let dr = (a.0 - b.0).abs() as f64;
    let dc = (a.1 - b.1).abs() as f64;
    dr.max(dc) + (std::f64::consts::SQRT_2 - 1.0) * dr.min(dc)
}

/// A* on traversable cells, 8-connected without corner cutting.
pub(crate) fn astar(
    trav: &Traversability,
    start: (i64, i64),
    goal: (i64, i64),
) -> Option<(Vec<(i64, i64)>, f64)> {
    if !trav.is_traversable(start.0, start.1) || !trav.is_traversable(goal.0, goal.1) {
        return None;
    }
    let cols = trav.cols as i64;
    let idx = |(r, c): (i64, i64)| (r * cols + c) as usize;
    let n = trav.rows * trav.cols;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let res = trav.resolution;
    g[idx(start)] = 0.0;
    heap.push(Open {
        f: octile(start, goal) * res,
        g: 0.0,
        idx: idx(start),
    });
    while let Some(Open { g: gc, idx: k, .. }) = heap.pop() {
        if closed[k] {
            continue;
        }
        closed[k] = true;
        let cell = (k as i64 / cols, k as i64 % cols);
        if cell == goal {
            let mut path = vec![cell];
            let mut cur = k;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push((cur as i64 / cols, cur as i64 % cols));
            }
            path.reverse();
            return Some((path, gc));
        }
        for (dr, dc) in MOVES {
            let nb = (cell.0 + dr, cell.1 + dc);
            if !trav.is_traversable(nb.0, nb.1) {
                continue;
            }
            let diagonal = dr != 0 && dc != 0;
            if diagonal
                && !(trav.is_traversable(cell.0 + dr, cell.1)
                    && trav.is_traversable(cell.0, cell.1 + dc))
            {
                continue;
            }
            let step = if diagonal { std::f64::consts::SQRT_2 } else { 1.0 } * res;
            let ng = gc + step;
            let nk = idx(nb);
            if ng < g[nk] {
                g[nk] = ng;
                parent[nk] = k;
                heap.push(Open {
                    f: ng + octile(nb, goal) * res,
                    g: ng,
                    idx: nk,
                });
            }
        }
    }
    None
}

/// Grid path from `from` to `to`. Both ends are snapped to the nearest
/// traversable cell when they fall inside the obstacle margin; the returned
/// waypoints start at `from` and end at the goal cell center when snapped,
/// otherwise at `to`.
pub fn plan_path(
    grid: &OccupancyGrid,
    from: Vec2,
    to: Vec2,
    clearance: usize,
) -> Option<PlannedPath> {
    plan_with(&Traversability::new(grid, clearance), from, to)
}

pub(crate) fn plan_with(trav: &Traversability, from: Vec2, to: Vec2) -> Option<PlannedPath> {
    let start = trav.snap(from, SNAP_RADIUS)?;
    let goal = trav.snap(to, SNAP_RADIUS)?;
    let (cells, cost) = astar(trav, start, goal)?;
    let end = if trav.cell_of(to) == goal {
        to
    } else {
        trav.cell_center(goal.0, goal.1)
    };
    let begin = if trav.cell_of(from) == start {
        from
    } else {
        trav.cell_center(start.0, start.1)
    };
    let mut points = Vec::with_capacity(cells.len() + 2);
    points.push(begin);
    if cells.len() > 2 {
        points.extend(cells[1..cells.len() - 1].iter().map(|&(r, c)| trav.cell_center(r, c)));
    }
    points.push(end);

    let mut waypoints = vec![from];
    if begin != from {
        waypoints.push(begin);
    }
    let mut i = 0;
    while i + 1 < points.len() {
        let mut j = points.len() - 1;
        while j > i + 1 && !trav.segment_clear(points[i], points[j]) {
            j -= 1;
        }
        waypoints.push(points[j]);
        i = j;
    }
    waypoints.dedup();
    Some(PlannedPath {
        waypoints,
        cells,
        cost,
    })
}

/// Traversable cells connected to the robot's cell.
#[derive(Clone, Debug)]
pub struct ReachMap {
    trav: Traversability,
    reached: Vec<bool>,
}

impl ReachMap {
    pub fn new(grid: &OccupancyGrid, from: Vec2, clearance: usize) -> Self {
        Self::from_traversability(Traversability::new(grid, clearance), from)
    }

    pub fn from_traversability(trav: Traversability, from: Vec2) -> Self {
        let mut reached = vec![false; trav.rows * trav.cols];
        let cols = trav.cols as i64;
        if let Some(start) = trav.snap(from, SNAP_RADIUS) {
            let mut queue = VecDeque::from([start]);
            reached[(start.0 * cols + start.1) as usize] = true;
            while let Some((r, c)) = queue.pop_front() {
                for (dr, dc) in MOVES {
                    let (nr, nc) = (r + dr, c + dc);
                    if !trav.is_traversable(nr, nc) {
                        continue;
                    }
                    if dr != 0
                        && dc != 0
                        && !(trav.is_traversable(r + dr, c) && trav.is_traversable(r, c + dc))
                    {
                        continue;
                    }
                    let k = (nr * cols + nc) as usize;
                    if !reached[k] {
                        reached[k] = true;
                        queue.push_back((nr, nc));
                    }
                }
            }
        }
        ReachMap { trav, reached }
    }

    pub fn traversability(&self) -> &Traversability {
        &self.trav
    }

    /// Whether a path from the robot to `p` exists (after snapping).
    pub fn contains(&self, p: Vec2) -> bool {
        self.trav
            .snap(p, SNAP_RADIUS)
            .is_some_and(|(r, c)| self.reached[r as usize * self.trav.cols + c as usize])
    }

    pub fn plan(&self, from: Vec2, to: Vec2) -> Option<PlannedPath> {
        if !self.contains(to) {
            return None;
        }
        plan_with(&self.trav, from, to)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::CellState;

    fn grid_from(rows: &[&str], res: f64) -> OccupancyGrid {
        let mut g = OccupancyGrid::unknown(rows.len(), rows[0].len(), res);
        for (r, row) in rows.iter().enumerate() {
            for (c, ch) in row.chars().enumerate() {
                let s = match ch {
                    '#' => CellState::Occupied,
                    '.' => CellState::Free,
                    _ => CellState::Unknown,
                };
                g.set_state(r as i64, c as i64, s);
            }
        }
        g
    }

    /// Plain Dijkstra with the same move rules, written independently.
    fn dijkstra(rows: &[&str], s: (usize, usize), t: (usize, usize)) -> Option<f64> {
        let h = rows.len();
        let w = rows[0].len();
        let open = |r: i64, c: i64| {
            r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w
                && rows[r as usize].as_bytes()[c as usize] == b'.'
        };
        let mut dist = vec![vec![f64::INFINITY; w]; h];
        let mut done = vec![vec![false; w]; h];
        dist[s.0][s.1] = 0.0;
        loop {
            let mut best = None;
            for r in 0..h {
                for c in 0..w {
                    if !done[r][c]
                        && dist[r][c].is_finite()
                        && best.is_none_or(|(_, _, d)| dist[r][c] < d)
                    {
                        best = Some((r, c, dist[r][c]));
                    }
                }
            }
            let (r, c, d) = best?;
            if (r, c) == t {
                return Some(d);
            }
            done[r][c] = true;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if !open(nr, nc) {
                        continue;
                    }
                    if dr != 0 && dc != 0 && !(open(r as i64 + dr, c as i64) && open(r as i64, c as i64 + dc)) {
                        continue;
                    }
                    let step = if dr != 0 && dc != 0 { 2f64.sqrt() } else { 1.0 };
                    let (nr, nc) = (nr as usize, nc as usize);
                    if d + step < dist[nr][nc] {
                        dist[nr][nc] = d + step;
                    }
                }
            }
        }
    }

    const MAZE: [&str; 11] = [
        "#############",
        "#.....#.....#",
        "#.###.#.###.#",
        "#.#...#...#.#",
        "#.#.#####.#.#",
        "#...#...#...#",
        "###.#.#.#.###",
        "#...#.#.....#",
        "#.###.#####.#",
        "#.....#.....#",
        "#############",
    ];

    #[test]
    fn maze_cost_matches_dijkstra() {
        let g = grid_from(&MAZE, 1.0);
        let trav = Traversability::new(&g, 0);
        let pairs = [((1, 1), (9, 11)), ((1, 1), (1, 11)), ((5, 5), (9, 1)), ((3, 3), (7, 11))];
        for (s, t) in pairs {
            let (_, cost) = astar(&trav, (s.0 as i64, s.1 as i64), (t.0 as i64, t.1 as i64)).unwrap();
            let oracle = dijkstra(&MAZE, s, t).unwrap();
            assert!((cost - oracle).abs() < 1e-9, "{s:?}->{t:?}: {cost} vs {oracle}");
        }
    }

    #[test]
    fn straight_corridor_is_two_waypoints() {
        let rows = ["############", "#..........#", "#..........#", "#..........#", "############"];
        let g = grid_from(&rows, 0.5);
        let from = Vec2::new(1.25, 1.25);
        let to = Vec2::new(4.75, 1.25);
        let p = plan_path(&g, from, to, 1).unwrap();
        assert_eq!(p.waypoints.len(), 2);
        assert!((p.length() - from.distance(to)).abs() <= 0.5);
    }

    #[test]
    fn same_cell_path_is_direct() {
        let g = grid_from(&MAZE, 1.0);
        let p = plan_path(&g, Vec2::new(1.2, 1.2), Vec2::new(1.8, 1.7), 0).unwrap();
        assert_eq!(p.waypoints, vec![Vec2::new(1.2, 1.2), Vec2::new(1.8, 1.7)]);
    }

    #[test]
    fn walled_off_goal_is_unreachable() {
        let rows = ["#########", "#...#...#", "#...#...#", "#...#...#", "#########"];
        let g = grid_from(&rows, 1.0);
        assert!(plan_path(&g, Vec2::new(1.5, 2.5), Vec2::new(6.5, 2.5), 0).is_none());
        let reach = ReachMap::new(&g, Vec2::new(1.5, 2.5), 0);
        assert!(!reach.contains(Vec2::new(6.5, 2.5)));
        assert!(reach.contains(Vec2::new(3.5, 1.5)));
    }

    #[test]
    fn shortcut_waypoints_stay_clear() {
        let g = grid_from(&MAZE, 1.0);
        let trav = Traversability::new(&g, 0);
        let p = plan_with(&trav, Vec2::new(1.5, 1.5), Vec2::new(11.5, 9.5)).unwrap();
        assert_eq!(p.waypoints[0], Vec2::new(1.5, 1.5));
        assert_eq!(*p.waypoints.last().unwrap(), Vec2::new(11.5, 9.5));
        for w in p.waypoints.windows(2) {
            assert!(trav.segment_clear(w[0], w[1]));
        }
        assert!(p.length() <= p.cost + 1e-9);
    }

    #[test]
    fn no_corner_cutting() {
        let rows = ["####", "#.##", "##.#", "####"];
        let g = grid_from(&rows, 1.0);
        assert!(plan_path(&g, Vec2::new(1.5, 1.5), Vec2::new(2.5, 2.5), 0).is_none());
    }
}
