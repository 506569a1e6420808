use crate::geometry::Vec2;

/// Log-odds added when a ray terminates in a cell.
pub const LOG_ODDS_HIT: f64 = 0.85;
/// Log-odds added when a ray passes through a cell.
pub const LOG_ODDS_FREE: f64 = -0.85;
pub const LOG_ODDS_CLAMP: f64 = 4.0;

const P_OCCUPIED: f64 = 0.65;
const P_FREE: f64 = 0.35;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellState {
    Occupied,
    Free,
    Unknown,
}

/// Online occupancy map built from range scans.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub rows: usize,
    pub cols: usize,
    pub resolution: f64,
    log_odds: Vec<f64>,
}

impl OccupancyGrid {
    pub fn unknown(rows: usize, cols: usize, resolution: f64) -> Self {
        OccupancyGrid {
            rows,
            cols,
            resolution,
            log_odds: vec![0.0; rows * cols],
        }
    }

    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    fn idx(&self, row: i64, col: i64) -> usize {
        row as usize * self.cols + col as usize
    }

    pub fn cell_of(&self, p: Vec2) -> (i64, i64) {
        (
            (p.y / self.resolution).floor() as i64,
            (p.x / self.resolution).floor() as i64,
        )
    }

    pub fn cell_center(&self, row: i64, col: i64) -> Vec2 {
        Vec2::new(
            (col as f64 + 0.5) * self.resolution,
            (row as f64 + 0.5) * self.resolution,
        )
    }

    /// Occupancy probability; out-of-bounds cells are 0.5.
    pub fn probability(&self, row: i64, col: i64) -> f64 {
        if !self.in_bounds(row, col) {
            return 0.5;
        }
        let l = self.log_odds[self.idx(row, col)];
        1.0 / (1.0 + (-l).exp())
    }

    pub fn log_odds(&self, row: i64, col: i64) -> f64 {
        self.log_odds[self.idx(row, col)]
    }

    /// Out-of-bounds cells are reported unknown.
    pub fn state(&self, row: i64, col: i64) -> CellState {
        let p = self.probability(row, col);
        if p > P_OCCUPIED {
            CellState::Occupied
        } else if p < P_FREE {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }

    pub fn is_free(&self, row: i64, col: i64) -> bool {
        self.state(row, col) == CellState::Free
    }

    pub fn is_unknown(&self, row: i64, col: i64) -> bool {
        self.state(row, col) == CellState::Unknown
    }

    pub fn is_occupied(&self, row: i64, col: i64) -> bool {
        self.state(row, col) == CellState::Occupied
    }

    pub(crate) fn update(&mut self, row: i64, col: i64, delta: f64) {
        if self.in_bounds(row, col) {
            let i = self.idx(row, col);
            self.log_odds[i] = (self.log_odds[i] + delta).clamp(-LOG_ODDS_CLAMP, LOG_ODDS_CLAMP);
        }
    }

    pub fn count(&self, state: CellState) -> usize {
        (0..self.rows as i64)
            .flat_map(|r| (0..self.cols as i64).map(move |c| (r, c)))
            .filter(|&(r, c)| self.state(r, c) == state)
            .count()
    }

    /// Mark a cell with an explicit state; for fixtures and tests.
    pub fn set_state(&mut self, row: i64, col: i64, state: CellState) {
        if self.in_bounds(row, col) {
            let i = self.idx(row, col);
            self.log_odds[i] = match state {
                CellState::Occupied => LOG_ODDS_CLAMP,
                CellState::Free => -LOG_ODDS_CLAMP,
                CellState::Unknown => 0.0,
            };
        }
    }
}
