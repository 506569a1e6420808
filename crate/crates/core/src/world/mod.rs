//! Ground-truth 2D world: walls, signage, robot kinematics and sensors.

mod camera;
mod grid;
mod robot;
mod sensing;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use camera::{observe_signage, CameraParams, Detection2D, NoiseModel, SIGN_WIDTH};
pub use grid::{CellState, OccupancyGrid, LOG_ODDS_CLAMP, LOG_ODDS_FREE, LOG_ODDS_HIT};
pub use robot::{advance, turn_to, Pose, RobotState};
pub use sensing::{integrate_scan, line_of_sight, raycast_scan, traverse_cells, ScanRay};

use crate::geometry::Vec2;
use crate::venue_map::VenueMap;
use crate::{Error, Result};

/// Sign faces span this height band (m) above the floor.
pub const SIGN_Z_RANGE: (f64, f64) = (1.5, 2.5);

#[derive(Clone, Debug, PartialEq)]
pub struct SignageSpec {
    pub anchor: Vec2,
    /// Unit normal pointing away from the wall, toward readers.
    pub facing: Vec2,
    pub label: String,
    pub is_distractor: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldSpec {
    pub resolution: f64,
    pub rows: usize,
    pub cols: usize,
    walls: Vec<bool>,
    pub signage: Vec<SignageSpec>,
    pub robot_start: Pose,
    pub rng_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct WorldDoc {
    resolution: f64,
    grid: Vec<String>,
    #[serde(default)]
    signage: Vec<SignDoc>,
    start: Pose,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct SignDoc {
    x: f64,
    y: f64,
    nx: f64,
    ny: f64,
    label: String,
    #[serde(default)]
    distractor: bool,
}

impl WorldSpec {
    /// Build from rows of `#` (wall) and `.` (free). Row 0 spans
    /// `y in [0, resolution)`; column 0 spans `x in [0, resolution)`.
    pub fn from_rows(
        resolution: f64,
        rows: &[impl AsRef<str>],
        signage: Vec<SignageSpec>,
        robot_start: Pose,
        rng_seed: u64,
    ) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::validation("world", "resolution must be positive"));
        }
        let cols = rows.first().map_or(0, |r| r.as_ref().chars().count());
        if rows.is_empty() || cols == 0 {
            return Err(Error::validation("world", "grid is empty"));
        }
        let mut walls = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.chars().count() != cols {
                return Err(Error::validation(
                    "world",
                    format!("grid row {i} has {} cells, expected {cols}", row.chars().count()),
                ));
            }
            for (j, ch) in row.chars().enumerate() {
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    other => {
                        return Err(Error::validation(
                            "world",
                            format!("unexpected cell {other:?} at row {i}, column {j}"),
                        ))
                    }
                }
            }
        }
        let world = WorldSpec {
            resolution,
            rows: rows.len(),
            cols,
            walls,
            signage,
            robot_start,
            rng_seed,
        };
        world.validate()?;
        Ok(world)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WorldDoc = serde_json::from_str(text).map_err(|e| Error::parse("world", e))?;
        let signage = doc
            .signage
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let facing = Vec2::new(s.nx, s.ny).normalized().ok_or_else(|| {
                    Error::validation("world", format!("sign {i} has a zero facing vector"))
                })?;
                Ok(SignageSpec {
                    anchor: Vec2::new(s.x, s.y),
                    facing,
                    label: s.label,
                    is_distractor: s.distractor,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        WorldSpec::from_rows(doc.resolution, &doc.grid, signage, doc.start, doc.seed)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        WorldSpec::from_json(&text).map_err(|e| match e {
            Error::Parse { source, .. } => Error::parse(path.display().to_string(), source),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let grid = (0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .map(|c| if self.is_wall(r as i64, c as i64) { '#' } else { '.' })
                    .collect()
            })
            .collect();
        let doc = WorldDoc {
            resolution: self.resolution,
            grid,
            signage: self
                .signage
                .iter()
                .map(|s| SignDoc {
                    x: s.anchor.x,
                    y: s.anchor.y,
                    nx: s.facing.x,
                    ny: s.facing.y,
                    label: s.label.clone(),
                    distractor: s.is_distractor,
                })
                .collect(),
            start: self.robot_start,
            seed: self.rng_seed,
        };
        serde_json::to_string(&doc).expect("world serializes")
    }

    fn validate(&self) -> Result<()> {
        let start = self.robot_start.position();
        if !self.is_free_point(start) {
            return Err(Error::RobotInWall {
                x: start.x,
                y: start.y,
            });
        }
        for (i, s) in self.signage.iter().enumerate() {
            if !s.anchor.is_finite() || (s.facing.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::validation(
                    "world",
                    format!("sign {i} has an invalid anchor or facing"),
                ));
            }
            let (r, c) = self.cell_of(s.anchor);
            let near_wall = (-1..=1).any(|dr| (-1..=1).any(|dc| self.is_wall(r + dr, c + dc)));
            if !near_wall {
                return Err(Error::validation(
                    "world",
                    format!("sign {i} ({:?}) is not on or next to a wall", s.label),
                ));
            }
        }
        Ok(())
    }

    /// Every non-distractor label must name a venue-map landmark.
    pub fn check_labels(&self, vm: &VenueMap) -> Result<()> {
        for s in self.signage.iter().filter(|s| !s.is_distractor) {
            if vm.index_of(&s.label).is_none() {
                return Err(Error::validation(
                    "world",
                    format!("sign label {:?} is not in the venue map", s.label),
                ));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.resolution
    }

    pub fn height(&self) -> f64 {
        self.rows as f64 * self.resolution
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

    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    /// Out-of-bounds cells count as walls.
    pub fn is_wall(&self, row: i64, col: i64) -> bool {
        !self.in_bounds(row, col) || self.walls[row as usize * self.cols + col as usize]
    }

    pub fn is_free_point(&self, p: Vec2) -> bool {
        let (r, c) = self.cell_of(p);
        p.is_finite() && !self.is_wall(r, c)
    }

    pub fn with_start(mut self, start: Pose) -> Result<Self> {
        self.robot_start = start;
        self.validate()?;
        Ok(self)
    }

    /// Free cells reachable from the start by 4-connected moves.
    pub fn reachable_free_cells(&self) -> Vec<(usize, usize)> {
        let (r0, c0) = self.cell_of(self.robot_start.position());
        let mut seen = vec![false; self.rows * self.cols];
        let mut stack = vec![(r0, c0)];
        let mut out = Vec::new();
        seen[r0 as usize * self.cols + c0 as usize] = true;
        while let Some((r, c)) = stack.pop() {
            out.push((r as usize, c as usize));
            for (dr, dc) in [(0, 1), (1, 0), (0, -1), (-1, 0)] {
                let (nr, nc) = (r + dr, c + dc);
                if self.is_wall(nr, nc) {
                    continue;
                }
                let k = nr as usize * self.cols + nc as usize;
                if !seen[k] {
                    seen[k] = true;
                    stack.push((nr, nc));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Closed rectangular room with a one-cell wall border.
    pub fn room(rows: usize, cols: usize, res: f64) -> WorldSpec {
        let grid: Vec<String> = (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| {
                        if r == 0 || c == 0 || r == rows - 1 || c == cols - 1 {
                            '#'
                        } else {
                            '.'
                        }
                    })
                    .collect()
            })
            .collect();
        let start = Pose {
            x: cols as f64 * res / 2.0,
            y: rows as f64 * res / 2.0,
            theta: 0.0,
        };
        WorldSpec::from_rows(res, &grid, vec![], start, 1).unwrap()
    }
}
