use std::f64::consts::TAU;

use super::grid::{OccupancyGrid, LOG_ODDS_FREE, LOG_ODDS_HIT};
use super::robot::RobotState;
use super::WorldSpec;
use crate::geometry::Vec2;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRay {
    /// Absolute ray angle (rad).
    pub angle: f64,
    /// Distance to the first wall, or the maximum range on a miss.
    pub range: f64,
    /// Wall cell that stopped the ray.
    pub hit_cell: Option<(i64, i64)>,
}

impl ScanRay {
    pub fn is_hit(&self) -> bool {
        self.hit_cell.is_some()
    }
}

/// Walk the grid cells crossed by the ray `origin + t * dir`, `t <= max_t`,
/// calling `visit(row, col, t_enter)` in order until it returns `true`.
/// When the ray passes exactly through a cell corner both side cells are
/// visited, so a visitor looking for walls is conservative.
///
/// Returns the `t_enter` of the cell that stopped the walk.
pub fn traverse_cells(
    origin: Vec2,
    dir: Vec2,
    max_t: f64,
    resolution: f64,
    mut visit: impl FnMut(i64, i64, f64) -> bool,
) -> Option<f64> {
    let mut col = (origin.x / resolution).floor() as i64;
    let mut row = (origin.y / resolution).floor() as i64;
    if visit(row, col, 0.0) {
        return Some(0.0);
    }
    let axis = |p: f64, d: f64, cell: i64| -> (i64, f64, f64) {
        if d > 0.0 {
            (1, ((cell + 1) as f64 * resolution - p) / d, resolution / d)
        } else if d < 0.0 {
            (-1, (cell as f64 * resolution - p) / d, -resolution / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_c, mut t_max_c, delta_c) = axis(origin.x, dir.x, col);
    let (step_r, mut t_max_r, delta_r) = axis(origin.y, dir.y, row);
    loop {
        let t = t_max_c.min(t_max_r);
        if t > max_t {
            return None;
        }
        if t_max_c < t_max_r {
            col += step_c;
            t_max_c += delta_c;
        } else if t_max_r < t_max_c {
            row += step_r;
            t_max_r += delta_r;
        } else {
            if visit(row, col + step_c, t) || visit(row + step_r, col, t) {
                return Some(t);
            }
            col += step_c;
            row += step_r;
            t_max_c += delta_c;
            t_max_r += delta_r;
        }
        if visit(row, col, t) {
            return Some(t);
        }
    }
}

/// Whether the segment `a -> b` crosses no wall cell of the ground truth.
pub fn line_of_sight(world: &WorldSpec, a: Vec2, b: Vec2) -> bool {
    let d = b - a;
    let len = d.norm();
    let Some(dir) = d.normalized() else {
        let (r, c) = world.cell_of(a);
        return !world.is_wall(r, c);
    };
    traverse_cells(a, dir, len, world.resolution, |r, c, _| world.is_wall(r, c)).is_none()
}

/// Noise-free 360 degree range scan against ground-truth walls. Ray `i` is
/// cast at `heading + i * 2pi / n_rays`.
pub fn raycast_scan(
    world: &WorldSpec,
    robot: &RobotState,
    n_rays: usize,
    max_range: f64,
) -> Result<Vec<ScanRay>> {
    let origin = robot.pose.position();
    if !world.is_free_point(origin) {
        return Err(Error::RobotInWall {
            x: origin.x,
            y: origin.y,
        });
    }
    let n = n_rays.max(1);
    Ok((0..n)
        .map(|i| {
            let angle = robot.pose.theta + TAU * i as f64 / n as f64;
            let dir = Vec2::from_angle(angle);
            let mut hit_cell = None;
            let t = traverse_cells(origin, dir, max_range, world.resolution, |r, c, _| {
                let wall = world.is_wall(r, c);
                if wall {
                    hit_cell = Some((r, c));
                }
                wall
            });
            match t {
                Some(t) => ScanRay {
                    angle,
                    range: t,
                    hit_cell,
                },
                None => ScanRay {
                    angle,
                    range: max_range,
                    hit_cell: None,
                },
            }
        })
        .collect())
}

/// Mark cells crossed by each ray free and each hit cell occupied.
pub fn integrate_scan(grid: &mut OccupancyGrid, robot: &RobotState, scan: &[ScanRay]) {
    let origin = robot.pose.position();
    let res = grid.resolution;
    for ray in scan {
        let dir = Vec2::from_angle(ray.angle);
        // Cells first entered strictly before the hit are free.
        let limit = ray.range - 1e-9;
        let mut free = Vec::new();
        traverse_cells(origin, dir, ray.range, res, |r, c, t| {
            if t < limit && Some((r, c)) != ray.hit_cell {
                free.push((r, c));
            }
            false
        });
        for (r, c) in free {
            grid.update(r, c, LOG_ODDS_FREE);
        }
        if let Some((r, c)) = ray.hit_cell {
            grid.update(r, c, LOG_ODDS_HIT);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::room;
    use super::super::{CellState, Pose};
    use super::*;

    fn robot_at(x: f64, y: f64, theta: f64) -> RobotState {
        RobotState {
            pose: Pose { x, y, theta },
            clock: 0.0,
        }
    }

    /// Dense point-sampling line-of-sight, independent of the DDA walk.
    fn sampled_los(world: &WorldSpec, a: Vec2, b: Vec2) -> bool {
        let steps = ((b - a).norm() / (world.resolution / 64.0)).ceil() as usize + 1;
        (0..=steps).all(|k| {
            let p = a + (b - a) * (k as f64 / steps as f64);
            let (r, c) = world.cell_of(p);
            !world.is_wall(r, c)
        })
    }

    #[test]
    fn empty_world_all_rays_miss() {
        let w = room(60, 60, 0.5);
        let scan = raycast_scan(&w, &robot_at(15.0, 15.0, 0.3), 90, 10.0).unwrap();
        assert!(scan.iter().all(|r| !r.is_hit() && r.range == 10.0));
    }

    #[test]
    fn wall_three_meters_ahead() {
        // Room interior spans x in [1, 19); wall column starts at x = 19.
        let w = room(20, 20, 1.0);
        let scan = raycast_scan(&w, &robot_at(16.0, 10.5, 0.0), 4, 10.0).unwrap();
        assert!((scan[0].range - 3.0).abs() <= w.resolution);
        assert_eq!(scan[0].hit_cell, Some((10, 19)));
    }

    #[test]
    fn robot_inside_wall_errors() {
        let w = room(10, 10, 1.0);
        assert!(raycast_scan(&w, &robot_at(0.5, 0.5, 0.0), 8, 5.0).is_err());
    }

    #[test]
    fn corner_configuration_matches_sampled_oracle() {
        let grid = [
            "##########",
            "#........#",
            "#........#",
            "#...##...#",
            "#...##...#",
            "#........#",
            "#........#",
            "##########",
        ];
        let w = WorldSpec::from_rows(1.0, &grid, vec![], Pose { x: 1.5, y: 1.5, theta: 0.0 }, 0)
            .unwrap();
        let robot = robot_at(2.3, 2.2, 0.0);
        let scan = raycast_scan(&w, &robot, 720, 20.0).unwrap();
        for ray in &scan {
            let origin = robot.pose.position();
            let dir = Vec2::from_angle(ray.angle);
            // Slightly short of the hit is visible, slightly past is not.
            assert!(sampled_los(&w, origin, origin + dir * (ray.range - 1e-6)));
            let (r, c) = ray.hit_cell.unwrap();
            assert!(w.is_wall(r, c));
        }
    }

    #[test]
    fn single_ray_marks_free_then_occupied() {
        let w = room(20, 20, 1.0);
        let robot = robot_at(16.5, 10.5, 0.0);
        let scan = raycast_scan(&w, &robot, 1, 10.0).unwrap();
        let mut g = OccupancyGrid::unknown(20, 20, 1.0);
        integrate_scan(&mut g, &robot, &scan);
        for c in 16..19 {
            assert_eq!(g.state(10, c), CellState::Free, "col {c}");
        }
        assert_eq!(g.state(10, 19), CellState::Occupied);
        assert_eq!(g.state(11, 17), CellState::Unknown);
    }

    #[test]
    fn repeated_scans_saturate() {
        let w = room(20, 20, 1.0);
        let robot = robot_at(10.5, 10.5, 0.0);
        let scan = raycast_scan(&w, &robot, 360, 30.0).unwrap();
        let mut g = OccupancyGrid::unknown(20, 20, 1.0);
        for _ in 0..10 {
            integrate_scan(&mut g, &robot, &scan);
        }
        let saturated = g.clone();
        integrate_scan(&mut g, &robot, &scan);
        assert_eq!(g, saturated);
    }

    #[test]
    fn closed_room_scan_knows_every_reachable_cell() {
        let w = room(16, 24, 0.5);
        let robot = robot_at(6.0, 4.0, 0.0);
        let scan = raycast_scan(&w, &robot, 720, 50.0).unwrap();
        let mut g = OccupancyGrid::unknown(w.rows, w.cols, w.resolution);
        integrate_scan(&mut g, &robot, &scan);
        for (r, c) in w.reachable_free_cells() {
            assert_eq!(g.state(r as i64, c as i64), CellState::Free, "({r},{c})");
        }
    }
}
