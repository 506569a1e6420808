use serde::{Deserialize, Serialize};

use super::frontier::{information_gain, Frontier};
use super::viewpoint::Viewpoint;
use super::PlannerConfig;
use crate::geometry::Vec2;
use crate::world::OccupancyGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    Frontier,
    Viewpoint,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub kind: CandidateKind,
    /// Index into the frontier or viewpoint list.
    pub index: usize,
    pub utility: f64,
}

/// Cosine between the robot-to-frontier and robot-to-goal directions;
/// 0 when either vector has zero length.
pub fn directional_heuristic(p_t: Vec2, f_i: Vec2, goal_world: Vec2) -> f64 {
    let a = p_t - f_i;
    let b = p_t - goal_world;
    let denom = a.norm() * b.norm();
    if denom <= 0.0 {
        return 0.0;
    }
    (a.dot(b) / denom).clamp(-1.0, 1.0)
}

/// `mu_gain` for frontiers within `mu_radius` (inclusive), else 1.
pub fn hysteresis_gain(p_t: Vec2, f_i: Vec2, mu_gain: f64, mu_radius: f64) -> f64 {
    if f_i.distance(p_t) <= mu_radius {
        mu_gain
    } else {
        1.0
    }
}

/// Frontier utility. Without a goal the frontier is scored by information
/// gain; with one, by `lambda * mu * h - eta * d`.
pub fn frontier_utility(
    p_t: Vec2,
    f: &Frontier,
    goal_world: Option<Vec2>,
    cfg: &PlannerConfig,
    grid: &OccupancyGrid,
) -> f64 {
    let d = p_t.distance(f.position);
    match goal_world {
        None => {
            let gain = information_gain(grid, p_t, f, cfg.fov, cfg.gain_range) as f64;
            if cfg.initial_distance_cost {
                gain - cfg.eta * d
            } else {
                gain
            }
        }
        Some(goal) => {
            let mu = hysteresis_gain(p_t, f.position, cfg.mu_gain, cfg.mu_radius);
            cfg.lambda_h * mu * directional_heuristic(p_t, f.position, goal) - cfg.eta * d
        }
    }
}

pub fn viewpoint_utility(p_t: Vec2, v: &Viewpoint, cfg: &PlannerConfig) -> f64 {
    cfg.beta * v.score - cfg.eta * v.position.distance(p_t)
}

/// Arg-max utility over unvisited, reachable candidates. Ties go to
/// frontiers before viewpoints, then to the lower index.
pub fn select_next_pose(
    p_t: Vec2,
    frontiers: &[Frontier],
    viewpoints: &[Viewpoint],
    goal_world: Option<Vec2>,
    cfg: &PlannerConfig,
    grid: &OccupancyGrid,
    reachable: impl Fn(Vec2) -> bool,
) -> Option<Candidate> {
    let fs = frontiers
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.visited && reachable(f.position))
        .map(|(i, f)| Candidate {
            kind: CandidateKind::Frontier,
            index: i,
            utility: frontier_utility(p_t, f, goal_world, cfg, grid),
        });
    let vs = viewpoints
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.visited && reachable(v.position))
        .map(|(i, v)| Candidate {
            kind: CandidateKind::Viewpoint,
            index: i,
            utility: viewpoint_utility(p_t, v, cfg),
        });
    fs.chain(vs).fold(None, |best: Option<Candidate>, c| match best {
        Some(b) if b.utility >= c.utility => Some(b),
        _ => Some(c),
    })
}
