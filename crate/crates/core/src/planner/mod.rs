//! Exploration/exploitation planning: frontier and viewpoint candidates,
//! their utilities, next-best-pose selection, grid path planning and the
//! full exploration loop.

mod explore;
mod frontier;
mod path;
mod utility;
mod viewpoint;

use serde::{Deserialize, Serialize};

pub use explore::{
    explore, Budgets, Event, EventData, ExploreConfig, ExploreOutcome, LidarParams, Mode,
    MotionParams, PerceptionParams, Termination, TrajectoryLog,
};
pub use frontier::{detect_frontiers, information_gain, Frontier};
pub use path::{plan_path, PlannedPath, ReachMap, Traversability};
pub use utility::{
    directional_heuristic, frontier_utility, hysteresis_gain, select_next_pose, viewpoint_utility,
    Candidate, CandidateKind,
};
pub use viewpoint::{face_normal, generate_viewpoint, Viewpoint};

/// Utility weights and candidate-generation knobs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Navigation-cost weight.
    pub eta: f64,
    /// Directional-heuristic weight.
    pub lambda_h: f64,
    pub mu_gain: f64,
    pub mu_radius: f64,
    /// Exploration/exploitation balance for viewpoints.
    pub beta: f64,
    /// Camera horizontal field of view (rad) used for information gain.
    pub fov: f64,
    /// Range (m) of the information-gain wedge.
    pub gain_range: f64,
    /// Stand-off distance (m) of a viewpoint from its sign.
    pub view_dist: f64,
    /// Recompute the path to the current target every this many perception
    /// steps; 0 disables periodic replanning.
    pub replan_period: usize,
    /// Subtract `eta * d` from frontier utility before the heuristic is
    /// available as well.
    pub initial_distance_cost: bool,
    /// Use the venue-map directional heuristic once a transform exists.
    pub use_heuristic: bool,
    /// Generate viewpoint candidates near detected signs.
    pub use_viewpoints: bool,
    /// Retire a viewpoint once its instance scores above this.
    pub retire_score: f64,
    /// Smallest frontier cluster (cells) kept as a candidate.
    pub min_cluster: usize,
    /// Obstacle inflation (cells) for path planning.
    pub clearance: usize,
    /// Frontiers this close (m) to a visited target count as visited.
    pub visited_radius: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            eta: 0.1,
            lambda_h: 5.0,
            mu_gain: 5.0,
            mu_radius: 10.0,
            beta: 9.0,
            fov: 70.5f64.to_radians(),
            gain_range: 10.0,
            view_dist: 2.0,
            replan_period: 10,
            initial_distance_cost: true,
            use_heuristic: true,
            use_viewpoints: true,
            retire_score: 0.9,
            min_cluster: 3,
            clearance: 1,
            visited_radius: 1.5,
        }
    }
}

impl PlannerConfig {
    /// Frontier-only configuration: no viewpoints, no heuristic, `beta = 0`.
    pub fn baseline(mut self) -> Self {
        self.beta = 0.0;
        self.use_heuristic = false;
        self.use_viewpoints = false;
        self
    }
}
