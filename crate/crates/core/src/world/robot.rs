use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    /// Simulated seconds since the run started.
    pub clock: f64,
}

impl RobotState {
    pub fn new(pose: Pose) -> Self {
        RobotState { pose, clock: 0.0 }
    }
}

/// Rotate in place to `heading`, charging `|delta| / v_angular` seconds.
pub fn turn_to(robot: &RobotState, heading: f64, v_angular: f64) -> RobotState {
    let delta = wrap_angle(heading - robot.pose.theta).abs();
    RobotState {
        pose: Pose {
            theta: wrap_angle(heading),
            ..robot.pose
        },
        clock: robot.clock + delta / v_angular,
    }
}

/// Drive along `path`, turning toward each waypoint before driving to it.
/// Zero-length segments cost nothing and keep the heading.
pub fn advance(robot: &RobotState, path: &[Vec2], v_linear: f64, v_angular: f64) -> RobotState {
    let mut state = *robot;
    for &wp in path {
        let seg = wp - state.pose.position();
        let len = seg.norm();
        if len <= 1e-12 {
            continue;
        }
        state = turn_to(&state, seg.angle(), v_angular);
        state.pose.x = wp.x;
        state.pose.y = wp.y;
        state.clock += len / v_linear;
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at_origin() -> RobotState {
        RobotState::new(Pose {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        })
    }

    #[test]
    fn straight_eight_meters_takes_ten_seconds() {
        let r = advance(&at_origin(), &[Vec2::new(8.0, 0.0)], 0.8, 0.1);
        assert!((r.clock - 10.0).abs() < 1e-12);
        assert_eq!(r.pose.position(), Vec2::new(8.0, 0.0));
    }

    #[test]
    fn half_radian_turn_takes_five_seconds() {
        let r = turn_to(&at_origin(), 0.5, 0.1);
        assert!((r.clock - 5.0).abs() < 1e-12);
    }

    #[test]
    fn empty_path_is_noop() {
        assert_eq!(advance(&at_origin(), &[], 0.8, 0.1), at_origin());
    }

    #[test]
    fn clock_is_additive_over_concatenated_paths() {
        let a = [Vec2::new(3.0, 0.0), Vec2::new(3.0, 4.0)];
        let b = [Vec2::new(0.0, 4.0), Vec2::new(1.0, 1.0)];
        let whole: Vec<_> = a.iter().chain(&b).copied().collect();
        let joined = advance(&at_origin(), &whole, 0.8, 0.1);
        let split = advance(&advance(&at_origin(), &a, 0.8, 0.1), &b, 0.8, 0.1);
        assert!((joined.clock - split.clock).abs() < 1e-9);
        assert_eq!(joined.pose, split.pose);
    }
}
