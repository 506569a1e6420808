use serde::{Deserialize, Serialize};

use super::robot::RobotState;
use super::sensing::line_of_sight;
use super::{WorldSpec, SIGN_Z_RANGE};
use crate::geometry::{wrap_angle, Vec2};
use crate::perception::FeatureOracle;

/// Width (m) of every simulated sign face.
pub const SIGN_WIDTH: f64 = 1.2;

/// Feature noise `sigma0 + sigma_d * dist/range + sigma_theta * obliq/obliq_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub sigma0: f64,
    pub sigma_d: f64,
    pub sigma_theta: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma0: 0.1,
            sigma_d: 0.5,
            sigma_theta: 0.5,
        }
    }
}

impl NoiseModel {
    pub fn sigma(&self, dist: f64, obliquity: f64, cam: &CameraParams) -> f64 {
        self.sigma0
            + self.sigma_d * (dist / cam.max_range)
            + self.sigma_theta * (obliquity / cam.max_obliquity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraParams {
    /// Horizontal field of view (rad).
    pub fov: f64,
    pub max_range: f64,
    /// Largest angle (rad) between the sign normal and the sign-to-camera ray.
    pub max_obliquity: f64,
    pub noise: NoiseModel,
}

impl Default for CameraParams {
    fn default() -> Self {
        CameraParams {
            fov: 70.5f64.to_radians(),
            max_range: 10.0,
            max_obliquity: 75f64.to_radians(),
            noise: NoiseModel::default(),
        }
    }
}

/// A detected sign, already lifted to 3D surface points.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection2D {
    pub signage_id: usize,
    pub surface_points: Vec<[f64; 3]>,
    /// Unit-norm noisy feature.
    pub feature: Vec<f64>,
    pub view_distance: f64,
    pub view_obliquity: f64,
    /// Camera position when the detection was made.
    pub viewer: Vec2,
}

impl Detection2D {
    pub fn centroid(&self) -> [f64; 3] {
        let n = self.surface_points.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.surface_points {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        c.map(|v| v / n)
    }
}

/// Point on the free side of a sign used for occlusion checks.
pub(crate) fn sight_target(world: &WorldSpec, anchor: Vec2, facing: Vec2) -> Vec2 {
    anchor + facing * (0.25 * world.resolution)
}

fn surface_points(anchor: Vec2, facing: Vec2) -> Vec<[f64; 3]> {
    let tangent = Vec2::new(-facing.y, facing.x);
    let (z0, z1) = SIGN_Z_RANGE;
    let mut pts = Vec::with_capacity(9);
    for u in [-0.5, 0.0, 0.5] {
        for z in [z0, 0.5 * (z0 + z1), z1] {
            let p = anchor + tangent * (u * SIGN_WIDTH);
            pts.push([p.x, p.y, z]);
        }
    }
    pts
}

/// Simulated text spotter: detect every sign that is in range, inside the
/// horizontal FOV, unoccluded and not viewed too obliquely.
pub fn observe_signage(
    world: &WorldSpec,
    robot: &RobotState,
    oracle: &FeatureOracle,
    cam: &CameraParams,
    rng: &mut impl rand::Rng,
) -> Vec<Detection2D> {
    let eye = robot.pose.position();
    let mut out = Vec::new();
    for (id, sign) in world.signage.iter().enumerate() {
        let to_sign = sign.anchor - eye;
        let dist = to_sign.norm();
        if dist > cam.max_range || dist < 1e-9 {
            continue;
        }
        if wrap_angle(to_sign.angle() - robot.pose.theta).abs() > cam.fov / 2.0 {
            continue;
        }
        let back = -to_sign / dist;
        let obliquity = back.dot(sign.facing).clamp(-1.0, 1.0).acos();
        if obliquity > cam.max_obliquity {
            continue;
        }
        if !line_of_sight(world, eye, sight_target(world, sign.anchor, sign.facing)) {
            continue;
        }
        let Some(gt) = oracle.ground_truth(&sign.label, sign.is_distractor) else {
            continue;
        };
        let sigma = cam.noise.sigma(dist, obliquity, cam);
        out.push(Detection2D {
            signage_id: id,
            surface_points: surface_points(sign.anchor, sign.facing),
            feature: oracle.perturb(gt, sigma, rng),
            view_distance: dist,
            view_obliquity: obliquity,
            viewer: eye,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{Pose, SignageSpec};
    use super::*;
    use crate::perception::OracleParams;
    use crate::venue_map::{Landmark, VenueMap};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// 20 x 20 m room; optional interior wall; one sign on the east wall
    /// facing west at (19, 10).
    fn world_with_sign(interior_wall: bool, facing: Vec2) -> WorldSpec {
        let grid: Vec<String> = (0..20)
            .map(|r| {
                (0..20)
                    .map(|c| {
                        let border = r == 0 || c == 0 || r == 19 || c == 19;
                        let inner = interior_wall && c == 17 && (8..=12).contains(&r);
                        if border || inner {
                            '#'
                        } else {
                            '.'
                        }
                    })
                    .collect()
            })
            .collect();
        let sign = SignageSpec {
            anchor: Vec2::new(19.0, 10.0),
            facing,
            label: "Muji".into(),
            is_distractor: false,
        };
        let start = Pose {
            x: 10.5,
            y: 10.5,
            theta: 0.0,
        };
        WorldSpec::from_rows(1.0, &grid, vec![sign], start, 0).unwrap()
    }

    fn oracle() -> FeatureOracle {
        let vm = VenueMap::new(
            vec![Landmark {
                name: "Muji".into(),
                map_pos: Vec2::ZERO,
            }],
            "px",
        )
        .unwrap();
        FeatureOracle::new::<&str>(&vm, &[], OracleParams::default()).unwrap()
    }

    fn robot(x: f64, y: f64, theta: f64) -> RobotState {
        RobotState::new(Pose { x, y, theta })
    }

    #[test]
    fn sign_ahead_is_detected() {
        let w = world_with_sign(false, Vec2::new(-1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dets = observe_signage(&w, &robot(17.0, 10.0, 0.0), &oracle(), &CameraParams::default(), &mut rng);
        assert_eq!(dets.len(), 1);
        let d = &dets[0];
        assert!((d.view_distance - 2.0).abs() < 1e-12);
        let n: f64 = d.feature.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
        assert!((d.centroid()[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sign_behind_wall_is_occluded() {
        let w = world_with_sign(true, Vec2::new(-1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dets = observe_signage(&w, &robot(12.0, 10.0, 0.0), &oracle(), &CameraParams::default(), &mut rng);
        assert!(dets.is_empty());
    }

    #[test]
    fn edge_on_sign_is_not_detected() {
        // Facing 89 degrees away from the robot's line of sight.
        let facing = Vec2::from_angle(std::f64::consts::PI - 89f64.to_radians());
        let w = world_with_sign(false, facing);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dets = observe_signage(&w, &robot(15.0, 10.0, 0.0), &oracle(), &CameraParams::default(), &mut rng);
        assert!(dets.is_empty());
    }

    #[test]
    fn sign_outside_fov_is_not_detected() {
        let w = world_with_sign(false, Vec2::new(-1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dets = observe_signage(
            &w,
            &robot(15.0, 10.0, std::f64::consts::FRAC_PI_2),
            &oracle(),
            &CameraParams::default(),
            &mut rng,
        );
        assert!(dets.is_empty());
    }

    #[test]
    fn noise_grows_with_distance_and_obliquity() {
        let cam = CameraParams::default();
        let n = cam.noise;
        assert!((n.sigma(0.0, 0.0, &cam) - 0.1).abs() < 1e-12);
        assert!((n.sigma(10.0, cam.max_obliquity, &cam) - 1.1).abs() < 1e-12);
        assert!(n.sigma(5.0, 0.2, &cam) < n.sigma(6.0, 0.2, &cam));
    }
}
