use crate::geometry::Vec2;
use crate::perception::TextInstance3D;
use crate::world::{traverse_cells, OccupancyGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct Viewpoint {
    pub position: Vec2,
    /// Heading (rad) facing the instance centroid.
    pub heading: f64,
    /// Id of the signage-map instance this viewpoint looks at.
    pub instance: u64,
    /// Current retrieval score of that instance.
    pub score: f64,
    pub visited: bool,
}

fn clear_sight(grid: &OccupancyGrid, from: Vec2, to: Vec2) -> bool {
    let d = to - from;
    match d.normalized() {
        None => true,
        Some(dir) => traverse_cells(from, dir, d.norm(), grid.resolution, |r, c, _| {
            grid.is_occupied(r, c)
        })
        .is_none(),
    }
}

/// Outward normal of the sign face: perpendicular to the horizontal principal
/// axis of the fused surface points, oriented toward the viewers. Falls back
/// to the mean viewing direction when the points have no dominant axis.
pub fn face_normal(instance: &TextInstance3D) -> Option<Vec2> {
    let toward = instance.view_dir_sum.normalized()?;
    let c = instance.centroid_2d();
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in &instance.points {
        let (dx, dy) = (p[0] - c.x, p[1] - c.y);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let spread = ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt();
    if spread <= 0.5 * (sxx + syy) || spread < 1e-12 {
        return Some(toward);
    }
    let phi = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let normal = Vec2::new(-phi.sin(), phi.cos());
    Some(if normal.dot(toward) < 0.0 { -normal } else { normal })
}

/// Stand-off pose `view_dist` in front of the sign along its estimated
/// outward normal, falling back to the nearest known-free cell (with a clear
/// line of sight to the sign face) within `1.5 * view_dist` of the sign.
pub fn generate_viewpoint(
    instance: &TextInstance3D,
    grid: &OccupancyGrid,
    view_dist: f64,
) -> Option<Viewpoint> {
    if instance.points.is_empty() {
        return None;
    }
    let center = instance.centroid_2d();
    let normal = face_normal(instance)?;
    let face = center + normal * (0.5 * grid.resolution);
    let ideal = center + normal * view_dist;
    let (ir, ic) = grid.cell_of(ideal);
    let position = if grid.is_free(ir, ic) && clear_sight(grid, ideal, face) {
        ideal
    } else {
        let limit = 1.5 * view_dist;
        let reach = (limit / grid.resolution).ceil() as i64 + 1;
        let (cr, cc) = grid.cell_of(center);
        let mut best: Option<(f64, Vec2)> = None;
        for r in cr - reach..=cr + reach {
            for c in cc - reach..=cc + reach {
                if !grid.is_free(r, c) {
                    continue;
                }
                let p = grid.cell_center(r, c);
                if p.distance(center) > limit || !clear_sight(grid, p, face) {
                    continue;
                }
                let d = p.distance(ideal);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, p));
                }
            }
        }
        best?.1
    };
    let heading = (center - position).normalized()?.angle();
    Some(Viewpoint {
        position,
        heading,
        instance: instance.id,
        score: instance.score,
        visited: false,
    })
}
