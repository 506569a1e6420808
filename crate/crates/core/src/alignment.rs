//! Similarity transform between venue-map and world coordinates.
//!
//! The model maps a venue point `p_g` to the world as
//! `p_o = alpha * (R(theta) * p_g + t)`; it is fitted to minimize the mean
//! squared world residual over the RANSAC inlier set.

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Vec2};
use crate::{Error, Result};

const LM_MAX_ITERS: usize = 50;
const LM_GRAD_TOL: f64 = 1e-10;
const LM_JAC_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub venue_pos: Vec2,
    pub world_pos: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub iterations: usize,
    /// World-space residual (m) below which a correspondence is an inlier.
    pub inlier_radius: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            iterations: 200,
            inlier_radius: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapTransform {
    pub rotation: f64,
    /// In venue-map units.
    pub translation: Vec2,
    pub scale: f64,
    pub inlier_count: usize,
    pub rms_error: f64,
    pub inliers: Vec<bool>,
}

/// Compact form written to metrics and trajectory logs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSummary {
    pub theta: f64,
    pub tx: f64,
    pub ty: f64,
    pub alpha: f64,
    pub rms: f64,
}

impl MapTransform {
    pub fn from_params(rotation: f64, translation: Vec2, scale: f64) -> Self {
        MapTransform {
            rotation,
            translation,
            scale,
            inlier_count: 0,
            rms_error: 0.0,
            inliers: Vec::new(),
        }
    }

    pub fn identity() -> Self {
        MapTransform::from_params(0.0, Vec2::ZERO, 1.0)
    }

    /// Venue-map point to world coordinates.
    pub fn apply(&self, venue_pos: Vec2) -> Vec2 {
        (venue_pos.rotate(self.rotation) + self.translation) * self.scale
    }

    /// World point to venue-map coordinates.
    pub fn invert(&self, world_pos: Vec2) -> Vec2 {
        (world_pos / self.scale - self.translation).rotate(-self.rotation)
    }

    pub fn summary(&self) -> TransformSummary {
        TransformSummary {
            theta: self.rotation,
            tx: self.translation.x,
            ty: self.translation.y,
            alpha: self.scale,
            rms: self.rms_error,
        }
    }
}

/// Landmark position on the venue map, expressed in world coordinates.
pub fn backproject_landmark(tf: &MapTransform, venue_pos: Vec2) -> Vec2 {
    tf.apply(venue_pos)
}

fn residual(params: &[f64; 4], c: &Correspondence) -> Vec2 {
    let [theta, tx, ty, alpha] = *params;
    c.world_pos - (c.venue_pos.rotate(theta) + Vec2::new(tx, ty)) * alpha
}

fn mean_sq_error(params: &[f64; 4], corrs: &[Correspondence]) -> f64 {
    corrs
        .iter()
        .map(|c| {
            let r = residual(params, c);
            r.dot(r)
        })
        .sum::<f64>()
        / corrs.len() as f64
}

/// Closed-form least-squares similarity through all points (2D Umeyama via
/// complex arithmetic). `None` when the venue points coincide.
fn closed_form(corrs: &[Correspondence]) -> Option<[f64; 4]> {
    let n = corrs.len() as f64;
    let pm = corrs.iter().fold(Vec2::ZERO, |a, c| a + c.venue_pos) / n;
    let qm = corrs.iter().fold(Vec2::ZERO, |a, c| a + c.world_pos) / n;
    let (mut re, mut im, mut var) = (0.0, 0.0, 0.0);
    for c in corrs {
        let p = c.venue_pos - pm;
        let q = c.world_pos - qm;
        re += p.dot(q);
        im += p.cross(q);
        var += p.dot(p);
    }
    if var < 1e-18 {
        return None;
    }
    let (re, im) = (re / var, im / var);
    let alpha = re.hypot(im);
    if alpha < 1e-15 {
        return None;
    }
    let theta = im.atan2(re);
    // q = alpha R p + u, with u = alpha t.
    let u = qm - pm.rotate(theta) * alpha;
    let t = u / alpha;
    Some([theta, t.x, t.y, alpha])
}

fn levenberg_marquardt(mut x: [f64; 4], corrs: &[Correspondence]) -> [f64; 4] {
    let m = corrs.len();
    let residuals = |x: &[f64; 4]| -> Vec<f64> {
        corrs
            .iter()
            .flat_map(|c| {
                let r = residual(x, c);
                [r.x, r.y]
            })
            .collect()
    };
    let mut cost = mean_sq_error(&x, corrs);
    let mut lambda = 1e-3;
    for _ in 0..LM_MAX_ITERS {
        let r = residuals(&x);
        // Numeric Jacobian, central differences.
        let mut jac = vec![[0.0; 4]; 2 * m];
        for k in 0..4 {
            let (mut xp, mut xm) = (x, x);
            xp[k] += LM_JAC_STEP;
            xm[k] -= LM_JAC_STEP;
            let (rp, rm) = (residuals(&xp), residuals(&xm));
            for i in 0..2 * m {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * LM_JAC_STEP);
            }
        }
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for i in 0..2 * m {
            for a in 0..4 {
                jtr[a] += jac[i][a] * r[i];
                for b in 0..4 {
                    jtj[(a, b)] += jac[i][a] * jac[i][b];
                }
            }
        }
        if jtr.amax() < LM_GRAD_TOL {
            break;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for a in 0..4 {
                damped[(a, a)] += lambda * jtj[(a, a)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|ch| ch.solve(&(-jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let cand = [x[0] + step[0], x[1] + step[1], x[2] + step[2], x[3] + step[3]];
            let c = mean_sq_error(&cand, corrs);
            if c < cost && cand[3] > 0.0 {
                x = cand;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    x
}

/// RANSAC over two-point similarity hypotheses, then a least-squares fit on
/// the best inlier set refined by Levenberg-Marquardt.
pub fn estimate_transform(corrs: &[Correspondence], ransac: &RansacParams) -> Result<MapTransform> {
    if corrs.len() < 2 {
        return Err(Error::InsufficientCorrespondences(corrs.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ransac.seed);
    let n = corrs.len();
    let mut best: Option<(usize, f64, Vec<bool>)> = None;
    for _ in 0..ransac.iterations.max(1) {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let Some(h) = closed_form(&[corrs[i], corrs[j]]) else {
            continue;
        };
        let mut count = 0;
        let mut sse = 0.0;
        let mask: Vec<bool> = corrs
            .iter()
            .map(|c| {
                let r = residual(&h, c).norm();
                let inlier = r <= ransac.inlier_radius;
                if inlier {
                    count += 1;
                    sse += r * r;
                }
                inlier
            })
            .collect();
        let better = match &best {
            None => true,
            Some((bc, bs, _)) => count > *bc || (count == *bc && sse < *bs),
        };
        if better {
            best = Some((count, sse, mask));
        }
    }
    let (_, _, mask) = best.ok_or(Error::DegenerateSamples)?;
    let inliers: Vec<Correspondence> = corrs
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(c, _)| *c)
        .collect();
    let init = closed_form(&inliers).ok_or(Error::DegenerateSamples)?;
    let x = levenberg_marquardt(init, &inliers);
    Ok(MapTransform {
        rotation: wrap_angle(x[0]),
        translation: Vec2::new(x[1], x[2]),
        scale: x[3],
        inlier_count: inliers.len(),
        rms_error: mean_sq_error(&x, &inliers).sqrt(),
        inliers: mask,
    })
}

/// Transform from the current correspondences, or `None` with fewer than two.
pub fn refresh_transform(corrs: &[Correspondence], ransac: &RansacParams) -> Option<MapTransform> {
    estimate_transform(corrs, ransac).ok()
}
