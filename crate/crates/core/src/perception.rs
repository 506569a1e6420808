//! Signage understanding: a seeded synthetic feature oracle standing in for
//! the text spotter, the offline prior feature pool, the multi-view fusion
//! bank of 3D text instances, and cosine-similarity retrieval.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{cosine, normalize, Vec2};
use crate::venue_map::{TopoGraph, VenueMap};
use crate::world::Detection2D;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    pub dim: usize,
    /// Cosine similarity between the ground-truth features of two different
    /// landmarks, before the random per-landmark part is added.
    pub correlation: f64,
    /// Expected noise norm per unit of sigma.
    pub noise_gain: f64,
    pub seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            dim: 32,
            correlation: 0.95,
            noise_gain: 1.0,
            seed: 0,
        }
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Remove the components of `v` along the orthonormal `basis`.
fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let k = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= k * y);
    }
}

/// Deterministic stand-in for the text spotter's latent features.
///
/// Landmark features share a common direction so that names are mutually
/// confusable under noise. Distractor features are orthogonal to every
/// landmark feature whenever the dimension allows it.
#[derive(Clone, Debug)]
pub struct FeatureOracle {
    pub dim: usize,
    pub seed: u64,
    pub noise_gain: f64,
    pub gt_features: BTreeMap<String, Vec<f64>>,
    pub distractor_features: BTreeMap<String, Vec<f64>>,
}

impl FeatureOracle {
    pub fn new<S: AsRef<str>>(
        vm: &VenueMap,
        distractor_tags: &[S],
        params: OracleParams,
    ) -> Result<Self> {
        if params.dim < 2 {
            return Err(Error::Config("feature dimension must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&params.correlation) {
            return Err(Error::Config("feature correlation must be in [0, 1)".into()));
        }
        if !(params.noise_gain.is_finite() && params.noise_gain >= 0.0) {
            return Err(Error::Config("noise gain must be finite and non-negative".into()));
        }
        let dim = params.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut common = gaussian_vec(&mut rng, dim);
        normalize(&mut common);

        let (a, b) = (params.correlation.sqrt(), (1.0 - params.correlation).sqrt());
        let mut gt_features = BTreeMap::new();
        let mut basis = vec![common.clone()];
        for lm in &vm.landmarks {
            let mut u = gaussian_vec(&mut rng, dim);
            project_out(&mut u, &basis[..1]);
            normalize(&mut u);
            let mut g: Vec<f64> = common.iter().zip(&u).map(|(c, x)| a * c + b * x).collect();
            normalize(&mut g);
            // Orthonormal basis of the landmark span, for distractors.
            let mut e = g.clone();
            project_out(&mut e, &basis);
            if e.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
                normalize(&mut e);
                basis.push(e);
            }
            gt_features.insert(lm.name.clone(), g);
        }

        let mut tags: Vec<&str> = distractor_tags.iter().map(|s| s.as_ref()).collect();
        tags.sort_unstable();
        tags.dedup();
        let mut distractor_features = BTreeMap::new();
        for tag in tags {
            let f = if basis.len() < dim {
                let mut v = gaussian_vec(&mut rng, dim);
                project_out(&mut v, &basis);
                normalize(&mut v);
                v
            } else {
                // No orthogonal room left: keep the least similar draw.
                let mut best: Option<(f64, Vec<f64>)> = None;
                for _ in 0..256 {
                    let mut v = gaussian_vec(&mut rng, dim);
                    normalize(&mut v);
                    let worst = gt_features
                        .values()
                        .map(|g| dot(&v, g))
                        .fold(f64::NEG_INFINITY, f64::max);
                    if best.as_ref().is_none_or(|(w, _)| worst < *w) {
                        best = Some((worst, v));
                    }
                }
                best.unwrap().1
            };
            distractor_features.insert(tag.to_string(), f);
        }
        Ok(FeatureOracle {
            dim,
            seed: params.seed,
            noise_gain: params.noise_gain,
            gt_features,
            distractor_features,
        })
    }

    pub fn ground_truth(&self, label: &str, is_distractor: bool) -> Option<&[f64]> {
        let map = if is_distractor {
            &self.distractor_features
        } else {
            &self.gt_features
        };
        map.get(label).map(Vec::as_slice)
    }

    /// `normalize(gt + eps)`, `eps ~ N(0, (gain * sigma)^2 / dim * I)` so that
    /// the expected squared noise norm is `(gain * sigma)^2`.
    pub fn perturb(&self, gt: &[f64], sigma: f64, rng: &mut impl rand::Rng) -> Vec<f64> {
        let s = self.noise_gain * sigma / (self.dim as f64).sqrt();
        let mut f: Vec<f64> = gt
            .iter()
            .map(|g| {
                let n: f64 = StandardNormal.sample(rng);
                g + s * n
            })
            .collect();
        normalize(&mut f);
        f
    }
}

/// Offline prior features, one or more per landmark.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePool {
    pub entries: Vec<(usize, Vec<f64>)>,
}

/// Build the prior pool: per landmark, `pool_size` features
/// `normalize(gt + eps)` with `eps` of norm scale `pool_noise`.
pub fn build_feature_pool(
    vm: &VenueMap,
    oracle: &FeatureOracle,
    pool_noise: f64,
    pool_size: usize,
) -> FeaturePool {
    let mut rng = ChaCha8Rng::seed_from_u64(oracle.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut entries = Vec::with_capacity(vm.len() * pool_size.max(1));
    for (i, lm) in vm.landmarks.iter().enumerate() {
        let gt = &oracle.gt_features[&lm.name];
        for _ in 0..pool_size.max(1) {
            let f = if pool_noise > 0.0 {
                oracle.perturb(gt, pool_noise, &mut rng)
            } else {
                gt.clone()
            };
            entries.push((i, f));
        }
    }
    FeaturePool { entries }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Retrieval {
    /// Recognized landmark, `None` when the best score is below threshold.
    pub label: Option<usize>,
    /// Best-matching landmark in scope regardless of threshold.
    pub best: usize,
    pub score: f64,
}

/// Arg-max cosine similarity over pool entries whose landmark is in scope.
/// Ties go to the lowest landmark index.
pub fn retrieve_label(
    feature: &[f64],
    pool: &FeaturePool,
    scope: &BTreeSet<usize>,
    gamma_recall: f64,
) -> Result<Retrieval> {
    let mut best: Option<(usize, f64)> = None;
    for (lm, f) in &pool.entries {
        if !scope.contains(lm) {
            continue;
        }
        let s = cosine(feature, f);
        let better = match best {
            None => true,
            Some((bl, bs)) => s > bs || (s == bs && *lm < bl),
        };
        if better {
            best = Some((*lm, s));
        }
    }
    let (lm, score) = best.ok_or(Error::EmptyScope)?;
    Ok(Retrieval {
        label: (score >= gamma_recall).then_some(lm),
        best: lm,
        score,
    })
}

/// Landmarks eligible for matching: everything before the first
/// recognition, afterwards the `h`-hop neighbourhood of the previous one.
pub fn recognition_scope(g: &TopoGraph, prev_landmark: Option<usize>, h: usize) -> BTreeSet<usize> {
    match prev_landmark {
        None => (0..g.node_count()).collect(),
        Some(p) => g
            .h_hop_neighbors(p, h)
            .unwrap_or_else(|_| (0..g.node_count()).collect()),
    }
}

/// A fused 3D text instance in the signage map.
#[derive(Clone, Debug, PartialEq)]
pub struct TextInstance3D {
    /// Stable identifier; survives merges of other instances into this one.
    pub id: u64,
    pub points: Vec<[f64; 3]>,
    point_sum: [f64; 3],
    /// Running mean of the fused raw features (not renormalized).
    pub feature: Vec<f64>,
    pub n_views: usize,
    pub label: Option<usize>,
    pub score: f64,
    /// Sum of unit vectors from the sign toward each viewer.
    pub view_dir_sum: Vec2,
    /// Ground-truth sign ids of fused detections, for evaluation only.
    pub sources: BTreeMap<usize, usize>,
}

impl TextInstance3D {
    pub fn centroid(&self) -> [f64; 3] {
        let n = self.points.len() as f64;
        [
            self.point_sum[0] / n,
            self.point_sum[1] / n,
            self.point_sum[2] / n,
        ]
    }

    pub fn centroid_2d(&self) -> Vec2 {
        let c = self.centroid();
        Vec2::new(c[0], c[1])
    }

    /// Ground-truth sign most of the fused detections came from.
    pub fn dominant_source(&self) -> Option<usize> {
        self.sources
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&s, _)| s)
    }

    fn add_points(&mut self, pts: &[[f64; 3]]) {
        for p in pts {
            for k in 0..3 {
                self.point_sum[k] += p[k];
            }
        }
        self.points.extend_from_slice(pts);
    }
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// The signage map: a bank of fused 3D text instances.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SignageMap {
    pub instances: Vec<TextInstance3D>,
    next_id: u64,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct InstanceExport {
    pub centroid: [f64; 3],
    pub n_views: usize,
    pub label: Option<String>,
    pub score: f64,
    pub points_count: usize,
}

impl SignageMap {
    pub fn new() -> Self {
        SignageMap::default()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&TextInstance3D> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn get_mut(&mut self, id: u64) -> Option<&mut TextInstance3D> {
        self.instances.iter_mut().find(|i| i.id == id)
    }

    /// Fuse into the best instance passing both the similarity and distance
    /// gates (highest cosine, then nearest, then lowest index), or start a
    /// new instance. Returns the index of the affected instance.
    pub fn fuse_detection(&mut self, obs: &Detection2D, gamma_s: f64, gamma_d: f64) -> usize {
        let c = obs.centroid();
        let mut best: Option<(usize, f64, f64)> = None;
        for (j, inst) in self.instances.iter().enumerate() {
            let s = cosine(&obs.feature, &inst.feature);
            let d = dist3(c, inst.centroid());
            if s < gamma_s || d > gamma_d {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, bs, bd)) => s > bs || (s == bs && d < bd),
            };
            if better {
                best = Some((j, s, d));
            }
        }
        let view_dir = (obs.viewer - Vec2::new(c[0], c[1]))
            .normalized()
            .unwrap_or(Vec2::ZERO);
        match best {
            Some((j, _, _)) => {
                let inst = &mut self.instances[j];
                let n = inst.n_views as f64;
                for (f, x) in inst.feature.iter_mut().zip(&obs.feature) {
                    *f = (n * *f + x) / (n + 1.0);
                }
                inst.n_views += 1;
                inst.add_points(&obs.surface_points);
                inst.view_dir_sum += view_dir;
                *inst.sources.entry(obs.signage_id).or_default() += 1;
                j
            }
            None => {
                let mut inst = TextInstance3D {
                    id: self.next_id,
                    points: Vec::new(),
                    point_sum: [0.0; 3],
                    feature: obs.feature.clone(),
                    n_views: 1,
                    label: None,
                    score: 0.0,
                    view_dir_sum: view_dir,
                    sources: BTreeMap::from([(obs.signage_id, 1)]),
                };
                inst.add_points(&obs.surface_points);
                self.next_id += 1;
                self.instances.push(inst);
                self.instances.len() - 1
            }
        }
    }

    /// Merge instance pairs that pass both fusion gates until none remain,
    /// always taking the lowest `(i, j)` pair first. Returns the ids of
    /// instances absorbed into others.
    pub fn periodic_merge(&mut self, gamma_s: f64, gamma_d: f64) -> Vec<(u64, u64)> {
        let mut absorbed = Vec::new();
        'outer: loop {
            let n = self.instances.len();
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = (&self.instances[i], &self.instances[j]);
                    if cosine(&a.feature, &b.feature) >= gamma_s
                        && dist3(a.centroid(), b.centroid()) <= gamma_d
                    {
                        let other = self.instances.remove(j);
                        let keep = &mut self.instances[i];
                        let (na, nb) = (keep.n_views as f64, other.n_views as f64);
                        for (f, x) in keep.feature.iter_mut().zip(&other.feature) {
                            *f = (na * *f + nb * x) / (na + nb);
                        }
                        keep.n_views += other.n_views;
                        keep.add_points(&other.points);
                        keep.view_dir_sum += other.view_dir_sum;
                        for (s, k) in &other.sources {
                            *keep.sources.entry(*s).or_default() += k;
                        }
                        if other.score > keep.score {
                            keep.label = other.label;
                            keep.score = other.score;
                        }
                        absorbed.push((other.id, keep.id));
                        continue 'outer;
                    }
                }
            }
            break;
        }
        absorbed
    }

    pub fn export(&self, vm: &VenueMap) -> Vec<InstanceExport> {
        self.instances
            .iter()
            .map(|i| InstanceExport {
                centroid: i.centroid(),
                n_views: i.n_views,
                label: i.label.map(|l| vm.landmarks[l].name.clone()),
                score: i.score,
                points_count: i.points.len(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::venue_map::{build_topo_graph, Landmark};

    fn e(dim: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        v
    }

    fn obs_at(x: f64, feature: Vec<f64>) -> Detection2D {
        Detection2D {
            signage_id: 0,
            surface_points: vec![[x, 0.0, 2.0]],
            feature,
            view_distance: 2.0,
            view_obliquity: 0.0,
            viewer: Vec2::new(x, -2.0),
        }
    }

    fn venue(n: usize) -> VenueMap {
        VenueMap::new(
            (0..n)
                .map(|i| Landmark {
                    name: format!("shop{i}"),
                    map_pos: Vec2::new(i as f64 * 100.0, 0.0),
                })
                .collect(),
            "px",
        )
        .unwrap()
    }

    fn orthonormal_pool() -> FeaturePool {
        FeaturePool {
            entries: (0..3).map(|i| (i, e(4, i))).collect(),
        }
    }

    #[test]
    fn oracle_features_are_unit_and_stable() {
        let vm = venue(9);
        let params = OracleParams {
            seed: 3,
            ..Default::default()
        };
        let a = FeatureOracle::new(&vm, &["sale"], params).unwrap();
        let b = FeatureOracle::new(&vm, &["sale"], params).unwrap();
        assert_eq!(a.gt_features, b.gt_features);
        for f in a.gt_features.values().chain(a.distractor_features.values()) {
            let n: f64 = f.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let d = &a.distractor_features["sale"];
        for g in a.gt_features.values() {
            assert!(cosine(d, g).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_pool_equals_ground_truth() {
        let vm = venue(4);
        let oracle = FeatureOracle::new::<&str>(&vm, &[], OracleParams::default()).unwrap();
        let pool = build_feature_pool(&vm, &oracle, 0.0, 1);
        for (i, f) in &pool.entries {
            assert_eq!(f, &oracle.gt_features[&vm.landmarks[*i].name]);
        }
    }

    #[test]
    fn noisy_pool_is_reproducible() {
        let vm = venue(4);
        let oracle = FeatureOracle::new::<&str>(&vm, &[], OracleParams::default()).unwrap();
        let a = build_feature_pool(&vm, &oracle, 0.1, 1);
        let b = build_feature_pool(&vm, &oracle, 0.1, 1);
        assert_eq!(a, b);
    }

    #[test]
    fn retrieval_examples() {
        let pool = orthonormal_pool();
        let all = BTreeSet::from([0, 1, 2]);
        let r = retrieve_label(&e(4, 1), &pool, &all, 0.3).unwrap();
        assert_eq!((r.label, r.score), (Some(1), 1.0));

        let q = vec![0.6, 0.8, 0.0, 0.0];
        let r = retrieve_label(&q, &pool, &all, 0.3).unwrap();
        assert_eq!(r.label, Some(1));
        assert!((r.score - 0.8).abs() < 1e-12);

        let distractor = vec![0.2, 0.1, 0.0, (1.0f64 - 0.05).sqrt()];
        let r = retrieve_label(&distractor, &pool, &all, 0.3).unwrap();
        assert_eq!(r.label, None);
        assert!((r.score - 0.2).abs() < 1e-12);

        assert!(matches!(
            retrieve_label(&q, &pool, &BTreeSet::new(), 0.3),
            Err(Error::EmptyScope)
        ));
    }

    #[test]
    fn retrieval_tie_prefers_lowest_index() {
        let pool = FeaturePool {
            entries: vec![(2, e(2, 0)), (1, e(2, 0))],
        };
        let r = retrieve_label(&e(2, 0), &pool, &BTreeSet::from([1, 2]), 0.3).unwrap();
        assert_eq!(r.label, Some(1));
    }

    #[test]
    fn pool_size_takes_max_over_entries() {
        let pool = FeaturePool {
            entries: vec![(0, e(3, 2)), (0, e(3, 0)), (1, vec![0.8, 0.6, 0.0])],
        };
        let r = retrieve_label(&e(3, 0), &pool, &BTreeSet::from([0, 1]), 0.3).unwrap();
        assert_eq!((r.label, r.score), (Some(0), 1.0));
    }

    #[test]
    fn scope_examples() {
        let chain3 = build_topo_graph(&venue(3), 150.0);
        assert_eq!(recognition_scope(&chain3, None, 1), BTreeSet::from([0, 1, 2]));
        assert_eq!(recognition_scope(&chain3, Some(1), 1), BTreeSet::from([0, 1, 2]));
        let chain4 = build_topo_graph(&venue(4), 150.0);
        assert_eq!(recognition_scope(&chain4, Some(0), 1), BTreeSet::from([0, 1]));
    }

    #[test]
    fn dissimilar_feature_creates_new_instance() {
        let mut bank = SignageMap::new();
        bank.fuse_detection(&obs_at(0.0, e(3, 0)), 0.5, 3.0);
        let j = bank.fuse_detection(&obs_at(0.0, e(3, 1)), 0.5, 3.0);
        assert_eq!((j, bank.len()), (1, 2));
    }

    #[test]
    fn distant_identical_feature_is_not_fused() {
        let mut bank = SignageMap::new();
        bank.fuse_detection(&obs_at(0.0, e(3, 0)), 0.5, 3.0);
        bank.fuse_detection(&obs_at(4.0, e(3, 0)), 0.5, 3.0);
        assert_eq!(bank.len(), 2);
    }

    #[test]
    fn fusion_averages_features() {
        let mut bank = SignageMap::new();
        bank.fuse_detection(&obs_at(0.0, vec![1.0, 0.0]), 0.5, 3.0);
        let j = bank.fuse_detection(&obs_at(0.0, vec![0.8, 0.6]), 0.5, 3.0);
        assert_eq!(j, 0);
        let inst = &bank.instances[0];
        assert_eq!(inst.n_views, 2);
        assert!((inst.feature[0] - 0.9).abs() < 1e-12);
        assert!((inst.feature[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn fusion_picks_most_similar_candidate() {
        let mut bank = SignageMap::new();
        bank.fuse_detection(&obs_at(0.0, vec![1.0, 0.0]), 0.5, 3.0);
        bank.fuse_detection(&obs_at(1.0, vec![0.6, 0.8]), 0.9, 3.0);
        assert_eq!(bank.len(), 2);
        let j = bank.fuse_detection(&obs_at(0.5, vec![0.7, 0.71]), 0.5, 3.0);
        assert_eq!(j, 1);
    }

    #[test]
    fn merge_examples() {
        let f2 = vec![0.9, (1.0f64 - 0.81).sqrt()];
        let mut bank = SignageMap::new();
        bank.fuse_detection(&obs_at(0.0, vec![1.0, 0.0]), 0.95, 3.0);
        bank.fuse_detection(&obs_at(1.0, f2.clone()), 0.95, 3.0);
        assert_eq!(bank.len(), 2);
        let absorbed = bank.periodic_merge(0.5, 3.0);
        assert_eq!(absorbed, vec![(1, 0)]);
        assert_eq!(bank.instances[0].n_views, 2);

        let mut far = SignageMap::new();
        far.fuse_detection(&obs_at(0.0, vec![1.0, 0.0]), 0.95, 3.0);
        far.fuse_detection(&obs_at(5.0, f2), 0.95, 3.0);
        far.periodic_merge(0.5, 3.0);
        assert_eq!(far.len(), 2);

        let mut empty = SignageMap::new();
        assert!(empty.periodic_merge(0.5, 3.0).is_empty());
        assert!(empty.is_empty());
    }
}
