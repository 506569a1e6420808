use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frontier::{detect_frontiers, is_frontier_cell, Frontier};
use super::path::{PlannedPath, ReachMap, Traversability};
use super::utility::{select_next_pose, CandidateKind};
use super::viewpoint::{generate_viewpoint, Viewpoint};
use super::PlannerConfig;
use crate::alignment::{
    backproject_landmark, refresh_transform, Correspondence, MapTransform, RansacParams,
    TransformSummary,
};
use crate::geometry::Vec2;
use crate::harness::RunMetrics;
use crate::perception::{
    build_feature_pool, recognition_scope, retrieve_label, FeatureOracle, FeaturePool,
    OracleParams, SignageMap,
};
use crate::venue_map::{build_topo_graph, solve_tsp_route, LandmarkRoute, Subgoal, TopoGraph, VenueMap};
use crate::world::{
    advance, integrate_scan, observe_signage, raycast_scan, turn_to, CameraParams, OccupancyGrid,
    RobotState, WorldSpec,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Ours,
    /// Frontier-only exploration with the same perception pipeline.
    Baseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionParams {
    pub gamma_s: f64,
    pub gamma_d: f64,
    pub gamma_recall: f64,
    /// Hop radius of recognition scoping.
    pub hops: usize,
    /// Venue-map edge threshold, in venue-map units.
    pub gamma_map: f64,
    pub pool_noise: f64,
    pub pool_size: usize,
    /// Run instance merging every this many perception frames.
    pub merge_period: usize,
}

impl Default for PerceptionParams {
    fn default() -> Self {
        PerceptionParams {
            gamma_s: 0.5,
            gamma_d: 3.0,
            gamma_recall: 0.3,
            hops: 1,
            gamma_map: 150.0,
            pool_noise: 0.1,
            pool_size: 1,
            merge_period: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarParams {
    pub n_rays: usize,
    pub max_range: f64,
}

impl Default for LidarParams {
    fn default() -> Self {
        LidarParams {
            n_rays: 360,
            max_range: 20.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionParams {
    pub v_linear: f64,
    pub v_angular: f64,
    /// Travel (m) between perception frames while following a path.
    pub perception_step: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            v_linear: 0.8,
            v_angular: 0.1,
            perception_step: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    /// Decisions plus perception frames.
    pub max_steps: usize,
    /// Simulated seconds.
    pub max_sim_time: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            max_steps: 20_000,
            max_sim_time: 7_200.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExploreConfig {
    pub planner: PlannerConfig,
    pub perception: PerceptionParams,
    pub oracle: OracleParams,
    pub camera: CameraParams,
    pub lidar: LidarParams,
    pub motion: MotionParams,
    pub ransac: RansacParams,
    pub budgets: Budgets,
    pub mode: Mode,
}

impl ExploreConfig {
    /// Planner settings after applying the mode.
    pub fn effective_planner(&self) -> PlannerConfig {
        match self.mode {
            Mode::Ours => self.planner,
            Mode::Baseline => self.planner.baseline(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.planner;
        let positive = [
            ("eta", p.eta),
            ("lambda_h", p.lambda_h),
            ("mu_radius", p.mu_radius),
            ("fov", p.fov),
            ("gain_range", p.gain_range),
            ("view_dist", p.view_dist),
            ("gamma_d", self.perception.gamma_d),
            ("v_linear", self.motion.v_linear),
            ("v_angular", self.motion.v_angular),
            ("perception_step", self.motion.perception_step),
            ("lidar range", self.lidar.max_range),
            ("camera range", self.camera.max_range),
            ("max_sim_time", self.budgets.max_sim_time),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(p.beta.is_finite() && p.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be non-negative, got {}", p.beta)));
        }
        if p.mu_gain < 1.0 {
            return Err(Error::Config("mu_gain must be at least 1".into()));
        }
        if self.budgets.max_steps == 0 || self.lidar.n_rays == 0 {
            return Err(Error::Config("max_steps and n_rays must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// No unvisited reachable frontier or viewpoint remains.
    NoCandidates,
    /// Every landmark on the route was recognized and no frontier remains.
    RouteComplete,
    StepBudget,
    TimeBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "lowercase")]
pub enum EventData {
    Pose {
        x: f64,
        y: f64,
        theta: f64,
    },
    Decision {
        kind: CandidateKind,
        index: usize,
        x: f64,
        y: f64,
        utility: f64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        instance: Option<u64>,
    },
    Detection {
        sign: usize,
        instance: u64,
        distance: f64,
        obliquity: f64,
    },
    Recognition {
        instance: u64,
        label: Option<String>,
        score: f64,
        /// Ground-truth sign the instance mostly came from.
        sign: Option<usize>,
        correct: bool,
        merged_into: Option<u64>,
        x: f64,
        y: f64,
    },
    Transform {
        theta: f64,
        tx: f64,
        ty: f64,
        alpha: f64,
        rms: f64,
        inliers: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Simulated seconds.
    pub t: f64,
    #[serde(flatten)]
    pub data: EventData,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryLog {
    pub events: Vec<Event>,
}

impl TrajectoryLog {
    pub fn push(&mut self, t: f64, data: EventData) {
        self.events.push(Event { t, data });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::parse("trajectory log", e)))
            .collect::<Result<_>>()?;
        Ok(TrajectoryLog { events })
    }

    pub fn poses(&self) -> impl Iterator<Item = (f64, Vec2, f64)> + '_ {
        self.events.iter().filter_map(|e| match e.data {
            EventData::Pose { x, y, theta } => Some((e.t, Vec2::new(x, y), theta)),
            _ => None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ExploreOutcome {
    pub signage_map: SignageMap,
    pub log: TrajectoryLog,
    pub metrics: RunMetrics,
    pub termination: Termination,
    pub grid: OccupancyGrid,
    pub transform: Option<MapTransform>,
    pub route: Option<LandmarkRoute>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct LabelState {
    label: Option<usize>,
    sign: Option<usize>,
    correct: bool,
    /// When the current label was assigned.
    since: f64,
}

struct Explorer<'a> {
    world: &'a WorldSpec,
    vm: &'a VenueMap,
    cfg: ExploreConfig,
    planner: PlannerConfig,
    topo: TopoGraph,
    oracle: FeatureOracle,
    pool: FeaturePool,
    rng: ChaCha8Rng,
    robot: RobotState,
    grid: OccupancyGrid,
    bank: SignageMap,
    viewpoints: BTreeMap<u64, Viewpoint>,
    visited_targets: Vec<Vec2>,
    prev_landmark: Option<usize>,
    route: Option<LandmarkRoute>,
    transform: Option<MapTransform>,
    fitted_labels: BTreeSet<usize>,
    labels: BTreeMap<u64, LabelState>,
    log: TrajectoryLog,
    frames: usize,
    steps: usize,
    path_length: f64,
    last_pose: Option<Vec2>,
}

enum Stop {
    Arrived,
    Interrupted,
}

impl<'a> Explorer<'a> {
    fn new(world: &'a WorldSpec, vm: &'a VenueMap, cfg: &ExploreConfig) -> Result<Self> {
        cfg.validate()?;
        world.check_labels(vm)?;
        let distractors: Vec<&str> = world
            .signage
            .iter()
            .filter(|s| s.is_distractor)
            .map(|s| s.label.as_str())
            .collect();
        let oracle = FeatureOracle::new(vm, &distractors, cfg.oracle)?;
        let pool = build_feature_pool(
            vm,
            &oracle,
            cfg.perception.pool_noise,
            cfg.perception.pool_size,
        );
        let grid = OccupancyGrid::unknown(world.rows, world.cols, world.resolution);
        Ok(Explorer {
            world,
            vm,
            cfg: *cfg,
            planner: cfg.effective_planner(),
            topo: build_topo_graph(vm, cfg.perception.gamma_map),
            oracle,
            pool,
            rng: ChaCha8Rng::seed_from_u64(world.rng_seed),
            robot: RobotState::new(world.robot_start),
            grid,
            bank: SignageMap::new(),
            viewpoints: BTreeMap::new(),
            visited_targets: Vec::new(),
            prev_landmark: None,
            route: None,
            transform: None,
            fitted_labels: BTreeSet::new(),
            labels: BTreeMap::new(),
            log: TrajectoryLog::default(),
            frames: 0,
            steps: 0,
            path_length: 0.0,
            last_pose: None,
        })
    }

    fn log_pose(&mut self) {
        let p = self.robot.pose;
        if let Some(last) = self.last_pose.replace(p.position()) {
            self.path_length += last.distance(p.position());
        }
        self.log.push(
            self.robot.clock,
            EventData::Pose {
                x: p.x,
                y: p.y,
                theta: p.theta,
            },
        );
    }

    /// One perception frame: range scan, sign detection, fusion, retrieval.
    fn sense(&mut self) -> Result<()> {
        let scan = raycast_scan(
            self.world,
            &self.robot,
            self.cfg.lidar.n_rays,
            self.cfg.lidar.max_range,
        )?;
        integrate_scan(&mut self.grid, &self.robot, &scan);

        let dets = observe_signage(
            self.world,
            &self.robot,
            &self.oracle,
            &self.cfg.camera,
            &mut self.rng,
        );
        let pp = self.cfg.perception;
        let mut touched = BTreeSet::new();
        for det in &dets {
            let idx = self.bank.fuse_detection(det, pp.gamma_s, pp.gamma_d);
            let id = self.bank.instances[idx].id;
            touched.insert(id);
            self.log.push(
                self.robot.clock,
                EventData::Detection {
                    sign: det.signage_id,
                    instance: id,
                    distance: det.view_distance,
                    obliquity: det.view_obliquity,
                },
            );
        }
        self.frames += 1;
        if pp.merge_period > 0 && self.frames % pp.merge_period == 0 {
            for (absorbed, kept) in self.bank.periodic_merge(pp.gamma_s, pp.gamma_d) {
                touched.remove(&absorbed);
                touched.insert(kept);
                self.viewpoints.remove(&absorbed);
                self.labels.remove(&absorbed);
                self.log.push(
                    self.robot.clock,
                    EventData::Recognition {
                        instance: absorbed,
                        label: None,
                        score: 0.0,
                        sign: None,
                        correct: false,
                        merged_into: Some(kept),
                        x: 0.0,
                        y: 0.0,
                    },
                );
            }
        }
        for id in touched {
            self.retrieve(id)?;
        }
        Ok(())
    }

    fn retrieve(&mut self, id: u64) -> Result<()> {
        let pp = self.cfg.perception;
        let scope = recognition_scope(&self.topo, self.prev_landmark, pp.hops);
        let inst = self.bank.get_mut(id).expect("instance exists");
        let r = retrieve_label(&inst.feature, &self.pool, &scope, pp.gamma_recall)?;
        inst.label = r.label;
        inst.score = r.score;
        let sign = inst.dominant_source();
        let centroid = inst.centroid_2d();
        let correct = match (r.label, sign) {
            (Some(l), Some(s)) => {
                let spec = &self.world.signage[s];
                !spec.is_distractor && spec.label == self.vm.landmarks[l].name
            }
            _ => false,
        };
        let now = self.robot.clock;
        let prev = self.labels.get(&id).copied();
        let changed = prev.is_none_or(|p| (p.label, p.sign, p.correct) != (r.label, sign, correct));
        if changed {
            let since = match prev {
                Some(p) if p.label == r.label => p.since,
                _ => now,
            };
            self.labels.insert(
                id,
                LabelState {
                    label: r.label,
                    sign,
                    correct,
                    since,
                },
            );
            self.log.push(
                now,
                EventData::Recognition {
                    instance: id,
                    label: r.label.map(|l| self.vm.landmarks[l].name.clone()),
                    score: r.score,
                    sign,
                    correct,
                    merged_into: None,
                    x: centroid.x,
                    y: centroid.y,
                },
            );
        }
        if let Some(l) = r.label {
            if prev.is_none_or(|p| p.label != Some(l)) {
                self.on_recognized(l);
            }
        }
        if self.planner.use_viewpoints {
            self.update_viewpoint(id);
        }
        Ok(())
    }

    fn on_recognized(&mut self, landmark: usize) {
        self.prev_landmark = Some(landmark);
        if !self.planner.use_heuristic {
            return;
        }
        match &mut self.route {
            None => {
                if let Ok(mut route) = solve_tsp_route(&self.topo, landmark) {
                    route.next_subgoal(landmark);
                    self.route = Some(route);
                }
            }
            Some(route) => {
                route.next_subgoal(landmark);
            }
        }
        self.refit_transform();
    }

    /// Refit the venue-to-world transform when the set of confidently
    /// labeled landmarks changes.
    fn refit_transform(&mut self) {
        let mut best: BTreeMap<usize, (f64, Vec2)> = BTreeMap::new();
        for inst in &self.bank.instances {
            if let Some(l) = inst.label {
                let entry = best.entry(l).or_insert((f64::NEG_INFINITY, Vec2::ZERO));
                if inst.score > entry.0 {
                    *entry = (inst.score, inst.centroid_2d());
                }
            }
        }
        let labels: BTreeSet<usize> = best.keys().copied().collect();
        if labels == self.fitted_labels || labels.len() < 2 {
            return;
        }
        let corrs: Vec<Correspondence> = best
            .iter()
            .map(|(&l, &(_, w))| Correspondence {
                venue_pos: self.vm.landmarks[l].map_pos,
                world_pos: w,
            })
            .collect();
        if let Some(tf) = refresh_transform(&corrs, &self.cfg.ransac) {
            let s: TransformSummary = tf.summary();
            self.log.push(
                self.robot.clock,
                EventData::Transform {
                    theta: s.theta,
                    tx: s.tx,
                    ty: s.ty,
                    alpha: s.alpha,
                    rms: s.rms,
                    inliers: tf.inlier_count,
                },
            );
            self.transform = Some(tf);
            self.fitted_labels = labels;
        }
    }

    fn update_viewpoint(&mut self, id: u64) {
        let inst = self.bank.get(id).expect("instance exists");
        let retire = inst.score > self.planner.retire_score;
        match self.viewpoints.get_mut(&id) {
            Some(vp) if vp.visited => {}
            Some(vp) if retire => {
                vp.score = inst.score;
                vp.visited = true;
            }
            _ => {
                if let Some(mut vp) = generate_viewpoint(inst, &self.grid, self.planner.view_dist) {
                    vp.visited = retire;
                    self.viewpoints.insert(id, vp);
                }
            }
        }
    }

    fn goal_world(&self) -> Option<Vec2> {
        if !self.planner.use_heuristic {
            return None;
        }
        let tf = self.transform.as_ref()?;
        match self.route.as_ref()?.current() {
            Subgoal::Landmark(g) => Some(backproject_landmark(tf, self.vm.landmarks[g].map_pos)),
            Subgoal::Done => None,
        }
    }

    fn frontiers(&self) -> Vec<Frontier> {
        let r = self.planner.visited_radius;
        let mut fs = detect_frontiers(&self.grid, self.planner.min_cluster);
        for f in &mut fs {
            f.visited = self.visited_targets.iter().any(|v| v.distance(f.position) <= r);
        }
        fs
    }

    fn out_of_budget(&self) -> Option<Termination> {
        if self.steps >= self.cfg.budgets.max_steps {
            Some(Termination::StepBudget)
        } else if self.robot.clock >= self.cfg.budgets.max_sim_time {
            Some(Termination::TimeBudget)
        } else {
            None
        }
    }

    fn run(&mut self) -> Result<Termination> {
        self.log_pose();
        self.sense()?;
        loop {
            if let Some(t) = self.out_of_budget() {
                return Ok(t);
            }
            let frontiers = self.frontiers();
            let open_frontiers = frontiers.iter().any(|f| !f.visited);
            if self.cfg.mode == Mode::Ours
                && !open_frontiers
                && self.route.as_ref().is_some_and(|r| r.is_exhausted())
            {
                return Ok(Termination::RouteComplete);
            }
            let viewpoints: Vec<Viewpoint> = self.viewpoints.values().cloned().collect();
            let reach = ReachMap::new(&self.grid, self.robot.pose.position(), self.planner.clearance);
            let goal = self.goal_world();
            let here = self.robot.pose.position();
            let Some(choice) = select_next_pose(
                here,
                &frontiers,
                &viewpoints,
                goal,
                &self.planner,
                &self.grid,
                |p| reach.contains(p),
            ) else {
                return Ok(Termination::NoCandidates);
            };
            self.steps += 1;
            let (target, heading, instance) = match choice.kind {
                CandidateKind::Frontier => (frontiers[choice.index].position, None, None),
                CandidateKind::Viewpoint => {
                    let v = &viewpoints[choice.index];
                    (v.position, Some(v.heading), Some(v.instance))
                }
            };
            self.log.push(
                self.robot.clock,
                EventData::Decision {
                    kind: choice.kind,
                    index: choice.index,
                    x: target.x,
                    y: target.y,
                    utility: choice.utility,
                    instance,
                },
            );
            let Some(path) = reach.plan(here, target) else {
                self.mark_visited(target, instance);
                continue;
            };
            match self.follow(path, target, instance)? {
                Stop::Interrupted => continue,
                Stop::Arrived => {}
            }
            self.mark_visited(target, instance);
            if let Some(h) = heading {
                self.robot = turn_to(&self.robot, h, self.cfg.motion.v_angular);
                self.log_pose();
            }
            self.sense()?;
        }
    }

    fn mark_visited(&mut self, target: Vec2, instance: Option<u64>) {
        match instance {
            Some(id) => {
                if let Some(vp) = self.viewpoints.get_mut(&id) {
                    vp.visited = true;
                }
            }
            None => self.visited_targets.push(target),
        }
    }

    /// Whether the current target is still worth driving to.
    fn target_alive(&self, target: Vec2, instance: Option<u64>) -> bool {
        match instance {
            Some(id) => self.viewpoints.get(&id).is_some_and(|v| !v.visited),
            None => {
                let (r, c) = self.grid.cell_of(target);
                is_frontier_cell(&self.grid, r, c)
            }
        }
    }

    /// Drive toward `target` in pieces of at most `perception_step`, sensing
    /// after each piece. The path is replanned every `replan_period` pieces
    /// and whenever newly mapped walls block it. Stops early when the
    /// target disappears, becomes unreachable or a budget runs out.
    fn follow(&mut self, path: PlannedPath, target: Vec2, instance: Option<u64>) -> Result<Stop> {
        let motion = self.cfg.motion;
        let mut pieces = split_path(&path.waypoints, motion.perception_step);
        let mut k = 0;
        let mut since_plan = 0;
        while k < pieces.len() {
            let p = pieces[k];
            self.robot = advance(&self.robot, &[p], motion.v_linear, motion.v_angular);
            self.log_pose();
            self.sense()?;
            self.steps += 1;
            since_plan += 1;
            k += 1;
            if k == pieces.len() {
                break;
            }
            if self.out_of_budget().is_some() || !self.target_alive(target, instance) {
                return Ok(Stop::Interrupted);
            }
            let trav = Traversability::new(&self.grid, 0);
            let blocked = std::iter::once(self.robot.pose.position())
                .chain(pieces[k..].iter().copied())
                .collect::<Vec<_>>()
                .windows(2)
                .any(|w| !trav.segment_clear(w[0], w[1]));
            let periodic = self.planner.replan_period > 0 && since_plan >= self.planner.replan_period;
            if blocked || periodic {
                let reach = ReachMap::new(&self.grid, self.robot.pose.position(), self.planner.clearance);
                let Some(path) = reach.plan(self.robot.pose.position(), target) else {
                    self.mark_visited(target, instance);
                    return Ok(Stop::Interrupted);
                };
                pieces = split_path(&path.waypoints, motion.perception_step);
                k = 0;
                since_plan = 0;
            }
        }
        Ok(Stop::Arrived)
    }

    fn metrics(&self) -> RunMetrics {
        let total = self.world.signage.iter().filter(|s| !s.is_distractor).count();
        let mut covered: BTreeMap<usize, f64> = BTreeMap::new();
        let mut errors = 0;
        for st in self.labels.values() {
            if st.correct {
                let s = st.sign.expect("correct implies a source");
                let t = covered.entry(s).or_insert(f64::INFINITY);
                *t = t.min(st.since);
            } else if st.label.is_some() {
                errors += 1;
            }
        }
        let last = covered.values().copied().fold(0.0, f64::max);
        let sim_time_total = self.log.events.last().map_or(0.0, |e| e.t);
        let n = covered.len();
        RunMetrics {
            covered: n,
            total_signage: total,
            sim_time_to_last_coverage: last,
            sim_time_total,
            time_per_signage: (n > 0).then(|| sim_time_total / n as f64),
            path_length: self.path_length,
            recognition_errors: errors,
            transform: self.transform.as_ref().map(|t| t.summary()),
        }
    }
}

/// Resample a polyline so that consecutive points are at most `step` apart.
/// The first point (the current position) is dropped.
fn split_path(waypoints: &[Vec2], step: f64) -> Vec<Vec2> {
    let mut out = Vec::new();
    for w in waypoints.windows(2) {
        let len = w[0].distance(w[1]);
        let n = (len / step).ceil().max(1.0) as usize;
        for i in 1..=n {
            out.push(w[0] + (w[1] - w[0]) * (i as f64 / n as f64));
        }
    }
    if out.is_empty() {
        if let Some(&p) = waypoints.first() {
            out.push(p);
        }
    }
    out
}

/// Run the signage-aware exploration loop on `world` until no candidate
/// remains, the landmark route is complete with no frontier left, or a
/// budget is exhausted.
pub fn explore(world: &WorldSpec, vm: &VenueMap, cfg: &ExploreConfig) -> Result<ExploreOutcome> {
    let mut ex = Explorer::new(world, vm, cfg)?;
    let termination = ex.run()?;
    let metrics = ex.metrics();
    Ok(ExploreOutcome {
        signage_map: ex.bank,
        log: ex.log,
        metrics,
        termination,
        grid: ex.grid,
        transform: ex.transform,
        route: ex.route,
    })
}
