//! Batch experiments: scenario files, seeded trials, metrics, ablations and
//! per-trial artifacts.

mod metrics;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use metrics::{aggregate, reduce_log, RunMetrics, Stat, Summary};
pub use svg::{export_trajectory_svg, render_trajectory_svg};

use crate::batch::map_trials;
use crate::planner::{explore, ExploreConfig, ExploreOutcome, Mode};
use crate::venue_map::VenueMap;
use crate::world::{Pose, WorldSpec};
use crate::{Error, Result};

/// A scenario file. Paths are relative to the file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub world: PathBuf,
    pub venue_map: PathBuf,
    /// Overrides the world's start pose.
    #[serde(default)]
    pub start: Option<Pose>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Explicit per-trial seeds; overrides `base_seed`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(flatten)]
    pub explore: ExploreConfig,
}

fn one() -> usize {
    1
}

/// A scenario with its world and venue map loaded.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub world: WorldSpec,
    pub venue_map: VenueMap,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("scenario", e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.trials {
                return Err(Error::Config(format!(
                    "{} seeds given for {} trials",
                    seeds.len(),
                    self.trials
                )));
            }
        }
        self.explore.validate()
    }

    /// Seed of trial `i`: the explicit list entry, else `base_seed + i`.
    pub fn trial_seed(&self, i: usize) -> u64 {
        match &self.seeds {
            Some(s) => s[i],
            None => self.base_seed.wrapping_add(i as u64),
        }
    }
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = ScenarioConfig::from_json(&text).map_err(|e| match e {
            Error::Parse { source, .. } => Error::parse(path.display().to_string(), source),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let world = WorldSpec::load(base.join(&config.world))?;
        let venue_map = VenueMap::load(base.join(&config.venue_map))?;
        Scenario::new(config, world, venue_map)
    }

    pub fn new(config: ScenarioConfig, world: WorldSpec, venue_map: VenueMap) -> Result<Self> {
        config.validate()?;
        let world = match config.start {
            Some(p) => world.with_start(p)?,
            None => world,
        };
        world.check_labels(&venue_map)?;
        Ok(Scenario {
            config,
            world,
            venue_map,
        })
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.config.explore.mode = mode;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.config.explore.planner.beta = beta;
        self
    }

    pub fn with_trials(mut self, trials: usize, base_seed: u64) -> Self {
        self.config.trials = trials;
        self.config.base_seed = base_seed;
        self.config.seeds = None;
        self
    }

    /// World and configuration of trial `i`: the trial seed drives sensor
    /// noise, the feature oracle and RANSAC sampling.
    pub fn trial(&self, i: usize) -> (WorldSpec, ExploreConfig) {
        let seed = self.config.trial_seed(i);
        let mut world = self.world.clone();
        world.rng_seed = seed;
        let mut cfg = self.config.explore;
        cfg.oracle.seed = seed;
        cfg.ransac.seed = seed;
        (world, cfg)
    }

    pub fn run_trial(&self, i: usize) -> Result<ExploreOutcome> {
        let (world, cfg) = self.trial(i);
        explore(&world, &self.venue_map, &cfg)
    }
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub index: usize,
    pub seed: u64,
    pub outcome: ExploreOutcome,
}

/// Run every trial (in parallel when enabled). With `out`, writes
/// `trial_NNN/{trajectory.jsonl, trajectory.svg, signage_map.json,
/// metrics.json}` and a `summary.json`.
pub fn run_scenario(scn: &Scenario, out: Option<&Path>) -> Result<Vec<RunMetrics>> {
    let indices: Vec<usize> = (0..scn.config.trials).collect();
    let results = map_trials(&indices, |&i| -> Result<RunMetrics> {
        let outcome = scn.run_trial(i)?;
        if let Some(dir) = out {
            write_trial(scn, &dir.join(format!("trial_{i:03}")), &outcome)?;
        }
        Ok(outcome.metrics)
    });
    let metrics = results.into_iter().collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out {
        let summary = aggregate(&metrics)?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(metrics)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_trial(scn: &Scenario, dir: &Path, outcome: &ExploreOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let log_path = dir.join("trajectory.jsonl");
    fs::write(&log_path, outcome.log.to_jsonl()).map_err(|e| Error::io(&log_path, e))?;
    export_trajectory_svg(&scn.world, &outcome.log, &dir.join("trajectory.svg"))?;
    write_json(
        &dir.join("signage_map.json"),
        &outcome.signage_map.export(&scn.venue_map),
    )?;
    write_json(&dir.join("metrics.json"), &outcome.metrics)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub beta: f64,
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub rows: Vec<AblationRow>,
}

impl Ablation {
    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| beta | coverage | time per signage (s) |\n|---|---|---|\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                r.beta,
                r.summary.coverage_cell(),
                r.summary.time_cell()
            ));
        }
        out
    }
}

/// One [`run_scenario`] per beta; with `out`, each under `beta_<b>/` plus
/// `ablation.md` and `ablation.json`.
pub fn ablation_sweep(scn: &Scenario, betas: &[f64], out: Option<&Path>) -> Result<Ablation> {
    if betas.is_empty() {
        return Err(Error::Config("no beta values given".into()));
    }
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let s = scn.clone().with_beta(beta);
        s.config.validate()?;
        let dir = out.map(|d| d.join(format!("beta_{beta}")));
        let metrics = run_scenario(&s, dir.as_deref())?;
        rows.push(AblationRow {
            beta,
            summary: aggregate(&metrics)?,
        });
    }
    let ablation = Ablation { rows };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let md = dir.join("ablation.md");
        fs::write(&md, ablation.to_markdown()).map_err(|e| Error::io(&md, e))?;
        write_json(&dir.join("ablation.json"), &ablation)?;
    }
    Ok(ablation)
}

/// Every `metrics.json` below `dir`, in path order.
pub fn collect_metrics(dir: &Path) -> Result<Vec<(PathBuf, RunMetrics)>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, out)?;
            } else if p.file_name().is_some_and(|n| n == "metrics.json") {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut paths = Vec::new();
    walk(dir, &mut paths)?;
    paths
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let m = serde_json::from_str(&text).map_err(|e| Error::parse(p.display().to_string(), e))?;
            Ok((p, m))
        })
        .collect()
}

/// Aggregate table over all trial metrics under `dir`, grouped by the
/// directory that holds the trial folders.
pub fn report(dir: &Path) -> Result<String> {
    let all = collect_metrics(dir)?;
    if all.is_empty() {
        return Err(Error::validation("report", format!("no metrics.json under {}", dir.display())));
    }
    let mut groups: Vec<(String, Vec<RunMetrics>)> = Vec::new();
    for (path, m) in all {
        let group = path
            .parent()
            .and_then(Path::parent)
            .and_then(|g| g.strip_prefix(dir).ok())
            .map(|g| g.display().to_string())
            .filter(|g| !g.is_empty())
            .unwrap_or_else(|| ".".to_string());
        match groups.last_mut() {
            Some((g, v)) if *g == group => v.push(m),
            _ => groups.push((group, vec![m])),
        }
    }
    let mut out = String::from(
        "| run | trials | coverage | time per signage (s) | total time (s) | errors |\n|---|---|---|---|---|---|\n",
    );
    for (group, ms) in groups {
        let s = aggregate(&ms)?;
        out.push_str(&format!(
            "| {} | {}{} | {} | {} | {:.1} ± {:.1} | {:.2} |\n",
            group,
            s.trials,
            if s.single_trial { " (n=1)" } else { "" },
            s.coverage_cell(),
            s.time_cell(),
            s.sim_time_total.mean,
            s.sim_time_total.std,
            s.recognition_errors.mean
        ));
    }
    Ok(out)
}
