use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::alignment::TransformSummary;
use crate::world::WorldSpec;
use crate::{Error, Result};

/// Outcome of one exploration run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Distinct non-distractor signs with a correctly labeled instance at the
    /// end of the run.
    pub covered: usize,
    pub total_signage: usize,
    /// Time (s) at which the last covered sign received its final label.
    pub sim_time_to_last_coverage: f64,
    /// Time (s) at which exploration stopped.
    pub sim_time_total: f64,
    /// `sim_time_total / covered`; `None` when nothing was covered.
    pub time_per_signage: Option<f64>,
    pub path_length: f64,
    /// Live instances carrying a wrong label.
    pub recognition_errors: usize,
    pub transform: Option<TransformSummary>,
}

fn field<'a>(v: &'a Value, key: &str, line: usize) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::validation("trajectory log", format!("line {line}: missing {key:?}")))
}

fn num(v: &Value, key: &str, line: usize) -> Result<f64> {
    field(v, key, line)?
        .as_f64()
        .ok_or_else(|| Error::validation("trajectory log", format!("line {line}: {key:?} is not a number")))
}

/// Recompute [`RunMetrics`] from a trajectory log alone (plus the sign
/// count of the world). Works on raw JSON so it shares no code with the
/// exploration loop.
pub fn reduce_log(jsonl: &str, world: &WorldSpec) -> Result<RunMetrics> {
    struct Live {
        label: Option<String>,
        sign: Option<u64>,
        correct: bool,
        since: f64,
    }
    let mut live: BTreeMap<u64, Live> = BTreeMap::new();
    let mut last_pose: Option<(f64, f64)> = None;
    let mut path_length = 0.0;
    let mut t_end = 0.0;
    let mut transform = None;

    for (i, line) in jsonl.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let ev: Value =
            serde_json::from_str(line).map_err(|e| Error::parse(format!("trajectory log line {}", i + 1), e))?;
        let t = num(&ev, "t", i + 1)?;
        t_end = t;
        let kind = field(&ev, "type", i + 1)?.as_str().unwrap_or_default();
        let p = field(&ev, "payload", i + 1)?;
        match kind {
            "pose" => {
                let (x, y) = (num(p, "x", i + 1)?, num(p, "y", i + 1)?);
                if let Some((px, py)) = last_pose {
                    path_length += ((x - px).powi(2) + (y - py).powi(2)).sqrt();
                }
                last_pose = Some((x, y));
            }
            "recognition" => {
                let id = field(p, "instance", i + 1)?.as_u64().unwrap_or_default();
                if !p["merged_into"].is_null() {
                    live.remove(&id);
                    continue;
                }
                let label = p["label"].as_str().map(str::to_owned);
                let since = match live.get(&id) {
                    Some(prev) if prev.label == label => prev.since,
                    _ => t,
                };
                live.insert(
                    id,
                    Live {
                        label,
                        sign: p["sign"].as_u64(),
                        correct: p["correct"].as_bool().unwrap_or(false),
                        since,
                    },
                );
            }
            "transform" => {
                transform = Some(TransformSummary {
                    theta: num(p, "theta", i + 1)?,
                    tx: num(p, "tx", i + 1)?,
                    ty: num(p, "ty", i + 1)?,
                    alpha: num(p, "alpha", i + 1)?,
                    rms: num(p, "rms", i + 1)?,
                });
            }
            _ => {}
        }
    }

    let mut first_correct: BTreeMap<u64, f64> = BTreeMap::new();
    let mut errors = 0;
    for inst in live.values() {
        match (inst.correct, inst.sign) {
            (true, Some(s)) => {
                let e = first_correct.entry(s).or_insert(inst.since);
                *e = e.min(inst.since);
            }
            _ if inst.label.is_some() => errors += 1,
            _ => {}
        }
    }
    let covered = first_correct.len();
    Ok(RunMetrics {
        covered,
        total_signage: world.signage.iter().filter(|s| !s.is_distractor).count(),
        sim_time_to_last_coverage: first_correct.values().copied().fold(0.0, f64::max),
        sim_time_total: t_end,
        time_per_signage: (covered > 0).then(|| t_end / covered as f64),
        path_length,
        recognition_errors: errors,
        transform,
    })
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    /// `None` for an empty sample. A single value has std 0.
    pub fn of(xs: &[f64]) -> Option<Stat> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, std, n })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    /// Only one trial: every std is 0 by convention.
    pub single_trial: bool,
    pub total_signage: usize,
    pub coverage: Stat,
    /// Over trials that covered at least one sign.
    pub time_per_signage: Option<Stat>,
    /// Trials left out of `time_per_signage` because they covered nothing.
    pub zero_coverage_trials: usize,
    pub sim_time_total: Stat,
    pub sim_time_to_last_coverage: Stat,
    pub path_length: Stat,
    pub recognition_errors: Stat,
}

pub fn aggregate(metrics: &[RunMetrics]) -> Result<Summary> {
    if metrics.is_empty() {
        return Err(Error::validation("metrics", "nothing to aggregate"));
    }
    let col = |f: &dyn Fn(&RunMetrics) -> f64| -> Stat {
        Stat::of(&metrics.iter().map(f).collect::<Vec<_>>()).expect("non-empty")
    };
    let tps: Vec<f64> = metrics.iter().filter_map(|m| m.time_per_signage).collect();
    Ok(Summary {
        trials: metrics.len(),
        single_trial: metrics.len() == 1,
        total_signage: metrics.iter().map(|m| m.total_signage).max().unwrap_or(0),
        coverage: col(&|m| m.covered as f64),
        time_per_signage: Stat::of(&tps),
        zero_coverage_trials: metrics.len() - tps.len(),
        sim_time_total: col(&|m| m.sim_time_total),
        sim_time_to_last_coverage: col(&|m| m.sim_time_to_last_coverage),
        path_length: col(&|m| m.path_length),
        recognition_errors: col(&|m| m.recognition_errors as f64),
    })
}

impl Summary {
    pub fn coverage_cell(&self) -> String {
        format!(
            "{:.2} ± {:.2} / {}",
            self.coverage.mean, self.coverage.std, self.total_signage
        )
    }

    pub fn time_cell(&self) -> String {
        match self.time_per_signage {
            Some(s) if self.zero_coverage_trials > 0 => {
                format!("{:.1} ± {:.1} ({} uncovered)", s.mean, s.std, self.zero_coverage_trials)
            }
            Some(s) => format!("{:.1} ± {:.1}", s.mean, s.std),
            None => "n/a".to_string(),
        }
    }

    /// One-row markdown table.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| trials | coverage | time per signage (s) | total time (s) | path (m) | errors |\n\
             |---|---|---|---|---|---|\n",
        );
        out.push_str(&format!(
            "| {}{} | {} | {} | {:.1} ± {:.1} | {:.1} ± {:.1} | {:.2} |\n",
            self.trials,
            if self.single_trial { " (n=1)" } else { "" },
            self.coverage_cell(),
            self.time_cell(),
            self.sim_time_total.mean,
            self.sim_time_total.std,
            self.path_length.mean,
            self.path_length.std,
            self.recognition_errors.mean,
        ));
        out
    }
}
