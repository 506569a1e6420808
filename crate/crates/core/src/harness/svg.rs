use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::planner::{CandidateKind, EventData, TrajectoryLog};
use crate::world::WorldSpec;
use crate::{Error, Result};

const PX_PER_M: f64 = 10.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Render walls, the driven polyline, decision markers, final sign labels
/// and the start marker. Output depends only on the inputs.
pub fn render_trajectory_svg(world: &WorldSpec, log: &TrajectoryLog) -> String {
    let s = PX_PER_M;
    let res = world.resolution * s;
    let (w, h) = (world.width() * s, world.height() * s);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    out.push_str(r##"<g fill="#444444">"##);
    out.push('\n');
    for r in 0..world.rows as i64 {
        let mut c = 0i64;
        while c < world.cols as i64 {
            if !world.is_wall(r, c) {
                c += 1;
                continue;
            }
            let start = c;
            while c < world.cols as i64 && world.is_wall(r, c) {
                c += 1;
            }
            let _ = writeln!(
                out,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}"/>"#,
                start as f64 * res,
                r as f64 * res,
                (c - start) as f64 * res,
                res
            );
        }
    }
    out.push_str("</g>\n");

    for sign in &world.signage {
        let color = if sign.is_distractor { "#999999" } else { "#d08000" };
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="4" height="4" fill="{color}"/>"#,
            sign.anchor.x * s - 2.0,
            sign.anchor.y * s - 2.0
        );
    }

    let poses: Vec<_> = log.poses().collect();
    if poses.len() > 1 {
        let pts: Vec<String> = poses
            .iter()
            .map(|(_, p, _)| format!("{:.2},{:.2}", p.x * s, p.y * s))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="#1060c0" stroke-width="1.5" points="{}"/>"##,
            pts.join(" ")
        );
    }

    let mut labels: BTreeMap<u64, (f64, f64, String)> = BTreeMap::new();
    for ev in &log.events {
        match &ev.data {
            EventData::Decision { kind, x, y, .. } => {
                let (cx, cy) = (x * s, y * s);
                match kind {
                    CandidateKind::Frontier => {
                        let _ = writeln!(
                            out,
                            r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5" fill="none" stroke="#20a040"/>"##
                        );
                    }
                    CandidateKind::Viewpoint => {
                        let _ = writeln!(
                            out,
                            r##"<rect x="{:.2}" y="{:.2}" width="5" height="5" fill="none" stroke="#c02060"/>"##,
                            cx - 2.5,
                            cy - 2.5
                        );
                    }
                }
            }
            EventData::Recognition {
                instance,
                label,
                merged_into,
                x,
                y,
                ..
            } => match (merged_into, label) {
                (None, Some(l)) => {
                    labels.insert(*instance, (*x, *y, l.clone()));
                }
                _ => {
                    labels.remove(instance);
                }
            },
            _ => {}
        }
    }
    for (x, y, l) in labels.values() {
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="9" fill="#202020">{}</text>"##,
            x * s + 3.0,
            y * s - 3.0,
            esc(l)
        );
    }

    let start = poses
        .first()
        .map_or(world.robot_start.position(), |(_, p, _)| *p);
    let _ = writeln!(
        out,
        r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#e02020"/>"##,
        start.x * s,
        start.y * s
    );
    out.push_str("</svg>\n");
    out
}

pub fn export_trajectory_svg(world: &WorldSpec, log: &TrajectoryLog, out: &Path) -> Result<()> {
    std::fs::write(out, render_trajectory_svg(world, log)).map_err(|e| Error::io(out, e))
}
