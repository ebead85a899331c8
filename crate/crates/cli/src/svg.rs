//! SVG rendering of logged episodes: arena, robot path, obstacle paths,
//! start/goal and reached-waypoint markers. Output is deterministic byte for
//! byte.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use rcnav_core::trajlog::{EpisodeMeta, StepRecord};

const SCALE: f64 = 120.0; // px per meter
const MARGIN: f64 = 0.25; // meters around the arena

#[derive(Clone, Debug)]
pub struct ReplayWorld {
    pub half_extent: f64,
    pub start: Option<[f64; 2]>,
    pub goal: Option<[f64; 2]>,
    pub obstacle_radius: f64,
    pub robot_radius: f64,
}

impl ReplayWorld {
    pub fn from_meta(meta: &EpisodeMeta) -> Self {
        Self {
            half_extent: meta.half_extent,
            start: Some(meta.start),
            goal: Some(meta.goal),
            obstacle_radius: meta.obstacle_radius,
            robot_radius: meta.robot_radius,
        }
    }

    /// Fallback when a log has no meta line: bound the arena by the data.
    pub fn from_steps(steps: &[StepRecord]) -> Self {
        let mut extent = 1.0f64;
        for s in steps {
            extent = extent.max(s.pose[0].abs()).max(s.pose[1].abs());
            for o in &s.obstacles {
                extent = extent.max(o[0].abs()).max(o[1].abs());
            }
        }
        Self {
            half_extent: extent + 0.1,
            start: None,
            goal: None,
            obstacle_radius: 0.1,
            robot_radius: 0.089,
        }
    }
}

/// Render one episode log. Fails on an empty log.
pub fn render_svg(world: &ReplayWorld, steps: &[StepRecord]) -> Result<String> {
    if steps.is_empty() {
        bail!("cannot render an empty episode log");
    }
    let h = world.half_extent;
    let side = (2.0 * (h + MARGIN)) * SCALE;
    let px = |x: f64| (x + h + MARGIN) * SCALE;
    let py = |y: f64| (h + MARGIN - y) * SCALE;
    let fmt = |v: f64| format!("{v:.2}");

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {side:.2} {side:.2}" width="{side:.2}" height="{side:.2}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect class="arena" x="{x}" y="{y}" width="{w}" height="{w}" fill="none" stroke="black" stroke-width="2"/>"##,
        x = fmt(px(-h)),
        y = fmt(py(h)),
        w = fmt(2.0 * h * SCALE),
    );

    // obstacle paths, index-aligned across steps
    let obstacle_count = steps[0].obstacles.len();
    for j in 0..obstacle_count {
        let pts: Vec<String> = steps
            .iter()
            .filter_map(|s| s.obstacles.get(j))
            .map(|o| format!("{},{}", fmt(px(o[0])), fmt(py(o[1]))))
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline class="obstacle-path" points="{}" fill="none" stroke="#d08080" stroke-width="1"/>"##,
            pts.join(" ")
        );
        if let Some(last) = steps.last().and_then(|s| s.obstacles.get(j)) {
            let _ = writeln!(
                svg,
                r##"<circle class="obstacle-end" cx="{}" cy="{}" r="{}" fill="#d08080" fill-opacity="0.5"/>"##,
                fmt(px(last[0])),
                fmt(py(last[1])),
                fmt(world.obstacle_radius * SCALE),
            );
        }
    }

    // robot path and per-step position markers
    let pts: Vec<String> =
        steps.iter().map(|s| format!("{},{}", fmt(px(s.pose[0])), fmt(py(s.pose[1])))).collect();
    let _ = writeln!(
        svg,
        r##"<polyline class="robot-path" points="{}" fill="none" stroke="#3060c0" stroke-width="2"/>"##,
        pts.join(" ")
    );
    for s in steps {
        let _ = writeln!(
            svg,
            r##"<circle class="robot-pos" cx="{}" cy="{}" r="2.00" fill="#3060c0" fill-opacity="0.35"/>"##,
            fmt(px(s.pose[0])),
            fmt(py(s.pose[1])),
        );
    }

    if let Some(start) = world.start {
        let _ = writeln!(
            svg,
            r##"<circle class="start" cx="{}" cy="{}" r="5.00" fill="#208020"/>"##,
            fmt(px(start[0])),
            fmt(py(start[1])),
        );
    }
    if let Some(goal) = world.goal {
        let _ = writeln!(
            svg,
            r##"<circle class="goal" cx="{}" cy="{}" r="5.00" fill="none" stroke="#208020" stroke-width="2"/>"##,
            fmt(px(goal[0])),
            fmt(py(goal[1])),
        );
    }

    // one marker per reached waypoint
    for s in steps.iter().filter(|s| s.waypoint_reached) {
        let _ = writeln!(
            svg,
            r##"<circle class="waypoint" cx="{}" cy="{}" r="3.00" fill="#c0a020"/>"##,
            fmt(px(s.waypoint[0])),
            fmt(py(s.waypoint[1])),
        );
    }

    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rcnav_core::env::Terminal;

    fn record(step: u64, x: f64, obstacles: usize, waypoint_reached: bool) -> StepRecord {
        StepRecord {
            step,
            pose: [x, 0.0, 0.0],
            action: [0.22, 0.0],
            clamped: false,
            r_step: -2.0,
            r_dtg: 1.0,
            r_htg: 0.0,
            r_goal: 0.0,
            r_col: 0.0,
            r_wp: if waypoint_reached { 200.0 } else { 0.0 },
            total: 0.0,
            terminal: Terminal::Running,
            track_cp: Vec::new(),
            waypoint: [x + 0.6, 0.0],
            waypoint_reached,
            min_obstacle_dist: None,
            max_p_ttc: None,
            obstacles: (0..obstacles).map(|j| [j as f64 * 0.1, 1.0]).collect(),
            tracks: None,
        }
    }

    fn world() -> ReplayWorld {
        ReplayWorld {
            half_extent: 2.0,
            start: Some([-1.5, 0.0]),
            goal: Some([1.5, 0.0]),
            obstacle_radius: 0.1,
            robot_radius: 0.089,
        }
    }

    #[test]
    fn one_step_log_has_one_robot_marker() {
        let svg = render_svg(&world(), &[record(1, 0.0, 0, false)]).unwrap();
        assert_eq!(svg.matches(r#"class="robot-pos""#).count(), 1);
    }

    #[test]
    fn rendering_is_deterministic() {
        let steps: Vec<StepRecord> = (0..10).map(|i| record(i, i as f64 * 0.03, 3, false)).collect();
        let a = render_svg(&world(), &steps).unwrap();
        let b = render_svg(&world(), &steps).unwrap();
        assert_eq!(a.into_bytes(), b.into_bytes());
    }

    #[test]
    fn marker_and_polyline_counts() {
        let mut steps: Vec<StepRecord> =
            (0..20).map(|i| record(i, i as f64 * 0.05, 20, false)).collect();
        steps[4].waypoint_reached = true;
        steps[9].waypoint_reached = true;
        steps[15].waypoint_reached = true;
        let svg = render_svg(&world(), &steps).unwrap();
        assert_eq!(svg.matches(r#"class="obstacle-path""#).count(), 20);
        assert_eq!(svg.matches(r#"class="robot-path""#).count(), 1);
        assert_eq!(svg.matches(r#"class="waypoint""#).count(), 3);
        assert_eq!(svg.matches(r#"class="start""#).count(), 1);
        assert_eq!(svg.matches(r#"class="goal""#).count(), 1);
    }

    #[test]
    fn empty_log_is_rejected() {
        assert!(render_svg(&world(), &[]).is_err());
    }
}
