//! JSONL trajectory logs: an optional meta line followed by one record per
//! step. Byte-identical output for identical inputs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{StepResult, Terminal};
use crate::world::{Behavior, ScenarioSpec, WorldState};

#[derive(Debug, Error)]
pub enum TrajlogError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("log contains no step records")]
    Empty,
}

/// World facts a replay needs that individual步 step records do not carry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub behavior: Behavior,
    pub seed: u64,
    pub half_extent: f64,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub obstacle_count: usize,
    pub obstacle_radius: f64,
    pub robot_radius: f64,
}

impl EpisodeMeta {
    pub fn from_scenario(s: &ScenarioSpec) -> Self {
        Self {
            behavior: s.behavior,
            seed: s.seed,
            half_extent: s.arena.half_extent,
            start: [s.start.x, s.start.y],
            goal: [s.goal.x, s.goal.y],
            obstacle_count: s.obstacle_count,
            obstacle_radius: s.obstacle_radius,
            robot_radius: s.robot_radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackCp {
    pub id: u32,
    pub p_ttc: f64,
    pub p_dto: f64,
    pub cp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackDump {
    pub id: u32,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

/// One step of a logged episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    /// x, y, heading.
    pub pose: [f64; 3],
    /// Applied (clamped) command: linear, angular.
    pub action: [f64; 2],
    pub clamped: bool,
    pub r_step: f64,
    pub r_dtg: f64,
    pub r_htg: f64,
    pub r_goal: f64,
    pub r_col: f64,
    pub r_wp: f64,
    pub total: f64,
    pub terminal: Terminal,
    pub track_cp: Vec<TrackCp>,
    pub waypoint: [f64; 2],
    pub waypoint_reached: bool,
    /// Ground-truth robot-center to nearest obstacle surface distance.
    pub min_obstacle_dist: Option<f64>,
    /// Highest time-to-collision probability over current tracks.
    pub max_p_ttc: Option<f64>,
    /// Ground-truth obstacle positions, index-aligned across the episode.
    pub obstacles: Vec<[f64; 2]>,
    /// Perception debug dump, written only when enabled.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tracks: Option<Vec<TrackDump>>,
}

impl StepRecord {
    pub fn from_step(step: u64, res: &StepResult, world: &WorldState, log_tracks: bool) -> Self {
        let info = &res.info;
        let max_p_ttc = info
            .assessments
            .iter()
            .map(|a| a.p_ttc)
            .max_by(|a, b| a.partial_cmp(b).unwrap());
        Self {
            step,
            pose: [info.robot.position.x, info.robot.position.y, info.robot.heading()],
            action: [info.applied.linear, info.applied.angular],
            clamped: info.clamped,
            r_step: res.reward.r_step,
            r_dtg: res.reward.r_dtg,
            r_htg: res.reward.r_htg,
            r_goal: res.reward.r_goal,
            r_col: res.reward.r_col,
            r_wp: res.reward.r_wp,
            total: res.reward.total(),
            terminal: res.terminal,
            track_cp: info
                .assessments
                .iter()
                .map(|a| TrackCp { id: a.track_id, p_ttc: a.p_ttc, p_dto: a.p_dto, cp: a.cp })
                .collect(),
            waypoint: [info.waypoint.x, info.waypoint.y],
            waypoint_reached: info.waypoint_reached,
            min_obstacle_dist: info.min_obstacle_surface_dist,
            max_p_ttc,
            obstacles: world.obstacles.iter().map(|o| [o.position.x, o.position.y]).collect(),
            tracks: log_tracks.then(|| {
                info.tracks
                    .iter()
                    .map(|t| TrackDump {
                        id: t.id,
                        position: [t.position.x, t.position.y],
                        velocity: [t.velocity.x, t.velocity.y],
                    })
                    .collect()
            }),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MetaLine<'a> {
    meta: std::borrow::Cow<'a, EpisodeMeta>,
}

pub fn write_episode_to(
    mut w: impl Write,
    meta: &EpisodeMeta,
    steps: &[StepRecord],
) -> Result<(), TrajlogError> {
    let head = serde_json::to_string(&MetaLine { meta: std::borrow::Cow::Borrowed(meta) })
        .expect("meta serializes");
    writeln!(w, "{head}")?;
    for s in steps {
        writeln!(w, "{}", serde_json::to_string(s).expect("step record serializes"))?;
    }
    Ok(())
}

pub fn write_episode(
    path: &Path,
    meta: &EpisodeMeta,
    steps: &[StepRecord],
) -> Result<(), TrajlogError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_episode_to(&mut w, meta, steps)?;
    w.flush()?;
    Ok(())
}

/// Read a JSONL episode log. The meta line is optional so hand-built logs
/// stay readable.
pub fn read_episode(path: &Path) -> Result<(Option<EpisodeMeta>, Vec<StepRecord>), TrajlogError> {
    let reader = BufReader::new(File::open(path)?);
    let mut meta = None;
    let mut steps = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(m) = serde_json::from_str::<MetaLine>(&line) {
                meta = Some(m.meta.into_owned());
                continue;
            }
        }
        let rec: StepRecord = serde_json::from_str(&line)
            .map_err(|source| TrajlogError::Parse { line: i + 1, source })?;
        steps.push(rec);
    }
    Ok((meta, steps))
}
