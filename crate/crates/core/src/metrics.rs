//! Episode scoring and suite evaluation: success rate, arrival time, ego
//! score, social score; batch evaluation over the crowd behaviors.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{CrowdNavEnv, EnvConfig, EnvError, Terminal};
use crate::policy::{NavPolicy, PolicyError};
use crate::seeding::derive_seed;
use crate::trajlog::{EpisodeMeta, StepRecord};
use crate::world::{ScenarioSpec, DT};

/// Largest width of the robot base (m); the ego radius derives from it.
pub const EGO_BASE_WIDTH: f64 = 0.178;
/// Ego radius as a fraction of the largest base width.
pub const EGO_RADIUS_RATIO: f64 = 0.787;

pub fn default_ego_radius() -> f64 {
    EGO_RADIUS_RATIO * EGO_BASE_WIDTH
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Goal,
    Collision,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub meta: EpisodeMeta,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    /// `step_count * 0.15 s` when the outcome is `Goal`.
    pub arrival_time: Option<f64>,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("episode has zero steps")]
    EmptyEpisode,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// An obstacle surface intrudes into the robot's ego radius.
pub fn ego_violation(rec: &StepRecord, ego_radius: f64) -> bool {
    rec.min_obstacle_dist.map_or(false, |d| d < ego_radius)
}

/// Any track's time-to-collision probability exceeds the threshold
/// (strictly).
pub fn social_violation(rec: &StepRecord, threshold: f64) -> bool {
    rec.max_p_ttc.map_or(false, |p| p > threshold)
}

/// `Ego = (1 - k/N) * 100`, `Social = (1 - m/N) * 100` with `N` the total
/// step count of the episode.
pub fn score_episode(
    log: &EpisodeLog,
    ego_radius: f64,
    social_threshold: f64,
) -> Result<(f64, f64), MetricsError> {
    let n = log.steps.len();
    if n == 0 {
        return Err(MetricsError::EmptyEpisode);
    }
    let k = log.steps.iter().filter(|s| ego_violation(s, ego_radius)).count();
    let m = log.steps.iter().filter(|s| social_violation(s, social_threshold)).count();
    Ok(((1.0 - k as f64 / n as f64) * 100.0, (1.0 - m as f64 / n as f64) * 100.0))
}

/// Alternative scores with `N` counted only over steps that had at least one
/// tracked obstacle; 100 when no step ever saw one. Scores clamp at 0.
pub fn score_episode_tracked_n(
    log: &EpisodeLog,
    ego_radius: f64,
    social_threshold: f64,
) -> (f64, f64) {
    let n = log.steps.iter().filter(|s| !s.track_cp.is_empty()).count();
    if n == 0 {
        return (100.0, 100.0);
    }
    let k = log.steps.iter().filter(|s| ego_violation(s, ego_radius)).count();
    let m = log.steps.iter().filter(|s| social_violation(s, social_threshold)).count();
    (
        ((1.0 - k as f64 / n as f64) * 100.0).max(0.0),
        ((1.0 - m as f64 / n as f64) * 100.0).max(0.0),
    )
}

/// Play one episode of `scenario` under `policy` and log every step.
pub fn run_episode(
    scenario: &ScenarioSpec,
    env_cfg: &EnvConfig,
    policy: &mut dyn NavPolicy,
    log_tracks: bool,
) -> Result<EpisodeLog, MetricsError> {
    let mut env = CrowdNavEnv::new(scenario.clone(), env_cfg.clone())?;
    policy.check_env(env.observation_len(), env_cfg.lidar_sectors)?;
    policy.begin_episode();
    let mut res = env.reset()?;
    let mut steps = Vec::new();
    loop {
        let cmd = policy.act(&res.observation, &res.info);
        res = env.step(cmd)?;
        steps.push(StepRecord::from_step(env.world().step_count, &res, env.world(), log_tracks));
        if res.terminal != Terminal::Running {
            break;
        }
    }
    let outcome = match res.terminal {
        Terminal::Goal => Outcome::Goal,
        Terminal::Collision => Outcome::Collision,
        _ => Outcome::Timeout,
    };
    let arrival_time =
        (outcome == Outcome::Goal).then(|| env.world().step_count as f64 * DT);
    Ok(EpisodeLog {
        meta: EpisodeMeta::from_scenario(env.scenario()),
        steps,
        outcome,
        arrival_time,
    })
}

/// Per-behavior aggregate over the evaluation runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreReport {
    pub behavior: String,
    pub obstacles: usize,
    pub runs: usize,
    /// Percent of runs reaching the goal.
    pub success_rate: f64,
    /// Mean over successful runs; `None` when every run failed.
    pub mean_arrival_time: Option<f64>,
    pub ego_score: f64,
    pub social_score: f64,
    /// Mean of ego and social scores.
    pub overall: f64,
    /// Scores with N restricted to steps that saw a tracked obstacle.
    pub ego_score_tracked_n: f64,
    pub social_score_tracked_n: f64,
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub runs_per_behavior: usize,
    pub suite_seed: u64,
    pub env: EnvConfig,
    pub ego_radius: f64,
    pub log_tracks: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            runs_per_behavior: 10,
            suite_seed: 0,
            env: EnvConfig::default(),
            ego_radius: default_ego_radius(),
            log_tracks: false,
        }
    }
}

pub struct SuiteResult {
    pub reports: Vec<ScoreReport>,
    /// Episode logs per behavior, aligned with `reports`.
    pub episodes: Vec<Vec<EpisodeLog>>,
}

/// Evaluate `policy` over every behavior scenario, `runs_per_behavior` times
/// each, with per-run seeds derived from the suite seed. Sequential and
/// deterministic; reports are ordered by behavior.
pub fn evaluate_suite(
    policy: &mut dyn NavPolicy,
    behaviors: &[ScenarioSpec],
    cfg: &SuiteConfig,
) -> Result<SuiteResult, MetricsError> {
    assert!(cfg.runs_per_behavior > 0);
    let mut reports = Vec::with_capacity(behaviors.len());
    let mut episodes = Vec::with_capacity(behaviors.len());
    for (b_idx, base) in behaviors.iter().enumerate() {
        let mut logs = Vec::with_capacity(cfg.runs_per_behavior);
        for run in 0..cfg.runs_per_behavior {
            let seed = derive_seed(cfg.suite_seed, b_idx as u64, run as u64);
            let scenario = base.clone().with_seed(seed);
            logs.push(run_episode(&scenario, &cfg.env, policy, cfg.log_tracks)?);
        }
        reports.push(aggregate(base, &logs, cfg)?);
        episodes.push(logs);
    }
    Ok(SuiteResult { reports, episodes })
}

fn aggregate(
    base: &ScenarioSpec,
    logs: &[EpisodeLog],
    cfg: &SuiteConfig,
) -> Result<ScoreReport, MetricsError> {
    let runs = logs.len();
    let goals = logs.iter().filter(|l| l.outcome == Outcome::Goal).count();
    let arrivals: Vec<f64> = logs.iter().filter_map(|l| l.arrival_time).collect();
    let mut ego_sum = 0.0;
    let mut social_sum = 0.0;
    let mut ego_alt_sum = 0.0;
    let mut social_alt_sum = 0.0;
    let social_threshold = cfg.env.risk.social_ttc_threshold;
    for log in logs {
        let (e, s) = score_episode(log, cfg.ego_radius, social_threshold)?;
        ego_sum += e;
        social_sum += s;
        let (ea, sa) = score_episode_tracked_n(log, cfg.ego_radius, social_threshold);
        ego_alt_sum += ea;
        social_alt_sum += sa;
    }
    let n = runs as f64;
    let ego_score = ego_sum / n;
    let social_score = social_sum / n;
    Ok(ScoreReport {
        behavior: base.behavior.name().to_string(),
        obstacles: base.obstacle_count,
        runs,
        success_rate: goals as f64 / n * 100.0,
        mean_arrival_time: (!arrivals.is_empty())
            .then(|| arrivals.iter().sum::<f64>() / arrivals.len() as f64),
        ego_score,
        social_score,
        overall: (ego_score + social_score) / 2.0,
        ego_score_tracked_n: ego_alt_sum / n,
        social_score_tracked_n: social_alt_sum / n,
    })
}

/// CSV report: one row per behavior. `tracked_n_columns` appends the
/// alternative-N score columns.
pub fn write_csv(
    reports: &[ScoreReport],
    tracked_n_columns: bool,
    mut w: impl Write,
) -> std::io::Result<()> {
    write!(w, "behavior,obstacles,runs,success_rate,mean_arrival_s,ego,social,overall")?;
    if tracked_n_columns {
        write!(w, ",ego_tracked_n,social_tracked_n")?;
    }
    writeln!(w)?;
    for r in reports {
        let arrival = match r.mean_arrival_time {
            Some(t) => format!("{t:.2}"),
            None => "nan".to_string(),
        };
        write!(
            w,
            "{},{},{},{:.1},{},{:.2},{:.2},{:.2}",
            r.behavior, r.obstacles, r.runs, r.success_rate, arrival, r.ego_score,
            r.social_score, r.overall
        )?;
        if tracked_n_columns {
            write!(w, ",{:.2},{:.2}", r.ego_score_tracked_n, r.social_score_tracked_n)?;
        }
        writeln!(w)?;
    }
    Ok(())
}
