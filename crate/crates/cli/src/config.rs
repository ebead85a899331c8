//! Line-oriented run configuration: `key = value` entries under `[section]`
//! headers, `#` comments, defaults for every field, and full round-tripping.

use std::fmt::Write as _;
use std::path::PathBuf;

use rcnav_core::env::EnvConfig;
use rcnav_core::td3::Td3Config;
use rcnav_core::world::{ArenaSpec, Behavior, ScenarioSpec, MAX_LINEAR_VEL};
use rcnav_core::Vec2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Whether defaults describe a training run (2x2 arena, random crowd) or an
/// evaluation run (4x4 test arena, 20 obstacles).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Merged view of scenario, risk, environment, learner and output settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub behavior: Behavior,
    pub obstacle_count: usize,
    pub obstacle_speed: f64,
    pub arena_half_extent: f64,
    pub start: (f64, f64),
    pub goal: (f64, f64),
    pub robot_radius: f64,
    pub obstacle_radius: f64,
    pub env: EnvConfig,
    pub td3: Td3Config,
    pub out_dir: PathBuf,
    pub checkpoint_every: u64,
    pub runs_per_behavior: usize,
    pub log_tracks: bool,
    pub tracked_n_scores: bool,
}

impl RunConfig {
    pub fn defaults(mode: Mode) -> Self {
        let common = Self {
            seed: 0,
            behavior: Behavior::Random,
            obstacle_count: 20,
            obstacle_speed: MAX_LINEAR_VEL / 5.0,
            arena_half_extent: 2.0,
            start: (-1.5, 0.0),
            goal: (1.5, 0.0),
            robot_radius: rcnav_core::world::DEFAULT_ROBOT_RADIUS,
            obstacle_radius: rcnav_core::world::DEFAULT_OBSTACLE_RADIUS,
            env: EnvConfig::default(),
            td3: Td3Config::default(),
            out_dir: PathBuf::from("runs"),
            checkpoint_every: 500,
            runs_per_behavior: 10,
            log_tracks: false,
            tracked_n_scores: false,
        };
        match mode {
            Mode::Eval => common,
            Mode::Train => Self {
                behavior: Behavior::TrainingRandom,
                obstacle_count: 4,
                obstacle_speed: rcnav_core::world::TRAINING_MAX_OBSTACLE_SPEED,
                arena_half_extent: 1.0,
                start: (-0.7, 0.0),
                goal: (0.7, 0.0),
                ..common
            },
        }
    }

    /// Scenario for this config's own behavior field.
    pub fn scenario_spec(&self) -> ScenarioSpec {
        self.scenario_for(self.behavior)
    }

    pub fn scenario_for(&self, behavior: Behavior) -> ScenarioSpec {
        ScenarioSpec {
            behavior,
            obstacle_count: self.obstacle_count,
            obstacle_speed: self.obstacle_speed,
            arena: ArenaSpec::square(self.arena_half_extent),
            start: Vec2::new(self.start.0, self.start.1),
            goal: Vec2::new(self.goal.0, self.goal.1),
            seed: self.seed,
            robot_radius: self.robot_radius,
            obstacle_radius: self.obstacle_radius,
        }
    }

    /// Serialize every field; `parse_config` reads this back to an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s);
        let _ = writeln!(s, "[scenario]");
        let _ = writeln!(s, "behavior = {}", self.behavior);
        let _ = writeln!(s, "obstacle_count = {}", self.obstacle_count);
        let _ = writeln!(s, "obstacle_speed = {}", self.obstacle_speed);
        let _ = writeln!(s, "arena_half_extent = {}", self.arena_half_extent);
        let _ = writeln!(s, "start = {}, {}", self.start.0, self.start.1);
        let _ = writeln!(s, "goal = {}, {}", self.goal.0, self.goal.1);
        let _ = writeln!(s, "robot_radius = {}", self.robot_radius);
        let _ = writeln!(s, "obstacle_radius = {}", self.obstacle_radius);
        let _ = writeln!(s);
        let _ = writeln!(s, "[risk]");
        let _ = writeln!(s, "alpha = {}", self.env.risk.alpha);
        let _ = writeln!(s, "k = {}", self.env.risk.k);
        let _ = writeln!(s, "social_ttc_threshold = {}", self.env.risk.social_ttc_threshold);
        let _ = writeln!(s);
        let _ = writeln!(s, "[env]");
        let _ = writeln!(s, "lidar_sectors = {}", self.env.lidar_sectors);
        let _ = writeln!(s, "goal_tolerance = {}", self.env.goal_tolerance);
        let _ = writeln!(s, "waypoint_tolerance = {}", self.env.waypoint_tolerance);
        let _ = writeln!(s, "max_steps = {}", self.env.max_steps);
        let _ = writeln!(s, "cluster_gap = {}", self.env.perception.cluster_gap);
        let _ = writeln!(s, "wall_angle_tolerance = {}", self.env.perception.wall_max_angle_dev);
        let _ = writeln!(s, "association_gate = {}", self.env.perception.gate);
        let _ = writeln!(s, "velocity_ema = {}", self.env.perception.velocity_ema);
        let _ = writeln!(s, "track_timeout = {}", self.env.perception.max_missed);
        let _ = writeln!(s);
        let _ = writeln!(s, "[td3]");
        let _ = writeln!(s, "episodes = {}", self.td3.episodes);
        let _ = writeln!(s, "batch_size = {}", self.td3.batch_size);
        let _ = writeln!(s, "learning_rate = {}", self.td3.learning_rate);
        let _ = writeln!(s, "gamma = {}", self.td3.gamma);
        let _ = writeln!(s, "tau = {}", self.td3.tau);
        let _ = writeln!(s, "policy_delay = {}", self.td3.policy_delay);
        let _ = writeln!(s, "target_noise = {}", self.td3.target_noise);
        let _ = writeln!(s, "target_noise_clip = {}", self.td3.target_noise_clip);
        let _ = writeln!(s, "exploration_noise = {}", self.td3.exploration_noise);
        let _ = writeln!(s, "warmup_steps = {}", self.td3.warmup_steps);
        let hidden: Vec<String> = self.td3.hidden.iter().map(|h| h.to_string()).collect();
        let _ = writeln!(s, "hidden = {}", hidden.join(", "));
        let _ = writeln!(s, "checkpoint_every = {}", self.checkpoint_every);
        let _ = writeln!(s);
        let _ = writeln!(s, "[output]");
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "runs_per_behavior = {}", self.runs_per_behavior);
        let _ = writeln!(s, "log_tracks = {}", self.log_tracks);
        let _ = writeln!(s, "tracked_n_scores = {}", self.tracked_n_scores);
        s
    }
}

/// Parse configuration text onto the mode's defaults. Unknown sections or
/// keys, malformed lines and out-of-range values all fail with their line
/// number.
pub fn parse_config(text: &str, mode: Mode) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::defaults(mode);
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let err = |message: String| ConfigError { line: lineno, message };
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header '{raw}'")))?
                .trim();
            match name {
                "scenario" | "risk" | "env" | "td3" | "output" => section = name.to_string(),
                other => return Err(err(format!("unknown section '[{other}]'"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(err(format!("expected 'key = value', got '{line}'")));
        }
        apply_key(&mut cfg, &section, key, value).map_err(err)?;
    }
    // cross-field checks that only make sense on the final value
    cfg.env.risk.validate().map_err(|m| ConfigError { line: 0, message: m })?;
    cfg.td3.validate().map_err(|m| ConfigError { line: 0, message: m })?;
    Ok(cfg)
}

fn apply_key(cfg: &mut RunConfig, section: &str, key: &str, value: &str) -> Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
        value.parse::<T>().map_err(|_| format!("invalid value '{value}' for {key}"))
    }
    fn pair(key: &str, value: &str) -> Result<(f64, f64), String> {
        let (a, b) = value
            .split_once(',')
            .ok_or_else(|| format!("{key} expects 'x, y', got '{value}'"))?;
        Ok((num::<f64>(key, a.trim())?, num::<f64>(key, b.trim())?))
    }
    fn bounded(key: &str, value: &str, lo: f64, hi: f64) -> Result<f64, String> {
        let v: f64 = num(key, value)?;
        if !v.is_finite() || v < lo || v > hi {
            return Err(format!("{key} must be in [{lo}, {hi}], got {value}"));
        }
        Ok(v)
    }
    fn positive(key: &str, value: &str) -> Result<f64, String> {
        let v: f64 = num(key, value)?;
        if !v.is_finite() || v <= 0.0 {
            return Err(format!("{key} must be positive, got {value}"));
        }
        Ok(v)
    }

    match (section, key) {
        ("", "seed") => {
            cfg.seed = num(key, value)?;
            cfg.td3.seed = cfg.seed;
        }
        ("scenario", "behavior") => cfg.behavior = value.parse::<Behavior>()?,
        ("scenario", "obstacle_count") => cfg.obstacle_count = num(key, value)?,
        ("scenario", "obstacle_speed") => cfg.obstacle_speed = bounded(key, value, 0.0, 10.0)?,
        ("scenario", "arena_half_extent") => cfg.arena_half_extent = positive(key, value)?,
        ("scenario", "start") => cfg.start = pair(key, value)?,
        ("scenario", "goal") => cfg.goal = pair(key, value)?,
        ("scenario", "robot_radius") => cfg.robot_radius = positive(key, value)?,
        ("scenario", "obstacle_radius") => cfg.obstacle_radius = positive(key, value)?,
        ("risk", "alpha") => cfg.env.risk.alpha = bounded(key, value, 0.0, 1.0)?,
        ("risk", "k") => cfg.env.risk.k = num(key, value)?,
        ("risk", "social_ttc_threshold") => {
            cfg.env.risk.social_ttc_threshold = bounded(key, value, 0.0, 1.0)?
        }
        ("env", "lidar_sectors") => {
            let v: usize = num(key, value)?;
            if v == 0 || 360 % v != 0 {
                return Err(format!("lidar_sectors must divide 360, got {value}"));
            }
            cfg.env.lidar_sectors = v;
        }
        ("env", "goal_tolerance") => cfg.env.goal_tolerance = positive(key, value)?,
        ("env", "waypoint_tolerance") => cfg.env.waypoint_tolerance = positive(key, value)?,
        ("env", "max_steps") => cfg.env.max_steps = num(key, value)?,
        ("env", "cluster_gap") => cfg.env.perception.cluster_gap = positive(key, value)?,
        ("env", "wall_angle_tolerance") => {
            cfg.env.perception.wall_max_angle_dev = positive(key, value)?
        }
        ("env", "association_gate") => cfg.env.perception.gate = positive(key, value)?,
        ("env", "velocity_ema") => cfg.env.perception.velocity_ema = bounded(key, value, 0.0, 1.0)?,
        ("env", "track_timeout") => cfg.env.perception.max_missed = num(key, value)?,
        ("td3", "episodes") => cfg.td3.episodes = num(key, value)?,
        ("td3", "batch_size") => cfg.td3.batch_size = num(key, value)?,
        ("td3", "learning_rate") => cfg.td3.learning_rate = positive(key, value)?,
        ("td3", "gamma") => cfg.td3.gamma = bounded(key, value, 0.0, 1.0)? as f32,
        ("td3", "tau") => cfg.td3.tau = bounded(key, value, 0.0, 1.0)? as f32,
        ("td3", "policy_delay") => cfg.td3.policy_delay = num(key, value)?,
        ("td3", "target_noise") => cfg.td3.target_noise = bounded(key, value, 0.0, 10.0)? as f32,
        ("td3", "target_noise_clip") => {
            cfg.td3.target_noise_clip = bounded(key, value, 0.0, 10.0)? as f32
        }
        ("td3", "exploration_noise") => {
            cfg.td3.exploration_noise = bounded(key, value, 0.0, 10.0)? as f32
        }
        ("td3", "warmup_steps") => cfg.td3.warmup_steps = num(key, value)?,
        ("td3", "hidden") => {
            let dims: Result<Vec<usize>, String> =
                value.split(',').map(|p| num::<usize>(key, p.trim())).collect();
            let dims = dims?;
            if dims.is_empty() || dims.contains(&0) {
                return Err(format!("hidden must list non-zero layer widths, got '{value}'"));
            }
            cfg.td3.hidden = dims;
        }
        ("td3", "checkpoint_every") => cfg.checkpoint_every = num(key, value)?,
        ("output", "out_dir") => cfg.out_dir = PathBuf::from(value),
        ("output", "runs_per_behavior") => {
            let v: usize = num(key, value)?;
            if v == 0 {
                return Err("runs_per_behavior must be >= 1".into());
            }
            cfg.runs_per_behavior = v;
        }
        ("output", "log_tracks") => cfg.log_tracks = num(key, value)?,
        ("output", "tracked_n_scores") => cfg.tracked_n_scores = num(key, value)?,
        ("", other) => return Err(format!("unknown key '{other}' (missing section header?)")),
        (section, other) => return Err(format!("unknown key '{other}' in section [{section}]")),
    }
    Ok(())
}
