//! Episodic navigation environment: builds the observation
//! `[laser, goal, agent, critical-obstacles]`, manages local waypoints,
//! computes the six-term reward and steps the world.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{circle_segment_point, wrap_angle};
use crate::perception::{
    classify_cluster, cluster_points, scan_to_points, ClusterKind, PerceptionConfig, Track,
    Tracker,
};
use crate::risk::{assess_tracks, select_critical, CriticalRecord, RiskAssessment, RiskConfig};
use crate::world::{
    detect_collision, reset_scenario, simulate_lidar, step_obstacles, step_robot, Command,
    RobotState, ScanFrame, ScenarioSpec, WorldError, WorldState, DT, LIDAR_BEAMS, LIDAR_MAX_RANGE,
};
use crate::{Pose, Vec2};

/// Radius of the waypoint circle around the robot: the maximum laser range.
pub const WAYPOINT_RADIUS: f64 = LIDAR_MAX_RANGE;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode already terminated; call reset")]
    EpisodeOver,
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub risk: RiskConfig,
    pub perception: PerceptionConfig,
    /// Number of lidar sectors in the observation (must divide 360).
    pub lidar_sectors: usize,
    pub goal_tolerance: f64,
    pub waypoint_tolerance: f64,
    /// Episode step cap; hitting it terminates with `Timeout`.
    pub max_steps: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            risk: RiskConfig::default(),
            perception: PerceptionConfig::default(),
            lidar_sectors: 36,
            goal_tolerance: 0.1,
            waypoint_tolerance: 0.05,
            max_steps: 500,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.risk.validate().map_err(EnvError::InvalidConfig)?;
        if self.lidar_sectors == 0 || LIDAR_BEAMS % self.lidar_sectors != 0 {
            return Err(EnvError::InvalidConfig(format!(
                "lidar_sectors must divide {LIDAR_BEAMS}, got {}",
                self.lidar_sectors
            )));
        }
        if self.goal_tolerance <= 0.0 || self.waypoint_tolerance <= 0.0 {
            return Err(EnvError::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Flattened observation length for this config.
    pub fn observation_len(&self) -> usize {
        self.lidar_sectors + 2 + 4 + 4 * self.risk.k
    }
}

/// Flattened DRL observation.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationVector {
    /// Per-sector minimum range divided by the maximum range; entries in [0, 1].
    pub laser: Vec<f64>,
    /// Distance to goal (m).
    pub dtg: f64,
    /// Heading-to-goal error (rad, wrapped).
    pub htg: f64,
    /// Robot position (m, m) and velocities (m/s, rad/s).
    pub agent: [f64; 4],
    /// K critical-obstacle records (zero-padded).
    pub critical: Vec<CriticalRecord>,
}

impl ObservationVector {
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.laser.len() + 2 + 4 + 4 * self.critical.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.laser);
        out.push(self.dtg);
        out.push(self.htg);
        out.extend_from_slice(&self.agent);
        for c in &self.critical {
            out.extend_from_slice(&[c.position.x, c.position.y, c.velocity.x, c.velocity.y]);
        }
        out
    }

    pub fn flatten_f32(&self) -> Vec<f32> {
        self.flatten().into_iter().map(|v| v as f32).collect()
    }
}

/// Current local waypoint; recomputed only when reached (or at episode start).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct WaypointState {
    pub current: Vec2,
    pub reached_count: u32,
    pub reach_tolerance: f64,
}

/// The six reward terms of one step.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_step: f64,
    pub r_dtg: f64,
    pub r_htg: f64,
    pub r_goal: f64,
    pub r_col: f64,
    pub r_wp: f64,
}

impl RewardBreakdown {
    pub fn zero() -> Self {
        Self { r_step: 0.0, r_dtg: 0.0, r_htg: 0.0, r_goal: 0.0, r_col: 0.0, r_wp: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.r_step + self.r_dtg + self.r_htg + self.r_goal + self.r_col + self.r_wp
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terminal {
    Running,
    Goal,
    Collision,
    Timeout,
}

/// Goal-progress snapshot used by the reward comparison terms.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Progress {
    pub dtg: f64,
    pub htg: f64,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct StepEvents {
    pub goal: bool,
    pub collision: bool,
    pub waypoint_reached: bool,
}

/// Per-step byproducts for policies, logging and scoring.
#[derive(Clone, Debug)]
pub struct StepInfo {
    pub robot: Pose,
    pub applied: Command,
    pub clamped: bool,
    /// Waypoint that was the target during this step (pre-recompute).
    pub waypoint: Vec2,
    pub waypoint_reached: bool,
    pub assessments: Vec<RiskAssessment>,
    pub tracks: Vec<Track>,
    /// Ground-truth distance from the robot center to the nearest obstacle
    /// surface; `None` without obstacles.
    pub min_obstacle_surface_dist: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub observation: ObservationVector,
    pub reward: RewardBreakdown,
    pub terminal: Terminal,
    pub info: StepInfo,
}

/// Waypoint on the 0.6 m circle around the robot toward the goal; the goal
/// itself once it is inside the circle (or exactly at the robot).
pub fn compute_waypoint(robot_pos: Vec2, goal: Vec2) -> Vec2 {
    if robot_pos == goal {
        return goal;
    }
    circle_segment_point(robot_pos, WAYPOINT_RADIUS, goal)
}

/// Assemble the observation from the scan, robot state, goal and critical set.
pub fn build_observation(
    scan: &ScanFrame,
    robot: &RobotState,
    goal: Vec2,
    critical: &[CriticalRecord],
    sectors: usize,
) -> ObservationVector {
    assert!(sectors > 0 && LIDAR_BEAMS % sectors == 0, "sectors must divide {LIDAR_BEAMS}");
    let per = LIDAR_BEAMS / sectors;
    let laser = (0..sectors)
        .map(|s| {
            let lo = s * per;
            scan.ranges[lo..lo + per].iter().copied().fold(f64::INFINITY, f64::min)
                / LIDAR_MAX_RANGE
        })
        .collect();
    let pos = robot.pose.position;
    let to_goal = goal - pos;
    ObservationVector {
        laser,
        dtg: to_goal.norm(),
        htg: wrap_angle(to_goal.angle() - robot.pose.heading()),
        agent: [pos.x, pos.y, robot.linear_vel, robot.angular_vel],
        critical: critical.to_vec(),
    }
}

/// Reward terms for one transition. The heading term compares error
/// magnitudes so spinning through zero is not rewarded.
pub fn compute_reward(prev: Progress, curr: Progress, events: StepEvents) -> RewardBreakdown {
    RewardBreakdown {
        r_step: -2.0,
        r_dtg: if curr.dtg < prev.dtg { 1.0 } else { 0.0 },
        r_htg: if curr.htg.abs() < prev.htg.abs() { 1.0 } else { 0.0 },
        r_goal: if events.goal { 200.0 } else { 0.0 },
        r_col: if events.collision { -200.0 } else { 0.0 },
        r_wp: if events.waypoint_reached { 200.0 } else { 0.0 },
    }
}

/// Gym-style episodic environment over one scenario.
///
/// Observations consume tracked obstacle estimates, never simulation truth;
/// the perception pipeline runs on synthesized scans each step.
pub struct CrowdNavEnv {
    cfg: EnvConfig,
    scenario: ScenarioSpec,
    world: WorldState,
    tracker: Tracker,
    waypoint: WaypointState,
    terminal: Terminal,
}

impl CrowdNavEnv {
    pub fn new(scenario: ScenarioSpec, cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let world = reset_scenario(&scenario)?;
        let waypoint = WaypointState {
            current: compute_waypoint(world.robot.pose.position, world.goal),
            reached_count: 0,
            reach_tolerance: cfg.waypoint_tolerance,
        };
        let mut env = Self {
            cfg,
            scenario,
            world,
            tracker: Tracker::new(),
            waypoint,
            terminal: Terminal::Running,
        };
        env.prime_perception();
        Ok(env)
    }

    /// Rebuild the world from the scenario and return the initial observation.
    pub fn reset(&mut self) -> Result<StepResult, EnvError> {
        self.world = reset_scenario(&self.scenario)?;
        self.tracker = Tracker::new();
        self.terminal = Terminal::Running;
        self.waypoint = WaypointState {
            current: compute_waypoint(self.world.robot.pose.position, self.world.goal),
            reached_count: 0,
            reach_tolerance: self.cfg.waypoint_tolerance,
        };
        Ok(self.prime_perception())
    }

    pub fn reset_with_seed(&mut self, seed: u64) -> Result<StepResult, EnvError> {
        self.scenario.seed = seed;
        self.reset()
    }

    /// First perception/risk pass at the spawn pose, before any action.
    fn prime_perception(&mut self) -> StepResult {
        let scan = simulate_lidar(&self.world);
        let (assessments, critical, tracks) = self.perceive(&scan);
        let observation = build_observation(
            &scan,
            &self.world.robot,
            self.world.goal,
            &critical,
            self.cfg.lidar_sectors,
        );
        StepResult {
            observation,
            reward: RewardBreakdown::zero(),
            terminal: Terminal::Running,
            info: StepInfo {
                robot: self.world.robot.pose,
                applied: Command::new(0.0, 0.0),
                clamped: false,
                waypoint: self.waypoint.current,
                waypoint_reached: false,
                assessments,
                tracks,
                min_obstacle_surface_dist: self.min_obstacle_surface_dist(),
            },
        }
    }

    /// Scan -> points -> clusters -> wall filter -> tracks -> risk.
    fn perceive(
        &mut self,
        scan: &ScanFrame,
    ) -> (Vec<RiskAssessment>, Vec<CriticalRecord>, Vec<Track>) {
        let cloud =
            scan_to_points(scan, &self.world.robot.pose, self.world.step_count as f64 * DT);
        let mut clusters = cluster_points(&cloud, &self.cfg.perception);
        for c in &mut clusters {
            c.kind = classify_cluster(c, &self.cfg.perception);
        }
        let detections: Vec<_> =
            clusters.iter().filter(|c| c.kind == ClusterKind::Obstacle).collect();
        let tracks = self.tracker.update(&detections, DT, &self.cfg.perception).to_vec();

        let robot = &self.world.robot;
        let vel = Vec2::from_angle(robot.pose.heading()) * robot.linear_vel;
        let assessments = assess_tracks(
            robot.pose.position,
            vel,
            robot.radius,
            &tracks,
            self.scenario.obstacle_radius,
            &self.cfg.risk,
        );
        let critical = select_critical(&assessments, &tracks, self.cfg.risk.k);
        (assessments, critical, tracks)
    }

    fn min_obstacle_surface_dist(&self) -> Option<f64> {
        let pos = self.world.robot.pose.position;
        self.world
            .obstacles
            .iter()
            .map(|o| pos.distance(o.position) - o.radius)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    fn progress(&self) -> Progress {
        let robot = &self.world.robot;
        let to_goal = self.world.goal - robot.pose.position;
        Progress { dtg: to_goal.norm(), htg: wrap_angle(to_goal.angle() - robot.pose.heading()) }
    }

    /// Advance one command interval.
    pub fn step(&mut self, cmd: Command) -> Result<StepResult, EnvError> {
        if self.terminal != Terminal::Running {
            return Err(EnvError::EpisodeOver);
        }
        let prev = self.progress();
        let wp_target = self.waypoint.current;

        let (robot, applied) = step_robot(&self.world.robot, cmd, DT)?;
        let clamped = applied != cmd;
        self.world.robot = robot;
        step_obstacles(&mut self.world, DT);
        let collision = detect_collision(&self.world).is_some();
        let scan = simulate_lidar(&self.world);
        let (assessments, critical, tracks) = self.perceive(&scan);

        let pos = self.world.robot.pose.position;
        let waypoint_reached = pos.distance(wp_target) <= self.waypoint.reach_tolerance;
        if waypoint_reached {
            self.waypoint.reached_count += 1;
            self.waypoint.current = compute_waypoint(pos, self.world.goal);
        }

        let curr = self.progress();
        let goal = !collision && curr.dtg <= self.cfg.goal_tolerance;
        self.world.step_count += 1;

        self.terminal = if collision {
            Terminal::Collision
        } else if goal {
            Terminal::Goal
        } else if self.world.step_count >= self.cfg.max_steps {
            Terminal::Timeout
        } else {
            Terminal::Running
        };

        let reward = compute_reward(prev, curr, StepEvents { goal, collision, waypoint_reached });
        let observation = build_observation(
            &scan,
            &self.world.robot,
            self.world.goal,
            &critical,
            self.cfg.lidar_sectors,
        );
        Ok(StepResult {
            observation,
            reward,
            terminal: self.terminal,
            info: StepInfo {
                robot: self.world.robot.pose,
                applied,
                clamped,
                waypoint: wp_target,
                waypoint_reached,
                assessments,
                tracks,
                min_obstacle_surface_dist: self.min_obstacle_surface_dist(),
            },
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn terminal(&self) -> Terminal {
        self.terminal
    }

    pub fn waypoint(&self) -> &WaypointState {
        &self.waypoint
    }

    pub fn observation_len(&self) -> usize {
        self.cfg.observation_len()
    }

    #[cfg(test)]
    pub(crate) fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }
}
