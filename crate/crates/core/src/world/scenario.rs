//! Scenario generation for the crowd behaviors used in training and testing.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    ArenaSpec, ObstacleState, RobotState, WorldError, WorldState, DEFAULT_OBSTACLE_RADIUS,
    DEFAULT_ROBOT_RADIUS, TRAINING_MAX_OBSTACLE_SPEED,
};
use crate::{Pose, Vec2};

/// Crowd behavior of the moving obstacles.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    /// Crowd crosses the robot's path, perpendicular to the start-goal line.
    Crossing,
    /// Crowd moves toward the robot's start region.
    Towards,
    /// Crowd moves ahead of the robot, parallel to the start-goal direction.
    Ahead,
    /// Uniformly random directions at the configured speed.
    Random,
    /// Random directions and random speed in (0, 0.2] m/s, as in training.
    TrainingRandom,
}

impl Behavior {
    pub const ALL: [Behavior; 5] = [
        Behavior::Crossing,
        Behavior::Towards,
        Behavior::Ahead,
        Behavior::Random,
        Behavior::TrainingRandom,
    ];

    /// The four behaviors of the evaluation suite.
    pub const TEST_SUITE: [Behavior; 4] =
        [Behavior::Crossing, Behavior::Towards, Behavior::Ahead, Behavior::Random];

    pub fn name(&self) -> &'static str {
        match self {
            Behavior::Crossing => "crossing",
            Behavior::Towards => "towards",
            Behavior::Ahead => "ahead",
            Behavior::Random => "random",
            Behavior::TrainingRandom => "training-random",
        }
    }
}

impl std::fmt::Display for Behavior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Behavior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Behavior::ALL
            .iter()
            .copied()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown behavior '{s}' (expected one of: crossing, towards, ahead, random, training-random)"))
    }
}

/// Everything needed to deterministically build one episode's world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub behavior: Behavior,
    pub obstacle_count: usize,
    /// Obstacle speed in m/s. For `TrainingRandom` this is the upper bound
    /// of the per-obstacle uniform speed draw.
    pub obstacle_speed: f64,
    pub arena: ArenaSpec,
    pub start: Vec2,
    pub goal: Vec2,
    pub seed: u64,
    pub robot_radius: f64,
    pub obstacle_radius: f64,
}

impl ScenarioSpec {
    /// Test-arena scenario: 4x4 m, start (-1.5, 0), goal (+1.5, 0),
    /// 20 obstacles at a fifth of the robot's max speed.
    pub fn test_arena(behavior: Behavior, seed: u64) -> Self {
        Self {
            behavior,
            obstacle_count: 20,
            obstacle_speed: super::MAX_LINEAR_VEL / 5.0,
            arena: ArenaSpec::square(2.0),
            start: Vec2::new(-1.5, 0.0),
            goal: Vec2::new(1.5, 0.0),
            seed,
            robot_radius: DEFAULT_ROBOT_RADIUS,
            obstacle_radius: DEFAULT_OBSTACLE_RADIUS,
        }
    }

    /// Training scenario: 2x2 m walled arena with random moving obstacles.
    pub fn training(obstacle_count: usize, seed: u64) -> Self {
        Self {
            behavior: Behavior::TrainingRandom,
            obstacle_count,
            obstacle_speed: TRAINING_MAX_OBSTACLE_SPEED,
            arena: ArenaSpec::square(1.0),
            start: Vec2::new(-0.7, 0.0),
            goal: Vec2::new(0.7, 0.0),
            seed,
            robot_radius: DEFAULT_ROBOT_RADIUS,
            obstacle_radius: DEFAULT_OBSTACLE_RADIUS,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let inside = |p: Vec2, m: f64| self.arena.contains(p, m);
        if !inside(self.start, self.robot_radius) {
            return Err(WorldError::InvalidScenario("start outside arena".into()));
        }
        if !inside(self.goal, self.robot_radius) {
            return Err(WorldError::InvalidScenario("goal outside arena".into()));
        }
        if self.start == self.goal {
            return Err(WorldError::InvalidScenario("start equals goal".into()));
        }
        if self.obstacle_speed < 0.0 || !self.obstacle_speed.is_finite() {
            return Err(WorldError::InvalidScenario("obstacle speed must be >= 0".into()));
        }
        if self.robot_radius <= 0.0 || self.obstacle_radius <= 0.0 {
            return Err(WorldError::InvalidScenario("radii must be positive".into()));
        }
        Ok(())
    }
}

const SPAWN_ATTEMPTS: usize = 500;
/// Minimum surface-to-surface clearance between freshly spawned bodies.
const SPAWN_CLEARANCE: f64 = 0.05;

/// Build the initial world for `spec`: robot at the start facing the goal,
/// obstacles placed without overlap and given behavior-specific velocities.
/// Identical specs (same seed) produce identical worlds.
pub fn reset_scenario(spec: &ScenarioSpec) -> Result<WorldState, WorldError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let to_goal = (spec.goal - spec.start)
        .try_normalized()
        .expect("validate() rejects start == goal");
    let heading = to_goal.angle();

    let mut obstacles: Vec<ObstacleState> = Vec::with_capacity(spec.obstacle_count);
    for i in 0..spec.obstacle_count {
        let position = sample_position(spec, &obstacles, to_goal, &mut rng)
            .ok_or(WorldError::SpawnFailure { index: i, attempts: SPAWN_ATTEMPTS })?;
        let velocity = match spec.behavior {
            Behavior::Crossing => {
                let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                to_goal.perp() * (side * spec.obstacle_speed)
            }
            Behavior::Towards => {
                let jitter = rng.random_range(-5.0f64.to_radians()..5.0f64.to_radians());
                match (spec.start - position).try_normalized() {
                    Some(dir) => dir.rotated(jitter) * spec.obstacle_speed,
                    None => to_goal * (-spec.obstacle_speed),
                }
            }
            Behavior::Ahead => to_goal * spec.obstacle_speed,
            Behavior::Random => {
                Vec2::from_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                    * spec.obstacle_speed
            }
            Behavior::TrainingRandom => {
                let dir = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                // speed uniform in (0, max]
                let speed = (1.0 - rng.random::<f64>()) * spec.obstacle_speed;
                Vec2::from_angle(dir) * speed
            }
        };
        obstacles.push(ObstacleState {
            id: i as u32,
            position,
            velocity,
            radius: spec.obstacle_radius,
        });
    }

    Ok(WorldState {
        robot: RobotState::at_rest(Pose::new(spec.start, heading), spec.robot_radius),
        obstacles,
        goal: spec.goal,
        arena: spec.arena.clone(),
        step_count: 0,
        rng,
    })
}

fn sample_position(
    spec: &ScenarioSpec,
    placed: &[ObstacleState],
    to_goal: Vec2,
    rng: &mut ChaCha8Rng,
) -> Option<Vec2> {
    let h = spec.arena.half_extent - spec.obstacle_radius - SPAWN_CLEARANCE;
    if h <= 0.0 {
        return None;
    }
    'attempt: for _ in 0..SPAWN_ATTEMPTS {
        let p = Vec2::new(rng.random_range(-h..h), rng.random_range(-h..h));
        if spec.behavior == Behavior::Ahead {
            // spawned in front of the robot, with some headway
            if (p - spec.start).dot(to_goal) < 0.3 {
                continue;
            }
        }
        if p.distance(spec.start)
            < spec.robot_radius + spec.obstacle_radius + SPAWN_CLEARANCE
        {
            continue;
        }
        for o in placed {
            if p.distance(o.position) < 2.0 * spec.obstacle_radius + SPAWN_CLEARANCE {
                continue 'attempt;
            }
        }
        return Some(p);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_crowd() {
        let mut spec = ScenarioSpec::test_arena(Behavior::Random, 1);
        spec.obstacle_count = 0;
        let w = reset_scenario(&spec).unwrap();
        assert!(w.obstacles.is_empty());
        assert_eq!(w.robot.pose.position, spec.start);
        assert_eq!(w.robot.pose.heading(), 0.0, "facing the goal along +x");
    }

    #[test]
    fn towards_aims_at_start_at_configured_speed() {
        let mut spec = ScenarioSpec::test_arena(Behavior::Towards, 3);
        spec.obstacle_count = 1;
        spec.obstacle_speed = 0.044;
        let w = reset_scenario(&spec).unwrap();
        let o = &w.obstacles[0];
        assert!((o.velocity.norm() - 0.044).abs() < 1e-12);
        let to_start = (spec.start - o.position).angle();
        let err = crate::geometry::wrap_angle(o.velocity.angle() - to_start).abs();
        assert!(err < 10.0f64.to_radians(), "velocity {err} rad off the start direction");
    }

    #[test]
    fn crossing_alternates_perpendicular_sides() {
        let mut spec = ScenarioSpec::test_arena(Behavior::Crossing, 5);
        spec.obstacle_count = 4;
        let w = reset_scenario(&spec).unwrap();
        for (i, o) in w.obstacles.iter().enumerate() {
            assert!(o.velocity.x.abs() < 1e-12, "perpendicular to the +x start-goal line");
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert!(o.velocity.y * sign > 0.0);
        }
    }

    #[test]
    fn ahead_spawns_in_front_moving_along_route() {
        let mut spec = ScenarioSpec::test_arena(Behavior::Ahead, 9);
        spec.obstacle_count = 8;
        let w = reset_scenario(&spec).unwrap();
        for o in &w.obstacles {
            assert!(o.position.x > spec.start.x, "in front of the robot");
            assert!(o.velocity.x > 0.0 && o.velocity.y.abs() < 1e-12);
        }
    }

    #[test]
    fn training_random_speeds_within_bound() {
        let spec = ScenarioSpec::training(6, 11);
        let w = reset_scenario(&spec).unwrap();
        for o in &w.obstacles {
            let s = o.velocity.norm();
            assert!(s > 0.0 && s <= TRAINING_MAX_OBSTACLE_SPEED + 1e-12);
        }
    }

    #[test]
    fn same_seed_same_world() {
        let spec = ScenarioSpec::test_arena(Behavior::Random, 42);
        let a = reset_scenario(&spec).unwrap();
        let b = reset_scenario(&spec).unwrap();
        assert_eq!(a.robot, b.robot);
        assert_eq!(a.obstacles, b.obstacles);
    }

    #[test]
    fn spawn_respects_clearances() {
        let spec = ScenarioSpec::test_arena(Behavior::Random, 7);
        let w = reset_scenario(&spec).unwrap();
        assert_eq!(w.obstacles.len(), 20);
        for (i, a) in w.obstacles.iter().enumerate() {
            assert!(w.arena.contains(a.position, a.radius));
            assert!(a.position.distance(spec.start) >= spec.robot_radius + a.radius);
            for b in &w.obstacles[i + 1..] {
                assert!(a.position.distance(b.position) >= 2.0 * spec.obstacle_radius);
            }
        }
    }

    #[test]
    fn overcrowded_arena_reports_spawn_failure() {
        let mut spec = ScenarioSpec::training(400, 1);
        spec.obstacle_count = 400;
        match reset_scenario(&spec) {
            Err(WorldError::SpawnFailure { .. }) => {}
            other => panic!("expected spawn failure, got {other:?}"),
        }
    }
}
