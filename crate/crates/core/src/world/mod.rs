//! Ground-truth simulation: square walled arena, differential-drive robot,
//! non-cooperative constant-velocity obstacles, collision detection and
//! 360-beam lidar synthesis.

mod scenario;

pub use scenario::{reset_scenario, Behavior, ScenarioSpec};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ray_circle_intersect, ray_segment_intersect};
use crate::{Pose, Segment, Vec2};

/// Command timestep in seconds.
pub const DT: f64 = 0.15;
/// Linear velocity range of the robot, m/s.
pub const MAX_LINEAR_VEL: f64 = 0.22;
/// Angular velocity magnitude bound of the robot, rad/s.
pub const MAX_ANGULAR_VEL: f64 = 2.0;
/// Half of the largest base width (0.178 m) of the robot platform.
pub const DEFAULT_ROBOT_RADIUS: f64 = 0.089;
/// Default moving-obstacle radius, m.
pub const DEFAULT_OBSTACLE_RADIUS: f64 = 0.1;
/// Number of lidar beams (1 degree spacing, beam 0 along the heading).
pub const LIDAR_BEAMS: usize = 360;
/// Lidar dead zone: readings below this distance are blind.
pub const LIDAR_MIN_RANGE: f64 = 0.105;
/// Lidar maximum range; also the sentinel value for out-of-range beams.
pub const LIDAR_MAX_RANGE: f64 = 0.6;
/// Maximum obstacle speed during training, m/s.
pub const TRAINING_MAX_OBSTACLE_SPEED: f64 = 0.2;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("failed to place obstacle {index} after {attempts} attempts (arena too dense)")]
    SpawnFailure { index: usize, attempts: usize },
    #[error("non-finite action ({linear}, {angular})")]
    NonFiniteAction { linear: f64, angular: f64 },
}

/// Square walled arena centered on the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArenaSpec {
    pub half_extent: f64,
    pub walls: Vec<Segment>,
}

impl ArenaSpec {
    /// Axis-aligned square of side `2 * half_extent` with four walls.
    pub fn square(half_extent: f64) -> Self {
        assert!(half_extent > 0.0, "half_extent must be positive");
        let h = half_extent;
        let c = [
            Vec2::new(-h, -h),
            Vec2::new(h, -h),
            Vec2::new(h, h),
            Vec2::new(-h, h),
        ];
        let walls = (0..4).map(|i| Segment::new(c[i], c[(i + 1) % 4])).collect();
        Self { half_extent, walls }
    }

    pub fn contains(&self, p: Vec2, margin: f64) -> bool {
        p.x.abs() <= self.half_extent - margin && p.y.abs() <= self.half_extent - margin
    }
}

/// Velocity command applied to the robot.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub linear: f64,
    pub angular: f64,
}

impl Command {
    pub const fn new(linear: f64, angular: f64) -> Self {
        Self { linear, angular }
    }

    pub fn is_finite(&self) -> bool {
        self.linear.is_finite() && self.angular.is_finite()
    }

    /// Clamp into the action space; the bool reports whether anything moved.
    pub fn clamped(&self) -> (Self, bool) {
        let c = Self {
            linear: self.linear.clamp(0.0, MAX_LINEAR_VEL),
            angular: self.angular.clamp(-MAX_ANGULAR_VEL, MAX_ANGULAR_VEL),
        };
        (c, c != *self)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub linear_vel: f64,
    pub angular_vel: f64,
    pub radius: f64,
}

impl RobotState {
    pub fn at_rest(pose: Pose, radius: f64) -> Self {
        assert!(radius > 0.0);
        Self { pose, linear_vel: 0.0, angular_vel: 0.0, radius }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleState {
    pub id: u32,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// Full simulation truth for one episode.
#[derive(Clone, Debug)]
pub struct WorldState {
    pub robot: RobotState,
    pub obstacles: Vec<ObstacleState>,
    pub goal: Vec2,
    pub arena: ArenaSpec,
    pub step_count: u64,
    pub rng: ChaCha8Rng,
}

/// 360-beam range snapshot. Beam `i` points `i` degrees counter-clockwise
/// from the robot heading. Beams with nothing inside `[0.105, 0.6]` m carry
/// the sentinel value [`LIDAR_MAX_RANGE`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScanFrame {
    pub ranges: [f64; LIDAR_BEAMS],
}

impl ScanFrame {
    /// True when beam `i` saw an object (range strictly below max).
    #[inline]
    pub fn is_hit(&self, i: usize) -> bool {
        self.ranges[i] < LIDAR_MAX_RANGE
    }
}

/// Exact unicycle integration over one command interval.
///
/// Returns the new state and the command actually applied (clamped into the
/// action space).
pub fn step_robot(
    robot: &RobotState,
    cmd: Command,
    dt: f64,
) -> Result<(RobotState, Command), WorldError> {
    if !cmd.is_finite() {
        return Err(WorldError::NonFiniteAction { linear: cmd.linear, angular: cmd.angular });
    }
    let (applied, _) = cmd.clamped();
    let (v, w) = (applied.linear, applied.angular);
    let theta = robot.pose.heading();
    let p = robot.pose.position;
    let position = if w.abs() < 1e-6 {
        p + Vec2::from_angle(theta) * (v * dt)
    } else {
        let r = v / w;
        Vec2::new(
            p.x + r * ((theta + w * dt).sin() - theta.sin()),
            p.y - r * ((theta + w * dt).cos() - theta.cos()),
        )
    };
    let pose = Pose::new(position, theta + w * dt);
    Ok((
        RobotState { pose, linear_vel: v, angular_vel: w, radius: robot.radius },
        applied,
    ))
}

/// Advance all obstacles by `dt`. Obstacles ignore the robot; walls reflect
/// the normal velocity component (and mirror the overshoot) so crowd density
/// stays constant.
pub fn step_obstacles(world: &mut WorldState, dt: f64) {
    let h = world.arena.half_extent;
    for o in &mut world.obstacles {
        o.position = o.position + o.velocity * dt;
        let lim = h - o.radius;
        if o.position.x > lim && o.velocity.x > 0.0 {
            o.position.x = 2.0 * lim - o.position.x;
            o.velocity.x = -o.velocity.x;
        } else if o.position.x < -lim && o.velocity.x < 0.0 {
            o.position.x = -2.0 * lim - o.position.x;
            o.velocity.x = -o.velocity.x;
        }
        if o.position.y > lim && o.velocity.y > 0.0 {
            o.position.y = 2.0 * lim - o.position.y;
            o.velocity.y = -o.velocity.y;
        } else if o.position.y < -lim && o.velocity.y < 0.0 {
            o.position.y = -2.0 * lim - o.position.y;
            o.velocity.y = -o.velocity.y;
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Collision {
    Obstacle { id: u32 },
    Wall,
}

/// Disk-overlap test of the robot against every obstacle and wall.
pub fn detect_collision(world: &WorldState) -> Option<Collision> {
    let r = &world.robot;
    for o in &world.obstacles {
        if r.pose.position.distance(o.position) < r.radius + o.radius {
            return Some(Collision::Obstacle { id: o.id });
        }
    }
    for wall in &world.arena.walls {
        if wall.distance_to_point(r.pose.position) < r.radius {
            return Some(Collision::Wall);
        }
    }
    None
}

/// Synthesize one lidar frame against walls and obstacle disks.
pub fn simulate_lidar(world: &WorldState) -> ScanFrame {
    let origin = world.robot.pose.position;
    let heading = world.robot.pose.heading();
    let mut ranges = [LIDAR_MAX_RANGE; LIDAR_BEAMS];
    for (i, range) in ranges.iter_mut().enumerate() {
        let angle = heading + (i as f64).to_radians();
        let dir = Vec2::from_angle(angle);
        let mut nearest = f64::INFINITY;
        for wall in &world.arena.walls {
            if let Some(t) = ray_segment_intersect(origin, dir, wall) {
                nearest = nearest.min(t);
            }
        }
        for o in &world.obstacles {
            if let Some(t) = ray_circle_intersect(origin, dir, o.position, o.radius) {
                nearest = nearest.min(t);
            }
        }
        if nearest >= LIDAR_MIN_RANGE && nearest <= LIDAR_MAX_RANGE {
            *range = nearest;
        }
    }
    ScanFrame { ranges }
}
