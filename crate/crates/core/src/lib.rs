//! Risk-aware crowd navigation stack.
//!
//! A deterministic 2D simulator with a differential-drive robot, 360-beam
//! lidar and non-cooperative moving obstacles; a scan-based perception
//! pipeline (clustering, wall filtering, Kuhn-Munkres tracking); collision
//! probability over collision cones; a waypoint-densified RL environment;
//! a self-contained TD3 learner; and the episode scoring harness.
//!
//! The numeric core ([`geometry`], [`nn`]) is generic over the scalar type
//! via [`scalar::Real`]. The robotics stack runs on `f64`; network
//! parameters and checkpoints are `f32`.

pub mod env;
pub mod geometry;
pub mod metrics;
pub mod nn;
pub mod perception;
pub mod policy;
pub mod risk;
pub mod scalar;
pub mod seeding;
pub mod td3;
pub mod trajlog;
pub mod world;

/// 2D vector in meters, fixed to the stack's `f64` scalar.
pub type Vec2 = geometry::Vec2<f64>;
/// Robot/obstacle pose, fixed to `f64`.
pub type Pose = geometry::Pose<f64>;
/// Line segment (arena walls), fixed to `f64`.
pub type Segment = geometry::Segment<f64>;
/// Network type used by the TD3 learner and the checkpoint format.
pub type Mlp32 = nn::Mlp<f32>;
