//! Navigation policies: the trait the evaluator drives, a scripted
//! waypoint-following baseline with risk-triggered avoidance, and the
//! trained-actor policy.

use thiserror::Error;

use crate::env::{ObservationVector, StepInfo};
use crate::geometry::wrap_angle;
use crate::nn::Mlp;
use crate::td3::ActionSpace;
use crate::world::{Command, MAX_ANGULAR_VEL, MAX_LINEAR_VEL};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(
        "checkpoint expects observation length {expected} (K = {expected_k}) but the \
         environment produces {actual} (K = {actual_k})"
    )]
    ObservationMismatch { expected: usize, expected_k: usize, actual: usize, actual_k: usize },
}

pub trait NavPolicy {
    fn begin_episode(&mut self) {}

    /// Pre-flight compatibility check against the environment's observation
    /// layout. `sectors` is the laser block width.
    fn check_env(&self, _obs_len: usize, _sectors: usize) -> Result<(), PolicyError> {
        Ok(())
    }

    fn act(&mut self, obs: &ObservationVector, info: &StepInfo) -> Command;
}

/// Hand-coded baseline: steer toward the current waypoint; when the highest
/// collision probability crosses the threshold, slow down and turn away from
/// that obstacle.
#[derive(Clone, Debug)]
pub struct ScriptedAvoidPolicy {
    pub cp_threshold: f64,
    pub cruise_speed: f64,
    pub heading_gain: f64,
    pub avoid_turn: f64,
    pub avoid_speed: f64,
}

impl Default for ScriptedAvoidPolicy {
    fn default() -> Self {
        Self {
            cp_threshold: 0.5,
            cruise_speed: MAX_LINEAR_VEL,
            heading_gain: 2.5,
            avoid_turn: MAX_ANGULAR_VEL,
            avoid_speed: 0.05,
        }
    }
}

impl NavPolicy for ScriptedAvoidPolicy {
    fn act(&mut self, _obs: &ObservationVector, info: &StepInfo) -> Command {
        let pos = info.robot.position;
        let heading = info.robot.heading();

        let worst = info
            .assessments
            .iter()
            .max_by(|a, b| a.cp.partial_cmp(&b.cp).unwrap());
        if let Some(worst) = worst {
            if worst.cp > self.cp_threshold {
                if let Some(track) = info.tracks.iter().find(|t| t.id == worst.track_id) {
                    let bearing = wrap_angle((track.position - pos).angle() - heading);
                    let turn = if bearing >= 0.0 { -self.avoid_turn } else { self.avoid_turn };
                    return Command::new(self.avoid_speed, turn);
                }
            }
        }

        let err = wrap_angle((info.waypoint - pos).angle() - heading);
        let angular = (self.heading_gain * err).clamp(-MAX_ANGULAR_VEL, MAX_ANGULAR_VEL);
        // full speed when aligned, creep while turning hard
        let alignment = err.abs().min(std::f64::consts::FRAC_PI_2);
        let linear = self.cruise_speed * (1.0 - alignment / std::f64::consts::FRAC_PI_2).max(0.0);
        Command::new(linear, angular)
    }
}

/// Deterministic policy from a trained actor network.
pub struct ActorPolicy {
    actor: Mlp<f32>,
    space: ActionSpace,
}

impl ActorPolicy {
    pub fn new(actor: Mlp<f32>) -> Self {
        assert_eq!(actor.output_dim(), 2, "navigation actor emits (linear, angular)");
        Self { actor, space: ActionSpace::nav() }
    }

    pub fn actor(&self) -> &Mlp<f32> {
        &self.actor
    }
}

impl NavPolicy for ActorPolicy {
    fn check_env(&self, obs_len: usize, sectors: usize) -> Result<(), PolicyError> {
        let expected = self.actor.input_dim();
        if expected == obs_len {
            return Ok(());
        }
        let k_of = |len: usize| len.saturating_sub(sectors + 6) / 4;
        Err(PolicyError::ObservationMismatch {
            expected,
            expected_k: k_of(expected),
            actual: obs_len,
            actual_k: k_of(obs_len),
        })
    }

    fn act(&mut self, obs: &ObservationVector, _info: &StepInfo) -> Command {
        let flat = obs.flatten_f32();
        let u = self.actor.forward(&flat);
        let a = self.space.scale(&[u[0].tanh(), u[1].tanh()]);
        Command::new(a[0] as f64, a[1] as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::Track;
    use crate::risk::RiskAssessment;
    use crate::{Pose, Vec2};

    fn info_at(pos: Vec2, heading: f64, waypoint: Vec2) -> StepInfo {
        StepInfo {
            robot: Pose::new(pos, heading),
            applied: Command::new(0.0, 0.0),
            clamped: false,
            waypoint,
            waypoint_reached: false,
            assessments: Vec::new(),
            tracks: Vec::new(),
            min_obstacle_surface_dist: None,
        }
    }

    fn dummy_obs() -> ObservationVector {
        ObservationVector {
            laser: vec![1.0; 36],
            dtg: 1.0,
            htg: 0.0,
            agent: [0.0; 4],
            critical: Vec::new(),
        }
    }

    #[test]
    fn scripted_policy_drives_at_waypoint() {
        let mut p = ScriptedAvoidPolicy::default();
        let cmd = p.act(&dummy_obs(), &info_at(Vec2::zero(), 0.0, Vec2::new(0.6, 0.0)));
        assert!(cmd.linear > 0.2, "aligned: full speed");
        assert_eq!(cmd.angular, 0.0);

        let cmd = p.act(&dummy_obs(), &info_at(Vec2::zero(), 0.0, Vec2::new(0.0, 0.6)));
        assert!(cmd.angular > 1.0, "waypoint to the left: turn left");
    }

    #[test]
    fn scripted_policy_turns_away_from_high_cp_obstacle() {
        let mut p = ScriptedAvoidPolicy::default();
        let mut info = info_at(Vec2::zero(), 0.0, Vec2::new(0.6, 0.0));
        let track =
            Track { id: 4, position: Vec2::new(0.3, 0.1), velocity: Vec2::zero(), last_seen: 1, age: 1 };
        info.tracks.push(track);
        info.assessments.push(RiskAssessment {
            track_id: 4,
            p_ttc: 1.0,
            p_dto: 0.8,
            cp: 0.9,
            ttc: 0.1,
            relative_velocity: Vec2::new(0.2, 0.0),
            dist: 0.3,
        });
        let cmd = p.act(&dummy_obs(), &info);
        assert!(cmd.linear <= p.avoid_speed);
        assert!(cmd.angular < 0.0, "obstacle on the left: turn right");
    }

    #[test]
    fn actor_policy_checks_observation_length() {
        let actor = Mlp::<f32>::zeroed(&[46, 8, 2]);
        let p = ActorPolicy::new(actor);
        assert!(p.check_env(46, 36).is_ok());
        match p.check_env(58, 36) {
            Err(PolicyError::ObservationMismatch { expected_k: 1, actual_k: 4, .. }) => {}
            other => panic!("expected mismatch naming both K values, got {other:?}"),
        }
    }

    #[test]
    fn zeroed_actor_emits_midrange_command() {
        let mut p = ActorPolicy::new(Mlp::<f32>::zeroed(&[42, 4, 2]));
        let obs = ObservationVector {
            laser: vec![1.0; 36],
            dtg: 1.0,
            htg: 0.0,
            agent: [0.0; 4],
            critical: Vec::new(),
        };
        let cmd = p.act(&obs, &info_at(Vec2::zero(), 0.0, Vec2::new(0.6, 0.0)));
        assert!((cmd.linear - 0.11).abs() < 1e-6);
        assert_eq!(cmd.angular, 0.0);
    }
}
