//! Collision probability over collision cones, and selection of the K most
//! dangerous tracked obstacles.
//!
//! Risk is always computed from tracked (perceived) obstacle state, never
//! from simulation ground truth.

use serde::{Deserialize, Serialize};

use crate::perception::Track;
use crate::world::{DT, LIDAR_MAX_RANGE, LIDAR_MIN_RANGE};
use crate::Vec2;

/// Relative speeds below this count as "not moving" for time-to-collision.
const STATIONARY_SPEED: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    /// Weight of the time-to-collision component against the
    /// distance-to-obstacle component.
    pub alpha: f64,
    /// Command timestep in seconds.
    pub timestep: f64,
    /// Laser maximum range (m).
    pub l_max: f64,
    /// Laser minimum range (m).
    pub l_min: f64,
    /// Number of critical obstacles exposed to the observation.
    pub k: usize,
    /// A step is a social-safety violation when any track's time-to-collision
    /// probability exceeds this value.
    pub social_ttc_threshold: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            timestep: DT,
            l_max: LIDAR_MAX_RANGE,
            l_min: LIDAR_MIN_RANGE,
            k: 1,
            social_ttc_threshold: 0.4,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if !(self.l_max > self.l_min && self.l_min > 0.0) {
            return Err(format!("need l_max > l_min > 0, got {} / {}", self.l_max, self.l_min));
        }
        if self.timestep <= 0.0 {
            return Err(format!("timestep must be positive, got {}", self.timestep));
        }
        Ok(())
    }
}

/// Collision cone between the robot and one obstacle: the set of relative
/// velocity directions that lead to eventual disk overlap.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CollisionCone {
    pub apex: Vec2,
    /// Unit vector from the robot toward the obstacle.
    pub axis: Vec2,
    pub half_angle: f64,
    /// Center distance robot -> obstacle.
    pub dist: f64,
    pub combined_radius: f64,
}

/// Per-track collision probability decomposition.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub track_id: u32,
    pub p_ttc: f64,
    pub p_dto: f64,
    pub cp: f64,
    /// Time to collision in seconds; infinite outside the cone.
    pub ttc: f64,
    pub relative_velocity: Vec2,
    /// Center distance robot -> track (meters).
    pub dist: f64,
}

/// Critical-obstacle record for the observation. Padding entries (when fewer
/// than K tracks exist) are zeroed and flagged invalid.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalRecord {
    pub position: Vec2,
    pub velocity: Vec2,
    pub valid: bool,
}

impl CriticalRecord {
    pub fn padding() -> Self {
        Self { position: Vec2::zero(), velocity: Vec2::zero(), valid: false }
    }
}

/// Build the collision cone toward a tracked obstacle, or `None` when the
/// disks already overlap (handled upstream as an immediate collision risk).
pub fn collision_cone(
    robot_pos: Vec2,
    robot_radius: f64,
    track: &Track,
    obstacle_radius: f64,
) -> Option<CollisionCone> {
    let combined_radius = robot_radius + obstacle_radius;
    let dist = robot_pos.distance(track.position);
    if dist <= combined_radius {
        return None;
    }
    let axis = (track.position - robot_pos)
        .try_normalized()
        .expect("dist > combined_radius > 0");
    Some(CollisionCone {
        apex: robot_pos,
        axis,
        half_angle: (combined_radius / dist).asin(),
        dist,
        combined_radius,
    })
}

/// Probability of collision from time-to-collision: `min(1, timestep / t)`
/// when the relative velocity lies inside the cone, else 0. Returns the
/// probability and the time to collision (infinite outside the cone).
pub fn p_ttc(
    robot_vel: Vec2,
    track: &Track,
    cone: Option<&CollisionCone>,
    cfg: &RiskConfig,
) -> (f64, f64) {
    let cone = match cone {
        // overlapping disks: collision is immediate
        None => return (1.0, 0.0),
        Some(c) => c,
    };
    let rel = robot_vel - track.velocity;
    let speed = rel.norm();
    if speed < STATIONARY_SPEED {
        return (0.0, f64::INFINITY);
    }
    let cos_angle = (rel.dot(cone.axis) / speed).clamp(-1.0, 1.0);
    if cos_angle.acos() > cone.half_angle {
        return (0.0, f64::INFINITY);
    }
    let ttc = cone.dist / speed;
    ((cfg.timestep / ttc).min(1.0), ttc)
}

/// Probability of collision from distance to obstacle:
/// `(l_max - dist) / (l_max - l_min)` inside lidar range, clamped to [0, 1],
/// and 0 beyond `l_max`.
pub fn p_dto(dist: f64, cfg: &RiskConfig) -> f64 {
    assert!(dist >= 0.0, "distance must be non-negative");
    if dist >= cfg.l_max {
        0.0
    } else {
        ((cfg.l_max - dist) / (cfg.l_max - cfg.l_min)).clamp(0.0, 1.0)
    }
}

/// Blend the two components: `alpha * p_ttc + (1 - alpha) * p_dto`.
pub fn collision_probability(p_ttc: f64, p_dto: f64, cfg: &RiskConfig) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p_ttc) && (0.0..=1.0).contains(&p_dto));
    cfg.alpha * p_ttc + (1.0 - cfg.alpha) * p_dto
}

/// Assess every track against the robot.
pub fn assess_tracks(
    robot_pos: Vec2,
    robot_vel: Vec2,
    robot_radius: f64,
    tracks: &[Track],
    obstacle_radius: f64,
    cfg: &RiskConfig,
) -> Vec<RiskAssessment> {
    tracks
        .iter()
        .map(|track| {
            let cone = collision_cone(robot_pos, robot_radius, track, obstacle_radius);
            let (p_ttc, ttc) = p_ttc(robot_vel, track, cone.as_ref(), cfg);
            let dist = robot_pos.distance(track.position);
            let p_dto = p_dto(dist, cfg);
            RiskAssessment {
                track_id: track.id,
                p_ttc,
                p_dto,
                cp: collision_probability(p_ttc, p_dto, cfg),
                ttc,
                relative_velocity: robot_vel - track.velocity,
                dist,
            }
        })
        .collect()
}

/// Pick the `k` highest-CP obstacles (ties: smaller distance, then smaller
/// track id) and return their position/velocity records, zero-padded to
/// exactly `k` entries.
pub fn select_critical(
    assessments: &[RiskAssessment],
    tracks: &[Track],
    k: usize,
) -> Vec<CriticalRecord> {
    let mut order: Vec<&RiskAssessment> = assessments.iter().collect();
    order.sort_by(|a, b| {
        b.cp.partial_cmp(&a.cp)
            .unwrap()
            .then(a.dist.partial_cmp(&b.dist).unwrap())
            .then(a.track_id.cmp(&b.track_id))
    });
    let mut out = Vec::with_capacity(k);
    for a in order.iter().take(k) {
        let track = tracks
            .iter()
            .find(|t| t.id == a.track_id)
            .expect("assessment refers to a live track");
        out.push(CriticalRecord { position: track.position, velocity: track.velocity, valid: true });
    }
    while out.len() < k {
        out.push(CriticalRecord::padding());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track_at(id: u32, position: Vec2, velocity: Vec2) -> Track {
        Track { id, position, velocity, last_seen: 1, age: 1 }
    }

    fn cfg() -> RiskConfig {
        RiskConfig::default()
    }

    #[test]
    fn cone_half_angle_is_arcsin_of_radius_ratio() {
        let t = track_at(0, Vec2::new(1.0, 0.0), Vec2::zero());
        let cone = collision_cone(Vec2::zero(), 0.089, &t, 0.111).unwrap();
        assert!((cone.half_angle - 0.2f64.asin()).abs() < 1e-12);
        assert!((cone.dist - 1.0).abs() < 1e-12);

        let t = track_at(0, Vec2::new(0.3, 0.0), Vec2::zero());
        let cone = collision_cone(Vec2::zero(), 0.089, &t, 0.1).unwrap();
        assert!((cone.half_angle - (0.189f64 / 0.3).asin()).abs() < 1e-12);
    }

    #[test]
    fn cone_absent_on_overlap() {
        let t = track_at(0, Vec2::new(0.189, 0.0), Vec2::zero());
        assert!(collision_cone(Vec2::zero(), 0.089, &t, 0.1).is_none());
    }

    #[test]
    fn p_ttc_outside_cone_is_zero() {
        let t = track_at(0, Vec2::new(0.3, 0.0), Vec2::zero());
        let cone = collision_cone(Vec2::zero(), 0.089, &t, 0.1);
        // relative velocity perpendicular to the axis: outside
        let (p, ttc) = p_ttc(Vec2::new(0.0, 0.2), &t, cone.as_ref(), &cfg());
        assert_eq!(p, 0.0);
        assert!(ttc.is_infinite());
    }

    #[test]
    fn p_ttc_along_axis_matches_formula() {
        // Dist_o = 0.3, |V_r'| = 0.2 -> t = 1.5 s, p = 0.15/1.5 = 0.1
        let t = track_at(0, Vec2::new(0.3, 0.0), Vec2::zero());
        let cone = collision_cone(Vec2::zero(), 0.05, &t, 0.05);
        let (p, ttc) = p_ttc(Vec2::new(0.2, 0.0), &t, cone.as_ref(), &cfg());
        assert!((ttc - 1.5).abs() < 1e-12);
        assert!((p - 0.1).abs() < 1e-12);
    }

    #[test]
    fn p_ttc_saturates_at_one() {
        // Dist_o = 0.03 would overlap with the default radii; use tiny disks.
        let t = track_at(0, Vec2::new(0.03, 0.0), Vec2::zero());
        let cone = collision_cone(Vec2::zero(), 0.005, &t, 0.005);
        let (p, ttc) = p_ttc(Vec2::new(0.2, 0.0), &t, cone.as_ref(), &cfg());
        assert!((ttc - 0.15).abs() < 1e-12);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn p_ttc_overlap_and_stationary_cases() {
        let t = track_at(0, Vec2::new(0.05, 0.0), Vec2::zero());
        let (p, ttc) = p_ttc(Vec2::new(0.1, 0.0), &t, None, &cfg());
        assert_eq!((p, ttc), (1.0, 0.0));

        let t = track_at(0, Vec2::new(0.3, 0.0), Vec2::new(0.1, 0.0));
        let cone = collision_cone(Vec2::zero(), 0.05, &t, 0.05);
        let (p, ttc) = p_ttc(Vec2::new(0.1, 0.0), &t, cone.as_ref(), &cfg());
        assert_eq!(p, 0.0);
        assert!(ttc.is_infinite());
    }

    #[test]
    fn p_dto_boundaries_and_midpoint() {
        let cfg = cfg();
        assert_eq!(p_dto(0.6, &cfg), 0.0);
        assert!((p_dto(0.105, &cfg) - 1.0).abs() < 1e-12);
        assert!((p_dto(0.3525, &cfg) - 0.5).abs() < 1e-12);
        // inside the dead zone the formula would exceed 1: clamped
        assert_eq!(p_dto(0.05, &cfg), 1.0);
        assert_eq!(p_dto(2.0, &cfg), 0.0);
    }

    #[test]
    fn blend_matches_weighted_sum() {
        let c = cfg();
        assert_eq!(collision_probability(0.0, 0.0, &c), 0.0);
        assert!((collision_probability(1.0, 0.5, &c) - 0.75).abs() < 1e-12);
        let ttc_only = RiskConfig { alpha: 1.0, ..cfg() };
        assert!((collision_probability(0.3, 0.9, &ttc_only) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn select_critical_sorts_pads_and_breaks_ties() {
        let tracks = vec![
            track_at(0, Vec2::new(0.5, 0.0), Vec2::zero()),
            track_at(1, Vec2::new(0.0, 0.4), Vec2::zero()),
            track_at(2, Vec2::new(0.0, -0.3), Vec2::zero()),
        ];
        let mk = |id: u32, cp: f64, dist: f64| RiskAssessment {
            track_id: id,
            p_ttc: 0.0,
            p_dto: cp,
            cp,
            ttc: f64::INFINITY,
            relative_velocity: Vec2::zero(),
            dist,
        };
        // padding on empty input
        let padded = select_critical(&[], &[], 1);
        assert_eq!(padded.len(), 1);
        assert!(!padded[0].valid);
        assert_eq!(padded[0].position, Vec2::zero());

        let a = vec![mk(0, 0.2, 0.5), mk(1, 0.9, 0.4), mk(2, 0.5, 0.3)];
        let picked = select_critical(&a, &tracks, 2);
        assert_eq!(picked.len(), 2);
        assert_eq!(picked[0].position, tracks[1].position);
        assert_eq!(picked[1].position, tracks[2].position);

        // equal cp: the nearer track wins
        let a = vec![mk(0, 0.5, 0.4), mk(1, 0.5, 0.2)];
        let picked = select_critical(&a, &tracks, 1);
        assert_eq!(picked[0].position, tracks[1].position);

        // output length is exactly k
        let picked = select_critical(&a, &tracks, 5);
        assert_eq!(picked.len(), 5);
        assert!(picked[2..].iter().all(|r| !r.valid));
    }

    #[test]
    fn assessment_blend_invariant() {
        let cfg = cfg();
        let tracks =
            vec![track_at(3, Vec2::new(0.4, 0.1), Vec2::new(-0.05, 0.0))];
        let out = assess_tracks(Vec2::zero(), Vec2::new(0.2, 0.0), 0.089, &tracks, 0.1, &cfg);
        assert_eq!(out.len(), 1);
        let a = &out[0];
        assert!((a.cp - (cfg.alpha * a.p_ttc + (1.0 - cfg.alpha) * a.p_dto)).abs() < 1e-12);
        assert!((a.dist - tracks[0].position.norm()).abs() < 1e-12);
    }
}
