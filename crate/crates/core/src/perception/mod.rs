//! Moving-obstacle recovery from raw scans: cartesian conversion, gap-based
//! grouping, wall/obstacle classification, Kuhn-Munkres data association and
//! velocity estimation.
//!
//! Only perceived scans enter this module; ground-truth obstacle state is
//! never read here.

mod assignment;

pub use assignment::{assign_min_cost, assignment_cost};

use serde::{Deserialize, Serialize};

use crate::geometry::wrap_angle;
use crate::world::{ScanFrame, LIDAR_MAX_RANGE};
use crate::{Pose, Vec2};

#[derive(Clone, Debug, PartialEq)]
pub struct PerceptionConfig {
    /// Euclidean gap (m) above which consecutive scan points start a new group.
    pub cluster_gap: f64,
    /// Maximum deviation (rad) of segment directions from their mean for a
    /// group to count as a wall.
    pub wall_max_angle_dev: f64,
    /// Association gate (m): track-detection pairings above this distance
    /// are rejected.
    pub gate: f64,
    /// Exponential-moving-average factor for velocity smoothing.
    pub velocity_ema: f64,
    /// Tracks unseen for more than this many updates are dropped.
    pub max_missed: u64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            cluster_gap: 0.08,
            wall_max_angle_dev: 0.1,
            gate: 0.3,
            velocity_ema: 0.5,
            max_missed: 3,
        }
    }
}

/// One lidar return converted to a world-frame point.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub position: Vec2,
    pub beam: usize,
}

/// World-frame points of one scan, in beam order. Sentinel beams carry no point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScanPointCloud {
    pub points: Vec<ScanPoint>,
    pub frame_time: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterKind {
    Wall,
    Obstacle,
    Unknown,
}

/// A maximal chain of nearby scan points.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub points: Vec<ScanPoint>,
    pub centroid: Vec2,
    /// Middle element of the ordered points; stands in for the obstacle position.
    pub center_scan: Vec2,
    pub kind: ClusterKind,
}

impl Cluster {
    fn from_points(points: Vec<ScanPoint>) -> Self {
        assert!(!points.is_empty(), "cluster needs at least one point");
        let mut centroid = Vec2::zero();
        for p in &points {
            centroid = centroid + p.position;
        }
        let centroid = centroid * (1.0 / points.len() as f64);
        let center_scan = points[points.len() / 2].position;
        Self { points, centroid, center_scan, kind: ClusterKind::Unknown }
    }
}

/// A tracked moving obstacle with estimated position and velocity.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u32,
    pub position: Vec2,
    pub velocity: Vec2,
    pub last_seen: u64,
    pub age: u64,
}

/// Convert a scan into world-frame cartesian points using the robot pose.
/// Sentinel (out-of-range) beams are dropped.
pub fn scan_to_points(scan: &ScanFrame, robot_pose: &Pose, frame_time: f64) -> ScanPointCloud {
    let heading = robot_pose.heading();
    let origin = robot_pose.position;
    let points = scan
        .ranges
        .iter()
        .enumerate()
        .filter(|&(_, &r)| r < LIDAR_MAX_RANGE)
        .map(|(beam, &r)| ScanPoint {
            position: origin + Vec2::from_angle(heading + (beam as f64).to_radians()) * r,
            beam,
        })
        .collect();
    ScanPointCloud { points, frame_time }
}

/// Group scan points by chaining consecutive points (in cyclic beam order,
/// wrapping 359 -> 0) whose euclidean gap stays within `cfg.cluster_gap`.
///
/// The point sequence is a ring, so chains may span the wrap; a chain across
/// beam 0 keeps its cyclic order (e.g. beams 358, 359, 0, 1). A fully closed
/// ring with no over-threshold gap becomes one cluster cut at its widest gap.
pub fn cluster_points(cloud: &ScanPointCloud, cfg: &PerceptionConfig) -> Vec<Cluster> {
    let pts = &cloud.points;
    let n = pts.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Cluster::from_points(vec![pts[0]])];
    }
    // gap(i): distance from point i to its cyclic successor
    let gap = |i: usize| pts[i].position.distance(pts[(i + 1) % n].position);
    let cuts: Vec<usize> = (0..n).filter(|&i| gap(i) > cfg.cluster_gap).collect();
    if cuts.is_empty() {
        let seam = (0..n)
            .max_by(|&a, &b| gap(a).partial_cmp(&gap(b)).unwrap())
            .unwrap();
        let points = (1..=n).map(|k| pts[(seam + k) % n]).collect();
        return vec![Cluster::from_points(points)];
    }
    let mut clusters = Vec::with_capacity(cuts.len());
    let mut current = Vec::new();
    for k in 1..=n {
        let i = (cuts[0] + k) % n;
        current.push(pts[i]);
        if gap(i) > cfg.cluster_gap {
            clusters.push(Cluster::from_points(std::mem::take(&mut current)));
        }
    }
    debug_assert!(current.is_empty());
    clusters
}

/// Decide whether a group of scan points is a wall or a moving obstacle.
///
/// The direction angles of consecutive point pairs are compared against
/// their circular mean; a group spanning at least three points whose maximum
/// deviation stays below the threshold is collinear, hence a wall.
pub fn classify_cluster(cluster: &Cluster, cfg: &PerceptionConfig) -> ClusterKind {
    let pts = &cluster.points;
    if pts.len() < 3 {
        return ClusterKind::Obstacle;
    }
    let angles: Vec<f64> =
        pts.windows(2).map(|w| (w[1].position - w[0].position).angle()).collect();
    let (mut s, mut c) = (0.0, 0.0);
    for &a in &angles {
        s += a.sin();
        c += a.cos();
    }
    let mean = s.atan2(c);
    let max_dev = angles
        .iter()
        .map(|&a| wrap_angle(a - mean).abs())
        .fold(0.0, f64::max);
    if max_dev < cfg.wall_max_angle_dev {
        ClusterKind::Wall
    } else {
        ClusterKind::Obstacle
    }
}

/// Frame-to-frame tracker over obstacle detections.
///
/// Detections are associated to existing tracks with [`assign_min_cost`] on
/// the track-to-detection distance matrix, gated by `cfg.gate`. Matched
/// tracks move to the detection and smooth the finite-difference velocity
/// with an EMA; unmatched detections spawn fresh tracks at zero velocity.
#[derive(Clone, Debug, Default)]
pub struct Tracker {
    tracks: Vec<Track>,
    next_id: u32,
    step: u64,
}

impl Tracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Advance one frame with the obstacle detections of that frame.
    pub fn update(&mut self, detections: &[&Cluster], dt: f64, cfg: &PerceptionConfig) -> &[Track] {
        assert!(dt > 0.0, "dt must be positive");
        debug_assert!(detections.iter().all(|c| c.kind == ClusterKind::Obstacle));
        self.step += 1;
        for t in &mut self.tracks {
            t.age += 1;
        }

        let centers: Vec<Vec2> = detections.iter().map(|c| c.center_scan).collect();
        let mut matched_detection = vec![false; centers.len()];
        if !self.tracks.is_empty() && !centers.is_empty() {
            let cost: Vec<Vec<f64>> = self
                .tracks
                .iter()
                .map(|t| centers.iter().map(|&c| t.position.distance(c)).collect())
                .collect();
            for (row, col) in assign_min_cost(&cost) {
                if cost[row][col] > cfg.gate {
                    continue;
                }
                let track = &mut self.tracks[row];
                let raw = (centers[col] - track.position) * (1.0 / dt);
                track.velocity =
                    raw * cfg.velocity_ema + track.velocity * (1.0 - cfg.velocity_ema);
                track.position = centers[col];
                track.last_seen = self.step;
                matched_detection[col] = true;
            }
        }

        for (i, &center) in centers.iter().enumerate() {
            if !matched_detection[i] {
                self.tracks.push(Track {
                    id: self.next_id,
                    position: center,
                    velocity: Vec2::zero(),
                    last_seen: self.step,
                    age: 1,
                });
                self.next_id += 1;
            }
        }

        let step = self.step;
        self.tracks.retain(|t| step - t.last_seen <= cfg.max_missed);
        &self.tracks
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{LIDAR_BEAMS, LIDAR_MAX_RANGE};

    fn cfg() -> PerceptionConfig {
        PerceptionConfig::default()
    }

    fn frame_with(hits: &[(usize, f64)]) -> ScanFrame {
        let mut ranges = [LIDAR_MAX_RANGE; LIDAR_BEAMS];
        for &(beam, r) in hits {
            ranges[beam] = r;
        }
        ScanFrame { ranges }
    }

    fn cluster_of(points: &[Vec2]) -> Cluster {
        Cluster::from_points(
            points.iter().enumerate().map(|(beam, &position)| ScanPoint { position, beam }).collect(),
        )
    }

    #[test]
    fn scan_to_points_empty_on_all_sentinel() {
        let scan = frame_with(&[]);
        let cloud = scan_to_points(&scan, &Pose::new(Vec2::zero(), 0.0), 0.0);
        assert!(cloud.points.is_empty());
    }

    #[test]
    fn scan_to_points_axis_and_heading() {
        let scan = frame_with(&[(90, 0.3)]);
        let cloud = scan_to_points(&scan, &Pose::new(Vec2::new(1.0, 1.0), 0.0), 0.0);
        assert_eq!(cloud.points.len(), 1);
        let p = cloud.points[0].position;
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 1.3).abs() < 1e-12);

        // heading offset: beam 0 with the robot facing +y lands on +y,
        // matching a rotation-matrix oracle R(pi/2) * (0.5, 0).
        let scan = frame_with(&[(0, 0.5)]);
        let cloud =
            scan_to_points(&scan, &Pose::new(Vec2::zero(), std::f64::consts::FRAC_PI_2), 0.0);
        let p = cloud.points[0].position;
        let oracle = Vec2::new(0.5, 0.0).rotated(std::f64::consts::FRAC_PI_2);
        assert!((p.x - oracle.x).abs() < 1e-12 && (p.y - oracle.y).abs() < 1e-12);
    }

    #[test]
    fn clustering_splits_on_gap() {
        let scan = frame_with(&[(10, 0.3), (11, 0.3), (120, 0.4), (121, 0.4)]);
        let cloud = scan_to_points(&scan, &Pose::new(Vec2::zero(), 0.0), 0.0);
        let clusters = cluster_points(&cloud, &cfg());
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn clustering_wraps_around_beam_zero() {
        let scan = frame_with(&[(358, 0.3), (359, 0.3), (0, 0.3), (1, 0.3)]);
        let cloud = scan_to_points(&scan, &Pose::new(Vec2::zero(), 0.0), 0.0);
        let clusters = cluster_points(&cloud, &cfg());
        assert_eq!(clusters.len(), 1, "contiguous arc across the wrap");
        assert_eq!(clusters[0].points.len(), 4);
        // cyclic order restores beam continuity: 358, 359, 0, 1
        let beams: Vec<usize> = clusters[0].points.iter().map(|p| p.beam).collect();
        assert_eq!(beams, vec![358, 359, 0, 1]);
    }

    #[test]
    fn clustering_empty_cloud() {
        assert!(cluster_points(&ScanPointCloud::default(), &cfg()).is_empty());
    }

    #[test]
    fn collinear_points_classify_as_wall() {
        let pts: Vec<Vec2> = (0..10).map(|i| Vec2::new(i as f64 * 0.02, 0.4)).collect();
        assert_eq!(classify_cluster(&cluster_of(&pts), &cfg()), ClusterKind::Wall);
    }

    #[test]
    fn arc_classifies_as_obstacle() {
        // 10 points over a 90-degree arc of radius 0.1: direction angles
        // sweep ~90 degrees, far beyond the collinearity threshold.
        let pts: Vec<Vec2> = (0..10)
            .map(|i| {
                let a = i as f64 / 9.0 * std::f64::consts::FRAC_PI_2;
                Vec2::new(0.1 * a.cos(), 0.1 * a.sin())
            })
            .collect();
        assert_eq!(classify_cluster(&cluster_of(&pts), &cfg()), ClusterKind::Obstacle);
    }

    #[test]
    fn tiny_clusters_are_obstacles() {
        let one = cluster_of(&[Vec2::new(0.2, 0.0)]);
        assert_eq!(classify_cluster(&one, &cfg()), ClusterKind::Obstacle);
        let two = cluster_of(&[Vec2::new(0.2, 0.0), Vec2::new(0.22, 0.0)]);
        assert_eq!(classify_cluster(&two, &cfg()), ClusterKind::Obstacle);
    }

    #[test]
    fn classification_is_rigid_transform_invariant() {
        let wall: Vec<Vec2> = (0..8).map(|i| Vec2::new(0.03 * i as f64, -0.2)).collect();
        let moved: Vec<Vec2> =
            wall.iter().map(|p| p.rotated(2.3) + Vec2::new(-5.0, 11.0)).collect();
        assert_eq!(
            classify_cluster(&cluster_of(&wall), &cfg()),
            classify_cluster(&cluster_of(&moved), &cfg())
        );
    }

    fn obstacle_cluster_at(p: Vec2) -> Cluster {
        let mut c = cluster_of(&[p]);
        c.kind = ClusterKind::Obstacle;
        c
    }

    #[test]
    fn cold_start_spawns_zero_velocity_track() {
        let mut tracker = Tracker::new();
        let det = obstacle_cluster_at(Vec2::new(0.5, 0.0));
        let tracks = tracker.update(&[&det], 0.15, &cfg());
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].velocity, Vec2::zero());
        assert_eq!(tracks[0].age, 1);
    }

    #[test]
    fn ema_smooths_finite_difference_velocity() {
        let mut tracker = Tracker::new();
        let d0 = obstacle_cluster_at(Vec2::zero());
        tracker.update(&[&d0], 0.15, &cfg());
        let d1 = obstacle_cluster_at(Vec2::new(0.03, 0.0));
        let tracks = tracker.update(&[&d1], 0.15, &cfg());
        // raw velocity (0.2, 0), EMA 0.5 with previous (0, 0) -> (0.1, 0)
        assert!((tracks[0].velocity.x - 0.1).abs() < 1e-12);
        assert_eq!(tracks[0].velocity.y, 0.0);
        assert_eq!(tracks[0].position, Vec2::new(0.03, 0.0));
    }

    #[test]
    fn crossed_detections_follow_min_cost_assignment() {
        let mut tracker = Tracker::new();
        let a = obstacle_cluster_at(Vec2::new(0.0, 0.0));
        let b = obstacle_cluster_at(Vec2::new(0.5, 0.0));
        tracker.update(&[&a, &b], 0.15, &cfg());
        // nudged detections, listed in swapped order
        let a2 = obstacle_cluster_at(Vec2::new(0.52, 0.0));
        let b2 = obstacle_cluster_at(Vec2::new(0.02, 0.0));
        let tracks = tracker.update(&[&a2, &b2], 0.15, &cfg()).to_vec();
        let t0 = tracks.iter().find(|t| t.id == 0).unwrap();
        let t1 = tracks.iter().find(|t| t.id == 1).unwrap();
        assert_eq!(t0.position, Vec2::new(0.02, 0.0));
        assert_eq!(t1.position, Vec2::new(0.52, 0.0));
    }

    #[test]
    fn gate_rejects_far_association_and_timeout_drops_tracks() {
        let mut tracker = Tracker::new();
        let d0 = obstacle_cluster_at(Vec2::zero());
        tracker.update(&[&d0], 0.15, &cfg());
        // far detection: outside the 0.3 m gate, spawns a new track
        let far = obstacle_cluster_at(Vec2::new(1.0, 0.0));
        let tracks = tracker.update(&[&far], 0.15, &cfg()).to_vec();
        assert_eq!(tracks.len(), 2);
        // starve the old track past the timeout
        for _ in 0..4 {
            tracker.update(&[&far], 0.15, &cfg());
        }
        let ids: Vec<u32> = tracker.tracks().iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![1]);
    }
}
