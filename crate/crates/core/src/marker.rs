//! Multi-marker object tracking fused with visual-inertial ego-motion.
//!
//! Several planar markers share one object; a designated target marker `m`
//! is the reported frame. Each frame the visible markers are solved
//! individually, transformed onto the target through the stored relative
//! poses, and fused by consensus averaging. When every marker is lost the
//! pose is propagated with the camera's ego-motion (static-object
//! assumption), and the output is always extrapolated forward by the system
//! delay using the ego-motion velocity estimates.

use crate::geometry::{so3_exp, so3_hat, CameraIntrinsics, Pose};
use nalgebra::{Matrix3, Matrix6, Point2, UnitQuaternion, Vector2, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarkerError {
    #[error("marker corners are degenerate (triangle area {0:.3e} px²)")]
    DegenerateCorners(f64),
    #[error("solved marker pose lies behind the camera (depth {0:.4} m)")]
    BehindCamera(f64),
    #[error("empty pose list")]
    EmptyInput,
    #[error("slam timestamps out of order: now {now} s, prev {prev} s")]
    TimestampOrder { now: f64, prev: f64 },
    #[error("negative delay {0} s")]
    NegativeDelay(f64),
    #[error("tracker not initialized")]
    NotInitialized,
    #[error("initialization requires all {expected} markers, saw {seen}")]
    MissingMarkers { expected: usize, seen: usize },
    #[error("invalid marker configuration: {0}")]
    BadConfig(String),
    #[error("invalid observation: {0}")]
    BadObservation(String),
    #[error("unknown marker id {0}")]
    UnknownMarker(u32),
}

/// One physical marker: id, printed side length, and whether it is the
/// reported target frame. Corners live at `(±s/2, ±s/2, 0)` in the marker
/// frame, ordered (−,−), (+,−), (+,+), (−,+).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MarkerConfig {
    pub marker_id: u32,
    pub side_length: f64,
    pub target_flag: bool,
}

impl MarkerConfig {
    pub fn corners(&self) -> [Vector3<f64>; 4] {
        let h = self.side_length / 2.0;
        [
            Vector3::new(-h, -h, 0.0),
            Vector3::new(h, -h, 0.0),
            Vector3::new(h, h, 0.0),
            Vector3::new(-h, h, 0.0),
        ]
    }
}

/// Validated set of marker configs with exactly one target.
#[derive(Clone, Debug)]
pub struct MarkerSet {
    configs: BTreeMap<u32, MarkerConfig>,
    target_id: u32,
}

impl MarkerSet {
    pub fn new(configs: Vec<MarkerConfig>) -> Result<Self, MarkerError> {
        if configs.iter().any(|c| c.side_length <= 0.0) {
            return Err(MarkerError::BadConfig("side_length must be positive".into()));
        }
        let targets: Vec<u32> = configs.iter().filter(|c| c.target_flag).map(|c| c.marker_id).collect();
        if targets.len() != 1 {
            return Err(MarkerError::BadConfig(format!(
                "expected exactly one target marker, found {}",
                targets.len()
            )));
        }
        let mut map = BTreeMap::new();
        for c in configs {
            if map.insert(c.marker_id, c).is_some() {
                return Err(MarkerError::BadConfig(format!("duplicate marker id {}", c.marker_id)));
            }
        }
        Ok(Self {
            configs: map,
            target_id: targets[0],
        })
    }

    pub fn target_id(&self) -> u32 {
        self.target_id
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&MarkerConfig> {
        self.configs.get(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.configs.keys().copied()
    }
}

/// Detected marker corners in pixels, in the configured corner order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarkerObservation {
    pub marker_id: u32,
    pub corners: [[f64; 2]; 4],
    pub timestamp: f64,
}

impl MarkerObservation {
    pub fn new(
        marker_id: u32,
        corners: [[f64; 2]; 4],
        timestamp: f64,
        k: &CameraIntrinsics,
    ) -> Result<Self, MarkerError> {
        for c in &corners {
            if !k.contains(c[0], c[1]) {
                return Err(MarkerError::BadObservation(format!(
                    "corner ({}, {}) outside image",
                    c[0], c[1]
                )));
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                if corners[i] == corners[j] {
                    return Err(MarkerError::BadObservation("coincident corners".into()));
                }
            }
        }
        Ok(Self {
            marker_id,
            corners,
            timestamp,
        })
    }
}

/// Camera ego-motion estimate: camera pose in the fixed world frame plus
/// linear and angular velocity in world coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlamEstimate {
    pub pose_cam_in_world: Pose,
    pub linear_velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    pub timestamp: f64,
}

impl SlamEstimate {
    pub fn linear(&self) -> Vector3<f64> {
        Vector3::from_column_slice(&self.linear_velocity)
    }

    pub fn angular(&self) -> Vector3<f64> {
        Vector3::from_column_slice(&self.angular_velocity)
    }
}

/// Tracker memory between frames: relative marker poses, the latest target
/// estimate at its capture time, the matching ego-motion sample, and the
/// system delay used for output extrapolation.
#[derive(Clone, Debug)]
pub struct TrackerState {
    pub relative_poses: BTreeMap<u32, Pose>,
    pub last_target_pose: Pose,
    pub last_slam: SlamEstimate,
    pub delay: f64,
}

/// Record of either stream as carried in the JSON-lines interface.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum StreamRecord {
    Marker(MarkerObservation),
    Slam(SlamEstimate),
}

/// Pose of a planar marker in the camera frame from its four corner pixels:
/// closed-form planar DLT seed refined by Gauss-Newton on the reprojection
/// error (≤ 50 iterations, 1e-10 step tolerance).
pub fn solve_marker_pose(
    obs: &MarkerObservation,
    cfg: &MarkerConfig,
    k: &CameraIntrinsics,
) -> Result<Pose, MarkerError> {
    let min_area = corner_triangle_min_area(&obs.corners);
    if min_area <= 1e-6 {
        return Err(MarkerError::DegenerateCorners(min_area));
    }
    let corners_3d = cfg.corners();
    let plane: [Point2<f64>; 4] = [
        Point2::new(corners_3d[0].x, corners_3d[0].y),
        Point2::new(corners_3d[1].x, corners_3d[1].y),
        Point2::new(corners_3d[2].x, corners_3d[2].y),
        Point2::new(corners_3d[3].x, corners_3d[3].y),
    ];
    let image: [Point2<f64>; 4] = [
        Point2::new(
            (obs.corners[0][0] - k.center_x) / k.focal_x,
            (obs.corners[0][1] - k.center_y) / k.focal_y,
        ),
        Point2::new(
            (obs.corners[1][0] - k.center_x) / k.focal_x,
            (obs.corners[1][1] - k.center_y) / k.focal_y,
        ),
        Point2::new(
            (obs.corners[2][0] - k.center_x) / k.focal_x,
            (obs.corners[2][1] - k.center_y) / k.focal_y,
        ),
        Point2::new(
            (obs.corners[3][0] - k.center_x) / k.focal_x,
            (obs.corners[3][1] - k.center_y) / k.focal_y,
        ),
    ];
    let h = dlt_homography(&plane, &image).ok_or(MarkerError::DegenerateCorners(min_area))?;
    let (mut rotation, mut translation) = decompose_planar_homography(&h);
    if translation.z <= 0.0 {
        return Err(MarkerError::BehindCamera(translation.z));
    }

    // Gauss-Newton on pixel reprojection error with a left perturbation.
    for _ in 0..50 {
        let mut hess = Matrix6::<f64>::zeros();
        let mut grad = Vector6::<f64>::zeros();
        for (p_m, obs_px) in corners_3d.iter().zip(&obs.corners) {
            let p_cam = rotation * p_m + translation;
            if p_cam.z <= 1e-9 {
                return Err(MarkerError::BehindCamera(p_cam.z));
            }
            let (u, v) = (
                k.focal_x * p_cam.x / p_cam.z + k.center_x,
                k.focal_y * p_cam.y / p_cam.z + k.center_y,
            );
            let r = Vector2::new(obs_px[0] - u, obs_px[1] - v);
            let z2 = p_cam.z * p_cam.z;
            // ∂(u,v)/∂p_cam rows.
            let du = Vector3::new(k.focal_x / p_cam.z, 0.0, -k.focal_x * p_cam.x / z2);
            let dv = Vector3::new(0.0, k.focal_y / p_cam.z, -k.focal_y * p_cam.y / z2);
            // ∂p_cam/∂[δt, δθ] = [I | −[p_cam]×].
            let skew = so3_hat(&p_cam);
            for (drow, res) in [(du, r.x), (dv, r.y)] {
                let mut jrow = Vector6::zeros();
                jrow.fixed_rows_mut::<3>(0).copy_from(&drow);
                jrow.fixed_rows_mut::<3>(3).copy_from(&(-skew.transpose() * drow));
                hess += jrow * jrow.transpose();
                grad += jrow * res;
            }
        }
        for d in 0..6 {
            hess[(d, d)] += 1e-12;
        }
        let Some(delta) = hess.cholesky().map(|c| c.solve(&grad)) else {
            break;
        };
        let dt = Vector3::new(delta[0], delta[1], delta[2]);
        let dw = Vector3::new(delta[3], delta[4], delta[5]);
        let dr = so3_exp(&dw);
        rotation = dr * rotation;
        translation = dr * translation + dt;
        if delta.norm() < 1e-10 {
            break;
        }
    }
    if translation.z <= 0.0 {
        return Err(MarkerError::BehindCamera(translation.z));
    }
    Ok(Pose::from_parts_unchecked(rotation, translation).with_timestamp(obs.timestamp))
}

fn corner_triangle_min_area(corners: &[[f64; 2]; 4]) -> f64 {
    let mut min_area = f64::INFINITY;
    for i in 0..4 {
        for j in (i + 1)..4 {
            for l in (j + 1)..4 {
                let ax = corners[j][0] - corners[i][0];
                let ay = corners[j][1] - corners[i][1];
                let bx = corners[l][0] - corners[i][0];
                let by = corners[l][1] - corners[i][1];
                min_area = min_area.min(0.5 * (ax * by - ay * bx).abs());
            }
        }
    }
    min_area
}

/// Four-point DLT with isotropic normalization on both sides. Maps plane
/// coordinates to normalized camera coordinates.
fn dlt_homography(plane: &[Point2<f64>; 4], image: &[Point2<f64>; 4]) -> Option<Matrix3<f64>> {
    let norm = |pts: &[Point2<f64>; 4]| -> (Matrix3<f64>, [Point2<f64>; 4]) {
        let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
        let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
        let mean_dist = pts
            .iter()
            .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
            .sum::<f64>()
            / 4.0;
        let s = if mean_dist > 0.0 { 2f64.sqrt() / mean_dist } else { 1.0 };
        let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
        let mapped = [
            Point2::new(s * (pts[0].x - cx), s * (pts[0].y - cy)),
            Point2::new(s * (pts[1].x - cx), s * (pts[1].y - cy)),
            Point2::new(s * (pts[2].x - cx), s * (pts[2].y - cy)),
            Point2::new(s * (pts[3].x - cx), s * (pts[3].y - cy)),
        ];
        (t, mapped)
    };
    let (t_plane, p) = norm(plane);
    let (t_image, q) = norm(image);

    // Null vector of the 8×9 design matrix via the smallest eigenvector of
    // the 9×9 normal matrix.
    let mut ata = nalgebra::SMatrix::<f64, 9, 9>::zeros();
    for i in 0..4 {
        let (x, y) = (p[i].x, p[i].y);
        let (u, v) = (q[i].x, q[i].y);
        let rows = [
            [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u],
            [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v],
        ];
        for row in rows {
            for a in 0..9 {
                for b in 0..9 {
                    ata[(a, b)] += row[a] * row[b];
                }
            }
        }
    }
    let eig = ata.symmetric_eigen();
    let mut min_idx = 0;
    for i in 1..9 {
        if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
            min_idx = i;
        }
    }
    let h_vec = eig.eigenvectors.column(min_idx);
    let h_norm = Matrix3::new(
        h_vec[0], h_vec[1], h_vec[2], h_vec[3], h_vec[4], h_vec[5], h_vec[6], h_vec[7], h_vec[8],
    );
    let t_image_inv = t_image.try_inverse()?;
    Some(t_image_inv * h_norm * t_plane)
}

/// Planar decomposition of a normalized-coordinate homography into a seed
/// rotation and translation, flipped in front of the camera.
fn decompose_planar_homography(h: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let mut h = *h;
    let h1 = Vector3::new(h[(0, 0)], h[(1, 0)], h[(2, 0)]);
    let h2 = Vector3::new(h[(0, 1)], h[(1, 1)], h[(2, 1)]);
    let scale = 2.0 / (h1.norm() + h2.norm());
    h *= scale;
    if h[(2, 2)] < 0.0 {
        h = -h;
    }
    let r1 = Vector3::new(h[(0, 0)], h[(1, 0)], h[(2, 0)]);
    let r2 = Vector3::new(h[(0, 1)], h[(1, 1)], h[(2, 1)]);
    let t = Vector3::new(h[(0, 2)], h[(1, 2)], h[(2, 2)]);
    let r3 = r1.cross(&r2);
    let approx = Matrix3::from_columns(&[r1, r2, r3]);
    let svd = approx.svd(true, true);
    let mut u = svd.u.expect("3x3 SVD");
    let v_t = svd.v_t.expect("3x3 SVD");
    if (u * v_t).determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    (u * v_t, t)
}

/// `T_m^hc = T_i^hc ∘ T_m^i`: carry another marker's estimate onto the
/// target through the stored relative pose.
pub fn transform_to_target(pose_i: &Pose, rel: &Pose) -> Pose {
    pose_i.compose(rel)
}

/// Consensus average of pose estimates. Fewer than three estimates are
/// averaged directly; otherwise the largest consensus set under the given
/// tolerances wins (ties broken by lowest summed residual, then lowest
/// hypothesis index) and is averaged. Rotation averaging is the normalized
/// quaternion mean on the hemisphere of the first member.
pub fn ransac_average(
    poses: &[Pose],
    inlier_trans_tol: f64,
    inlier_rot_tol: f64,
) -> Result<Pose, MarkerError> {
    if poses.is_empty() {
        return Err(MarkerError::EmptyInput);
    }
    if poses.len() < 3 {
        return Ok(average_poses(poses));
    }
    let mut best: Option<(Vec<usize>, f64, usize)> = None;
    for (c, candidate) in poses.iter().enumerate() {
        let mut inliers = Vec::new();
        let mut residual = 0.0;
        for (idx, pose) in poses.iter().enumerate() {
            let dt = candidate.translation_distance_to(pose);
            let dr = candidate.rotation_angle_to(pose);
            if dt <= inlier_trans_tol && dr <= inlier_rot_tol {
                inliers.push(idx);
                residual += dt / inlier_trans_tol + dr / inlier_rot_tol;
            }
        }
        let better = match &best {
            None => true,
            Some((b_inliers, b_residual, _)) => {
                inliers.len() > b_inliers.len()
                    || (inliers.len() == b_inliers.len() && residual < *b_residual)
            }
        };
        if better {
            best = Some((inliers, residual, c));
        }
    }
    let (inliers, _, _) = best.expect("non-empty input");
    let selected: Vec<Pose> = inliers.iter().map(|&i| poses[i]).collect();
    Ok(average_poses(&selected))
}

fn average_poses(poses: &[Pose]) -> Pose {
    let mut t_sum = Vector3::zeros();
    for p in poses {
        t_sum += p.translation();
    }
    let t = t_sum / poses.len() as f64;

    let first = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
        *poses[0].rotation(),
    ));
    let mut q_sum = Vector4::zeros();
    for p in poses {
        let q = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
            *p.rotation(),
        ));
        let mut coords = Vector4::new(q.w, q.i, q.j, q.k);
        let first_coords = Vector4::new(first.w, first.i, first.j, first.k);
        if coords.dot(&first_coords) < 0.0 {
            coords = -coords;
        }
        q_sum += coords;
    }
    let q_mean = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        q_sum[0], q_sum[1], q_sum[2], q_sum[3],
    ));
    Pose::from_parts_unchecked(*q_mean.to_rotation_matrix().matrix(), t)
}

/// Carry the target pose across a frame with no detections using the
/// relative camera motion between two ego-motion samples (static object):
/// `T_m^hc(t) = T_w^hc(t) ∘ T_hc^w(t−Δt) ∘ T_m^hc(t−Δt)`.
pub fn slam_integrate(
    slam_now: &SlamEstimate,
    slam_prev: &SlamEstimate,
    target_prev: &Pose,
) -> Result<Pose, MarkerError> {
    if slam_now.timestamp <= slam_prev.timestamp {
        return Err(MarkerError::TimestampOrder {
            now: slam_now.timestamp,
            prev: slam_prev.timestamp,
        });
    }
    Ok(slam_now
        .pose_cam_in_world
        .inverse()
        .compose(&slam_prev.pose_cam_in_world)
        .compose(target_prev))
}

/// Extrapolate the target pose to `t + t_d` by predicting the camera pose
/// with first-order kinematics: world-frame translation advances by `v·t_d`
/// and the rotation by `exp([ω·t_d]×)` on the left.
pub fn delay_compensate(state: &TrackerState, slam: &SlamEstimate) -> Result<Pose, MarkerError> {
    if state.delay < 0.0 {
        return Err(MarkerError::NegativeDelay(state.delay));
    }
    if state.delay == 0.0 {
        return Ok(state.last_target_pose);
    }
    let cam = &slam.pose_cam_in_world;
    let future_rotation = so3_exp(&(slam.angular() * state.delay)) * cam.rotation();
    let future_translation = cam.translation() + slam.linear() * state.delay;
    let future_cam = Pose::from_parts_unchecked(future_rotation, future_translation);
    Ok(future_cam
        .inverse()
        .compose(cam)
        .compose(&state.last_target_pose))
}

/// Inlier tolerances for the per-frame consensus step.
#[derive(Clone, Copy, Debug)]
pub struct ConsensusTolerances {
    pub translation: f64,
    pub rotation: f64,
}

impl Default for ConsensusTolerances {
    fn default() -> Self {
        Self {
            translation: 0.05,
            rotation: 10f64.to_radians(),
        }
    }
}

/// Build the initial tracker state. Requires every configured marker to be
/// visible so all relative poses can be saved.
pub fn initialize_tracker(
    detections: &[MarkerObservation],
    slam: &SlamEstimate,
    markers: &MarkerSet,
    k: &CameraIntrinsics,
    delay: f64,
) -> Result<TrackerState, MarkerError> {
    if delay < 0.0 {
        return Err(MarkerError::NegativeDelay(delay));
    }
    let mut solved = BTreeMap::new();
    for obs in detections {
        let cfg = markers
            .get(obs.marker_id)
            .ok_or(MarkerError::UnknownMarker(obs.marker_id))?;
        solved.insert(obs.marker_id, solve_marker_pose(obs, cfg, k)?);
    }
    if solved.len() != markers.len() {
        return Err(MarkerError::MissingMarkers {
            expected: markers.len(),
            seen: solved.len(),
        });
    }
    let target = solved[&markers.target_id()];
    let mut relative_poses = BTreeMap::new();
    for (&id, pose_i) in &solved {
        relative_poses.insert(id, pose_i.inverse().compose(&target));
    }
    Ok(TrackerState {
        relative_poses,
        last_target_pose: target,
        last_slam: slam.clone(),
        delay,
    })
}

/// One tracking step. Branches on visibility:
/// all markers → fuse and refresh the relative poses; some → fuse without
/// refreshing; none → ego-motion integration. The returned pose is always
/// delay-compensated; the returned state stores the un-compensated estimate
/// at capture time.
pub fn track_step(
    state: &TrackerState,
    detections: &[MarkerObservation],
    slam: &SlamEstimate,
    markers: &MarkerSet,
    k: &CameraIntrinsics,
    tolerances: &ConsensusTolerances,
) -> Result<(Pose, TrackerState), MarkerError> {
    if state.relative_poses.len() != markers.len()
        || markers.ids().any(|id| !state.relative_poses.contains_key(&id))
    {
        return Err(MarkerError::NotInitialized);
    }
    let mut solved = BTreeMap::new();
    for obs in detections {
        let cfg = markers
            .get(obs.marker_id)
            .ok_or(MarkerError::UnknownMarker(obs.marker_id))?;
        // An observation the solver rejects (degenerate or behind-camera)
        // counts as not detected this frame.
        if let Ok(pose) = solve_marker_pose(obs, cfg, k) {
            solved.insert(obs.marker_id, pose);
        }
    }

    let mut next = state.clone();
    if solved.is_empty() {
        next.last_target_pose = slam_integrate(slam, &state.last_slam, &state.last_target_pose)?;
    } else {
        let candidates: Vec<Pose> = solved
            .iter()
            .map(|(id, pose_i)| transform_to_target(pose_i, &state.relative_poses[id]))
            .collect();
        let fused = ransac_average(&candidates, tolerances.translation, tolerances.rotation)?;
        if solved.len() == markers.len() {
            for (&id, pose_i) in &solved {
                next.relative_poses.insert(id, pose_i.inverse().compose(&fused));
            }
        }
        next.last_target_pose = fused;
    }
    next.last_slam = slam.clone();
    let output = delay_compensate(&next, slam)?;
    Ok((output, next))
}

/// Streaming wrapper over the value-passing tracker functions.
pub struct MarkerTracker {
    markers: MarkerSet,
    intrinsics: CameraIntrinsics,
    tolerances: ConsensusTolerances,
    delay: f64,
    state: Option<TrackerState>,
}

impl MarkerTracker {
    pub fn new(markers: MarkerSet, intrinsics: CameraIntrinsics, delay: f64) -> Result<Self, MarkerError> {
        if delay < 0.0 {
            return Err(MarkerError::NegativeDelay(delay));
        }
        Ok(Self {
            markers,
            intrinsics,
            tolerances: ConsensusTolerances::default(),
            delay,
            state: None,
        })
    }

    pub fn initialize(
        &mut self,
        detections: &[MarkerObservation],
        slam: &SlamEstimate,
    ) -> Result<(), MarkerError> {
        self.state = Some(initialize_tracker(
            detections,
            slam,
            &self.markers,
            &self.intrinsics,
            self.delay,
        )?);
        Ok(())
    }

    pub fn is_initialized(&self) -> bool {
        self.state.is_some()
    }

    pub fn step(
        &mut self,
        detections: &[MarkerObservation],
        slam: &SlamEstimate,
    ) -> Result<Pose, MarkerError> {
        let state = self.state.as_ref().ok_or(MarkerError::NotInitialized)?;
        let (pose, next) = track_step(
            state,
            detections,
            slam,
            &self.markers,
            &self.intrinsics,
            &self.tolerances,
        )?;
        self.state = Some(next);
        Ok(pose)
    }

    pub fn state(&self) -> Option<&TrackerState> {
        self.state.as_ref()
    }
}

/// Parse one line of the marker/ego-motion JSON-lines stream.
pub fn parse_stream_line(line: &str) -> Result<StreamRecord, serde_json::Error> {
    serde_json::from_str(line)
}
