//! Object pose pipeline for targets with no prior geometry: a detector crop
//! builds the object model online, scan-to-scan odometry tracks ego-motion,
//! a local registration against the model provides confident absolute
//! poses, and a pose-graph backend ties everything together. Detector boxes
//! of other classes are turned into xy-plane boxes that mask moving or
//! occluding geometry out of every stage.

use crate::geometry::{CameraIntrinsics, Pose};
use crate::pose_graph::{EdgeKind, PoseGraph, PoseGraphError};
use crate::registration::{
    estimate_normals, icp, weighted_centroid, IcpParams, IcpVariant, PointCloud,
    RegistrationError, RegistrationResult,
};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("detector crop contains no points")]
    EmptyCrop,
    #[error("pipeline not initialized")]
    NotInitialized,
    #[error("invalid bounding box: {0}")]
    BadBox(String),
    #[error("invalid pipeline config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error(transparent)]
    Graph(#[from] PoseGraphError),
}

/// Detector output box in pixels, top-left / bottom-right corners.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BBox2D {
    pub class_label: String,
    pub score: f64,
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BBox2D {
    pub fn new(
        class_label: impl Into<String>,
        score: f64,
        corners: (f64, f64, f64, f64),
    ) -> Result<Self, PipelineError> {
        let (u_min, v_min, u_max, v_max) = corners;
        if u_min >= u_max || v_min >= v_max {
            return Err(PipelineError::BadBox(format!(
                "corners ({u_min}, {v_min}) / ({u_max}, {v_max}) are not ordered"
            )));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(PipelineError::BadBox(format!("score {score}")));
        }
        Ok(Self {
            class_label: class_label.into(),
            score,
            u_min,
            v_min,
            u_max,
            v_max,
        })
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        (self.u_min..=self.u_max).contains(&u) && (self.v_min..=self.v_max).contains(&v)
    }
}

/// Axis-aligned xy-plane box in the sensor frame used to mask out one
/// occluding or moving object, with its smoothing margin and window.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BBox3DXY {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
    pub margin: f64,
    pub window: u32,
}

impl BBox3DXY {
    pub fn new(
        bounds: (f64, f64, f64, f64),
        margin: f64,
        window: u32,
    ) -> Result<Self, PipelineError> {
        let (min_x, min_y, max_x, max_y) = bounds;
        if min_x >= max_x || min_y >= max_y {
            return Err(PipelineError::BadBox("xy bounds are not ordered".into()));
        }
        if margin < 0.0 {
            return Err(PipelineError::BadBox(format!("margin {margin}")));
        }
        Ok(Self {
            min_x,
            min_y,
            max_x,
            max_y,
            margin,
            window,
        })
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        (self.min_x..=self.max_x).contains(&x) && (self.min_y..=self.max_y).contains(&y)
    }
}

/// One tracked occluder box with its miss counter.
#[derive(Clone, Debug)]
pub struct TrackedBox {
    pub class_label: String,
    pub bbox: BBox3DXY,
    pub missed: u32,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    /// Local-pose fitness above which the estimate resets the backend.
    pub confidence_threshold: f64,
    /// Voxel size for the online object model.
    pub model_voxel: f64,
    /// Voxel size scans are reduced to before registration.
    pub scan_voxel: f64,
    /// Exponential smoothing factor for the occluder boxes.
    pub box_alpha: f64,
    /// Margin added around occluder boxes, in meters.
    pub box_margin: f64,
    /// Occluder boxes expire after this many missed detector frames.
    pub box_expiry: u32,
    pub target_class: String,
    /// Detector runs every `detector_stride` frames.
    pub detector_stride: usize,
    pub use_backend: bool,
    pub use_local: bool,
    /// Backend optimization cadence in frames.
    pub backend_every: usize,
    /// Non-consecutive registration edges every this many frames.
    pub skip_edge_stride: usize,
    /// Weight of consecutive edges in the graph objective.
    pub lambda_consecutive: f64,
    pub icp: IcpParams,
    /// Neighborhood size for scan normals (point-to-plane registration).
    pub normals_k: usize,
    /// Margin around the predicted model box when cropping the scan for the
    /// local pose.
    pub local_crop_margin: f64,
    pub range_min: f64,
    pub range_max: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.6,
            model_voxel: 0.03,
            scan_voxel: 0.04,
            box_alpha: 0.3,
            box_margin: 0.1,
            box_expiry: 10,
            target_class: "pipe".into(),
            detector_stride: 1,
            use_backend: true,
            use_local: true,
            backend_every: 10,
            skip_edge_stride: 5,
            lambda_consecutive: 2.0,
            icp: IcpParams {
                variant: IcpVariant::PointToPlane,
                max_corr_dist: vec![0.4, 0.2, 0.08],
                max_iters: 30,
                rel_tol: 1e-6,
            },
            normals_k: 10,
            local_crop_margin: 0.3,
            range_min: 0.9,
            range_max: 100.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..1.0).contains(&self.confidence_threshold) || self.confidence_threshold == 0.0 {
            return Err(PipelineError::BadConfig(format!(
                "confidence threshold {} outside (0, 1)",
                self.confidence_threshold
            )));
        }
        if self.detector_stride == 0 || self.backend_every == 0 || self.skip_edge_stride == 0 {
            return Err(PipelineError::BadConfig("strides must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PipelineState {
    pub object_model: PointCloud,
    /// Object pose in the world frame (= sensor frame at initialization).
    pub initial_object_pose: Pose,
    /// Current object pose in the sensor frame.
    pub global_pose: Pose,
    pub last_scan: PointCloud,
    pub graph: PoseGraph,
    pub confidence_threshold: f64,
    pub dynamic_boxes: Vec<TrackedBox>,
    keyframes: Vec<PointCloud>,
    frame_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseSource {
    Odom,
    Reset,
}

/// One output record, serialized as JSON-lines
/// `{"time": …, "pose": {…}, "fitness": …, "source": "odom"|"reset"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub time: f64,
    pub pose: Pose,
    pub fitness: f64,
    pub source: PoseSource,
}

/// Project every cloud point with positive camera-frame depth into the
/// image; points leaving the image bounds are dropped so downstream box
/// tests only see valid pixels. `lidar_to_camera` maps sensor coordinates
/// into the camera frame.
pub fn project_to_image(
    cloud: &PointCloud,
    lidar_to_camera: &Pose,
    k: &CameraIntrinsics,
) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let cam = lidar_to_camera.transform_point(&p.coords);
        if let Some((u, v)) = k.project(&cam) {
            if k.contains(u, v) {
                out.push((i, u, v));
            }
        }
    }
    out
}

/// Keep the points whose projection falls inside the detector box,
/// preserving order.
pub fn crop_by_bbox(
    cloud: &PointCloud,
    projections: &[(usize, f64, f64)],
    bbox: &BBox2D,
) -> PointCloud {
    let mut keep = vec![false; cloud.len()];
    for &(i, u, v) in projections {
        if bbox.contains(u, v) {
            keep[i] = true;
        }
    }
    cloud.filtered(|i, _| keep[i])
}

/// Build the online object model from the target crop: voxel deduplication
/// followed by centering at the crop centroid, so the model frame sits at
/// the weighted centroid.
pub fn build_object_model(
    scan: &PointCloud,
    bbox: &BBox2D,
    lidar_to_camera: &Pose,
    k: &CameraIntrinsics,
    voxel: f64,
) -> Result<PointCloud, PipelineError> {
    let projections = project_to_image(scan, lidar_to_camera, k);
    let crop = crop_by_bbox(scan, &projections, bbox);
    if crop.is_empty() {
        return Err(PipelineError::EmptyCrop);
    }
    let reduced = crop.voxel_downsampled(voxel);
    let centroid = weighted_centroid(&reduced, None)?;
    let centered = reduced.filtered(|_, _| true).transformed(&Pose::from_translation(-centroid));
    Ok(centered)
}

/// Refresh the per-class occluder boxes from this frame's detections:
/// crop, xy bounds expanded by the margin, exponential smoothing against
/// the previous box, and expiry after `box_expiry` missed frames.
pub fn update_dynamic_boxes(
    previous: &[TrackedBox],
    scan: &PointCloud,
    detections: &[BBox2D],
    lidar_to_camera: &Pose,
    k: &CameraIntrinsics,
    cfg: &PipelineConfig,
) -> Vec<TrackedBox> {
    let projections = project_to_image(scan, lidar_to_camera, k);
    let mut next: Vec<TrackedBox> = Vec::new();
    let mut seen: Vec<&str> = Vec::new();
    for det in detections {
        if det.class_label == cfg.target_class {
            continue;
        }
        let crop = crop_by_bbox(scan, &projections, det);
        if crop.is_empty() {
            continue;
        }
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in crop.points() {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        let raw = BBox3DXY {
            min_x: min_x - cfg.box_margin,
            min_y: min_y - cfg.box_margin,
            max_x: max_x + cfg.box_margin,
            max_y: max_y + cfg.box_margin,
            margin: cfg.box_margin,
            window: cfg.box_expiry,
        };
        let smoothed = match previous.iter().find(|t| t.class_label == det.class_label) {
            Some(prev) => {
                let a = cfg.box_alpha;
                BBox3DXY {
                    min_x: a * raw.min_x + (1.0 - a) * prev.bbox.min_x,
                    min_y: a * raw.min_y + (1.0 - a) * prev.bbox.min_y,
                    max_x: a * raw.max_x + (1.0 - a) * prev.bbox.max_x,
                    max_y: a * raw.max_y + (1.0 - a) * prev.bbox.max_y,
                    ..raw
                }
            }
            None => raw,
        };
        seen.push(det.class_label.as_str());
        next.push(TrackedBox {
            class_label: det.class_label.clone(),
            bbox: smoothed,
            missed: 0,
        });
    }
    // Undetected classes persist until their window runs out.
    for prev in previous {
        if seen.contains(&prev.class_label.as_str()) {
            continue;
        }
        if prev.missed + 1 < prev.bbox.window {
            next.push(TrackedBox {
                class_label: prev.class_label.clone(),
                bbox: prev.bbox,
                missed: prev.missed + 1,
            });
        }
    }
    next
}

/// Remove every point whose (x, y) falls inside any occluder box.
pub fn mask_dynamic(scan: &PointCloud, boxes: &[BBox3DXY]) -> PointCloud {
    scan.filtered(|_, p| !boxes.iter().any(|b| b.contains_xy(p.x, p.y)))
}

/// Scan-to-scan registration at identity init; the result maps the current
/// scan's frame into the previous one.
pub fn odometry_step(
    prev: &PointCloud,
    cur: &PointCloud,
    params: &IcpParams,
) -> Result<RegistrationResult, PipelineError> {
    Ok(icp(prev, cur, &Pose::identity(), params)?)
}

/// Registration of the (cropped) scan against the object model; the fitness
/// doubles as the confidence gate for backend resets.
pub fn local_object_pose(
    scan: &PointCloud,
    model: &PointCloud,
    init: &Pose,
    params: &IcpParams,
) -> Result<RegistrationResult, PipelineError> {
    Ok(icp(scan, model, init, params)?)
}

/// Attach normals for point-to-plane registration; scans too small for the
/// neighborhood fall back to the plain cloud (and point-to-point matching).
fn with_scan_normals(cloud: PointCloud, cfg: &PipelineConfig) -> PointCloud {
    if cfg.icp.variant == IcpVariant::PointToPlane && cloud.len() > cfg.normals_k {
        match estimate_normals(&cloud, cfg.normals_k) {
            Ok(with_normals) => with_normals,
            Err(_) => cloud,
        }
    } else {
        cloud
    }
}

fn range_gate(scan: &PointCloud, cfg: &PipelineConfig) -> PointCloud {
    scan.filtered(|_, p| {
        let r = p.coords.norm();
        r >= cfg.range_min && r <= cfg.range_max
    })
}

fn model_bounds(model: &PointCloud) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in model.points() {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// Crop the scan to the model's bounding box (inflated by `margin`) placed
/// at the predicted pose.
fn crop_around_prediction(
    scan: &PointCloud,
    model: &PointCloud,
    predicted: &Pose,
    margin: f64,
) -> PointCloud {
    let (lo, hi) = model_bounds(model);
    let inv = predicted.inverse();
    scan.filtered(|_, p| {
        let q = inv.transform_point(&p.coords);
        (0..3).all(|a| q[a] >= lo[a] - margin && q[a] <= hi[a] + margin)
    })
}

impl PipelineState {
    /// Build the object model from the first scan and target detection and
    /// anchor the world frame at the current sensor pose.
    pub fn initialize(
        scan: &PointCloud,
        target_box: &BBox2D,
        detections: &[BBox2D],
        lidar_to_camera: &Pose,
        k: &CameraIntrinsics,
        cfg: &PipelineConfig,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let gated = range_gate(scan, cfg);
        let boxes = update_dynamic_boxes(&[], &gated, detections, lidar_to_camera, k, cfg);
        let visible = mask_dynamic(
            &gated,
            &boxes.iter().map(|t| t.bbox).collect::<Vec<_>>(),
        );
        let projections = project_to_image(&visible, lidar_to_camera, k);
        let crop = crop_by_bbox(&visible, &projections, target_box);
        if crop.is_empty() {
            return Err(PipelineError::EmptyCrop);
        }
        let reduced = crop.voxel_downsampled(cfg.model_voxel);
        let centroid = weighted_centroid(&reduced, None)?;
        let object_model = reduced.transformed(&Pose::from_translation(-centroid));
        let initial_object_pose = Pose::from_translation(centroid);

        let down = with_scan_normals(visible.voxel_downsampled(cfg.scan_voxel), cfg);
        let mut graph = PoseGraph::new();
        graph.add_vertex(Pose::identity());
        Ok(Self {
            object_model,
            initial_object_pose,
            global_pose: initial_object_pose,
            last_scan: down.clone(),
            graph,
            confidence_threshold: cfg.confidence_threshold,
            dynamic_boxes: boxes,
            keyframes: vec![down],
            frame_index: 0,
        })
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }
}

/// One pipeline step: mask, odometry, optional skip-edge and local-pose
/// constraints, optional backend optimization, and the fused output. The
/// object pose is odometry-propagated and replaced by the local estimate
/// whenever its fitness clears the confidence threshold.
pub fn pipeline_step(
    state: &PipelineState,
    scan: &PointCloud,
    detections: &[BBox2D],
    lidar_to_camera: &Pose,
    k: &CameraIntrinsics,
    time: f64,
    cfg: &PipelineConfig,
) -> Result<(PipelineOutput, PipelineState), PipelineError> {
    if state.object_model.is_empty() {
        return Err(PipelineError::NotInitialized);
    }
    cfg.validate()?;
    let mut next = state.clone();
    next.frame_index += 1;
    let frame = next.frame_index;
    let detector_frame = frame % cfg.detector_stride == 0;

    let gated = range_gate(scan, cfg);
    if detector_frame {
        next.dynamic_boxes =
            update_dynamic_boxes(&state.dynamic_boxes, &gated, detections, lidar_to_camera, k, cfg);
    }
    let masked = mask_dynamic(
        &gated,
        &next.dynamic_boxes.iter().map(|t| t.bbox).collect::<Vec<_>>(),
    );
    let down = with_scan_normals(masked.voxel_downsampled(cfg.scan_voxel), cfg);

    // Ego-motion between consecutive masked scans.
    let odo = odometry_step(&state.last_scan, &down, &cfg.icp)?;
    let predicted = odo.pose.inverse().compose(&state.global_pose);

    let prev_vertex = state.graph.vertices()[state.graph.vertices().len() - 1];
    let new_vertex = prev_vertex.compose(&odo.pose);
    next.graph.add_vertex(new_vertex);
    let vertex_idx = next.graph.vertices().len() - 1;
    next.graph.add_edge(
        vertex_idx - 1,
        vertex_idx,
        odo.pose,
        EdgeKind::Consecutive,
        cfg.lambda_consecutive,
    )?;

    // Multiway constraint against an older keyframe.
    if cfg.use_backend && frame % cfg.skip_edge_stride == 0 && frame >= cfg.skip_edge_stride {
        let anchor = vertex_idx - cfg.skip_edge_stride;
        let init = next.graph.vertices()[anchor]
            .inverse()
            .compose(&next.graph.vertices()[vertex_idx]);
        if let Ok(reg) = icp(&next.keyframes[anchor], &down, &init, &cfg.icp) {
            if reg.fitness > 0.2 {
                next.graph
                    .add_edge(anchor, vertex_idx, reg.pose, EdgeKind::Loop, 1.0)?;
            }
        }
    }

    // Local object pose on the crop around the prediction.
    let mut reset: Option<RegistrationResult> = None;
    if cfg.use_local && detector_frame {
        let crop = crop_around_prediction(&down, &state.object_model, &predicted, cfg.local_crop_margin);
        if !crop.is_empty() {
            if let Ok(local) = local_object_pose(&crop, &state.object_model, &predicted, &cfg.icp) {
                if local.fitness >= cfg.confidence_threshold {
                    let measured = state.initial_object_pose.compose(&local.pose.inverse());
                    if vertex_idx > 0 {
                        next.graph
                            .add_edge(0, vertex_idx, measured, EdgeKind::Loop, 1.0)?;
                    }
                    reset = Some(local);
                }
            }
        }
    }

    if cfg.use_backend && (frame % cfg.backend_every == 0 || reset.is_some()) {
        let (optimized, _) = next.graph.optimize(15, 1e-9)?;
        next.graph = optimized;
    }

    let (pose, fitness, source) = match reset {
        Some(local) => (local.pose, local.fitness, PoseSource::Reset),
        None => {
            let pose = if cfg.use_backend {
                next.graph.vertices()[vertex_idx]
                    .inverse()
                    .compose(&state.initial_object_pose)
            } else {
                predicted
            };
            (pose, odo.fitness, PoseSource::Odom)
        }
    };

    next.global_pose = pose;
    next.keyframes.push(down.clone());
    next.last_scan = down;

    Ok((
        PipelineOutput {
            time,
            pose,
            fitness,
            source,
        },
        next,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Point3;

    fn intrinsics() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640.0, 480.0).unwrap()
    }

    fn grid_cloud(nx: usize, ny: usize, z: f64, pitch: f64) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                pts.push(Point3::new(
                    (i as f64 - nx as f64 / 2.0) * pitch,
                    (j as f64 - ny as f64 / 2.0) * pitch,
                    z,
                ));
            }
        }
        PointCloud::new(pts, "lidar").unwrap()
    }

    #[test]
    fn projection_basics() {
        let k = intrinsics();
        let cloud = PointCloud::new(
            vec![
                Point3::new(0.0, 0.0, 1.0),
                Point3::new(0.0, 0.0, -1.0),
                Point3::new(10.0, 0.0, 1.0),
            ],
            "lidar",
        )
        .unwrap();
        let projections = project_to_image(&cloud, &Pose::identity(), &k);
        // On-axis point lands at the principal point; the behind-camera and
        // out-of-image points are excluded.
        assert_eq!(projections.len(), 1);
        assert_eq!(projections[0].0, 0);
        assert_abs_diff_eq!(projections[0].1, 320.0, epsilon = 1e-12);
        assert_abs_diff_eq!(projections[0].2, 240.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_matches_forward_oracle() {
        let k = intrinsics();
        let cloud = grid_cloud(5, 5, 2.0, 0.1);
        let extrinsic = Pose::from_translation(Vector3::new(0.05, -0.02, 0.0));
        let projections = project_to_image(&cloud, &extrinsic, &k);
        for &(i, u, v) in &projections {
            let cam = extrinsic.transform_point(&cloud.points()[i].coords);
            assert_abs_diff_eq!(u, 500.0 * cam.x / cam.z + 320.0, epsilon = 1e-6);
            assert_abs_diff_eq!(v, 500.0 * cam.y / cam.z + 240.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn crop_selects_exact_subsets() {
        let k = intrinsics();
        let cloud = grid_cloud(9, 9, 2.0, 0.2);
        let projections = project_to_image(&cloud, &Pose::identity(), &k);
        let full = BBox2D::new("pipe", 0.9, (0.0, 0.0, 640.0, 480.0)).unwrap();
        let all = crop_by_bbox(&cloud, &projections, &full);
        assert_eq!(all.len(), projections.len());

        // Zero-margin box around one projected point picks exactly it.
        let (idx, u, v) = projections[projections.len() / 2];
        let tight = BBox2D::new("pipe", 0.9, (u - 0.5, v - 0.5, u + 0.5, v + 0.5)).unwrap();
        let one = crop_by_bbox(&cloud, &projections, &tight);
        assert_eq!(one.len(), 1);
        assert_eq!(one.points()[0], cloud.points()[idx]);

        let nowhere = BBox2D::new("pipe", 0.9, (600.0, 470.0, 639.0, 479.0)).unwrap();
        assert!(crop_by_bbox(&cloud, &projections, &nowhere).is_empty());
    }

    #[test]
    fn object_model_is_centered_and_reduced() {
        let k = intrinsics();
        let cloud = grid_cloud(20, 20, 2.0, 0.02);
        let bbox = BBox2D::new("pipe", 0.9, (200.0, 150.0, 440.0, 330.0)).unwrap();
        let model = build_object_model(&cloud, &bbox, &Pose::identity(), &k, 0.03).unwrap();
        assert!(model.len() <= cloud.len());
        assert!(!model.is_empty());
        let centroid = weighted_centroid(&model, None).unwrap();
        assert!(centroid.norm() < 1e-9);

        // Voxel larger than the extent collapses to a single point at zero.
        let tiny = build_object_model(&cloud, &bbox, &Pose::identity(), &k, 100.0).unwrap();
        assert_eq!(tiny.len(), 1);
        assert!(tiny.points()[0].coords.norm() < 1e-9);

        let empty_box = BBox2D::new("pipe", 0.9, (0.0, 0.0, 1.0, 1.0)).unwrap();
        assert!(matches!(
            build_object_model(&cloud, &empty_box, &Pose::identity(), &k, 0.03),
            Err(PipelineError::EmptyCrop)
        ));
    }

    #[test]
    fn dynamic_boxes_track_and_expire() {
        let k = intrinsics();
        let cfg = PipelineConfig {
            box_margin: 0.05,
            box_expiry: 3,
            ..PipelineConfig::default()
        };
        // Occluder block centered on the axis at z = 1.5.
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push(Point3::new(
                    -0.2 + 0.04 * i as f64,
                    -0.2 + 0.04 * j as f64,
                    1.5,
                ));
            }
        }
        let scan = PointCloud::new(pts, "lidar").unwrap();
        let det = BBox2D::new("arm", 0.8, (100.0, 60.0, 540.0, 420.0)).unwrap();
        let boxes = update_dynamic_boxes(&[], &scan, &[det.clone()], &Pose::identity(), &k, &cfg);
        assert_eq!(boxes.len(), 1);
        let b = &boxes[0].bbox;
        // Box contains all occluder points, inflated by the margin.
        assert!(b.min_x <= -0.2 && b.max_x >= 0.16);
        assert!(b.min_x >= -0.2 - 0.051 && b.max_x <= 0.16 + 0.051);

        // No detections: the box persists with a growing miss count, then
        // expires after the window.
        let mut current = boxes;
        for _ in 0..2 {
            current = update_dynamic_boxes(&current, &scan, &[], &Pose::identity(), &k, &cfg);
            assert_eq!(current.len(), 1);
        }
        current = update_dynamic_boxes(&current, &scan, &[], &Pose::identity(), &k, &cfg);
        assert!(current.is_empty());
    }

    #[test]
    fn two_occluders_stay_separate() {
        let k = intrinsics();
        let cfg = PipelineConfig::default();
        let mut pts = Vec::new();
        // Left block x ∈ [−0.5, −0.3], right block x ∈ [0.3, 0.5].
        for i in 0..6 {
            pts.push(Point3::new(-0.5 + 0.04 * i as f64, 0.0, 1.5));
            pts.push(Point3::new(0.3 + 0.04 * i as f64, 0.0, 1.5));
        }
        let scan = PointCloud::new(pts, "lidar").unwrap();
        // Left block projects to u < 320, right to u > 320.
        let left = BBox2D::new("arm", 0.9, (0.0, 200.0, 320.0, 280.0)).unwrap();
        let right = BBox2D::new("cage", 0.9, (320.0, 200.0, 640.0, 280.0)).unwrap();
        let boxes = update_dynamic_boxes(&[], &scan, &[left, right], &Pose::identity(), &k, &cfg);
        assert_eq!(boxes.len(), 2);
        let arm = boxes.iter().find(|b| b.class_label == "arm").unwrap();
        let cage = boxes.iter().find(|b| b.class_label == "cage").unwrap();
        assert!(arm.bbox.max_x < 0.0);
        assert!(cage.bbox.min_x > 0.0);
    }

    #[test]
    fn masking_is_a_pure_xy_filter() {
        let cloud = grid_cloud(10, 10, 1.0, 0.1);
        assert_eq!(mask_dynamic(&cloud, &[]).len(), cloud.len());
        let all = BBox3DXY::new((-10.0, -10.0, 10.0, 10.0), 0.0, 5).unwrap();
        assert!(mask_dynamic(&cloud, &[all]).is_empty());
        let half = BBox3DXY::new((0.0, -10.0, 10.0, 10.0), 0.0, 5).unwrap();
        let kept = mask_dynamic(&cloud, &[half]);
        assert!(kept.points().iter().all(|p| p.x < 0.0));
        assert_eq!(
            kept.len(),
            cloud.points().iter().filter(|p| p.x < 0.0).count()
        );
    }

    #[test]
    fn masking_never_touches_points_outside_disjoint_boxes() {
        let cloud = grid_cloud(8, 8, 1.0, 0.05);
        let far = BBox3DXY::new((5.0, 5.0, 6.0, 6.0), 0.0, 5).unwrap();
        let kept = mask_dynamic(&cloud, &[far]);
        assert_eq!(kept.len(), cloud.len());
    }
}
