//! Point-cloud pipeline benchmark: the full pipeline against its ablations
//! (pure odometry, odometry + backend, odometry + local poses) and plain
//! coarse-to-fine pairwise registration.

use crate::{report, scenario_name, BenchError, RunReport};
use telepose_core::geometry::{rotation_angle, Pose};
use telepose_core::pipeline::{
    local_object_pose, mask_dynamic, pipeline_step, update_dynamic_boxes, PipelineConfig,
    PipelineState,
};
use telepose_core::registration::{KdTree, PointCloud};
use telepose_core::scenarios::{render_lidar, LidarFrame, SceneModel, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LidarMethod {
    /// Pure scan-to-scan odometry propagation.
    Odom,
    /// Odometry with the pose-graph backend.
    Backend,
    /// Odometry combined with confident local object poses.
    Comb,
    /// Everything: odometry, backend and local resets.
    All,
    /// Pairwise coarse-to-fine registration from the initial pose.
    Picp,
}

impl LidarMethod {
    pub fn label(&self) -> &'static str {
        match self {
            LidarMethod::Odom => "odom",
            LidarMethod::Backend => "backend",
            LidarMethod::Comb => "comb",
            LidarMethod::All => "all",
            LidarMethod::Picp => "picp",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, BenchError> {
        match name {
            "odom" => Ok(LidarMethod::Odom),
            "backend" => Ok(LidarMethod::Backend),
            "comb" => Ok(LidarMethod::Comb),
            "all" => Ok(LidarMethod::All),
            "picp" => Ok(LidarMethod::Picp),
            other => Err(BenchError::UnknownMethod(other.to_string())),
        }
    }

    pub fn all_methods() -> [LidarMethod; 5] {
        [
            LidarMethod::Odom,
            LidarMethod::Backend,
            LidarMethod::Comb,
            LidarMethod::All,
            LidarMethod::Picp,
        ]
    }

    fn configure(&self, cfg: &mut PipelineConfig) {
        match self {
            LidarMethod::Odom => {
                cfg.use_backend = false;
                cfg.use_local = false;
            }
            LidarMethod::Backend => {
                cfg.use_backend = true;
                cfg.use_local = false;
            }
            LidarMethod::Comb => {
                cfg.use_backend = false;
                cfg.use_local = true;
            }
            LidarMethod::All | LidarMethod::Picp => {
                cfg.use_backend = true;
                cfg.use_local = true;
            }
        }
    }
}

/// Per-frame evaluation record.
#[derive(Clone, Copy, Debug)]
pub struct LidarFrameError {
    pub time: f64,
    pub translation_error: f64,
    pub rotation_error: f64,
    pub valid_matches: usize,
}

/// Ground-truth object pose in the sensor frame at frame `f`, given the
/// pipeline's world anchor (sensor frame of frame 0).
fn truth_object_pose(frame: &LidarFrame, cam0: &Pose, initial_pose: &Pose) -> Pose {
    frame
        .truth_cam_in_world
        .inverse()
        .compose(cam0)
        .compose(initial_pose)
}

/// Uniform introspection metric across methods: the number of scan points
/// (in the crop around the estimate) whose nearest model point under the
/// estimated pose lies within `dist`.
fn count_matches(scan: &PointCloud, model_tree: &KdTree, estimate: &Pose, dist: f64) -> usize {
    let inv = estimate.inverse();
    scan.points()
        .iter()
        .filter(|p| {
            let q = nalgebra::Point3::from(inv.transform_point(&p.coords));
            model_tree.nearest_within(&q, dist).is_some()
        })
        .count()
}

/// Run one method over a rendered frame sequence. Returns per-frame errors.
pub fn lidar_run_trace(
    frames: &[LidarFrame],
    method: LidarMethod,
    cfg_base: &PipelineConfig,
) -> Result<Vec<LidarFrameError>, BenchError> {
    let mut cfg = cfg_base.clone();
    method.configure(&mut cfg);
    let k = crate::default_camera();
    let extrinsic = Pose::identity();

    // Initialization frame: needs the target detection.
    let first = frames
        .first()
        .ok_or_else(|| BenchError::Config("no frames rendered".into()))?;
    let target_box = first
        .detections
        .iter()
        .find(|d| d.class_label == cfg.target_class)
        .ok_or_else(|| BenchError::Config("no target detection in first frame".into()))?;
    let state = PipelineState::initialize(
        &first.cloud,
        target_box,
        &first.detections,
        &extrinsic,
        &k,
        &cfg,
    )?;
    let cam0 = first.truth_cam_in_world;
    let initial_pose = state.initial_object_pose;
    let model = state.object_model.clone();
    let model_tree = KdTree::build(model.points());
    let final_dist = *cfg.icp.max_corr_dist.last().unwrap();

    let mut out = Vec::with_capacity(frames.len());
    let mut state = state;
    let mut boxes = Vec::new();

    for frame in &frames[1..] {
        let estimate = match method {
            LidarMethod::Picp => {
                // Stateless pairwise registration, initialized at the
                // anchor pose; masking still applies.
                boxes = update_dynamic_boxes(
                    &boxes,
                    &frame.cloud,
                    &frame.detections,
                    &extrinsic,
                    &k,
                    &cfg,
                );
                let masked = mask_dynamic(
                    &frame.cloud,
                    &boxes.iter().map(|t| t.bbox).collect::<Vec<_>>(),
                );
                let down = masked.voxel_downsampled(cfg.scan_voxel);
                match local_object_pose(&down, &model, &initial_pose, &cfg.icp) {
                    Ok(reg) => reg.pose,
                    Err(_) => initial_pose,
                }
            }
            _ => {
                let (output, next) = pipeline_step(
                    &state,
                    &frame.cloud,
                    &frame.detections,
                    &extrinsic,
                    &k,
                    frame.time,
                    &cfg,
                )?;
                state = next;
                output.pose
            }
        };
        let truth = truth_object_pose(frame, &cam0, &initial_pose);
        let masked_for_eval = frame.cloud.voxel_downsampled(cfg.scan_voxel);
        let matches = count_matches(&masked_for_eval, &model_tree, &estimate, final_dist);
        out.push(LidarFrameError {
            time: frame.time,
            translation_error: estimate.translation_distance_to(&truth),
            rotation_error: rotation_angle(estimate.rotation(), truth.rotation()),
            valid_matches: matches,
        });
    }
    Ok(out)
}

fn aggregate(
    scenario: &Scenario,
    method: LidarMethod,
    seed: u64,
    trace: &[LidarFrameError],
    runtime_s_per_frame: f64,
) -> RunReport {
    let mut sum_t = 0.0;
    let mut sum_r = 0.0;
    let mut matches = 0u64;
    for f in trace {
        sum_t += f.translation_error.powi(2);
        sum_r += f.rotation_error.powi(2);
        matches += f.valid_matches as u64;
    }
    RunReport {
        scenario: scenario_name(scenario.kind).to_string(),
        method: method.label().to_string(),
        seed,
        rmse_t: report::rmse(sum_t, trace.len()),
        rmse_r: report::rmse(sum_r, trace.len()),
        valid_matches: matches,
        runtime_s_per_frame,
    }
}

/// Run the pipeline benchmark over ablations × seeds.
pub fn run_lidar_bench(
    base: &Scenario,
    methods: &[LidarMethod],
    seeds: &[u64],
    cfg: &PipelineConfig,
) -> Result<Vec<RunReport>, BenchError> {
    let k = crate::default_camera();
    let mut reports = Vec::new();
    for &seed in seeds {
        let mut scenario = base.clone();
        scenario.seed = seed;
        let scene = SceneModel::pipe_scene(&scenario);
        let frames = render_lidar(&scenario, &scene, &k)?;
        for &method in methods {
            let started = std::time::Instant::now();
            let trace = lidar_run_trace(&frames, method, cfg)?;
            let elapsed = started.elapsed().as_secs_f64();
            let per_frame = if trace.is_empty() {
                0.0
            } else {
                elapsed / trace.len() as f64
            };
            reports.push(aggregate(&scenario, method, seed, &trace, per_frame));
        }
    }
    Ok(reports)
}

/// Median of the per-seed `rmse_t` values of one method.
pub fn median_rmse_t(reports: &[RunReport], method: LidarMethod) -> f64 {
    let mut values: Vec<f64> = reports
        .iter()
        .filter(|r| r.method == method.label())
        .map(|r| r.rmse_t)
        .collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if values.is_empty() {
        return f64::NAN;
    }
    values[values.len() / 2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use telepose_core::scenarios::ScenarioKind;

    #[test]
    fn static_scene_stays_put() {
        let mut scenario = Scenario::new(ScenarioKind::Nominal, 3.0, 5);
        scenario.noise.range_sigma = 0.003;
        let reports = run_lidar_bench(
            &scenario,
            &[LidarMethod::All],
            &[5],
            &PipelineConfig::default(),
        )
        .unwrap();
        assert!(
            reports[0].rmse_t < 0.02,
            "static rmse_t {}",
            reports[0].rmse_t
        );
    }

    #[test]
    fn single_frame_scenario_makes_odom_equal_all() {
        // With one step of history there is nothing for the backend or the
        // resets to change relative to odometry when the local gate fails.
        let scenario = Scenario::new(ScenarioKind::Nominal, 0.1, 2);
        let k = crate::default_camera();
        let scene = SceneModel::pipe_scene(&scenario);
        let frames = render_lidar(&scenario, &scene, &k).unwrap();
        assert_eq!(frames.len(), 2);
        let cfg = PipelineConfig {
            // Gate high enough that no reset fires on the first step.
            confidence_threshold: 0.99,
            ..PipelineConfig::default()
        };
        let odom = lidar_run_trace(&frames, LidarMethod::Odom, &cfg).unwrap();
        let all = lidar_run_trace(&frames, LidarMethod::All, &cfg).unwrap();
        assert_eq!(odom.len(), 1);
        assert!((odom[0].translation_error - all[0].translation_error).abs() < 1e-9);
    }
}
