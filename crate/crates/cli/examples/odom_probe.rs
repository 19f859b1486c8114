use telepose_core::pipeline::{odometry_step, mask_dynamic, update_dynamic_boxes, PipelineConfig};
use telepose_core::geometry::Pose;
use telepose_core::scenarios::{render_lidar, SceneModel, Scenario, ScenarioKind};

fn main() {
    let mut scenario = Scenario::new(ScenarioKind::Rotation, 6.0, 0);
    scenario.sweep_deg = 120.0;
    scenario.noise.range_sigma = 0.01;
    scenario.occluder = Some(scenario.default_occluder());
    let k = telepose_cli::default_camera();
    let scene = SceneModel::pipe_scene(&scenario);
    let frames = render_lidar(&scenario, &scene, &k).unwrap();
    println!("frames: {}", frames.len());
    let cfg = PipelineConfig::default();
    let mut boxes = Vec::new();
    let mut prev: Option<(telepose_core::registration::PointCloud, Pose)> = None;
    let mut cum_err = 0.0;
    for (i, frame) in frames.iter().enumerate().take(20) {
        boxes = update_dynamic_boxes(&boxes, &frame.cloud, &frame.detections, &Pose::identity(), &k, &cfg);
        let masked = mask_dynamic(&frame.cloud, &boxes.iter().map(|t| t.bbox).collect::<Vec<_>>());
        let down = masked.voxel_downsampled(cfg.scan_voxel);
        if let Some((prev_cloud, prev_cam)) = prev.take() {
            let reg = odometry_step(&prev_cloud, &down, &cfg.icp).unwrap();
            // truth relative: T_{s_cur}^{s_prev} = prev_cam⁻¹ ∘ cur_cam
            let truth_rel = prev_cam.inverse().compose(&frame.truth_cam_in_world);
            let err_t = reg.pose.translation_distance_to(&truth_rel);
            let err_r = reg.pose.rotation_angle_to(&truth_rel).to_degrees();
            cum_err += err_t;
            println!("frame {i}: cloud {} masked {} down {} | odo fit {:.3} iters {} err_t {:.4} err_r {:.3}° cum {:.4}", frame.cloud.len(), masked.len(), down.len(), reg.fitness, reg.iterations, err_t, err_r, cum_err);
        }
        prev = Some((down, frame.truth_cam_in_world));
    }
    // Also: detector box of frame 0 and the model size
    let f0 = &frames[0];
    for d in &f0.detections { println!("det: {} [{:.0},{:.0},{:.0},{:.0}]", d.class_label, d.u_min, d.v_min, d.u_max, d.v_max); }
}
