//! File emission for the `simulate` subcommand: marker and ego-motion
//! JSON-lines, binary point-cloud scans, detection JSON-lines, and a
//! ground-truth JSON-lines file.

use crate::BenchError;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use telepose_core::geometry::CameraIntrinsics;
use telepose_core::marker::StreamRecord;
use telepose_core::registration::write_pcb;
use telepose_core::scenarios::{
    render_lidar, render_markers, render_slam, MarkerLayout, SceneModel, Scenario,
};

/// Write every stream of a scenario under `dir`:
/// `markers.jsonl`, `slam.jsonl`, `scans/scan_NNNN.pcb`,
/// `detections.jsonl`, `truth.jsonl`.
pub fn write_scenario_streams(
    scenario: &Scenario,
    k: &CameraIntrinsics,
    dir: &Path,
) -> Result<(), BenchError> {
    fs::create_dir_all(dir)?;
    let layout = MarkerLayout::plate_default();
    let scene = SceneModel::pipe_scene(scenario);

    let marker_frames = render_markers(scenario, &layout, k)?;
    let mut markers_text = String::new();
    let mut truth_text = String::new();
    for frame in &marker_frames {
        for obs in &frame.observations {
            let record = StreamRecord::Marker(obs.clone());
            writeln!(markers_text, "{}", serde_json::to_string(&record)?).unwrap();
        }
        writeln!(
            truth_text,
            "{}",
            serde_json::to_string(&serde_json::json!({
                "time": frame.time,
                "target_in_camera": frame.truth_target_in_camera,
            }))?
        )
        .unwrap();
    }
    fs::write(dir.join("markers.jsonl"), markers_text)?;

    let slam = render_slam(scenario)?;
    let mut slam_text = String::new();
    for est in &slam {
        let record = StreamRecord::Slam(est.clone());
        writeln!(slam_text, "{}", serde_json::to_string(&record)?).unwrap();
    }
    fs::write(dir.join("slam.jsonl"), slam_text)?;

    let lidar = render_lidar(scenario, &scene, k)?;
    let scans_dir = dir.join("scans");
    fs::create_dir_all(&scans_dir)?;
    let mut detections_text = String::new();
    for (index, frame) in lidar.iter().enumerate() {
        let mut bytes = Vec::new();
        write_pcb(&frame.cloud, &mut bytes)?;
        fs::write(scans_dir.join(format!("scan_{index:04}.pcb")), bytes)?;
        for det in &frame.detections {
            writeln!(
                detections_text,
                "{}",
                serde_json::to_string(&serde_json::json!({
                    "time": frame.time,
                    "class": det.class_label,
                    "score": det.score,
                    "box": [det.u_min, det.v_min, det.u_max, det.v_max],
                }))?
            )
            .unwrap();
        }
        writeln!(
            truth_text,
            "{}",
            serde_json::to_string(&serde_json::json!({
                "time": frame.time,
                "cam_in_world": frame.truth_cam_in_world,
            }))?
        )
        .unwrap();
    }
    fs::write(dir.join("detections.jsonl"), detections_text)?;
    fs::write(dir.join("truth.jsonl"), truth_text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use telepose_core::scenarios::ScenarioKind;

    #[test]
    fn streams_land_on_disk_and_rerun_identically() {
        let dir = tempfile::tempdir().unwrap();
        let mut scenario = Scenario::new(ScenarioKind::Occlusion, 0.3, 3);
        scenario.noise.pixel_sigma = 0.2;
        scenario.noise.range_sigma = 0.004;
        let k = crate::default_camera();
        write_scenario_streams(&scenario, &k, dir.path()).unwrap();
        for name in ["markers.jsonl", "slam.jsonl", "detections.jsonl", "truth.jsonl"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        assert!(dir.path().join("scans/scan_0000.pcb").exists());

        let first = fs::read(dir.path().join("slam.jsonl")).unwrap();
        let again = tempfile::tempdir().unwrap();
        write_scenario_streams(&scenario, &k, again.path()).unwrap();
        let second = fs::read(again.path().join("slam.jsonl")).unwrap();
        assert_eq!(first, second);
    }
}
