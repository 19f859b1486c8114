//! Benchmark harness: runs the estimators over generated scenarios,
//! computes translation/rotation RMSE against ground truth, counts valid
//! registration matches, and emits deterministic CSV tables. The measured
//! wall-clock runtime stays out of the default CSV so a rerun with the same
//! seed is byte-identical.

pub mod al_bench;
pub mod lidar_bench;
pub mod marker_bench;
pub mod report;
pub mod sim_out;
pub mod tdpa_bench;

pub use report::{reports_to_csv, RunReport};

use telepose_core::scenarios::{Scenario, ScenarioKind};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Scenario(#[from] telepose_core::scenarios::ScenarioError),
    #[error(transparent)]
    Marker(#[from] telepose_core::marker::MarkerError),
    #[error(transparent)]
    Pipeline(#[from] telepose_core::pipeline::PipelineError),
    #[error(transparent)]
    Registration(#[from] telepose_core::registration::RegistrationError),
    #[error(transparent)]
    ActiveLearning(#[from] telepose_core::active_learning::ActiveLearningError),
    #[error(transparent)]
    Tdpa(#[from] telepose_core::tdpa::TdpaError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn scenario_kind_from_name(name: &str) -> Result<ScenarioKind, BenchError> {
    match name {
        "nominal" => Ok(ScenarioKind::Nominal),
        "shaking" => Ok(ScenarioKind::Shaking),
        "rotation" => Ok(ScenarioKind::Rotation),
        "occlusion" => Ok(ScenarioKind::Occlusion),
        "night_proxy" => Ok(ScenarioKind::NightProxy),
        other => Err(BenchError::UnknownScenario(other.to_string())),
    }
}

pub fn scenario_name(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::Nominal => "nominal",
        ScenarioKind::Shaking => "shaking",
        ScenarioKind::Rotation => "rotation",
        ScenarioKind::Occlusion => "occlusion",
        ScenarioKind::NightProxy => "night_proxy",
    }
}

/// Benchmark camera: the eye-in-hand stream resolution.
pub fn default_camera() -> telepose_core::geometry::CameraIntrinsics {
    telepose_core::geometry::CameraIntrinsics::new(900.0, 900.0, 640.0, 480.0, 1280.0, 960.0)
        .expect("valid intrinsics")
}

/// Scenario of the named kind with benchmark defaults.
pub fn bench_scenario(kind: ScenarioKind, duration: f64, seed: u64) -> Scenario {
    Scenario::new(kind, duration, seed)
}
