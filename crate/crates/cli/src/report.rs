//! Run reports and their CSV serialization.

use std::fmt::Write as _;

/// Metrics for one (scenario, method, seed) run: translation RMSE in
/// meters, rotation RMSE in radians, total valid registration matches, and
/// the median per-frame wall-clock runtime.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    pub rmse_t: f64,
    pub rmse_r: f64,
    pub valid_matches: u64,
    pub runtime_s_per_frame: f64,
}

/// Deterministic CSV. The runtime column is opt-in: wall-clock numbers can
/// never be byte-reproducible, everything else must be.
pub fn reports_to_csv(reports: &[RunReport], with_timing: bool) -> String {
    let mut out = String::from(if with_timing {
        "scenario,method,seed,rmse_t,rmse_r,valid_matches,runtime_s_per_frame\n"
    } else {
        "scenario,method,seed,rmse_t,rmse_r,valid_matches\n"
    });
    for r in reports {
        if with_timing {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.scenario, r.method, r.seed, r.rmse_t, r.rmse_r, r.valid_matches, r.runtime_s_per_frame
            )
            .unwrap();
        } else {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.scenario, r.method, r.seed, r.rmse_t, r.rmse_r, r.valid_matches
            )
            .unwrap();
        }
    }
    out
}

/// RMSE of a squared-error accumulator.
pub fn rmse(sum_sq: f64, count: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    (sum_sq / count as f64).sqrt()
}

/// Median of a set of per-frame durations, in seconds.
pub fn median_runtime(mut samples: Vec<f64>) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    samples[samples.len() / 2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use telepose_core::geometry::{rotation_angle, so3_exp, Pose};

    /// RMSE definition checked on a hand-built 3-frame trace.
    #[test]
    fn rmse_matches_hand_computed_trace() {
        use nalgebra::Vector3;
        let truth = [
            Pose::from_translation(Vector3::new(0.0, 0.0, 1.0)),
            Pose::from_translation(Vector3::new(0.0, 0.0, 1.0)),
            Pose::from_translation(Vector3::new(0.0, 0.0, 1.0)),
        ];
        let est = [
            Pose::from_translation(Vector3::new(0.03, 0.0, 1.0)),
            Pose::from_translation(Vector3::new(0.0, 0.04, 1.0)),
            Pose::from_parts(
                so3_exp(&Vector3::new(0.0, 0.0, 0.1)),
                Vector3::new(0.0, 0.0, 1.0),
                None,
            )
            .unwrap(),
        ];
        let mut sum_t = 0.0;
        let mut sum_r = 0.0;
        for (a, b) in est.iter().zip(&truth) {
            sum_t += a.translation_distance_to(b).powi(2);
            sum_r += rotation_angle(a.rotation(), b.rotation()).powi(2);
        }
        // Hand values: t errors {0.03, 0.04, 0} → √(0.0025/3); r errors
        // {0, 0, 0.1} → √(0.01/3).
        assert!((rmse(sum_t, 3) - (0.0025f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((rmse(sum_r, 3) - (0.01f64 / 3.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn csv_shape_is_stable() {
        let report = RunReport {
            scenario: "nominal".into(),
            method: "proposed".into(),
            seed: 3,
            rmse_t: 0.001,
            rmse_r: 0.0005,
            valid_matches: 123,
            runtime_s_per_frame: 0.004,
        };
        let csv = reports_to_csv(&[report.clone()], false);
        assert_eq!(
            csv,
            "scenario,method,seed,rmse_t,rmse_r,valid_matches\nnominal,proposed,3,0.001,0.0005,123\n"
        );
        let with_timing = reports_to_csv(&[report], true);
        assert!(with_timing.contains("runtime_s_per_frame"));
    }
}
