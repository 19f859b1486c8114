//! Active-learning benchmark: entropy acquisition against uniform-random on
//! the designed synthetic pool, emitted as learning-curve CSV.

use crate::BenchError;
use serde::{Deserialize, Serialize};
use telepose_core::active_learning::{al_loop, curves_to_csv, AlConfig, LearningCurve, SyntheticPool};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlBenchConfig {
    /// Seed of the designed pool layout.
    pub pool_seed: u64,
    #[serde(default)]
    pub al: AlConfig,
}

impl Default for AlBenchConfig {
    fn default() -> Self {
        Self {
            pool_seed: 11,
            al: AlConfig::default(),
        }
    }
}

pub fn run_al_bench(cfg: &AlBenchConfig, seeds: &[u64]) -> Result<Vec<LearningCurve>, BenchError> {
    let pool = SyntheticPool::designed(cfg.pool_seed);
    Ok(al_loop(&pool, &cfg.al, seeds)?)
}

pub fn al_curves_csv(curves: &[LearningCurve]) -> String {
    curves_to_csv(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use telepose_core::active_learning::Strategy;

    #[test]
    fn three_seed_run_emits_rows_per_step_and_strategy() {
        let mut cfg = AlBenchConfig::default();
        cfg.al.query_steps = 4;
        let curves = run_al_bench(&cfg, &[1, 2, 3]).unwrap();
        assert_eq!(curves.len(), 6);
        for c in &curves {
            assert_eq!(c.points.len(), 5);
        }
        let entropy_runs = curves.iter().filter(|c| c.strategy == Strategy::Entropy).count();
        assert_eq!(entropy_runs, 3);
        let csv = al_curves_csv(&curves);
        assert_eq!(csv.lines().count(), 1 + 6 * 5);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let cfg = AlBenchConfig::default();
        let a = al_curves_csv(&run_al_bench(&cfg, &[4]).unwrap());
        let b = al_curves_csv(&run_al_bench(&cfg, &[4]).unwrap());
        assert_eq!(a, b);
    }
}
