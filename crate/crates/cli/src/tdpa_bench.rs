//! Teleoperation passivity benchmark: simulate a session and emit the
//! sample traces plus a compact summary of the passivity margins.

use crate::BenchError;
use telepose_core::tdpa::{simulate_session, peak_force, SessionConfig, SessionTraces};

pub struct TdpaBenchResult {
    pub traces: SessionTraces,
    pub min_w_m: f64,
    pub min_w_s: f64,
    /// Worst violation of `W_m(k) ≥ −T_s·|f(k)·v(k)|`, zero when the
    /// contract holds everywhere.
    pub worst_bound_violation: f64,
    pub early_peak_force: f64,
    pub late_peak_force: f64,
}

pub fn run_tdpa_bench(cfg: &SessionConfig) -> Result<TdpaBenchResult, BenchError> {
    let traces = simulate_session(cfg)?;
    let t_s = cfg.gains.t_s;
    let mut worst = 0.0f64;
    for r in &traces.rows {
        let bound = -t_s * r.fv_abs;
        if r.w_m < bound {
            worst = worst.max(bound - r.w_m);
        }
    }
    let early = peak_force(&traces, t_s, (1.0, 2.0));
    let late = peak_force(&traces, t_s, (cfg.duration - 1.0, cfg.duration));
    Ok(TdpaBenchResult {
        min_w_m: traces.min_w_m(),
        min_w_s: traces.min_w_s(),
        worst_bound_violation: worst,
        early_peak_force: early,
        late_peak_force: late,
        traces,
    })
}
