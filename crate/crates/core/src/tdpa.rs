//! Time-domain passivity control for two-channel bilateral teleoperation
//! over a delayed, jittery, lossy sample stream.
//!
//! The operator side sends velocity, the remote side returns force. A
//! passivity observer at each port books the energy entering and leaving the
//! communication network from gated power samples; whenever the observed
//! energy flow `W` goes negative, the passivity controller bleeds exactly
//! `−W` out of the delayed signal before it is applied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt::Write as _;
use thiserror::Error;

use nalgebra::Vector2;

#[derive(Debug, Error)]
pub enum TdpaError {
    #[error("invalid gains: {0}")]
    BadGains(String),
    #[error("invalid channel: {0}")]
    BadChannel(String),
    #[error("invalid plant: {0}")]
    BadPlant(String),
    #[error("invalid session: {0}")]
    BadSession(String),
}

/// Controller gains and scalings. `k_ds`, `k_ps` drive the remote impedance
/// controller, `k_dm` is the local feedforward damping at the device,
/// `g_h`/`g_s`/`g_e` scale the exchanged velocity, controller force and
/// end-effector force, and `t_s` is the sampling time.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TdpaGains {
    pub k_ds: f64,
    pub k_ps: f64,
    pub k_dm: f64,
    pub g_h: f64,
    pub g_s: f64,
    pub g_e: f64,
    pub t_s: f64,
}

impl TdpaGains {
    pub fn validate(&self) -> Result<(), TdpaError> {
        let gains = [self.k_ds, self.k_ps, self.k_dm, self.g_h, self.g_s, self.g_e];
        if gains.iter().any(|g| *g < 0.0 || !g.is_finite()) {
            return Err(TdpaError::BadGains("gains must be non-negative and finite".into()));
        }
        if self.t_s <= 0.0 || !self.t_s.is_finite() {
            return Err(TdpaError::BadGains(format!("sampling time {} s", self.t_s)));
        }
        Ok(())
    }
}

impl Default for TdpaGains {
    fn default() -> Self {
        Self {
            k_ds: 20.0,
            k_ps: 2000.0,
            k_dm: 0.5,
            g_h: 1.0,
            g_s: 1.0,
            g_e: 0.0,
            t_s: 1e-3,
        }
    }
}

/// Running input/output/dissipated energies of one passivity observer.
/// All three are non-decreasing.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyLedger {
    e_in: f64,
    e_out: f64,
    e_pc: f64,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn e_in(&self) -> f64 {
        self.e_in
    }

    pub fn e_out(&self) -> f64 {
        self.e_out
    }

    pub fn e_pc(&self) -> f64 {
        self.e_pc
    }
}

/// Discrete channel model: constant delay in samples, uniform ±jitter per
/// packet, independent loss probability, hold-last-sample at the receiver.
/// Delivery is monotone in sequence number: late reorderings are dropped.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChannelModel {
    pub delay_samples: usize,
    pub jitter: usize,
    pub loss_probability: f64,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), TdpaError> {
        if !(0.0..1.0).contains(&self.loss_probability) {
            return Err(TdpaError::BadChannel(format!(
                "loss probability {}",
                self.loss_probability
            )));
        }
        Ok(())
    }
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            delay_samples: 0,
            jitter: 0,
            loss_probability: 0.0,
        }
    }
}

/// Remote reference force: `f_s = K_ds(v_sd − v_s) + K_ps(x_sd − x_s)`.
pub fn impedance_force(
    v_sd: &Vector2<f64>,
    v_s: &Vector2<f64>,
    x_sd: &Vector2<f64>,
    x_s: &Vector2<f64>,
    g: &TdpaGains,
) -> Vector2<f64> {
    (v_sd - v_s) * g.k_ds + (x_sd - x_s) * g.k_ps
}

/// Device force feedback with the transparency feedforward term:
/// `f_m = f_m0 + f_me + K_dm·v_m`.
pub fn feedback_force(
    f_m0: &Vector2<f64>,
    f_me: &Vector2<f64>,
    v_m: &Vector2<f64>,
    g: &TdpaGains,
) -> Vector2<f64> {
    f_m0 + f_me + v_m * g.k_dm
}

/// Passivity observer update for one port and one sample: the out-flowing
/// power `f·(−v)` is gated at zero before it accumulates, and the observed
/// energy flow is `W = E_in(k−D) − E_out(k) + E_pc(k)`. `delayed_e_in` is
/// the remote port's input-energy counter as received over the channel; it
/// enters `W` but never the local accumulators.
pub fn observe_passivity(
    ledger: &EnergyLedger,
    f: f64,
    v: f64,
    delayed_e_in: f64,
    g: &TdpaGains,
) -> (f64, EnergyLedger) {
    let mut next = *ledger;
    let power_out = f * (-v);
    if power_out > 0.0 {
        next.e_out += g.t_s * power_out;
    }
    let w = delayed_e_in - next.e_out + next.e_pc;
    (w, next)
}

/// Division guard below which the passivity controller skips a sample and
/// carries the deficit forward.
pub const PC_EPSILON: f64 = 1e-9;

/// Passivity controller law: the delayed signal passes through unchanged
/// while `W > 0`, otherwise `u − (W / (T_s·y²))·y`. When `|y| < ε` the
/// correction is skipped and the energy deficit stays on the ledger.
pub fn passivity_control(u_delayed: f64, y: f64, w: f64, t_s: f64) -> f64 {
    if w > 0.0 || y.abs() < PC_EPSILON {
        return u_delayed;
    }
    u_delayed - (w / (t_s * y * y)) * y
}

/// Mass-spring-damper remote plant with a one-sided stiff wall.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PlantParams {
    pub mass: f64,
    pub damping: f64,
    pub wall_position: f64,
    pub wall_stiffness: f64,
    pub wall_damping: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            mass: 0.5,
            damping: 4.0,
            wall_position: 0.05,
            wall_stiffness: 6000.0,
            wall_damping: 10.0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), TdpaError> {
        if self.mass <= 0.0
            || self.damping < 0.0
            || self.wall_stiffness < 0.0
            || self.wall_damping < 0.0
        {
            return Err(TdpaError::BadPlant(
                "mass must be positive, dampings and stiffness non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Haptic device inertia the operator pushes against.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DeviceParams {
    pub mass: f64,
    pub damping: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            mass: 0.3,
            damping: 1.0,
        }
    }
}

/// Deterministic operator input: a smooth push toward the wall with a small
/// seeded dither so different seeds explore different contact phases.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OperatorProfile {
    pub push_force: f64,
    pub ramp_time: f64,
    pub dither: f64,
}

impl Default for OperatorProfile {
    fn default() -> Self {
        Self {
            push_force: 6.0,
            ramp_time: 0.3,
            dither: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionConfig {
    pub gains: TdpaGains,
    pub channel: ChannelModel,
    pub plant: PlantParams,
    pub device: DeviceParams,
    pub operator: OperatorProfile,
    pub duration: f64,
    pub seed: u64,
    pub pc_enabled: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            gains: TdpaGains::default(),
            channel: ChannelModel::default(),
            plant: PlantParams::default(),
            device: DeviceParams::default(),
            operator: OperatorProfile::default(),
            duration: 5.0,
            seed: 0,
            pc_enabled: true,
        }
    }
}

/// One sample of the session traces; matches the output CSV schema
/// `k, x_m, x_s, f_m, f_s, W_m, W_s, E_in, E_out, E_pc`.
#[derive(Clone, Copy, Debug)]
pub struct TraceRow {
    pub k: usize,
    pub x_m: f64,
    pub x_s: f64,
    pub f_m: f64,
    pub f_s: f64,
    pub w_m: f64,
    pub w_s: f64,
    pub e_in: f64,
    pub e_out: f64,
    pub e_pc: f64,
    /// |f·v| at the device port this sample, the one-sample energy scale the
    /// post-PC passivity bound is stated against.
    pub fv_abs: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SessionTraces {
    pub rows: Vec<TraceRow>,
    /// Robot-port ledger at the end of the run, for conservation checks.
    pub robot_ledger: EnergyLedger,
    /// Device-port ledger at the end of the run.
    pub device_ledger: EnergyLedger,
}

impl SessionTraces {
    pub fn min_w_m(&self) -> f64 {
        self.rows.iter().map(|r| r.w_m).fold(f64::INFINITY, f64::min)
    }

    pub fn min_w_s(&self) -> f64 {
        self.rows.iter().map(|r| r.w_s).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,x_m,x_s,f_m,f_s,W_m,W_s,E_in,E_out,E_pc\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.k, r.x_m, r.x_s, r.f_m, r.f_s, r.w_m, r.w_s, r.e_in, r.e_out, r.e_pc
            )
            .unwrap();
        }
        out
    }
}

/// Payload of one direction of the channel: the signal plus the sender-side
/// PO input energy, which the remote PO needs in delayed form.
#[derive(Clone, Copy, Debug)]
struct Packet {
    seq: usize,
    arrival: usize,
    value: [f64; 2],
    energy: f64,
}

struct Channel {
    model: ChannelModel,
    /// Steps a packet needs at minimum: 1 for the forward direction (the
    /// receiver runs before the sender within a tick), 0 for the backward
    /// direction (the receiver runs after).
    min_latency: usize,
    queue: VecDeque<Packet>,
    last_value: [f64; 2],
    last_energy: f64,
    last_seq: Option<usize>,
    rng: ChaCha8Rng,
}

impl Channel {
    fn new(model: ChannelModel, min_latency: usize, stream_seed: u64) -> Self {
        Self {
            model,
            min_latency,
            queue: VecDeque::new(),
            last_value: [0.0; 2],
            last_energy: 0.0,
            last_seq: None,
            rng: ChaCha8Rng::seed_from_u64(stream_seed),
        }
    }

    fn send(&mut self, k: usize, value: [f64; 2], energy: f64) {
        if self.rng.random::<f64>() < self.model.loss_probability {
            return;
        }
        let jitter = if self.model.jitter > 0 {
            self.rng.random_range(0..=(2 * self.model.jitter)) as i64 - self.model.jitter as i64
        } else {
            0
        };
        let floor = k as i64 + self.min_latency as i64;
        let arrival = (floor + self.model.delay_samples as i64 + jitter).max(floor) as usize;
        self.queue.push_back(Packet {
            seq: k,
            arrival,
            value,
            energy,
        });
    }

    /// Newest in-order packet that has arrived by step `k`; holds the last
    /// delivered values otherwise.
    fn receive(&mut self, k: usize) -> ([f64; 2], f64) {
        let mut best: Option<Packet> = None;
        let mut remaining = VecDeque::with_capacity(self.queue.len());
        while let Some(p) = self.queue.pop_front() {
            if p.arrival <= k {
                let newer = self.last_seq.is_none_or(|s| p.seq > s);
                if newer && best.is_none_or(|b| p.seq > b.seq) {
                    best = Some(p);
                }
            } else {
                remaining.push_back(p);
            }
        }
        self.queue = remaining;
        if let Some(p) = best {
            self.last_seq = Some(p.seq);
            self.last_value = p.value;
            // Energy counters are non-decreasing; a stale hold must never
            // run the remote ledger backwards.
            self.last_energy = self.last_energy.max(p.energy);
        }
        (self.last_value, self.last_energy)
    }
}

/// Fixed-step, sample-synchronous simulation of the full loop: operator →
/// device → forward channel → remote impedance-controlled plant → backward
/// channel → device force feedback, with a PO/PC pair at each port.
pub fn simulate_session(config: &SessionConfig) -> Result<SessionTraces, TdpaError> {
    config.gains.validate()?;
    config.channel.validate()?;
    config.plant.validate()?;
    if config.duration <= 0.0 {
        return Err(TdpaError::BadSession(format!("duration {} s", config.duration)));
    }
    if config.device.mass <= 0.0 {
        return Err(TdpaError::BadSession("device mass must be positive".into()));
    }
    let g = config.gains;
    let t_s = g.t_s;
    let steps = (config.duration / t_s).round() as usize;

    let mut forward = Channel::new(config.channel, 1, config.seed.wrapping_mul(2).wrapping_add(1));
    let mut backward = Channel::new(config.channel, 0, config.seed.wrapping_mul(2).wrapping_add(2));
    let mut dither_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(2).wrapping_add(3));

    // Device state.
    let mut x_m = 0.0f64;
    let mut v_m = 0.0f64;
    // Remote state.
    let mut x_s = 0.0f64;
    let mut v_s = 0.0f64;
    #[allow(unused_assignments)]
    let mut x_sd = 0.0f64;
    let mut f_s_prev = 0.0f64;

    let mut device_ledger = EnergyLedger::new();
    let mut robot_ledger = EnergyLedger::new();

    let mut rows = Vec::with_capacity(steps);

    for k in 0..steps {
        let t = k as f64 * t_s;

        // ---- Remote side: consume the delayed command. ----
        let (payload, e_m_in_delayed) = forward.receive(k);
        let v_sd = g.g_h * payload[0];
        // The position command is the transmitted device position; it is
        // never touched by the controller so corrections cannot integrate
        // into position drift.
        x_sd = g.g_h * payload[1];

        // PO/PC at the robot port. The force this step will produce is not
        // known before the correction, so the controller divides by the
        // previous force sample and sees the ledgers as of the last step;
        // the one-sample optimism stays within the per-sample energy bound.
        let w_s = e_m_in_delayed - robot_ledger.e_out + robot_ledger.e_pc;
        // This port's out-flow books the +u·y product, the mirror of the
        // device port, so the control law acts with flipped orientation:
        // reducing v_sd·f_s by |W_s| over the step.
        let v_sd_c = if config.pc_enabled && w_s < 0.0 && f_s_prev.abs() >= PC_EPSILON {
            robot_ledger.e_pc += -w_s;
            v_sd + (w_s / (t_s * f_s_prev * f_s_prev)) * f_s_prev
        } else {
            v_sd
        };

        let f_s_vec = impedance_force(
            &Vector2::new(v_sd_c, 0.0),
            &Vector2::new(v_s, 0.0),
            &Vector2::new(x_sd, 0.0),
            &Vector2::new(x_s, 0.0),
            &g,
        );
        let f_s = f_s_vec.x;

        // Wall contact force on the plant (one-sided spring-damper).
        let penetration = x_s - config.plant.wall_position;
        let f_e = if penetration > 0.0 {
            -config.plant.wall_stiffness * penetration - config.plant.wall_damping * v_s.max(0.0)
        } else {
            0.0
        };
        let accel_s = (f_s + f_e - config.plant.damping * v_s) / config.plant.mass;
        v_s += t_s * accel_s;
        x_s += t_s * v_s;

        // The observer watches the network-boundary signals: the received
        // command before correction paired with the force it produced. Both
        // directions book the same product, so a lossless zero-delay channel
        // conserves energy exactly at the two ports.
        let power_in_s = f_s * (-v_sd);
        if power_in_s > 0.0 {
            robot_ledger.e_in += t_s * power_in_s;
        } else {
            robot_ledger.e_out += t_s * (-power_in_s);
        }
        f_s_prev = f_s;
        backward.send(k, [g.g_s * f_s + g.g_e * f_e, 0.0], robot_ledger.e_in);

        // ---- Device side: consume the delayed force feedback. ----
        let (backward_payload, e_s_in_delayed) = backward.receive(k);
        let u_m = backward_payload[0];

        let fv_abs = (u_m * v_m).abs();
        let power_out_m = u_m * (-v_m);
        if power_out_m > 0.0 {
            device_ledger.e_out += t_s * power_out_m;
        }
        let w_m = e_s_in_delayed - device_ledger.e_out + device_ledger.e_pc;
        let u_m_c = if config.pc_enabled && w_m < 0.0 {
            let corrected = passivity_control(u_m, v_m, w_m, t_s);
            if corrected != u_m {
                device_ledger.e_pc += -w_m;
            }
            corrected
        } else {
            u_m
        };
        let power_in_m = u_m * v_m;
        if power_in_m > 0.0 {
            device_ledger.e_in += t_s * power_in_m;
        }

        let f_m_vec = feedback_force(
            &Vector2::new(u_m_c, 0.0),
            &Vector2::zeros(),
            &Vector2::new(v_m, 0.0),
            &g,
        );
        let f_m = f_m_vec.x;

        let ramp = (t / config.operator.ramp_time).clamp(0.0, 1.0);
        let dither = config.operator.dither * (dither_rng.random::<f64>() - 0.5);
        let f_op = config.operator.push_force * ramp * (1.0 + dither);
        let accel_m = (f_op - f_m - config.device.damping * v_m) / config.device.mass;
        v_m += t_s * accel_m;
        x_m += t_s * v_m;

        forward.send(k, [v_m, x_m], device_ledger.e_in);

        rows.push(TraceRow {
            k,
            x_m,
            x_s,
            f_m,
            f_s,
            w_m,
            w_s,
            e_in: device_ledger.e_in,
            e_out: device_ledger.e_out,
            e_pc: device_ledger.e_pc,
            fv_abs,
        });
    }

    Ok(SessionTraces {
        rows,
        robot_ledger,
        device_ledger,
    })
}

/// Peak |force| at the device within `[window.0, window.1)` seconds; the
/// instability exhibit compares an early window against a late one.
pub fn peak_force(traces: &SessionTraces, t_s: f64, window: (f64, f64)) -> f64 {
    traces
        .rows
        .iter()
        .filter(|r| {
            let t = r.k as f64 * t_s;
            t >= window.0 && t < window.1
        })
        .map(|r| r.f_m.abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn impedance_force_examples() {
        let g = TdpaGains {
            k_ds: 10.0,
            k_ps: 100.0,
            ..TdpaGains::default()
        };
        let zero = Vector2::zeros();
        assert_eq!(impedance_force(&zero, &zero, &zero, &zero, &g), Vector2::zeros());
        let f = impedance_force(
            &Vector2::new(0.1, 0.0),
            &zero,
            &Vector2::new(0.01, 0.0),
            &zero,
            &g,
        );
        assert_abs_diff_eq!(f, Vector2::new(2.0, 0.0), epsilon = 1e-12);
        // Linearity: scaling both errors scales the force.
        let f2 = impedance_force(
            &Vector2::new(0.2, 0.0),
            &zero,
            &Vector2::new(0.02, 0.0),
            &zero,
            &g,
        );
        assert_abs_diff_eq!(f2, f * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn feedback_force_examples() {
        let g = TdpaGains {
            k_dm: 5.0,
            ..TdpaGains::default()
        };
        let zero = Vector2::zeros();
        assert_eq!(feedback_force(&zero, &zero, &zero, &g), Vector2::zeros());
        let f = feedback_force(
            &Vector2::new(1.0, 2.0),
            &Vector2::new(3.0, 4.0),
            &Vector2::new(0.1, 0.0),
            &g,
        );
        assert_abs_diff_eq!(f, Vector2::new(4.5, 6.0), epsilon = 1e-12);
        let cancel = feedback_force(&Vector2::new(1.0, -2.0), &Vector2::new(-1.0, 2.0), &zero, &g);
        assert_eq!(cancel, Vector2::zeros());
    }

    #[test]
    fn observer_integrates_gated_power() {
        let g = TdpaGains {
            t_s: 0.001,
            ..TdpaGains::default()
        };
        let mut ledger = EnergyLedger::new();
        // f = 1 N against v = −1 m/s for 100 steps with no input energy.
        let mut w = 0.0;
        for _ in 0..100 {
            let (w_k, next) = observe_passivity(&ledger, 1.0, -1.0, 0.0, &g);
            ledger = next;
            w = w_k;
        }
        assert_abs_diff_eq!(ledger.e_out(), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(w, -0.1, epsilon = 1e-12);

        // Power with f·(−v) < 0 leaves the ledger untouched.
        let before = ledger;
        let (_, after) = observe_passivity(&ledger, 1.0, 1.0, 0.0, &g);
        assert_eq!(before.e_out(), after.e_out());

        // Zero velocity stream: W tracks the delayed input energy.
        let (w_k, _) = observe_passivity(&EnergyLedger::new(), 1.0, 0.0, 0.25, &g);
        assert_abs_diff_eq!(w_k, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn pc_law_examples() {
        // Positive W: untouched.
        assert_eq!(passivity_control(2.5, 0.5, 0.01, 0.001), 2.5);
        // Hand-checked: u − (−0.002 / (0.001·0.25))·0.5 = u + 4.0.
        let u = passivity_control(1.0, 0.5, -0.002, 0.001);
        assert_abs_diff_eq!(u, 5.0, epsilon = 1e-12);
        // y = 0 with W < 0: skipped.
        assert_eq!(passivity_control(1.0, 0.0, -0.1, 0.001), 1.0);
    }

    #[test]
    fn pc_correction_dissipates_exactly_minus_w() {
        let t_s = 0.001;
        let (u, y, w) = (2.0, 0.4, -0.003);
        let u_c = passivity_control(u, y, w, t_s);
        let dissipated = t_s * (u_c - u) * y;
        assert_abs_diff_eq!(dissipated, -w, epsilon = 1e-12);
    }

    fn quiet_config() -> SessionConfig {
        SessionConfig {
            duration: 2.0,
            ..SessionConfig::default()
        }
    }

    #[test]
    fn zero_delay_session_never_activates_pc() {
        let mut config = quiet_config();
        config.pc_enabled = true;
        let traces = simulate_session(&config).unwrap();
        assert!(traces.min_w_m() >= 0.0, "min W_m {}", traces.min_w_m());
        assert!(traces.min_w_s() >= 0.0, "min W_s {}", traces.min_w_s());
        assert_eq!(traces.device_ledger.e_pc(), 0.0);
        assert_eq!(traces.robot_ledger.e_pc(), 0.0);
    }

    #[test]
    fn zero_delay_ports_conserve_transferred_energy() {
        let config = quiet_config();
        let traces = simulate_session(&config).unwrap();
        // With G_e = 0 and no delay both ports see the same signal products.
        assert_abs_diff_eq!(
            traces.robot_ledger.e_in(),
            traces.device_ledger.e_out(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            traces.device_ledger.e_in(),
            traces.robot_ledger.e_out(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn ledgers_never_decrease() {
        let mut config = quiet_config();
        config.channel = ChannelModel {
            delay_samples: 40,
            jitter: 3,
            loss_probability: 0.05,
        };
        let traces = simulate_session(&config).unwrap();
        let mut prev = (0.0, 0.0, 0.0);
        for r in &traces.rows {
            assert!(r.e_in >= prev.0 && r.e_out >= prev.1 && r.e_pc >= prev.2);
            prev = (r.e_in, r.e_out, r.e_pc);
        }
    }

    #[test]
    fn delayed_stiff_contact_without_pc_goes_active() {
        let mut config = quiet_config();
        config.duration = 5.0;
        config.channel.delay_samples = 100;
        config.pc_enabled = false;
        let traces = simulate_session(&config).unwrap();
        assert!(traces.min_w_m() < 0.0, "expected W_m < 0, got {}", traces.min_w_m());
        let early = peak_force(&traces, config.gains.t_s, (1.0, 2.0));
        let late = peak_force(&traces, config.gains.t_s, (4.0, 5.0));
        assert!(
            late >= 2.0 * early,
            "force growth {late:.2}/{early:.2} below 2x"
        );
    }

    #[test]
    fn pc_bounds_energy_flow_under_delay_and_loss() {
        for seed in 0..5 {
            let mut config = quiet_config();
            config.duration = 5.0;
            config.seed = seed;
            config.channel = ChannelModel {
                delay_samples: 100,
                jitter: 0,
                loss_probability: 0.01,
            };
            config.pc_enabled = true;
            let traces = simulate_session(&config).unwrap();
            let t_s = config.gains.t_s;
            for r in &traces.rows {
                assert!(
                    r.w_m >= -t_s * r.fv_abs - 1e-9,
                    "seed {seed} k {} W_m {} vs bound {}",
                    r.k,
                    r.w_m,
                    -t_s * r.fv_abs
                );
            }
            // Bounded force trace.
            let early = peak_force(&traces, t_s, (1.0, 2.0));
            let late = peak_force(&traces, t_s, (4.0, 5.0));
            assert!(late < 2.0 * early.max(1.0), "seed {seed}: {late} vs {early}");
        }
    }

    #[test]
    fn sessions_are_deterministic_per_seed() {
        let mut config = quiet_config();
        config.channel = ChannelModel {
            delay_samples: 30,
            jitter: 2,
            loss_probability: 0.02,
        };
        config.seed = 9;
        let a = simulate_session(&config).unwrap().to_csv();
        let b = simulate_session(&config).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let mut config = quiet_config();
        config.gains.t_s = 0.0;
        assert!(simulate_session(&config).is_err());
        let mut config = quiet_config();
        config.channel.loss_probability = 1.5;
        assert!(simulate_session(&config).is_err());
        let mut config = quiet_config();
        config.plant.mass = -1.0;
        assert!(simulate_session(&config).is_err());
    }
}
