//! Deterministic ground-truth scenario generator: camera/LiDAR trajectories
//! around a static target, marker observation streams, ego-motion estimate
//! streams with bounded drift, ray-cast LiDAR scans of parametric solids,
//! and a detector oracle — everything seeded and byte-reproducible, with
//! ground truth emitted alongside every stream.

use crate::geometry::{so3_exp, so3_log, CameraIntrinsics, Pose};
use crate::marker::{MarkerConfig, MarkerObservation, SlamEstimate};
use crate::pipeline::BBox2D;
use crate::registration::PointCloud;
use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Nominal,
    Shaking,
    Rotation,
    Occlusion,
    NightProxy,
}

/// Sensor tick rates in Hz.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Rates {
    pub camera_hz: f64,
    pub slam_hz: f64,
    pub lidar_hz: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            camera_hz: 25.0,
            slam_hz: 200.0,
            lidar_hz: 10.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Gaussian pixel noise on marker corners.
    pub pixel_sigma: f64,
    /// Gaussian range noise on LiDAR returns, meters.
    pub range_sigma: f64,
    /// Ego-motion drift rate in m/s (bounded random walk).
    pub slam_drift: f64,
    /// Marker observations vanish inside these [start, end] windows.
    pub dropout_windows: Vec<[f64; 2]>,
    /// Per-marker per-frame dropout probability (night conditions).
    pub marker_dropout_prob: f64,
    /// Per-frame detector miss probability (night conditions).
    pub detector_false_negative: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            pixel_sigma: 0.0,
            range_sigma: 0.0,
            slam_drift: 0.0,
            dropout_windows: Vec::new(),
            marker_dropout_prob: 0.0,
            detector_false_negative: 0.0,
        }
    }
}

/// Band-limited oscillation parameters for the shaking scenario.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ShakeParams {
    pub amplitude_m: f64,
    pub amplitude_deg: f64,
    pub freq_lo: f64,
    pub freq_hi: f64,
}

impl Default for ShakeParams {
    fn default() -> Self {
        Self {
            amplitude_m: 0.05,
            amplitude_deg: 3.0,
            freq_lo: 0.5,
            freq_hi: 2.0,
        }
    }
}

/// Oscillating axis-aligned box that crosses the line of sight.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OccluderSpec {
    pub half_extents: [f64; 3],
    pub base_center: [f64; 3],
    pub direction: [f64; 3],
    pub amplitude: f64,
    pub period: f64,
}

impl OccluderSpec {
    pub fn center_at(&self, t: f64) -> Vector3<f64> {
        let dir = Vector3::from_column_slice(&self.direction);
        Vector3::from_column_slice(&self.base_center)
            + dir * (self.amplitude * (std::f64::consts::TAU * t / self.period).sin())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub duration: f64,
    #[serde(default)]
    pub rates: Rates,
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Camera standoff from the target, meters.
    #[serde(default = "default_standoff")]
    pub standoff: f64,
    /// Sensor height above ground, meters.
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default)]
    pub shake: ShakeParams,
    /// Orbit sweep for the rotation scenario, degrees.
    #[serde(default = "default_sweep")]
    pub sweep_deg: f64,
    #[serde(default)]
    pub occluder: Option<OccluderSpec>,
}

fn default_standoff() -> f64 {
    1.3
}

fn default_height() -> f64 {
    0.6
}

fn default_sweep() -> f64 {
    120.0
}

impl Scenario {
    pub fn new(kind: ScenarioKind, duration: f64, seed: u64) -> Self {
        let mut scenario = Self {
            kind,
            duration,
            rates: Rates::default(),
            seed,
            noise: NoiseConfig::default(),
            standoff: default_standoff(),
            height: default_height(),
            shake: ShakeParams::default(),
            sweep_deg: default_sweep(),
            occluder: None,
        };
        if kind == ScenarioKind::Occlusion {
            scenario.occluder = Some(scenario.default_occluder());
        }
        if kind == ScenarioKind::NightProxy {
            scenario.noise.marker_dropout_prob = 0.3;
            scenario.noise.detector_false_negative = 0.3;
        }
        scenario
    }

    /// Box sweeping laterally through the camera-to-target line of sight.
    pub fn default_occluder(&self) -> OccluderSpec {
        OccluderSpec {
            half_extents: [0.06, 0.12, 0.25],
            base_center: [-self.standoff * 0.5, 0.0, self.height],
            direction: [0.0, 1.0, 0.0],
            amplitude: 0.45,
            period: 2.5,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.duration <= 0.0 {
            return Err(ScenarioError::Invalid(format!("duration {}", self.duration)));
        }
        if self.rates.camera_hz <= 0.0 || self.rates.slam_hz <= 0.0 || self.rates.lidar_hz <= 0.0 {
            return Err(ScenarioError::Invalid("rates must be positive".into()));
        }
        for w in &self.noise.dropout_windows {
            if w[0] < 0.0 || w[1] > self.duration || w[0] >= w[1] {
                return Err(ScenarioError::Invalid(format!(
                    "dropout window [{}, {}] outside [0, {}]",
                    w[0], w[1], self.duration
                )));
            }
        }
        Ok(())
    }

    fn in_dropout(&self, t: f64) -> bool {
        self.noise
            .dropout_windows
            .iter()
            .any(|w| t >= w[0] && t <= w[1])
    }

    /// World-frame point every trajectory looks at.
    pub fn target_point(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.height)
    }
}

/// Seeded sinusoid bank, evaluated analytically.
#[derive(Clone, Debug)]
struct SinBank {
    terms: Vec<(f64, f64, f64)>,
}

impl SinBank {
    fn quiet() -> Self {
        Self { terms: Vec::new() }
    }

    fn seeded(rng: &mut ChaCha8Rng, total_amplitude: f64, freq_lo: f64, freq_hi: f64, n: usize) -> Self {
        let terms = (0..n)
            .map(|_| {
                let amp = total_amplitude / n as f64;
                let freq = freq_lo + (freq_hi - freq_lo) * rng.random::<f64>();
                let phase = std::f64::consts::TAU * rng.random::<f64>();
                (amp, freq, phase)
            })
            .collect();
        Self { terms }
    }

    fn value(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, f, p)| a * (std::f64::consts::TAU * f * t + p).sin())
            .sum()
    }
}

/// Analytic camera trajectory; all renderers sample it, and velocities come
/// from central differences at a step far below any sensor period.
#[derive(Clone, Debug)]
pub struct Trajectory {
    kind: ScenarioKind,
    base_position: Vector3<f64>,
    target: Vector3<f64>,
    wobble: [SinBank; 3],
    rot_wobble: [SinBank; 3],
    orbit_radius: f64,
    orbit_rate: f64,
    orbit_phase: f64,
    height: f64,
}

const VELOCITY_STEP: f64 = 1e-5;

impl Trajectory {
    pub fn from_scenario(s: &Scenario) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_mul(31).wrapping_add(1));
        let base_position = Vector3::new(-s.standoff, 0.0, s.height);
        let target = s.target_point();
        let (wobble, rot_wobble) = match s.kind {
            ScenarioKind::Shaking => (
                [
                    SinBank::seeded(&mut rng, s.shake.amplitude_m, s.shake.freq_lo, s.shake.freq_hi, 3),
                    SinBank::seeded(&mut rng, s.shake.amplitude_m, s.shake.freq_lo, s.shake.freq_hi, 3),
                    SinBank::seeded(&mut rng, s.shake.amplitude_m, s.shake.freq_lo, s.shake.freq_hi, 3),
                ],
                [
                    SinBank::seeded(&mut rng, s.shake.amplitude_deg.to_radians(), s.shake.freq_lo, s.shake.freq_hi, 2),
                    SinBank::seeded(&mut rng, s.shake.amplitude_deg.to_radians(), s.shake.freq_lo, s.shake.freq_hi, 2),
                    SinBank::seeded(&mut rng, s.shake.amplitude_deg.to_radians(), s.shake.freq_lo, s.shake.freq_hi, 2),
                ],
            ),
            ScenarioKind::Rotation => (
                [SinBank::quiet(), SinBank::quiet(), SinBank::quiet()],
                [SinBank::quiet(), SinBank::quiet(), SinBank::quiet()],
            ),
            // Nominal-family: millimetric wobble only.
            _ => (
                [
                    SinBank::seeded(&mut rng, 0.002, 0.5, 1.5, 2),
                    SinBank::seeded(&mut rng, 0.002, 0.5, 1.5, 2),
                    SinBank::seeded(&mut rng, 0.002, 0.5, 1.5, 2),
                ],
                [SinBank::quiet(), SinBank::quiet(), SinBank::quiet()],
            ),
        };
        let orbit_rate = if s.kind == ScenarioKind::Rotation {
            s.sweep_deg.to_radians() / s.duration
        } else {
            0.0
        };
        Self {
            kind: s.kind,
            base_position,
            target,
            wobble,
            rot_wobble,
            orbit_radius: s.standoff,
            orbit_rate,
            orbit_phase: std::f64::consts::PI,
            height: s.height,
        }
    }

    fn position_at(&self, t: f64) -> Vector3<f64> {
        match self.kind {
            ScenarioKind::Rotation => {
                let phi = self.orbit_phase + self.orbit_rate * t;
                Vector3::new(
                    self.orbit_radius * phi.cos(),
                    self.orbit_radius * phi.sin(),
                    self.height,
                )
            }
            _ => {
                self.base_position
                    + Vector3::new(
                        self.wobble[0].value(t),
                        self.wobble[1].value(t),
                        self.wobble[2].value(t),
                    )
            }
        }
    }

    /// Camera pose in the world frame (z forward, x right, y down).
    pub fn pose_at(&self, t: f64) -> Pose {
        let p = self.position_at(t);
        let forward = (self.target - p).normalize();
        let up = Vector3::z();
        let x_c = forward.cross(&up);
        let x_c = if x_c.norm() < 1e-9 {
            Vector3::x()
        } else {
            x_c.normalize()
        };
        let y_c = forward.cross(&x_c);
        let look = Matrix3::from_columns(&[x_c, y_c, forward]);
        let wobble = so3_exp(&Vector3::new(
            self.rot_wobble[0].value(t),
            self.rot_wobble[1].value(t),
            self.rot_wobble[2].value(t),
        ));
        Pose::from_parts_unchecked(look * wobble, p)
    }

    /// World-frame linear and angular velocity by central differences.
    pub fn velocity_at(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let h = VELOCITY_STEP;
        let before = self.pose_at(t - h);
        let after = self.pose_at(t + h);
        let linear = (after.translation() - before.translation()) / (2.0 * h);
        let relative = after.rotation() * before.rotation().transpose();
        let angular = so3_log(&relative) / (2.0 * h);
        (linear, angular)
    }
}

/// Time-indexed ground-truth camera poses on the ego-motion rate grid.
pub fn generate_trajectory(s: &Scenario) -> Result<Vec<(f64, Pose)>, ScenarioError> {
    s.validate()?;
    let traj = Trajectory::from_scenario(s);
    let dt = 1.0 / s.rates.slam_hz;
    let steps = (s.duration * s.rates.slam_hz).floor() as usize;
    Ok((0..=steps)
        .map(|k| {
            let t = k as f64 * dt;
            (t, traj.pose_at(t).with_timestamp(t))
        })
        .collect())
}

/// Markers mounted on a plate: marker pose in the object frame plus config.
#[derive(Clone, Debug)]
pub struct MarkerLayout {
    pub markers: Vec<(MarkerConfig, Pose)>,
}

impl MarkerLayout {
    /// Plate with one 10 cm target, one 6.25 cm helper and three 2.5 cm
    /// helpers.
    pub fn plate_default() -> Self {
        let cfg = |id, side, target| MarkerConfig {
            marker_id: id,
            side_length: side,
            target_flag: target,
        };
        let at = |x: f64, y: f64| Pose::from_translation(Vector3::new(x, y, 0.0));
        Self {
            markers: vec![
                (cfg(0, 0.10, true), at(0.0, 0.0)),
                (cfg(1, 0.0625, false), at(0.18, 0.0)),
                (cfg(2, 0.025, false), at(-0.16, 0.10)),
                (cfg(3, 0.025, false), at(-0.16, -0.10)),
                (cfg(4, 0.025, false), at(0.18, 0.14)),
            ],
        }
    }

    pub fn configs(&self) -> Vec<MarkerConfig> {
        self.markers.iter().map(|(c, _)| *c).collect()
    }
}

/// Marker plate pose in the world frame: centered on the target point,
/// facing the camera's starting position.
pub fn plate_pose(s: &Scenario) -> Pose {
    let target = s.target_point();
    let toward_camera = (Vector3::new(-s.standoff, 0.0, s.height) - target).normalize();
    let up = Vector3::z();
    let z_o = toward_camera;
    let x_o = up.cross(&z_o);
    let x_o = if x_o.norm() < 1e-9 { Vector3::x() } else { x_o.normalize() };
    let y_o = z_o.cross(&x_o);
    Pose::from_parts_unchecked(Matrix3::from_columns(&[x_o, y_o, z_o]), target)
}

/// One camera frame: the visible marker observations and the ground-truth
/// target pose in the camera frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarkerFrame {
    pub time: f64,
    pub observations: Vec<MarkerObservation>,
    pub truth_target_in_camera: Pose,
}

/// Ground-truth target pose in the camera frame at an arbitrary time, for
/// delay-compensated outputs that land between frames.
pub fn truth_target_in_camera(s: &Scenario, layout: &MarkerLayout, t: f64) -> Pose {
    let traj = Trajectory::from_scenario(s);
    let plate = plate_pose(s);
    let target_in_plate = layout
        .markers
        .iter()
        .find(|(c, _)| c.target_flag)
        .map(|(_, pose)| *pose)
        .unwrap_or_else(Pose::identity);
    traj.pose_at(t).inverse().compose(&plate).compose(&target_in_plate)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn projected_min_triangle_area(corners: &[[f64; 2]; 4]) -> f64 {
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

/// Render the marker observation stream at the camera rate: exact pinhole
/// projections plus pixel noise, markers omitted outside the frustum,
/// when back-facing, inside dropout windows, or by the night dropout draw.
pub fn render_markers(
    s: &Scenario,
    layout: &MarkerLayout,
    k: &CameraIntrinsics,
) -> Result<Vec<MarkerFrame>, ScenarioError> {
    s.validate()?;
    let traj = Trajectory::from_scenario(s);
    let plate = plate_pose(s);
    let target_in_plate = layout
        .markers
        .iter()
        .find(|(c, _)| c.target_flag)
        .map(|(_, pose)| *pose)
        .ok_or_else(|| ScenarioError::Invalid("layout has no target marker".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_mul(31).wrapping_add(2));
    let dt = 1.0 / s.rates.camera_hz;
    let frames = (s.duration * s.rates.camera_hz).floor() as usize;
    let mut out = Vec::with_capacity(frames + 1);
    for frame in 0..=frames {
        let t = frame as f64 * dt;
        let cam = traj.pose_at(t);
        let cam_inv = cam.inverse();
        let truth = cam_inv.compose(&plate).compose(&target_in_plate);
        let mut observations = Vec::new();
        let dropped_window = s.in_dropout(t);
        for (cfg, marker_in_plate) in &layout.markers {
            // The per-marker noise draws are consumed unconditionally so the
            // stream stays reproducible whatever the visibility pattern.
            let night_drop = rng.random::<f64>() < s.noise.marker_dropout_prob;
            let noise: Vec<f64> = (0..8).map(|_| gauss(&mut rng) * s.noise.pixel_sigma).collect();
            if dropped_window || night_drop {
                continue;
            }
            let marker_in_cam = cam_inv.compose(&plate).compose(marker_in_plate);
            // Back-facing and near-edge-on plates are not detectable.
            let normal_cam = marker_in_cam.rotation() * Vector3::z();
            if normal_cam.z >= -0.17 {
                continue;
            }
            let mut corners = [[0.0f64; 2]; 4];
            let mut visible = true;
            for (slot, corner) in corners.iter_mut().zip(cfg.corners()) {
                let p = marker_in_cam.transform_point(&corner);
                match k.project(&p) {
                    Some((u, v)) if k.contains(u, v) => *slot = [u, v],
                    _ => {
                        visible = false;
                        break;
                    }
                }
            }
            if !visible || projected_min_triangle_area(&corners) < 4.0 {
                continue;
            }
            for (c, chunk) in corners.iter_mut().zip(noise.chunks(2)) {
                c[0] += chunk[0];
                c[1] += chunk[1];
            }
            if corners.iter().any(|c| !k.contains(c[0], c[1])) {
                continue;
            }
            observations.push(MarkerObservation {
                marker_id: cfg.marker_id,
                corners,
                timestamp: t,
            });
        }
        out.push(MarkerFrame {
            time: t,
            observations,
            truth_target_in_camera: truth,
        });
    }
    Ok(out)
}

/// Render the ego-motion stream at the ego-motion rate: ground truth plus a
/// bounded random-walk drift on translation (per-step increment of norm
/// `drift_rate·Δt`), with analytic velocities.
pub fn render_slam(s: &Scenario) -> Result<Vec<SlamEstimate>, ScenarioError> {
    s.validate()?;
    let traj = Trajectory::from_scenario(s);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_mul(31).wrapping_add(3));
    let dt = 1.0 / s.rates.slam_hz;
    let steps = (s.duration * s.rates.slam_hz).floor() as usize;
    let mut drift = Vector3::zeros();
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        if k > 0 && s.noise.slam_drift > 0.0 {
            let dir = Vector3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng));
            let dir = if dir.norm() < 1e-12 { Vector3::x() } else { dir.normalize() };
            drift += dir * (s.noise.slam_drift * dt);
        }
        let truth = traj.pose_at(t);
        let (v, w) = traj.velocity_at(t);
        out.push(SlamEstimate {
            pose_cam_in_world: Pose::from_parts_unchecked(*truth.rotation(), truth.translation() + drift)
                .with_timestamp(t),
            linear_velocity: [v.x, v.y, v.z],
            angular_velocity: [w.x, w.y, w.z],
            timestamp: t,
        });
    }
    Ok(out)
}

/// Parametric solids the LiDAR rays hit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Solid {
    /// Open cylinder around `axis` through `center`.
    Cylinder {
        center: [f64; 3],
        axis: [f64; 3],
        radius: f64,
        half_length: f64,
    },
    /// Axis-aligned box.
    BoxSolid {
        center: [f64; 3],
        half_extents: [f64; 3],
    },
    /// Horizontal ground plane at height `z`.
    GroundPlane { z: f64 },
}

impl Solid {
    /// Smallest positive ray parameter of the intersection, if any.
    fn raycast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match self {
            Solid::GroundPlane { z } => {
                if dir.z.abs() < 1e-12 {
                    return None;
                }
                let t = (z - origin.z) / dir.z;
                (t > 0.0).then_some(t)
            }
            Solid::BoxSolid { center, half_extents } => {
                let c = Vector3::from_column_slice(center);
                let h = Vector3::from_column_slice(half_extents);
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for a in 0..3 {
                    let lo = c[a] - h[a];
                    let hi = c[a] + h[a];
                    if dir[a].abs() < 1e-12 {
                        if origin[a] < lo || origin[a] > hi {
                            return None;
                        }
                        continue;
                    }
                    let mut t0 = (lo - origin[a]) / dir[a];
                    let mut t1 = (hi - origin[a]) / dir[a];
                    if t0 > t1 {
                        std::mem::swap(&mut t0, &mut t1);
                    }
                    t_near = t_near.max(t0);
                    t_far = t_far.min(t1);
                    if t_near > t_far {
                        return None;
                    }
                }
                if t_far < 0.0 {
                    None
                } else if t_near > 0.0 {
                    Some(t_near)
                } else {
                    Some(t_far)
                }
            }
            Solid::Cylinder {
                center,
                axis,
                radius,
                half_length,
            } => {
                let c = Vector3::from_column_slice(center);
                let a = Vector3::from_column_slice(axis).normalize();
                let oc = origin - c;
                let d_perp = dir - a * dir.dot(&a);
                let o_perp = oc - a * oc.dot(&a);
                let qa = d_perp.norm_squared();
                let qb = 2.0 * d_perp.dot(&o_perp);
                let qc = o_perp.norm_squared() - radius * radius;
                if qa < 1e-15 {
                    return None;
                }
                let disc = qb * qb - 4.0 * qa * qc;
                if disc < 0.0 {
                    return None;
                }
                let sqrt_disc = disc.sqrt();
                for t in [(-qb - sqrt_disc) / (2.0 * qa), (-qb + sqrt_disc) / (2.0 * qa)] {
                    if t > 0.0 {
                        let hit = origin + dir * t;
                        if (hit - c).dot(&a).abs() <= *half_length {
                            return Some(t);
                        }
                    }
                }
                None
            }
        }
    }

    /// Surface sample points for the detector oracle projection.
    fn sample_points(&self) -> Vec<Vector3<f64>> {
        match self {
            Solid::GroundPlane { .. } => Vec::new(),
            Solid::BoxSolid { center, half_extents } => {
                let c = Vector3::from_column_slice(center);
                let h = Vector3::from_column_slice(half_extents);
                let mut pts = Vec::with_capacity(8);
                for sx in [-1.0, 1.0] {
                    for sy in [-1.0, 1.0] {
                        for sz in [-1.0, 1.0] {
                            pts.push(c + Vector3::new(sx * h.x, sy * h.y, sz * h.z));
                        }
                    }
                }
                pts
            }
            Solid::Cylinder {
                center,
                axis,
                radius,
                half_length,
            } => {
                let c = Vector3::from_column_slice(center);
                let a = Vector3::from_column_slice(axis).normalize();
                let ortho = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
                let u = a.cross(&ortho).normalize();
                let v = a.cross(&u);
                let mut pts = Vec::new();
                for i in 0..16 {
                    let phi = std::f64::consts::TAU * i as f64 / 16.0;
                    let rim = u * (radius * phi.cos()) + v * (radius * phi.sin());
                    for s in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                        pts.push(c + a * (s * half_length) + rim);
                    }
                }
                pts
            }
        }
    }
}

/// World model for the LiDAR renderer: the target compound, static
/// background solids, and the class of moving occluders.
#[derive(Clone, Debug)]
pub struct SceneModel {
    /// Solids making up the tracked object. Fittings that break the
    /// rotational and axial symmetry of a bare pipe belong here, otherwise
    /// the object pose is not observable from geometry alone.
    pub target: Vec<Solid>,
    pub target_class: String,
    pub statics: Vec<Solid>,
    pub occluder_class: String,
}

impl SceneModel {
    /// Horizontal pipe with a flange box and a support bracket over flat
    /// ground, plus a few crates around it; the extra structure keeps both
    /// the object pose and the scan-to-scan registration constrained in all
    /// six degrees of freedom.
    pub fn pipe_scene(s: &Scenario) -> Self {
        Self {
            target: vec![
                Solid::Cylinder {
                    center: [0.0, 0.0, s.height],
                    axis: [0.0, 1.0, 0.0],
                    radius: 0.15,
                    half_length: 1.0,
                },
                // Valve flange off-center along the pipe.
                Solid::BoxSolid {
                    center: [0.0, 0.35, s.height + 0.18],
                    half_extents: [0.08, 0.06, 0.1],
                },
                // Support bracket under the other end.
                Solid::BoxSolid {
                    center: [0.0, -0.6, s.height / 2.0],
                    half_extents: [0.05, 0.08, s.height / 2.0],
                },
            ],
            target_class: "pipe".into(),
            statics: vec![
                Solid::GroundPlane { z: 0.0 },
                Solid::BoxSolid {
                    center: [0.9, 1.3, 0.25],
                    half_extents: [0.25, 0.25, 0.25],
                },
                Solid::BoxSolid {
                    center: [-0.4, -1.5, 0.3],
                    half_extents: [0.3, 0.2, 0.3],
                },
                Solid::BoxSolid {
                    center: [2.2, -0.8, 0.5],
                    half_extents: [0.15, 0.6, 0.5],
                },
            ],
            occluder_class: "arm".into(),
        }
    }
}

/// One LiDAR frame: the scan in the sensor frame, detector boxes, and the
/// ground-truth camera pose that produced it.
#[derive(Clone, Debug)]
pub struct LidarFrame {
    pub time: f64,
    pub cloud: PointCloud,
    pub detections: Vec<BBox2D>,
    pub truth_cam_in_world: Pose,
}

/// Beam pattern: 16 elevation rings over ±15°, 0.2° azimuth step.
pub const LIDAR_RINGS: usize = 16;
pub const LIDAR_AZIMUTH_STEP_DEG: f64 = 0.2;
pub const LIDAR_RANGE_MIN: f64 = 0.9;
pub const LIDAR_RANGE_MAX: f64 = 100.0;

/// Render the LiDAR stream: first-hit ray casting of the scene solids plus
/// the moving occluder, Gaussian range noise, ranges clipped to the sensor
/// limits, and the detector oracle boxes for the same timestamps.
pub fn render_lidar(
    s: &Scenario,
    scene: &SceneModel,
    k: &CameraIntrinsics,
) -> Result<Vec<LidarFrame>, ScenarioError> {
    s.validate()?;
    let traj = Trajectory::from_scenario(s);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_mul(31).wrapping_add(4));
    let dt = 1.0 / s.rates.lidar_hz;
    let frames = (s.duration * s.rates.lidar_hz).floor() as usize;
    let azimuth_steps = (360.0 / LIDAR_AZIMUTH_STEP_DEG) as usize;
    let mut out = Vec::with_capacity(frames + 1);
    for frame in 0..=frames {
        let t = frame as f64 * dt;
        let cam = traj.pose_at(t);
        let origin = *cam.translation();

        let mut solids: Vec<Solid> = Vec::with_capacity(scene.statics.len() + 2);
        solids.extend(scene.target.iter().cloned());
        solids.extend(scene.statics.iter().cloned());
        let occluder = s.occluder.as_ref().map(|spec| Solid::BoxSolid {
            center: (spec.center_at(t)).into(),
            half_extents: spec.half_extents,
        });
        if let Some(ref o) = occluder {
            solids.push(o.clone());
        }

        let mut points = Vec::new();
        for ring in 0..LIDAR_RINGS {
            let elevation = (-15.0 + 2.0 * ring as f64).to_radians();
            let (sin_el, cos_el) = elevation.sin_cos();
            for step in 0..azimuth_steps {
                let azimuth = (step as f64 * LIDAR_AZIMUTH_STEP_DEG).to_radians();
                let (sin_az, cos_az) = azimuth.sin_cos();
                // Sensor frame: z forward, x right, y down; elevation tips
                // the beam up (−y), azimuth sweeps around the y axis.
                let dir_sensor = Vector3::new(cos_el * sin_az, -sin_el, cos_el * cos_az);
                let dir_world = cam.rotate_vector(&dir_sensor);
                let mut best: Option<f64> = None;
                for solid in &solids {
                    if let Some(hit) = solid.raycast(&origin, &dir_world) {
                        best = Some(best.map_or(hit, |b: f64| b.min(hit)));
                    }
                }
                let Some(mut range) = best else { continue };
                if s.noise.range_sigma > 0.0 {
                    range += gauss(&mut rng) * s.noise.range_sigma;
                }
                if !(LIDAR_RANGE_MIN..=LIDAR_RANGE_MAX).contains(&range) {
                    continue;
                }
                points.push(Point3::from(dir_sensor * range));
            }
        }
        let cloud = PointCloud::new(points, "lidar").expect("finite ray hits");

        // Detector oracle: project solid surface samples, box the hits.
        let mut detections = Vec::new();
        let cam_inv = cam.inverse();
        let project_box = |solids: &[Solid], class: &str| {
            let mut lo = (f64::INFINITY, f64::INFINITY);
            let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            let mut count = 0usize;
            for solid in solids {
                for p in solid.sample_points() {
                    let cam_p = cam_inv.transform_point(&p);
                    if let Some((u, v)) = k.project(&cam_p) {
                        if k.contains(u, v) {
                            lo.0 = lo.0.min(u);
                            lo.1 = lo.1.min(v);
                            hi.0 = hi.0.max(u);
                            hi.1 = hi.1.max(v);
                            count += 1;
                        }
                    }
                }
            }
            if count >= 4 && hi.0 > lo.0 && hi.1 > lo.1 {
                BBox2D::new(class, 0.9, (lo.0, lo.1, hi.0, hi.1)).ok()
            } else {
                None
            }
        };
        let miss = rng.random::<f64>() < s.noise.detector_false_negative;
        if !miss {
            if let Some(b) = project_box(&scene.target, &scene.target_class) {
                detections.push(b);
            }
        }
        if let Some(ref o) = occluder {
            let miss = rng.random::<f64>() < s.noise.detector_false_negative;
            if !miss {
                if let Some(b) = project_box(std::slice::from_ref(o), &scene.occluder_class) {
                    detections.push(b);
                }
            }
        }

        out.push(LidarFrame {
            time: t,
            cloud,
            detections,
            truth_cam_in_world: cam.with_timestamp(t),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::new(600.0, 600.0, 640.0, 480.0, 1280.0, 960.0).unwrap()
    }

    #[test]
    fn nominal_trajectory_stays_put() {
        let s = Scenario::new(ScenarioKind::Nominal, 4.0, 3);
        let traj = Trajectory::from_scenario(&s);
        let start = traj.pose_at(0.0);
        let end = traj.pose_at(4.0);
        assert!(start.translation_distance_to(&end) < 0.02);
    }

    #[test]
    fn rotation_sweep_matches_config() {
        let mut s = Scenario::new(ScenarioKind::Rotation, 6.0, 5);
        s.sweep_deg = 120.0;
        let traj = Trajectory::from_scenario(&s);
        let p0 = traj.position_at(0.0) - Vector3::new(0.0, 0.0, s.height);
        let p1 = traj.position_at(6.0) - Vector3::new(0.0, 0.0, s.height);
        let cos = p0.dot(&p1) / (p0.norm() * p1.norm());
        let swept = cos.clamp(-1.0, 1.0).acos().to_degrees();
        assert_abs_diff_eq!(swept, 120.0, epsilon = 1e-6);
    }

    #[test]
    fn trajectory_is_seed_reproducible() {
        let s = Scenario::new(ScenarioKind::Shaking, 2.0, 11);
        let a = generate_trajectory(&s).unwrap();
        let b = generate_trajectory(&s).unwrap();
        let to_bytes = |poses: &[(f64, Pose)]| serde_json::to_vec(&poses.iter().map(|(t, p)| (t, *p)).collect::<Vec<_>>()).unwrap();
        assert_eq!(to_bytes(&a), to_bytes(&b));
    }

    #[test]
    fn velocities_match_finite_differences_of_poses() {
        let s = Scenario::new(ScenarioKind::Shaking, 3.0, 7);
        let traj = Trajectory::from_scenario(&s);
        let dt = 0.005;
        for k in 1..20 {
            let t = k as f64 * 0.05;
            let (v, w) = traj.velocity_at(t);
            let before = traj.pose_at(t - dt);
            let after = traj.pose_at(t + dt);
            let v_fd = (after.translation() - before.translation()) / (2.0 * dt);
            assert!((v - v_fd).norm() < 0.05 * v.norm().max(0.01), "t={t}");
            let w_fd = so3_log(&(after.rotation() * before.rotation().transpose())) / (2.0 * dt);
            assert!((w - w_fd).norm() < 0.05 * w.norm().max(0.01), "t={t}");
        }
    }

    #[test]
    fn dropout_windows_are_validated() {
        let mut s = Scenario::new(ScenarioKind::Nominal, 2.0, 1);
        s.noise.dropout_windows = vec![[1.0, 5.0]];
        assert!(s.validate().is_err());
        s.noise.dropout_windows = vec![[0.5, 1.5]];
        assert!(s.validate().is_ok());
    }

    #[test]
    fn marker_stream_round_trips_through_solver() {
        let s = Scenario::new(ScenarioKind::Nominal, 1.0, 2);
        let layout = MarkerLayout::plate_default();
        let k = camera();
        let frames = render_markers(&s, &layout, &k).unwrap();
        assert!(!frames.is_empty());
        // Zero noise: solving any observed marker and chaining the layout
        // recovers the truth pose.
        let configs = layout.configs();
        for frame in frames.iter().take(5) {
            assert!(!frame.observations.is_empty());
            for obs in &frame.observations {
                let cfg = configs.iter().find(|c| c.marker_id == obs.marker_id).unwrap();
                let solved = crate::marker::solve_marker_pose(obs, cfg, &k).unwrap();
                let marker_in_plate = layout
                    .markers
                    .iter()
                    .find(|(c, _)| c.marker_id == obs.marker_id)
                    .map(|(_, p)| *p)
                    .unwrap();
                let target_in_plate = layout.markers[0].1;
                let truth_marker = frame
                    .truth_target_in_camera
                    .compose(&target_in_plate.inverse())
                    .compose(&marker_in_plate);
                assert!(
                    solved.translation_distance_to(&truth_marker) < 1e-6,
                    "marker {} err {}",
                    obs.marker_id,
                    solved.translation_distance_to(&truth_marker)
                );
            }
        }
    }

    #[test]
    fn dropout_window_empties_observations() {
        let mut s = Scenario::new(ScenarioKind::Nominal, 2.0, 2);
        s.noise.dropout_windows = vec![[0.5, 1.0]];
        let frames = render_markers(&s, &MarkerLayout::plate_default(), &camera()).unwrap();
        for f in &frames {
            if f.time >= 0.5 && f.time <= 1.0 {
                assert!(f.observations.is_empty(), "t={}", f.time);
            }
        }
        let before: usize = frames
            .iter()
            .filter(|f| f.time < 0.5)
            .map(|f| f.observations.len())
            .sum();
        assert!(before > 0);
    }

    #[test]
    fn slam_stream_drift_is_bounded_and_zero_when_off() {
        let s = Scenario::new(ScenarioKind::Nominal, 2.0, 9);
        let clean = render_slam(&s).unwrap();
        let traj = Trajectory::from_scenario(&s);
        for est in clean.iter().step_by(37) {
            let truth = traj.pose_at(est.timestamp);
            assert!(est.pose_cam_in_world.translation_distance_to(&truth) < 1e-12);
        }

        let mut s2 = Scenario::new(ScenarioKind::Nominal, 2.0, 9);
        s2.noise.slam_drift = 0.05;
        let drifted = render_slam(&s2).unwrap();
        for est in &drifted {
            let truth = traj.pose_at(est.timestamp);
            let err = est.pose_cam_in_world.translation_distance_to(&truth);
            assert!(err <= 0.05 * est.timestamp + 1e-9, "t={} err={err}", est.timestamp);
        }
    }

    #[test]
    fn slam_velocities_match_pose_differences() {
        let s = Scenario::new(ScenarioKind::Shaking, 1.0, 4);
        let stream = render_slam(&s).unwrap();
        let dt = 1.0 / s.rates.slam_hz;
        for w in stream.windows(3).step_by(17) {
            let v_fd = (w[2].pose_cam_in_world.translation() - w[0].pose_cam_in_world.translation()) / (2.0 * dt);
            let v = w[1].linear();
            assert!((v - v_fd).norm() < 0.2 * v.norm().max(0.05));
        }
    }

    #[test]
    fn lidar_ground_plane_returns_satisfy_plane_equation() {
        let mut s = Scenario::new(ScenarioKind::Nominal, 0.2, 6);
        s.noise.range_sigma = 0.0;
        let scene = SceneModel {
            target: vec![Solid::GroundPlane { z: 0.0 }],
            target_class: "ground".into(),
            statics: vec![],
            occluder_class: "arm".into(),
        };
        let frames = render_lidar(&s, &scene, &camera()).unwrap();
        let frame = &frames[0];
        assert!(!frame.cloud.is_empty());
        for p in frame.cloud.points().iter().step_by(101) {
            let world = frame.truth_cam_in_world.transform_point(&p.coords);
            assert!(world.z.abs() < 1e-6, "z = {}", world.z);
        }
    }

    #[test]
    fn occluder_shadows_the_pipe() {
        let mut s = Scenario::new(ScenarioKind::Occlusion, 0.2, 8);
        // Park the occluder dead center on the line of sight.
        s.occluder = Some(OccluderSpec {
            half_extents: [0.06, 0.2, 0.3],
            base_center: [-s.standoff * 0.5, 0.0, s.height],
            direction: [0.0, 1.0, 0.0],
            amplitude: 0.0,
            period: 2.5,
        });
        let scene = SceneModel::pipe_scene(&s);
        let with = render_lidar(&s, &scene, &camera()).unwrap();

        let mut s_clear = s.clone();
        s_clear.kind = ScenarioKind::Nominal;
        s_clear.occluder = None;
        let without = render_lidar(&s_clear, &scene, &camera()).unwrap();

        // Count returns near the pipe surface in each.
        let near_pipe = |frame: &LidarFrame| -> usize {
            frame
                .cloud
                .points()
                .iter()
                .filter(|p| {
                    let w = frame.truth_cam_in_world.transform_point(&p.coords);
                    let radial = ((w.x).powi(2) + (w.z - s.height).powi(2)).sqrt();
                    (radial - 0.15).abs() < 0.02 && w.y.abs() <= 1.0
                })
                .count()
        };
        let occluded_count = near_pipe(&with[0]);
        let clear_count = near_pipe(&without[0]);
        assert!(
            occluded_count < clear_count,
            "occluded {occluded_count} vs clear {clear_count}"
        );
        assert!(clear_count > 100);
    }

    #[test]
    fn empty_scene_gives_empty_cloud() {
        let s = Scenario::new(ScenarioKind::Nominal, 0.2, 6);
        let scene = SceneModel {
            target: vec![Solid::BoxSolid {
                center: [500.0, 500.0, 500.0],
                half_extents: [0.1, 0.1, 0.1],
            }],
            target_class: "box".into(),
            statics: vec![],
            occluder_class: "arm".into(),
        };
        let frames = render_lidar(&s, &scene, &camera()).unwrap();
        assert!(frames[0].cloud.is_empty());
    }

    #[test]
    fn streams_are_byte_reproducible() {
        let mut s = Scenario::new(ScenarioKind::Occlusion, 0.4, 13);
        s.noise.pixel_sigma = 0.3;
        s.noise.range_sigma = 0.005;
        s.noise.slam_drift = 0.02;
        let k = camera();
        let layout = MarkerLayout::plate_default();
        let scene = SceneModel::pipe_scene(&s);

        let markers_a = serde_json::to_vec(&render_markers(&s, &layout, &k).unwrap()).unwrap();
        let markers_b = serde_json::to_vec(&render_markers(&s, &layout, &k).unwrap()).unwrap();
        assert_eq!(markers_a, markers_b);

        let slam_a = serde_json::to_vec(&render_slam(&s).unwrap()).unwrap();
        let slam_b = serde_json::to_vec(&render_slam(&s).unwrap()).unwrap();
        assert_eq!(slam_a, slam_b);

        let lidar_a = render_lidar(&s, &scene, &k).unwrap();
        let lidar_b = render_lidar(&s, &scene, &k).unwrap();
        let mut bytes_a = Vec::new();
        let mut bytes_b = Vec::new();
        crate::registration::write_pcb(&lidar_a[0].cloud, &mut bytes_a).unwrap();
        crate::registration::write_pcb(&lidar_b[0].cloud, &mut bytes_b).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn timestamps_sit_on_rate_grids() {
        let s = Scenario::new(ScenarioKind::Nominal, 1.0, 1);
        let frames = render_markers(&s, &MarkerLayout::plate_default(), &camera()).unwrap();
        for (i, f) in frames.iter().enumerate() {
            assert_abs_diff_eq!(f.time, i as f64 / s.rates.camera_hz, epsilon = 1e-12);
        }
        let slam = render_slam(&s).unwrap();
        for (i, e) in slam.iter().enumerate() {
            assert_abs_diff_eq!(e.timestamp, i as f64 / s.rates.slam_hz, epsilon = 1e-12);
        }
    }
}
