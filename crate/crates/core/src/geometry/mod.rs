//! Rigid-body transforms on SE(3), rotation metrics, Lie-algebra helpers and
//! the flat scene graph that maps every sensor and object frame to the robot
//! base frame.

mod scene_graph;

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use scene_graph::{EdgeSource, NodeKind, SceneGraph, SceneGraphError};

/// Maximum allowed deviation of `RᵀR` from identity at construction.
pub const ROTATION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("rotation matrix is not orthonormal (max deviation {0:.3e})")]
    NonOrthonormalRotation(f64),
    #[error("rotation matrix is a reflection (det = {0:.6})")]
    ReflectedRotation(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("focal lengths must be positive, got ({0}, {1})")]
    BadFocalLength(f64, f64),
    #[error("principal point ({0}, {1}) outside image bounds")]
    CenterOutOfBounds(f64, f64),
}

/// A rigid transform: rotation matrix plus translation in meters, with an
/// optional timestamp in simulation seconds.
///
/// Construction validates orthonormality and handedness, then projects the
/// rotation onto the nearest element of SO(3), so stored rotations satisfy
/// `RᵀR = I` and `det R = 1` to machine precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    timestamp: Option<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if rotation.iter().any(|v| !v.is_finite()) || translation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("pose"));
        }
        let dev = orthonormality_deviation(&rotation);
        if dev > ROTATION_TOL {
            return Err(GeometryError::NonOrthonormalRotation(dev));
        }
        let det = rotation.determinant();
        if det <= 0.0 {
            return Err(GeometryError::ReflectedRotation(det));
        }
        // Matrices already within the per-entry invariant bound are stored
        // verbatim so serialization round-trips bit-exactly; anything between
        // that and the construction tolerance is snapped onto SO(3).
        let rotation = if dev <= 1e-9 {
            rotation
        } else {
            project_to_rotation(&rotation)
        };
        Ok(Self {
            rotation,
            translation,
            timestamp: None,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            timestamp: None,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
            timestamp: None,
        }
    }

    /// Rotation about an axis-angle vector, zero translation.
    pub fn from_scaled_axis(omega: Vector3<f64>) -> Self {
        Self {
            rotation: so3_exp(&omega),
            translation: Vector3::zeros(),
            timestamp: None,
        }
    }

    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>, timestamp: Option<f64>) -> Result<Self, GeometryError> {
        let mut pose = Self::new(rotation, translation)?;
        pose.timestamp = timestamp;
        Ok(pose)
    }

    /// Internal constructor for rotations already known to be orthonormal
    /// (products and projections of validated poses).
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
            timestamp: None,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn timestamp(&self) -> Option<f64> {
        self.timestamp
    }

    pub fn with_timestamp(mut self, t: f64) -> Self {
        self.timestamp = Some(t);
        self
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            timestamp: None,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
            timestamp: None,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn rotate_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Geodesic distance between the rotation parts, in radians.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        rotation_angle(&self.rotation, &other.rotation)
    }

    pub fn translation_distance_to(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Wire representation used everywhere a pose appears in JSON:
/// `{"r": [9 floats row-major], "t": [3 floats]}`.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    r: [f64; 9],
    t: [f64; 3],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let m = &self.rotation;
        let repr = PoseRepr {
            r: [
                m[(0, 0)],
                m[(0, 1)],
                m[(0, 2)],
                m[(1, 0)],
                m[(1, 1)],
                m[(1, 2)],
                m[(2, 0)],
                m[(2, 1)],
                m[(2, 2)],
            ],
            t: [self.translation.x, self.translation.y, self.translation.z],
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        let rotation = Matrix3::from_row_slice(&repr.r);
        let translation = Vector3::from_column_slice(&repr.t);
        Pose::new(rotation, translation).map_err(D::Error::custom)
    }
}

fn orthonormality_deviation(r: &Matrix3<f64>) -> f64 {
    let gram = r.transpose() * r;
    let mut dev: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((gram[(i, j)] - target).abs());
        }
    }
    dev
}

/// Nearest rotation matrix in the Frobenius sense, via SVD with a sign fix
/// for the reflective case.
fn project_to_rotation(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let u = svd.u.expect("3x3 SVD");
    let v_t = svd.v_t.expect("3x3 SVD");
    let mut u = u;
    if (u * v_t).determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    u * v_t
}

/// Geodesic angle between two rotation matrices, the value of
/// `arccos((tr(aᵀb) − 1) / 2)` with the trace argument clamped to [−1, 1].
/// Evaluated through the quaternion of `aᵀb`, which is well conditioned at
/// both ends of [0, π] where the arccos form loses half the digits.
pub fn rotation_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = nalgebra::Rotation3::from_matrix_unchecked(a.transpose() * b);
    nalgebra::UnitQuaternion::from_rotation_matrix(&rel).angle()
}

/// Skew-symmetric matrix such that `hat(w) * v == w × v`.
pub fn so3_hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rotation exponential (Rodrigues), with a series expansion near zero.
pub fn so3_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let hat = so3_hat(omega);
    if theta < 1e-10 {
        return Matrix3::identity() + hat + hat * hat * 0.5;
    }
    let (s, c) = theta.sin_cos();
    Matrix3::identity() + hat * (s / theta) + hat * hat * ((1.0 - c) / (theta * theta))
}

/// Rotation logarithm as a scaled-axis vector. Uses the quaternion route,
/// which stays accurate near the π boundary.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(*r);
    let q = nalgebra::UnitQuaternion::from_rotation_matrix(&rot);
    q.scaled_axis()
}

/// SE(3) exponential with tangent layout `[translation; rotation]`.
pub fn se3_exp(xi: &Vector6<f64>) -> Pose {
    let rho = Vector3::new(xi[0], xi[1], xi[2]);
    let theta = Vector3::new(xi[3], xi[4], xi[5]);
    let rotation = so3_exp(&theta);
    let v = left_jacobian(&theta);
    Pose::from_parts_unchecked(rotation, v * rho)
}

/// SE(3) logarithm, inverse of [`se3_exp`].
pub fn se3_log(pose: &Pose) -> Vector6<f64> {
    let theta = so3_log(pose.rotation());
    let v_inv = left_jacobian_inverse(&theta);
    let rho = v_inv * pose.translation();
    Vector6::new(rho.x, rho.y, rho.z, theta.x, theta.y, theta.z)
}

/// Adjoint of a pose on the `[translation; rotation]` tangent layout.
pub fn se3_adjoint(pose: &Pose) -> Matrix6<f64> {
    let r = pose.rotation();
    let t_hat_r = so3_hat(pose.translation()) * r;
    let mut adj = Matrix6::zeros();
    adj.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    adj.fixed_view_mut::<3, 3>(0, 3).copy_from(&t_hat_r);
    adj.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    adj
}

fn left_jacobian(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle = theta.norm();
    let hat = so3_hat(theta);
    if angle < 1e-10 {
        return Matrix3::identity() + hat * 0.5 + hat * hat * (1.0 / 6.0);
    }
    let a2 = angle * angle;
    Matrix3::identity()
        + hat * ((1.0 - angle.cos()) / a2)
        + hat * hat * ((angle - angle.sin()) / (a2 * angle))
}

fn left_jacobian_inverse(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle = theta.norm();
    let hat = so3_hat(theta);
    if angle < 1e-10 {
        return Matrix3::identity() - hat * 0.5 + hat * hat * (1.0 / 12.0);
    }
    let half = angle / 2.0;
    let cot = half.cos() / half.sin();
    Matrix3::identity() - hat * 0.5 + hat * hat * ((1.0 - half * cot) / (angle * angle))
}

/// Pinhole camera model: focal lengths and principal point in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal_x: f64,
    pub focal_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub image_width: f64,
    pub image_height: f64,
}

impl CameraIntrinsics {
    pub fn new(
        focal_x: f64,
        focal_y: f64,
        center_x: f64,
        center_y: f64,
        image_width: f64,
        image_height: f64,
    ) -> Result<Self, GeometryError> {
        if focal_x <= 0.0 || focal_y <= 0.0 {
            return Err(GeometryError::BadFocalLength(focal_x, focal_y));
        }
        if !(0.0..=image_width).contains(&center_x) || !(0.0..=image_height).contains(&center_y) {
            return Err(GeometryError::CenterOutOfBounds(center_x, center_y));
        }
        Ok(Self {
            focal_x,
            focal_y,
            center_x,
            center_y,
            image_width,
            image_height,
        })
    }

    /// Project a camera-frame point; `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((
            self.focal_x * p.x / p.z + self.center_x,
            self.focal_y * p.y / p.z + self.center_y,
        ))
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        (0.0..=self.image_width).contains(&u) && (0.0..=self.image_height).contains(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    pub(crate) fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let axis = Vector3::new(
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        );
        let angle = rng.random::<f64>() * 2.0 * PI - PI;
        let omega = if axis.norm() < 1e-12 {
            Vector3::x() * angle
        } else {
            axis.normalize() * angle
        };
        let t = Vector3::new(
            rng.random::<f64>() * 4.0 - 2.0,
            rng.random::<f64>() * 4.0 - 2.0,
            rng.random::<f64>() * 4.0 - 2.0,
        );
        Pose::from_parts_unchecked(so3_exp(&omega), t)
    }

    fn rz(angle: f64) -> Matrix3<f64> {
        so3_exp(&Vector3::new(0.0, 0.0, angle))
    }

    #[test]
    fn identity_composition_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_pose(&mut rng);
        let q = Pose::identity().compose(&p);
        assert_abs_diff_eq!(q.rotation(), p.rotation(), epsilon = 1e-12);
        assert_abs_diff_eq!(q.translation(), p.translation(), epsilon = 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = random_pose(&mut rng);
            let id = p.compose(&p.inverse());
            assert_abs_diff_eq!(id.rotation(), &Matrix3::identity(), epsilon = 1e-9);
            assert_abs_diff_eq!(id.translation(), &Vector3::zeros(), epsilon = 1e-9);
        }
    }

    #[test]
    fn compose_matches_hand_multiplied_quarter_turns() {
        // Rz(90°), t=(1,0,0) composed with itself: Rz(180°), t=(1,1,0).
        let p = Pose::new(rz(FRAC_PI_2), Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let q = p.compose(&p);
        assert_abs_diff_eq!(q.rotation(), &rz(PI), epsilon = 1e-12);
        assert_abs_diff_eq!(q.translation(), &Vector3::new(1.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn inverse_of_pure_translation_negates() {
        let p = Pose::from_translation(Vector3::new(0.0, 0.0, 1.0));
        let inv = p.inverse();
        assert_abs_diff_eq!(inv.translation(), &Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-15);
    }

    #[test]
    fn rotation_angle_basics() {
        let id = Matrix3::identity();
        assert_abs_diff_eq!(rotation_angle(&id, &id), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rotation_angle(&id, &rz(FRAC_PI_2)), FRAC_PI_2, epsilon = 1e-12);
        // Sampled angles round-trip through the axis-angle construction.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let theta = rng.random::<f64>() * (PI - 1e-6);
            assert_abs_diff_eq!(rotation_angle(&id, &rz(theta)), theta, epsilon = 1e-9);
        }
    }

    #[test]
    fn constructor_rejects_bad_rotations() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = 1.1;
        assert!(matches!(
            Pose::new(m, Vector3::zeros()),
            Err(GeometryError::NonOrthonormalRotation(_))
        ));
        let mut refl = Matrix3::identity();
        refl[(2, 2)] = -1.0;
        assert!(matches!(
            Pose::new(refl, Vector3::zeros()),
            Err(GeometryError::ReflectedRotation(_))
        ));
    }

    #[test]
    fn se3_log_exp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let p = random_pose(&mut rng);
            let xi = se3_log(&p);
            let q = se3_exp(&xi);
            assert_abs_diff_eq!(q.rotation(), p.rotation(), epsilon = 1e-9);
            assert_abs_diff_eq!(q.translation(), p.translation(), epsilon = 1e-9);
        }
    }

    #[test]
    fn pose_json_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_pose(&mut rng);
        let text = serde_json::to_string(&p).unwrap();
        let q: Pose = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&q).unwrap(), text);
    }

    #[test]
    fn intrinsics_validation_and_projection() {
        assert!(CameraIntrinsics::new(0.0, 600.0, 320.0, 240.0, 640.0, 480.0).is_err());
        assert!(CameraIntrinsics::new(600.0, 600.0, 700.0, 240.0, 640.0, 480.0).is_err());
        let k = CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 640.0, 480.0).unwrap();
        assert_eq!(k.project(&Vector3::new(0.0, 0.0, 1.0)), Some((320.0, 240.0)));
        assert_eq!(k.project(&Vector3::new(0.0, 0.0, -1.0)), None);
    }

    proptest! {
        #[test]
        fn compose_is_associative(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let c = random_pose(&mut rng);
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!((left.translation() - right.translation()).norm() < 1e-9);
            prop_assert!(left.rotation_angle_to(&right) < 1e-9);
        }

        #[test]
        fn rotation_angle_symmetric_and_triangle(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = *random_pose(&mut rng).rotation();
            let b = *random_pose(&mut rng).rotation();
            let c = *random_pose(&mut rng).rotation();
            prop_assert!((rotation_angle(&a, &b) - rotation_angle(&b, &a)).abs() < 1e-9);
            prop_assert!(rotation_angle(&a, &c) <= rotation_angle(&a, &b) + rotation_angle(&b, &c) + 1e-9);
        }
    }
}
