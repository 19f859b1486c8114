//! Rigid point-cloud registration: weighted centroids, the closed-form
//! Procrustes/Kabsch alignment, normal estimation, and a coarse-to-fine ICP
//! loop in point-to-point and point-to-plane variants.
//!
//! Conventions: `procrustes_align(src, dst, ..)` and `icp(src, dst, ..)`
//! return the pose `T` that maps `dst` coordinates into the `src` frame,
//! i.e. `src_i ≈ T · dst_j` for matched pairs. Registering a scan against an
//! object model therefore yields the object pose in the scan frame directly.

mod io;
mod kdtree;

use crate::geometry::{so3_exp, Pose};
use nalgebra::{Matrix3, Matrix6, Point3, Vector3, Vector6};
use thiserror::Error;

pub use io::{read_pcb, read_xyz, write_pcb};
pub use kdtree::KdTree;

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("weights sum to zero")]
    ZeroWeights,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("degenerate correspondence configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("cloud of {got} points cannot support {k} neighbors")]
    TooFewPoints { got: usize, k: usize },
    #[error("no correspondences within {0} m")]
    NoCorrespondences(f64),
    #[error("non-finite coordinate in point cloud")]
    NonFinitePoint,
    #[error("normals invalid: {0}")]
    BadNormals(String),
    #[error("invalid ICP parameters: {0}")]
    InvalidParams(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed point cloud file: {0}")]
    MalformedFile(String),
}

/// Ordered 3D points in meters with optional unit normals.
#[derive(Clone, Debug)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
    frame_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>, frame_id: impl Into<String>) -> Result<Self, RegistrationError> {
        if points.iter().any(|p| !p.coords.iter().all(|v| v.is_finite())) {
            return Err(RegistrationError::NonFinitePoint);
        }
        Ok(Self {
            points,
            normals: None,
            frame_id: frame_id.into(),
        })
    }

    pub fn with_normals(mut self, normals: Vec<Vector3<f64>>) -> Result<Self, RegistrationError> {
        if normals.len() != self.points.len() {
            return Err(RegistrationError::BadNormals(format!(
                "{} normals for {} points",
                normals.len(),
                self.points.len()
            )));
        }
        for n in &normals {
            if !n.iter().all(|v| v.is_finite()) || (n.norm() - 1.0).abs() > 1e-6 {
                return Err(RegistrationError::BadNormals("normal is not unit length".into()));
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    /// Apply a rigid transform to points (and normals, rotation only).
    pub fn transformed(&self, pose: &Pose) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| Point3::from(pose.transform_point(&p.coords)))
                .collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| pose.rotate_vector(n)).collect()),
            frame_id: self.frame_id.clone(),
        }
    }

    /// Keep only points whose index passes the predicate; drops normals of
    /// removed points, preserving order.
    pub fn filtered(&self, mut keep: impl FnMut(usize, &Point3<f64>) -> bool) -> PointCloud {
        let mut points = Vec::new();
        let mut normals = self.normals.as_ref().map(|_| Vec::new());
        for (i, p) in self.points.iter().enumerate() {
            if keep(i, p) {
                points.push(*p);
                if let (Some(out), Some(ns)) = (normals.as_mut(), self.normals.as_ref()) {
                    out.push(ns[i]);
                }
            }
        }
        PointCloud {
            points,
            normals,
            frame_id: self.frame_id.clone(),
        }
    }

    /// Voxel-grid downsample: one representative point (the voxel mean) per
    /// occupied cell, emitted in lexicographic cell order. Normals are
    /// dropped.
    pub fn voxel_downsampled(&self, voxel: f64) -> PointCloud {
        use std::collections::BTreeMap;
        if self.points.is_empty() || voxel <= 0.0 {
            return self.clone();
        }
        let mut cells: BTreeMap<(i64, i64, i64), (Vector3<f64>, usize)> = BTreeMap::new();
        // Anchor the grid at the min corner so a voxel larger than the
        // whole extent collapses everything into one cell.
        let mut lo = Vector3::repeat(f64::INFINITY);
        for p in &self.points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
            }
        }
        for p in &self.points {
            let key = (
                ((p.x - lo.x) / voxel).floor() as i64,
                ((p.y - lo.y) / voxel).floor() as i64,
                ((p.z - lo.z) / voxel).floor() as i64,
            );
            let entry = cells.entry(key).or_insert((Vector3::zeros(), 0));
            entry.0 += p.coords;
            entry.1 += 1;
        }
        let points = cells
            .values()
            .map(|(sum, n)| Point3::from(sum / *n as f64))
            .collect();
        PointCloud {
            points,
            normals: None,
            frame_id: self.frame_id.clone(),
        }
    }
}

/// Outcome of a registration run. `fitness` is the fraction of source points
/// with a valid match at the final correspondence distance; `inlier_rmse` is
/// the RMS residual over those matches.
#[derive(Clone, Copy, Debug)]
pub struct RegistrationResult {
    pub pose: Pose,
    pub fitness: f64,
    pub inlier_rmse: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `Σ wᵢ pᵢ / Σ wᵢ`; uniform weights when `weights` is `None`.
pub fn weighted_centroid(
    cloud: &PointCloud,
    weights: Option<&[f64]>,
) -> Result<Vector3<f64>, RegistrationError> {
    if cloud.is_empty() {
        return Err(RegistrationError::EmptyCloud);
    }
    match weights {
        None => {
            let sum: Vector3<f64> = cloud.points.iter().map(|p| p.coords).sum();
            Ok(sum / cloud.len() as f64)
        }
        Some(w) => {
            if w.len() != cloud.len() {
                return Err(RegistrationError::InvalidWeights(format!(
                    "{} weights for {} points",
                    w.len(),
                    cloud.len()
                )));
            }
            if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(RegistrationError::InvalidWeights("negative or non-finite weight".into()));
            }
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return Err(RegistrationError::ZeroWeights);
            }
            let sum: Vector3<f64> = cloud
                .points
                .iter()
                .zip(w)
                .map(|(p, &wi)| p.coords * wi)
                .sum();
            Ok(sum / total)
        }
    }
}

/// Closed-form least-squares alignment over given correspondences.
///
/// Returns the pose minimizing `Σ ‖src[i] − R·dst[j] − t‖²` over the pairs:
/// cross-covariance `C = Σ p̄ q̄ᵀ`, `C = UΣVᵀ`, `R = UVᵀ` (last column of `U`
/// negated when `det(UVᵀ) = −1`), `t = c_src − R·c_dst`.
pub fn procrustes_align(
    src: &PointCloud,
    dst: &PointCloud,
    correspondences: &[(usize, usize)],
) -> Result<Pose, RegistrationError> {
    if correspondences.len() < 3 {
        return Err(RegistrationError::DegenerateConfiguration(format!(
            "{} correspondences, need at least 3",
            correspondences.len()
        )));
    }
    let n = correspondences.len() as f64;
    let mut c_src = Vector3::zeros();
    let mut c_dst = Vector3::zeros();
    for &(i, j) in correspondences {
        c_src += src.points[i].coords;
        c_dst += dst.points[j].coords;
    }
    c_src /= n;
    c_dst /= n;

    let mut cross = Matrix3::zeros();
    for &(i, j) in correspondences {
        let p = src.points[i].coords - c_src;
        let q = dst.points[j].coords - c_dst;
        cross += p * q.transpose();
    }
    let svd = cross.svd(true, true);
    let sigma = svd.singular_values;
    if sigma[1] <= 1e-12 * sigma[0].max(1e-300) {
        return Err(RegistrationError::DegenerateConfiguration(
            "centered correspondence matrix has rank < 2".into(),
        ));
    }
    let mut u = svd.u.expect("3x3 SVD");
    let v_t = svd.v_t.expect("3x3 SVD");
    if (u * v_t).determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    let rotation = u * v_t;
    let translation = c_src - rotation * c_dst;
    Ok(Pose::from_parts_unchecked(rotation, translation))
}

/// Per-point normals from the smallest eigenvector of the local covariance
/// over `k_neighbors` neighbors, oriented toward the sensor origin.
pub fn estimate_normals(cloud: &PointCloud, k_neighbors: usize) -> Result<PointCloud, RegistrationError> {
    if k_neighbors < 3 || cloud.len() <= k_neighbors {
        return Err(RegistrationError::TooFewPoints {
            got: cloud.len(),
            k: k_neighbors,
        });
    }
    let tree = KdTree::build(&cloud.points);
    let mut normals = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        let neighbors = tree.k_nearest(p, k_neighbors);
        let mean: Vector3<f64> =
            neighbors.iter().map(|&i| cloud.points[i].coords).sum::<Vector3<f64>>() / neighbors.len() as f64;
        let mut cov = Matrix3::zeros();
        for &i in &neighbors {
            let d = cloud.points[i].coords - mean;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let mut min_idx = 0;
        for i in 1..3 {
            if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
                min_idx = i;
            }
        }
        let mut normal: Vector3<f64> = eig.eigenvectors.column(min_idx).into();
        let norm = normal.norm();
        normal = if norm > 0.0 { normal / norm } else { Vector3::z() };
        // Orient toward the sensor at the cloud-frame origin.
        if normal.dot(&(-p.coords)) < 0.0 {
            normal = -normal;
        }
        normals.push(normal);
    }
    cloud.clone().with_normals(normals)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IcpVariant {
    PointToPoint,
    PointToPlane,
}

#[derive(Clone, Debug)]
pub struct IcpParams {
    pub variant: IcpVariant,
    /// Strictly decreasing correspondence-distance schedule in meters.
    pub max_corr_dist: Vec<f64>,
    /// Iteration cap per schedule stage.
    pub max_iters: usize,
    /// Relative inlier-RMSE change below which a stage has converged.
    pub rel_tol: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            variant: IcpVariant::PointToPoint,
            max_corr_dist: vec![0.5, 0.25, 0.1],
            max_iters: 30,
            rel_tol: 1e-6,
        }
    }
}

/// Coarse-to-fine ICP. Correspondences are found per source point by mapping
/// it into the `dst` frame with the current `T⁻¹` and querying the `dst`
/// tree; the alignment step re-solves the full Procrustes problem (or the
/// linearized point-to-plane system using `src` normals). A step that would
/// raise the inlier RMSE is rejected and ends the stage, so the reported
/// RMSE never increases within a stage.
pub fn icp(
    src: &PointCloud,
    dst: &PointCloud,
    init: &Pose,
    params: &IcpParams,
) -> Result<RegistrationResult, RegistrationError> {
    if src.is_empty() || dst.is_empty() {
        return Err(RegistrationError::EmptyCloud);
    }
    if params.max_corr_dist.is_empty() {
        return Err(RegistrationError::InvalidParams("empty correspondence schedule".into()));
    }
    if params.max_corr_dist.windows(2).any(|w| w[1] >= w[0]) || params.max_corr_dist.iter().any(|&d| d <= 0.0) {
        return Err(RegistrationError::InvalidParams(
            "correspondence schedule must be positive and strictly decreasing".into(),
        ));
    }
    let use_planes = params.variant == IcpVariant::PointToPlane && src.normals.is_some();
    let tree = KdTree::build(&dst.points);

    let mut pose = *init;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut seen_any = false;

    // Monotone guard on the objective the active variant is descending:
    // point-to-point RMS, or the plane-residual RMS for point-to-plane.
    let objective = |pairs: &[(usize, usize)], pose: &Pose| -> f64 {
        if use_planes {
            plane_rms(src, dst, pairs, pose)
        } else {
            rms_error(src, dst, pairs, pose)
        }
    };

    for (stage, &dist) in params.max_corr_dist.iter().enumerate() {
        let mut stage_obj = f64::INFINITY;
        for _ in 0..params.max_iters {
            let pairs = correspondences(src, &tree, &pose, dist);
            if pairs.is_empty() {
                if stage == 0 && !seen_any {
                    return Err(RegistrationError::NoCorrespondences(dist));
                }
                break;
            }
            seen_any = true;
            let obj_before = objective(&pairs, &pose);
            if obj_before > stage_obj {
                break;
            }
            let candidate = if use_planes {
                plane_step(src, dst, &pairs, &pose)
            } else {
                procrustes_align(src, dst, &pairs).ok()
            };
            let Some(candidate) = candidate else { break };
            let obj_after = objective(&pairs, &candidate);
            if obj_after > obj_before {
                break;
            }
            pose = candidate;
            iterations += 1;
            stage_obj = obj_after;
            let change = (obj_before - obj_after).abs();
            if change <= params.rel_tol * obj_before.max(1e-300) {
                converged = true;
                break;
            }
            converged = false;
        }
    }

    let final_dist = *params.max_corr_dist.last().unwrap();
    let pairs = correspondences(src, &tree, &pose, final_dist);
    let fitness = pairs.len() as f64 / src.len() as f64;
    let inlier_rmse = if pairs.is_empty() {
        0.0
    } else {
        rms_error(src, dst, &pairs, &pose)
    };
    Ok(RegistrationResult {
        pose,
        fitness,
        inlier_rmse,
        iterations,
        converged,
    })
}

fn correspondences(src: &PointCloud, dst_tree: &KdTree, pose: &Pose, dist: f64) -> Vec<(usize, usize)> {
    let inv = pose.inverse();
    let mut pairs = Vec::new();
    for (i, p) in src.points.iter().enumerate() {
        let q = Point3::from(inv.transform_point(&p.coords));
        if let Some((j, _)) = dst_tree.nearest_within(&q, dist) {
            pairs.push((i, j));
        }
    }
    pairs
}

fn rms_error(src: &PointCloud, dst: &PointCloud, pairs: &[(usize, usize)], pose: &Pose) -> f64 {
    let sum: f64 = pairs
        .iter()
        .map(|&(i, j)| {
            (src.points[i].coords - pose.transform_point(&dst.points[j].coords)).norm_squared()
        })
        .sum();
    (sum / pairs.len() as f64).sqrt()
}

fn plane_rms(src: &PointCloud, dst: &PointCloud, pairs: &[(usize, usize)], pose: &Pose) -> f64 {
    let normals = src.normals.as_ref().expect("point-to-plane requires normals");
    let sum: f64 = pairs
        .iter()
        .map(|&(i, j)| {
            let d = src.points[i].coords - pose.transform_point(&dst.points[j].coords);
            normals[i].dot(&d).powi(2)
        })
        .sum();
    (sum / pairs.len() as f64).sqrt()
}

/// One Gauss-Newton step of the point-to-plane objective
/// `Σ (nᵢ · (srcᵢ − T·dstⱼ))²` with a left perturbation of `T`.
fn plane_step(src: &PointCloud, dst: &PointCloud, pairs: &[(usize, usize)], pose: &Pose) -> Option<Pose> {
    let normals = src.normals.as_ref()?;
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    for &(i, j) in pairs {
        let n = normals[i];
        let moved = pose.transform_point(&dst.points[j].coords);
        let r = n.dot(&(src.points[i].coords - moved));
        let cross = moved.cross(&n);
        let mut row = Vector6::zeros();
        row.fixed_rows_mut::<3>(0).copy_from(&n);
        row.fixed_rows_mut::<3>(3).copy_from(&cross);
        h += row * row.transpose();
        g += row * r;
    }
    // Tiny Tikhonov term keeps rank-deficient neighborhoods solvable.
    for d in 0..6 {
        h[(d, d)] += 1e-12;
    }
    let delta = h.cholesky()?.solve(&g);
    let dt = Vector3::new(delta[0], delta[1], delta[2]);
    let dw = Vector3::new(delta[3], delta[4], delta[5]);
    let dr = so3_exp(&dw);
    Some(Pose::from_parts_unchecked(
        dr * pose.rotation(),
        dr * pose.translation() + dt,
    ))
}
