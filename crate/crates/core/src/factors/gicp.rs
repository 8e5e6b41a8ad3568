//! Conventional GICP scan matching with nearest-neighbor association.

use nalgebra::{Matrix6, SMatrix, SymmetricEigen, Vector6};
use serde::{Deserialize, Serialize};

use super::matching::point_residual;
use crate::cloud::PointCloud;
use crate::kdtree::KdTree;
use crate::par;
use crate::se3::{hat, Pose, Twist};

const MIN_INLIERS: usize = 6;
const EIGEN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GicpSettings {
    pub max_iterations: usize,
    pub max_correspondence_distance: f64,
    pub step_tolerance: f64,
}

impl Default for GicpSettings {
    fn default() -> Self {
        GicpSettings {
            max_iterations: 64,
            max_correspondence_distance: 2.0,
            step_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GicpResult {
    /// Transform taking source points into the target frame.
    pub pose: Pose,
    pub cost: f64,
    pub hessian: Matrix6<f64>,
    pub inliers: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl GicpResult {
    /// Mean per-correspondence error; infinite without correspondences.
    pub fn mean_error(&self) -> f64 {
        if self.inliers == 0 {
            f64::INFINITY
        } else {
            self.cost / self.inliers as f64
        }
    }
}

#[derive(Clone)]
struct Normal {
    h: Matrix6<f64>,
    g: Vector6<f64>,
    cost: f64,
    inliers: usize,
}

fn linearize(source: &PointCloud, target: &PointCloud, tree: &KdTree, pose: &Pose, max_dist: f64) -> Normal {
    let r = pose.rotation;
    par::sum_by(
        &source.points,
        true,
        Normal {
            h: Matrix6::zeros(),
            g: Vector6::zeros(),
            cost: 0.0,
            inliers: 0,
        },
        |acc, p| {
            let q = pose.transform_point(&p.mean);
            let Some((idx, _)) = tree.nearest_within(&q, max_dist) else {
                return;
            };
            let t = &target.points[idx];
            let Some((e, omega)) = point_residual(pose, &p.mean, &p.cov, &t.mean, &t.cov) else {
                return;
            };
            let mut j = SMatrix::<f64, 3, 6>::zeros();
            j.fixed_view_mut::<3, 3>(0, 0).copy_from(&(r * hat(&p.mean)));
            j.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-r));
            let omega_j = omega * j;
            acc.h += j.transpose() * omega_j;
            acc.g += j.transpose() * (omega * e);
            acc.cost += e.dot(&(omega * e));
            acc.inliers += 1;
        },
        |mut a, b| {
            a.h += b.h;
            a.g += b.g;
            a.cost += b.cost;
            a.inliers += b.inliers;
            a
        },
    )
}

pub fn gicp_align(source: &PointCloud, target: &PointCloud, initial: &Pose, settings: &GicpSettings) -> GicpResult {
    let tree = target.kdtree();
    gicp_align_with_tree(source, target, &tree, initial, settings)
}

/// Gauss-Newton GICP, re-associating correspondences every iteration.
/// `tree` must index the means of `target`.
pub fn gicp_align_with_tree(
    source: &PointCloud,
    target: &PointCloud,
    tree: &KdTree,
    initial: &Pose,
    settings: &GicpSettings,
) -> GicpResult {
    let max_dist = settings.max_correspondence_distance;
    let mut pose = *initial;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..settings.max_iterations {
        iterations += 1;
        let n = linearize(source, target, tree, &pose, max_dist);
        if n.inliers < MIN_INLIERS {
            break;
        }
        let mut h = n.h;
        for k in 0..6 {
            h[(k, k)] += EIGEN_FLOOR * h[(k, k)].max(1.0);
        }
        let Some(chol) = h.cholesky() else {
            break;
        };
        let delta = chol.solve(&(-n.g));
        pose = pose.compose(&Pose::exp(&Twist(delta)));
        if delta.norm() < settings.step_tolerance {
            converged = true;
            break;
        }
    }
    let last = linearize(source, target, tree, &pose, max_dist);
    GicpResult {
        pose,
        cost: last.cost,
        hessian: last.h,
        inliers: last.inliers,
        iterations,
        converged: converged && last.inliers >= MIN_INLIERS,
    }
}

fn floored_eigen(h: &Matrix6<f64>) -> SymmetricEigen<f64, nalgebra::U6> {
    let sym = (h + h.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    for v in eig.eigenvalues.iter_mut() {
        *v = v.max(EIGEN_FLOOR);
    }
    eig
}

/// Information matrix from a scan-matching Hessian, with eigenvalues floored.
pub fn hessian_information(h: &Matrix6<f64>) -> Matrix6<f64> {
    floored_eigen(h).recompose()
}

/// Covariance from a scan-matching Hessian; near-singular directions get a
/// large but finite variance.
pub fn hessian_covariance(h: &Matrix6<f64>) -> Matrix6<f64> {
    let eig = floored_eigen(h);
    let inv = Matrix6::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    let c = eig.eigenvectors * inv * eig.eigenvectors.transpose();
    (c + c.transpose()) * 0.5
}
