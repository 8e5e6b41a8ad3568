use std::sync::Arc;

use nalgebra::{Matrix3, Matrix6, SMatrix, Vector3, Vector6};

use super::LinearizedFactor;
use crate::cloud::PointCloud;
use crate::par;
use crate::se3::{hat, Pose};
use crate::voxelmap::GaussianVoxelMap;

type Matrix3x6 = SMatrix<f64, 3, 6>;

/// Voxelized GICP matching cost between the points of `source` and the
/// voxel map of `target`.
///
/// Points of the source frame are moved into the target frame by
/// `T_target^-1 * T_source` and associated with the voxel they land in.
/// The factor's `i` is the target variable and `j` the source variable.
#[derive(Debug, Clone)]
pub struct MatchingCostFactor {
    pub target: usize,
    pub source: usize,
    pub source_cloud: Arc<PointCloud>,
    pub target_map: Arc<GaussianVoxelMap>,
}

#[derive(Clone)]
struct Accum {
    h_ii: Matrix6<f64>,
    h_ij: Matrix6<f64>,
    h_jj: Matrix6<f64>,
    b_i: Vector6<f64>,
    b_j: Vector6<f64>,
    error: f64,
    inliers: usize,
    singular: usize,
}

impl Accum {
    fn zero() -> Self {
        Accum {
            h_ii: Matrix6::zeros(),
            h_ij: Matrix6::zeros(),
            h_jj: Matrix6::zeros(),
            b_i: Vector6::zeros(),
            b_j: Vector6::zeros(),
            error: 0.0,
            inliers: 0,
            singular: 0,
        }
    }

    fn merge(mut self, o: Accum) -> Accum {
        self.h_ii += o.h_ii;
        self.h_ij += o.h_ij;
        self.h_jj += o.h_jj;
        self.b_i += o.b_i;
        self.b_j += o.b_j;
        self.error += o.error;
        self.inliers += o.inliers;
        self.singular += o.singular;
        self
    }
}

#[derive(Clone, Copy)]
struct ErrAccum {
    error: f64,
    inliers: usize,
}

/// Residual `mu' - T mu` and the inverse combined covariance for one point.
#[inline]
pub(crate) fn point_residual(
    rel: &Pose,
    mean: &Vector3<f64>,
    cov: &Matrix3<f64>,
    target_mean: &Vector3<f64>,
    target_cov: &Matrix3<f64>,
) -> Option<(Vector3<f64>, Matrix3<f64>)> {
    let r = &rel.rotation;
    let combined = target_cov + r * cov * r.transpose();
    let omega = combined.try_inverse()?;
    if !omega.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some((target_mean - rel.transform_point(mean), omega))
}

impl MatchingCostFactor {
    pub fn new(target: usize, source: usize, source_cloud: Arc<PointCloud>, target_map: Arc<GaussianVoxelMap>) -> Self {
        MatchingCostFactor {
            target,
            source,
            source_cloud,
            target_map,
        }
    }

    /// Relative pose mapping source points into the target frame.
    pub fn relative_pose(target_pose: &Pose, source_pose: &Pose) -> Pose {
        target_pose.between(source_pose)
    }

    /// Re-associates every source point at the current estimate and builds
    /// the Hessian blocks. Points without a populated voxel contribute nothing.
    pub fn linearize(&self, target_pose: &Pose, source_pose: &Pose, ordered: bool) -> LinearizedFactor {
        let rel = Self::relative_pose(target_pose, source_pose);
        let r = rel.rotation;
        let map = &*self.target_map;
        let acc = par::sum_by(
            &self.source_cloud.points,
            ordered,
            Accum::zero(),
            |acc, p| {
                let q = rel.transform_point(&p.mean);
                let Some(voxel) = map.lookup(&q) else {
                    return;
                };
                let Some((e, omega)) = point_residual(&rel, &p.mean, &p.cov, &voxel.mean, &voxel.cov) else {
                    acc.singular += 1;
                    return;
                };
                // de/d(delta_target) = [-[q]x, I], de/d(delta_source) = [R [mu]x, -R]
                let mut a = Matrix3x6::zeros();
                a.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-hat(&q)));
                a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
                let mut b = Matrix3x6::zeros();
                b.fixed_view_mut::<3, 3>(0, 0).copy_from(&(r * hat(&p.mean)));
                b.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-r));
                let omega_a = omega * a;
                let omega_b = omega * b;
                let omega_e = omega * e;
                acc.h_ii += a.transpose() * omega_a;
                acc.h_ij += a.transpose() * omega_b;
                acc.h_jj += b.transpose() * omega_b;
                acc.b_i += a.transpose() * omega_e;
                acc.b_j += b.transpose() * omega_e;
                acc.error += e.dot(&omega_e);
                acc.inliers += 1;
            },
            Accum::merge,
        );
        LinearizedFactor {
            i: self.target,
            j: self.source,
            h_ii: acc.h_ii,
            h_ij: acc.h_ij,
            h_jj: acc.h_jj,
            b_i: acc.b_i,
            b_j: acc.b_j,
            error: acc.error,
            inliers: acc.inliers,
        }
    }

    /// Total matching cost and inlier count at the given poses.
    pub fn error(&self, target_pose: &Pose, source_pose: &Pose, ordered: bool) -> (f64, usize) {
        let rel = Self::relative_pose(target_pose, source_pose);
        let map = &*self.target_map;
        let acc = par::sum_by(
            &self.source_cloud.points,
            ordered,
            ErrAccum { error: 0.0, inliers: 0 },
            |acc, p| {
                let q = rel.transform_point(&p.mean);
                if let Some(voxel) = map.lookup(&q) {
                    if let Some((e, omega)) = point_residual(&rel, &p.mean, &p.cov, &voxel.mean, &voxel.cov) {
                        acc.error += e.dot(&(omega * e));
                        acc.inliers += 1;
                    }
                }
            },
            |a, b| ErrAccum {
                error: a.error + b.error,
                inliers: a.inliers + b.inliers,
            },
        );
        (acc.error, acc.inliers)
    }

    /// Fraction of source points landing in a populated target voxel.
    pub fn overlap(&self, target_pose: &Pose, source_pose: &Pose) -> f64 {
        crate::voxelmap::overlap_rate(&self.source_cloud, &Self::relative_pose(target_pose, source_pose), &self.target_map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{estimate_covariances, transform_cloud, GaussianPoint};
    use crate::se3::Twist;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scene(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
        let pts: Vec<Vector3<f64>> = (0..n)
            .map(|i| match i % 3 {
                0 => Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.0),
                1 => Vector3::new(5.0, rng.random_range(-5.0..5.0), rng.random_range(0.0..3.0)),
                _ => Vector3::new(rng.random_range(-5.0..5.0), -5.0, rng.random_range(0.0..3.0)),
            })
            .collect();
        estimate_covariances(&PointCloud::from_means(pts), 10).unwrap()
    }

    #[test]
    fn gicp_error_examples() {
        let half = Matrix3::identity() * 0.5;
        let (e, omega) = point_residual(
            &Pose::identity(),
            &Vector3::zeros(),
            &half,
            &Vector3::new(1.0, 0.0, 0.0),
            &half,
        )
        .unwrap();
        assert!((omega - Matrix3::identity()).amax() < 1e-15);
        assert_eq!(e.dot(&(omega * e)), 1.0);

        // zero residual regardless of covariances
        let t = Pose::exp(&Twist::from_slice(&[0.1, 0.2, 0.3, 1.0, 2.0, 3.0]));
        let mu = Vector3::new(0.3, -1.0, 2.0);
        let c = Matrix3::new(2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5);
        let (e, _) = point_residual(&t, &mu, &c, &t.transform_point(&mu), &c).unwrap();
        assert!(e.norm() < 1e-15);

        // isotropic covariances: error depends only on the residual norm
        let iso = Matrix3::identity() * 0.25;
        let target = Vector3::new(3.0, 1.0, 0.0);
        let err = |pose: &Pose| {
            let (e, omega) = point_residual(pose, &mu, &iso, &target, &iso).unwrap();
            (e.dot(&(omega * e)), e.norm_squared() / 0.5)
        };
        for yaw in [0.0, std::f64::consts::FRAC_PI_2] {
            let (a, b) = err(&Pose::from_yaw(yaw, Vector3::new(0.5, 0.0, 0.0)));
            assert!((a - b).abs() < 1e-12);
        }
        assert!(point_residual(&Pose::identity(), &mu, &Matrix3::zeros(), &target, &Matrix3::zeros()).is_none());
    }

    #[test]
    fn perfect_alignment_is_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // One point per voxel makes the voxel mean coincide with the point.
        let pts: Vec<GaussianPoint> = (0..200)
            .map(|i| {
                let m = Vector3::new((i % 10) as f64 + 0.5, (i / 10) as f64 + 0.5, rng.random_range(0.1..0.9));
                GaussianPoint::new(m, Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 1e-3)))
            })
            .collect();
        let cloud = Arc::new(PointCloud::new(pts));
        let map = Arc::new(GaussianVoxelMap::build(&cloud, 1.0).unwrap());
        let f = MatchingCostFactor::new(0, 1, cloud, map);
        let t = Pose::exp(&Twist::from_slice(&[0.2, -0.1, 0.4, 3.0, 1.0, -2.0]));
        let lin = f.linearize(&t, &t, true);
        assert_eq!(lin.inliers, 200);
        assert!(lin.error.abs() < 1e-20);
        assert!(lin.b_i.amax() < 1e-9 && lin.b_j.amax() < 1e-9);
        let h = lin.stacked_hessian();
        assert!((h - h.transpose()).amax() < 1e-9);
        let eig = SymmetricEigen::new(h.clone_owned());
        assert!(eig.eigenvalues.min() > -1e-6);
    }

    #[test]
    fn disjoint_clouds_give_zero_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cloud = scene(&mut rng, 300);
        let far = transform_cloud(&cloud, &Pose::from_translation(Vector3::new(500.0, 0.0, 0.0)));
        let map = Arc::new(GaussianVoxelMap::build(&far, 1.0).unwrap());
        let f = MatchingCostFactor::new(0, 1, Arc::new(cloud), map);
        let lin = f.linearize(&Pose::identity(), &Pose::identity(), true);
        assert_eq!(lin, LinearizedFactor::zero(0, 1));
    }

    #[test]
    fn ordered_linearization_is_bit_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cloud = Arc::new(scene(&mut rng, 3000));
        let map = Arc::new(GaussianVoxelMap::build(&cloud, 0.5).unwrap());
        let f = MatchingCostFactor::new(0, 1, cloud, map);
        let ti = Pose::identity();
        let tj = Pose::exp(&Twist::from_slice(&[0.01, 0.0, 0.02, 0.1, -0.05, 0.0]));
        let a = f.linearize(&ti, &tj, true);
        let b = f.linearize(&ti, &tj, true);
        assert_eq!(a, b);
        let (e, n) = f.error(&ti, &tj, true);
        assert_eq!(e.to_bits(), a.error.to_bits());
        assert_eq!(n, a.inliers);
    }
}
