use nalgebra::{Matrix6, Vector6};

use super::LinearizedFactor;
use crate::kernel::RobustKernel;
use crate::se3::{se3_right_jacobian_inverse, Pose, Twist};

/// Constant loop information, rotation block first.
pub const DEFAULT_LOOP_INFORMATION: [f64; 6] = [100.0, 100.0, 100.0, 25.0, 25.0, 25.0];

/// SE3 relative pose constraint `log(T_meas^-1 T_i^-1 T_j)` with a robust kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativePoseFactor {
    pub i: usize,
    pub j: usize,
    pub measurement: Pose,
    pub information: Matrix6<f64>,
    pub kernel: RobustKernel,
}

impl RelativePoseFactor {
    pub fn new(i: usize, j: usize, measurement: Pose, information: Matrix6<f64>, kernel: RobustKernel) -> Self {
        RelativePoseFactor {
            i,
            j,
            measurement,
            information,
            kernel,
        }
    }

    pub fn loop_information() -> Matrix6<f64> {
        Matrix6::from_diagonal(&Vector6::from_row_slice(&DEFAULT_LOOP_INFORMATION))
    }

    pub fn residual(&self, pose_i: &Pose, pose_j: &Pose) -> Twist {
        self.measurement.inverse().compose(&pose_i.between(pose_j)).log()
    }

    /// Argument handed to the kernel: the plain twist norm squared for the
    /// shifted Tukey kernel, the Mahalanobis norm squared otherwise.
    fn kernel_argument(&self, r: &Twist) -> f64 {
        match self.kernel {
            RobustKernel::ShiftedTukey { .. } => r.0.norm_squared(),
            _ => r.0.dot(&(self.information * r.0)),
        }
    }

    pub fn weight(&self, pose_i: &Pose, pose_j: &Pose) -> f64 {
        let r = self.residual(pose_i, pose_j);
        self.kernel.weight(self.kernel_argument(&r))
    }

    /// Kernel-weighted error `w * r^T Lambda r`.
    pub fn error(&self, pose_i: &Pose, pose_j: &Pose) -> f64 {
        let r = self.residual(pose_i, pose_j);
        let w = self.kernel.weight(self.kernel_argument(&r));
        if w == 0.0 {
            return 0.0;
        }
        w * r.0.dot(&(self.information * r.0))
    }

    /// Gauss-Newton blocks scaled by the kernel weight at the current residual.
    pub fn linearize(&self, pose_i: &Pose, pose_j: &Pose) -> LinearizedFactor {
        let r = self.residual(pose_i, pose_j);
        let w = self.kernel.weight(self.kernel_argument(&r));
        if w == 0.0 {
            return LinearizedFactor::zero(self.i, self.j);
        }
        let jr_inv = se3_right_jacobian_inverse(&r);
        let j_j = jr_inv;
        let j_i = -jr_inv * pose_j.between(pose_i).adjoint();
        let lam = &self.information;
        let lam_r = lam * r.0;
        LinearizedFactor {
            i: self.i,
            j: self.j,
            h_ii: j_i.transpose() * lam * j_i,
            h_ij: j_i.transpose() * lam * j_j,
            h_jj: j_j.transpose() * lam * j_j,
            b_i: j_i.transpose() * lam_r,
            b_j: j_j.transpose() * lam_r,
            error: r.0.dot(&lam_r),
            inliers: 1,
        }
        .scaled(w)
    }
}
