//! Graph factors and their linearizations.
//!
//! A [`LinearizedFactor`] stores `H = sum J^T Omega J` and `b = sum J^T Omega e`
//! for the stacked perturbation `(delta_i, delta_j)`, so that near the
//! linearization point the factor error behaves like
//! `error + 2 b^T delta + delta^T H delta` and the gradient is `2 b`.

mod gicp;
mod matching;
mod relative;

pub use gicp::{gicp_align, gicp_align_with_tree, hessian_covariance, hessian_information, GicpResult, GicpSettings};
pub use matching::MatchingCostFactor;
pub use relative::{RelativePoseFactor, DEFAULT_LOOP_INFORMATION};

use nalgebra::{Matrix6, SMatrix, SVector, Vector6};

pub type Matrix12 = SMatrix<f64, 12, 12>;
pub type Vector12 = SVector<f64, 12>;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedFactor {
    pub i: usize,
    pub j: usize,
    pub h_ii: Matrix6<f64>,
    pub h_ij: Matrix6<f64>,
    pub h_jj: Matrix6<f64>,
    pub b_i: Vector6<f64>,
    pub b_j: Vector6<f64>,
    pub error: f64,
    pub inliers: usize,
}

impl LinearizedFactor {
    pub fn zero(i: usize, j: usize) -> Self {
        LinearizedFactor {
            i,
            j,
            h_ii: Matrix6::zeros(),
            h_ij: Matrix6::zeros(),
            h_jj: Matrix6::zeros(),
            b_i: Vector6::zeros(),
            b_j: Vector6::zeros(),
            error: 0.0,
            inliers: 0,
        }
    }

    pub fn stacked_hessian(&self) -> Matrix12 {
        let mut h = Matrix12::zeros();
        h.fixed_view_mut::<6, 6>(0, 0).copy_from(&self.h_ii);
        h.fixed_view_mut::<6, 6>(0, 6).copy_from(&self.h_ij);
        h.fixed_view_mut::<6, 6>(6, 0).copy_from(&self.h_ij.transpose());
        h.fixed_view_mut::<6, 6>(6, 6).copy_from(&self.h_jj);
        h
    }

    pub fn stacked_b(&self) -> Vector12 {
        let mut b = Vector12::zeros();
        b.fixed_rows_mut::<6>(0).copy_from(&self.b_i);
        b.fixed_rows_mut::<6>(6).copy_from(&self.b_j);
        b
    }

    /// Gradient of the factor error with respect to `(delta_i, delta_j)`.
    pub fn gradient(&self) -> Vector12 {
        self.stacked_b() * 2.0
    }

    /// Second-order model of the error for a stacked perturbation.
    pub fn model_error(&self, delta: &Vector12) -> f64 {
        self.error + 2.0 * self.stacked_b().dot(delta) + (delta.transpose() * self.stacked_hessian() * delta)[(0, 0)]
    }

    pub(crate) fn scaled(mut self, w: f64) -> Self {
        self.h_ii *= w;
        self.h_ij *= w;
        self.h_jj *= w;
        self.b_i *= w;
        self.b_j *= w;
        self.error *= w;
        self
    }
}
