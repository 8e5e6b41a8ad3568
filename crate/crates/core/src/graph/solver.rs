//! Block-sparse normal equations and a block Cholesky solver.

use std::collections::BTreeMap;

use nalgebra::{Matrix6, Vector6};

use crate::error::{Error, Result};
use crate::factors::LinearizedFactor;

/// Symmetric 6x6-block system `H x = rhs` over the free variables.
///
/// `rhs` is the negated sum of factor `b` vectors, so the solution is the
/// Gauss-Newton step.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    pub diag: Vec<Matrix6<f64>>,
    /// `upper[r][c] = H_rc` for `c > r`.
    pub upper: Vec<BTreeMap<usize, Matrix6<f64>>>,
    pub rhs: Vec<Vector6<f64>>,
    /// Graph variable index of each block.
    pub variables: Vec<usize>,
}

impl BlockSystem {
    pub fn new(variables: Vec<usize>) -> Self {
        let n = variables.len();
        BlockSystem {
            diag: vec![Matrix6::zeros(); n],
            upper: vec![BTreeMap::new(); n],
            rhs: vec![Vector6::zeros(); n],
            variables,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Accumulates `block` at position `(r, c)`.
    pub fn add_block(&mut self, r: usize, c: usize, block: &Matrix6<f64>) {
        use std::cmp::Ordering;
        match r.cmp(&c) {
            Ordering::Equal => self.diag[r] += block,
            Ordering::Less => *self.upper[r].entry(c).or_insert_with(Matrix6::zeros) += block,
            Ordering::Greater => {
                *self.upper[c].entry(r).or_insert_with(Matrix6::zeros) += block.transpose()
            }
        }
    }

    /// Marquardt damping: `H_kk += lambda * max(diag(H)_kk, floor)`.
    pub fn damped(&self, lambda: f64, floor: f64) -> BlockSystem {
        let mut out = self.clone();
        for d in out.diag.iter_mut() {
            for k in 0..6 {
                d[(k, k)] += lambda * d[(k, k)].max(floor);
            }
        }
        out
    }

    pub fn to_dense(&self) -> (nalgebra::DMatrix<f64>, nalgebra::DVector<f64>) {
        let n = self.len() * 6;
        let mut h = nalgebra::DMatrix::zeros(n, n);
        let mut b = nalgebra::DVector::zeros(n);
        for r in 0..self.len() {
            h.view_mut((6 * r, 6 * r), (6, 6)).copy_from(&self.diag[r]);
            b.rows_mut(6 * r, 6).copy_from(&self.rhs[r]);
            for (&c, blk) in &self.upper[r] {
                h.view_mut((6 * r, 6 * c), (6, 6)).copy_from(blk);
                h.view_mut((6 * c, 6 * r), (6, 6)).copy_from(&blk.transpose());
            }
        }
        (h, b)
    }

    /// `H x` for a block vector `x`.
    pub fn multiply(&self, x: &[Vector6<f64>]) -> Vec<Vector6<f64>> {
        let mut y: Vec<Vector6<f64>> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for r in 0..self.len() {
            for (&c, blk) in &self.upper[r] {
                y[r] += blk * x[c];
                y[c] += blk.transpose() * x[r];
            }
        }
        y
    }
}

/// Scatters linearized factors into a block system over the non-fixed
/// variables. Fixed variables are removed with their rows and columns.
pub fn assemble_normal_equations(factors: &[LinearizedFactor], fixed: &[bool]) -> BlockSystem {
    let mut block_of = vec![usize::MAX; fixed.len()];
    let mut variables = Vec::new();
    for (v, &f) in fixed.iter().enumerate() {
        if !f {
            block_of[v] = variables.len();
            variables.push(v);
        }
    }
    let mut sys = BlockSystem::new(variables);
    for f in factors {
        let bi = block_of[f.i];
        let bj = block_of[f.j];
        if bi != usize::MAX {
            sys.add_block(bi, bi, &f.h_ii);
            sys.rhs[bi] -= f.b_i;
        }
        if bj != usize::MAX {
            sys.add_block(bj, bj, &f.h_jj);
            sys.rhs[bj] -= f.b_j;
        }
        if bi != usize::MAX && bj != usize::MAX {
            sys.add_block(bi, bj, &f.h_ij);
        }
    }
    sys
}

/// Sparse block Cholesky `H = L L^T`, eliminating variables in reverse
/// insertion order.
pub fn solve_block_system(sys: &BlockSystem) -> Result<Vec<Vector6<f64>>> {
    let n = sys.len();
    // position in the elimination order of block k
    let pos = |k: usize| n - 1 - k;
    let block = |p: usize| n - 1 - p;

    let mut diag: Vec<Matrix6<f64>> = (0..n).map(|p| sys.diag[block(p)]).collect();
    // lower[p][q] = L block (q, p) for q > p
    let mut lower: Vec<BTreeMap<usize, Matrix6<f64>>> = vec![BTreeMap::new(); n];
    for r in 0..n {
        for (&c, blk) in &sys.upper[r] {
            let (pr, pc) = (pos(r), pos(c));
            if pr > pc {
                lower[pc].insert(pr, *blk);
            } else {
                lower[pr].insert(pc, blk.transpose());
            }
        }
    }

    let mut l_inv: Vec<Matrix6<f64>> = Vec::with_capacity(n);
    for p in 0..n {
        let chol = diag[p]
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { variable: sys.variables[block(p)] })?;
        let inv = chol
            .l()
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite { variable: sys.variables[block(p)] })?;
        let column: Vec<(usize, Matrix6<f64>)> = lower[p]
            .iter()
            .map(|(&q, a)| (q, a * inv.transpose()))
            .collect();
        for (x, (q, lq)) in column.iter().enumerate() {
            diag[*q] -= lq * lq.transpose();
            for (s, ls) in &column[..x] {
                // q > s
                *lower[*s].entry(*q).or_insert_with(Matrix6::zeros) -= lq * ls.transpose();
            }
        }
        lower[p] = column.into_iter().collect();
        l_inv.push(inv);
    }

    let mut z: Vec<Vector6<f64>> = (0..n).map(|p| sys.rhs[block(p)]).collect();
    let mut y = vec![Vector6::zeros(); n];
    for p in 0..n {
        y[p] = l_inv[p] * z[p];
        for (&q, lq) in &lower[p] {
            z[q] -= lq * y[p];
        }
    }
    let mut x = vec![Vector6::zeros(); n];
    for p in (0..n).rev() {
        let mut acc = y[p];
        for (&q, lq) in &lower[p] {
            acc -= lq.transpose() * x[q];
        }
        x[p] = l_inv[p].transpose() * acc;
    }
    Ok((0..n).map(|k| x[pos(k)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_factor(rng: &mut ChaCha8Rng, i: usize, j: usize) -> LinearizedFactor {
        let m = DMatrix::from_fn(12, 14, |_, _| rng.random_range(-1.0..1.0));
        let h = &m * m.transpose();
        let mut f = LinearizedFactor::zero(i, j);
        f.h_ii = h.fixed_view::<6, 6>(0, 0).into_owned();
        f.h_ij = h.fixed_view::<6, 6>(0, 6).into_owned();
        f.h_jj = h.fixed_view::<6, 6>(6, 6).into_owned();
        f.b_i = Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0));
        f.b_j = Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0));
        f
    }

    fn dense_assembly(factors: &[LinearizedFactor], fixed: &[bool]) -> (DMatrix<f64>, DVector<f64>) {
        let n = fixed.len();
        let mut h = DMatrix::zeros(6 * n, 6 * n);
        let mut b = DVector::zeros(6 * n);
        for f in factors {
            let stacked = f.stacked_hessian();
            let sb = f.stacked_b();
            let idx = [f.i, f.j];
            for (a, &va) in idx.iter().enumerate() {
                for r in 0..6 {
                    b[6 * va + r] -= sb[6 * a + r];
                    for (c, &vc) in idx.iter().enumerate() {
                        for s in 0..6 {
                            h[(6 * va + r, 6 * vc + s)] += stacked[(6 * a + r, 6 * c + s)];
                        }
                    }
                }
            }
        }
        let keep: Vec<usize> = (0..6 * n).filter(|k| !fixed[k / 6]).collect();
        let hk = DMatrix::from_fn(keep.len(), keep.len(), |r, c| h[(keep[r], keep[c])]);
        let bk = DVector::from_fn(keep.len(), |r, _| b[keep[r]]);
        (hk, bk)
    }

    fn stack(x: &[Vector6<f64>]) -> DVector<f64> {
        DVector::from_iterator(x.len() * 6, x.iter().flat_map(|v| v.iter().copied()))
    }

    #[test]
    fn single_factor_with_fixed_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_factor(&mut rng, 0, 1);
        let sys = assemble_normal_equations(std::slice::from_ref(&f), &[true, false]);
        assert_eq!(sys.len(), 1);
        assert_eq!(sys.diag[0], f.h_jj);
        assert_eq!(sys.rhs[0], -f.b_j);
        assert!(sys.upper[0].is_empty());
    }

    #[test]
    fn disconnected_chains_are_block_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let factors = vec![
            random_factor(&mut rng, 0, 1),
            random_factor(&mut rng, 1, 2),
            random_factor(&mut rng, 3, 4),
            random_factor(&mut rng, 4, 5),
        ];
        let sys = assemble_normal_equations(&factors, &[false; 6]);
        for r in 0..3 {
            assert!(sys.upper[r].keys().all(|&c| c < 3));
        }
        for r in 3..6 {
            assert!(sys.upper[r].keys().all(|&c| c >= 3));
        }
    }

    #[test]
    fn assembly_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let n = rng.random_range(2..=20usize);
            let mut factors = Vec::new();
            for _ in 0..rng.random_range(1..3 * n) {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n);
                if i == j {
                    j = (i + 1) % n;
                }
                factors.push(random_factor(&mut rng, i, j));
            }
            let fixed: Vec<bool> = (0..n).map(|k| k == 0 || (trial % 3 == 0 && k == n - 1)).collect();
            let sys = assemble_normal_equations(&factors, &fixed);
            let (h, b) = sys.to_dense();
            let (ho, bo) = dense_assembly(&factors, &fixed);
            assert!((&h - &ho).amax() < 1e-12);
            assert!((&b - &bo).amax() < 1e-12);
        }
    }

    #[test]
    fn identity_blocks() {
        let mut sys = BlockSystem::new(vec![0, 1, 2]);
        for k in 0..3 {
            sys.diag[k] = Matrix6::identity();
            sys.rhs[k] = Vector6::from_element(k as f64 + 1.0);
        }
        let x = solve_block_system(&sys).unwrap();
        assert_eq!(x, sys.rhs);
    }

    #[test]
    fn matches_dense_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let n = rng.random_range(1..=20usize);
            let mut factors = Vec::new();
            for i in 0..n.saturating_sub(1) {
                factors.push(random_factor(&mut rng, i, i + 1));
            }
            for _ in 0..n {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                if i != j {
                    factors.push(random_factor(&mut rng, i, j));
                }
            }
            let mut sys = assemble_normal_equations(&factors, &vec![false; n]);
            for d in sys.diag.iter_mut() {
                *d += Matrix6::identity() * 0.5;
            }
            for r in sys.rhs.iter_mut() {
                *r = Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0));
            }
            let x = stack(&solve_block_system(&sys).unwrap());
            let (h, b) = sys.to_dense();
            let oracle = h.clone().cholesky().unwrap().solve(&b);
            assert!((&x - &oracle).amax() < 1e-9);
            assert!((&h * &x - &b).norm() / b.norm() < 1e-8);
        }
    }

    #[test]
    fn unanchored_gauge_freedom_fails() {
        // relative-only information between two blocks: rank deficient
        let mut f = LinearizedFactor::zero(0, 1);
        f.h_ii = Matrix6::identity();
        f.h_jj = Matrix6::identity();
        f.h_ij = -Matrix6::identity();
        let sys = assemble_normal_equations(&[f], &[false, false]);
        assert!(matches!(solve_block_system(&sys), Err(Error::NotPositiveDefinite { .. })));
    }
}
