//! Factor graph over pose variables and its Levenberg-Marquardt optimizer.

mod lm;
mod solver;

pub use lm::{optimize, LmSettings, OptimizerReport, Termination, TraceRecord};
pub use solver::{assemble_normal_equations, solve_block_system, BlockSystem};

use crate::error::{Error, Result};
use crate::factors::{LinearizedFactor, MatchingCostFactor, RelativePoseFactor};
use crate::par;
use crate::se3::{Pose, Twist};

/// Re-orthonormalize a pose after this many manifold updates.
pub const ORTHONORMALIZE_EVERY: u32 = 50;

#[derive(Debug, Clone, Default)]
pub struct MappingGraph {
    poses: Vec<Pose>,
    fixed: Vec<bool>,
    updates: Vec<u32>,
    matching: Vec<MatchingCostFactor>,
    relative: Vec<RelativePoseFactor>,
}

impl MappingGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, pose: Pose, fixed: bool) -> usize {
        self.poses.push(pose);
        self.fixed.push(fixed);
        self.updates.push(0);
        self.poses.len() - 1
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn pose(&self, i: usize) -> &Pose {
        &self.poses[i]
    }

    pub fn set_pose(&mut self, i: usize, pose: Pose) {
        self.poses[i] = pose;
    }

    pub fn set_fixed(&mut self, i: usize, fixed: bool) {
        self.fixed[i] = fixed;
    }

    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    pub fn matching_factors(&self) -> &[MatchingCostFactor] {
        &self.matching
    }

    pub fn relative_factors(&self) -> &[RelativePoseFactor] {
        &self.relative
    }

    pub fn factor_count(&self) -> usize {
        self.matching.len() + self.relative.len()
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        for v in [i, j] {
            if v >= self.poses.len() {
                return Err(Error::UnknownVariable {
                    index: v,
                    len: self.poses.len(),
                });
            }
        }
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        Ok(())
    }

    pub fn add_matching_factor(&mut self, factor: MatchingCostFactor) -> Result<()> {
        self.check_pair(factor.target, factor.source)?;
        if factor.source_cloud.is_empty() || factor.target_map.is_empty() {
            return Err(Error::EmptyCloud);
        }
        self.matching.push(factor);
        Ok(())
    }

    pub fn add_relative_factor(&mut self, factor: RelativePoseFactor) -> Result<()> {
        self.check_pair(factor.i, factor.j)?;
        self.relative.push(factor);
        Ok(())
    }

    /// Replaces all factors, keeping the variables.
    pub fn with_factors(&self, matching: Vec<MatchingCostFactor>, relative: Vec<RelativePoseFactor>) -> Result<MappingGraph> {
        let mut g = MappingGraph {
            poses: self.poses.clone(),
            fixed: self.fixed.clone(),
            updates: self.updates.clone(),
            matching: Vec::new(),
            relative: Vec::new(),
        };
        for f in matching {
            g.add_matching_factor(f)?;
        }
        for f in relative {
            g.add_relative_factor(f)?;
        }
        Ok(g)
    }

    fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.matching
            .iter()
            .map(|f| (f.target, f.source))
            .chain(self.relative.iter().map(|f| (f.i, f.j)))
    }

    /// Fixed mask with the lowest-index variable of every connected component
    /// that has no fixed variable added as a gauge anchor.
    pub fn gauge_fixed_mask(&self) -> Vec<bool> {
        let n = self.poses.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (a, b) in self.edges() {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent[hi] = lo;
            }
        }
        let mut anchored = vec![false; n];
        for v in 0..n {
            if self.fixed[v] {
                let r = find(&mut parent, v);
                anchored[r] = true;
            }
        }
        let mut mask = self.fixed.clone();
        for v in 0..n {
            let r = find(&mut parent, v);
            if !anchored[r] {
                // roots are the smallest index of their component
                mask[r] = true;
                anchored[r] = true;
            }
        }
        mask
    }

    pub fn linearize(&self, poses: &[Pose], ordered: bool) -> Vec<LinearizedFactor> {
        let mut out = par::map(&self.matching, |f| f.linearize(&poses[f.target], &poses[f.source], ordered));
        out.extend(self.relative.iter().map(|f| f.linearize(&poses[f.i], &poses[f.j])));
        out
    }

    /// Total error `sum e^M + sum rho(e^L)` at the given poses.
    pub fn error_at(&self, poses: &[Pose], ordered: bool) -> f64 {
        let matching = par::map(&self.matching, |f| f.error(&poses[f.target], &poses[f.source], ordered).0);
        matching.iter().sum::<f64>()
            + self
                .relative
                .iter()
                .map(|f| f.error(&poses[f.i], &poses[f.j]))
                .sum::<f64>()
    }

    pub fn error(&self, ordered: bool) -> f64 {
        self.error_at(&self.poses, ordered)
    }

    /// Poses after applying `T <- T * exp(delta)` to the listed variables.
    pub(crate) fn retracted(&self, variables: &[usize], deltas: &[nalgebra::Vector6<f64>]) -> (Vec<Pose>, Vec<u32>) {
        let mut poses = self.poses.clone();
        let mut updates = self.updates.clone();
        for (&v, d) in variables.iter().zip(deltas) {
            let mut p = poses[v].compose(&Pose::exp(&Twist(*d)));
            updates[v] += 1;
            if updates[v].is_multiple_of(ORTHONORMALIZE_EVERY) {
                p = p.orthonormalized();
            }
            poses[v] = p;
        }
        (poses, updates)
    }

    pub(crate) fn commit(&mut self, poses: Vec<Pose>, updates: Vec<u32>) {
        self.poses = poses;
        self.updates = updates;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::RobustKernel;

    #[test]
    fn factor_validation() {
        let mut g = MappingGraph::new();
        g.add_variable(Pose::identity(), true);
        let f = RelativePoseFactor::new(0, 1, Pose::identity(), RelativePoseFactor::loop_information(), RobustKernel::None);
        assert!(matches!(g.add_relative_factor(f.clone()), Err(Error::UnknownVariable { .. })));
        g.add_variable(Pose::identity(), false);
        assert!(g.add_relative_factor(f).is_ok());
        let self_loop = RelativePoseFactor::new(1, 1, Pose::identity(), RelativePoseFactor::loop_information(), RobustKernel::None);
        assert!(matches!(g.add_relative_factor(self_loop), Err(Error::SelfLoop(1))));
    }

    #[test]
    fn gauge_anchors_each_component() {
        let mut g = MappingGraph::new();
        for _ in 0..6 {
            g.add_variable(Pose::identity(), false);
        }
        let info = RelativePoseFactor::loop_information();
        for (i, j) in [(1, 2), (2, 3), (4, 5)] {
            g.add_relative_factor(RelativePoseFactor::new(i, j, Pose::identity(), info, RobustKernel::None)).unwrap();
        }
        g.set_fixed(3, true);
        assert_eq!(g.gauge_fixed_mask(), vec![true, false, false, true, true, false]);
    }
}
