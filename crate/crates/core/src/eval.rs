//! Trajectory and map quality metrics, and the SE3-factor ablation.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::factors::{gicp_align_with_tree, hessian_information, GicpSettings, RelativePoseFactor};
use crate::graph::MappingGraph;
use crate::kernel::RobustKernel;
use crate::par;
use crate::se3::Pose;

/// Subsegment lengths of the KITTI odometry benchmark, in meters.
pub const KITTI_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];
/// Neighborhoods smaller than this are not evaluated by [`compute_mme`].
pub const MME_MIN_NEIGHBORS: usize = 5;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    entries: Vec<(usize, Pose)>,
}

impl Trajectory {
    pub fn new(entries: Vec<(usize, Pose)>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config(format!(
                    "trajectory indices must increase strictly ({} after {})",
                    w[1].0, w[0].0
                )));
            }
        }
        if let Some((i, _)) = entries.iter().find(|(_, p)| !p.is_finite()) {
            return Err(Error::Config(format!("trajectory pose {i} is not finite")));
        }
        Ok(Trajectory { entries })
    }

    /// Frames numbered from zero.
    pub fn from_poses(poses: Vec<Pose>) -> Self {
        Trajectory {
            entries: poses.into_iter().enumerate().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, Pose)] {
        &self.entries
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|(i, _)| *i)
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> + '_ {
        self.entries.iter().map(|(_, p)| p)
    }

    /// `T * pose` for every pose.
    pub fn premultiplied(&self, t: &Pose) -> Trajectory {
        Trajectory {
            entries: self.entries.iter().map(|(i, p)| (*i, t.compose(p))).collect(),
        }
    }

    /// Cumulative path length at every frame.
    pub fn distances(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for (k, (_, p)) in self.entries.iter().enumerate() {
            if k > 0 {
                acc += (p.translation - self.entries[k - 1].1.translation).norm();
            }
            out.push(acc);
        }
        out
    }

    pub fn total_length(&self) -> f64 {
        self.distances().last().copied().unwrap_or(0.0)
    }

    fn check_matches(&self, other: &Trajectory) -> Result<()> {
        if self.len() != other.len() || self.indices().zip(other.indices()).any(|(a, b)| a != b) {
            return Err(Error::Config("trajectories must cover the same frame indices".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RteBucket {
    pub length: f64,
    /// Degrees per 100 m.
    pub rotation: f64,
    /// Meters per 100 m.
    pub translation: f64,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RteResult {
    /// Mean over all subsegments of every length, degrees per 100 m.
    pub rotation: f64,
    /// Meters per 100 m.
    pub translation: f64,
    pub segments: usize,
    /// Lengths without a single subsegment are omitted.
    pub per_length: Vec<RteBucket>,
}

impl RteResult {
    /// True when the trajectory is shorter than every requested length.
    pub fn is_empty(&self) -> bool {
        self.segments == 0
    }
}

/// Relative trajectory error over the KITTI lengths, with a start frame at
/// every frame.
pub fn compute_rte(estimate: &Trajectory, ground_truth: &Trajectory) -> Result<RteResult> {
    compute_rte_with(estimate, ground_truth, &KITTI_LENGTHS, 1)
}

/// [`compute_rte`] with custom subsegment lengths and start-frame stride.
pub fn compute_rte_with(estimate: &Trajectory, ground_truth: &Trajectory, lengths: &[f64], stride: usize) -> Result<RteResult> {
    estimate.check_matches(ground_truth)?;
    let stride = stride.max(1);
    let dist = ground_truth.distances();
    let gt: Vec<&Pose> = ground_truth.poses().collect();
    let est: Vec<&Pose> = estimate.poses().collect();
    let mut per_length = Vec::new();
    let (mut r_all, mut t_all, mut n_all) = (0.0, 0.0, 0);
    for &len in lengths {
        let (mut r_sum, mut t_sum, mut n) = (0.0, 0.0, 0);
        for first in (0..gt.len()).step_by(stride) {
            // first frame farther than `len` along the path
            let Some(last) = (first..gt.len()).find(|&i| dist[i] > dist[first] + len) else {
                continue;
            };
            let delta_gt = gt[first].between(gt[last]);
            let delta_est = est[first].between(est[last]);
            let err = delta_est.between(&delta_gt);
            r_sum += err.rotation_angle() / len;
            t_sum += err.translation.norm() / len;
            n += 1;
        }
        if n > 0 {
            per_length.push(RteBucket {
                length: len,
                rotation: (r_sum / n as f64).to_degrees() * 100.0,
                translation: t_sum / n as f64 * 100.0,
                segments: n,
            });
            r_all += r_sum;
            t_all += t_sum;
            n_all += n;
        }
    }
    let mean = |s: f64| if n_all == 0 { 0.0 } else { s / n_all as f64 * 100.0 };
    Ok(RteResult {
        rotation: mean(r_all).to_degrees(),
        translation: mean(t_all),
        segments: n_all,
        per_length,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoseErrors {
    /// Root mean square position error, meters, without alignment.
    pub ate: f64,
    /// Last-pose translation error, meters.
    pub end_translation: f64,
    /// Last-pose rotation error, degrees.
    pub end_rotation: f64,
}

/// Absolute errors in the common world frame of both trajectories.
pub fn pose_errors(estimate: &Trajectory, ground_truth: &Trajectory) -> Result<PoseErrors> {
    estimate.check_matches(ground_truth)?;
    if estimate.is_empty() {
        return Err(Error::Config("cannot evaluate an empty trajectory".into()));
    }
    let sq: f64 = estimate
        .poses()
        .zip(ground_truth.poses())
        .map(|(e, g)| (e.translation - g.translation).norm_squared())
        .sum();
    let (e, g) = (estimate.entries.last().unwrap().1, ground_truth.entries.last().unwrap().1);
    let end = g.between(&e);
    Ok(PoseErrors {
        ate: (sq / estimate.len() as f64).sqrt(),
        end_translation: (e.translation - g.translation).norm(),
        end_rotation: end.rotation_angle().to_degrees(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmeResult {
    pub mean: f64,
    pub evaluated: usize,
    /// Entropy per input point; `None` for points with too few neighbors or
    /// a degenerate neighborhood.
    #[serde(skip)]
    pub entropies: Vec<Option<f64>>,
}

/// Mean map entropy: per point, `0.5 ln((2 pi e)^3 det S)` with `S` the
/// sample covariance of the points within `radius`.
pub fn compute_mme(map: &PointCloud, radius: f64) -> Result<MmeResult> {
    if map.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = map.kdtree();
    let means: Vec<Vector3<f64>> = map.means().collect();
    let constant = 3.0 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    let entropies = par::map_range(means.len(), |i| {
        let mut neighbors = Vec::new();
        tree.within_radius(&means[i], radius, &mut neighbors);
        if neighbors.len() < MME_MIN_NEIGHBORS {
            return None;
        }
        neighbors.sort_unstable();
        let n = neighbors.len() as f64;
        let mean = neighbors.iter().map(|&k| means[k]).sum::<Vector3<f64>>() / n;
        let cov = neighbors
            .iter()
            .map(|&k| {
                let d = means[k] - mean;
                d * d.transpose()
            })
            .sum::<Matrix3<f64>>()
            / (n - 1.0);
        let det = cov.determinant();
        (det > 0.0).then(|| 0.5 * (constant + det.ln()))
    });
    let values: Vec<f64> = entropies.iter().flatten().copied().collect();
    if values.is_empty() {
        return Err(Error::NotEnoughNeighbors { radius });
    }
    Ok(MmeResult {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        evaluated: values.len(),
        entropies,
    })
}

/// Outcome of re-estimating one matching cost factor by scan matching.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationPair {
    pub target: usize,
    pub source: usize,
    pub converged: bool,
    pub inliers: usize,
    pub mean_error: f64,
}

/// Replaces every matching cost factor with an SE3 factor measured by GICP
/// seeded at the current estimate, with Hessian information and a Huber
/// kernel. Existing SE3 factors are kept. `clouds[k]` is the point cloud of
/// variable `k`.
pub fn ablation_swap(
    graph: &MappingGraph,
    clouds: &[Arc<PointCloud>],
    huber_delta: f64,
    gicp: &GicpSettings,
) -> Result<(MappingGraph, Vec<AblationPair>)> {
    if clouds.len() != graph.len() {
        return Err(Error::Config(format!(
            "ablation needs one cloud per variable ({} for {})",
            clouds.len(),
            graph.len()
        )));
    }
    let trees = par::map(clouds, |c| c.kdtree());
    let factors = graph.matching_factors();
    let results = par::map(factors, |f| {
        let (i, j) = (f.target, f.source);
        let initial = graph.pose(i).between(graph.pose(j));
        gicp_align_with_tree(&clouds[j], &clouds[i], &trees[i], &initial, gicp)
    });
    let mut relative: Vec<RelativePoseFactor> = graph.relative_factors().to_vec();
    let mut pairs = Vec::with_capacity(factors.len());
    for (f, r) in factors.iter().zip(results) {
        pairs.push(AblationPair {
            target: f.target,
            source: f.source,
            converged: r.converged,
            inliers: r.inliers,
            mean_error: r.mean_error(),
        });
        relative.push(RelativePoseFactor::new(
            f.target,
            f.source,
            r.pose,
            hessian_information(&r.hessian),
            RobustKernel::huber(huber_delta),
        ));
    }
    Ok((graph.with_factors(Vec::new(), relative)?, pairs))
}
