use std::collections::BTreeSet;

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use super::{Event, Recorder, Scope, Submap};
use crate::cloud::{transform_cloud, voxel_downsample, PointCloud};
use crate::config::{GlobalConfig, LoopConfig};
use crate::error::{Error, Result};
use crate::factors::{gicp_align, MatchingCostFactor, RelativePoseFactor};
use crate::graph::{optimize, LmSettings, MappingGraph, OptimizerReport};
use crate::par;
use crate::se3::Pose;
use crate::voxelmap::overlap_rate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    File,
    Proximity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopCandidate {
    pub target: usize,
    pub source: usize,
    /// Initial guess of `T_target^-1 T_source`; the current estimate when absent.
    pub initial: Option<Pose>,
    pub origin: CandidateSource,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum LoopOutcome {
    Accepted { factor: RelativePoseFactor, overlap: f64, mean_error: f64 },
    Rejected { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Matching,
    Loop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeRecord {
    pub kind: EdgeKind,
    pub target: usize,
    pub source: usize,
    /// Overlap when the factor was created (after alignment for loops).
    pub overlap: f64,
}

/// Pairs of submaps closer than `radius` whose ids differ by at least
/// `min_gap`, with the current relative estimate as the initial guess.
pub fn proximity_loop_candidates(poses: &[Pose], radius: f64, min_gap: usize) -> Vec<LoopCandidate> {
    let mut out = Vec::new();
    for j in 0..poses.len() {
        for i in 0..j {
            if j - i >= min_gap && (poses[i].translation - poses[j].translation).norm() <= radius {
                out.push(LoopCandidate {
                    target: i,
                    source: j,
                    initial: None,
                    origin: CandidateSource::Proximity,
                });
            }
        }
    }
    out
}

/// Submap graph with dense matching cost factors and explicit loops.
#[derive(Debug, Clone)]
pub struct GlobalMapper {
    config: GlobalConfig,
    loops: LoopConfig,
    lm: LmSettings,
    submaps: Vec<Submap>,
    graph: MappingGraph,
    edges: Vec<EdgeRecord>,
    tried: BTreeSet<(usize, usize)>,
}

impl GlobalMapper {
    pub fn new(config: GlobalConfig, loops: LoopConfig, lm: LmSettings) -> Self {
        GlobalMapper {
            config,
            loops,
            lm,
            submaps: Vec::new(),
            graph: MappingGraph::new(),
            edges: Vec::new(),
            tried: BTreeSet::new(),
        }
    }

    pub fn submaps(&self) -> &[Submap] {
        &self.submaps
    }

    pub fn graph(&self) -> &MappingGraph {
        &self.graph
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn poses(&self) -> &[Pose] {
        self.graph.poses()
    }

    /// Adds a submap, chaining its initial pose from the previous submap,
    /// and creates a factor to every past submap it overlaps. Returns the
    /// created edges.
    pub fn insert(&mut self, submap: Submap, rec: &mut Recorder) -> Result<Vec<EdgeRecord>> {
        let initial = match self.submaps.last() {
            Some(prev) => self
                .graph
                .pose(prev.id)
                .compose(&prev.origin.between(&submap.origin)),
            None => submap.origin,
        };
        if submap.id != self.submaps.len() {
            return Err(Error::UnknownSubmap(submap.id));
        }
        let var = self.graph.add_variable(initial, self.submaps.is_empty());
        let poses = self.graph.poses();
        let overlaps = par::map(&self.submaps, |past| {
            overlap_rate(&submap.cloud, &poses[past.id].between(&initial), &past.map)
        });
        let mut created = Vec::new();
        for (past, overlap) in self.submaps.iter().zip(overlaps) {
            if overlap > self.config.min_overlap {
                self.graph.add_matching_factor(MatchingCostFactor::new(
                    past.id,
                    var,
                    submap.cloud.clone(),
                    past.map.clone(),
                ))?;
                let edge = EdgeRecord {
                    kind: EdgeKind::Matching,
                    target: past.id,
                    source: var,
                    overlap,
                };
                rec.events.push(Event::FactorCreated {
                    target: past.id,
                    source: var,
                    overlap,
                });
                self.edges.push(edge);
                created.push(edge);
            }
        }
        self.submaps.push(submap);
        Ok(created)
    }

    /// Refines a loop candidate with GICP and gates it. Accepted loops are
    /// added to the graph. Each pair is processed at most once.
    pub fn process_loop_candidate(&mut self, candidate: &LoopCandidate, rec: &mut Recorder) -> Result<LoopOutcome> {
        let n = self.submaps.len();
        for id in [candidate.target, candidate.source] {
            if id >= n {
                return Err(Error::UnknownSubmap(id));
            }
        }
        if candidate.target == candidate.source {
            return Err(Error::SelfLoop(candidate.target));
        }
        // the older submap is always the target
        let (i, j, guess) = if candidate.target < candidate.source {
            (candidate.target, candidate.source, candidate.initial)
        } else {
            (candidate.source, candidate.target, candidate.initial.map(|p| p.inverse()))
        };
        let reject = |rec: &mut Recorder, reason: String| {
            rec.events.push(Event::LoopRejected {
                target: i,
                source: j,
                origin: candidate.origin,
                reason: reason.clone(),
            });
            Ok(LoopOutcome::Rejected { reason })
        };
        if !self.tried.insert((i, j)) {
            return reject(rec, "pair already processed".into());
        }
        let initial = guess.unwrap_or_else(|| self.graph.pose(i).between(self.graph.pose(j)));
        let target = &self.submaps[i];
        let source = &self.submaps[j];
        let result = gicp_align(&source.cloud, &target.cloud, &initial, &self.loops.gicp);
        let overlap = overlap_rate(&source.cloud, &result.pose, &target.map);
        let mean_error = result.mean_error();
        if !result.converged {
            return reject(rec, format!("not converged after {} iterations", result.iterations));
        }
        if !(mean_error <= self.loops.max_mean_error) {
            return reject(
                rec,
                format!("mean residual {mean_error:.4} above {}", self.loops.max_mean_error),
            );
        }
        if overlap < self.loops.min_overlap {
            return reject(rec, format!("overlap {overlap:.4} below {}", self.loops.min_overlap));
        }
        let information = Matrix6::from_diagonal(&Vector6::from_row_slice(&self.loops.information));
        let factor = RelativePoseFactor::new(i, j, result.pose, information, self.loops.kernel);
        self.graph.add_relative_factor(factor.clone())?;
        self.edges.push(EdgeRecord {
            kind: EdgeKind::Loop,
            target: i,
            source: j,
            overlap,
        });
        rec.events.push(Event::LoopAccepted {
            target: i,
            source: j,
            origin: candidate.origin,
            overlap,
            mean_error,
        });
        Ok(LoopOutcome::Accepted {
            factor,
            overlap,
            mean_error,
        })
    }

    /// Proximity candidates involving the newest submap.
    pub fn proximity_candidates_for_latest(&self) -> Vec<LoopCandidate> {
        let Some(latest) = self.submaps.len().checked_sub(1) else {
            return Vec::new();
        };
        proximity_loop_candidates(self.graph.poses(), self.loops.proximity_radius, self.loops.min_id_gap)
            .into_iter()
            .filter(|c| c.source == latest)
            .collect()
    }

    pub fn optimize(&mut self, scope: Scope, rec: &mut Recorder) -> Result<OptimizerReport> {
        let report = optimize(&mut self.graph, &self.lm)?;
        rec.optimized(scope, self.submaps.len(), &report);
        Ok(report)
    }

    /// Pose of every input frame, sorted by frame index.
    pub fn trajectory(&self) -> Vec<(usize, Pose)> {
        self.trajectory_with(self.graph.poses())
    }

    /// Frame poses for arbitrary submap poses.
    pub fn trajectory_with(&self, submap_poses: &[Pose]) -> Vec<(usize, Pose)> {
        let mut out: Vec<(usize, Pose)> = self
            .submaps
            .iter()
            .flat_map(|s| {
                let base = submap_poses[s.id];
                s.frames.iter().map(move |f| (f.index, base.compose(&f.pose)))
            })
            .collect();
        out.sort_by_key(|(i, _)| *i);
        out
    }

    /// Submap clouds moved to the world frame by the current estimate, then
    /// optionally thinned on a voxel grid.
    pub fn concatenate_map(&self, downsample: f64) -> PointCloud {
        let mut merged = PointCloud::default();
        for s in &self.submaps {
            merged.extend(&transform_cloud(&s.cloud, self.graph.pose(s.id)));
        }
        if downsample > 0.0 {
            voxel_downsample(&merged, downsample)
        } else {
            merged
        }
    }

    /// Replaces the graph (same variables), e.g. for the ablation.
    pub fn set_graph(&mut self, graph: MappingGraph) {
        assert_eq!(graph.len(), self.graph.len(), "graph must keep the submap variables");
        self.graph = graph;
    }
}
