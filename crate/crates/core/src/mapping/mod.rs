//! Local (frame to submap) and global (submap to map) mapping.

mod global;
mod local;

pub use global::{
    proximity_loop_candidates, CandidateSource, EdgeKind, EdgeRecord, GlobalMapper, LoopCandidate, LoopOutcome,
};
pub use local::{LocalDecision, LocalFrame, LocalMapper, LocalWindow};

use std::sync::Arc;

use serde::Serialize;

use crate::cloud::PointCloud;
use crate::graph::{OptimizerReport, TraceRecord};
use crate::se3::Pose;
use crate::voxelmap::GaussianVoxelMap;

/// Frame whose pose is frozen relative to its submap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubmapFrame {
    /// Index of the frame in the input sequence.
    pub index: usize,
    /// Pose in the submap frame.
    pub pose: Pose,
    /// Skipped frames only follow the keyframe they were compared against.
    pub keyframe: bool,
}

#[derive(Debug, Clone)]
pub struct Submap {
    pub id: usize,
    /// Estimate of the submap pose when it was created.
    pub origin: Pose,
    pub frames: Vec<SubmapFrame>,
    /// Merged keyframe points in the submap frame, with covariances.
    pub cloud: Arc<PointCloud>,
    pub map: Arc<GaussianVoxelMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitReason {
    Overlap,
    MaxFrames,
    EndOfSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Local,
    Global,
    Final,
    Ablation,
}

/// Line-delimited event log entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    FrameSkipped {
        frame: usize,
        overlap: f64,
    },
    FrameInserted {
        frame: usize,
        overlap: Option<f64>,
        window: usize,
    },
    SubmapEmitted {
        submap: usize,
        first_frame: usize,
        last_frame: usize,
        keyframes: usize,
        points: usize,
        reason: EmitReason,
    },
    FactorCreated {
        target: usize,
        source: usize,
        overlap: f64,
    },
    LoopAccepted {
        target: usize,
        source: usize,
        origin: CandidateSource,
        overlap: f64,
        mean_error: f64,
    },
    LoopRejected {
        target: usize,
        source: usize,
        origin: CandidateSource,
        reason: String,
    },
    Optimized {
        scope: Scope,
        id: usize,
        iterations: usize,
        initial_error: f64,
        final_error: f64,
        termination: crate::graph::Termination,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceLine {
    pub scope: Scope,
    /// Submap id for local optimizations, the number of submaps otherwise.
    pub id: usize,
    #[serde(flatten)]
    pub record: TraceRecord,
}

/// Collected events and optimizer traces.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    pub events: Vec<Event>,
    pub traces: Vec<TraceLine>,
}

impl Recorder {
    pub fn optimized(&mut self, scope: Scope, id: usize, report: &OptimizerReport) {
        self.events.push(Event::Optimized {
            scope,
            id,
            iterations: report.iterations,
            initial_error: report.initial_error,
            final_error: report.final_error,
            termination: report.termination,
        });
        self.traces
            .extend(report.trace.iter().map(|&record| TraceLine { scope, id, record }));
    }
}
