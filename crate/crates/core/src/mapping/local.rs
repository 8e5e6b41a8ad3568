use std::sync::Arc;

use super::{EmitReason, Event, Recorder, Scope, Submap, SubmapFrame};
use crate::cloud::{estimate_covariances, transform_cloud, voxel_downsample, PointCloud};
use crate::config::LocalConfig;
use crate::error::Result;
use crate::factors::MatchingCostFactor;
use crate::graph::{optimize, LmSettings, MappingGraph};
use crate::se3::Pose;
use crate::voxelmap::{overlap_rate, GaussianVoxelMap};

#[derive(Debug, Clone)]
pub struct LocalFrame {
    pub index: usize,
    pub cloud: Arc<PointCloud>,
    pub map: Arc<GaussianVoxelMap>,
    pub odometry: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SkippedFrame {
    index: usize,
    keyframe: usize,
    /// Odometry motion from the keyframe.
    relative: Pose,
}

/// Keyframes of the submap under construction with a fully connected
/// matching cost graph. Variable `k` of the graph is frame `k`.
#[derive(Debug, Clone, Default)]
pub struct LocalWindow {
    frames: Vec<LocalFrame>,
    graph: MappingGraph,
    skipped: Vec<SkippedFrame>,
}

impl LocalWindow {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[LocalFrame] {
        &self.frames
    }

    pub fn graph(&self) -> &MappingGraph {
        &self.graph
    }

    pub fn pose(&self, k: usize) -> &Pose {
        self.graph.pose(k)
    }

    /// Overlap of the last keyframe against the first one's voxel map.
    pub fn first_last_overlap(&self) -> Option<f64> {
        let n = self.frames.len();
        (n >= 2).then(|| {
            let rel = self.pose(0).between(self.pose(n - 1));
            overlap_rate(&self.frames[n - 1].cloud, &rel, &self.frames[0].map)
        })
    }
}

#[derive(Debug)]
pub enum LocalDecision {
    Skipped { overlap: f64 },
    Inserted,
    SubmapEmitted(Submap),
}

/// Turns a stream of preprocessed frames into submaps.
#[derive(Debug, Clone)]
pub struct LocalMapper {
    config: LocalConfig,
    global_resolution: f64,
    covariance_neighbors: usize,
    lm: LmSettings,
    window: LocalWindow,
    /// Optimized pose and odometry of the last keyframe of the previous submap.
    reference: Option<(Pose, Pose)>,
    next_id: usize,
}

impl LocalMapper {
    pub fn new(config: LocalConfig, global_resolution: f64, covariance_neighbors: usize, lm: LmSettings) -> Self {
        LocalMapper {
            config,
            global_resolution,
            covariance_neighbors,
            lm,
            window: LocalWindow::default(),
            reference: None,
            next_id: 0,
        }
    }

    pub fn window(&self) -> &LocalWindow {
        &self.window
    }

    /// Initial guess for a frame with odometry `odometry`, chained from the
    /// most recent keyframe estimate.
    pub fn initial_guess(&self, odometry: &Pose) -> Pose {
        let anchor = match self.window.frames.last() {
            Some(last) => Some((*self.window.pose(self.window.len() - 1), last.odometry)),
            None => self.reference,
        };
        match anchor {
            Some((pose, odom)) => pose.compose(&odom.between(odometry)),
            None => *odometry,
        }
    }

    /// `cloud` must carry covariances.
    pub fn insert(&mut self, index: usize, cloud: PointCloud, odometry: Pose, rec: &mut Recorder) -> Result<LocalDecision> {
        cloud.validate()?;
        let guess = self.initial_guess(&odometry);
        let n = self.window.len();
        let mut last_overlap = None;
        if let Some(last) = self.window.frames.last() {
            let rel = self.window.pose(n - 1).between(&guess);
            let overlap = overlap_rate(&cloud, &rel, &last.map);
            if overlap > self.config.skip_overlap {
                self.window.skipped.push(SkippedFrame {
                    index,
                    keyframe: n - 1,
                    relative: last.odometry.between(&odometry),
                });
                rec.events.push(Event::FrameSkipped { frame: index, overlap });
                return Ok(LocalDecision::Skipped { overlap });
            }
            last_overlap = Some(overlap);
        }

        let cloud = Arc::new(cloud);
        let map = Arc::new(GaussianVoxelMap::build(&cloud, self.config.resolution)?);
        let var = self.window.graph.add_variable(guess, n == 0);
        for (k, frame) in self.window.frames.iter().enumerate() {
            self.window
                .graph
                .add_matching_factor(MatchingCostFactor::new(k, var, cloud.clone(), frame.map.clone()))?;
        }
        self.window.frames.push(LocalFrame {
            index,
            cloud,
            map,
            odometry,
        });
        rec.events.push(Event::FrameInserted {
            frame: index,
            overlap: last_overlap,
            window: self.window.len(),
        });

        let reason = if self.window.len() >= self.config.max_frames {
            Some(EmitReason::MaxFrames)
        } else {
            match self.window.first_last_overlap() {
                Some(o) if o < self.config.min_overlap => Some(EmitReason::Overlap),
                _ => None,
            }
        };
        match reason {
            Some(reason) => Ok(LocalDecision::SubmapEmitted(self.emit(reason, rec)?)),
            None => Ok(LocalDecision::Inserted),
        }
    }

    /// Emits the remaining window, if any, as a final submap.
    pub fn flush(&mut self, rec: &mut Recorder) -> Result<Option<Submap>> {
        if self.window.is_empty() {
            return Ok(None);
        }
        self.emit(EmitReason::EndOfSequence, rec).map(Some)
    }

    fn emit(&mut self, reason: EmitReason, rec: &mut Recorder) -> Result<Submap> {
        let id = self.next_id;
        let mut window = std::mem::take(&mut self.window);
        if window.len() >= 2 {
            let report = optimize(&mut window.graph, &self.lm)?;
            rec.optimized(Scope::Local, id, &report);
        }
        let origin = *window.pose(0);
        let mut frames: Vec<SubmapFrame> = (0..window.len())
            .map(|k| SubmapFrame {
                index: window.frames[k].index,
                pose: origin.between(window.pose(k)),
                keyframe: true,
            })
            .collect();
        frames.extend(window.skipped.iter().map(|s| SubmapFrame {
            index: s.index,
            pose: origin.between(window.pose(s.keyframe)).compose(&s.relative),
            keyframe: false,
        }));
        frames.sort_by_key(|f| f.index);

        let mut merged = PointCloud::default();
        for (k, frame) in window.frames.iter().enumerate() {
            merged.extend(&transform_cloud(&frame.cloud, &origin.between(window.pose(k))));
        }
        let thinned = voxel_downsample(&merged, self.config.submap_downsample);
        let cloud = if thinned.len() > self.covariance_neighbors {
            estimate_covariances(&thinned, self.covariance_neighbors)?
        } else {
            // too small to re-estimate; keep the per-frame covariances
            merged
        };
        let map = GaussianVoxelMap::build(&cloud, self.global_resolution)?;

        let last = window.len() - 1;
        self.reference = Some((*window.pose(last), window.frames[last].odometry));
        self.next_id += 1;
        rec.events.push(Event::SubmapEmitted {
            submap: id,
            first_frame: frames[0].index,
            last_frame: frames[frames.len() - 1].index,
            keyframes: window.len(),
            points: cloud.len(),
            reason,
        });
        Ok(Submap {
            id,
            origin,
            frames,
            cloud: Arc::new(cloud),
            map: Arc::new(map),
        })
    }
}
