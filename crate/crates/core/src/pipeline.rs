//! End-to-end mapping: preprocess, local mapping, global mapping with loop
//! candidates, final optimization, evaluation and export.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Vector3;
use serde::Serialize;

use crate::clock::Clock;
use crate::cloud::{estimate_covariances, transform_cloud, voxel_downsample, PointCloud};
use crate::config::{OdometrySource, PipelineConfig, PreprocessConfig};
use crate::error::{Error, Result};
use crate::eval::{ablation_swap, compute_mme, compute_rte_with, pose_errors, PoseErrors, RteResult, Trajectory};
use crate::factors::gicp_align_with_tree;
use crate::graph::optimize;
use crate::io;
use crate::mapping::{
    EdgeKind, Event, GlobalMapper, LocalDecision, LocalMapper, LoopCandidate, LoopOutcome, Recorder, Scope, Submap,
};
use crate::se3::Pose;
use crate::synthetic::SyntheticSequence;

#[derive(Debug, Clone)]
pub enum ScanSource {
    Memory(Vec<PointCloud>),
    Files(Vec<PathBuf>),
}

impl ScanSource {
    pub fn len(&self) -> usize {
        match self {
            ScanSource::Memory(v) => v.len(),
            ScanSource::Files(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load(&self, k: usize) -> Result<PointCloud> {
        match self {
            ScanSource::Memory(v) => Ok(v[k].clone()),
            ScanSource::Files(v) => io::load_kitti_scan(&v[k]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub scans: ScanSource,
    /// Initial guesses; required unless odometry comes from scan matching.
    pub odometry: Option<Vec<Pose>>,
    pub ground_truth: Option<Vec<Pose>>,
    pub loop_candidates: Vec<LoopCandidate>,
}

impl PipelineInputs {
    pub fn synthetic(seq: SyntheticSequence) -> Self {
        PipelineInputs {
            scans: ScanSource::Memory(seq.scans),
            odometry: Some(seq.odometry),
            ground_truth: Some(seq.ground_truth),
            loop_candidates: Vec::new(),
        }
    }

    /// Applies `T` on the left of every world-frame pose.
    pub fn premultiplied(&self, t: &Pose) -> Self {
        let map = |v: &Option<Vec<Pose>>| v.as_ref().map(|v| v.iter().map(|p| t.compose(p)).collect());
        PipelineInputs {
            scans: self.scans.clone(),
            odometry: map(&self.odometry),
            ground_truth: map(&self.ground_truth),
            loop_candidates: self.loop_candidates.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MmePair {
    pub before: f64,
    pub after: f64,
}

/// Entropy of one local map built around a center frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalMme {
    pub center: usize,
    pub frames: usize,
    pub points: usize,
    pub before: Option<f64>,
    pub after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accuracy {
    pub odometry: PoseErrors,
    pub estimate: PoseErrors,
    pub rte_odometry: RteResult,
    pub rte_estimate: RteResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationSummary {
    pub final_error: f64,
    pub pairs: usize,
    pub unconverged_pairs: usize,
    pub estimate: Option<PoseErrors>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub frames: usize,
    pub keyframes: usize,
    pub skipped_frames: usize,
    pub submaps: usize,
    pub matching_factors: usize,
    pub loop_factors: usize,
    pub loops_accepted: usize,
    pub loops_rejected: usize,
    pub final_error: f64,
    pub map_points: usize,
    /// Concatenated map entropy at odometry poses and at the estimate.
    pub mme: Option<MmePair>,
    pub accuracy: Option<Accuracy>,
    pub ablation: Option<AblationSummary>,
}

/// Wall-clock figures, kept apart from the reproducible outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub seconds: f64,
    pub mapping_seconds: f64,
    pub frames_per_second: f64,
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub mapper: GlobalMapper,
    pub trajectory: Trajectory,
    /// Initial guesses actually used, one per frame.
    pub odometry: Vec<Pose>,
    pub recorder: Recorder,
    pub metrics: Metrics,
    pub local_mme: Vec<LocalMme>,
    /// Concatenated map at the estimate with per-point entropy, when evaluated.
    pub map: PointCloud,
    pub entropies: Option<Vec<Option<f64>>>,
    /// Submap poses after the ablation re-optimization.
    pub ablation_poses: Option<Vec<Pose>>,
    pub timing: Timing,
}

/// Range filter, downsampling and covariance estimation.
pub fn preprocess(raw: &PointCloud, config: &PreprocessConfig) -> Result<PointCloud> {
    let keep: Vec<usize> = (0..raw.len())
        .filter(|&i| {
            let r = raw.points[i].mean.norm();
            r >= config.min_range && r <= config.max_range
        })
        .collect();
    let filtered = PointCloud {
        points: keep.iter().map(|&i| raw.points[i]).collect(),
        intensity: raw.intensity.as_ref().map(|v| keep.iter().map(|&i| v[i]).collect()),
    };
    let thinned = voxel_downsample(&filtered, config.downsample);
    estimate_covariances(&thinned, config.covariance_neighbors)
}

/// Validates inputs against the configuration before any processing.
pub fn check_inputs(config: &PipelineConfig, inputs: &PipelineInputs) -> Result<()> {
    config.validate()?;
    if inputs.scans.is_empty() {
        return Err(Error::Config("no scans given".into()));
    }
    let n = inputs.scans.len();
    match (&inputs.odometry, config.preprocess.odometry) {
        (None, OdometrySource::File) => {
            return Err(Error::Config(
                "odometry source is \"file\" but no odometry file was given".into(),
            ))
        }
        (Some(o), _) if o.len() != n => {
            return Err(Error::Config(format!("{} odometry poses for {n} scans", o.len())));
        }
        _ => {}
    }
    if let Some(gt) = &inputs.ground_truth {
        if gt.len() != n {
            return Err(Error::Config(format!("{} ground truth poses for {n} scans", gt.len())));
        }
    }
    Ok(())
}

struct Odometry {
    source: OdometrySource,
    given: Option<Vec<Pose>>,
    previous: Option<(Arc<PointCloud>, crate::kdtree::KdTree, Pose)>,
    velocity: Pose,
}

impl Odometry {
    fn next(&mut self, k: usize, cloud: &Arc<PointCloud>, config: &PipelineConfig) -> Pose {
        if let (OdometrySource::File, Some(given)) = (self.source, &self.given) {
            return given[k];
        }
        let pose = match &self.previous {
            None => self.given.as_ref().map_or(Pose::identity(), |g| g[0]),
            Some((prev, tree, prev_pose)) => {
                let r = gicp_align_with_tree(cloud, prev, tree, &self.velocity, &config.loops.gicp);
                self.velocity = r.pose;
                prev_pose.compose(&r.pose)
            }
        };
        self.previous = Some((cloud.clone(), cloud.kdtree(), pose));
        pose
    }
}

struct State<'a> {
    config: &'a PipelineConfig,
    global: GlobalMapper,
    rec: Recorder,
    file_loops: Vec<LoopCandidate>,
}

impl State<'_> {
    fn add_submap(&mut self, submap: Submap) -> Result<()> {
        let id = submap.id;
        let stage = format!("submap {id}");
        self.global.insert(submap, &mut self.rec).map_err(|e| e.at(&stage))?;
        if self.config.global.optimize_every_submap && id > 0 {
            self.global.optimize(Scope::Global, &mut self.rec).map_err(|e| e.at(&stage))?;
        }
        if !self.config.loops.enabled {
            return Ok(());
        }
        let mut candidates: Vec<LoopCandidate> = self
            .file_loops
            .iter()
            .filter(|c| c.target.max(c.source) == id)
            .copied()
            .collect();
        if self.config.loops.proximity {
            candidates.extend(self.global.proximity_candidates_for_latest());
        }
        let mut accepted = false;
        for c in &candidates {
            let outcome = self.global.process_loop_candidate(c, &mut self.rec).map_err(|e| e.at(&stage))?;
            accepted |= matches!(outcome, LoopOutcome::Accepted { .. });
        }
        if accepted && self.config.global.optimize_every_submap {
            self.global.optimize(Scope::Global, &mut self.rec).map_err(|e| e.at(&stage))?;
        }
        Ok(())
    }
}

/// Runs the whole mapping pipeline on in-memory or file inputs.
pub fn run_pipeline(config: &PipelineConfig, inputs: &PipelineInputs) -> Result<PipelineOutput> {
    check_inputs(config, inputs)?;
    let clock = Clock::start();
    let lm = config.lm_settings();
    let mut local = LocalMapper::new(
        config.local.clone(),
        config.global.resolution,
        config.preprocess.covariance_neighbors,
        lm,
    );
    let mut state = State {
        config,
        global: GlobalMapper::new(config.global.clone(), config.loops.clone(), lm),
        rec: Recorder::default(),
        file_loops: inputs.loop_candidates.clone(),
    };
    let mut odometry = Odometry {
        source: config.preprocess.odometry,
        given: inputs.odometry.clone(),
        previous: None,
        velocity: Pose::identity(),
    };
    let mut used_odometry = Vec::with_capacity(inputs.scans.len());
    let mut frame_means: Vec<Vec<Vector3<f64>>> = Vec::new();
    let keep_frames = config.evaluation.mme_every > 0;

    for k in 0..inputs.scans.len() {
        let stage = format!("frame {k}");
        let raw = inputs.scans.load(k).map_err(|e| e.at(&stage))?;
        let cloud = Arc::new(preprocess(&raw, &config.preprocess).map_err(|e| e.at(&stage))?);
        let odom = odometry.next(k, &cloud, config);
        used_odometry.push(odom);
        if keep_frames {
            frame_means.push(cloud.means().collect());
        }
        let cloud = Arc::try_unwrap(cloud).unwrap_or_else(|c| (*c).clone());
        if let LocalDecision::SubmapEmitted(submap) =
            local.insert(k, cloud, odom, &mut state.rec).map_err(|e| e.at(&stage))?
        {
            state.add_submap(submap)?;
        }
    }
    if let Some(submap) = local.flush(&mut state.rec).map_err(|e| e.at("end of sequence"))? {
        state.add_submap(submap)?;
    }
    let n_submaps = state.global.submaps().len();
    for c in &state.file_loops {
        if c.target.max(c.source) >= n_submaps {
            state.rec.events.push(Event::LoopRejected {
                target: c.target,
                source: c.source,
                origin: c.origin,
                reason: format!("only {n_submaps} submaps were created"),
            });
        }
    }
    let report = state.global.optimize(Scope::Final, &mut state.rec).map_err(|e| e.at("final optimization"))?;
    let mapping_seconds = clock.seconds();

    let State { global, mut rec, .. } = state;
    let trajectory = Trajectory::new(global.trajectory())?;
    let odometry_traj = Trajectory::from_poses(used_odometry.clone());

    let accuracy = match &inputs.ground_truth {
        Some(gt) => {
            let gt = Trajectory::from_poses(gt.clone());
            let lengths = &config.evaluation.rte_lengths;
            Some(Accuracy {
                odometry: pose_errors(&odometry_traj, &gt)?,
                estimate: pose_errors(&trajectory, &gt)?,
                rte_odometry: compute_rte_with(&odometry_traj, &gt, lengths, 1)?,
                rte_estimate: compute_rte_with(&trajectory, &gt, lengths, 1)?,
            })
        }
        None => None,
    };

    // submap poses implied by odometry alone, for the before/after comparison
    let odometry_submap_poses: Vec<Pose> = global
        .submaps()
        .iter()
        .map(|s| used_odometry[s.frames[0].index].compose(&s.frames[0].pose.inverse()))
        .collect();
    let map = global.concatenate_map(0.0);
    let ev = &config.evaluation;
    let (mme, entropies) = {
        let before_map = voxel_downsample(&concatenate(&global, &odometry_submap_poses), ev.mme_downsample);
        let after_map = voxel_downsample(&map, ev.mme_downsample);
        match (compute_mme(&before_map, ev.mme_radius), compute_mme(&after_map, ev.mme_radius)) {
            (Ok(b), Ok(a)) => (
                Some(MmePair {
                    before: b.mean,
                    after: a.mean,
                }),
                Some((after_map, a.entropies)),
            ),
            _ => (None, None),
        }
    };
    let local_mme = if keep_frames {
        local_entropy(&frame_means, &used_odometry, &trajectory, config)
    } else {
        Vec::new()
    };

    let mut ablation_poses = None;
    let ablation = if ev.ablation {
        let clouds: Vec<Arc<PointCloud>> = global.submaps().iter().map(|s| s.cloud.clone()).collect();
        let (mut swapped, pairs) =
            ablation_swap(global.graph(), &clouds, ev.huber_delta, &config.loops.gicp).map_err(|e| e.at("ablation"))?;
        let report = optimize(&mut swapped, &lm).map_err(|e| e.at("ablation"))?;
        rec.optimized(Scope::Ablation, n_submaps, &report);
        let traj = Trajectory::new(global.trajectory_with(swapped.poses()))?;
        let estimate = match &inputs.ground_truth {
            Some(gt) => Some(pose_errors(&traj, &Trajectory::from_poses(gt.clone()))?),
            None => None,
        };
        ablation_poses = Some(swapped.poses().to_vec());
        Some(AblationSummary {
            final_error: report.final_error,
            pairs: pairs.len(),
            unconverged_pairs: pairs.iter().filter(|p| !p.converged).count(),
            estimate,
        })
    } else {
        None
    };

    let keyframes: usize = global.submaps().iter().map(|s| s.frames.iter().filter(|f| f.keyframe).count()).sum();
    let count_events = |f: fn(&Event) -> bool| rec.events.iter().filter(|e| f(e)).count();
    let metrics = Metrics {
        frames: inputs.scans.len(),
        keyframes,
        skipped_frames: inputs.scans.len() - keyframes,
        submaps: n_submaps,
        matching_factors: global.graph().matching_factors().len(),
        loop_factors: global.edges().iter().filter(|e| e.kind == EdgeKind::Loop).count(),
        loops_accepted: count_events(|e| matches!(e, Event::LoopAccepted { .. })),
        loops_rejected: count_events(|e| matches!(e, Event::LoopRejected { .. })),
        final_error: report.final_error,
        map_points: map.len(),
        mme,
        accuracy,
        ablation,
    };
    let seconds = clock.seconds();
    let (map, entropies) = match entropies {
        Some((m, e)) => (m, Some(e)),
        None => (map, None),
    };
    Ok(PipelineOutput {
        mapper: global,
        trajectory,
        odometry: used_odometry,
        recorder: rec,
        metrics,
        local_mme,
        map,
        entropies,
        ablation_poses,
        timing: Timing {
            seconds,
            mapping_seconds,
            frames_per_second: if mapping_seconds > 0.0 {
                inputs.scans.len() as f64 / mapping_seconds
            } else {
                0.0
            },
        },
    })
}

fn concatenate(global: &GlobalMapper, poses: &[Pose]) -> PointCloud {
    let mut out = PointCloud::default();
    for s in global.submaps() {
        out.extend(&transform_cloud(&s.cloud, &poses[s.id]));
    }
    out
}

/// Local maps of the frames near every n-th frame, placed by odometry and by
/// the estimate.
fn local_entropy(
    frames: &[Vec<Vector3<f64>>],
    odometry: &[Pose],
    estimate: &Trajectory,
    config: &PipelineConfig,
) -> Vec<LocalMme> {
    let ev = &config.evaluation;
    let est: Vec<Pose> = estimate.poses().copied().collect();
    let centers: Vec<usize> = (0..frames.len()).step_by(ev.mme_every).collect();
    crate::par::map(&centers, |&c| {
        let members: Vec<usize> = (0..frames.len())
            .filter(|&k| (est[k].translation - est[c].translation).norm() <= ev.mme_local_radius)
            .collect();
        let build = |poses: &[Pose]| {
            let pts = members
                .iter()
                .flat_map(|&k| frames[k].iter().map(move |p| poses[k].transform_point(p)));
            voxel_downsample(&PointCloud::from_means(pts), ev.mme_downsample)
        };
        let after = build(&est);
        LocalMme {
            center: c,
            frames: members.len(),
            points: after.len(),
            before: compute_mme(&build(odometry), ev.mme_radius).ok().map(|r| r.mean),
            after: compute_mme(&after, ev.mme_radius).ok().map(|r| r.mean),
        }
    })
}

/// Graph export records: one node per submap and one edge per factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GraphRecord {
    Node {
        id: usize,
        x: f64,
        y: f64,
        z: f64,
    },
    Edge {
        kind: EdgeKind,
        target: usize,
        source: usize,
        overlap: f64,
        error: f64,
    },
}

pub fn graph_records(global: &GlobalMapper, ordered: bool) -> Vec<GraphRecord> {
    let poses = global.poses();
    let mut out: Vec<GraphRecord> = poses
        .iter()
        .enumerate()
        .map(|(id, p)| GraphRecord::Node {
            id,
            x: p.translation.x,
            y: p.translation.y,
            z: p.translation.z,
        })
        .collect();
    let mut matching = global.graph().matching_factors().iter();
    let mut relative = global.graph().relative_factors().iter();
    for e in global.edges() {
        let error = match e.kind {
            EdgeKind::Matching => {
                let f = matching.next().expect("one matching factor per matching edge");
                f.error(&poses[f.target], &poses[f.source], ordered).0
            }
            EdgeKind::Loop => {
                let f = relative.next().expect("one loop factor per loop edge");
                f.error(&poses[f.i], &poses[f.j])
            }
        };
        out.push(GraphRecord::Edge {
            kind: e.kind,
            target: e.target,
            source: e.source,
            overlap: e.overlap,
            error,
        });
    }
    out
}

/// File names written by [`write_outputs`].
pub mod files {
    pub const TRAJECTORY: &str = "trajectory.txt";
    pub const ODOMETRY: &str = "odometry.txt";
    pub const ABLATION_TRAJECTORY: &str = "trajectory_ablation.txt";
    pub const MAP: &str = "map.ply";
    pub const ENTROPY_MAP: &str = "map_entropy.ply";
    pub const GRAPH: &str = "graph.jsonl";
    pub const EVENTS: &str = "events.jsonl";
    pub const TRACE: &str = "trace.jsonl";
    pub const METRICS: &str = "metrics.json";
    pub const RTE: &str = "rte.jsonl";
    pub const MME: &str = "mme.jsonl";
    pub const TIMING: &str = "timing.json";
    pub const CONFIG: &str = "config.toml";
}

/// Writes every artifact into `dir`, which must exist. Everything except
/// the timing file is reproducible under the determinism flag.
pub fn write_outputs(dir: &Path, output: &PipelineOutput, config: &PipelineConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ordered = config.runtime.deterministic;
    io::write_kitti_poses(output.trajectory.poses(), &dir.join(files::TRAJECTORY))?;
    io::write_kitti_poses(&output.odometry, &dir.join(files::ODOMETRY))?;
    if let Some(poses) = &output.ablation_poses {
        let traj = output.mapper.trajectory_with(poses);
        io::write_kitti_poses(traj.iter().map(|(_, p)| p), &dir.join(files::ABLATION_TRAJECTORY))?;
    }
    io::export_map_ply(&output.mapper.concatenate_map(0.0), &dir.join(files::MAP))?;
    if let Some(entropies) = &output.entropies {
        let kept: Vec<usize> = (0..entropies.len()).filter(|&i| entropies[i].is_some()).collect();
        if !kept.is_empty() {
            let colored = PointCloud {
                points: kept.iter().map(|&i| output.map.points[i]).collect(),
                intensity: Some(kept.iter().map(|&i| entropies[i].unwrap() as f32).collect()),
            };
            io::export_map_ply(&colored, &dir.join(files::ENTROPY_MAP))?;
        }
    }
    io::write_jsonl(graph_records(&output.mapper, ordered), &dir.join(files::GRAPH))?;
    io::write_jsonl(&output.recorder.events, &dir.join(files::EVENTS))?;
    io::write_jsonl(&output.recorder.traces, &dir.join(files::TRACE))?;
    let metrics = serde_json::to_string_pretty(&output.metrics).expect("metrics serialize");
    io::write_atomic(&dir.join(files::METRICS), metrics.as_bytes())?;
    if let Some(acc) = &output.metrics.accuracy {
        #[derive(Serialize)]
        struct Row<'a> {
            trajectory: &'a str,
            #[serde(flatten)]
            bucket: &'a crate::eval::RteBucket,
        }
        let rows = acc
            .rte_odometry
            .per_length
            .iter()
            .map(|b| Row {
                trajectory: "odometry",
                bucket: b,
            })
            .chain(acc.rte_estimate.per_length.iter().map(|b| Row {
                trajectory: "estimate",
                bucket: b,
            }));
        io::write_jsonl(rows, &dir.join(files::RTE))?;
    }
    io::write_jsonl(&output.local_mme, &dir.join(files::MME))?;
    let timing = serde_json::to_string_pretty(&output.timing).expect("timing serializes");
    io::write_atomic(&dir.join(files::TIMING), timing.as_bytes())?;
    io::write_atomic(&dir.join(files::CONFIG), config.to_toml_string().as_bytes())?;
    Ok(())
}
