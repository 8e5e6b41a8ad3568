//! Seeded synthetic LiDAR sequences: a ray-cast world of ground, facades and
//! boxes observed along a line, circle or figure-eight trajectory.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::par;
use crate::se3::{Pose, Twist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryShape {
    Line,
    Circle,
    FigureEight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanModel {
    pub rings: usize,
    pub points_per_ring: usize,
    /// Lowest and highest beam elevation in degrees.
    pub min_elevation: f64,
    pub max_elevation: f64,
    pub max_range: f64,
    pub min_range: f64,
    /// Standard deviation of the range noise in meters.
    pub noise: f64,
}

impl Default for ScanModel {
    fn default() -> Self {
        ScanModel {
            rings: 16,
            points_per_ring: 360,
            min_elevation: -15.0,
            max_elevation: 15.0,
            max_range: 40.0,
            min_range: 1.0,
            noise: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSceneSpec {
    pub shape: TrajectoryShape,
    pub frames: usize,
    /// Line length, circle radius, or figure-eight lobe radius in meters.
    pub size: f64,
    pub scan: ScanModel,
    /// Per-frame bias `(rx, ry, rz, tx, ty, tz)` composed onto every odometry step.
    pub drift: [f64; 6],
    pub seed: u64,
    /// Lateral distance of the facades from the path.
    pub street_half_width: f64,
    /// Boxes per 100 m of path.
    pub box_density: f64,
    pub sensor_height: f64,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        SyntheticSceneSpec {
            shape: TrajectoryShape::Circle,
            frames: 100,
            size: 50.0,
            scan: ScanModel::default(),
            drift: [0.0; 6],
            seed: 42,
            street_half_width: 9.0,
            box_density: 12.0,
            sensor_height: 1.8,
        }
    }
}

impl SyntheticSceneSpec {
    /// Yaw drift in degrees per frame.
    pub fn with_yaw_drift(mut self, degrees: f64) -> Self {
        self.drift[2] = degrees.to_radians();
        self
    }

    /// Named scenes: `line`, `circle`, `figure-eight`, and `loop` (the circle
    /// with 0.1°/frame yaw drift).
    pub fn preset(name: &str) -> Option<Self> {
        let base = SyntheticSceneSpec::default();
        Some(match name {
            "line" => SyntheticSceneSpec {
                shape: TrajectoryShape::Line,
                frames: 40,
                size: 78.0,
                ..base
            },
            "circle" => base,
            "figure-eight" => SyntheticSceneSpec {
                shape: TrajectoryShape::FigureEight,
                frames: 160,
                size: 25.0,
                ..base
            },
            "loop" => base.with_yaw_drift(0.1),
            _ => return None,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SyntheticSceneSpec = toml::from_str(text).map_err(|e| Error::Config(format!("synthetic scene: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("synthetic scene: {msg}")));
        if self.frames < 2 {
            return bad("at least 2 frames are required");
        }
        if !(self.scan.noise >= 0.0) {
            return bad("noise must be non-negative");
        }
        if !(self.size > 0.0) || !(self.scan.max_range > self.scan.min_range) || self.scan.min_range < 0.0 {
            return bad("size and ranges must be positive with min_range < max_range");
        }
        if self.scan.rings == 0 || self.scan.points_per_ring == 0 {
            return bad("scan needs at least one ring and one point per ring");
        }
        if self.drift.iter().any(|v| !v.is_finite()) {
            return bad("drift must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    /// Raw scans in the sensor frame, without covariances.
    pub scans: Vec<PointCloud>,
    pub ground_truth: Vec<Pose>,
    pub odometry: Vec<Pose>,
}

/// Planar rectangle `center + a u + b v`, `|a| <= hu`, `|b| <= hv`.
#[derive(Debug, Clone, Copy)]
struct Quad {
    center: Vector3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
    normal: Vector3<f64>,
    hu: f64,
    hv: f64,
    radius: f64,
}

impl Quad {
    fn new(center: Vector3<f64>, u: Vector3<f64>, v: Vector3<f64>, hu: f64, hv: f64) -> Quad {
        let u = u.normalize();
        let v = v.normalize();
        Quad {
            center,
            u,
            v,
            normal: u.cross(&v).normalize(),
            hu,
            hv,
            radius: (hu * hu + hv * hv).sqrt(),
        }
    }

    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let denom = self.normal.dot(dir);
        if denom.abs() < 1e-9 {
            return None;
        }
        let t = self.normal.dot(&(self.center - origin)) / denom;
        if t <= 0.0 {
            return None;
        }
        let d = origin + dir * t - self.center;
        (d.dot(&self.u).abs() <= self.hu && d.dot(&self.v).abs() <= self.hv).then_some(t)
    }
}

fn path_pose(spec: &SyntheticSceneSpec, s: f64) -> Pose {
    let r = spec.size;
    let (p, heading) = match spec.shape {
        TrajectoryShape::Line => (Vector3::new(s * r, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)),
        TrajectoryShape::Circle => {
            let a = s * std::f64::consts::TAU;
            (
                Vector3::new(r * a.sin(), r * (1.0 - a.cos()), 0.0),
                Vector3::new(a.cos(), a.sin(), 0.0),
            )
        }
        TrajectoryShape::FigureEight => {
            // two tangent circles traversed in opposite directions
            let a = s * 2.0 * std::f64::consts::TAU;
            if s < 0.5 {
                (
                    Vector3::new(r * a.sin(), r * (1.0 - a.cos()), 0.0),
                    Vector3::new(a.cos(), a.sin(), 0.0),
                )
            } else {
                (
                    Vector3::new(r * a.sin(), -r * (1.0 - a.cos()), 0.0),
                    Vector3::new(a.cos(), -a.sin(), 0.0),
                )
            }
        }
    };
    Pose::from_yaw(heading.y.atan2(heading.x), p)
}

/// Path parameter of frame `k`: closed shapes end one step before the start.
fn frame_parameter(spec: &SyntheticSceneSpec, k: usize) -> f64 {
    match spec.shape {
        TrajectoryShape::Line => k as f64 / (spec.frames - 1) as f64,
        _ => k as f64 / spec.frames as f64,
    }
}

fn path_samples(spec: &SyntheticSceneSpec) -> Vec<Vector3<f64>> {
    (0..=2000).map(|k| path_pose(spec, k as f64 / 2000.0).translation).collect()
}

fn distance_to_path(p: &Vector3<f64>, samples: &[Vector3<f64>]) -> f64 {
    samples
        .iter()
        .map(|s| ((p.x - s.x).powi(2) + (p.y - s.y).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min)
}

fn build_world(spec: &SyntheticSceneSpec, rng: &mut ChaCha8Rng) -> Vec<Quad> {
    let z0 = -spec.sensor_height;
    let mut quads = Vec::new();
    let samples = path_samples(spec);
    let length: f64 = samples.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let up = Vector3::z();

    // facades: chords along both sides of the path with random gaps
    for side in [-1.0, 1.0] {
        let mut s = 0.0;
        while s < length {
            let seg = rng.random_range(5.0..14.0);
            let gap = rng.random_range(1.5..5.0);
            let height = rng.random_range(3.0..9.0);
            let offset = spec.street_half_width + rng.random_range(-1.0..2.0);
            let ends: Vec<Vector3<f64>> = [s, (s + seg).min(length)]
                .iter()
                .map(|&d| {
                    let pose = path_pose(spec, d / length);
                    let lateral = pose.rotation * Vector3::y();
                    pose.translation + lateral * (side * offset)
                })
                .collect();
            s += seg + gap;
            let along = ends[1] - ends[0];
            let len = along.norm();
            if len < 1.0 {
                continue;
            }
            let center = (ends[0] + ends[1]) * 0.5 + Vector3::new(0.0, 0.0, z0 + height * 0.5);
            let quad = Quad::new(center, along, up, len * 0.5, height * 0.5);
            let clear = (0..=8).all(|k| {
                let p = ends[0] + along * (k as f64 / 8.0);
                distance_to_path(&p, &samples) > 3.0
            });
            if clear {
                quads.push(quad);
            }
        }
    }

    // boxes between the road and the facades
    let count = (length / 100.0 * spec.box_density).round() as usize;
    let mut placed = 0;
    let mut attempts = 0;
    while placed < count && attempts < count * 20 {
        attempts += 1;
        let pose = path_pose(spec, rng.random_range(0.0..1.0));
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let lateral = pose.rotation * Vector3::y();
        let center = pose.translation + lateral * (side * rng.random_range(4.0..spec.street_half_width - 1.5));
        let (hx, hy, h): (f64, f64, f64) = (rng.random_range(0.3..2.0), rng.random_range(0.3..1.2), rng.random_range(0.8..3.0));
        let yaw = rng.random_range(0.0..std::f64::consts::PI);
        if distance_to_path(&center, &samples) < 2.5 + hx.max(hy) {
            continue;
        }
        let ex = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
        let ey = Vector3::new(-yaw.sin(), yaw.cos(), 0.0);
        let mid = center + Vector3::new(0.0, 0.0, z0 + h * 0.5);
        quads.push(Quad::new(mid + ex * hx, ey, up, hy, h * 0.5));
        quads.push(Quad::new(mid - ex * hx, ey, up, hy, h * 0.5));
        quads.push(Quad::new(mid + ey * hy, ex, up, hx, h * 0.5));
        quads.push(Quad::new(mid - ey * hy, ex, up, hx, h * 0.5));
        quads.push(Quad::new(mid + up * (h * 0.5), ex, ey, hx, hy));
        placed += 1;
    }
    quads
}

fn cast_scan(spec: &SyntheticSceneSpec, quads: &[Quad], pose: &Pose, rng: &mut ChaCha8Rng) -> PointCloud {
    let scan = &spec.scan;
    let origin = pose.translation;
    let reach = scan.max_range + 0.5;
    let nearby: Vec<Quad> = quads
        .iter()
        .filter(|q| {
            let mut d = q.center - origin;
            d.z = 0.0;
            d.norm() <= reach + q.radius
        })
        .copied()
        .collect();
    let z0 = -spec.sensor_height;
    let phase = rng.random_range(0.0..1.0);
    let rings = scan.rings;
    let per_ring = scan.points_per_ring;
    let hits: Vec<Option<(Vector3<f64>, f32)>> = par::map_range(rings * per_ring, |idx| {
        let (ring, k) = (idx / per_ring, idx % per_ring);
        let elevation = if rings == 1 {
            0.0
        } else {
            scan.min_elevation + (scan.max_elevation - scan.min_elevation) * ring as f64 / (rings - 1) as f64
        }
        .to_radians();
        let azimuth = (k as f64 + phase) / per_ring as f64 * std::f64::consts::TAU;
        let local = Vector3::new(elevation.cos() * azimuth.cos(), elevation.cos() * azimuth.sin(), elevation.sin());
        let dir = pose.rotation * local;
        let mut best = f64::INFINITY;
        let mut normal = Vector3::z();
        if dir.z < -1e-9 {
            let t = (z0 - origin.z) / dir.z;
            if t > 0.0 {
                best = t;
            }
        }
        for q in &nearby {
            if let Some(t) = q.intersect(&origin, &dir) {
                if t < best {
                    best = t;
                    normal = q.normal;
                }
            }
        }
        (best >= scan.min_range && best <= scan.max_range).then(|| (local * best, normal.dot(&dir).abs() as f32))
    });
    let normal = Normal::new(0.0, scan.noise.max(0.0)).expect("finite noise");
    let mut means = Vec::new();
    let mut intensity = Vec::new();
    // noise is drawn for every ray in order so the stream does not depend on hits
    for hit in hits {
        let n: f64 = if scan.noise > 0.0 { normal.sample(rng) } else { 0.0 };
        if let Some((p, i)) = hit {
            let range = p.norm();
            means.push(p * ((range + n) / range));
            intensity.push(i);
        }
    }
    let mut cloud = PointCloud::from_means(means);
    cloud.intensity = Some(intensity);
    cloud
}

/// Deterministically generates scans, ground truth and drifted odometry.
pub fn generate_synthetic_sequence(spec: &SyntheticSceneSpec) -> Result<SyntheticSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let quads = build_world(spec, &mut rng);
    let ground_truth: Vec<Pose> = (0..spec.frames).map(|k| path_pose(spec, frame_parameter(spec, k))).collect();
    let bias = Pose::exp(&Twist::from_slice(&spec.drift));
    let mut odometry = vec![ground_truth[0]];
    for k in 1..spec.frames {
        let step = ground_truth[k - 1].between(&ground_truth[k]);
        let prev = odometry[k - 1];
        odometry.push(prev.compose(&step).compose(&bias));
    }
    let scans = ground_truth
        .iter()
        .enumerate()
        .map(|(k, pose)| {
            let mut scan_rng = ChaCha8Rng::seed_from_u64(spec.seed);
            scan_rng.set_stream(k as u64 + 1);
            cast_scan(spec, &quads, pose, &mut scan_rng)
        })
        .collect();
    Ok(SyntheticSequence {
        scans,
        ground_truth,
        odometry,
    })
}
