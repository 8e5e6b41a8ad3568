//! File formats: KITTI scans and poses, binary PLY, line-delimited records,
//! loop candidate lists. Every writer replaces its target atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::Serialize;

use crate::cloud::{GaussianPoint, PointCloud};
use crate::error::{Error, Result};
use crate::mapping::{CandidateSource, LoopCandidate};
use crate::se3::Pose;

const KITTI_RECORD: usize = 16;

/// Writes `bytes` to a temporary sibling of `path` and renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp: PathBuf = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Decodes little-endian `(x, y, z, intensity)` float quadruples.
pub fn parse_kitti_scan(bytes: &[u8]) -> Result<PointCloud> {
    let whole = bytes.len() - bytes.len() % KITTI_RECORD;
    if whole != bytes.len() {
        return Err(Error::Format {
            what: "KITTI scan",
            offset: whole as u64,
            reason: format!("{} trailing bytes do not form a 16-byte record", bytes.len() - whole),
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / KITTI_RECORD);
    let mut intensity = Vec::with_capacity(points.capacity());
    for (k, rec) in bytes.chunks_exact(KITTI_RECORD).enumerate() {
        let v: [f32; 4] = std::array::from_fn(|i| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().unwrap()));
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format {
                what: "KITTI scan",
                offset: (k * KITTI_RECORD) as u64,
                reason: "non-finite value".into(),
            });
        }
        points.push(GaussianPoint::new(
            Vector3::new(v[0] as f64, v[1] as f64, v[2] as f64),
            nalgebra::Matrix3::zeros(),
        ));
        intensity.push(v[3]);
    }
    Ok(PointCloud {
        points,
        intensity: Some(intensity),
    })
}

/// Reads a KITTI velodyne `.bin` file. An empty file yields an empty cloud
/// and a logged warning.
pub fn load_kitti_scan(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        log::warn!("{} is empty", path.display());
    }
    parse_kitti_scan(&bytes)
}

pub fn encode_kitti_scan(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * KITTI_RECORD);
    for (k, p) in cloud.points.iter().enumerate() {
        let i = cloud.intensity.as_ref().map_or(0.0, |v| v[k]);
        for x in [p.mean.x as f32, p.mean.y as f32, p.mean.z as f32, i] {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn write_kitti_scan(cloud: &PointCloud, path: &Path) -> Result<()> {
    write_atomic(path, &encode_kitti_scan(cloud))
}

fn format_value(v: f64) -> String {
    // shortest round-trip decimal, never in exponent form
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

/// One line per pose: the 12 row-major values of `[R | t]`.
pub fn format_kitti_poses<'a, I: IntoIterator<Item = &'a Pose>>(poses: I) -> String {
    let mut out = String::new();
    for p in poses {
        let line: Vec<String> = p.to_row_major_3x4().iter().map(|&v| format_value(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_kitti_poses<'a, I: IntoIterator<Item = &'a Pose>>(poses: I, path: &Path) -> Result<()> {
    write_atomic(path, format_kitti_poses(poses).as_bytes())
}

/// Parses 12-value pose lines; blank lines are ignored. Rotations are
/// projected onto SO3.
pub fn parse_kitti_poses(text: &str) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len() as u64;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fail = |reason: String| Error::Format {
            what: "KITTI pose file",
            offset: start,
            reason,
        };
        let values: Vec<f64> = trimmed
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| fail(format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        let values: [f64; 12] = values
            .try_into()
            .map_err(|v: Vec<f64>| fail(format!("expected 12 values, found {}", v.len())))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(fail("non-finite value".into()));
        }
        let pose = Pose::from_row_major_3x4(&values);
        let det = pose.rotation.determinant();
        if !(det > 0.5) {
            return Err(fail(format!("rotation determinant {det}")));
        }
        poses.push(pose.orthonormalized());
    }
    Ok(poses)
}

pub fn load_kitti_poses(path: &Path) -> Result<Vec<Pose>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kitti_poses(&text)
}

/// Binary little-endian PLY with float `x y z` and, when present, a float
/// `intensity` property.
pub fn encode_ply(cloud: &PointCloud) -> Result<Vec<u8>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut out = Vec::new();
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {}\n", cloud.len()).as_bytes());
    out.extend_from_slice(b"property float x\nproperty float y\nproperty float z\n");
    if cloud.intensity.is_some() {
        out.extend_from_slice(b"property float intensity\n");
    }
    out.extend_from_slice(b"end_header\n");
    for (k, p) in cloud.points.iter().enumerate() {
        for v in [p.mean.x, p.mean.y, p.mean.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if let Some(i) = &cloud.intensity {
            out.extend_from_slice(&i[k].to_le_bytes());
        }
    }
    Ok(out)
}

pub fn export_map_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    write_atomic(path, &encode_ply(cloud)?)
}

/// One JSON object per line.
pub fn encode_jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("records serialize to JSON"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(records: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    write_atomic(path, encode_jsonl(records).as_bytes())
}

/// `target source [yaw_degrees]` per line; `#` starts a comment. A yaw
/// gives the initial guess `Rz(yaw)` with zero translation.
pub fn parse_loop_candidates(text: &str) -> Result<Vec<LoopCandidate>> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len() as u64;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fail = |reason: String| Error::Format {
            what: "loop candidate file",
            offset: start,
            reason,
        };
        let fields: Vec<&str> = body.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(fail(format!("expected 2 or 3 fields, found {}", fields.len())));
        }
        let id = |s: &str| s.parse::<usize>().map_err(|e| fail(format!("{s:?}: {e}")));
        let (target, source) = (id(fields[0])?, id(fields[1])?);
        if target == source {
            return Err(fail(format!("submap {target} paired with itself")));
        }
        let initial = match fields.get(2) {
            Some(s) => {
                let yaw: f64 = s.parse().map_err(|e| fail(format!("{s:?}: {e}")))?;
                if !yaw.is_finite() {
                    return Err(fail("non-finite yaw".into()));
                }
                Some(Pose::from_yaw(yaw.to_radians(), Vector3::zeros()))
            }
            None => None,
        };
        out.push(LoopCandidate {
            target,
            source,
            initial,
            origin: CandidateSource::File,
        });
    }
    Ok(out)
}

pub fn load_loop_candidates(path: &Path) -> Result<Vec<LoopCandidate>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_loop_candidates(&text)
}

/// Sorted `.bin` files of a directory.
pub fn list_scans(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    out.sort();
    Ok(out)
}
