//! Figures rendered from the exported record files of an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Property};
use serde_json::Value;

use vgmap::io;
use vgmap::pipeline::files;

use crate::svg::{viridis, Figure, Range};

pub const GROUND_TRUTH: &str = "ground_truth.txt";
pub const PLOT_DIR: &str = "plots";
const MAX_SCATTER_POINTS: usize = 30_000;

/// Legend name, color and planar positions.
type Track = (&'static str, &'static str, Vec<(f64, f64)>);

fn read_jsonl(path: &Path) -> Result<Vec<Value>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), k + 1)))
        .collect()
}

fn xy_track(path: &Path) -> Result<Option<Vec<(f64, f64)>>> {
    if !path.exists() {
        return Ok(None);
    }
    let poses = io::load_kitti_poses(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Some(poses.iter().map(|p| (p.translation.x, p.translation.y)).collect()))
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or(f64::NAN)
}

pub fn trajectory_svg(dir: &Path) -> Result<String> {
    let tracks: Vec<Track> = [
        ("ground truth", "#222222", GROUND_TRUTH),
        ("odometry", "#e6851e", files::ODOMETRY),
        ("without matching factors", "#9b59b6", files::ABLATION_TRAJECTORY),
        ("estimate", "#1f6fd1", files::TRAJECTORY),
    ]
    .into_iter()
    .filter_map(|(name, color, file)| xy_track(&dir.join(file)).transpose().map(|t| t.map(|t| (name, color, t))))
    .collect::<Result<_>>()?;
    let all = || tracks.iter().flat_map(|t| t.2.iter());
    let mut fig = Figure::new(
        "Trajectories",
        900.0,
        760.0,
        Range::covering(all().map(|p| p.0)),
        Range::covering(all().map(|p| p.1)),
    )
    .equal_aspect();
    for (name, color, track) in &tracks {
        fig.polyline(track, color, 1.6);
        fig.legend(name, color);
    }
    Ok(fig.finish("x [m]", "y [m]"))
}

pub fn graph_svg(dir: &Path) -> Result<String> {
    let records = read_jsonl(&dir.join(files::GRAPH))?;
    let nodes: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r["type"] == "node")
        .map(|r| (num(r, "x"), num(r, "y")))
        .collect();
    let edges: Vec<(bool, usize, usize)> = records
        .iter()
        .filter(|r| r["type"] == "edge")
        .filter_map(|r| Some((r["kind"] == "loop", r["target"].as_u64()? as usize, r["source"].as_u64()? as usize)))
        .filter(|&(_, a, b)| a < nodes.len() && b < nodes.len())
        .collect();
    let loops = edges.iter().filter(|e| e.0).count();
    let title = format!(
        "Factor graph: {} submaps, {} matching, {} loop factors",
        nodes.len(),
        edges.len() - loops,
        loops
    );
    let mut fig = Figure::new(
        &title,
        900.0,
        760.0,
        Range::covering(nodes.iter().map(|p| p.0)),
        Range::covering(nodes.iter().map(|p| p.1)),
    )
    .equal_aspect();
    for &(_, a, b) in edges.iter().filter(|e| !e.0) {
        fig.line(nodes[a], nodes[b], "#7f7f7f", 0.8, 0.45);
    }
    for &(_, a, b) in edges.iter().filter(|e| e.0) {
        fig.line(nodes[a], nodes[b], "#d62728", 1.6, 0.9);
    }
    for &p in &nodes {
        fig.circle(p, 3.0, "#1f6fd1");
    }
    fig.legend("matching cost factor", "#7f7f7f");
    fig.legend("loop factor", "#d62728");
    fig.legend("submap", "#1f6fd1");
    Ok(fig.finish("x [m]", "y [m]"))
}

fn scope_color(scope: &str) -> &'static str {
    match scope {
        "local" => "#b0b0b0",
        "global" => "#1f6fd1",
        "final" => "#2ca02c",
        _ => "#9b59b6",
    }
}

/// One polyline per optimization run, laid end to end along the x axis.
pub fn errors_svg(dir: &Path) -> Result<String> {
    let records = read_jsonl(&dir.join(files::TRACE))?;
    let mut runs: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut key = None;
    let mut step = 0.0;
    for r in &records {
        let k = (r["scope"].as_str().unwrap_or("").to_string(), r["id"].as_u64());
        if key.as_ref() != Some(&k) || r["iteration"].as_u64() == Some(0) {
            runs.push((k.0.clone(), Vec::new()));
            key = Some(k);
        }
        let e = num(r, "error");
        if e > 0.0 && e.is_finite() {
            runs.last_mut().unwrap().1.push((step, e.log10()));
        }
        step += 1.0;
    }
    let all = || runs.iter().flat_map(|r| r.1.iter());
    let mut fig = Figure::new(
        "Optimizer error per iteration",
        1000.0,
        500.0,
        Range::covering(all().map(|p| p.0)),
        Range::covering(all().map(|p| p.1)),
    );
    for (scope, pts) in &runs {
        fig.polyline(pts, scope_color(scope), 1.2);
    }
    for scope in ["local", "global", "final", "ablation"] {
        if runs.iter().any(|r| r.0 == scope) {
            fig.legend(scope, scope_color(scope));
        }
    }
    Ok(fig.finish("iteration (all runs)", "log10 error"))
}

fn read_entropy_map(path: &Path) -> Result<Vec<[f64; 3]>> {
    let mut file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let ply = Parser::<DefaultElement>::new()
        .read_ply(&mut file)
        .with_context(|| format!("parsing {}", path.display()))?;
    let get = |e: &DefaultElement, k: &str| match e.get(k) {
        Some(Property::Float(v)) => *v as f64,
        _ => f64::NAN,
    };
    Ok(ply
        .payload
        .get("vertex")
        .map(|v| v.iter().map(|e| [get(e, "x"), get(e, "y"), get(e, "intensity")]).collect())
        .unwrap_or_default())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    sorted[((sorted.len() - 1) as f64 * q).round() as usize]
}

/// Top view of the map colored by per-point entropy; `None` without an entropy map.
pub fn entropy_svg(dir: &Path) -> Result<Option<String>> {
    let path = dir.join(files::ENTROPY_MAP);
    if !path.exists() {
        return Ok(None);
    }
    let pts: Vec<[f64; 3]> = read_entropy_map(&path)?
        .into_iter()
        .filter(|p| p.iter().all(|v| v.is_finite()))
        .collect();
    if pts.is_empty() {
        return Ok(None);
    }
    let stride = pts.len().div_ceil(MAX_SCATTER_POINTS);
    let shown: Vec<[f64; 3]> = pts.iter().step_by(stride).copied().collect();
    let mut h: Vec<f64> = pts.iter().map(|p| p[2]).collect();
    h.sort_by(f64::total_cmp);
    let lo = quantile(&h, 0.02);
    let hi = quantile(&h, 0.98).max(lo + 1e-9);
    let mut fig = Figure::new(
        "Map entropy per point",
        900.0,
        760.0,
        Range::covering(shown.iter().map(|p| p[0])),
        Range::covering(shown.iter().map(|p| p[1])),
    )
    .equal_aspect();
    for p in &shown {
        fig.circle((p[0], p[1]), 0.9, &viridis((p[2] - lo) / (hi - lo)));
    }
    fig.colorbar(Range { min: lo, max: hi }, "entropy");
    Ok(Some(fig.finish("x [m]", "y [m]")))
}

/// Writes every figure into `dir/plots` and returns the written paths.
pub fn render_all(dir: &Path) -> Result<Vec<PathBuf>> {
    let out = dir.join(PLOT_DIR);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut figures = vec![
        ("trajectory.svg", trajectory_svg(dir)?),
        ("graph.svg", graph_svg(dir)?),
        ("errors.svg", errors_svg(dir)?),
    ];
    if let Some(svg) = entropy_svg(dir)? {
        figures.push(("entropy.svg", svg));
    }
    figures
        .into_iter()
        .map(|(name, svg)| {
            let path = out.join(name);
            io::write_atomic(&path, svg.as_bytes())?;
            Ok(path)
        })
        .collect()
}
