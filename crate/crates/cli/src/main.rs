mod plots;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;
use serde_json::json;

use vgmap::config::PipelineConfig;
use vgmap::io;
use vgmap::pipeline::{run_pipeline, write_outputs, PipelineInputs, ScanSource};
use vgmap::synthetic::{generate_synthetic_sequence, SyntheticSceneSpec};

/// Globally consistent LiDAR mapping with voxelized GICP matching cost factors.
#[derive(Debug, Parser)]
#[command(name = "vgmap", version)]
struct Args {
    /// Pipeline configuration (TOML). Missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of KITTI `.bin` scans, processed in file-name order.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    scans: Option<PathBuf>,
    /// KITTI pose file with one initial guess per scan.
    #[arg(long, conflicts_with = "synthetic")]
    odometry: Option<PathBuf>,
    /// KITTI pose file used only for evaluation.
    #[arg(long, conflicts_with = "synthetic")]
    ground_truth: Option<PathBuf>,
    /// Loop candidates, one `target source [yaw_deg]` per line.
    #[arg(long)]
    loops: Option<PathBuf>,
    /// Generated sequence: `line`, `circle`, `figure-eight`, `loop`, or a TOML scene file.
    #[arg(long, value_name = "SPEC")]
    synthetic: Option<String>,
    /// Fixed-order reductions so repeated runs are bit-identical.
    #[arg(long)]
    deterministic: bool,
    /// Worker threads (0 uses every core). Overrides the configuration.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Skip the SVG figures.
    #[arg(long)]
    no_plots: bool,
}

fn load_config(args: &Args) -> Result<PipelineConfig> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if args.deterministic {
        config.runtime.deterministic = true;
    }
    if let Some(t) = args.threads {
        config.runtime.threads = t;
    }
    config.validate()?;
    Ok(config)
}

fn synthetic_spec(spec: &str) -> Result<SyntheticSceneSpec> {
    if let Some(s) = SyntheticSceneSpec::preset(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    if !path.is_file() {
        bail!("--synthetic {spec:?} is neither a preset (line, circle, figure-eight, loop) nor a scene file");
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SyntheticSceneSpec::from_toml_str(&text).with_context(|| format!("scene file {}", path.display()))
}

fn load_inputs(args: &Args) -> Result<PipelineInputs> {
    let mut inputs = match (&args.synthetic, &args.scans) {
        (Some(spec), _) => {
            let spec = synthetic_spec(spec)?;
            log::info!("generating {} synthetic frames", spec.frames);
            PipelineInputs::synthetic(generate_synthetic_sequence(&spec)?)
        }
        (None, Some(dir)) => {
            let scans = io::list_scans(dir)?;
            let poses = |p: &Option<PathBuf>, what: &str| -> Result<_> {
                p.as_ref()
                    .map(|p| io::load_kitti_poses(p).with_context(|| format!("{what} file {}", p.display())))
                    .transpose()
            };
            PipelineInputs {
                scans: ScanSource::Files(scans),
                odometry: poses(&args.odometry, "odometry")?,
                ground_truth: poses(&args.ground_truth, "ground truth")?,
                loop_candidates: Vec::new(),
            }
        }
        (None, None) => bail!("either --scans or --synthetic is required"),
    };
    if let Some(path) = &args.loops {
        inputs.loop_candidates =
            io::load_loop_candidates(path).with_context(|| format!("loop file {}", path.display()))?;
    }
    Ok(inputs)
}

/// Output files are collected in a hidden sibling directory and moved into
/// place only after everything succeeded.
struct Staging {
    dir: PathBuf,
    target: PathBuf,
}

impl Staging {
    fn new(target: &Path) -> Result<Staging> {
        let name = target
            .file_name()
            .ok_or_else(|| anyhow!("output directory {} has no name", target.display()))?;
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        let mut staged = std::ffi::OsString::from(".");
        staged.push(name);
        staged.push(format!(".partial{}", std::process::id()));
        let dir = parent.join(staged);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Staging {
            dir,
            target: target.to_path_buf(),
        })
    }

    fn commit(self) -> Result<()> {
        if !self.target.exists() {
            return fs::rename(&self.dir, &self.target).with_context(|| format!("moving outputs to {}", self.target.display()));
        }
        move_tree(&self.dir, &self.target)?;
        fs::remove_dir_all(&self.dir).ok();
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.dir);
    }
}

fn move_tree(from: &Path, to: &Path) -> Result<()> {
    fs::create_dir_all(to)?;
    for entry in fs::read_dir(from)? {
        let entry = entry?;
        let dest = to.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            move_tree(&entry.path(), &dest)?;
        } else {
            fs::rename(entry.path(), &dest).with_context(|| format!("moving {}", dest.display()))?;
        }
    }
    Ok(())
}

fn run(args: &Args) -> Result<()> {
    let config = load_config(args)?;
    let inputs = load_inputs(args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.runtime.threads)
        .build()
        .context("building the worker pool")?;
    log::info!("{} frames on {} threads", inputs.scans.len(), pool.current_num_threads());
    let output = pool.install(|| run_pipeline(&config, &inputs))?;

    let staging = Staging::new(&args.out_dir)?;
    write_outputs(&staging.dir, &output, &config)?;
    if let Some(gt) = &inputs.ground_truth {
        io::write_kitti_poses(gt, &staging.dir.join(plots::GROUND_TRUTH))?;
    }
    if !args.no_plots {
        plots::render_all(&staging.dir)?;
    }
    staging.commit()?;

    let m = &output.metrics;
    println!(
        "{} frames, {} submaps, {} matching + {} loop factors, final error {:.6e}",
        m.frames, m.submaps, m.matching_factors, m.loop_factors, m.final_error
    );
    if let Some(acc) = &m.accuracy {
        println!(
            "ATE {:.4} m (odometry {:.4} m), end error {:.4} m",
            acc.estimate.ate, acc.odometry.ate, acc.estimate.end_translation
        );
    }
    println!("outputs in {}", args.out_dir.display());
    Ok(())
}

/// The failing frame or submap is read off the pipeline stage label.
fn diagnostic(err: &anyhow::Error) -> serde_json::Value {
    let stage = err.chain().find_map(|e| match e.downcast_ref::<vgmap::Error>() {
        Some(vgmap::Error::Pipeline { stage, .. }) => Some(stage.clone()),
        _ => None,
    });
    let index = |kind: &str| {
        stage
            .as_deref()
            .and_then(|s| s.strip_prefix(kind))
            .and_then(|s| s.trim().parse::<usize>().ok())
    };
    json!({
        "status": "error",
        "stage": stage,
        "frame": index("frame"),
        "submap": index("submap"),
        "message": err.to_string(),
        "causes": err.chain().skip(1).map(|e| e.to_string()).collect::<Vec<_>>(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            eprintln!("{}", diagnostic(&err));
            ExitCode::FAILURE
        }
    }
}
