use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cloud has {points} points but {k} neighbors were requested")]
    TooFewPoints { points: usize, k: usize },
    #[error("neighbor count must be at least {min}, got {k}")]
    NeighborCount { k: usize, min: usize },
    #[error("cloud is empty")]
    EmptyCloud,
    #[error("non-finite coordinate at point {index}")]
    NonFinitePoint { index: usize },
    #[error("voxel resolution must be positive, got {0}")]
    InvalidResolution(f64),
    #[error("point {index} maps to voxel {coord:?}, outside the supported range")]
    VoxelOutOfRange { index: usize, coord: [i64; 3] },
    #[error("factor references variable {index} but the graph has {len} variables")]
    UnknownVariable { index: usize, len: usize },
    #[error("factor connects variable {0} to itself")]
    SelfLoop(usize),
    #[error("non-positive-definite pivot at variable block {variable}")]
    NotPositiveDefinite { variable: usize },
    #[error("linear solve failed at maximum damping (lambda {lambda:e})")]
    SolverFailed { lambda: f64 },
    #[error("no point has enough neighbors within radius {radius}")]
    NotEnoughNeighbors { radius: f64 },
    #[error("unknown submap {0}")]
    UnknownSubmap(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed {what} at byte offset {offset}: {reason}")]
    Format {
        what: &'static str,
        offset: u64,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("pipeline failed at {stage}: {source}")]
    Pipeline {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at(self, stage: impl Into<String>) -> Self {
        Error::Pipeline {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
