use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no input frames")]
    EmptyInput,
    #[error("frame {0} does not share the connectivity of frame 0")]
    ConnectivityMismatch(usize),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("parse error in {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("invalid seeds: {0}")]
    InvalidSeeds(String),
    #[error("vertex {0} has only zero-area incident triangles")]
    DegenerateStar(usize),
    #[error("seam constraints cover every vertex; mesh too coarse to homogenize")]
    OverConstrained,
    #[error("linear solve failed: {0}")]
    SolveFailure(String),
    #[error("piece {0} is not used by any frame")]
    EmptyPiece(usize),
    #[error("library size {d} is invalid for {n} frames")]
    InvalidLibrarySize { d: usize, n: usize },
    #[error("error cap {0} not reachable")]
    CapUnreachable(f64),
    #[error("part {0} has no triangles")]
    EmptyPart(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
