use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage, used to label errors coming out of [`crate::pipeline`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Extract,
    Triangulate,
    Localize,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Extract => "extract",
            Stage::Triangulate => "triangulate",
            Stage::Localize => "localize",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input cloud")]
    EmptyCloud,
    #[error("non-finite coordinate in point {0}")]
    NonFinite(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate point set")]
    DegeneratePointSet,
    #[error("duplicate landmark at ({x}, {y})")]
    DuplicateLandmark { x: f64, y: f64 },
    #[error("unknown triangle id {0}")]
    UnknownTriangle(usize),
    #[error("ambiguous correspondence")]
    AmbiguousCorrespondence,
    #[error("degenerate star geometry")]
    DegenerateStar,
    #[error("insufficient matches ({found} < {required})")]
    InsufficientMatches { found: usize, required: usize },
    #[error("no overlap")]
    NoOverlap,
    #[error("oracle input too large ({0} vertices, cap is 50)")]
    OracleSizeCap(usize),
    #[error("infeasible forest: {0}")]
    InfeasibleForest(String),
    #[error("malformed input, line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Strips any stage labels and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
