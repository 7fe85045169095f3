use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error in {function}: {reason}")]
    Domain { function: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    Dimensions {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("region {what} ({x},{y} {width}x{height}) lies outside the {frame_width}x{frame_height} frame")]
    OutOfBounds {
        what: &'static str,
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        frame_width: usize,
        frame_height: usize,
    },

    #[error("not enough frames: need at least {needed}, got {got}")]
    TooFewFrames { needed: usize, got: usize },

    #[error("allocation failed after {frame_index} frames")]
    ResourceExhausted { frame_index: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("pixels ({ax},{ay}) and ({bx},{by}) are {distance:.2} px apart, closer than one speckle ({min_separation:.2} px)")]
    PixelsTooClose {
        ax: usize,
        ay: usize,
        bx: usize,
        by: usize,
        distance: f64,
        min_separation: f64,
    },

    #[error("pinhole radius {radius:.2} px needed for {target} modes exceeds the {limit:.2} px grid limit")]
    PinholeTooLarge { target: f64, radius: f64, limit: f64 },

    #[error("no interleaved maxima and minima: section is unresolved")]
    Unresolved,

    #[error("malformed stack: {0}")]
    Format(#[from] FormatError),

    #[error("{}", list_offenders(.0))]
    Ingest(Vec<IngestIssue>),

    #[error("non-finite pixel values at {}", list_pixels(.0))]
    NonFinite(Vec<(usize, usize)>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Structured failures of the SPKS frame-stack format.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("field `magic`: expected \"SPKS\", found {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("field `version`: unsupported version {found} (expected 1)")]
    BadVersion { found: u16 },
    #[error("field `dtype`: unsupported dtype code {found}")]
    BadDtype { found: u8 },
    #[error("field `light_kind`: unknown code {found}")]
    BadLightKind { found: u8 },
    #[error("field `flags`: unknown bits {found:#06x}")]
    BadFlags { found: u16 },
    #[error("field `reserved`: must be zero")]
    BadReserved,
    #[error("field `{field}`: must be non-zero")]
    ZeroDimension { field: &'static str },
    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("frame index {index} out of range for a stack of {count} frames")]
    FrameIndex { index: usize, count: usize },
    #[error("graymap: {0}")]
    Graymap(String),
}

/// One offending input file found while ingesting an image directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestIssue {
    pub path: PathBuf,
    pub reason: String,
}

fn list_offenders(issues: &[IngestIssue]) -> String {
    let parts: Vec<String> = issues
        .iter()
        .map(|i| format!("{}: {}", i.path.display(), i.reason))
        .collect();
    format!("image ingestion failed: {}", parts.join("; "))
}

fn list_pixels(pixels: &[(usize, usize)]) -> String {
    let shown: Vec<String> = pixels.iter().take(16).map(|(x, y)| format!("({x},{y})")).collect();
    if pixels.len() > 16 {
        format!("{} and {} more", shown.join(", "), pixels.len() - 16)
    } else {
        shown.join(", ")
    }
}

impl Error {
    pub(crate) fn domain(function: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            function,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
