use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report.
///
/// Variants carry enough context to produce the one-line diagnostics the
/// command line prints.
#[derive(Debug, Error)]
pub enum Error {
    #[error("probe has no elements")]
    EmptyProbe,
    #[error("element positions are not strictly increasing at index {index}")]
    UnsortedElements { index: usize },
    #[error("element spacing {found} m at index {index} differs from pitch {pitch} m")]
    NonUniformPitch { index: usize, pitch: f64, found: f64 },
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("channel data is all zero")]
    AllZeroData,
    #[error("depth must be positive, got {0} m")]
    NonPositiveDepth(f64),
    #[error("every pixel of the grid maps outside the recording window")]
    GridOutsideRecording,
    #[error("beamformed frames do not share one image grid")]
    GridMismatch,
    #[error("no angles to compound")]
    EmptyAngleList,
    #[error("covariance matrix is singular; enable diagonal loading")]
    SingularCovariance,
    #[error("phantom extent is empty")]
    EmptyExtent,
    #[error("recording of {available} s is shorter than the required {required} s")]
    DurationTooShort { required: f64, available: f64 },
    #[error("grid spacing {:.4} mm exceeds sigma/2 = {:.4} mm of the PSF", spacing * 1e3, sigma * 0.5e3)]
    UndersampledPsf { spacing: f64, sigma: f64 },
    #[error("column of {0} samples is too short for envelope detection (need 8)")]
    ColumnTooShort(usize),
    #[error("envelope is all zero")]
    AllZeroEnvelope,
    #[error("profile peak lies on the boundary")]
    PeakAtBoundary,
    #[error("profile never falls below half maximum on the {0} side")]
    NoCrossing(&'static str),
    #[error("region has zero variance")]
    ZeroVariance,
    #[error("{0} mask is empty or too small")]
    EmptyMask(&'static str),
    #[error("background mean is zero")]
    ZeroBackground,
    #[error("bad magic bytes {0:?}, expected \"UBF1\"")]
    BadMagic([u8; 4]),
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u16),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("array shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("config {path}:{line}: {reason}")]
    Config { path: String, line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image {path}: {reason}")]
    Image { path: PathBuf, reason: String },
    #[error("csv {path}: {reason}")]
    Csv { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
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
