use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures while decoding a NIfTI-1 file. Each variant names the header
/// field that was rejected.
#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("file is {0} bytes, shorter than the 348-byte header")]
    TooShort(usize),
    #[error("sizeof_hdr is {0}, expected 348 (big-endian files are not supported)")]
    HeaderSize(i32),
    #[error("magic is {0:?}, expected \"n+1\\0\" (single-file NIfTI-1)")]
    Magic([u8; 4]),
    #[error("unsupported datatype code {0}; expected 2 (uint8), 4 (int16) or 16 (float32)")]
    Datatype(i16),
    #[error("bitpix {bitpix} does not match datatype {datatype}")]
    Bitpix { datatype: i16, bitpix: i16 },
    #[error("dim[0] = {0} with dims {1:?}; expected a 3D volume")]
    Dimensionality(i16, [i16; 8]),
    #[error("dim[{axis}] = {value} is not a positive extent")]
    Extent { axis: usize, value: i16 },
    #[error("pixdim[{axis}] = {value} is not a positive finite spacing")]
    Pixdim { axis: usize, value: f32 },
    #[error("vox_offset {0} is invalid")]
    VoxOffset(f32),
    #[error("payload truncated: need {needed} bytes from vox_offset, found {found}")]
    Truncated { needed: usize, found: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("I/O error: {0}")]
    Stream(#[from] io::Error),
    #[error("NIfTI {path}: {source}")]
    Nifti {
        path: PathBuf,
        #[source]
        source: NiftiError,
    },
    #[error("native volume {path}: {message}")]
    Native { path: PathBuf, message: String },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("geometry mismatch: {left} vs {right}")]
    GeometryMismatch { left: String, right: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty mask: {0}")]
    EmptyMask(&'static str),
    #[error("zero variance in foreground intensities")]
    ZeroVariance,
    #[error("slice index {index} out of range for axis of length {len}")]
    SliceOutOfRange { index: usize, len: usize },
    #[error("prompt serialization: {0}")]
    PromptFormat(String),
    #[error("backend: {0}")]
    Backend(String),
    #[error("replay directory {dir} has no mask for iteration {iteration}")]
    ReplayMissing { dir: PathBuf, iteration: usize },
    #[error(transparent)]
    Bridge(#[from] crate::backends::bridge::BridgeError),
    #[error("config: {0}")]
    Config(String),
    #[error("phantom generation failed after {attempts} attempts: {reason}")]
    Phantom { attempts: usize, reason: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
