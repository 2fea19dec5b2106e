//! Native volume format: a UTF-8 `key = value` header (`<name>.vgh`) next to
//! a raw little-endian payload (`<name>.vgd`).
//!
//! ```text
//! dims = 3 4 5
//! spacing = 0.5 0.5 1
//! dtype = float32
//! data_file = scan.vgd
//! ```
//!
//! Spacing values are written in shortest round-trip form, so reading back
//! reproduces them bit for bit. `data_file` is resolved relative to the header.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::volume::grid::{DType, Geometry, VoxelData, VoxelGrid};

pub const HEADER_EXT: &str = "vgh";
pub const DATA_EXT: &str = "vgd";

fn native_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Native {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Writes `<stem>.vgh` and `<stem>.vgd`; `path` may name either file or the bare stem.
pub fn write_native(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    let header_path = path.as_ref().with_extension(HEADER_EXT);
    let data_path = path.as_ref().with_extension(DATA_EXT);
    let data_name = data_path
        .file_name()
        .ok_or_else(|| native_err(&header_path, "path has no file name"))?
        .to_string_lossy()
        .into_owned();
    let [nx, ny, nz] = grid.dims();
    let [sx, sy, sz] = grid.spacing();
    let header = format!(
        "dims = {nx} {ny} {nz}\nspacing = {sx:?} {sy:?} {sz:?}\ndtype = {}\ndata_file = {data_name}\n",
        grid.dtype().name()
    );
    fs::write(&header_path, header).map_err(|e| Error::io(&header_path, e))?;
    fs::write(&data_path, grid.data().to_le_bytes()).map_err(|e| Error::io(&data_path, e))
}

pub fn read_native(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let header_path = path.as_ref().with_extension(HEADER_EXT);
    let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
    let mut fields = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| native_err(&header_path, format!("line {}: expected key = value", lineno + 1)))?;
        fields.insert(key.trim().to_string(), value.trim().to_string());
    }
    let field = |key: &str| {
        fields
            .get(key)
            .ok_or_else(|| native_err(&header_path, format!("missing key {key:?}")))
    };

    let dims: Vec<usize> = parse_list(field("dims")?, &header_path, "dims")?;
    let spacing: Vec<f64> = parse_list(field("spacing")?, &header_path, "spacing")?;
    if dims.len() != 3 || spacing.len() != 3 {
        return Err(native_err(&header_path, "dims and spacing need exactly 3 values"));
    }
    let dtype_name = field("dtype")?;
    let dtype = DType::from_name(dtype_name)
        .ok_or_else(|| native_err(&header_path, format!("unsupported dtype {dtype_name:?}")))?;
    let data_path: PathBuf = header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(field("data_file")?);

    let geom = Geometry::new([dims[0], dims[1], dims[2]], [spacing[0], spacing[1], spacing[2]])?;
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let needed = geom.len() * dtype.byte_size();
    if bytes.len() != needed {
        return Err(native_err(
            &data_path,
            format!("payload is {} bytes, expected {needed}", bytes.len()),
        ));
    }
    VoxelGrid::new(geom, VoxelData::from_le_bytes(dtype, &bytes, geom.len()))
}

fn parse_list<T: std::str::FromStr>(value: &str, path: &Path, key: &str) -> Result<Vec<T>> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| native_err(path, format!("{key}: cannot parse {tok:?}")))
        })
        .collect()
}
