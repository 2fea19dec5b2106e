//! 3D grid types, file formats, preprocessing, connected components and slicing.

mod components;
mod grid;
pub mod native;
pub mod nifti;
mod preprocess;
mod slice;

pub use components::{connected_components, Components, Connectivity, FACE_OFFSETS};
pub use grid::{BinaryMask, DType, Geometry, VoxelData, VoxelGrid};
pub use native::{read_native, write_native};
pub use nifti::{read_nifti, write_nifti};
pub use preprocess::{
    clip_percentiles, foreground_percentiles, percentile_sorted, positive_foreground, preprocess_subject,
    resample_isotropic, resample_mask, zscore_normalize, Interpolation,
};
pub use slice::{extract_slice, insert_slice, slice_counts, Binary2, Image2, Scalar2, SliceAxis};

use std::path::Path;

use crate::error::{Error, Result};

/// Reads a volume, choosing the format from the extension (`.nii` or `.vgh`/`.vgd`).
pub fn read_volume(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("nii") => read_nifti(path),
        Some(native::HEADER_EXT) | Some(native::DATA_EXT) => read_native(path),
        _ => Err(Error::InvalidArgument(format!(
            "{}: unknown volume extension (expected .nii or .vgh)",
            path.display()
        ))),
    }
}

pub fn write_volume(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("nii") => write_nifti(grid, path),
        Some(native::HEADER_EXT) | Some(native::DATA_EXT) => write_native(grid, path),
        _ => Err(Error::InvalidArgument(format!(
            "{}: unknown volume extension (expected .nii or .vgh)",
            path.display()
        ))),
    }
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    BinaryMask::from_grid_strict(&read_volume(path)?)
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_volume(&mask.to_grid(), path)
}
