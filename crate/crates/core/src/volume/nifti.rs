//! Uncompressed single-file NIfTI-1 (`.nii`) reading and writing.
//!
//! Only the fields needed to recover a 3D grid with spacing are honored:
//! `dim`, `datatype`, `bitpix`, `pixdim`, `vox_offset`, `scl_slope`,
//! `scl_inter` and `magic`. Orientation (qform/sform) is ignored.

use std::fs;
use std::path::Path;

use crate::error::{Error, NiftiError, Result};
use crate::volume::grid::{DType, Geometry, VoxelData, VoxelGrid};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const DEFAULT_VOX_OFFSET: usize = 352;

const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_BITPIX: usize = 72;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;
const OFF_SCL_SLOPE: usize = 112;
const OFF_SCL_INTER: usize = 116;
const OFF_XYZT_UNITS: usize = 123;
const OFF_QFORM_CODE: usize = 252;
const OFF_SFORM_CODE: usize = 254;
const OFF_MAGIC: usize = 344;
const MAGIC: [u8; 4] = *b"n+1\0";

/// NIT_MM | NIT_SEC
const UNITS_MM_SEC: u8 = 2 | 8;

fn i16_at(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn i32_at(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

fn f32_at(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_nifti(&bytes).map_err(|e| match e {
        DecodeError::Nifti(source) => Error::Nifti {
            path: path.to_path_buf(),
            source,
        },
        DecodeError::Other(e) => e,
    })
}

pub fn write_nifti(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_nifti(grid)).map_err(|e| Error::io(path, e))
}

#[derive(Debug)]
pub enum DecodeError {
    Nifti(NiftiError),
    Other(Error),
}

impl From<NiftiError> for DecodeError {
    fn from(e: NiftiError) -> Self {
        DecodeError::Nifti(e)
    }
}

/// Decodes an in-memory `.nii` image.
pub fn decode_nifti(bytes: &[u8]) -> Result<VoxelGrid, DecodeError> {
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::TooShort(bytes.len()).into());
    }
    let sizeof_hdr = i32_at(bytes, 0);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(NiftiError::HeaderSize(sizeof_hdr).into());
    }
    let magic: [u8; 4] = bytes[OFF_MAGIC..OFF_MAGIC + 4].try_into().unwrap();
    if magic != MAGIC {
        return Err(NiftiError::Magic(magic).into());
    }

    let mut dim = [0i16; 8];
    for (a, d) in dim.iter_mut().enumerate() {
        *d = i16_at(bytes, OFF_DIM + 2 * a);
    }
    let is_3d = dim[0] == 3 || (dim[0] == 4 && dim[4] == 1);
    if !is_3d {
        return Err(NiftiError::Dimensionality(dim[0], dim).into());
    }
    let mut dims = [0usize; 3];
    for axis in 0..3 {
        let value = dim[axis + 1];
        if value <= 0 {
            return Err(NiftiError::Extent {
                axis: axis + 1,
                value,
            }
            .into());
        }
        dims[axis] = value as usize;
    }

    let code = i16_at(bytes, OFF_DATATYPE);
    let dtype = DType::from_nifti_code(code).ok_or(NiftiError::Datatype(code))?;
    let bitpix = i16_at(bytes, OFF_BITPIX);
    if bitpix as usize != dtype.byte_size() * 8 {
        return Err(NiftiError::Bitpix {
            datatype: code,
            bitpix,
        }
        .into());
    }

    let mut spacing = [0f64; 3];
    for axis in 0..3 {
        let value = f32_at(bytes, OFF_PIXDIM + 4 * (axis + 1));
        if !value.is_finite() || value <= 0.0 {
            return Err(NiftiError::Pixdim {
                axis: axis + 1,
                value,
            }
            .into());
        }
        spacing[axis] = value as f64;
    }

    let vox_offset = f32_at(bytes, OFF_VOX_OFFSET);
    if !vox_offset.is_finite() || vox_offset < HEADER_SIZE as f32 || vox_offset.fract() != 0.0 {
        return Err(NiftiError::VoxOffset(vox_offset).into());
    }
    let start = vox_offset as usize;
    let count = dims[0] * dims[1] * dims[2];
    let needed = count * dtype.byte_size();
    let found = bytes.len().saturating_sub(start);
    if found < needed {
        return Err(NiftiError::Truncated { needed, found }.into());
    }

    let qform = i16_at(bytes, OFF_QFORM_CODE);
    let sform = i16_at(bytes, OFF_SFORM_CODE);
    if qform != 0 || sform != 0 {
        log::warn!("ignoring NIfTI orientation (qform_code={qform}, sform_code={sform}); only spacing is used");
    }

    let geom = Geometry::new(dims, spacing).map_err(DecodeError::Other)?;
    let mut data = VoxelData::from_le_bytes(dtype, &bytes[start..], count);

    let slope = f32_at(bytes, OFF_SCL_SLOPE);
    let inter = f32_at(bytes, OFF_SCL_INTER);
    let scaled = slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0);
    if scaled {
        let inter = if inter.is_finite() { inter } else { 0.0 };
        let raw = VoxelGrid::new(geom, data).map_err(DecodeError::Other)?;
        data = VoxelData::F32(
            (0..count)
                .map(|i| (raw.value(i) * slope as f64 + inter as f64) as f32)
                .collect(),
        );
    }
    VoxelGrid::new(geom, data).map_err(DecodeError::Other)
}

/// Encodes a grid as a single-file NIfTI-1 image with `vox_offset` 352.
pub fn encode_nifti(grid: &VoxelGrid) -> Vec<u8> {
    let mut out = vec![0u8; DEFAULT_VOX_OFFSET];
    let put_i16 = |b: &mut Vec<u8>, off: usize, v: i16| b[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |b: &mut Vec<u8>, off: usize, v: f32| b[off..off + 4].copy_from_slice(&v.to_le_bytes());

    out[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    out[38] = b'r';
    let [nx, ny, nz] = grid.dims();
    let dim = [3i16, nx as i16, ny as i16, nz as i16, 1, 1, 1, 1];
    for (a, d) in dim.iter().enumerate() {
        put_i16(&mut out, OFF_DIM + 2 * a, *d);
    }
    let dtype = grid.dtype();
    put_i16(&mut out, OFF_DATATYPE, dtype.nifti_code());
    put_i16(&mut out, OFF_BITPIX, (dtype.byte_size() * 8) as i16);
    put_f32(&mut out, OFF_PIXDIM, 1.0);
    for (a, s) in grid.spacing().iter().enumerate() {
        put_f32(&mut out, OFF_PIXDIM + 4 * (a + 1), *s as f32);
    }
    put_f32(&mut out, OFF_VOX_OFFSET, DEFAULT_VOX_OFFSET as f32);
    put_f32(&mut out, OFF_SCL_SLOPE, 1.0);
    put_f32(&mut out, OFF_SCL_INTER, 0.0);
    out[OFF_XYZT_UNITS] = UNITS_MM_SEC;
    out[OFF_MAGIC..OFF_MAGIC + 4].copy_from_slice(&MAGIC);
    // bytes 348..352 stay zero: no extensions
    out.extend_from_slice(&grid.data().to_le_bytes());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_u8() -> VoxelGrid {
        let g = Geometry::isotropic([2, 2, 2], 1.0).unwrap();
        VoxelGrid::new(g, VoxelData::U8((0..8).collect())).unwrap()
    }

    #[test]
    fn round_trip_minimal_uint8() {
        let grid = grid_u8();
        let back = decode_nifti(&encode_nifti(&grid)).unwrap();
        assert_eq!(back, grid);
    }

    #[test]
    fn smallest_file_layout() {
        let g = Geometry::new([1, 1, 1], [0.5, 0.75, 2.0]).unwrap();
        let grid = VoxelGrid::new(g, VoxelData::F32(vec![3.25])).unwrap();
        let bytes = encode_nifti(&grid);
        assert_eq!(bytes.len(), 352 + 4);
        assert_eq!(i32_at(&bytes, 0), 348);
        assert_eq!(f32_at(&bytes, OFF_VOX_OFFSET), 352.0);
        assert_eq!(&bytes[344..348], b"n+1\0");
        assert_eq!(&bytes[348..352], &[0, 0, 0, 0]);
        assert_eq!(i16_at(&bytes, OFF_DIM), 3);
        assert_eq!(i16_at(&bytes, OFF_DATATYPE), 16);
        assert_eq!(i16_at(&bytes, OFF_BITPIX), 32);
        assert_eq!(f32_at(&bytes, OFF_PIXDIM + 4), 0.5);
        assert_eq!(f32_at(&bytes, OFF_PIXDIM + 8), 0.75);
        assert_eq!(f32_at(&bytes, OFF_PIXDIM + 12), 2.0);
        assert_eq!(f32_at(&bytes, 352), 3.25);
    }

    #[test]
    fn anisotropic_pixdim_preserved() {
        let g = Geometry::new([2, 3, 1], [0.49, 1.3, 2.7]).unwrap();
        let grid = VoxelGrid::filled(g, 1.0).with_spacing([0.49f32 as f64, 1.3f32 as f64, 2.7f32 as f64]).unwrap();
        let back = decode_nifti(&encode_nifti(&grid)).unwrap();
        assert_eq!(back.spacing(), grid.spacing());
    }

    fn expect_err(bytes: &[u8]) -> NiftiError {
        match decode_nifti(bytes) {
            Err(DecodeError::Nifti(e)) => e,
            other => panic!("expected a NIfTI error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_float64_datatype() {
        let mut bytes = encode_nifti(&grid_u8());
        bytes[OFF_DATATYPE..OFF_DATATYPE + 2].copy_from_slice(&64i16.to_le_bytes());
        assert!(matches!(expect_err(&bytes), NiftiError::Datatype(64)));
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = encode_nifti(&grid_u8());
        bytes[344..348].copy_from_slice(b"ni1\0");
        assert!(matches!(expect_err(&bytes), NiftiError::Magic(_)));
    }

    #[test]
    fn rejects_truncated_payload() {
        let bytes = encode_nifti(&grid_u8());
        let e = expect_err(&bytes[..bytes.len() - 1]);
        assert!(matches!(e, NiftiError::Truncated { needed: 8, found: 7 }));
        assert!(matches!(expect_err(&bytes[..100]), NiftiError::TooShort(100)));
    }

    #[test]
    fn rejects_mismatched_bitpix_and_4d() {
        let mut bytes = encode_nifti(&grid_u8());
        bytes[OFF_BITPIX..OFF_BITPIX + 2].copy_from_slice(&16i16.to_le_bytes());
        assert!(matches!(expect_err(&bytes), NiftiError::Bitpix { .. }));

        let mut bytes = encode_nifti(&grid_u8());
        bytes[OFF_DIM..OFF_DIM + 2].copy_from_slice(&4i16.to_le_bytes());
        bytes[OFF_DIM + 8..OFF_DIM + 10].copy_from_slice(&2i16.to_le_bytes());
        assert!(matches!(expect_err(&bytes), NiftiError::Dimensionality(4, _)));
    }

    #[test]
    fn accepts_singleton_fourth_dimension() {
        let mut bytes = encode_nifti(&grid_u8());
        bytes[OFF_DIM..OFF_DIM + 2].copy_from_slice(&4i16.to_le_bytes());
        assert_eq!(decode_nifti(&bytes).unwrap(), grid_u8());
    }

    #[test]
    fn applies_scaling() {
        let mut bytes = encode_nifti(&grid_u8());
        bytes[OFF_SCL_SLOPE..OFF_SCL_SLOPE + 4].copy_from_slice(&2.0f32.to_le_bytes());
        bytes[OFF_SCL_INTER..OFF_SCL_INTER + 4].copy_from_slice(&(-1.0f32).to_le_bytes());
        let g = decode_nifti(&bytes).unwrap();
        assert_eq!(g.dtype(), DType::Float32);
        assert_eq!(g.to_f64_vec(), (0..8).map(|v| 2.0 * v as f64 - 1.0).collect::<Vec<_>>());

        // slope 0 means "no scaling"
        bytes[OFF_SCL_SLOPE..OFF_SCL_SLOPE + 4].copy_from_slice(&0.0f32.to_le_bytes());
        assert_eq!(decode_nifti(&bytes).unwrap(), grid_u8());
    }
}
