use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voxel counts and physical spacing (mm) of a 3D volume.
///
/// Voxel `(i, j, k)` lives at flat index `i + nx * (j + ny * k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Geometry(format!("dims {dims:?} must be positive")));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::Geometry(format!(
                "spacing {spacing:?} must be positive and finite"
            )));
        }
        Ok(Self { dims, spacing })
    }

    pub fn isotropic(dims: [usize; 3], mm: f64) -> Result<Self> {
        Self::new(dims, [mm; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, [i, j, k]: [usize; 3]) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Returns the in-bounds voxel for signed coordinates.
    #[inline]
    pub fn checked(&self, [i, j, k]: [i64; 3]) -> Option<[usize; 3]> {
        let [nx, ny, nz] = self.dims;
        if i < 0 || j < 0 || k < 0 || i >= nx as i64 || j >= ny as i64 || k >= nz as i64 {
            None
        } else {
            Some([i as usize, j as usize, k as usize])
        }
    }

    pub fn contains(&self, v: [usize; 3]) -> bool {
        v.iter().zip(self.dims.iter()).all(|(a, n)| a < n)
    }

    pub fn ensure_same(&self, other: &Geometry) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing.iter().product()
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [nx, ny, nz] = self.dims;
        let [sx, sy, sz] = self.spacing;
        write!(f, "{nx}x{ny}x{nz} @ ({sx}, {sy}, {sz}) mm")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Uint8,
    Int16,
    Float32,
}

impl DType {
    pub fn nifti_code(self) -> i16 {
        match self {
            DType::Uint8 => 2,
            DType::Int16 => 4,
            DType::Float32 => 16,
        }
    }

    pub fn from_nifti_code(code: i16) -> Option<Self> {
        match code {
            2 => Some(DType::Uint8),
            4 => Some(DType::Int16),
            16 => Some(DType::Float32),
            _ => None,
        }
    }

    pub fn byte_size(self) -> usize {
        match self {
            DType::Uint8 => 1,
            DType::Int16 => 2,
            DType::Float32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::Uint8 => "uint8",
            DType::Int16 => "int16",
            DType::Float32 => "float32",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "uint8" => Some(DType::Uint8),
            "int16" => Some(DType::Int16),
            "float32" => Some(DType::Float32),
            _ => None,
        }
    }
}

/// Typed voxel storage.
#[derive(Clone, Debug, PartialEq)]
pub enum VoxelData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    F32(Vec<f32>),
}

impl VoxelData {
    pub fn len(&self) -> usize {
        match self {
            VoxelData::U8(v) => v.len(),
            VoxelData::I16(v) => v.len(),
            VoxelData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            VoxelData::U8(_) => DType::Uint8,
            VoxelData::I16(_) => DType::Int16,
            VoxelData::F32(_) => DType::Float32,
        }
    }

    /// Little-endian byte image of the payload.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            VoxelData::U8(v) => v.clone(),
            VoxelData::I16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            VoxelData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    /// Decodes `count` little-endian values; `bytes` must hold at least that many.
    pub fn from_le_bytes(dtype: DType, bytes: &[u8], count: usize) -> Self {
        match dtype {
            DType::Uint8 => VoxelData::U8(bytes[..count].to_vec()),
            DType::Int16 => VoxelData::I16(
                bytes[..count * 2]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]))
                    .collect(),
            ),
            DType::Float32 => VoxelData::F32(
                bytes[..count * 4]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
        }
    }
}

/// A 3D scalar field with physical spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    geom: Geometry,
    data: VoxelData,
}

impl VoxelGrid {
    pub fn new(geom: Geometry, data: VoxelData) -> Result<Self> {
        if data.len() != geom.len() {
            return Err(Error::Geometry(format!(
                "data length {} does not match {}",
                data.len(),
                geom
            )));
        }
        Ok(Self { geom, data })
    }

    pub fn from_f32(geom: Geometry, values: Vec<f32>) -> Result<Self> {
        Self::new(geom, VoxelData::F32(values))
    }

    pub fn from_fn(geom: Geometry, mut f: impl FnMut([usize; 3]) -> f32) -> Self {
        let values = (0..geom.len()).map(|idx| f(geom.coords(idx))).collect();
        Self {
            geom,
            data: VoxelData::F32(values),
        }
    }

    pub fn filled(geom: Geometry, value: f32) -> Self {
        Self {
            geom,
            data: VoxelData::F32(vec![value; geom.len()]),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.geom.spacing
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &VoxelData {
        &self.data
    }

    pub fn into_data(self) -> VoxelData {
        self.data
    }

    #[inline]
    pub fn value(&self, idx: usize) -> f64 {
        match &self.data {
            VoxelData::U8(v) => v[idx] as f64,
            VoxelData::I16(v) => v[idx] as f64,
            VoxelData::F32(v) => v[idx] as f64,
        }
    }

    pub fn at(&self, v: [usize; 3]) -> f64 {
        self.value(self.geom.index(v))
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        (0..self.geom.len()).map(|i| self.value(i)).collect()
    }

    pub fn to_f32_vec(&self) -> Vec<f32> {
        match &self.data {
            VoxelData::F32(v) => v.clone(),
            _ => (0..self.geom.len()).map(|i| self.value(i) as f32).collect(),
        }
    }

    /// Replaces the spacing, keeping voxel data untouched.
    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        self.geom = Geometry::new(self.geom.dims, spacing)?;
        Ok(self)
    }
}

/// A 3D mask with values in {0, 1}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    geom: Geometry,
    data: Vec<bool>,
}

impl std::hash::Hash for Geometry {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.dims.hash(state);
        for s in self.spacing {
            s.to_bits().hash(state);
        }
    }
}

impl Eq for Geometry {}

impl BinaryMask {
    pub fn empty(geom: Geometry) -> Self {
        Self {
            geom,
            data: vec![false; geom.len()],
        }
    }

    pub fn full(geom: Geometry) -> Self {
        Self {
            geom,
            data: vec![true; geom.len()],
        }
    }

    pub fn from_vec(geom: Geometry, data: Vec<bool>) -> Result<Self> {
        if data.len() != geom.len() {
            return Err(Error::Geometry(format!(
                "mask length {} does not match {}",
                data.len(),
                geom
            )));
        }
        Ok(Self { geom, data })
    }

    pub fn from_fn(geom: Geometry, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let data = (0..geom.len()).map(|idx| f(geom.coords(idx))).collect();
        Self { geom, data }
    }

    pub fn from_voxels(geom: Geometry, voxels: impl IntoIterator<Item = [usize; 3]>) -> Self {
        let mut m = Self::empty(geom);
        for v in voxels {
            m.set(v, true);
        }
        m
    }

    /// Nonzero voxels of `grid` become foreground.
    pub fn from_grid_nonzero(grid: &VoxelGrid) -> Self {
        Self::from_grid_where(grid, |v| v != 0.0)
    }

    pub fn from_grid_where(grid: &VoxelGrid, pred: impl Fn(f64) -> bool) -> Self {
        let data = (0..grid.geometry().len())
            .map(|i| pred(grid.value(i)))
            .collect();
        Self {
            geom: *grid.geometry(),
            data,
        }
    }

    /// Reads a label volume, rejecting values outside {0, 1}.
    pub fn from_grid_strict(grid: &VoxelGrid) -> Result<Self> {
        for i in 0..grid.geometry().len() {
            let v = grid.value(i);
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "mask voxel {:?} has value {v}, expected 0 or 1",
                    grid.geometry().coords(i)
                )));
            }
        }
        Ok(Self::from_grid_nonzero(grid))
    }

    pub fn to_grid(&self) -> VoxelGrid {
        VoxelGrid {
            geom: self.geom,
            data: VoxelData::U8(self.to_u8()),
        }
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&b| b as u8).collect()
    }

    pub fn from_u8(geom: Geometry, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != geom.len() {
            return Err(Error::Geometry(format!(
                "mask payload {} bytes does not match {}",
                bytes.len(),
                geom
            )));
        }
        let mut data = Vec::with_capacity(bytes.len());
        for (i, &b) in bytes.iter().enumerate() {
            match b {
                0 => data.push(false),
                1 => data.push(true),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "mask byte {i} has value {other}, expected 0 or 1"
                    )))
                }
            }
        }
        Ok(Self { geom, data })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.geom.spacing
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, v: [usize; 3]) -> bool {
        self.data[self.geom.index(v)]
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.data[idx]
    }

    #[inline]
    pub fn set(&mut self, v: [usize; 3], value: bool) {
        let idx = self.geom.index(v);
        self.data[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn iter_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn iter_voxels(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.iter_indices().map(|i| self.geom.coords(i))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        self.geom.ensure_same(&other.geom)?;
        Ok(Self {
            geom: self.geom,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a || b)
    }

    /// Voxels in `self` but not in `other`.
    pub fn and_not(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn intersection_count(&self, other: &Self) -> Result<usize> {
        self.geom.ensure_same(&other.geom)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        self.geom = Geometry::new(self.geom.dims, spacing)?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_index_is_x_fastest() {
        let g = Geometry::isotropic([3, 4, 5], 1.0).unwrap();
        assert_eq!(g.index([1, 0, 0]), 1);
        assert_eq!(g.index([0, 1, 0]), 3);
        assert_eq!(g.index([0, 0, 1]), 12);
        for idx in 0..g.len() {
            assert_eq!(g.index(g.coords(idx)), idx);
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Geometry::new([0, 1, 1], [1.0; 3]).is_err());
        assert!(Geometry::new([1, 1, 1], [1.0, 0.0, 1.0]).is_err());
        assert!(Geometry::new([1, 1, 1], [1.0, f64::NAN, 1.0]).is_err());
        let g = Geometry::isotropic([2, 2, 2], 1.0).unwrap();
        assert!(VoxelGrid::from_f32(g, vec![0.0; 7]).is_err());
    }

    #[test]
    fn mask_payload_rejects_non_binary() {
        let g = Geometry::isotropic([2, 1, 1], 1.0).unwrap();
        assert!(BinaryMask::from_u8(g, &[0, 2]).is_err());
        let m = BinaryMask::from_u8(g, &[0, 1]).unwrap();
        assert_eq!(m.count(), 1);
    }

    #[test]
    fn set_algebra() {
        let g = Geometry::isotropic([4, 1, 1], 1.0).unwrap();
        let a = BinaryMask::from_vec(g, vec![true, true, false, false]).unwrap();
        let b = BinaryMask::from_vec(g, vec![false, true, true, false]).unwrap();
        assert_eq!(a.and(&b).unwrap().count(), 1);
        assert_eq!(a.or(&b).unwrap().count(), 3);
        assert_eq!(a.and_not(&b).unwrap().iter_indices().collect::<Vec<_>>(), vec![0]);
        let other = Geometry::isotropic([4, 1, 1], 2.0).unwrap();
        assert!(a.and(&BinaryMask::empty(other)).is_err());
    }
}
