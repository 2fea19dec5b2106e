//! 2D planes cut from 3D masks.
//!
//! Axis convention: `Transverse` planes have constant z and in-plane axes
//! (x, y); `Longitudinal` planes have constant x and in-plane axes (y, z).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::grid::BinaryMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceAxis {
    Transverse,
    Longitudinal,
}

impl SliceAxis {
    /// Volume axis held constant by planes of this family.
    pub fn normal(self) -> usize {
        match self {
            SliceAxis::Transverse => 2,
            SliceAxis::Longitudinal => 0,
        }
    }

    /// Volume axes mapped to the plane's (u, v).
    pub fn in_plane(self) -> [usize; 2] {
        match self {
            SliceAxis::Transverse => [0, 1],
            SliceAxis::Longitudinal => [1, 2],
        }
    }

    pub fn plane_shape(self, dims: [usize; 3]) -> (usize, usize) {
        let [u, v] = self.in_plane();
        (dims[u], dims[v])
    }

    /// 3D voxel for plane pixel `(u, v)` of slice `index`.
    #[inline]
    pub fn to_voxel(self, index: usize, u: usize, v: usize) -> [usize; 3] {
        match self {
            SliceAxis::Transverse => [u, v, index],
            SliceAxis::Longitudinal => [index, u, v],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SliceAxis::Transverse => "transverse",
            SliceAxis::Longitudinal => "longitudinal",
        }
    }
}

impl fmt::Display for SliceAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Row-major 2D image; pixel `(u, v)` is at `u + width * v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image2<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

pub type Binary2 = Image2<bool>;
pub type Scalar2 = Image2<f64>;

impl<T: Clone> Image2<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> T {
        self.data[u + self.width * v].clone()
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: T) {
        self.data[u + self.width * v] = value;
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Image2<U> {
        Image2 {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_shape<U>(&self, other: &Image2<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl Binary2 {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Foreground at signed coordinates; out of bounds reads as background.
    #[inline]
    pub fn at(&self, u: i64, v: i64) -> bool {
        u >= 0
            && v >= 0
            && (u as usize) < self.width
            && (v as usize) < self.height
            && self.data[u as usize + self.width * v as usize]
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some((i % self.width, i / self.width)))
    }

    pub fn and(&self, other: &Binary2) -> Binary2 {
        debug_assert!(self.same_shape(other));
        Image2 {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a && b).collect(),
        }
    }

    pub fn to_scalar(&self) -> Scalar2 {
        self.map(|&b| if b { 1.0 } else { 0.0 })
    }
}

fn check_index(mask: &BinaryMask, axis: SliceAxis, index: usize) -> Result<()> {
    let len = mask.dims()[axis.normal()];
    if index >= len {
        return Err(Error::SliceOutOfRange { index, len });
    }
    Ok(())
}

pub fn extract_slice(mask: &BinaryMask, axis: SliceAxis, index: usize) -> Result<Binary2> {
    check_index(mask, axis, index)?;
    let (w, h) = axis.plane_shape(mask.dims());
    Ok(Image2::from_fn(w, h, |u, v| mask.get(axis.to_voxel(index, u, v))))
}

/// Writes `plane` into slice `index`, replacing that slice's contents.
pub fn insert_slice(mask: &mut BinaryMask, plane: &Binary2, axis: SliceAxis, index: usize) -> Result<()> {
    check_index(mask, axis, index)?;
    let (w, h) = axis.plane_shape(mask.dims());
    if (plane.width, plane.height) != (w, h) {
        return Err(Error::InvalidArgument(format!(
            "plane is {}x{}, slice is {w}x{h}",
            plane.width, plane.height
        )));
    }
    for v in 0..h {
        for u in 0..w {
            mask.set(axis.to_voxel(index, u, v), plane.get(u, v));
        }
    }
    Ok(())
}

/// Foreground voxel count of every slice along `axis`.
pub fn slice_counts(mask: &BinaryMask, axis: SliceAxis) -> Vec<usize> {
    let n = axis.normal();
    let mut counts = vec![0usize; mask.dims()[n]];
    for v in mask.iter_voxels() {
        counts[v[n]] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::grid::Geometry;

    fn geom() -> Geometry {
        Geometry::isotropic([3, 4, 5], 1.0).unwrap()
    }

    #[test]
    fn full_mask_gives_full_plane() {
        let m = BinaryMask::full(geom());
        let t = extract_slice(&m, SliceAxis::Transverse, 4).unwrap();
        assert_eq!((t.width, t.height, t.count()), (3, 4, 12));
        let l = extract_slice(&m, SliceAxis::Longitudinal, 2).unwrap();
        assert_eq!((l.width, l.height, l.count()), (4, 5, 20));
    }

    #[test]
    fn single_voxel_lands_on_documented_pixel() {
        let m = BinaryMask::from_voxels(geom(), [[1, 2, 3]]);
        let t = extract_slice(&m, SliceAxis::Transverse, 3).unwrap();
        assert_eq!(t.pixels().collect::<Vec<_>>(), vec![(1, 2)]);
        let l = extract_slice(&m, SliceAxis::Longitudinal, 1).unwrap();
        assert_eq!(l.pixels().collect::<Vec<_>>(), vec![(2, 3)]);
        assert!(extract_slice(&m, SliceAxis::Transverse, 2).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_index() {
        let m = BinaryMask::empty(geom());
        assert!(matches!(
            extract_slice(&m, SliceAxis::Transverse, 5),
            Err(Error::SliceOutOfRange { index: 5, len: 5 })
        ));
        assert!(extract_slice(&m, SliceAxis::Longitudinal, 3).is_err());
    }

    #[test]
    fn insert_then_extract_is_fixed_point() {
        let src = BinaryMask::from_fn(geom(), |[i, j, k]| (i + 2 * j + k) % 3 == 0);
        for axis in [SliceAxis::Transverse, SliceAxis::Longitudinal] {
            let idx = 2;
            let plane = extract_slice(&src, axis, idx).unwrap();
            let mut dst = BinaryMask::empty(geom());
            insert_slice(&mut dst, &plane, axis, idx).unwrap();
            assert_eq!(extract_slice(&dst, axis, idx).unwrap(), plane);
            assert_eq!(dst.count(), plane.count());
        }
    }
}
