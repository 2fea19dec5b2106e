//! 2D/3D morphology and filtering primitives used by prompt synthesis and metrics.

mod blur;
mod deform;
mod edt;
mod rng;
mod thin;

pub use blur::{gaussian_blur_2d, gaussian_blur_3d, gaussian_blur_nd, gaussian_kernel};
pub use deform::{random_break_mask, random_deformation_2d, warp_2d, DeformationField2D};
pub use edt::{edt_3d, edt_squared, DistanceField};
pub use rng::{derive_seed, mix64, SimRng};
pub use thin::skeletonize_2d;

use crate::error::{Error, Result};
use crate::volume::{Binary2, BinaryMask, Image2, Scalar2, FACE_OFFSETS};

/// `img > t` pixelwise.
pub fn threshold(img: &Scalar2, t: f64) -> Binary2 {
    img.map(|&v| v > t)
}

/// Foreground pixels with at least one 4-neighbour in the background
/// (outside the image counts as background).
pub fn boundary_2d(img: &Binary2) -> Binary2 {
    Image2::from_fn(img.width, img.height, |u, v| {
        let (x, y) = (u as i64, v as i64);
        img.get(u, v) && !(img.at(x - 1, y) && img.at(x + 1, y) && img.at(x, y - 1) && img.at(x, y + 1))
    })
}

/// Foreground voxels with at least one 6-neighbour in the background; the
/// volume border counts as background.
pub fn surface_voxels_3d(mask: &BinaryMask) -> Result<BinaryMask> {
    if mask.is_empty() {
        return Err(Error::EmptyMask("surface extraction needs a foreground voxel"));
    }
    let geom = *mask.geometry();
    Ok(BinaryMask::from_fn(geom, |[i, j, k]| {
        mask.get([i, j, k])
            && FACE_OFFSETS.iter().any(|d| {
                geom.checked([i as i64 + d[0], j as i64 + d[1], k as i64 + d[2]])
                    .is_none_or(|n| !mask.get(n))
            })
    }))
}

/// Dilation by a (2r+1)×(2r+1) square.
pub fn dilate_square_2d(img: &Binary2, radius: usize) -> Binary2 {
    let r = radius as i64;
    let mut out = Image2::filled(img.width, img.height, false);
    for (u, v) in img.pixels() {
        for dv in -r..=r {
            for du in -r..=r {
                let (x, y) = (u as i64 + du, v as i64 + dv);
                if x >= 0 && y >= 0 && (x as usize) < img.width && (y as usize) < img.height {
                    out.set(x as usize, y as usize, true);
                }
            }
        }
    }
    out
}

/// Voxels whose centers lie within `radius_mm` of `center`, honoring spacing.
pub fn ball_voxels(geom: &crate::volume::Geometry, center: [usize; 3], radius_mm: f64) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    let reach: Vec<i64> = geom.spacing.iter().map(|s| (radius_mm / s).floor() as i64).collect();
    let r2 = radius_mm * radius_mm;
    for dk in -reach[2]..=reach[2] {
        for dj in -reach[1]..=reach[1] {
            for di in -reach[0]..=reach[0] {
                let d2 = (di as f64 * geom.spacing[0]).powi(2)
                    + (dj as f64 * geom.spacing[1]).powi(2)
                    + (dk as f64 * geom.spacing[2]).powi(2);
                if d2 > r2 {
                    continue;
                }
                if let Some(v) = geom.checked([center[0] as i64 + di, center[1] as i64 + dj, center[2] as i64 + dk]) {
                    out.push(v);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    #[test]
    fn threshold_extremes() {
        let img = Image2::from_fn(4, 3, |u, v| (u + v) as f64);
        assert_eq!(threshold(&img, -1.0).count(), 12);
        assert_eq!(threshold(&img, 5.0).count(), 0);
        assert_eq!(threshold(&img, 100.0).count(), 0);
    }

    #[test]
    fn blurred_disk_threshold_keeps_center_blob() {
        let disk = Image2::from_fn(9, 9, |u, v| {
            let (x, y) = (u as f64 - 4.0, v as f64 - 4.0);
            x * x + y * y <= 9.0
        });
        let blurred = gaussian_blur_2d(&disk.to_scalar(), [1.0, 1.0]);
        let t = threshold(&blurred, 0.5);
        assert!(t.get(4, 4));
        // flood fill from the center reaches every kept pixel
        let mut seen = Image2::filled(9, 9, false);
        let mut stack = vec![(4usize, 4usize)];
        seen.set(4, 4, true);
        while let Some((u, v)) = stack.pop() {
            for (du, dv) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1), (1, 1), (-1, -1), (1, -1), (-1, 1)] {
                let (x, y) = (u as i64 + du, v as i64 + dv);
                if t.at(x, y) && !seen.get(x as usize, y as usize) {
                    seen.set(x as usize, y as usize, true);
                    stack.push((x as usize, y as usize));
                }
            }
        }
        assert_eq!(seen, t);
    }

    #[test]
    fn boundary_cases() {
        let single = Image2::from_fn(3, 3, |u, v| u == 1 && v == 1);
        assert_eq!(boundary_2d(&single), single);
        let mut sq = Image2::filled(6, 6, false);
        for v in 1..5 {
            for u in 1..5 {
                sq.set(u, v, true);
            }
        }
        let b = boundary_2d(&sq);
        assert_eq!(b.count(), 12);
        assert!(!b.get(2, 2) && !b.get(3, 3));
        assert_eq!(boundary_2d(&b), b);
    }

    #[test]
    fn surface_cases() {
        let g = Geometry::isotropic([5, 5, 5], 1.0).unwrap();
        let one = BinaryMask::from_voxels(g, [[2, 2, 2]]);
        assert_eq!(surface_voxels_3d(&one).unwrap(), one);

        let cube = BinaryMask::from_fn(g, |v| v.iter().all(|&c| (1..=3).contains(&c)));
        let s = surface_voxels_3d(&cube).unwrap();
        assert_eq!(s.count(), 26);
        assert!(!s.get([2, 2, 2]));

        let full = BinaryMask::full(g);
        assert_eq!(surface_voxels_3d(&full).unwrap().count(), 125 - 27);
        assert!(surface_voxels_3d(&BinaryMask::empty(g)).is_err());
    }

    #[test]
    fn ball_counts() {
        let g = Geometry::isotropic([11, 11, 11], 1.0).unwrap();
        assert_eq!(ball_voxels(&g, [5, 5, 5], 0.5).len(), 1);
        assert_eq!(ball_voxels(&g, [5, 5, 5], 1.0).len(), 7);
        assert_eq!(ball_voxels(&g, [0, 0, 0], 1.0).len(), 4);
        let aniso = Geometry::new([11, 11, 11], [1.0, 1.0, 2.0]).unwrap();
        assert_eq!(ball_voxels(&aniso, [5, 5, 5], 1.5).len(), 9);
    }
}
