//! Intensity and geometry preprocessing: isotropic resampling, foreground
//! percentile clipping and foreground z-scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::grid::{BinaryMask, Geometry, VoxelData, VoxelGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

/// Percentile with linear interpolation between closest ranks:
/// rank `r = pct/100 * (n - 1)`, interpolating `sorted[floor(r)]` and `sorted[ceil(r)]`.
///
/// `sorted` must be ascending and nonempty.
pub fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = (pct / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Resamples onto an isotropic `target_mm` lattice.
///
/// Output voxel centers map back to continuous input indices
/// `u = (o + 0.5) * target / spacing - 0.5`, clamped to the input extent.
/// Trilinear output is float32; nearest keeps the input dtype.
pub fn resample_isotropic(grid: &VoxelGrid, target_mm: f64, mode: Interpolation) -> Result<VoxelGrid> {
    if !(target_mm.is_finite() && target_mm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target spacing {target_mm} must be positive"
        )));
    }
    let src = grid.geometry();
    let mut out_dims = [0usize; 3];
    for a in 0..3 {
        out_dims[a] = round_half_up(src.dims[a] as f64 * src.spacing[a] / target_mm).max(1);
    }
    let out_geom = Geometry::isotropic(out_dims, target_mm)?;

    // per-axis source coordinates of each output index
    let axis_coords: Vec<Vec<f64>> = (0..3)
        .map(|a| {
            let max = (src.dims[a] - 1) as f64;
            (0..out_dims[a])
                .map(|o| ((o as f64 + 0.5) * target_mm / src.spacing[a] - 0.5).clamp(0.0, max))
                .collect()
        })
        .collect();

    match mode {
        Interpolation::Nearest => {
            let pick = |a: usize, o: usize| -> usize {
                let u = axis_coords[a][o];
                ((u + 0.5).floor() as usize).min(src.dims[a] - 1)
            };
            let n = out_geom.len();
            let src_index: Vec<usize> = (0..n)
                .map(|idx| {
                    let [i, j, k] = out_geom.coords(idx);
                    src.index([pick(0, i), pick(1, j), pick(2, k)])
                })
                .collect();
            let data = match grid.data() {
                VoxelData::U8(v) => VoxelData::U8(src_index.iter().map(|&s| v[s]).collect()),
                VoxelData::I16(v) => VoxelData::I16(src_index.iter().map(|&s| v[s]).collect()),
                VoxelData::F32(v) => VoxelData::F32(src_index.iter().map(|&s| v[s]).collect()),
            };
            VoxelGrid::new(out_geom, data)
        }
        Interpolation::Trilinear => {
            let values = grid.to_f64_vec();
            let split = |a: usize, o: usize| -> (usize, usize, f64) {
                let u = axis_coords[a][o];
                let lo = u.floor() as usize;
                let hi = (lo + 1).min(src.dims[a] - 1);
                (lo, hi, u - lo as f64)
            };
            let out = (0..out_geom.len())
                .map(|idx| {
                    let [i, j, k] = out_geom.coords(idx);
                    let (x0, x1, fx) = split(0, i);
                    let (y0, y1, fy) = split(1, j);
                    let (z0, z1, fz) = split(2, k);
                    let v = |x, y, z| values[src.index([x, y, z])];
                    let c00 = v(x0, y0, z0) * (1.0 - fx) + v(x1, y0, z0) * fx;
                    let c10 = v(x0, y1, z0) * (1.0 - fx) + v(x1, y1, z0) * fx;
                    let c01 = v(x0, y0, z1) * (1.0 - fx) + v(x1, y0, z1) * fx;
                    let c11 = v(x0, y1, z1) * (1.0 - fx) + v(x1, y1, z1) * fx;
                    let c0 = c00 * (1.0 - fy) + c10 * fy;
                    let c1 = c01 * (1.0 - fy) + c11 * fy;
                    (c0 * (1.0 - fz) + c1 * fz) as f32
                })
                .collect();
            VoxelGrid::from_f32(out_geom, out)
        }
    }
}

/// Resamples a mask with nearest-neighbour sampling.
pub fn resample_mask(mask: &BinaryMask, target_mm: f64) -> Result<BinaryMask> {
    let grid = resample_isotropic(&mask.to_grid(), target_mm, Interpolation::Nearest)?;
    Ok(BinaryMask::from_grid_nonzero(&grid))
}

/// Default foreground for preprocessing: voxels with intensity > 0.
pub fn positive_foreground(grid: &VoxelGrid) -> BinaryMask {
    BinaryMask::from_grid_where(grid, |v| v > 0.0)
}

fn foreground_values(grid: &VoxelGrid, fg: &BinaryMask) -> Result<Vec<f64>> {
    grid.geometry().ensure_same(fg.geometry())?;
    let values: Vec<f64> = fg.iter_indices().map(|i| grid.value(i)).collect();
    if values.is_empty() {
        return Err(Error::EmptyMask("foreground"));
    }
    Ok(values)
}

/// Foreground percentile bounds `(p_lo, p_hi)`.
pub fn foreground_percentiles(grid: &VoxelGrid, fg: &BinaryMask, lo_pct: f64, hi_pct: f64) -> Result<(f64, f64)> {
    let mut values = foreground_values(grid, fg)?;
    values.sort_by(|a, b| a.total_cmp(b));
    Ok((percentile_sorted(&values, lo_pct), percentile_sorted(&values, hi_pct)))
}

/// Clamps every voxel into the foreground `[lo_pct, hi_pct]` percentile range.
pub fn clip_percentiles(grid: &VoxelGrid, fg: &BinaryMask, lo_pct: f64, hi_pct: f64) -> Result<VoxelGrid> {
    if !(0.0..=100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct > hi_pct {
        return Err(Error::InvalidArgument(format!(
            "percentiles ({lo_pct}, {hi_pct}) must satisfy 0 <= lo <= hi <= 100"
        )));
    }
    let (lo, hi) = foreground_percentiles(grid, fg, lo_pct, hi_pct)?;
    let out = (0..grid.geometry().len())
        .map(|i| grid.value(i).clamp(lo, hi) as f32)
        .collect();
    VoxelGrid::from_f32(*grid.geometry(), out)
}

/// `(x - mean_fg) / std_fg` over the whole grid, population standard deviation.
pub fn zscore_normalize(grid: &VoxelGrid, fg: &BinaryMask) -> Result<VoxelGrid> {
    let values = foreground_values(grid, fg)?;
    if values.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let out = (0..grid.geometry().len())
        .map(|i| ((grid.value(i) - mean) / std) as f32)
        .collect();
    VoxelGrid::from_f32(*grid.geometry(), out)
}

/// Full intensity pipeline for one subject: isotropic resampling of image
/// (trilinear) and label (nearest), then foreground clipping at the 0.5/99.5
/// percentiles and foreground z-scoring.
pub fn preprocess_subject(
    image: &VoxelGrid,
    label: &BinaryMask,
    target_mm: f64,
) -> Result<(VoxelGrid, BinaryMask)> {
    let image = resample_isotropic(image, target_mm, Interpolation::Trilinear)?;
    let label = resample_mask(label, target_mm)?;
    let fg = positive_foreground(&image);
    let clipped = clip_percentiles(&image, &fg, 0.5, 99.5)?;
    let normalized = zscore_normalize(&clipped, &fg)?;
    Ok((normalized, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::grid::DType;

    fn geom(dims: [usize; 3], spacing: [f64; 3]) -> Geometry {
        Geometry::new(dims, spacing).unwrap()
    }

    #[test]
    fn nearest_at_target_spacing_is_identity() {
        let g = geom([3, 4, 2], [1.0; 3]);
        let grid = VoxelGrid::new(g, VoxelData::I16((0..24).collect())).unwrap();
        let out = resample_isotropic(&grid, 1.0, Interpolation::Nearest).unwrap();
        assert_eq!(out, grid);
    }

    #[test]
    fn trilinear_preserves_constants() {
        let grid = VoxelGrid::filled(geom([5, 3, 7], [0.7, 1.3, 0.45]), 4.5);
        let out = resample_isotropic(&grid, 1.0, Interpolation::Trilinear).unwrap();
        assert_eq!(out.dims(), [4, 4, 3]);
        assert!(out.to_f64_vec().iter().all(|&v| (v - 4.5).abs() < 1e-6));
    }

    #[test]
    fn trilinear_reproduces_linear_ramp() {
        // value = physical x of the voxel center
        let g = geom([4, 4, 4], [0.5; 3]);
        let grid = VoxelGrid::from_fn(g, |[i, _, _]| ((i as f64 + 0.5) * 0.5) as f32);
        let out = resample_isotropic(&grid, 1.0, Interpolation::Trilinear).unwrap();
        assert_eq!(out.dims(), [2, 2, 2]);
        for idx in 0..out.geometry().len() {
            let [i, _, _] = out.geometry().coords(idx);
            let expected = (i as f64 + 0.5) * 1.0;
            assert!((out.value(idx) - expected).abs() < 1e-6, "{} vs {expected}", out.value(idx));
        }
    }

    #[test]
    fn output_dims_round_half_up_and_clamp() {
        let grid = VoxelGrid::filled(geom([5, 1, 3], [0.5, 0.2, 1.0]), 0.0);
        let out = resample_isotropic(&grid, 1.0, Interpolation::Nearest).unwrap();
        // 2.5 -> 3, 0.2 -> 0 -> clamped to 1
        assert_eq!(out.dims(), [3, 1, 3]);
        assert_eq!(out.dtype(), DType::Float32);
    }

    #[test]
    fn percentile_oracle_on_one_to_thousand() {
        let g = geom([1000, 1, 1], [1.0; 3]);
        let grid = VoxelGrid::from_fn(g, |[i, _, _]| (i + 1) as f32);
        let fg = BinaryMask::full(g);
        let (lo, hi) = foreground_percentiles(&grid, &fg, 0.5, 99.5).unwrap();
        assert!((lo - 5.995).abs() < 1e-9, "{lo}");
        assert!((hi - 995.005).abs() < 1e-9, "{hi}");
    }

    #[test]
    fn clip_constant_and_idempotent() {
        let g = geom([4, 4, 2], [1.0; 3]);
        let c = VoxelGrid::filled(g, 2.0);
        let fg = BinaryMask::full(g);
        assert_eq!(clip_percentiles(&c, &fg, 0.5, 99.5).unwrap(), c);

        let ramp = VoxelGrid::from_fn(g, |[i, j, k]| (i * 7 + j * 3 + k * 11) as f32);
        let (lo, hi) = foreground_percentiles(&ramp, &fg, 10.0, 90.0).unwrap();
        let clipped = clip_percentiles(&ramp, &fg, 10.0, 90.0).unwrap();
        for i in 0..g.len() {
            let (before, after) = (ramp.value(i), clipped.value(i));
            assert!(after >= lo as f32 as f64 && after <= hi as f32 as f64);
            if (lo..=hi).contains(&before) {
                assert_eq!(before, after);
            }
        }
    }

    #[test]
    fn clip_rejects_empty_foreground() {
        let g = geom([2, 2, 2], [1.0; 3]);
        let err = clip_percentiles(&VoxelGrid::filled(g, 1.0), &BinaryMask::empty(g), 0.5, 99.5);
        assert!(matches!(err, Err(Error::EmptyMask(_))));
    }

    #[test]
    fn zscore_hand_computed() {
        let g = geom([2, 1, 1], [1.0; 3]);
        let fg = BinaryMask::full(g);
        let unit = VoxelGrid::from_f32(g, vec![-1.0, 1.0]).unwrap();
        assert_eq!(zscore_normalize(&unit, &fg).unwrap().to_f64_vec(), vec![-1.0, 1.0]);
        let shifted = VoxelGrid::from_f32(g, vec![2.0, 4.0]).unwrap();
        assert_eq!(zscore_normalize(&shifted, &fg).unwrap().to_f64_vec(), vec![-1.0, 1.0]);
    }

    #[test]
    fn zscore_rejects_constant_foreground() {
        let g = geom([2, 2, 1], [1.0; 3]);
        let err = zscore_normalize(&VoxelGrid::filled(g, 3.0), &BinaryMask::full(g));
        assert!(matches!(err, Err(Error::ZeroVariance)));
    }
}
