//! Point, box and scribble synthesis from error regions.

use rand::seq::index::sample;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::morph::{
    boundary_2d, gaussian_blur_2d, random_break_mask, random_deformation_2d, skeletonize_2d, threshold, warp_2d,
    SimRng,
};
use crate::prompts::types::{BoxPrompt, PointPrompt, Polarity, PromptConfig, Scribble, ScribbleStyle};
use crate::volume::{
    connected_components, extract_slice, slice_counts, Binary2, BinaryMask, Connectivity, Image2, SliceAxis,
};

fn sample_region(region: &BinaryMask, n: usize, polarity: Polarity, rng: &mut SimRng) -> Vec<PointPrompt> {
    let indices: Vec<usize> = region.iter_indices().collect();
    let n = n.min(indices.len());
    if n == 0 {
        return Vec::new();
    }
    let mut picked: Vec<usize> = sample(rng, indices.len(), n).into_iter().map(|i| indices[i]).collect();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|idx| PointPrompt {
            voxel: region.geometry().coords(idx),
            polarity,
        })
        .collect()
}

/// Uniform sampling without replacement: positives from `fn_mask`, negatives
/// from `fp_mask`. Counts are clamped to the region sizes.
pub fn sample_points(
    fn_mask: &BinaryMask,
    fp_mask: &BinaryMask,
    n_pos: usize,
    n_neg: usize,
    rng: &mut SimRng,
) -> Result<Vec<PointPrompt>> {
    fn_mask.geometry().ensure_same(fp_mask.geometry())?;
    let mut out = sample_region(fn_mask, n_pos, Polarity::Positive, rng);
    out.extend(sample_region(fp_mask, n_neg, Polarity::Negative, rng));
    Ok(out)
}

/// Tight bounding box of the ground truth.
pub fn ground_truth_box(gt: &BinaryMask) -> Result<BoxPrompt> {
    let mut voxels = gt.iter_voxels();
    let first = voxels.next().ok_or(Error::EmptyMask("ground truth box"))?;
    let (mut lo, mut hi) = (first, first);
    for v in voxels {
        for a in 0..3 {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    Ok(BoxPrompt {
        corner_min: lo,
        corner_max: hi,
    })
}

/// Drops 26-connected components with fewer than `min_voxels` voxels.
pub fn filter_small_regions(error_mask: &BinaryMask, min_voxels: usize) -> BinaryMask {
    let comps = connected_components(error_mask, Connectivity::TwentySix);
    let keep: Vec<bool> = comps.sizes.iter().map(|&s| s >= min_voxels).collect();
    let data = comps
        .labels
        .iter()
        .map(|&l| l != 0 && keep[l as usize - 1])
        .collect();
    BinaryMask::from_vec(comps.geom, data).expect("same geometry")
}

/// [`filter_small_regions`], except that a nonempty mask is never filtered
/// to nothing: if every component is too small, the largest one is kept.
pub fn filter_with_fallback(error_mask: &BinaryMask, min_voxels: usize) -> BinaryMask {
    let filtered = filter_small_regions(error_mask, min_voxels);
    if !filtered.is_empty() || error_mask.is_empty() {
        return filtered;
    }
    let comps = connected_components(error_mask, Connectivity::TwentySix);
    comps.mask_of(comps.largest().expect("nonempty mask has a component"))
}

/// Nonempty slices of `region` spaced `frequency` apart, starting at the first nonempty one.
pub fn select_slices(region: &BinaryMask, axis: SliceAxis, frequency: usize) -> Result<Vec<usize>> {
    let counts = slice_counts(region, axis);
    match counts.iter().position(|&c| c > 0) {
        Some(first) => select_slices_anchored(region, axis, frequency, first),
        None => Ok(Vec::new()),
    }
}

/// Nonempty slices `i` of `region` with `(i - anchor) mod frequency == 0`.
pub fn select_slices_anchored(
    region: &BinaryMask,
    axis: SliceAxis,
    frequency: usize,
    anchor: usize,
) -> Result<Vec<usize>> {
    if frequency == 0 {
        return Err(Error::InvalidArgument("slice frequency must be >= 1".into()));
    }
    let f = frequency as i64;
    Ok(slice_counts(region, axis)
        .iter()
        .enumerate()
        .filter(|&(i, &c)| c > 0 && (i as i64 - anchor as i64).rem_euclid(f) == 0)
        .map(|(i, _)| i)
        .collect())
}

/// Rectangular window of a plane: origin and size.
#[derive(Clone, Copy, Debug)]
struct Window {
    u0: usize,
    v0: usize,
    w: usize,
    h: usize,
}

impl Window {
    fn around(plane: &Binary2, margin: usize) -> Option<Self> {
        let mut px = plane.pixels();
        let (u, v) = px.next()?;
        let (mut umin, mut umax, mut vmin, mut vmax) = (u, u, v, v);
        for (u, v) in px {
            umin = umin.min(u);
            umax = umax.max(u);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        let u0 = umin.saturating_sub(margin);
        let v0 = vmin.saturating_sub(margin);
        let u1 = (umax + margin).min(plane.width - 1);
        let v1 = (vmax + margin).min(plane.height - 1);
        Some(Self {
            u0,
            v0,
            w: u1 - u0 + 1,
            h: v1 - v0 + 1,
        })
    }

    fn crop(&self, plane: &Binary2) -> Binary2 {
        Image2::from_fn(self.w, self.h, |u, v| plane.get(self.u0 + u, self.v0 + v))
    }
}

/// Stroke geometry for one slice, in window coordinates.
fn stroke_for_slice(crop: &Binary2, style: ScribbleStyle, cfg: &PromptConfig, rng: &mut SimRng) -> Result<Binary2> {
    let shape = (crop.width, crop.height);
    let base = if style.is_boundary() {
        let blurred = gaussian_blur_2d(&crop.to_scalar(), [cfg.boundary_sigma_px; 2]);
        let (lo, hi) = blurred
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let modified = if hi > lo {
            let t = lo + rng.open01() * (hi - lo);
            threshold(&blurred, t).and(crop)
        } else {
            crop.clone()
        };
        boundary_2d(&modified)
    } else {
        skeletonize_2d(crop)
    };

    let broken = if cfg.break_coverage < 1.0 {
        base.and(&random_break_mask(shape, rng, cfg.break_coverage, cfg.break_scale_px)?)
    } else {
        base
    };

    if !style.is_warped() {
        return Ok(broken);
    }
    let field = random_deformation_2d(shape, rng, cfg.warp_amplitude_px, cfg.warp_sigma_px)?;
    let warped = warp_2d(&broken, &field)?;
    let thick = gaussian_blur_2d(&warped.to_scalar(), [cfg.thickness_sigma_px; 2]);
    Ok(threshold(&thick, cfg.thickness_threshold))
}

/// Runs the scribble pipeline on every selected slice of `region`. Each
/// slice draws from its own substream of `seed`, so slices are independent.
pub(crate) fn scribbles_for_region(
    region: &BinaryMask,
    cfg: &PromptConfig,
    style: ScribbleStyle,
    polarity: Polarity,
    seed: u64,
    anchor: Option<usize>,
) -> Result<Vec<Scribble>> {
    let axis = cfg.slice_axis;
    let slices = match anchor {
        Some(a) => select_slices_anchored(region, axis, cfg.slice_frequency, a)?,
        None => select_slices(region, axis, cfg.slice_frequency)?,
    };
    let margin = (cfg.warp_amplitude_px + 3.0 * cfg.thickness_sigma_px)
        .max(3.0 * cfg.boundary_sigma_px)
        .ceil() as usize
        + 2;
    let mut out = Vec::new();
    for index in slices {
        let plane = extract_slice(region, axis, index)?;
        let Some(win) = Window::around(&plane, margin) else {
            continue;
        };
        let mut rng = SimRng::substream(seed, &[index as u64]);
        let stroke = stroke_for_slice(&win.crop(&plane), style, cfg, &mut rng)?;
        let mut voxels: Vec<[usize; 3]> = stroke
            .pixels()
            .map(|(u, v)| axis.to_voxel(index, win.u0 + u, win.v0 + v))
            .collect();
        if voxels.is_empty() {
            continue;
        }
        voxels.sort_unstable_by_key(|v| (v[2], v[1], v[0]));
        out.push(Scribble {
            voxels,
            polarity,
            axis,
            slice_index: index,
            style,
        });
    }
    Ok(out)
}

fn style_for(cfg: &PromptConfig, boundary: bool) -> ScribbleStyle {
    let warped = cfg.scribble_style.is_some_and(|s| s.is_warped());
    match (warped, boundary) {
        (false, false) => ScribbleStyle::Centerline,
        (true, false) => ScribbleStyle::WarpedCenterline,
        (false, true) => ScribbleStyle::Boundary,
        (true, true) => ScribbleStyle::WarpedBoundary,
    }
}

/// Centerline scribbles: skeleton, broken, optionally warped and thickened.
/// Warping follows `cfg.scribble_style`.
pub fn gen_centerline_scribbles(
    region: &BinaryMask,
    cfg: &PromptConfig,
    polarity: Polarity,
    rng: &mut SimRng,
) -> Result<Vec<Scribble>> {
    let style = style_for(cfg, false);
    scribbles_for_region(region, cfg, style, polarity, rng.next_u64(), None)
}

/// Boundary scribbles: outline of a randomly thresholded blur of the region,
/// broken and warped like centerlines.
pub fn gen_boundary_scribbles(
    region: &BinaryMask,
    cfg: &PromptConfig,
    polarity: Polarity,
    rng: &mut SimRng,
) -> Result<Vec<Scribble>> {
    let style = style_for(cfg, true);
    scribbles_for_region(region, cfg, style, polarity, rng.next_u64(), None)
}

/// Boundary of `plane` after blurring at `sigma` and thresholding at `t`,
/// restricted to the plane's own support. Exposed for inspection tools.
pub fn modified_boundary(plane: &Binary2, sigma: f64, t: f64) -> Binary2 {
    let blurred = gaussian_blur_2d(&plane.to_scalar(), [sigma; 2]);
    boundary_2d(&threshold(&blurred, t).and(plane))
}
