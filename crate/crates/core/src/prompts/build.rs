use rand::RngCore;

use crate::error::{Error, Result};
use crate::morph::{derive_seed, SimRng};
use crate::prompts::generate::{filter_with_fallback, ground_truth_box, sample_points, scribbles_for_region};
use crate::prompts::types::{Polarity, PromptConfig, PromptSet};
use crate::volume::{connected_components, slice_counts, BinaryMask, Connectivity};

/// Raw false-negative and false-positive regions. At iteration 0 the
/// prediction is treated as empty, so FN is the whole ground truth.
pub fn error_regions(gt: &BinaryMask, pred: Option<&BinaryMask>, iteration: usize) -> Result<(BinaryMask, BinaryMask)> {
    match pred {
        Some(p) if iteration > 0 => Ok((gt.and_not(p)?, p.and_not(gt)?)),
        Some(p) => {
            gt.geometry().ensure_same(p.geometry())?;
            Ok((gt.clone(), BinaryMask::empty(*gt.geometry())))
        }
        None => Ok((gt.clone(), BinaryMask::empty(*gt.geometry()))),
    }
}

/// First nonempty slice of the ground truth; sparse scribbling uses the
/// slice grid anchored here for the whole session.
pub fn annotation_anchor(gt: &BinaryMask, cfg: &PromptConfig) -> Option<usize> {
    slice_counts(gt, cfg.slice_axis).iter().position(|&c| c > 0)
}

/// Simulated user prompts for one iteration.
///
/// Positive prompts come from FN regions and negative ones from FP regions,
/// after dropping regions below `cfg.min_region_voxels` (keeping the largest
/// one if nothing would be left). Scribbles are generated per 26-connected
/// component, each from its own seeded substream.
pub fn build_prompt_set(
    gt: &BinaryMask,
    pred: Option<&BinaryMask>,
    cfg: &PromptConfig,
    iteration: usize,
    rng: &mut SimRng,
) -> Result<PromptSet> {
    if gt.is_empty() {
        return Err(Error::EmptyMask("ground truth"));
    }
    let (fn_raw, fp_raw) = error_regions(gt, pred, iteration)?;
    let fn_mask = filter_with_fallback(&fn_raw, cfg.min_region_voxels);
    let fp_mask = filter_with_fallback(&fp_raw, cfg.min_region_voxels);

    let mut set = PromptSet::new(iteration);
    if cfg.use_points {
        let n_neg = if iteration == 0 { 0 } else { cfg.points_per_iteration };
        set.points = sample_points(&fn_mask, &fp_mask, cfg.points_per_iteration, n_neg, rng)?;
    }
    if cfg.use_box && iteration == 0 {
        set.bbox = Some(ground_truth_box(gt)?);
    }
    if let Some(style) = cfg.scribble_style {
        let base = rng.next_u64();
        let anchor = annotation_anchor(gt, cfg);
        for (polarity, region) in [(Polarity::Positive, &fn_mask), (Polarity::Negative, &fp_mask)] {
            if region.is_empty() {
                continue;
            }
            let comps = connected_components(region, Connectivity::TwentySix);
            for label in 1..=comps.count() as u32 {
                let seed = derive_seed(base, &[iteration as u64, polarity as u64, label as u64]);
                let component = comps.mask_of(label);
                set.scribbles
                    .extend(scribbles_for_region(&component, cfg, style, polarity, seed, anchor)?);
            }
        }
    }
    Ok(set)
}

/// Scribble voxels issued across `sets`, divided by the ground-truth volume.
pub fn prompt_volume_ratio(sets: &[PromptSet], gt: &BinaryMask) -> Result<f64> {
    let gt_count = gt.count();
    if gt_count == 0 {
        return Err(Error::EmptyMask("ground truth"));
    }
    let total: usize = sets.iter().map(PromptSet::scribble_voxel_count).sum();
    Ok(total as f64 / gt_count as f64)
}
