//! Structural guarantees of simulated prompts over many random blobs.

mod common;

use common::random_blobs;
use promptsim::morph::SimRng;
use promptsim::prompts::{
    build_prompt_set, error_regions, filter_with_fallback, Polarity, PromptConfig, PromptSet, ScribbleStyle,
};
use promptsim::volume::{connected_components, BinaryMask, Connectivity, Geometry, SliceAxis};

const BLOBS: u64 = 50;

fn blob(seed: u64) -> BinaryMask {
    let g = Geometry::isotropic([28, 28, 20], 1.0).unwrap();
    let mut rng = SimRng::new(seed);
    loop {
        let m = random_blobs(g, 3, &mut rng);
        if m.count() >= 200 {
            return m;
        }
    }
}

/// Ground truth shifted by a couple of voxels plus a detached blob: both FN and FP regions exist.
fn imperfect_prediction(gt: &BinaryMask, seed: u64) -> BinaryMask {
    let g = *gt.geometry();
    let shift = 2 + (seed % 2) as usize;
    let mut pred = BinaryMask::from_fn(g, |[i, j, k]| i >= shift && gt.get([i - shift, j, k]));
    let mut rng = SimRng::new(seed ^ 0xabcd);
    let extra = random_blobs(g, 1, &mut rng);
    pred = pred.or(&extra).unwrap();
    pred
}

fn configs() -> Vec<PromptConfig> {
    let mut out = Vec::new();
    for style in [
        ScribbleStyle::Centerline,
        ScribbleStyle::WarpedCenterline,
        ScribbleStyle::Boundary,
        ScribbleStyle::WarpedBoundary,
    ] {
        for (freq, axis) in [(1, SliceAxis::Transverse), (3, SliceAxis::Longitudinal)] {
            out.push(PromptConfig {
                scribble_style: Some(style),
                slice_frequency: freq,
                slice_axis: axis,
                min_region_voxels: 20,
                ..PromptConfig::default()
            });
        }
    }
    out
}

/// True if some voxel of `region` lies in the same slice within Chebyshev distance `r`.
fn near_in_plane(region: &BinaryMask, axis: SliceAxis, v: [usize; 3], r: usize) -> bool {
    let [a, b] = axis.in_plane();
    region.iter_voxels().any(|q| {
        q[axis.normal()] == v[axis.normal()] && q[a].abs_diff(v[a]) <= r && q[b].abs_diff(v[b]) <= r
    })
}

fn check_scribbles(set: &PromptSet, cfg: &PromptConfig, fn_mask: &BinaryMask, fp_mask: &BinaryMask, anchor: usize) {
    let bound = cfg.warp_dilation_bound();
    for s in &set.scribbles {
        assert_eq!(s.axis, cfg.slice_axis);
        assert_eq!((s.slice_index as i64 - anchor as i64).rem_euclid(cfg.slice_frequency as i64), 0);
        let region = match s.polarity {
            Polarity::Positive => fn_mask,
            Polarity::Negative => fp_mask,
        };
        for &v in &s.voxels {
            assert_eq!(v[s.axis.normal()], s.slice_index);
            if s.style.is_warped() {
                assert!(near_in_plane(region, s.axis, v, bound), "{v:?} strays beyond {bound}");
            } else {
                assert!(region.get(v), "unwarped {:?} scribble voxel {v:?} outside its region", s.style);
            }
        }
    }
}

fn first_slice(gt: &BinaryMask, axis: SliceAxis) -> usize {
    gt.iter_voxels().map(|v| v[axis.normal()]).min().unwrap()
}

#[test]
fn iteration_zero_prompts() {
    for seed in 0..BLOBS {
        let gt = blob(seed);
        let mut drawn = 0;
        for cfg in configs() {
            let mut rng = SimRng::new(seed);
            let set = build_prompt_set(&gt, None, &cfg, 0, &mut rng).unwrap();
            assert!(!set.has_negative(), "seed {seed}");
            let b = set.bbox.as_ref().expect("box at iteration 0");
            assert!(gt.iter_voxels().all(|v| b.contains(v)));
            for p in &set.points {
                assert!(gt.get(p.voxel));
            }
            let fn_mask = filter_with_fallback(&gt, cfg.min_region_voxels);
            check_scribbles(&set, &cfg, &fn_mask, &BinaryMask::empty(*gt.geometry()), first_slice(&gt, cfg.slice_axis));
            // breaking can erase every stroke of a thin slab, so only the total is checked
            drawn += set.scribbles.len();
        }
        assert!(drawn > 0, "seed {seed}");
    }
}

#[test]
fn correction_prompts_target_errors() {
    for seed in 0..BLOBS {
        let gt = blob(seed);
        let pred = imperfect_prediction(&gt, seed);
        for cfg in configs() {
            let mut rng = SimRng::new(seed + 1);
            let set = build_prompt_set(&gt, Some(&pred), &cfg, 2, &mut rng).unwrap();
            assert!(set.bbox.is_none(), "box only at iteration 0");
            let (fn_raw, fp_raw) = error_regions(&gt, Some(&pred), 2).unwrap();
            for p in &set.points {
                match p.polarity {
                    Polarity::Positive => assert!(fn_raw.get(p.voxel)),
                    Polarity::Negative => assert!(fp_raw.get(p.voxel)),
                }
            }
            let fn_mask = filter_with_fallback(&fn_raw, cfg.min_region_voxels);
            let fp_mask = filter_with_fallback(&fp_raw, cfg.min_region_voxels);
            check_scribbles(&set, &cfg, &fn_mask, &fp_mask, first_slice(&gt, cfg.slice_axis));
        }
    }
}

#[test]
fn small_regions_are_ignored_unless_nothing_else_is_left() {
    for seed in 0..BLOBS {
        let gt = blob(seed);
        let pred = imperfect_prediction(&gt, seed);
        let (fn_raw, _) = error_regions(&gt, Some(&pred), 1).unwrap();
        let min = 30;
        let kept = filter_with_fallback(&fn_raw, min);
        let comps = connected_components(&fn_raw, Connectivity::TwentySix);
        let largest = (1..=comps.count() as u32).map(|l| comps.size(l)).max().unwrap_or(0);
        for l in 1..=comps.count() as u32 {
            let m = comps.mask_of(l);
            let in_kept = m.intersection_count(&kept).unwrap();
            if comps.size(l) >= min {
                assert_eq!(in_kept, comps.size(l));
            } else if largest >= min {
                assert_eq!(in_kept, 0);
            }
        }
        if largest < min && largest > 0 {
            assert_eq!(kept.count(), largest);
        }
        assert_eq!(kept.is_empty(), fn_raw.is_empty());
    }
}

#[test]
fn prompts_are_deterministic_per_seed() {
    let gt = blob(3);
    let pred = imperfect_prediction(&gt, 3);
    let cfg = PromptConfig::default();
    let a = build_prompt_set(&gt, Some(&pred), &cfg, 1, &mut SimRng::new(42)).unwrap();
    let b = build_prompt_set(&gt, Some(&pred), &cfg, 1, &mut SimRng::new(42)).unwrap();
    assert_eq!(a, b);
}
