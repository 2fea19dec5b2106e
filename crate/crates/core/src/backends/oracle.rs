//! A cooperative stand-in model that knows the ground truth and repairs the
//! errors it is prompted on.

use rand::Rng;

use crate::backends::{SegmentationRequest, Segmenter};
use crate::error::{Error, Result};
use crate::metrics::dice;
use crate::morph::{ball_voxels, edt_3d, surface_voxels_3d, SimRng};
use crate::prompts::Polarity;
use crate::volume::{connected_components, BinaryMask, Connectivity};

pub const DEFAULT_REPAIR_RADIUS_MM: f64 = 8.0;

/// Initial Dice of a corrupted ground truth lies in this range.
pub const CORRUPTION_DICE_RANGE: (f64, f64) = (0.6, 0.85);

#[derive(Clone, Debug)]
pub struct OracleState {
    pub gt: BinaryMask,
    pub current: BinaryMask,
    pub repair_radius_mm: f64,
}

/// Degrades `gt` into a plausible first guess: one-voxel erosion, a dropped
/// ball-shaped sub-blob and an added off-target ball, sized so the Dice
/// against `gt` lands in [`CORRUPTION_DICE_RANGE`].
pub fn corrupt_ground_truth(gt: &BinaryMask, rng: &mut SimRng) -> Result<BinaryMask> {
    if gt.is_empty() {
        return Err(Error::EmptyMask("ground truth"));
    }
    let geom = *gt.geometry();
    let (lo, hi) = CORRUPTION_DICE_RANGE;
    let target = rng.random_range(0.65..0.80);

    let eroded = gt.and_not(&surface_voxels_3d(gt)?)?;
    let mut current = if !eroded.is_empty() && dice(&eroded, gt)? > target + 0.05 {
        eroded
    } else {
        gt.clone()
    };

    // off-target blob next to, but not touching, the ground truth
    let fp_volume = 0.08 * gt.count() as f64 * geom.voxel_volume_mm3();
    let fp_radius = (3.0 * fp_volume / (4.0 * std::f64::consts::PI)).cbrt().max(1.0);
    let dist = edt_3d(gt)?;
    let min_spacing = geom.spacing.iter().copied().fold(f64::INFINITY, f64::min);
    let candidates: Vec<usize> = (0..geom.len())
        .filter(|&i| {
            let d = dist.values[i];
            d >= fp_radius + 2.0 * min_spacing && d <= fp_radius + 6.0 * min_spacing
        })
        .collect();
    if !candidates.is_empty() {
        let center = geom.coords(candidates[rng.random_range(0..candidates.len())]);
        for v in ball_voxels(&geom, center, fp_radius) {
            if !gt.get(v) {
                current.set(v, true);
            }
        }
    }

    // drop a growing ball of the ground truth until the target is reached
    let gt_voxels: Vec<[usize; 3]> = gt.iter_voxels().collect();
    let center = gt_voxels[rng.random_range(0..gt_voxels.len())];
    let max_radius = geom
        .dims
        .iter()
        .zip(geom.spacing)
        .map(|(&n, s)| n as f64 * s)
        .fold(0.0, f64::max);
    let mut radius = min_spacing;
    let mut removed = current.clone();
    while dice(&removed, gt)? > target && radius <= max_radius {
        removed = current.clone();
        for v in ball_voxels(&geom, center, radius) {
            if gt.get(v) {
                removed.set(v, false);
            }
        }
        radius += 0.5 * min_spacing;
    }
    let d = dice(&removed, gt)?;
    if !(lo..=hi).contains(&d) {
        log::debug!("corruption reached Dice {d:.3}, outside [{lo}, {hi}]");
    }
    Ok(removed)
}

impl OracleState {
    pub fn new(gt: BinaryMask, current: BinaryMask, repair_radius_mm: f64) -> Result<Self> {
        gt.geometry().ensure_same(current.geometry())?;
        Ok(Self {
            gt,
            current,
            repair_radius_mm,
        })
    }

    /// Applies one round of prompts and returns the updated prediction.
    ///
    /// The box clears everything outside it. A positive voxel inside a
    /// false-negative component fills that component within the repair
    /// radius; a negative voxel inside a false-positive component clears it
    /// likewise. Components are taken from the state before this round.
    pub fn apply(&mut self, req: &SegmentationRequest<'_>) -> Result<BinaryMask> {
        req.validate()?;
        self.gt.geometry().ensure_same(req.geometry())?;
        let geom = *self.gt.geometry();
        let fn_labels = connected_components(&self.gt.and_not(&self.current)?, Connectivity::TwentySix);
        let fp_labels = connected_components(&self.current.and_not(&self.gt)?, Connectivity::TwentySix);

        if let Some(b) = &req.prompts.bbox {
            for idx in 0..geom.len() {
                if self.current.get_index(idx) && !b.contains(geom.coords(idx)) {
                    self.current.as_mut_slice()[idx] = false;
                }
            }
        }

        let mut visited = vec![false; geom.len()];
        for (v, polarity) in req.prompts.voxels() {
            let idx = geom.index(v);
            if visited[idx] {
                continue;
            }
            visited[idx] = true;
            let (labels, fill) = match polarity {
                Polarity::Positive => (&fn_labels, true),
                Polarity::Negative => (&fp_labels, false),
            };
            let label = labels.labels[idx];
            if label == 0 {
                continue;
            }
            for u in ball_voxels(&geom, v, self.repair_radius_mm) {
                if labels.labels[geom.index(u)] == label {
                    self.current.set(u, fill);
                }
            }
        }
        Ok(self.current.clone())
    }
}

/// Backend wrapper around [`OracleState`].
#[derive(Clone, Debug)]
pub struct OracleBackend {
    state: OracleState,
}

impl OracleBackend {
    /// Starts from a corrupted copy of `gt` drawn from `seed`.
    pub fn new(gt: BinaryMask, seed: u64, repair_radius_mm: f64) -> Result<Self> {
        let current = corrupt_ground_truth(&gt, &mut SimRng::new(seed))?;
        Ok(Self {
            state: OracleState::new(gt, current, repair_radius_mm)?,
        })
    }

    pub fn from_state(state: OracleState) -> Self {
        Self { state }
    }

    pub fn state(&self) -> &OracleState {
        &self.state
    }
}

impl Segmenter for OracleBackend {
    fn segment(&mut self, req: &SegmentationRequest<'_>) -> Result<BinaryMask> {
        self.state.apply(req)
    }
}
