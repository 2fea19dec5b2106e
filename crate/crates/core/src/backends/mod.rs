//! Segmentation backends and the contract they share.

pub mod bridge;
mod dilation;
mod oracle;
mod region_grow;
mod replay;

pub use dilation::DilationBackend;
pub use oracle::{corrupt_ground_truth, OracleBackend, OracleState, DEFAULT_REPAIR_RADIUS_MM};
pub use region_grow::{RegionGrowBackend, RegionGrowParams};
pub use replay::ReplayBackend;

use crate::error::{Error, Result};
use crate::prompts::PromptSet;
use crate::volume::{BinaryMask, Geometry, VoxelGrid};

/// Everything a backend sees for one iteration.
#[derive(Clone, Copy, Debug)]
pub struct SegmentationRequest<'a> {
    pub image: &'a VoxelGrid,
    pub prompts: &'a PromptSet,
    pub previous_mask: Option<&'a BinaryMask>,
    pub session_id: &'a str,
    pub iteration: usize,
}

impl SegmentationRequest<'_> {
    pub fn geometry(&self) -> &Geometry {
        self.image.geometry()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(prev) = self.previous_mask {
            self.geometry().ensure_same(prev.geometry())?;
        }
        let geom = self.geometry();
        for (v, _) in self.prompts.voxels() {
            if !geom.contains(v) {
                return Err(Error::InvalidArgument(format!("prompt voxel {v:?} outside {geom}")));
            }
        }
        if let Some(b) = &self.prompts.bbox {
            if !geom.contains(b.corner_max) {
                return Err(Error::InvalidArgument(format!("box corner {:?} outside {geom}", b.corner_max)));
            }
        }
        Ok(())
    }
}

/// A segmentation engine driven by prompts. Output geometry must equal the
/// request geometry, and output must be deterministic given the request and
/// the backend's own seed.
pub trait Segmenter: Send {
    fn segment(&mut self, req: &SegmentationRequest<'_>) -> Result<BinaryMask>;

    /// Called once after the last iteration of a session.
    fn end_session(&mut self) -> Result<()> {
        Ok(())
    }
}

pub(crate) fn check_output(req: &SegmentationRequest<'_>, mask: &BinaryMask) -> Result<()> {
    req.geometry().ensure_same(mask.geometry())
}
