use std::path::PathBuf;

use crate::backends::{check_output, SegmentationRequest, Segmenter};
use crate::error::{Error, Result};
use crate::volume::{read_mask, BinaryMask};

/// Returns stored predictions `iter_<k>.nii` (or `iter_<k>.vgh`) verbatim.
#[derive(Clone, Debug)]
pub struct ReplayBackend {
    pub dir: PathBuf,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, iteration: usize) -> Option<PathBuf> {
        ["nii", "vgh"]
            .iter()
            .map(|ext| self.dir.join(format!("iter_{iteration}.{ext}")))
            .find(|p| p.exists())
    }
}

impl Segmenter for ReplayBackend {
    fn segment(&mut self, req: &SegmentationRequest<'_>) -> Result<BinaryMask> {
        let path = self.path_for(req.iteration).ok_or_else(|| Error::ReplayMissing {
            dir: self.dir.clone(),
            iteration: req.iteration,
        })?;
        let mask = read_mask(path)?;
        check_output(req, &mask)?;
        Ok(mask)
    }
}
