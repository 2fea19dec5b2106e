use crate::backends::{SegmentationRequest, Segmenter};
use crate::error::Result;
use crate::morph::ball_voxels;
use crate::prompts::Polarity;
use crate::volume::BinaryMask;

/// Previous mask plus balls around positive prompt voxels, minus balls
/// around negative ones. Mirrors the dummy model of the reference bridge
/// client, so sessions through either path can be compared.
#[derive(Clone, Debug)]
pub struct DilationBackend {
    pub radius_mm: f64,
}

impl DilationBackend {
    pub fn new(radius_mm: f64) -> Self {
        Self { radius_mm }
    }

    pub fn apply(&self, req: &SegmentationRequest<'_>) -> Result<BinaryMask> {
        req.validate()?;
        let geom = *req.geometry();
        let mut out = req.previous_mask.cloned().unwrap_or_else(|| BinaryMask::empty(geom));
        for polarity in [Polarity::Positive, Polarity::Negative] {
            for (v, _) in req.prompts.voxels().filter(|&(_, p)| p == polarity) {
                for u in ball_voxels(&geom, v, self.radius_mm) {
                    out.set(u, polarity == Polarity::Positive);
                }
            }
        }
        Ok(out)
    }
}

impl Segmenter for DilationBackend {
    fn segment(&mut self, req: &SegmentationRequest<'_>) -> Result<BinaryMask> {
        self.apply(req)
    }
}
