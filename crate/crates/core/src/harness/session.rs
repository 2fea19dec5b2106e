use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backends::{SegmentationRequest, Segmenter};
use crate::error::Result;
use crate::metrics::{report, MetricsReport};
use crate::morph::SimRng;
use crate::prompts::{annotation_anchor, build_prompt_set, prompt_volume_ratio, select_slices_anchored, PromptConfig, PromptSummary};
use crate::volume::{BinaryMask, VoxelGrid};

/// Everything that governs a session apart from the data and the backend.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionSettings {
    pub prompts: PromptConfig,
    pub iterations: usize,
    pub success_dice: f64,
    pub early_stop: bool,
    pub nsd_tolerance_mm: f64,
    pub record_wall_time: bool,
    pub config_hash: String,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            prompts: PromptConfig::default(),
            iterations: 11,
            success_dice: 0.95,
            early_stop: false,
            nsd_tolerance_mm: crate::metrics::DEFAULT_NSD_TOLERANCE_MM,
            record_wall_time: false,
            config_hash: String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub prompts: PromptSummary,
    pub metrics: MetricsReport,
    /// Scribble voxels issued this iteration over ground-truth voxels.
    pub prompt_volume_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Ran the configured number of iterations.
    Completed,
    /// Dice reached the success bar with early stopping enabled.
    EarlyStop,
    /// The prediction equals the ground truth, so no prompts remain to issue.
    Converged,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub subject: String,
    pub config_hash: String,
    pub iterations: Vec<IterationRecord>,
    /// Best Dice over the session reached the success bar.
    pub success: bool,
    pub stop: StopReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SessionRecord {
    pub fn failed(&self) -> bool {
        self.stop == StopReason::Failed
    }

    pub fn final_metrics(&self) -> Option<&MetricsReport> {
        self.iterations.last().map(|it| &it.metrics)
    }

    pub fn best_dice(&self) -> Option<f64> {
        self.iterations.iter().map(|it| it.metrics.dice).reduce(f64::max)
    }

    /// The entry at `iteration`, carrying the last one forward if the session
    /// stopped earlier without failing. Carried entries issue no prompts.
    pub fn at_iteration(&self, iteration: usize) -> Option<IterationRecord> {
        if let Some(it) = self.iterations.get(iteration) {
            return Some(it.clone());
        }
        if self.failed() {
            return None;
        }
        self.iterations.last().map(|last| IterationRecord {
            iteration,
            prompts: PromptSummary::default(),
            metrics: last.metrics.clone(),
            prompt_volume_ratio: 0.0,
            wall_time_ms: None,
        })
    }
}

/// Runs one human-in-the-loop session.
///
/// Iteration 0 prompts from the ground truth against an empty prediction;
/// iteration `k` prompts from the errors of prediction `k - 1`. Backend
/// failures end the session early with a failed record rather than an error.
/// `seed` drives the simulated user.
pub fn run_session(
    subject: &str,
    image: &VoxelGrid,
    gt: &BinaryMask,
    backend: &mut dyn Segmenter,
    settings: &SessionSettings,
    seed: u64,
) -> Result<SessionRecord> {
    image.geometry().ensure_same(gt.geometry())?;
    settings.prompts.validate()?;
    let annotated = if settings.prompts.slice_frequency > 1 {
        let axis = settings.prompts.slice_axis;
        let anchor = annotation_anchor(gt, &settings.prompts).unwrap_or(0);
        Some((axis, select_slices_anchored(gt, axis, settings.prompts.slice_frequency, anchor)?))
    } else {
        None
    };

    let mut record = SessionRecord {
        subject: subject.to_string(),
        config_hash: settings.config_hash.clone(),
        iterations: Vec::new(),
        success: false,
        stop: StopReason::Completed,
        error: None,
    };
    let mut pred: Option<BinaryMask> = None;
    for k in 0..settings.iterations {
        if pred.as_ref() == Some(gt) {
            record.stop = StopReason::Converged;
            break;
        }
        let mut rng = SimRng::substream(seed, &[k as u64]);
        let prompts = build_prompt_set(gt, pred.as_ref(), &settings.prompts, k, &mut rng)?;
        let req = SegmentationRequest {
            image,
            prompts: &prompts,
            previous_mask: pred.as_ref(),
            session_id: subject,
            iteration: k,
        };
        let started = Instant::now();
        let out = backend
            .segment(&req)
            .and_then(|m| m.geometry().ensure_same(gt.geometry()).map(|_| m));
        let elapsed = started.elapsed();
        let mask = match out {
            Ok(m) => m,
            Err(e) => {
                log::warn!("session {subject} iteration {k}: {e}");
                record.stop = StopReason::Failed;
                record.error = Some(e.to_string());
                break;
            }
        };
        let metrics = report(
            gt,
            &mask,
            annotated.as_ref().map(|(axis, s)| (*axis, s.as_slice())),
            settings.nsd_tolerance_mm,
        )?;
        let dice = metrics.dice;
        record.iterations.push(IterationRecord {
            iteration: k,
            prompts: prompts.summary(),
            metrics,
            prompt_volume_ratio: prompt_volume_ratio(std::slice::from_ref(&prompts), gt)?,
            wall_time_ms: settings.record_wall_time.then(|| elapsed.as_secs_f64() * 1e3),
        });
        pred = Some(mask);
        if settings.early_stop && dice >= settings.success_dice {
            record.stop = StopReason::EarlyStop;
            break;
        }
    }
    if let Err(e) = backend.end_session() {
        if !record.failed() {
            record.stop = StopReason::Failed;
            record.error = Some(e.to_string());
        }
    }
    record.success = record.best_dice().is_some_and(|d| d >= settings.success_dice);
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{OracleBackend, ReplayBackend};
    use crate::volume::Geometry;

    struct Fixed(BinaryMask);

    impl Segmenter for Fixed {
        fn segment(&mut self, _: &SegmentationRequest<'_>) -> Result<BinaryMask> {
            Ok(self.0.clone())
        }
    }

    fn blob() -> (VoxelGrid, BinaryMask) {
        let g = Geometry::isotropic([24, 24, 24], 1.0).unwrap();
        let gt = BinaryMask::from_fn(g, |[i, j, k]| {
            let d = [(i as f64 - 12.0) / 8.0, (j as f64 - 12.0) / 6.0, (k as f64 - 12.0) / 5.0];
            d.iter().map(|x| x * x).sum::<f64>() <= 1.0
        });
        (gt.to_grid(), gt)
    }

    #[test]
    fn perfect_backend_with_early_stop() {
        let (image, gt) = blob();
        let settings = SessionSettings {
            early_stop: true,
            ..SessionSettings::default()
        };
        let rec = run_session("s", &image, &gt, &mut Fixed(gt.clone()), &settings, 1).unwrap();
        assert_eq!(rec.iterations.len(), 1);
        assert_eq!(rec.iterations[0].metrics.dice, 1.0);
        assert!(rec.success);
        assert_eq!(rec.stop, StopReason::EarlyStop);
    }

    #[test]
    fn converged_sessions_stop_and_carry_forward() {
        let (image, gt) = blob();
        let rec = run_session("s", &image, &gt, &mut Fixed(gt.clone()), &SessionSettings::default(), 1).unwrap();
        assert_eq!(rec.stop, StopReason::Converged);
        assert_eq!(rec.iterations.len(), 1);
        let carried = rec.at_iteration(10).unwrap();
        assert_eq!(carried.metrics.dice, 1.0);
        assert_eq!(carried.prompt_volume_ratio, 0.0);
    }

    #[test]
    fn oracle_dice_never_decreases() {
        let (image, gt) = blob();
        let mut oracle = OracleBackend::new(gt.clone(), 7, 8.0).unwrap();
        let rec = run_session("s", &image, &gt, &mut oracle, &SessionSettings::default(), 3).unwrap();
        assert!(!rec.failed());
        for w in rec.iterations.windows(2) {
            assert!(w[1].metrics.dice >= w[0].metrics.dice);
        }
        assert!(rec.iterations[0].metrics.dice < 1.0);
    }

    #[test]
    fn backend_failure_gives_partial_failed_record() {
        let (image, gt) = blob();
        let dir = tempfile::tempdir().unwrap();
        crate::volume::write_mask(&gt.and_not(&BinaryMask::from_voxels(*gt.geometry(), [[12, 12, 12]])).unwrap(), dir.path().join("iter_0.nii")).unwrap();
        let mut replay = ReplayBackend::new(dir.path());
        let rec = run_session("s", &image, &gt, &mut replay, &SessionSettings::default(), 0).unwrap();
        assert!(rec.failed());
        assert_eq!(rec.iterations.len(), 1);
        assert!(rec.error.as_deref().unwrap().contains("iteration 1"));
        assert_eq!(rec.at_iteration(5), None);
    }
}
