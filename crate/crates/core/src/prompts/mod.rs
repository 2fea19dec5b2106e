//! Simulated user prompts: points, ground-truth boxes and centerline or
//! boundary scribbles derived from segmentation error regions.

mod build;
mod format;
mod generate;
mod types;

pub use build::{annotation_anchor, build_prompt_set, error_regions, prompt_volume_ratio};
pub use format::{PromptKind, PromptRecord};
pub use generate::{
    filter_small_regions, filter_with_fallback, gen_boundary_scribbles, gen_centerline_scribbles, ground_truth_box,
    modified_boundary, sample_points, select_slices, select_slices_anchored,
};
pub use types::{BoxPrompt, PointPrompt, Polarity, PromptConfig, PromptSet, PromptSummary, Scribble, ScribbleStyle};
