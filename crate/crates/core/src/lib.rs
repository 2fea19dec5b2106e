//! Simulated user prompts, segmentation backends and surface-aware metrics
//! for evaluating iterative, prompt-driven 3D segmentation.
//!
//! A session alternates between the simulated user, who looks at the
//! current errors and issues points, boxes and scribbles, and a backend that
//! re-segments the volume from those prompts. [`harness`] drives sessions
//! over a dataset and aggregates the metrics per iteration.

pub mod backends;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod morph;
pub mod prompts;
pub mod volume;

pub use error::{Error, Result};
