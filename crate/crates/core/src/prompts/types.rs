use serde::{Deserialize, Serialize};

use crate::volume::SliceAxis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Sampled from false negatives: "this belongs to the target".
    Positive,
    /// Sampled from false positives: "this does not".
    Negative,
}

impl Polarity {
    pub fn name(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScribbleStyle {
    Centerline,
    WarpedCenterline,
    Boundary,
    WarpedBoundary,
}

impl ScribbleStyle {
    pub fn is_warped(self) -> bool {
        matches!(self, ScribbleStyle::WarpedCenterline | ScribbleStyle::WarpedBoundary)
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, ScribbleStyle::Boundary | ScribbleStyle::WarpedBoundary)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScribbleStyle::Centerline => "centerline",
            ScribbleStyle::WarpedCenterline => "warped_centerline",
            ScribbleStyle::Boundary => "boundary",
            ScribbleStyle::WarpedBoundary => "warped_boundary",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointPrompt {
    pub voxel: [usize; 3],
    pub polarity: Polarity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxPrompt {
    pub corner_min: [usize; 3],
    pub corner_max: [usize; 3],
}

impl BoxPrompt {
    pub fn contains(&self, v: [usize; 3]) -> bool {
        (0..3).all(|a| self.corner_min[a] <= v[a] && v[a] <= self.corner_max[a])
    }
}

/// A stroke drawn in one 2D slice. Voxels are sorted by flat index order
/// (z, then y, then x) and may form several fragments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scribble {
    pub voxels: Vec<[usize; 3]>,
    pub polarity: Polarity,
    pub axis: SliceAxis,
    pub slice_index: usize,
    pub style: ScribbleStyle,
}

/// Prompts issued in one human-in-the-loop iteration.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub iteration: usize,
    pub points: Vec<PointPrompt>,
    pub bbox: Option<BoxPrompt>,
    pub scribbles: Vec<Scribble>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSummary {
    pub points_positive: usize,
    pub points_negative: usize,
    pub boxes: usize,
    pub scribbles_positive: usize,
    pub scribbles_negative: usize,
    pub scribble_voxels: usize,
}

impl PromptSet {
    pub fn new(iteration: usize) -> Self {
        Self {
            iteration,
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.bbox.is_none() && self.scribbles.is_empty()
    }

    pub fn scribble_voxel_count(&self) -> usize {
        self.scribbles.iter().map(|s| s.voxels.len()).sum()
    }

    /// Every prompted voxel with its polarity: points first, then scribble voxels.
    pub fn voxels(&self) -> impl Iterator<Item = ([usize; 3], Polarity)> + '_ {
        self.points
            .iter()
            .map(|p| (p.voxel, p.polarity))
            .chain(self.scribbles.iter().flat_map(|s| s.voxels.iter().map(move |&v| (v, s.polarity))))
    }

    pub fn has_negative(&self) -> bool {
        self.voxels().any(|(_, p)| p == Polarity::Negative)
    }

    pub fn summary(&self) -> PromptSummary {
        let count_points = |pol| self.points.iter().filter(|p| p.polarity == pol).count();
        let count_scribbles = |pol| self.scribbles.iter().filter(|s| s.polarity == pol).count();
        PromptSummary {
            points_positive: count_points(Polarity::Positive),
            points_negative: count_points(Polarity::Negative),
            boxes: self.bbox.is_some() as usize,
            scribbles_positive: count_scribbles(Polarity::Positive),
            scribbles_negative: count_scribbles(Polarity::Negative),
            scribble_voxels: self.scribble_voxel_count(),
        }
    }
}

fn default_points() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_style() -> Option<ScribbleStyle> {
    Some(ScribbleStyle::WarpedCenterline)
}
fn default_axis() -> SliceAxis {
    SliceAxis::Transverse
}
fn default_frequency() -> usize {
    1
}
fn default_min_region() -> usize {
    100
}
fn default_warp_amplitude() -> f64 {
    2.5
}
fn default_warp_sigma() -> f64 {
    6.0
}
fn default_break_coverage() -> f64 {
    0.5
}
fn default_break_scale() -> f64 {
    8.0
}
fn default_thickness_sigma() -> f64 {
    0.8
}
fn default_thickness_threshold() -> f64 {
    0.25
}
fn default_boundary_sigma() -> f64 {
    2.0
}

/// Which prompts the simulated user issues, and how scribbles are drawn.
///
/// Defaults: one point per iteration, a ground-truth box at iteration 0 and
/// warped centerline scribbles on every transverse slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptConfig {
    #[serde(default = "default_true")]
    pub use_points: bool,
    /// Points of each polarity per iteration.
    #[serde(default = "default_points")]
    pub points_per_iteration: usize,
    #[serde(default = "default_true")]
    pub use_box: bool,
    #[serde(default = "default_style")]
    pub scribble_style: Option<ScribbleStyle>,
    #[serde(default = "default_axis")]
    pub slice_axis: SliceAxis,
    /// Scribble on every n-th slice of the annotation grid.
    #[serde(default = "default_frequency")]
    pub slice_frequency: usize,
    /// 26-connected error regions smaller than this are ignored.
    #[serde(default = "default_min_region")]
    pub min_region_voxels: usize,
    #[serde(default = "default_warp_amplitude")]
    pub warp_amplitude_px: f64,
    #[serde(default = "default_warp_sigma")]
    pub warp_sigma_px: f64,
    /// Fraction of a stroke kept by the break mask; 1 disables breaking.
    #[serde(default = "default_break_coverage")]
    pub break_coverage: f64,
    #[serde(default = "default_break_scale")]
    pub break_scale_px: f64,
    #[serde(default = "default_thickness_sigma")]
    pub thickness_sigma_px: f64,
    #[serde(default = "default_thickness_threshold")]
    pub thickness_threshold: f64,
    #[serde(default = "default_boundary_sigma")]
    pub boundary_sigma_px: f64,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            use_points: true,
            points_per_iteration: default_points(),
            use_box: true,
            scribble_style: default_style(),
            slice_axis: default_axis(),
            slice_frequency: default_frequency(),
            min_region_voxels: default_min_region(),
            warp_amplitude_px: default_warp_amplitude(),
            warp_sigma_px: default_warp_sigma(),
            break_coverage: default_break_coverage(),
            break_scale_px: default_break_scale(),
            thickness_sigma_px: default_thickness_sigma(),
            thickness_threshold: default_thickness_threshold(),
            boundary_sigma_px: default_boundary_sigma(),
        }
    }
}

impl PromptConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: String| Err(crate::Error::Config(m));
        if self.slice_frequency == 0 {
            return bad("slice_frequency must be >= 1".into());
        }
        if !(self.break_coverage > 0.0 && self.break_coverage <= 1.0) {
            return bad(format!("break_coverage {} must lie in (0, 1]", self.break_coverage));
        }
        if !(self.warp_amplitude_px >= 0.0) {
            return bad(format!("warp_amplitude_px {} must be >= 0", self.warp_amplitude_px));
        }
        for (name, v) in [
            ("warp_sigma_px", self.warp_sigma_px),
            ("break_scale_px", self.break_scale_px),
            ("thickness_sigma_px", self.thickness_sigma_px),
            ("boundary_sigma_px", self.boundary_sigma_px),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be > 0"));
            }
        }
        Ok(())
    }

    /// In-plane Chebyshev radius that bounds how far a warped scribble can
    /// stray from its source region: `ceil(amplitude + 3σ_t)`.
    pub fn warp_dilation_bound(&self) -> usize {
        (self.warp_amplitude_px + 3.0 * self.thickness_sigma_px).ceil() as usize
    }
}
