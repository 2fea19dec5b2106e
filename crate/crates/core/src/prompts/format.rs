//! Line-oriented serialization of prompt sets.
//!
//! One JSON object per line, one line per prompt element, in the order
//! points, box, scribbles:
//!
//! ```text
//! {"iteration":1,"kind":"point","polarity":"negative","axis":null,"slice":null,"style":null,"voxels":[[4,5,6]]}
//! {"iteration":0,"kind":"box","polarity":"positive","axis":null,"slice":null,"style":null,"voxels":[[1,1,3],[4,2,8]]}
//! {"iteration":0,"kind":"scribble","polarity":"positive","axis":"transverse","slice":7,"style":"warped_centerline","voxels":[[3,4,7],[4,4,7]]}
//! ```
//!
//! Box records carry `[corner_min, corner_max]`. Field order is fixed, so the
//! same prompt set always serializes to the same bytes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompts::types::{BoxPrompt, PointPrompt, Polarity, PromptSet, Scribble, ScribbleStyle};
use crate::volume::SliceAxis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Point,
    Box,
    Scribble,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptRecord {
    pub iteration: usize,
    pub kind: PromptKind,
    pub polarity: Polarity,
    pub axis: Option<SliceAxis>,
    pub slice: Option<usize>,
    pub style: Option<ScribbleStyle>,
    pub voxels: Vec<[usize; 3]>,
}

impl PromptSet {
    pub fn records(&self) -> Vec<PromptRecord> {
        let it = self.iteration;
        let mut out: Vec<PromptRecord> = self
            .points
            .iter()
            .map(|p| PromptRecord {
                iteration: it,
                kind: PromptKind::Point,
                polarity: p.polarity,
                axis: None,
                slice: None,
                style: None,
                voxels: vec![p.voxel],
            })
            .collect();
        if let Some(b) = &self.bbox {
            out.push(PromptRecord {
                iteration: it,
                kind: PromptKind::Box,
                polarity: Polarity::Positive,
                axis: None,
                slice: None,
                style: None,
                voxels: vec![b.corner_min, b.corner_max],
            });
        }
        out.extend(self.scribbles.iter().map(|s| PromptRecord {
            iteration: it,
            kind: PromptKind::Scribble,
            polarity: s.polarity,
            axis: Some(s.axis),
            slice: Some(s.slice_index),
            style: Some(s.style),
            voxels: s.voxels.clone(),
        }));
        out
    }

    pub fn to_ndjson(&self) -> String {
        let mut s = String::new();
        for r in self.records() {
            s.push_str(&serde_json::to_string(&r).expect("records serialize"));
            s.push('\n');
        }
        s
    }

    /// Parses NDJSON records; every record must belong to `iteration`.
    pub fn from_ndjson(text: &str, iteration: usize) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: PromptRecord = serde_json::from_str(line)
                .map_err(|e| Error::PromptFormat(format!("line {}: {e}", n + 1)))?;
            records.push(r);
        }
        Self::from_records(records, iteration)
    }

    /// Rebuilds a prompt set from its records; every record must belong to `iteration`.
    pub fn from_records(records: impl IntoIterator<Item = PromptRecord>, iteration: usize) -> Result<Self> {
        let mut set = PromptSet::new(iteration);
        for (n, r) in records.into_iter().enumerate() {
            let bad = |m: String| Error::PromptFormat(format!("record {}: {m}", n + 1));
            if r.iteration != iteration {
                return Err(bad(format!("iteration {} in a set for iteration {iteration}", r.iteration)));
            }
            match r.kind {
                PromptKind::Point => {
                    let [voxel] = r.voxels[..] else {
                        return Err(bad("point needs exactly one voxel".into()));
                    };
                    set.points.push(PointPrompt {
                        voxel,
                        polarity: r.polarity,
                    });
                }
                PromptKind::Box => {
                    let [corner_min, corner_max] = r.voxels[..] else {
                        return Err(bad("box needs exactly two corners".into()));
                    };
                    if set.bbox.is_some() {
                        return Err(bad("more than one box".into()));
                    }
                    if (0..3).any(|a| corner_min[a] > corner_max[a]) {
                        return Err(bad("box corners out of order".into()));
                    }
                    set.bbox = Some(BoxPrompt { corner_min, corner_max });
                }
                PromptKind::Scribble => {
                    let (Some(axis), Some(slice_index), Some(style)) = (r.axis, r.slice, r.style) else {
                        return Err(bad("scribble needs axis, slice and style".into()));
                    };
                    if r.voxels.is_empty() {
                        return Err(bad("scribble has no voxels".into()));
                    }
                    if r.voxels.iter().any(|v| v[axis.normal()] != slice_index) {
                        return Err(bad(format!("scribble voxel outside {axis} slice {slice_index}")));
                    }
                    set.scribbles.push(Scribble {
                        voxels: r.voxels,
                        polarity: r.polarity,
                        axis,
                        slice_index,
                        style,
                    });
                }
            }
        }
        Ok(set)
    }

    /// One CSV row per prompted voxel: `iteration,kind,polarity,axis,slice,style,i,j,k`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,kind,polarity,axis,slice,style,i,j,k\n");
        for r in self.records() {
            let kind = match r.kind {
                PromptKind::Point => "point",
                PromptKind::Box => "box",
                PromptKind::Scribble => "scribble",
            };
            let axis = r.axis.map(|a| a.name()).unwrap_or("");
            let slice = r.slice.map(|v| v.to_string()).unwrap_or_default();
            let style = r.style.map(|v| v.name()).unwrap_or("");
            for [i, j, k] in &r.voxels {
                s.push_str(&format!(
                    "{},{kind},{},{axis},{slice},{style},{i},{j},{k}\n",
                    r.iteration,
                    r.polarity.name()
                ));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> PromptSet {
        PromptSet {
            iteration: 0,
            points: vec![PointPrompt {
                voxel: [1, 2, 3],
                polarity: Polarity::Positive,
            }],
            bbox: Some(BoxPrompt {
                corner_min: [0, 0, 0],
                corner_max: [4, 5, 6],
            }),
            scribbles: vec![Scribble {
                voxels: vec![[1, 1, 2], [2, 1, 2]],
                polarity: Polarity::Positive,
                axis: SliceAxis::Transverse,
                slice_index: 2,
                style: ScribbleStyle::WarpedCenterline,
            }],
        }
    }

    #[test]
    fn documented_layout() {
        let text = sample_set().to_ndjson();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            r#"{"iteration":0,"kind":"point","polarity":"positive","axis":null,"slice":null,"style":null,"voxels":[[1,2,3]]}"#
        );
        assert_eq!(
            lines[2],
            r#"{"iteration":0,"kind":"scribble","polarity":"positive","axis":"transverse","slice":2,"style":"warped_centerline","voxels":[[1,1,2],[2,1,2]]}"#
        );
        assert_eq!(PromptSet::from_ndjson(&text, 0).unwrap(), sample_set());
    }

    #[test]
    fn rejects_inconsistent_records() {
        let off_slice = r#"{"iteration":0,"kind":"scribble","polarity":"positive","axis":"transverse","slice":2,"style":"centerline","voxels":[[1,1,3]]}"#;
        assert!(PromptSet::from_ndjson(off_slice, 0).is_err());
        let text = sample_set().to_ndjson();
        assert!(PromptSet::from_ndjson(&text, 1).is_err());
        let two_voxel_point = r#"{"iteration":0,"kind":"point","polarity":"positive","axis":null,"slice":null,"style":null,"voxels":[[1,2,3],[1,2,4]]}"#;
        assert!(PromptSet::from_ndjson(two_voxel_point, 0).is_err());
    }

    #[test]
    fn csv_one_row_per_voxel() {
        let csv = sample_set().to_csv();
        assert_eq!(csv.lines().count(), 1 + 1 + 2 + 2);
        assert!(csv.contains("0,scribble,positive,transverse,2,warped_centerline,2,1,2"));
    }
}
