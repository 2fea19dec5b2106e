//! Classical baseline: intensity-gated geodesic region growing from positive
//! prompts, with negative prompts acting as barriers.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::backends::{SegmentationRequest, Segmenter};
use crate::error::{Error, Result};
use crate::morph::ball_voxels;
use crate::prompts::Polarity;
use crate::volume::{BinaryMask, Geometry, FACE_OFFSETS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionGrowParams {
    /// Maximum |intensity - seed neighbourhood mean| for a voxel to join.
    pub tolerance: f64,
    /// Geodesic (6-connected path length) cap in mm.
    pub max_geodesic_mm: f64,
    pub barrier_radius_mm: f64,
}

impl Default for RegionGrowParams {
    fn default() -> Self {
        Self {
            tolerance: 1.0,
            max_geodesic_mm: 20.0,
            barrier_radius_mm: 2.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RegionGrowBackend {
    params: RegionGrowParams,
    barrier: Option<BinaryMask>,
}

impl RegionGrowBackend {
    pub fn new(params: RegionGrowParams) -> Self {
        Self { params, barrier: None }
    }

    /// Voxels excluded by every negative prompt seen so far.
    pub fn barrier(&self) -> Option<&BinaryMask> {
        self.barrier.as_ref()
    }
}

/// Mean intensity over the 3×3×3 neighbourhoods of all seeds.
fn seed_mean(values: &[f64], geom: &Geometry, seeds: &[[usize; 3]]) -> f64 {
    let mut seen = vec![false; geom.len()];
    let (mut sum, mut n) = (0.0, 0usize);
    for s in seeds {
        for dk in -1..=1i64 {
            for dj in -1..=1i64 {
                for di in -1..=1i64 {
                    if let Some(v) = geom.checked([s[0] as i64 + di, s[1] as i64 + dj, s[2] as i64 + dk]) {
                        let idx = geom.index(v);
                        if !seen[idx] {
                            seen[idx] = true;
                            sum += values[idx];
                            n += 1;
                        }
                    }
                }
            }
        }
    }
    sum / n as f64
}

/// Dijkstra over face neighbours with edge length = spacing along the step axis.
pub fn geodesic_grow(
    values: &[f64],
    geom: &Geometry,
    seeds: &[[usize; 3]],
    blocked: &BinaryMask,
    params: &RegionGrowParams,
) -> BinaryMask {
    let mut out = BinaryMask::empty(*geom);
    if seeds.is_empty() {
        return out;
    }
    let mean = seed_mean(values, geom, seeds);
    let mut dist = vec![f64::INFINITY; geom.len()];
    // non-negative f64 bit patterns order like the values
    let mut heap = BinaryHeap::new();
    for &s in seeds {
        let idx = geom.index(s);
        if !blocked.get_index(idx) && dist[idx] > 0.0 {
            dist[idx] = 0.0;
            heap.push(Reverse((0f64.to_bits(), idx)));
        }
    }
    while let Some(Reverse((bits, idx))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[idx] || out.get_index(idx) {
            continue;
        }
        out.as_mut_slice()[idx] = true;
        let [i, j, k] = geom.coords(idx);
        for off in FACE_OFFSETS {
            let Some(n) = geom.checked([i as i64 + off[0], j as i64 + off[1], k as i64 + off[2]]) else {
                continue;
            };
            let axis = off.iter().position(|&o| o != 0).unwrap();
            let nd = d + geom.spacing[axis];
            let nidx = geom.index(n);
            if nd > params.max_geodesic_mm + 1e-9
                || nd >= dist[nidx]
                || blocked.get_index(nidx)
                || (values[nidx] - mean).abs() > params.tolerance
            {
                continue;
            }
            dist[nidx] = nd;
            heap.push(Reverse((nd.to_bits(), nidx)));
        }
    }
    out
}

impl Segmenter for RegionGrowBackend {
    fn segment(&mut self, req: &SegmentationRequest<'_>) -> Result<BinaryMask> {
        req.validate()?;
        let geom = *req.geometry();
        let barrier = self.barrier.get_or_insert_with(|| BinaryMask::empty(geom));
        geom.ensure_same(barrier.geometry())?;

        let mut seeds = Vec::new();
        for (v, polarity) in req.prompts.voxels() {
            match polarity {
                Polarity::Positive => seeds.push(v),
                Polarity::Negative => {
                    for u in ball_voxels(&geom, v, self.params.barrier_radius_mm) {
                        barrier.set(u, true);
                    }
                }
            }
        }
        if seeds.is_empty() && req.previous_mask.is_none() {
            return Err(Error::Backend(
                "region growing needs at least one positive prompt on its first call".into(),
            ));
        }
        let values = req.image.to_f64_vec();
        let grown = geodesic_grow(&values, &geom, &seeds, barrier, &self.params);
        let merged = match req.previous_mask {
            Some(prev) => grown.or(prev)?,
            None => grown,
        };
        merged.and_not(barrier)
    }

    fn end_session(&mut self) -> Result<()> {
        self.barrier = None;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::{PointPrompt, PromptSet};
    use crate::volume::VoxelGrid;

    fn points(iteration: usize, pts: &[([usize; 3], Polarity)]) -> PromptSet {
        PromptSet {
            iteration,
            points: pts
                .iter()
                .map(|&(voxel, polarity)| PointPrompt { voxel, polarity })
                .collect(),
            ..PromptSet::default()
        }
    }

    fn req<'a>(image: &'a VoxelGrid, p: &'a PromptSet, prev: Option<&'a BinaryMask>) -> SegmentationRequest<'a> {
        SegmentationRequest {
            image,
            prompts: p,
            previous_mask: prev,
            session_id: "s",
            iteration: p.iteration,
        }
    }

    #[test]
    fn homogeneous_image_gives_geodesic_ball() {
        let g = Geometry::isotropic([21, 21, 21], 1.0).unwrap();
        let image = VoxelGrid::filled(g, 1.0);
        let params = RegionGrowParams {
            tolerance: 0.1,
            max_geodesic_mm: 5.0,
            barrier_radius_mm: 2.0,
        };
        let mut rg = RegionGrowBackend::new(params);
        let p = points(0, &[([10, 10, 10], Polarity::Positive)]);
        let out = rg.segment(&req(&image, &p, None)).unwrap();
        // BFS oracle: 6-connected path length = L1 distance on an open grid
        let expected = BinaryMask::from_fn(g, |[i, j, k]| {
            (i as i64 - 10).abs() + (j as i64 - 10).abs() + (k as i64 - 10).abs() <= 5
        });
        assert_eq!(out, expected);
        assert_eq!(out.count(), 231);
    }

    #[test]
    fn growth_stays_in_intensity_half() {
        let g = Geometry::isotropic([16, 8, 8], 1.0).unwrap();
        let image = VoxelGrid::from_fn(g, |[i, _, _]| if i >= 8 { 1.0 } else { 0.0 });
        let mut rg = RegionGrowBackend::new(RegionGrowParams {
            tolerance: 0.5,
            max_geodesic_mm: 100.0,
            barrier_radius_mm: 1.0,
        });
        let p = points(0, &[([12, 4, 4], Polarity::Positive)]);
        let out = rg.segment(&req(&image, &p, None)).unwrap();
        assert_eq!(out, BinaryMask::from_fn(g, |[i, _, _]| i >= 8));
    }

    #[test]
    fn negative_prompt_carves_ball_from_previous() {
        let g = Geometry::isotropic([16, 16, 16], 1.0).unwrap();
        let image = VoxelGrid::filled(g, 0.0);
        let prev = BinaryMask::from_fn(g, |[i, j, k]| (2..14).contains(&i) && (2..14).contains(&j) && (2..14).contains(&k));
        let mut rg = RegionGrowBackend::new(RegionGrowParams::default());
        let p = points(1, &[([8, 8, 8], Polarity::Negative)]);
        let out = rg.segment(&req(&image, &p, Some(&prev))).unwrap();
        let ball = BinaryMask::from_voxels(g, ball_voxels(&g, [8, 8, 8], 2.0));
        assert_eq!(out, prev.and_not(&ball).unwrap());
        // the barrier persists: regrowing through it later is impossible
        let p2 = points(2, &[([8, 8, 11], Polarity::Positive)]);
        let out2 = rg.segment(&req(&image, &p2, Some(&out))).unwrap();
        assert_eq!(out2.and(&ball).unwrap().count(), 0);
    }

    #[test]
    fn first_call_without_seed_fails() {
        let g = Geometry::isotropic([4, 4, 4], 1.0).unwrap();
        let image = VoxelGrid::filled(g, 0.0);
        let p = points(0, &[]);
        let mut rg = RegionGrowBackend::new(RegionGrowParams::default());
        assert!(matches!(rg.segment(&req(&image, &p, None)), Err(Error::Backend(_))));
    }
}
