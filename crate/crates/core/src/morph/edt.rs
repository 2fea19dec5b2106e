//! Exact Euclidean distance transform by separable lower envelopes of
//! parabolas, with per-axis spacing.

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Geometry};

/// Distance (mm) from every voxel center to the nearest foreground voxel center.
#[derive(Clone, Debug)]
pub struct DistanceField {
    pub geom: Geometry,
    pub values: Vec<f64>,
}

impl DistanceField {
    pub fn at(&self, v: [usize; 3]) -> f64 {
        self.values[self.geom.index(v)]
    }
}

/// One-dimensional squared-distance transform of `f` sampled every `step` mm.
///
/// Infinite entries are points with no foreground seen yet; they never join
/// the envelope. Writes into `out`; `v` and `z` are scratch buffers.
fn envelope_1d(f: &[f64], step: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    let pos = |q: usize| q as f64 * step;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let Some(&last) = v.last() else {
                v.push(q);
                z.push(f64::NEG_INFINITY);
                break;
            };
            let s = ((f[q] + pos(q) * pos(q)) - (f[last] + pos(last) * pos(last))) / (2.0 * (pos(q) - pos(last)));
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z.push(s);
                break;
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < pos(q) {
            k += 1;
        }
        let d = (q as f64 - v[k] as f64) * step;
        *o = f[v[k]] + d * d;
    }
}

/// Squared distances (mm²) to the nearest foreground voxel.
pub fn edt_squared(mask: &BinaryMask) -> Result<Vec<f64>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask("distance transform needs a foreground voxel"));
    }
    let geom = *mask.geometry();
    let dims = geom.dims;
    let mut grid: Vec<f64> = mask
        .as_slice()
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();

    let (mut v, mut z) = (Vec::new(), Vec::new());
    for axis in 0..3 {
        let n = dims[axis];
        let stride: usize = dims[..axis].iter().product();
        let outer: usize = dims[axis + 1..].iter().product();
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * stride * n + inner;
                for t in 0..n {
                    line[t] = grid[base + t * stride];
                }
                envelope_1d(&line, geom.spacing[axis], &mut out, &mut v, &mut z);
                for t in 0..n {
                    grid[base + t * stride] = out[t];
                }
            }
        }
    }
    Ok(grid)
}

pub fn edt_3d(mask: &BinaryMask) -> Result<DistanceField> {
    let values = edt_squared(mask)?.into_iter().map(f64::sqrt).collect();
    Ok(DistanceField {
        geom: *mask.geometry(),
        values,
    })
}
