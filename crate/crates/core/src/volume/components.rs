use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::volume::grid::{BinaryMask, Geometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// Face neighbours.
    Six,
    /// Face, edge and corner neighbours.
    TwentySix,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [[i64; 3]] {
        match self {
            Connectivity::Six => &FACE_OFFSETS,
            Connectivity::TwentySix => &FULL_OFFSETS,
        }
    }
}

pub const FACE_OFFSETS: [[i64; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

const FULL_OFFSETS: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

/// Connected-component labelling result. Label 0 is background; component
/// `k` (1-based) has `sizes[k - 1]` voxels.
#[derive(Clone, Debug)]
pub struct Components {
    pub geom: Geometry,
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, label: u32) -> usize {
        self.sizes[label as usize - 1]
    }

    pub fn label_at(&self, v: [usize; 3]) -> u32 {
        self.labels[self.geom.index(v)]
    }

    pub fn mask_of(&self, label: u32) -> BinaryMask {
        let data = self.labels.iter().map(|&l| l == label).collect();
        BinaryMask::from_vec(self.geom, data).expect("labels share geometry")
    }

    /// Label of the largest component; ties go to the lower label.
    pub fn largest(&self) -> Option<u32> {
        let mut best: Option<(usize, u32)> = None;
        for (i, &s) in self.sizes.iter().enumerate() {
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, i as u32 + 1));
            }
        }
        best.map(|(_, l)| l)
    }
}

/// Labels foreground components in first-encounter (flat index) scan order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Components {
    let geom = *mask.geometry();
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; geom.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in mask.iter_indices() {
        if labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(idx) = queue.pop_front() {
            size += 1;
            let [i, j, k] = geom.coords(idx);
            for d in offsets {
                let Some(n) = geom.checked([i as i64 + d[0], j as i64 + d[1], k as i64 + d[2]]) else {
                    continue;
                };
                let nidx = geom.index(n);
                if labels[nidx] == 0 && mask.get_index(nidx) {
                    labels[nidx] = label;
                    queue.push_back(nidx);
                }
            }
        }
        sizes.push(size);
    }
    Components { geom, labels, sizes }
}
