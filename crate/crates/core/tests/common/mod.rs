#![allow(dead_code)]

use std::io::{self, Write};
use std::sync::{Arc, Mutex};

use promptsim::morph::SimRng;
use promptsim::volume::{BinaryMask, Geometry};
use rand::Rng;

/// A writer whose bytes stay readable after it has been moved into a backend.
#[derive(Clone, Default)]
pub struct SharedBuf(pub Arc<Mutex<Vec<u8>>>);

impl SharedBuf {
    pub fn bytes(&self) -> Vec<u8> {
        self.0.lock().unwrap().clone()
    }
}

impl Write for SharedBuf {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Random mask: each voxel on with probability `p`.
pub fn random_mask(geom: Geometry, p: f64, rng: &mut SimRng) -> BinaryMask {
    BinaryMask::from_fn(geom, |_| rng.random_bool(p))
}

/// Union of a few random balls, which gives blob-like masks with real surfaces.
pub fn random_blobs(geom: Geometry, count: usize, rng: &mut SimRng) -> BinaryMask {
    let centers: Vec<([f64; 3], f64)> = (0..count)
        .map(|_| {
            let c = std::array::from_fn(|a| rng.random_range(0.0..geom.dims[a] as f64));
            (c, rng.random_range(1.0..(geom.dims[0].min(geom.dims[1]) as f64 / 3.0).max(1.5)))
        })
        .collect();
    BinaryMask::from_fn(geom, |v| {
        centers.iter().any(|(c, r)| {
            (0..3).map(|a| (v[a] as f64 - c[a]).powi(2)).sum::<f64>() <= r * r
        })
    })
}

pub fn random_spacing(rng: &mut SimRng) -> [f64; 3] {
    std::array::from_fn(|_| rng.random_range(0.5..2.5))
}

pub fn random_dims(rng: &mut SimRng, lo: usize, hi: usize) -> [usize; 3] {
    std::array::from_fn(|_| rng.random_range(lo..=hi))
}
