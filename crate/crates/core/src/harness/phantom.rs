//! Synthetic subjects: a smooth, randomly deformed multi-lobe blob inside a
//! speckled two-level image, optionally darkened by an acoustic-style shadow.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morph::{gaussian_blur_3d, SimRng};
use crate::volume::{connected_components, BinaryMask, Connectivity, Geometry, VoxelGrid};

pub const INSIDE_INTENSITY: f64 = 0.7;
pub const OUTSIDE_INTENSITY: f64 = 0.3;
pub const OCCUPANCY_RANGE: (f64, f64) = (0.02, 0.20);
const MAX_ATTEMPTS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowSpec {
    /// Axis the shadow falls along (0 = x, 1 = y, 2 = z).
    pub axis: usize,
    /// Intensity factor lost at the far end of the ramp, in [0, 1].
    pub attenuation: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Splits {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    /// Phantom indices belonging to `name` (`train`, `val` or `test`).
    pub fn indices(&self, name: &str) -> Option<std::ops::Range<usize>> {
        match name {
            "train" => Some(0..self.train),
            "val" => Some(self.train..self.train + self.val),
            "test" => Some(self.train + self.val..self.total()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    /// Radii of the main ellipsoid before jitter.
    pub radii_mm: [f64; 3],
    /// Relative jitter applied to each radius, e.g. 0.2 for ±20%.
    pub radius_jitter: f64,
    /// Number of ellipsoidal lobes, the main one included.
    pub lobes: usize,
    /// Largest displacement of the smooth random deformation.
    pub deformation_mm: f64,
    pub deformation_sigma_mm: f64,
    /// Blur applied to the deformed indicator before thresholding at 0.5.
    pub smoothing_mm: f64,
    /// σ of the log-normal multiplicative speckle; 0 disables it.
    pub speckle_sigma: f64,
    /// Image blur; 0 disables it.
    pub image_blur_mm: f64,
    pub shadow: Option<ShadowSpec>,
    pub splits: Splits,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: [64, 64, 64],
            spacing: [1.0; 3],
            radii_mm: [14.0, 11.0, 9.0],
            radius_jitter: 0.2,
            lobes: 2,
            deformation_mm: 3.0,
            deformation_sigma_mm: 6.0,
            smoothing_mm: 1.5,
            speckle_sigma: 0.15,
            image_blur_mm: 0.8,
            shadow: Some(ShadowSpec {
                axis: 1,
                attenuation: 0.4,
            }),
            splits: Splits {
                train: 0,
                val: 0,
                test: 20,
            },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub image: VoxelGrid,
    pub gt: BinaryMask,
}

#[derive(Clone, Copy, Debug)]
struct Ellipsoid {
    center: [f64; 3],
    radii: [f64; 3],
}

impl Ellipsoid {
    fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).map(|a| ((p[a] - self.center[a]) / self.radii[a]).powi(2)).sum::<f64>() <= 1.0
    }
}

fn sigma_voxels(mm: f64, spacing: [f64; 3]) -> [f64; 3] {
    [mm / spacing[0], mm / spacing[1], mm / spacing[2]]
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("phantom: {m}")));
        Geometry::new(self.dims, self.spacing)?;
        if self.radii_mm.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return bad(format!("radii_mm {:?} must be positive", self.radii_mm));
        }
        if !(0.0..1.0).contains(&self.radius_jitter) {
            return bad(format!("radius_jitter {} must lie in [0, 1)", self.radius_jitter));
        }
        if self.lobes == 0 {
            return bad("lobes must be >= 1".into());
        }
        for (name, v) in [
            ("deformation_mm", self.deformation_mm),
            ("speckle_sigma", self.speckle_sigma),
            ("image_blur_mm", self.image_blur_mm),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be >= 0"));
            }
        }
        for (name, v) in [
            ("deformation_sigma_mm", self.deformation_sigma_mm),
            ("smoothing_mm", self.smoothing_mm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be > 0"));
            }
        }
        if let Some(s) = &self.shadow {
            if s.axis > 2 || !(0.0..=1.0).contains(&s.attenuation) {
                return bad(format!("shadow axis {} / attenuation {} out of range", s.axis, s.attenuation));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.dims, self.spacing)
    }

    fn lobes_for(&self, rng: &mut SimRng) -> Vec<Ellipsoid> {
        let geom_extent: [f64; 3] = std::array::from_fn(|a| (self.dims[a] - 1) as f64 * self.spacing[a]);
        let jitter = |rng: &mut SimRng, r: f64| r * (1.0 + rng.random_range(-1.0..=1.0) * self.radius_jitter);
        let center: [f64; 3] = std::array::from_fn(|a| geom_extent[a] * (0.5 + rng.random_range(-0.05..=0.05)));
        let main = Ellipsoid {
            center,
            radii: std::array::from_fn(|a| jitter(rng, self.radii_mm[a])),
        };
        let mut lobes = vec![main];
        for _ in 1..self.lobes {
            // random direction, offset to about the main surface
            let dir: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-9);
            let scale = rng.random_range(0.45..0.65);
            lobes.push(Ellipsoid {
                center: std::array::from_fn(|a| main.center[a] + 0.7 * main.radii[a] * dir[a] / norm),
                radii: std::array::from_fn(|a| jitter(rng, scale * self.radii_mm[a])),
            });
        }
        lobes
    }

    /// Smooth random displacement field in mm, one component per axis.
    fn deformation(&self, geom: &Geometry, rng: &mut SimRng) -> [Vec<f64>; 3] {
        let zero = || vec![0.0; geom.len()];
        if self.deformation_mm == 0.0 {
            return [zero(), zero(), zero()];
        }
        let sigma = sigma_voxels(self.deformation_sigma_mm, self.spacing);
        let mut field: [Vec<f64>; 3] = std::array::from_fn(|_| {
            let noise: Vec<f64> = (0..geom.len()).map(|_| StandardNormal.sample(rng)).collect();
            gaussian_blur_3d(&noise, self.dims, sigma)
        });
        let max = (0..geom.len())
            .map(|i| (0..3).map(|a| field[a][i].powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if max > 0.0 {
            let s = self.deformation_mm / max;
            field.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v *= s));
        }
        field
    }

    fn ground_truth(&self, geom: &Geometry, rng: &mut SimRng) -> Result<BinaryMask> {
        let lobes = self.lobes_for(rng);
        let field = self.deformation(geom, rng);
        let indicator: Vec<f64> = (0..geom.len())
            .map(|i| {
                let v = geom.coords(i);
                let p: [f64; 3] = std::array::from_fn(|a| v[a] as f64 * self.spacing[a] + field[a][i]);
                lobes.iter().any(|e| e.contains(p)) as u8 as f64
            })
            .collect();
        let smooth = gaussian_blur_3d(&indicator, self.dims, sigma_voxels(self.smoothing_mm, self.spacing));
        let mask = BinaryMask::from_vec(*geom, smooth.iter().map(|&v| v >= 0.5).collect())?;
        let comps = connected_components(&mask, Connectivity::TwentySix);
        Ok(match comps.largest() {
            Some(l) => comps.mask_of(l),
            None => mask,
        })
    }

    fn image_for(&self, gt: &BinaryMask, rng: &mut SimRng) -> Result<VoxelGrid> {
        let geom = *gt.geometry();
        let mut values: Vec<f64> = gt
            .as_slice()
            .iter()
            .map(|&inside| if inside { INSIDE_INTENSITY } else { OUTSIDE_INTENSITY })
            .collect();
        if self.speckle_sigma > 0.0 {
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            for v in &mut values {
                let z: f64 = normal.sample(rng);
                *v *= (self.speckle_sigma * z.clamp(-3.0, 3.0)).exp();
            }
        }
        if let Some(shadow) = &self.shadow {
            let n = self.dims[shadow.axis];
            let depth = rng.random_range(0.3..0.7) * n as f64;
            let span = (n as f64 - depth).max(1.0);
            for (i, v) in values.iter_mut().enumerate() {
                let pos = geom.coords(i)[shadow.axis] as f64;
                if pos > depth {
                    *v *= 1.0 - shadow.attenuation * ((pos - depth) / span).min(1.0);
                }
            }
        }
        if self.image_blur_mm > 0.0 {
            values = gaussian_blur_3d(&values, self.dims, sigma_voxels(self.image_blur_mm, self.spacing));
        }
        VoxelGrid::from_f32(geom, values.into_iter().map(|v| v as f32).collect())
    }
}

/// Phantom number `index` of `spec`; the same `(spec, index)` always gives
/// the same pair. Retries with fresh randomness until the ground truth is a
/// single component covering 2–20% of the volume.
pub fn generate_phantom(spec: &PhantomSpec, index: usize) -> Result<Phantom> {
    spec.validate()?;
    let geom = spec.geometry()?;
    let (lo, hi) = OCCUPANCY_RANGE;
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let stream = |k: u64| SimRng::substream(spec.seed, &[index as u64, attempt as u64, k]);
        let gt = spec.ground_truth(&geom, &mut stream(0))?;
        let occupancy = gt.count() as f64 / geom.len() as f64;
        if (lo..=hi).contains(&occupancy) {
            let image = spec.image_for(&gt, &mut stream(1))?;
            return Ok(Phantom { image, gt });
        }
        last = format!("occupancy {occupancy:.4} outside [{lo}, {hi}]");
        log::debug!("phantom {index} attempt {attempt}: {last}");
    }
    Err(Error::Phantom {
        attempts: MAX_ATTEMPTS,
        reason: last,
    })
}
