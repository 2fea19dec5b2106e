use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backends::bridge::{BridgeBackend, Transport};
use crate::backends::{
    DilationBackend, OracleBackend, RegionGrowBackend, RegionGrowParams, ReplayBackend, Segmenter,
    DEFAULT_REPAIR_RADIUS_MM,
};
use crate::error::{Error, Result};
use crate::harness::phantom::{generate_phantom, PhantomSpec};
use crate::metrics::DEFAULT_NSD_TOLERANCE_MM;
use crate::morph::derive_seed;
use crate::prompts::PromptConfig;
use crate::volume::{preprocess_subject, read_mask, read_volume, BinaryMask, VoxelGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Generate subjects on the fly.
    Phantom {
        #[serde(default)]
        spec: PhantomSpec,
        #[serde(default = "default_split")]
        split: String,
    },
    /// `images/<id>.nii` and `labels/<id>.nii` (or `.vgh`) under `path`.
    Directory {
        path: PathBuf,
        /// Resample to this isotropic spacing and normalize intensities.
        #[serde(default)]
        preprocess_mm: Option<f64>,
    },
}

fn default_split() -> String {
    "test".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Oracle {
        #[serde(default = "default_repair_radius")]
        repair_radius_mm: f64,
    },
    RegionGrow {
        #[serde(default)]
        params: RegionGrowParams,
    },
    /// Stored predictions under `<directory>/<subject>/iter_<k>.nii`.
    Replay { directory: PathBuf },
    Dilation {
        #[serde(default = "default_dilation_radius")]
        radius_mm: f64,
    },
    Bridge { transport: Transport },
}

fn default_repair_radius() -> f64 {
    DEFAULT_REPAIR_RADIUS_MM
}
fn default_dilation_radius() -> f64 {
    2.0
}

fn default_iterations() -> usize {
    11
}
fn default_success_dice() -> f64 {
    0.95
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_workers() -> usize {
    1
}
fn default_tolerance() -> f64 {
    DEFAULT_NSD_TOLERANCE_MM
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub backend: BackendConfig,
    #[serde(default)]
    pub prompts: PromptConfig,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_success_dice")]
    pub success_dice: f64,
    #[serde(default)]
    pub early_stop: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub nsd_tolerance_mm: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Sessions run concurrently; 0 uses every core.
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Adds per-iteration wall time to the records, which makes them
    /// differ between runs.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if !(self.success_dice > 0.0 && self.success_dice <= 1.0) {
            return Err(Error::Config(format!("success_dice {} must lie in (0, 1]", self.success_dice)));
        }
        if !(self.nsd_tolerance_mm >= 0.0 && self.nsd_tolerance_mm.is_finite()) {
            return Err(Error::Config(format!("nsd_tolerance_mm {} must be >= 0", self.nsd_tolerance_mm)));
        }
        self.prompts.validate()?;
        match &self.dataset {
            DatasetConfig::Phantom { spec, split } => {
                spec.validate()?;
                if spec.splits.indices(split).is_none() {
                    return Err(Error::Config(format!("unknown split {split:?}; use train, val or test")));
                }
            }
            DatasetConfig::Directory { preprocess_mm, .. } => {
                if preprocess_mm.is_some_and(|mm| !(mm > 0.0 && mm.is_finite())) {
                    return Err(Error::Config("preprocess_mm must be > 0".into()));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the settings that determine results. Output location,
    /// worker count and timing do not enter the hash.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = PathBuf::new();
        canonical.workers = 0;
        canonical.record_wall_time = false;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// A fresh backend for one session.
    pub fn build_backend(&self, subject: &Subject) -> Result<Box<dyn Segmenter>> {
        Ok(match &self.backend {
            BackendConfig::Oracle { repair_radius_mm } => {
                let seed = derive_seed(self.seed, &[ORACLE_STREAM, subject.index as u64]);
                Box::new(OracleBackend::new(subject.gt.clone(), seed, *repair_radius_mm)?)
            }
            BackendConfig::RegionGrow { params } => Box::new(RegionGrowBackend::new(params.clone())),
            BackendConfig::Replay { directory } => Box::new(ReplayBackend::new(directory.join(&subject.id))),
            BackendConfig::Dilation { radius_mm } => Box::new(DilationBackend::new(*radius_mm)),
            BackendConfig::Bridge { transport } => Box::new(BridgeBackend::connect(transport)?),
        })
    }
}

/// Substream tags keeping the oracle's corruption independent of the prompts.
pub(crate) const ORACLE_STREAM: u64 = 0x6f72_6163;
pub(crate) const PROMPT_STREAM: u64 = 0x7072_6f6d;

#[derive(Clone, Debug)]
pub struct Subject {
    pub index: usize,
    pub id: String,
    pub image: VoxelGrid,
    pub gt: BinaryMask,
}

/// The subjects of a dataset, loaded one at a time.
#[derive(Clone, Debug)]
pub enum Dataset {
    Phantom { spec: PhantomSpec, indices: Vec<usize> },
    Directory { path: PathBuf, ids: Vec<String>, preprocess_mm: Option<f64> },
}

pub fn phantom_id(index: usize) -> String {
    format!("phantom_{index:03}")
}

fn find_volume(dir: &Path, id: &str) -> Option<PathBuf> {
    ["nii", "vgh"].iter().map(|e| dir.join(format!("{id}.{e}"))).find(|p| p.exists())
}

impl Dataset {
    pub fn open(cfg: &DatasetConfig) -> Result<Self> {
        match cfg {
            DatasetConfig::Phantom { spec, split } => {
                let range = spec
                    .splits
                    .indices(split)
                    .ok_or_else(|| Error::Config(format!("unknown split {split:?}")))?;
                Ok(Dataset::Phantom {
                    spec: spec.clone(),
                    indices: range.collect(),
                })
            }
            DatasetConfig::Directory { path, preprocess_mm } => {
                let images = path.join("images");
                let entries = fs::read_dir(&images).map_err(|e| Error::io(&images, e))?;
                let mut ids = Vec::new();
                for entry in entries {
                    let p = entry.map_err(|e| Error::io(&images, e))?.path();
                    match (p.file_stem(), p.extension().and_then(|e| e.to_str())) {
                        (Some(stem), Some("nii" | "vgh")) => ids.push(stem.to_string_lossy().into_owned()),
                        _ => {}
                    }
                }
                ids.sort();
                ids.dedup();
                if ids.is_empty() {
                    return Err(Error::Config(format!("no volumes in {}", images.display())));
                }
                Ok(Dataset::Directory {
                    path: path.clone(),
                    ids,
                    preprocess_mm: *preprocess_mm,
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Phantom { indices, .. } => indices.len(),
            Dataset::Directory { ids, .. } => ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn id(&self, n: usize) -> String {
        match self {
            Dataset::Phantom { indices, .. } => phantom_id(indices[n]),
            Dataset::Directory { ids, .. } => ids[n].clone(),
        }
    }

    /// Loads subject `n` (0-based position within the dataset).
    pub fn load(&self, n: usize) -> Result<Subject> {
        match self {
            Dataset::Phantom { spec, indices } => {
                let p = generate_phantom(spec, indices[n])?;
                Ok(Subject {
                    index: indices[n],
                    id: phantom_id(indices[n]),
                    image: p.image,
                    gt: p.gt,
                })
            }
            Dataset::Directory {
                path,
                ids,
                preprocess_mm,
            } => {
                let id = &ids[n];
                let missing = |kind: &str| Error::Config(format!("{kind} for subject {id} not found under {}", path.display()));
                let image = read_volume(find_volume(&path.join("images"), id).ok_or_else(|| missing("image"))?)?;
                let gt = read_mask(find_volume(&path.join("labels"), id).ok_or_else(|| missing("label"))?)?;
                image.geometry().ensure_same(gt.geometry())?;
                let (image, gt) = match preprocess_mm {
                    Some(mm) => preprocess_subject(&image, &gt, *mm)?,
                    None => (image, gt),
                };
                Ok(Subject {
                    index: n,
                    id: id.clone(),
                    image,
                    gt,
                })
            }
        }
    }
}
