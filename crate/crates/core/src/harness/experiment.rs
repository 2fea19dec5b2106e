use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::aggregate::{
    aggregate, aggregate_csv, records_from_ndjson, records_to_ndjson, summarize, summary_csv, Scope, Summary,
};
use crate::harness::config::{Dataset, ExperimentConfig, PROMPT_STREAM};
use crate::harness::session::{run_session, SessionRecord, SessionSettings, StopReason};
use crate::morph::derive_seed;

pub const SESSIONS_FILE: &str = "sessions.ndjson";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const AGGREGATE_ANNOTATED_FILE: &str = "aggregate_annotated.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub output: PathBuf,
    pub records: Vec<SessionRecord>,
    pub summary: Summary,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.summary.failed
    }
}

impl ExperimentConfig {
    pub fn session_settings(&self) -> SessionSettings {
        SessionSettings {
            prompts: self.prompts.clone(),
            iterations: self.iterations,
            success_dice: self.success_dice,
            early_stop: self.early_stop,
            nsd_tolerance_mm: self.nsd_tolerance_mm,
            record_wall_time: self.record_wall_time,
            config_hash: self.config_hash(),
        }
    }
}

fn failed_record(subject: String, settings: &SessionSettings, error: &Error) -> SessionRecord {
    log::warn!("session {subject}: {error}");
    SessionRecord {
        subject,
        config_hash: settings.config_hash.clone(),
        iterations: Vec::new(),
        success: false,
        stop: StopReason::Failed,
        error: Some(error.to_string()),
    }
}

/// Runs every session of the dataset; a failing session is recorded and the
/// rest continue. Records come back in dataset order whatever the worker count.
pub fn run_sessions(cfg: &ExperimentConfig) -> Result<Vec<SessionRecord>> {
    cfg.validate()?;
    let dataset = Dataset::open(&cfg.dataset)?;
    let settings = cfg.session_settings();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let one = |n: usize| -> SessionRecord {
        let subject = match dataset.load(n) {
            Ok(s) => s,
            Err(e) => return failed_record(dataset.id(n), &settings, &e),
        };
        let seed = derive_seed(cfg.seed, &[PROMPT_STREAM, subject.index as u64]);
        let outcome = cfg
            .build_backend(&subject)
            .and_then(|mut backend| run_session(&subject.id, &subject.image, &subject.gt, backend.as_mut(), &settings, seed));
        match outcome {
            Ok(rec) => {
                log::info!(
                    "session {}: {} iterations, final Dice {:.4}",
                    rec.subject,
                    rec.iterations.len(),
                    rec.final_metrics().map_or(f64::NAN, |m| m.dice)
                );
                rec
            }
            Err(e) => failed_record(subject.id, &settings, &e),
        }
    };
    Ok(pool.install(|| (0..dataset.len()).into_par_iter().map(one).collect()))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Writes the aggregate tables for records already saved in `dir`.
pub fn aggregate_directory(dir: &Path, iterations: usize, annotated: bool) -> Result<Summary> {
    let path = dir.join(SESSIONS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let records = records_from_ndjson(&text)?;
    write(dir, AGGREGATE_FILE, &aggregate_csv(&aggregate(&records, iterations, Scope::WholeVolume)))?;
    if annotated {
        write(
            dir,
            AGGREGATE_ANNOTATED_FILE,
            &aggregate_csv(&aggregate(&records, iterations, Scope::AnnotatedSlices)),
        )?;
    }
    let summary = summarize(&records, iterations);
    write(dir, SUMMARY_FILE, &summary_csv(&summary))?;
    Ok(summary)
}

/// Runs the experiment and writes `sessions.ndjson`, `aggregate.csv`,
/// `summary.csv` and, for sparse scribbling, `aggregate_annotated.csv` into
/// `cfg.output`. Tables are computed from the written records.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let records = run_sessions(cfg)?;
    let dir = &cfg.output;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, SESSIONS_FILE, &records_to_ndjson(&records))?;
    let summary = aggregate_directory(dir, cfg.iterations, cfg.prompts.slice_frequency > 1)?;
    Ok(ExperimentReport {
        output: dir.clone(),
        records,
        summary,
    })
}
