//! Session driver, phantom subjects, experiment runner and aggregation.

pub mod aggregate;
mod config;
mod experiment;
pub mod phantom;
mod session;

pub use config::{phantom_id, BackendConfig, Dataset, DatasetConfig, ExperimentConfig, Subject};
pub use experiment::{
    aggregate_directory, run_experiment, run_sessions, ExperimentReport, AGGREGATE_ANNOTATED_FILE, AGGREGATE_FILE,
    SESSIONS_FILE, SUMMARY_FILE,
};
pub use phantom::{generate_phantom, Phantom, PhantomSpec, ShadowSpec, Splits};
pub use session::{run_session, IterationRecord, SessionRecord, SessionSettings, StopReason};
