//! Configuration, offline and online orchestration, persistence and reports.

pub mod artifacts;
pub mod config;
pub mod offline;
pub mod online;
pub mod report;
pub mod verify;

pub use artifacts::{load_artifacts, read_manifest, save_artifacts, Manifest, OfflineArtifacts};
pub use config::{load_config, Config};
pub use offline::run_offline;
pub use online::run_online_sweep;
pub use report::{emit_report, load_records, SweepReport};
pub use verify::{run_verify, VerifyReport};
