//! End-to-end orchestration: ingest, derive, impute, fit, filter, pool and
//! report, plus the simulation, recovery and goodness-of-fit drivers.

mod forest;
mod format;
mod manifest;
mod recovery;
mod report;
mod run;
mod simulate;

pub use forest::{forest_rows, render_forest, render_svg, ForestRow, FOREST_HEADER};
pub use format::{format_cell, format_sig3};
pub use manifest::{ImputationConfig, Manifest, NetworkType};
pub use recovery::{default_theta, recovery_study, RecoveryConfig, RecoveryReport, TermRecovery, SMALL_POOL};
pub use report::{group_label, ReportRow, ReportTable};
pub use run::{gof_network, run, ExclusionRecord, PooledFile, PooledTerm, RunOptions, RunOutcome, FITS_HEADER};
pub use simulate::{edges_file_name, simulate, simulate_batch, simulate_networks, simulate_rosters, SimulateConfig, SimulationSampler};

/// Process exit statuses of the command-line driver.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const EMPTY_POOL: i32 = 3;
    pub const STRICT_WARNINGS: i32 = 4;
}
