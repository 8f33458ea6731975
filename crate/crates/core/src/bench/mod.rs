//! Experiment matrix runner, statistics and reports.

mod config;
mod report;
mod runner;
mod stats;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

pub use config::{architecture_label, Condition, ExperimentConfig};
pub use report::{
    add_avg_rows, emit_report, errors_csv, markdown, parse_csv, plotdata, timing_csv, EpochCurve, Report, ReportFormat,
    ReportRow, AVG_LABEL, WHISKER_NOTE,
};
pub use runner::{
    cells, collect_report, load_trials, persist_trial, prepare_data, run_matrix, run_trial, split_key, topology_for,
    trial_key, Cell, RunOptions, StoredTrial, CONFIG_FILE, FAILED_MARKER,
};
pub use stats::{aggregate, summarize, TrialStats};

use crate::error::{Error, Result};

/// Writes `bytes` to a temporary sibling and renames it over `path`, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(
        ".{name}.{}.{}.tmp",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
