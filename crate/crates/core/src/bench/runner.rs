//! Condition-matrix execution with per-trial persistence.
//!
//! Layout of an output directory:
//!
//! ```text
//! config.toml                      resolved configuration of the run
//! trials/<cell>/trial-NNNN.csv     one summary row per finished trial
//! trials/<cell>/history-NNNN.csv   per-epoch errors and timing
//! FAILED                           present if the last run stopped on an error
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use super::config::{architecture_label, Condition, ExperimentConfig};
use super::report::{add_avg_rows, emit_report, EpochCurve, Report, ReportFormat, ReportRow};
use super::stats::{aggregate, mean};
use super::write_atomic;
use crate::data::{normalize, split, Dataset, LoadedDataset, Manifest, SplitSpec};
use crate::error::{Error, Result};
use crate::math::{Purpose, RngKey};
use crate::network::{build_network, Topology};
use crate::trainer::{train, TrialResult};

pub const CONFIG_FILE: &str = "config.toml";
pub const FAILED_MARKER: &str = "FAILED";
const TRIALS_DIR: &str = "trials";

/// One (dataset, architecture, condition, k) combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub ordinal: usize,
    pub dataset_ordinal: usize,
    pub dataset: String,
    pub hidden: Vec<usize>,
    pub condition: Condition,
    pub k: usize,
}

impl Cell {
    pub fn architecture(&self) -> String {
        architecture_label(&self.hidden)
    }

    /// Directory name of the cell's persisted trials.
    pub fn id(&self) -> String {
        format!(
            "{}__{}__{}__k{}",
            self.dataset,
            self.architecture(),
            self.condition.label().to_ascii_lowercase(),
            self.k
        )
    }
}

/// Cells in configuration order. SC runs once with a single circuit; every
/// other condition runs once per configured circuit count.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for (di, dataset) in cfg.datasets.iter().enumerate() {
        for hidden in &cfg.architectures {
            for &condition in &cfg.conditions {
                let ks = if condition.is_parallel() {
                    cfg.circuit_counts.clone()
                } else {
                    vec![1]
                };
                for k in ks {
                    out.push(Cell {
                        ordinal: out.len(),
                        dataset_ordinal: di,
                        dataset: dataset.clone(),
                        hidden: hidden.clone(),
                        condition,
                        k,
                    });
                }
            }
        }
    }
    out
}

/// Key for initialization, masks and shuffling of one trial. Distinct
/// (cell, trial) pairs get distinct trial ids unless identical seeds are
/// forced.
pub fn trial_key(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> RngKey {
    let t = if cfg.identical_trial_seeds { 0 } else { trial };
    RngKey::new(cfg.base_seed, Purpose::Init).with_trial((cell.ordinal * cfg.trials + t) as u64)
}

/// Key of the train/test split. It depends only on the dataset and trial
/// index, so all conditions of a trial see the same split.
pub fn split_key(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> RngKey {
    let t = if cfg.identical_trial_seeds { 0 } else { trial };
    RngKey::new(cfg.base_seed, Purpose::Split).with_trial((cell.dataset_ordinal * cfg.trials + t) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Concurrent trials; 0 uses every available core.
    pub jobs: usize,
    /// Continue a previous run in the same directory.
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: 1, resume: false }
    }
}

/// Train/test pair for one trial, normalized with training statistics.
pub fn prepare_data(
    cfg: &ExperimentConfig,
    cell: &Cell,
    trial: usize,
    loaded: &LoadedDataset,
) -> Result<(Dataset, Dataset)> {
    let (train, test) = match &loaded.test {
        Some(test) => (loaded.dataset.clone(), test.clone()),
        None => {
            let s = split(
                &loaded.dataset,
                &SplitSpec {
                    test_fraction: cfg.test_fraction,
                    stratified: cfg.stratified,
                    seed: split_key(cfg, cell, trial),
                },
            )?;
            for w in &s.warnings {
                log::warn!("{}: {w}", cell.dataset);
            }
            (s.train, s.test)
        }
    };
    let method = cfg.normalization.unwrap_or(loaded.normalization);
    let test = normalize(&test, method, &train)?;
    let train = normalize(&train, method, &train)?;
    Ok((train, test))
}

pub fn topology_for(cell: &Cell, data: &Dataset) -> Result<Topology> {
    Topology::new(data.n_features(), cell.k, cell.hidden.clone(), data.class_count)
}

/// Trains one trial of a cell.
pub fn run_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize, loaded: &LoadedDataset) -> Result<TrialResult> {
    let (train_set, test_set) = prepare_data(cfg, cell, trial, loaded)?;
    let topology = topology_for(cell, &loaded.dataset)?;
    let key = trial_key(cfg, cell, trial);
    let params = build_network(&topology, cfg.head, cfg.hyperparams.init_scale, key)?;
    let policy = cell.condition.policy(cfg.hyperparams.retain_p);
    let (_, result) = train(params, &train_set, &test_set, &policy, &cfg.hyperparams, key)?;
    Ok(result)
}

fn trial_path(out: &Path, cell_id: &str, trial: usize) -> PathBuf {
    out.join(TRIALS_DIR).join(cell_id).join(format!("trial-{trial:04}.csv"))
}

fn history_path(out: &Path, cell_id: &str, trial: usize) -> PathBuf {
    out.join(TRIALS_DIR)
        .join(cell_id)
        .join(format!("history-{trial:04}.csv"))
}

const TRIAL_HEADER: &str = "dataset,architecture,condition,k,trial,trial_key,seed,final_test_error,total_seconds";
const HISTORY_HEADER: &str = "epoch,train_error,test_error,train_loss,cumulative_seconds";

/// Persists a finished trial: history first, then the summary row whose
/// presence marks the trial as complete. Both writes are atomic.
pub fn persist_trial(out: &Path, cell: &Cell, trial: usize, r: &TrialResult) -> Result<()> {
    let id = cell.id();
    let mut history = format!("{HISTORY_HEADER}\n");
    for e in 0..r.test_error.len() {
        history.push_str(&format!(
            "{},{},{},{},{}\n",
            e + 1,
            r.train_error[e],
            r.test_error[e],
            r.train_loss[e],
            r.epoch_seconds[e]
        ));
    }
    let hp = history_path(out, &id, trial);
    fs::create_dir_all(hp.parent().expect("has parent")).map_err(|e| Error::io(&hp, e))?;
    write_atomic(&hp, history.as_bytes())?;
    let summary = format!(
        "{TRIAL_HEADER}\n{},{},{},{},{},{},{},{},{}\n",
        cell.dataset,
        cell.architecture(),
        cell.condition.label(),
        cell.k,
        trial,
        r.trial,
        r.seed,
        r.final_test_error,
        r.total_seconds
    );
    write_atomic(&trial_path(out, &id, trial), summary.as_bytes())
}

/// A persisted trial read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTrial {
    pub dataset: String,
    pub architecture: String,
    pub condition: Condition,
    pub k: usize,
    pub trial: usize,
    pub result: TrialResult,
}

fn parse_num<T: std::str::FromStr>(s: &str, path: &Path, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::format(path, format!("line {line}: bad value {s:?}")))
}

pub fn load_trial(trial_file: &Path) -> Result<StoredTrial> {
    let text = fs::read_to_string(trial_file).map_err(|e| Error::io(trial_file, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(TRIAL_HEADER) {
        return Err(Error::format(trial_file, "unexpected header"));
    }
    let f: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    if f.len() != 9 {
        return Err(Error::format(trial_file, "line 2: expected 9 fields"));
    }
    let p = trial_file;
    let condition: Condition = f[2].parse()?;
    let k: usize = parse_num(f[3], p, 2)?;
    let trial: usize = parse_num(f[4], p, 2)?;

    let hist_file = trial_file.with_file_name(format!("history-{trial:04}.csv"));
    let htext = fs::read_to_string(&hist_file).map_err(|e| Error::io(&hist_file, e))?;
    let mut hl = htext.lines();
    if hl.next() != Some(HISTORY_HEADER) {
        return Err(Error::format(&hist_file, "unexpected header"));
    }
    let (mut train_error, mut test_error, mut train_loss, mut epoch_seconds) = (vec![], vec![], vec![], vec![]);
    for (i, line) in hl.enumerate() {
        let v: Vec<&str> = line.split(',').collect();
        if v.len() != 5 {
            return Err(Error::format(&hist_file, format!("line {}: expected 5 fields", i + 2)));
        }
        train_error.push(parse_num(v[1], &hist_file, i + 2)?);
        test_error.push(parse_num(v[2], &hist_file, i + 2)?);
        train_loss.push(parse_num(v[3], &hist_file, i + 2)?);
        epoch_seconds.push(parse_num(v[4], &hist_file, i + 2)?);
    }
    let policy = condition.dropout_kind();
    Ok(StoredTrial {
        dataset: f[0].to_string(),
        architecture: f[1].to_string(),
        condition,
        k,
        trial,
        result: TrialResult {
            condition: format!("{}-k{k}", policy.short()),
            seed: parse_num(f[6], p, 2)?,
            trial: parse_num(f[5], p, 2)?,
            train_error,
            test_error,
            train_loss,
            epoch_seconds,
            total_seconds: parse_num(f[8], p, 2)?,
            final_test_error: parse_num(f[7], p, 2)?,
        },
    })
}

/// Every persisted trial under `out`, in path order.
pub fn load_trials(out: &Path) -> Result<Vec<StoredTrial>> {
    let root = out.join(TRIALS_DIR);
    if !root.is_dir() {
        return Ok(Vec::new());
    }
    let mut files = Vec::new();
    for cell in fs::read_dir(&root).map_err(|e| Error::io(&root, e))? {
        let cell = cell.map_err(|e| Error::io(&root, e))?.path();
        if !cell.is_dir() {
            continue;
        }
        for f in fs::read_dir(&cell).map_err(|e| Error::io(&cell, e))? {
            let f = f.map_err(|e| Error::io(&cell, e))?.path();
            let name = f
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            if name.starts_with("trial-") && name.ends_with(".csv") {
                files.push(f);
            }
        }
    }
    files.sort();
    files.iter().map(|f| load_trial(f)).collect()
}

/// Builds the report from persisted trials. When `expected` is given,
/// every cell must hold exactly `trials` results.
pub fn collect_report(out: &Path, expected: Option<&ExperimentConfig>) -> Result<Report> {
    let stored = load_trials(out)?;
    let mut groups: BTreeMap<(String, String, Condition, usize), Vec<&StoredTrial>> = BTreeMap::new();
    for s in &stored {
        groups
            .entry((s.dataset.clone(), s.architecture.clone(), s.condition, s.k))
            .or_default()
            .push(s);
    }
    if let Some(cfg) = expected {
        let want: BTreeSet<_> = cells(cfg)
            .into_iter()
            .map(|c| (c.dataset.clone(), c.architecture(), c.condition, c.k))
            .collect();
        for key in &want {
            let have = groups.get(key).map_or(0, Vec::len);
            if have != cfg.trials {
                return Err(Error::Aggregation(format!(
                    "cell {}/{}/{}/k{} has {have} of {} trials",
                    key.0, key.1, key.2, key.3, cfg.trials
                )));
            }
        }
        groups.retain(|k, _| want.contains(k));
    }
    let mut report = Report::default();
    for ((dataset, architecture, condition, k), mut trials) in groups {
        trials.sort_by_key(|t| t.trial);
        let results: Vec<TrialResult> = trials.iter().map(|t| t.result.clone()).collect();
        let s = aggregate(&results)?;
        report.rows.push(ReportRow {
            dataset: dataset.clone(),
            architecture: architecture.clone(),
            condition: condition.label().into(),
            k,
            mean: s.mean,
            median: s.median,
            whisker_low: s.whisker_low,
            whisker_high: s.whisker_high,
            mean_seconds: s.mean_seconds,
            trials: s.count,
        });
        let epochs = results[0].test_error.len();
        if results.iter().any(|r| r.test_error.len() != epochs) {
            return Err(Error::Aggregation(format!(
                "trials of {dataset}/{architecture}/{condition}/k{k} ran different epoch counts"
            )));
        }
        let curve = |f: fn(&TrialResult) -> &Vec<f64>| -> Vec<f64> {
            (0..epochs)
                .map(|e| mean(&results.iter().map(|r| f(r)[e]).collect::<Vec<_>>()))
                .collect()
        };
        report.curves.push(EpochCurve {
            dataset,
            architecture,
            condition: condition.label().into(),
            k,
            train_error: curve(|r| &r.train_error),
            test_error: curve(|r| &r.test_error),
        });
    }
    add_avg_rows(&mut report.rows);
    report.sort();
    Ok(report)
}

fn check_output_dir(cfg: &ExperimentConfig, out: &Path, resume: bool) -> Result<()> {
    let cfg_path = out.join(CONFIG_FILE);
    let text = cfg.to_toml()?;
    if cfg_path.exists() {
        if !resume {
            return Err(Error::Config(format!(
                "{} already holds a run; pass --resume or choose another directory",
                out.display()
            )));
        }
        let previous = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
        if previous != text {
            return Err(Error::Config(format!(
                "cannot resume {}: its configuration differs from this one",
                out.display()
            )));
        }
    } else if !resume && out.join(TRIALS_DIR).exists() {
        return Err(Error::Config(format!(
            "{} holds trials without a configuration",
            out.display()
        )));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_atomic(&cfg_path, text.as_bytes())
}

#[cfg(feature = "parallel")]
fn execute<F: Fn(usize) -> Result<()> + Sync>(n: usize, jobs: usize, f: F) -> Vec<Result<()>> {
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(e) => vec![Err(Error::Config(format!("cannot start worker pool: {e}")))],
    }
}

#[cfg(not(feature = "parallel"))]
fn execute<F: Fn(usize) -> Result<()>>(n: usize, _jobs: usize, f: F) -> Vec<Result<()>> {
    (0..n).map(f).collect()
}

/// Runs every missing trial of the matrix, then writes `errors.csv`,
/// `timing.csv`, `report.md` and `curves.csv` into `out`.
///
/// All datasets and topologies are checked before training starts. If a
/// trial fails, finished trials stay on disk, a `FAILED` marker is written
/// and the first error (in matrix order) is returned.
pub fn run_matrix(cfg: &ExperimentConfig, out: &Path, opts: RunOptions) -> Result<Report> {
    cfg.validate()?;
    let all = cells(cfg);
    let ids: BTreeSet<String> = all.iter().map(Cell::id).collect();
    if ids.len() != all.len() {
        return Err(Error::Config(
            "datasets, architectures, conditions and circuit counts must not repeat".into(),
        ));
    }

    let manifest = Manifest::load(&cfg.manifest)?;
    let mut data: BTreeMap<&str, LoadedDataset> = BTreeMap::new();
    for name in &cfg.datasets {
        let loaded = manifest.load_dataset(name).map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(format!("dataset `{name}`: {other}")),
        })?;
        data.insert(name, loaded);
    }
    for cell in &all {
        topology_for(cell, &data[cell.dataset.as_str()].dataset)
            .map_err(|e| Error::Config(format!("cell {}: {e}", cell.id())))?;
    }

    check_output_dir(cfg, out, opts.resume)?;
    let marker = out.join(FAILED_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    }

    let pending: Vec<(&Cell, usize)> = all
        .iter()
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .filter(|(c, t)| !trial_path(out, &c.id(), *t).exists())
        .collect();
    log::info!(
        "{} cells, {} trials pending of {}",
        all.len(),
        pending.len(),
        all.len() * cfg.trials
    );

    let jobs = if opts.jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        opts.jobs
    };
    let stop = AtomicBool::new(false);
    let results = execute(pending.len(), jobs, |i| {
        if stop.load(Ordering::Relaxed) {
            return Ok(());
        }
        let (cell, t) = pending[i];
        let outcome = run_trial(cfg, cell, t, &data[cell.dataset.as_str()])
            .and_then(|r| persist_trial(out, cell, t, &r).map(|_| r));
        match outcome {
            Ok(r) => {
                log::info!("{} trial {t}: test error {:.3}%", cell.id(), r.final_test_error);
                Ok(())
            }
            Err(e) => {
                stop.store(true, Ordering::Relaxed);
                log::error!("{} trial {t} failed: {e}", cell.id());
                Err(e)
            }
        }
    });
    if let Some(err) = results.into_iter().find_map(Result::err) {
        write_atomic(&marker, format!("{}: {err}\n", err.kind()).as_bytes())?;
        return Err(err);
    }

    let report = collect_report(out, Some(cfg))?;
    for format in [ReportFormat::Csv, ReportFormat::Markdown, ReportFormat::Plotdata] {
        emit_report(&report, format, out)?;
    }
    Ok(report)
}
