use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pcnet::bench::{collect_report, emit_report, run_matrix, ExperimentConfig, ReportFormat, RunOptions, CONFIG_FILE};
use pcnet::data::Manifest;
use pcnet::dropout::fixed_table_init;
use pcnet::network::build_network;
use pcnet::trainer::{draw_masks, grad_check};
use pcnet::{DropoutKind, DropoutPolicy, Error, OutputHead, Purpose, RngKey, Topology};
use serde_json::json;

#[derive(Parser)]
#[command(name = "pcnet", version, about = "Parallel-circuit network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of an experiment matrix and write its reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "PCNET_OUT_DIR", default_value = "pcnet-out")]
        out: PathBuf,
        /// Concurrent trials (0 = one per core).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Continue an interrupted run in the same output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Rebuild a report from the trials persisted in a run directory.
    Report {
        #[arg(long = "in", env = "PCNET_OUT_DIR")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Where to write the report (default: the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients on a random network.
    Gradcheck {
        /// IN-H1-...-OUT/K, e.g. 8-20-20-3/2.
        #[arg(long)]
        arch: String,
        /// none, nd, nfd or fd.
        #[arg(long, default_value = "none")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        /// Largest relative error accepted.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Describe a dataset from the manifest.
    Info {
        #[arg(long)]
        dataset: String,
        #[arg(long, env = "PCNET_MANIFEST", default_value = "data/manifest.toml")]
        manifest: PathBuf,
    },
}

fn run(cli: Cli) -> pcnet::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            resume,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_matrix(&cfg, &out, RunOptions { jobs, resume })?;
            say(&json!({ "out": out, "rows": report.rows.len(), "cells": report.curves.len() }).to_string());
        }
        Command::Report { input, format, out } => {
            let format: ReportFormat = format.parse()?;
            let expected = load_run_config(&input)?;
            let report = collect_report(&input, expected.as_ref())?;
            let written = emit_report(&report, format, out.as_deref().unwrap_or(&input))?;
            for p in written {
                say(&p.display().to_string());
            }
        }
        Command::Gradcheck {
            arch,
            policy,
            seed,
            eps,
            tolerance,
        } => {
            let topology: Topology = arch.parse()?;
            let kind: DropoutKind = policy.parse()?;
            let policy = DropoutPolicy::new(kind, 0.5);
            policy.validate_for(&topology)?;
            let key = RngKey::new(seed, Purpose::Init);
            let params = build_network(&topology, OutputHead::default(), 1.0, key)?;
            let mut s = key.with_purpose(Purpose::Synthetic).stream();
            let x: Vec<f64> = (0..topology.input_dim()).map(|_| s.uniform(-1.0, 1.0)).collect();
            let target = s.below(topology.output_dim() as u64) as usize;
            let table = match kind {
                DropoutKind::FixedDropcircuit => Some(fixed_table_init(&[0], topology.circuits(), 0.5, key)?),
                _ => None,
            };
            let masks = draw_masks(&params, &policy, table.as_ref(), key, 0, 0)?;
            let err = grad_check(&params, &x, target, masks.as_ref(), eps)?;
            say(&json!({ "arch": topology.to_string(), "policy": kind.short(), "seed": seed, "max_relative_error": err }).to_string());
            if !(err < tolerance) {
                return Err(Error::Consistency(format!(
                    "gradient check failed: relative error {err:e} exceeds {tolerance:e}"
                )));
            }
        }
        Command::Info { dataset, manifest } => {
            let m = Manifest::load(&manifest)?;
            let entry = m.entry(&dataset)?.clone();
            let loaded = m.load_dataset(&dataset)?;
            let d = &loaded.dataset;
            say(&serde_json::to_string_pretty(&json!({
                "name": dataset,
                "variant": entry.variant,
                "instances": d.len(),
                "features": d.n_features(),
                "classes": d.class_count,
                "class_names": loaded.class_names,
                "class_counts": d.class_counts(),
                "dropped_rows": loaded.dropped_rows,
                "test_instances": loaded.test.as_ref().map(|t| t.len()),
                "normalization": loaded.normalization,
                "checksums_verified": entry.sha256.len(),
            }))
            .expect("json values serialize"));
        }
    }
    Ok(())
}

/// Prints a line, treating a closed stdout (e.g. piped into `head`) as done.
fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{line}") {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("{}", json!({ "error": "io", "message": format!("stdout: {e}") }));
        }
    }
}

fn load_run_config(dir: &Path) -> pcnet::Result<Option<ExperimentConfig>> {
    let path = dir.join(CONFIG_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse(&text).map(Some)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            log::debug!("{e:?}");
            ExitCode::FAILURE
        }
    }
}
