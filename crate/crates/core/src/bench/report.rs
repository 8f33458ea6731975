//! Report rendering. Error statistics and timing go to separate CSV files
//! so that the error report of a fixed configuration is byte-reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const AVG_LABEL: &str = "AVG";
pub const WHISKER_NOTE: &str = "whiskers are the minimum and maximum over trials";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    /// Hidden widths joined by `x`, e.g. `100x100`.
    pub architecture: String,
    /// `SC`, `ND`, `NFD`, `FD` or `AVG`.
    pub condition: String,
    pub k: usize,
    pub mean: f64,
    pub median: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub mean_seconds: f64,
    pub trials: usize,
}

/// Mean error curve of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochCurve {
    pub dataset: String,
    pub architecture: String,
    pub condition: String,
    pub k: usize,
    pub train_error: Vec<f64>,
    pub test_error: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub curves: Vec<EpochCurve>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Plotdata,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "plotdata" => Ok(ReportFormat::Plotdata),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

fn condition_rank(c: &str) -> usize {
    ["SC", "ND", "NFD", "FD", AVG_LABEL]
        .iter()
        .position(|x| *x == c)
        .unwrap_or(usize::MAX)
}

fn architecture_key(a: &str) -> Vec<usize> {
    a.split('x').map(|w| w.parse().unwrap_or(usize::MAX)).collect()
}

/// Canonical ordering key shared by rows and curves.
pub fn sort_key(dataset: &str, architecture: &str, condition: &str, k: usize) -> (String, Vec<usize>, usize, usize) {
    (
        dataset.to_string(),
        architecture_key(architecture),
        condition_rank(condition),
        k,
    )
}

impl Report {
    pub fn sort(&mut self) {
        self.rows
            .sort_by_cached_key(|r| sort_key(&r.dataset, &r.architecture, &r.condition, r.k));
        self.curves
            .sort_by_cached_key(|c| sort_key(&c.dataset, &c.architecture, &c.condition, c.k));
    }
}

/// Appends an AVG row per (dataset, architecture, k) group that holds at
/// least one PC condition. Its mean is the plain mean of the PC means; the
/// median and seconds are averaged the same way and the whiskers span the
/// group.
pub fn add_avg_rows(rows: &mut Vec<ReportRow>) {
    let mut groups: BTreeMap<(String, String, usize), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.condition != "SC" && r.condition != AVG_LABEL) {
        groups
            .entry((r.dataset.clone(), r.architecture.clone(), r.k))
            .or_default()
            .push(r);
    }
    let avg: Vec<ReportRow> = groups
        .into_iter()
        .map(|((dataset, architecture, k), g)| {
            let n = g.len() as f64;
            ReportRow {
                dataset,
                architecture,
                condition: AVG_LABEL.into(),
                k,
                mean: g.iter().map(|r| r.mean).sum::<f64>() / n,
                median: g.iter().map(|r| r.median).sum::<f64>() / n,
                whisker_low: g.iter().map(|r| r.whisker_low).fold(f64::INFINITY, f64::min),
                whisker_high: g.iter().map(|r| r.whisker_high).fold(f64::NEG_INFINITY, f64::max),
                mean_seconds: g.iter().map(|r| r.mean_seconds).sum::<f64>() / n,
                trials: g.iter().map(|r| r.trials).sum(),
            }
        })
        .collect();
    rows.extend(avg);
}

const ERROR_HEADER: [&str; 9] = [
    "dataset",
    "architecture",
    "condition",
    "k",
    "trials",
    "mean_error",
    "median_error",
    "whisker_low",
    "whisker_high",
];
const TIMING_HEADER: [&str; 6] = ["dataset", "architecture", "condition", "k", "trials", "mean_seconds"];

fn csv_string(header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    let fail = |e: ::csv::Error| Error::Consistency(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in records {
        w.write_record(&r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Consistency(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn key_fields(r: &ReportRow) -> Vec<String> {
    vec![
        r.dataset.clone(),
        r.architecture.clone(),
        r.condition.clone(),
        r.k.to_string(),
        r.trials.to_string(),
    ]
}

/// Error statistics, one line per row. Floats use the shortest
/// representation that parses back to the same value.
pub fn errors_csv(rows: &[ReportRow]) -> Result<String> {
    csv_string(
        &ERROR_HEADER,
        rows.iter().map(|r| {
            let mut f = key_fields(r);
            f.extend([r.mean, r.median, r.whisker_low, r.whisker_high].map(|v| v.to_string()));
            f
        }),
    )
}

pub fn timing_csv(rows: &[ReportRow]) -> Result<String> {
    csv_string(
        &TIMING_HEADER,
        rows.iter().map(|r| {
            let mut f = key_fields(r);
            f.push(r.mean_seconds.to_string());
            f
        }),
    )
}

fn parse_records(text: &str, header: &[&str], what: &str) -> Result<Vec<::csv::StringRecord>> {
    let mut rd = ::csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let bad = |m: String| Error::format(what, m);
    let found = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(bad(format!("unexpected header {:?}", found.iter().collect::<Vec<_>>())));
    }
    rd.records().map(|r| r.map_err(|e| bad(e.to_string()))).collect()
}

fn field<T: FromStr>(rec: &::csv::StringRecord, i: usize, what: &str) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line());
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(what, format!("line {line}: bad value in column {i}")))
}

/// Inverse of [`errors_csv`] and [`timing_csv`]; the two files must list the
/// same rows in the same order.
pub fn parse_csv(errors: &str, timing: &str) -> Result<Vec<ReportRow>> {
    let e = parse_records(errors, &ERROR_HEADER, "errors.csv")?;
    let t = parse_records(timing, &TIMING_HEADER, "timing.csv")?;
    if e.len() != t.len() {
        return Err(Error::Consistency(format!(
            "{} error rows but {} timing rows",
            e.len(),
            t.len()
        )));
    }
    e.iter()
        .zip(&t)
        .map(|(e, t)| {
            if (0..5).any(|i| e.get(i) != t.get(i)) {
                return Err(Error::Consistency("error and timing rows are out of step".into()));
            }
            let w = "errors.csv";
            Ok(ReportRow {
                dataset: field(e, 0, w)?,
                architecture: field(e, 1, w)?,
                condition: field(e, 2, w)?,
                k: field(e, 3, w)?,
                trials: field(e, 4, w)?,
                mean: field(e, 5, w)?,
                median: field(e, 6, w)?,
                whisker_low: field(e, 7, w)?,
                whisker_high: field(e, 8, w)?,
                mean_seconds: field(t, 5, "timing.csv")?,
            })
        })
        .collect()
}

fn column_label(condition: &str, k: usize) -> String {
    if condition == "SC" {
        "SC".into()
    } else {
        format!("{condition} k={k}")
    }
}

/// Dataset and architecture labels plus the row for each condition column.
type PivotLine<'a> = (&'a str, &'a str, BTreeMap<String, &'a ReportRow>);

struct Pivot<'a> {
    columns: Vec<(usize, String, usize)>,
    lines: BTreeMap<(String, Vec<usize>), PivotLine<'a>>,
}

fn pivot(rows: &[ReportRow]) -> Pivot<'_> {
    let mut columns = BTreeSet::new();
    let mut lines: BTreeMap<_, PivotLine<'_>> = BTreeMap::new();
    for r in rows {
        columns.insert((condition_rank(&r.condition), r.condition.clone(), r.k));
        lines
            .entry((r.dataset.clone(), architecture_key(&r.architecture)))
            .or_insert((r.dataset.as_str(), r.architecture.as_str(), BTreeMap::new()))
            .2
            .insert(column_label(&r.condition, r.k), r);
    }
    Pivot {
        columns: columns.into_iter().collect(),
        lines,
    }
}

/// Markdown tables: mean test error with the best cell in bold and the
/// second best in italics (AVG cells are not ranked), the spread of each
/// cell, and mean training time.
pub fn markdown(rows: &[ReportRow]) -> String {
    let p = pivot(rows);
    let labels: Vec<String> = p.columns.iter().map(|(_, c, k)| column_label(c, *k)).collect();
    let head = |title: &str| {
        let mut s = format!("## {title}\n\n| dataset | architecture |");
        for l in &labels {
            let _ = write!(s, " {l} |");
        }
        s.push_str("\n|---|---|");
        s.push_str(&"---:|".repeat(labels.len()));
        s.push('\n');
        s
    };

    let mut out = String::from("# Results\n\n");
    out.push_str(&head("Mean test error (%)"));
    for (dataset, arch, cells) in p.lines.values() {
        let mut ranked: Vec<f64> = cells
            .values()
            .filter(|r| r.condition != AVG_LABEL)
            .map(|r| r.mean)
            .collect();
        ranked.sort_by(f64::total_cmp);
        ranked.dedup();
        let _ = write!(out, "| {dataset} | {arch} |");
        for l in &labels {
            match cells.get(l) {
                None => out.push_str(" |"),
                Some(r) => {
                    let v = format!("{:.3}", r.mean);
                    let cell = if r.condition == AVG_LABEL {
                        v
                    } else if Some(&r.mean) == ranked.first() {
                        format!("**{v}**")
                    } else if Some(&r.mean) == ranked.get(1) {
                        format!("_{v}_")
                    } else {
                        v
                    };
                    let _ = write!(out, " {cell} |");
                }
            }
        }
        out.push('\n');
    }
    out.push_str("\nBold marks the lowest mean error in a row, italics the second lowest.\n\n");

    out.push_str(&head("Test error spread (%): median [low, high]"));
    for (dataset, arch, cells) in p.lines.values() {
        let _ = write!(out, "| {dataset} | {arch} |");
        for l in &labels {
            match cells.get(l) {
                None => out.push_str(" |"),
                Some(r) => {
                    let _ = write!(out, " {:.3} [{:.3}, {:.3}] |", r.median, r.whisker_low, r.whisker_high);
                }
            }
        }
        out.push('\n');
    }
    let _ = write!(out, "\nNote: {WHISKER_NOTE}.\n\n");

    out.push_str(&head("Mean training time (s)"));
    for (dataset, arch, cells) in p.lines.values() {
        let _ = write!(out, "| {dataset} | {arch} |");
        for l in &labels {
            match cells.get(l) {
                None => out.push_str(" |"),
                Some(r) => {
                    let _ = write!(out, " {:.3} |", r.mean_seconds);
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Long-format per-epoch mean error curves.
pub fn plotdata(curves: &[EpochCurve]) -> Result<String> {
    let header = [
        "dataset",
        "architecture",
        "condition",
        "k",
        "epoch",
        "mean_train_error",
        "mean_test_error",
    ];
    let records = curves.iter().flat_map(|c| {
        c.train_error
            .iter()
            .zip(&c.test_error)
            .enumerate()
            .map(move |(e, (tr, te))| {
                vec![
                    c.dataset.clone(),
                    c.architecture.clone(),
                    c.condition.clone(),
                    c.k.to_string(),
                    (e + 1).to_string(),
                    tr.to_string(),
                    te.to_string(),
                ]
            })
    });
    csv_string(&header, records)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    super::write_atomic(path, text.as_bytes())
}

/// Writes the report into `dir` and returns the files written:
/// `errors.csv` and `timing.csv`, `report.md`, or `curves.csv`.
pub fn emit_report(report: &Report, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() {
        return Err(Error::Aggregation("report has no rows".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files: Vec<(&str, String)> = match format {
        ReportFormat::Csv => vec![
            ("errors.csv", errors_csv(&report.rows)?),
            ("timing.csv", timing_csv(&report.rows)?),
        ],
        ReportFormat::Markdown => vec![("report.md", markdown(&report.rows))],
        ReportFormat::Plotdata => vec![("curves.csv", plotdata(&report.curves)?)],
    };
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        write_file(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}
