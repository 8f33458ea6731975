use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::math::Matrix;

fn default_delimiter() -> char {
    ','
}

fn default_missing() -> Vec<String> {
    vec![String::new(), "NA".into(), "?".into()]
}

/// Column layout of a delimited file. Column indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub features: Vec<usize>,
    pub label: usize,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub header: bool,
    /// Cell values treated as missing.
    #[serde(default = "default_missing")]
    pub missing: Vec<String>,
}

impl CsvSchema {
    pub fn new(features: Vec<usize>, label: usize) -> Self {
        CsvSchema {
            features,
            label,
            delimiter: default_delimiter(),
            header: false,
            missing: default_missing(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvLoad {
    pub dataset: Dataset,
    /// Rows skipped because a feature or the label was missing.
    pub dropped_rows: usize,
    /// Original label strings, indexed by class.
    pub class_names: Vec<String>,
}

/// Loads a delimited file. Rows with missing values are dropped and
/// counted; labels are re-indexed densely in order of first appearance.
/// Instance ids are the zero-based data-row numbers in the file.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<CsvLoad> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::Config(format!("delimiter {:?} is not ASCII", schema.delimiter)));
    }
    let mut reader = ::csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(schema.header)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let width = schema.features.len();
    let needed = schema.features.iter().copied().chain([schema.label]).max().unwrap_or(0) + 1;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let mut dropped = 0;

    for (row, record) in reader.records().enumerate() {
        let line = row + 1 + usize::from(schema.header);
        let record = record.map_err(|e| Error::format(path, format!("line {line}: {e}")))?;
        if record.len() < needed {
            return Err(Error::format(
                path,
                format!("line {line}: {} columns, schema needs {needed}", record.len()),
            ));
        }
        let is_missing = |s: &str| schema.missing.iter().any(|m| m == s);
        if schema.features.iter().any(|&c| is_missing(&record[c])) || is_missing(&record[schema.label]) {
            dropped += 1;
            continue;
        }
        for &c in &schema.features {
            let v: f64 = record[c].parse().map_err(|_| {
                Error::format(
                    path,
                    format!("line {line}: column {c} value {:?} is not numeric", &record[c]),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::format(path, format!("line {line}: column {c} is not finite")));
            }
            values.push(v);
        }
        let raw = record[schema.label].to_string();
        let next = class_index.len();
        let class = *class_index.entry(raw.clone()).or_insert_with(|| {
            class_names.push(raw);
            next
        });
        labels.push(class);
        ids.push(row as u64);
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with missing values", path.display());
    }
    let features = Matrix::from_vec(labels.len(), width, values)?;
    let class_count = class_names.len();
    Ok(CsvLoad {
        dataset: Dataset::new(name, features, labels, ids, class_count)?,
        dropped_rows: dropped,
        class_names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn labels_reindexed_in_first_appearance_order() {
        let (_d, p) = write("1.0,2.0,a\n3.0,4.0,b\n5.0,6.0,a\n");
        let load = load_csv(&p, &CsvSchema::new(vec![0, 1], 2)).unwrap();
        assert_eq!(load.dataset.labels, vec![0, 1, 0]);
        assert_eq!(load.dataset.class_count, 2);
        assert_eq!(load.class_names, vec!["a", "b"]);
        assert_eq!(load.dataset.features.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn missing_values_drop_rows() {
        let (_d, p) = write("h1;h2;y\n1;2;x\n?;2;x\n3;4;z\n");
        let schema = CsvSchema {
            delimiter: ';',
            header: true,
            ..CsvSchema::new(vec![0, 1], 2)
        };
        let load = load_csv(&p, &schema).unwrap();
        assert_eq!(load.dataset.len(), 2);
        assert_eq!(load.dropped_rows, 1);
        assert_eq!(load.dataset.instance_ids, vec![0, 2]);
    }

    #[test]
    fn quoted_cells_and_header() {
        let (_d, p) = write("\"\",\"a\",\"cls\"\n\"1\",0.5,\"x y\"\n\"2\",-1e-3,\"z\"\n");
        let schema = CsvSchema {
            header: true,
            ..CsvSchema::new(vec![1], 2)
        };
        let load = load_csv(&p, &schema).unwrap();
        assert_eq!(load.dataset.features.as_slice(), &[0.5, -1e-3]);
        assert_eq!(load.class_names, vec!["x y", "z"]);
    }

    #[test]
    fn unparseable_value_reports_line() {
        let (_d, p) = write("1,2,a\n1,oops,b\n");
        let err = load_csv(&p, &CsvSchema::new(vec![0, 1], 2)).unwrap_err();
        assert!(
            matches!(&err, Error::Format { message, .. } if message.contains("line 2")),
            "{err}"
        );
    }

    #[test]
    fn short_row_is_a_format_error() {
        let (_d, p) = write("1,2,a\n1,2\n");
        assert!(matches!(
            load_csv(&p, &CsvSchema::new(vec![0, 1], 2)),
            Err(Error::Format { .. })
        ));
    }
}
