//! Dataset manifest: maps dataset names to files, schema and checksums.
//!
//! ```toml
//! [datasets.glass]
//! kind = "csv"
//! path = "glass.csv"
//! sha256 = { "glass.csv" = "5d7c…" }
//! csv = { features = [1, 2, 3], label = 10, header = true }
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{load_csv, load_idx, CsvSchema, Dataset, Normalization};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Csv,
    Idx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub kind: SourceKind,
    /// CSV file.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub csv: Option<CsvSchema>,
    /// IDX image/label pair.
    #[serde(default)]
    pub images: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Optional canonical test pair for IDX sources.
    #[serde(default)]
    pub test_images: Option<PathBuf>,
    #[serde(default)]
    pub test_labels: Option<PathBuf>,
    /// Default feature normalization for this dataset.
    #[serde(default)]
    pub normalization: Normalization,
    /// Expected SHA-256 per file (keys are the paths as written above).
    #[serde(default)]
    pub sha256: BTreeMap<String, String>,
    /// Free-form note about which variant of the data this is.
    #[serde(default)]
    pub variant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub datasets: BTreeMap<String, DatasetEntry>,
    #[serde(skip)]
    root: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// Canonical test set, when the source ships one.
    pub test: Option<Dataset>,
    pub dropped_rows: usize,
    pub class_names: Vec<String>,
    pub normalization: Normalization,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Manifest::parse(&text).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(path, message),
            other => other,
        })?;
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::format("<manifest>", e.to_string()))?;
        for (name, entry) in &m.datasets {
            let ok = match entry.kind {
                SourceKind::Csv => entry.path.is_some() && entry.csv.is_some(),
                SourceKind::Idx => {
                    entry.images.is_some()
                        && entry.labels.is_some()
                        && entry.test_images.is_some() == entry.test_labels.is_some()
                }
            };
            if !ok {
                return Err(Error::Config(format!(
                    "dataset `{name}` is missing required paths or schema"
                )));
            }
        }
        Ok(m)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn with_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.root = root.into();
        self
    }

    pub fn entry(&self, name: &str) -> Result<&DatasetEntry> {
        self.datasets
            .get(name)
            .ok_or_else(|| Error::Config(format!("dataset `{name}` is not in the manifest")))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Files of an entry, as (manifest key, resolved path).
    pub fn files(&self, name: &str) -> Result<Vec<(String, PathBuf)>> {
        let e = self.entry(name)?;
        Ok([&e.path, &e.images, &e.labels, &e.test_images, &e.test_labels]
            .into_iter()
            .flatten()
            .map(|p| (p.to_string_lossy().into_owned(), self.resolve(p)))
            .collect())
    }

    /// Checks that every file exists and matches its recorded checksum.
    pub fn verify(&self, name: &str) -> Result<()> {
        let entry = self.entry(name)?;
        for (key, path) in self.files(name)? {
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "dataset `{name}`: missing file {}",
                    path.display()
                )));
            }
            if let Some(expected) = entry.sha256.get(&key) {
                let actual = sha256_file(&path)?;
                if !actual.eq_ignore_ascii_case(expected) {
                    return Err(Error::Data(format!(
                        "dataset `{name}`: checksum mismatch for {key} (expected {expected}, found {actual})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self, name: &str) -> Result<LoadedDataset> {
        self.verify(name)?;
        let e = self.entry(name)?;
        let mut loaded = match e.kind {
            SourceKind::Csv => {
                let path = self.resolve(e.path.as_ref().expect("validated"));
                let load = load_csv(&path, e.csv.as_ref().expect("validated"))?;
                LoadedDataset {
                    dataset: load.dataset,
                    test: None,
                    dropped_rows: load.dropped_rows,
                    class_names: load.class_names,
                    normalization: e.normalization,
                }
            }
            SourceKind::Idx => {
                let p = |x: &Option<PathBuf>| self.resolve(x.as_ref().expect("validated"));
                let dataset = load_idx(&p(&e.images), &p(&e.labels))?;
                let test = match (&e.test_images, &e.test_labels) {
                    (Some(i), Some(l)) => Some(load_idx(&self.resolve(i), &self.resolve(l))?),
                    _ => None,
                };
                let class_names = (0..dataset.class_count).map(|c| c.to_string()).collect();
                LoadedDataset {
                    dataset,
                    test,
                    dropped_rows: 0,
                    class_names,
                    normalization: e.normalization,
                }
            }
        };
        loaded.dataset.name = name.to_string();
        if let Some(t) = loaded.test.as_mut() {
            t.name = format!("{name}-test");
        }
        Ok(loaded)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_and_verifies() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("d.csv"), "1,a\n2,b\n3,a\n").unwrap();
        let sum = sha256_file(&dir.path().join("d.csv")).unwrap();
        let text = format!(
            "[datasets.toy]\nkind = \"csv\"\npath = \"d.csv\"\nsha256 = {{ \"d.csv\" = \"{sum}\" }}\ncsv = {{ features = [0], label = 1 }}\n"
        );
        let mpath = dir.path().join("manifest.toml");
        fs::write(&mpath, &text).unwrap();
        let m = Manifest::load(&mpath).unwrap();
        let loaded = m.load_dataset("toy").unwrap();
        assert_eq!(loaded.dataset.name, "toy");
        assert_eq!(loaded.dataset.len(), 3);
        assert!(matches!(m.load_dataset("nope"), Err(Error::Config(_))));

        fs::write(dir.path().join("d.csv"), "1,a\n2,b\n").unwrap();
        assert!(matches!(m.load_dataset("toy"), Err(Error::Data(_))));
    }

    #[test]
    fn incomplete_entries_are_rejected() {
        assert!(matches!(
            Manifest::parse("[datasets.x]\nkind = \"idx\"\nimages = \"a\"\n"),
            Err(Error::Config(_))
        ));
        assert!(Manifest::parse("[datasets.x]\nkind = \"parquet\"\n").is_err());
    }
}
