//! Datasets: loaders, normalization and deterministic splits.

mod csv;
mod idx;
mod manifest;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Matrix, Purpose, RngKey};

pub use self::csv::{load_csv, CsvLoad, CsvSchema};
pub use idx::{load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels};
pub use manifest::{DatasetEntry, LoadedDataset, Manifest, SourceKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// `n_samples × n_features`.
    pub features: Matrix,
    pub labels: Vec<usize>,
    /// Stable ids that survive splitting and shuffling.
    pub instance_ids: Vec<u64>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Vec<usize>,
        instance_ids: Vec<u64>,
        class_count: usize,
    ) -> Result<Self> {
        let name = name.into();
        if features.rows() != labels.len() || labels.len() != instance_ids.len() {
            return Err(Error::Data(format!(
                "{name}: {} feature rows, {} labels, {} ids",
                features.rows(),
                labels.len(),
                instance_ids.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Data(format!("{name}: label {bad} outside 0..{class_count}")));
        }
        if !features.is_finite() {
            return Err(Error::Data(format!("{name}: non-finite feature values")));
        }
        let mut seen = instance_ids.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Data(format!("{name}: duplicate instance ids")));
        }
        Ok(Dataset {
            name,
            features,
            labels,
            instance_ids,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let cols = self.n_features();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
        }
        Dataset {
            name: self.name.clone(),
            features: Matrix::from_vec(indices.len(), cols, data).expect("row-aligned"),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            instance_ids: indices.iter().map(|&i| self.instance_ids[i]).collect(),
            class_count: self.class_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Zscore,
    Minmax,
    None,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zscore" => Ok(Normalization::Zscore),
            "minmax" => Ok(Normalization::Minmax),
            "none" => Ok(Normalization::None),
            other => Err(Error::Config(format!("unknown normalization `{other}`"))),
        }
    }
}

const SIGMA_FLOOR: f64 = 1e-8;

/// Normalizes `ds` with statistics computed from `stats_from` only.
pub fn normalize(ds: &Dataset, method: Normalization, stats_from: &Dataset) -> Result<Dataset> {
    if ds.n_features() != stats_from.n_features() {
        return Err(Error::shape(format!(
            "normalizing {} features with statistics over {}",
            ds.n_features(),
            stats_from.n_features()
        )));
    }
    let cols = ds.n_features();
    let n = stats_from.len() as f64;
    let (shift, scale): (Vec<f64>, Vec<f64>) = match method {
        Normalization::None => return Ok(ds.clone()),
        Normalization::Zscore => (0..cols)
            .map(|j| {
                let col = (0..stats_from.len()).map(|i| stats_from.features.get(i, j));
                let mean = col.clone().sum::<f64>() / n;
                let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                (mean, var.sqrt().max(SIGMA_FLOOR))
            })
            .unzip(),
        Normalization::Minmax => (0..cols)
            .map(|j| {
                let col = (0..stats_from.len()).map(|i| stats_from.features.get(i, j));
                let lo = col.clone().fold(f64::INFINITY, f64::min);
                let hi = col.fold(f64::NEG_INFINITY, f64::max);
                (lo, (hi - lo).max(SIGMA_FLOOR))
            })
            .unzip(),
    };
    let mut out = ds.clone();
    for i in 0..out.len() {
        for (j, v) in out.features.row_mut(i).iter_mut().enumerate() {
            *v = (*v - shift[j]) / scale[j];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub stratified: bool,
    pub seed: RngKey,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

/// Deterministic train/test partition.
///
/// Stratified splits send `round(n_c · test_fraction)` samples of class `c`
/// to the test side, clamped so both sides keep at least one sample; a class
/// with a single sample stays in train (with a warning).
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Split> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "test_fraction must be in (0, 1), got {}",
            spec.test_fraction
        )));
    }
    let mut stream = spec.seed.with_purpose(Purpose::Split).stream();
    let mut warnings = Vec::new();
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();

    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut g = vec![Vec::new(); ds.class_count];
        for (i, &l) in ds.labels.iter().enumerate() {
            g[l].push(i);
        }
        g
    } else {
        vec![(0..ds.len()).collect()]
    };
    for (class, mut members) in groups.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        stream.shuffle(&mut members);
        let n = members.len();
        let n_test = if n == 1 {
            if spec.stratified {
                let msg = format!("{}: class {class} has a single sample; kept in train", ds.name);
                log::warn!("{msg}");
                warnings.push(msg);
            }
            0
        } else {
            ((n as f64 * spec.test_fraction).round() as usize).clamp(1, n - 1)
        };
        test_idx.extend_from_slice(&members[..n_test]);
        train_idx.extend_from_slice(&members[n_test..]);
    }
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Data(format!(
            "{}: cannot split {} samples into two non-empty parts",
            ds.name,
            ds.len()
        )));
    }
    // deterministic order by original position
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(Split {
        train: ds.subset(&train_idx),
        test: ds.subset(&test_idx),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;

    fn dataset(labels: Vec<usize>, classes: usize) -> Dataset {
        let n = labels.len();
        let features = Matrix::from_vec(n, 2, (0..2 * n).map(|v| (v as f64).sin() * 10.0).collect()).unwrap();
        Dataset::new("t", features, labels, (100..100 + n as u64).collect(), classes).unwrap()
    }

    fn spec(f: f64, stratified: bool) -> SplitSpec {
        SplitSpec {
            test_fraction: f,
            stratified,
            seed: RngKey::new(4, Purpose::Split),
        }
    }

    #[test]
    fn dataset_invariants() {
        let m = Matrix::zeros(2, 1);
        assert!(Dataset::new("x", m.clone(), vec![0], vec![1, 2], 1).is_err());
        assert!(Dataset::new("x", m.clone(), vec![0, 2], vec![1, 2], 2).is_err());
        assert!(Dataset::new("x", m.clone(), vec![0, 1], vec![1, 1], 2).is_err());
        let nan = Matrix::from_vec(2, 1, vec![0.0, f64::NAN]).unwrap();
        assert!(Dataset::new("x", nan, vec![0, 1], vec![1, 2], 2).is_err());
    }

    #[test]
    fn half_split_of_ten() {
        let s = split(&dataset(vec![0; 10], 1), &spec(0.5, false)).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (5, 5));
    }

    #[test]
    fn split_is_deterministic() {
        let ds = dataset((0..30).map(|i| i % 3).collect(), 3);
        assert_eq!(
            split(&ds, &spec(0.3, true)).unwrap(),
            split(&ds, &spec(0.3, true)).unwrap()
        );
        let other = SplitSpec {
            seed: RngKey::new(5, Purpose::Split),
            ..spec(0.3, true)
        };
        assert_ne!(split(&ds, &spec(0.3, true)).unwrap(), split(&ds, &other).unwrap());
    }

    #[test]
    fn stratified_allocation() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 80)).collect();
        let s = split(&dataset(labels, 2), &spec(0.25, true)).unwrap();
        let counts = s.test.class_counts();
        assert!(
            (counts[0] as i64 - 20).abs() <= 1 && (counts[1] as i64 - 5).abs() <= 1,
            "{counts:?}"
        );
    }

    #[test]
    fn singleton_class_stays_in_train() {
        let s = split(&dataset(vec![0, 0, 0, 0, 1], 2), &spec(0.5, true)).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert_eq!(s.test.class_counts()[1], 0);
        assert_eq!(s.train.class_counts()[1], 1);
    }

    #[test]
    fn zscore_and_minmax() {
        let ds = dataset((0..20).map(|i| i % 2).collect(), 2);
        let z = normalize(&ds, Normalization::Zscore, &ds).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = (0..z.len()).map(|i| z.features.get(i, j)).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
            assert!(mean.abs() < 1e-10 && (std - 1.0).abs() < 1e-10);
        }
        let m = normalize(&ds, Normalization::Minmax, &ds).unwrap();
        assert!(m.features.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(normalize(&ds, Normalization::None, &ds).unwrap(), ds);
    }

    #[test]
    fn constant_feature_goes_to_zero() {
        let ds = Dataset::new(
            "c",
            Matrix::from_vec(3, 1, vec![7.0; 3]).unwrap(),
            vec![0; 3],
            vec![1, 2, 3],
            1,
        )
        .unwrap();
        let z = normalize(&ds, Normalization::Zscore, &ds).unwrap();
        assert!(z.features.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalization_ignores_test_contents() {
        let ds = dataset((0..40).map(|i| i % 2).collect(), 2);
        let s = split(&ds, &spec(0.25, true)).unwrap();
        let a = normalize(&s.train, Normalization::Zscore, &s.train).unwrap();
        let mut altered = s.test.clone();
        altered.features.as_mut_slice().iter_mut().for_each(|v| *v *= 100.0);
        let b = normalize(&s.train, Normalization::Zscore, &s.train).unwrap();
        assert_eq!(a, b);
        // the test side is transformed with train statistics
        let t1 = normalize(&s.test, Normalization::Zscore, &s.train).unwrap();
        let t2 = normalize(&altered, Normalization::Zscore, &s.train).unwrap();
        assert_ne!(t1, t2);
    }

    proptest! {
        #[test]
        fn split_partitions_ids(n in 2usize..200, f in 0.05f64..0.95, stratified: bool, seed in 0u64..1000) {
            let ds = dataset((0..n).map(|i| i % 3).collect(), 3);
            let spec = SplitSpec { test_fraction: f, stratified, seed: RngKey::new(seed, Purpose::Split) };
            if let Ok(s) = split(&ds, &spec) {
                let train: BTreeSet<u64> = s.train.instance_ids.iter().copied().collect();
                let test: BTreeSet<u64> = s.test.instance_ids.iter().copied().collect();
                prop_assert!(train.is_disjoint(&test));
                let all: BTreeSet<u64> = ds.instance_ids.iter().copied().collect();
                prop_assert_eq!(train.union(&test).copied().collect::<BTreeSet<_>>(), all);
                prop_assert!(!s.train.is_empty() && !s.test.is_empty());
            }
        }
    }
}
