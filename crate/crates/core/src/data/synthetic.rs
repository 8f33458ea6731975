//! Generated datasets for benchmarks, tests and the demo.

use super::Dataset;
use crate::math::{Matrix, Purpose, RngKey};

/// `n` points in `dim` dimensions, labels cycling through `classes`. Each
/// class is a unit-variance Gaussian around a center drawn uniformly from
/// `[-separation/2, separation/2]^dim`.
pub fn gaussian_blobs(name: &str, n: usize, dim: usize, classes: usize, separation: f64, key: RngKey) -> Dataset {
    let key = key.with_purpose(Purpose::Synthetic);
    let mut centers = key.with_sample(u64::MAX).stream();
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            (0..dim)
                .map(|_| centers.uniform(-separation / 2.0, separation / 2.0))
                .collect()
        })
        .collect();
    let mut s = key.stream();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        data.extend(centers[c].iter().map(|&m| m + s.normal()));
        labels.push(c);
    }
    Dataset::new(
        name,
        Matrix::from_vec(n, dim, data).expect("sized"),
        labels,
        (0..n as u64).collect(),
        classes,
    )
    .expect("generated data is valid")
}

/// Interleaved spirals in the plane, one arm per class, with Gaussian
/// jitter of standard deviation `noise`.
pub fn spirals(name: &str, n: usize, classes: usize, noise: f64, key: RngKey) -> Dataset {
    let mut s = key.with_purpose(Purpose::Synthetic).stream();
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let r = s.next_f64();
        let theta = 3.5 * r + std::f64::consts::TAU * c as f64 / classes as f64;
        data.push(r * theta.cos() + noise * s.normal());
        data.push(r * theta.sin() + noise * s.normal());
        labels.push(c);
    }
    Dataset::new(
        name,
        Matrix::from_vec(n, 2, data).expect("sized"),
        labels,
        (0..n as u64).collect(),
        classes,
    )
    .expect("generated data is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_deterministic_and_balanced() {
        let k = RngKey::new(1, Purpose::Synthetic);
        let a = gaussian_blobs("b", 90, 4, 3, 5.0, k);
        assert_eq!(a, gaussian_blobs("b", 90, 4, 3, 5.0, k));
        assert_eq!(a.class_counts(), vec![30, 30, 30]);
        assert_eq!(a.n_features(), 4);
    }

    #[test]
    fn spirals_shape() {
        let d = spirals("s", 300, 3, 0.05, RngKey::new(2, Purpose::Synthetic));
        assert_eq!((d.len(), d.n_features(), d.class_count), (300, 2, 3));
        assert!(d.features.as_slice().iter().all(|v| v.abs() < 2.0));
    }
}
