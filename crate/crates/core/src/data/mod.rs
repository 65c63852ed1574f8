//! Datasets: CSV ingestion and export, standardization, synthetic generators, and the
//! k-nearest-neighbour smoothing graph.

mod csv_io;
mod generators;
mod graph;

pub use csv_io::{load_csv, write_csv, LabelColumn};
pub use generators::{gen_chang, gen_fcps, FcpsShape, CHANG_DIM};
pub use graph::{knn_graph, knn_graph_with, smooth, Neighbor, NeighborGraph};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Observations (rows) with optional ground-truth class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: Matrix,
    pub labels: Option<Vec<usize>>,
    pub name: String,
}

impl LabeledDataset {
    pub fn new(x: Matrix, labels: Option<Vec<usize>>, name: impl Into<String>) -> Result<Self> {
        crate::linalg::ensure_finite(&x, "data matrix")?;
        if let Some(l) = &labels {
            if l.len() != x.nrows() {
                return Err(Error::invalid(format!(
                    "{} labels for {} rows",
                    l.len(),
                    x.nrows()
                )));
            }
        }
        Ok(Self {
            x,
            labels,
            name: name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Number of distinct classes implied by the labels (`max + 1`), if labelled.
    pub fn class_count(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }
}

/// Centers every column and scales it to unit sample variance (divisor `n - 1`).
///
/// Zero-variance columns are centered but left unscaled.
pub fn standardize(x: &Matrix) -> Result<Matrix> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid(format!(
            "standardization needs at least 2 rows, got {n}"
        )));
    }
    crate::linalg::ensure_finite(x, "data matrix")?;
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let var = col.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if sd > 1e-12 * mean.abs().max(1.0) {
            col.scale_mut(1.0 / sd);
        } else {
            col.fill(0.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_column_uses_sample_std() {
        let x = Matrix::from_column_slice(2, 1, &[1.0, 3.0]);
        let z = standardize(&x).unwrap();
        let expected = 1.0 / 2f64.sqrt();
        assert!((z[(0, 0)] + expected).abs() < 1e-12);
        assert!((z[(1, 0)] - expected).abs() < 1e-12);
    }

    #[test]
    fn constant_column_becomes_zero() {
        let x = Matrix::from_column_slice(3, 1, &[5.0, 5.0, 5.0]);
        let z = standardize(&x).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn random_columns_get_zero_mean_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::from_fn(20, 3, |_, j| {
            rng.random::<f64>() * (j as f64 + 1.0) * 10.0 - 4.0
        });
        let z = standardize(&x).unwrap();
        for col in z.column_iter() {
            let mean = col.sum() / 20.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 19.0;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn standardize_needs_two_rows() {
        let x = Matrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(matches!(standardize(&x), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn dataset_rejects_mismatched_labels() {
        let x = Matrix::zeros(3, 2);
        assert!(LabeledDataset::new(x, Some(vec![0, 1]), "bad").is_err());
    }
}
