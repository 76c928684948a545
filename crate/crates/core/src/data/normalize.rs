use super::SparseRatingMatrix;
use crate::error::{Result, SurveyError};

/// Standardizes each respondent's observed ratings to mean 0 and population
/// standard deviation 1. Constant rows become all zeros; the sparsity
/// pattern is unchanged.
pub fn z_normalize(matrix: &SparseRatingMatrix) -> Result<SparseRatingMatrix> {
    if matrix.is_empty() {
        return Err(SurveyError::Empty("rating matrix"));
    }
    let stats: Vec<(f64, f64)> = (0..matrix.nrows())
        .map(|i| {
            let row = matrix.row(i);
            if row.is_empty() {
                return (0.0, 0.0);
            }
            let len = row.len() as f64;
            let mean = row.iter().map(|e| e.1).sum::<f64>() / len;
            let var = row.iter().map(|e| (e.1 - mean).powi(2)).sum::<f64>() / len;
            (mean, var.sqrt())
        })
        .collect();
    // A row whose spread is pure rounding noise relative to its mean counts as constant.
    matrix.map_values(|i, _, x| {
        let (mean, sd) = stats[i];
        if sd <= 1e-12 * mean.abs().max(1.0) {
            0.0
        } else {
            (x - mean) / sd
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standardizes_small_row() {
        let x = SparseRatingMatrix::from_dense(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let z = z_normalize(&x).unwrap();
        let expect = 1.5f64.sqrt();
        let vals: Vec<f64> = z.row(0).iter().map(|e| e.1).collect();
        assert!((vals[0] + expect).abs() < 1e-12);
        assert!(vals[1].abs() < 1e-12);
        assert!((vals[2] - expect).abs() < 1e-12);
        assert!((expect - 1.224745).abs() < 1e-6);
    }

    #[test]
    fn constant_row_goes_to_zero() {
        let x = SparseRatingMatrix::from_dense(&[vec![4.0, 4.0, 4.0]]).unwrap();
        let z = z_normalize(&x).unwrap();
        assert!(z.entries().iter().all(|e| e.2 == 0.0));
    }

    #[test]
    fn empty_matrix_rejected() {
        let x = SparseRatingMatrix::from_triplets(2, 2, []).unwrap();
        assert!(z_normalize(&x).is_err());
    }

    proptest! {
        #[test]
        fn rows_standardized_and_idempotent(
            cells in prop::collection::vec((0usize..6, 0usize..8, 1i64..=100), 1..40)
        ) {
            let mut seen = std::collections::HashSet::new();
            let cells: Vec<_> = cells.into_iter().filter(|c| seen.insert((c.0, c.1))).map(|(i, j, v)| (i, j, v as f64)).collect();
            let x = SparseRatingMatrix::from_triplets(6, 8, cells).unwrap();
            let z = z_normalize(&x).unwrap();
            let pattern = |m: &SparseRatingMatrix| m.entries().iter().map(|e| (e.0, e.1)).collect::<Vec<_>>();
            prop_assert_eq!(pattern(&x), pattern(&z));
            for i in 0..6 {
                let raw: Vec<f64> = x.row(i).iter().map(|e| e.1).collect();
                let row: Vec<f64> = z.row(i).iter().map(|e| e.1).collect();
                if raw.iter().any(|&v| v != raw[0]) {
                    let len = row.len() as f64;
                    let mean = row.iter().sum::<f64>() / len;
                    let sd = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len).sqrt();
                    prop_assert!(mean.abs() < 1e-12);
                    prop_assert!((sd - 1.0).abs() < 1e-12);
                }
            }
            let twice = z_normalize(&z).unwrap();
            for (a, b) in z.entries().iter().zip(twice.entries()) {
                prop_assert!((a.2 - b.2).abs() < 1e-12);
            }
        }
    }
}
