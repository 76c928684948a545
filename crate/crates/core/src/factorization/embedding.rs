use serde::{Deserialize, Serialize};

use super::{check_dims, FactorModel};
use crate::data::SparseRatingMatrix;
use crate::error::Result;

/// Items placed on the two leading orthogonal dimensions of the completed
/// matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemEmbedding {
    /// One `[dim1, dim2]` pair per item.
    pub coords: Vec<[f64; 2]>,
    /// Share of the completed matrix's squared Frobenius norm carried by each
    /// of the `k` dimensions, descending.
    pub variance_fractions: Vec<f64>,
}

/// Orthogonalizes the fitted factors and returns item coordinates on the
/// leading two dimensions.
///
/// The completed matrix `U Vᵀ` is decomposed as `Q_u (R_u R_vᵀ) Q_vᵀ`; an
/// SVD of the small core gives the singular values and, through `Q_v`, the
/// right singular vectors. Coordinates are those vectors scaled by their
/// singular values, so they are unchanged by any rotation applied jointly to
/// the columns of `U` and `V`. Each axis is signed so that its largest
/// magnitude coordinate is positive.
pub fn latent_embedding(model: &FactorModel, matrix: &SparseRatingMatrix) -> Result<ItemEmbedding> {
    check_dims(model, matrix)?;
    let (n, k) = (model.ncols(), model.k());

    let qr_u = model.u.clone().qr();
    let qr_v = model.v.clone().qr();
    let core = qr_u.r() * qr_v.r().transpose();
    let q_v = qr_v.q();
    let svd = core.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&d| svd.singular_values[d]).collect();
    let total: f64 = sigma.iter().map(|s| s * s).sum();

    let mut variance_fractions: Vec<f64> =
        sigma.iter().map(|s| if total > 0.0 { s * s / total } else { 0.0 }).collect();
    variance_fractions.resize(k, 0.0);
    variance_fractions.truncate(k);

    let mut coords = vec![[0.0; 2]; n];
    for (axis, &d) in order.iter().take(2).enumerate() {
        // Column d of V_core, mapped back to item space.
        let column = &q_v * v_t.row(d).transpose();
        let mut values: Vec<f64> = column.iter().map(|x| x * svd.singular_values[d]).collect();
        let pivot = values.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            values.iter_mut().for_each(|x| *x = -*x);
        }
        for (c, x) in coords.iter_mut().zip(values) {
            c[axis] = x;
        }
    }
    Ok(ItemEmbedding { coords, variance_fractions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{fit, FitConfig};
    use nalgebra::DMatrix;

    fn with_factors(u: DMatrix<f64>, v: DMatrix<f64>) -> (FactorModel, SparseRatingMatrix) {
        let x = SparseRatingMatrix::from_triplets(u.nrows(), v.nrows(), [(0, 0, 1.0)]).unwrap();
        let mut model = fit(&x, &FitConfig { k: u.ncols(), max_sweeps: 1, ..FitConfig::default() }).unwrap();
        model.u = u;
        model.v = v;
        (model, x)
    }

    #[test]
    fn analytic_three_one() {
        // U Vᵀ = diag(3, 1) padded: singular values {3, 1}.
        let u = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let v = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let (model, x) = with_factors(u, v);
        let e = latent_embedding(&model, &x).unwrap();
        assert!((e.variance_fractions[0] - 0.9).abs() < 1e-12);
        assert!((e.variance_fractions[1] - 0.1).abs() < 1e-12);
        assert!((e.coords[0][0] - 3.0).abs() < 1e-12);
        assert!((e.coords[1][1] - 1.0).abs() < 1e-12);
        assert!(e.coords[2].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn rank_one_second_axis_zero() {
        let u = DMatrix::from_row_slice(2, 1, &[1.0, -2.0]);
        let v = DMatrix::from_row_slice(3, 1, &[0.5, 1.0, -1.0]);
        let (model, x) = with_factors(u, v);
        let e = latent_embedding(&model, &x).unwrap();
        assert_eq!(e.variance_fractions, vec![1.0]);
        assert!(e.coords.iter().all(|c| c[1] == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let u = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let v = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
        let (model, _) = with_factors(u, v);
        let other = SparseRatingMatrix::from_triplets(5, 3, [(0, 0, 1.0)]).unwrap();
        assert!(latent_embedding(&model, &other).is_err());
    }
}
