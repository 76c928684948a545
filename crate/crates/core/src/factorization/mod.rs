//! Squared-loss matrix factorization with a Frobenius penalty:
//!
//! ```text
//! minimize  Σ_{(i,j) ∈ Ω} (x_ij − u_i·v_j)²  +  γ (‖U‖²_F + ‖V‖²_F)
//! ```
//!
//! `γ = 0` with small `k` is the pure low-rank regime; `γ > 0` with
//! `k = min(m, n)` is the pure low-norm regime. Both run through the same
//! alternating ridge solver.

mod cv;
mod embedding;
pub(crate) mod io;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::SparseRatingMatrix;
use crate::error::{Result, SurveyError};
use crate::rng;

pub use cv::{cross_validate, CvCell, CvConfig, CvReport};
pub use embedding::{latent_embedding, ItemEmbedding};
pub use io::ModelFile;

/// Starting point for the alternating sweeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Leading singular pairs of the zero-filled matrix rescaled by the
    /// inverse observation rate, plus Gaussian jitter at 1% of `init_scale`.
    #[default]
    Spectral,
    /// Zero-mean Gaussian entries with standard deviation `init_scale`.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub k: usize,
    pub gamma: f64,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// Standard deviation of the Gaussian initialization. `None` uses
    /// `sqrt(mean|x| / k)` over the observed entries.
    pub init_scale: Option<f64>,
    pub init: Init,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { k: 2, gamma: 1.0, max_sweeps: 500, rel_tol: 1e-6, seed: 0, init_scale: None, init: Init::Spectral }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(SurveyError::InvalidArgument("rank k must be at least 1".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(SurveyError::InvalidArgument(format!(
                "gamma must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        if self.max_sweeps == 0 {
            return Err(SurveyError::InvalidArgument("max_sweeps must be at least 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(SurveyError::InvalidArgument("rel_tol must be positive".into()));
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(SurveyError::InvalidArgument("init_scale must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Fitted factors plus the fallback statistics used for cold-start cells.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel {
    /// `m × k` respondent factors.
    pub u: DMatrix<f64>,
    /// `n × k` item factors.
    pub v: DMatrix<f64>,
    pub gamma: f64,
    /// Mean training value per respondent, `None` when the row was unobserved.
    pub row_means: Vec<Option<f64>>,
    /// Mean training value per item, `None` when the column was unobserved.
    pub col_means: Vec<Option<f64>>,
    pub global_mean: f64,
    /// Objective after initialization and after each sweep.
    pub objective_history: Vec<f64>,
}

impl FactorModel {
    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    /// The dense completed matrix `U Vᵀ` (no fallbacks applied).
    pub fn completed(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }

    /// Predictions for every item for respondent `i`.
    pub fn predict_row(&self, i: usize) -> Result<Vec<f64>> {
        (0..self.ncols()).map(|j| predict(self, i, j)).collect()
    }
}

fn check_dims(model: &FactorModel, matrix: &SparseRatingMatrix) -> Result<()> {
    if model.u.nrows() != matrix.nrows() || model.v.nrows() != matrix.ncols() || model.u.ncols() != model.v.ncols() {
        return Err(SurveyError::DimensionMismatch(format!(
            "model is {}x{} (k={}/{}), matrix is {}x{}",
            model.u.nrows(),
            model.v.nrows(),
            model.u.ncols(),
            model.v.ncols(),
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    Ok(())
}

fn dot_rows(u: &DMatrix<f64>, i: usize, v: &DMatrix<f64>, j: usize) -> f64 {
    (0..u.ncols()).map(|d| u[(i, d)] * v[(j, d)]).sum()
}

fn penalized_loss(u: &DMatrix<f64>, v: &DMatrix<f64>, gamma: f64, matrix: &SparseRatingMatrix) -> f64 {
    let fit: f64 = matrix.entries().iter().map(|&(i, j, x)| (x - dot_rows(u, i, v, j)).powi(2)).sum();
    fit + gamma * (u.norm_squared() + v.norm_squared())
}

/// The penalized squared-error objective of `model` on the observed cells.
pub fn objective(model: &FactorModel, matrix: &SparseRatingMatrix) -> Result<f64> {
    check_dims(model, matrix)?;
    Ok(penalized_loss(&model.u, &model.v, model.gamma, matrix))
}

/// Minimizes `Σ (x − w·f_j)² + γ‖w‖²` over `w` for the observations
/// `(j, x)` against the rows `f_j` of `other`.
fn ridge_row(obs: &[(usize, f64)], other: &DMatrix<f64>, gamma: f64) -> DVector<f64> {
    let k = other.ncols();
    if obs.is_empty() {
        return DVector::zeros(k);
    }
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for &(j, x) in obs {
        for a in 0..k {
            let fa = other[(j, a)];
            rhs[a] += x * fa;
            for b in 0..=a {
                gram[(a, b)] += fa * other[(j, b)];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
        gram[(a, a)] += gamma;
    }
    if gamma > 0.0 {
        if let Some(chol) = gram.clone().cholesky() {
            return chol.solve(&rhs);
        }
    }
    // Unpenalized or numerically singular. A full-rank design is solved by
    // QR of `[A; √γ I]`, which avoids squaring its condition number.
    let rows = obs.len() + if gamma > 0.0 { k } else { 0 };
    if rows >= k {
        let mut design = DMatrix::<f64>::zeros(rows, k);
        let mut target = DVector::<f64>::zeros(rows);
        for (r, &(j, x)) in obs.iter().enumerate() {
            design.set_row(r, &other.row(j));
            target[r] = x;
        }
        if gamma > 0.0 {
            for a in 0..k {
                design[(obs.len() + a, a)] = gamma.sqrt();
            }
        }
        let qr = design.qr();
        let r = qr.r();
        let diag = r.diagonal().abs();
        if diag.min() > diag.max() * 1e-10 {
            if let Some(w) = r.solve_upper_triangular(&(qr.q().transpose() * target)) {
                return w;
            }
        }
    }
    // Rank deficient: minimum-norm solution from the eigenpairs of the gram.
    let eig = gram.symmetric_eigen();
    let cutoff = eig.eigenvalues.abs().max() * 1e-12;
    let mut w = DVector::<f64>::zeros(k);
    for (a, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let q = eig.eigenvectors.column(a);
            w += q * (q.dot(&rhs) / lambda);
        }
    }
    w
}

fn sweep(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>, gamma: f64, matrix: &SparseRatingMatrix) {
    for i in 0..matrix.nrows() {
        let row = ridge_row(matrix.row(i), v, gamma);
        u.set_row(i, &row.transpose());
    }
    for j in 0..matrix.ncols() {
        let row = ridge_row(matrix.col(j), u, gamma);
        v.set_row(j, &row.transpose());
    }
}

pub(crate) fn gaussian(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    // Fill row by row so the draw order does not depend on storage layout.
    let mut out = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for d in 0..cols {
            let z: f64 = rng.sample(StandardNormal);
            out[(i, d)] = z * scale;
        }
    }
    out
}

/// Balanced factors `U_k Σ_k^½`, `V_k Σ_k^½` of the zero-filled matrix scaled
/// by `mn / |Ω|`. Columns beyond the available singular pairs stay zero.
fn spectral_start(matrix: &SparseRatingMatrix, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = (matrix.nrows(), matrix.ncols());
    let rate = (m * n) as f64 / matrix.nnz() as f64;
    let mut dense = DMatrix::<f64>::zeros(m, n);
    for &(i, j, x) in matrix.entries() {
        dense[(i, j)] = x * rate;
    }
    let svd = dense.svd(true, true);
    let (left, right_t) = (svd.u.expect("left vectors"), svd.v_t.expect("right vectors"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut u = DMatrix::zeros(m, k);
    let mut v = DMatrix::zeros(n, k);
    for (d, &p) in order.iter().take(k).enumerate() {
        let root = svd.singular_values[p].sqrt();
        u.set_column(d, &(left.column(p) * root));
        v.set_column(d, &(right_t.row(p).transpose() * root));
    }
    (u, v)
}

fn means(lists: impl Iterator<Item = Vec<f64>>) -> Vec<Option<f64>> {
    lists.map(|xs| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)).collect()
}

/// Fits the factorization by alternating closed-form ridge sweeps.
///
/// Each sweep solves every respondent row against the fixed item factors,
/// then every item row against the new respondent factors; each row update
/// is an exact minimizer, so the objective never increases. Iteration stops
/// once a sweep lowers the objective by less than `rel_tol` relative to the
/// previous value, or after `max_sweeps`.
pub fn fit(matrix: &SparseRatingMatrix, config: &FitConfig) -> Result<FactorModel> {
    config.validate()?;
    if matrix.is_empty() {
        return Err(SurveyError::Empty("rating matrix"));
    }
    let (m, n, k) = (matrix.nrows(), matrix.ncols(), config.k);
    let scale = config.init_scale.unwrap_or_else(|| {
        let mean_abs = matrix.entries().iter().map(|e| e.2.abs()).sum::<f64>() / matrix.nnz() as f64;
        let s = (mean_abs / k as f64).sqrt();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    });
    let mut init_rng = rng::stream(config.seed, &[rng::tag::INIT]);
    let (mut u, mut v) = match config.init {
        Init::Gaussian => (gaussian(m, k, scale, &mut init_rng), gaussian(n, k, scale, &mut init_rng)),
        Init::Spectral => {
            let (su, sv) = spectral_start(matrix, k);
            (su + gaussian(m, k, 0.01 * scale, &mut init_rng), sv + gaussian(n, k, 0.01 * scale, &mut init_rng))
        }
    };

    // Absolute tolerance: once the residual norm is 1e-10 of the data norm,
    // an unpenalized fit has interpolated and further sweeps only shuffle
    // rounding error amplified by the factors' conditioning.
    let sum_sq: f64 = matrix.entries().iter().map(|e| e.2 * e.2).sum();
    let round_off = 1e-20 * sum_sq;

    let mut current = penalized_loss(&u, &v, config.gamma, matrix);
    let mut history = vec![current];
    for _ in 0..config.max_sweeps {
        let (prev_u, prev_v) = (u.clone(), v.clone());
        sweep(&mut u, &mut v, config.gamma, matrix);
        let next = penalized_loss(&u, &v, config.gamma, matrix);
        if !next.is_finite() {
            return Err(SurveyError::Numerical(format!("objective became {next} during alternating sweeps")));
        }
        history.push(next);
        if next > current {
            // Rounding noise at the optimum; keep the better iterate.
            u = prev_u;
            v = prev_v;
            break;
        }
        let decrease = current - next;
        current = next;
        if current <= round_off || decrease <= config.rel_tol * (current + decrease) {
            break;
        }
    }

    let row_means = means((0..m).map(|i| matrix.row(i).iter().map(|e| e.1).collect()));
    let col_means = means((0..n).map(|j| matrix.col(j).iter().map(|e| e.1).collect()));
    Ok(FactorModel {
        u,
        v,
        gamma: config.gamma,
        row_means,
        col_means,
        global_mean: matrix.mean().unwrap_or(0.0),
        objective_history: history,
    })
}

/// Predicted value for respondent `i` and item `j`.
///
/// Cells whose row and column both had training data get `u_i·v_j`. An
/// unobserved respondent falls back to the item mean, an unobserved item to
/// the respondent mean, and a cell with neither to the global mean.
pub fn predict(model: &FactorModel, i: usize, j: usize) -> Result<f64> {
    if i >= model.nrows() {
        return Err(SurveyError::IndexOutOfRange { what: "respondents", index: i, size: model.nrows() });
    }
    if j >= model.ncols() {
        return Err(SurveyError::IndexOutOfRange { what: "items", index: j, size: model.ncols() });
    }
    Ok(match (model.row_means[i], model.col_means[j]) {
        (Some(_), Some(_)) => dot_rows(&model.u, i, &model.v, j),
        (None, Some(col)) => col,
        (Some(row), None) => row,
        (None, None) => model.global_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_from(u: &[f64], v: &[f64], k: usize, gamma: f64, x: &SparseRatingMatrix) -> FactorModel {
        let mut m = fit(x, &FitConfig { k, max_sweeps: 1, ..FitConfig::default() }).unwrap();
        m.u = DMatrix::from_row_slice(u.len() / k, k, u);
        m.v = DMatrix::from_row_slice(v.len() / k, k, v);
        m.gamma = gamma;
        m
    }

    #[test]
    fn objective_examples() {
        let x = SparseRatingMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 2.0), (1, 1, -3.0)]).unwrap();
        let zero = model_from(&[0.0, 0.0], &[0.0, 0.0], 1, 5.0, &x);
        assert_eq!(objective(&zero, &x).unwrap(), 1.0 + 4.0 + 9.0);

        let exact = model_from(&[1.0, 2.0], &[3.0, -1.5], 1, 0.0, &x);
        let y = SparseRatingMatrix::from_dense(&[vec![3.0, -1.5], vec![6.0, -3.0]]).unwrap();
        assert_eq!(objective(&exact, &y).unwrap(), 0.0);

        let one = SparseRatingMatrix::from_dense(&[vec![1.0]]).unwrap();
        let m = model_from(&[1.0], &[1.0], 1, 2.0, &one);
        assert_eq!(objective(&m, &one).unwrap(), 4.0);

        let bigger = SparseRatingMatrix::from_dense(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(objective(&m, &bigger), Err(SurveyError::DimensionMismatch(_))));
    }

    #[test]
    fn heavy_penalty_shrinks_predictions() {
        let x = SparseRatingMatrix::from_dense(&[vec![5.0, 1.0, 3.0], vec![2.0, 4.0, 4.0]]).unwrap();
        let m = fit(&x, &FitConfig { k: 2, gamma: 1e6, ..FitConfig::default() }).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!(predict(&m, i, j).unwrap().abs() < 1e-3);
            }
        }
    }

    #[test]
    fn fallbacks() {
        // Row 2 and column 3 are entirely unobserved.
        let x = SparseRatingMatrix::from_triplets(3, 4, [(0, 0, 1.0), (0, 1, 3.0), (1, 0, 5.0), (1, 2, 2.0)]).unwrap();
        let m = fit(&x, &FitConfig::default()).unwrap();
        assert_eq!(predict(&m, 2, 0).unwrap(), 3.0);
        assert_eq!(predict(&m, 2, 1).unwrap(), 3.0);
        assert_eq!(predict(&m, 0, 3).unwrap(), 2.0);
        assert_eq!(predict(&m, 2, 3).unwrap(), 11.0 / 4.0);
        assert!(predict(&m, 3, 0).is_err());
        assert!(predict(&m, 0, 4).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let empty = SparseRatingMatrix::from_triplets(2, 2, []).unwrap();
        assert!(matches!(fit(&empty, &FitConfig::default()), Err(SurveyError::Empty(_))));
        let x = SparseRatingMatrix::from_dense(&[vec![1.0]]).unwrap();
        for bad in [
            FitConfig { k: 0, ..FitConfig::default() },
            FitConfig { gamma: -1.0, ..FitConfig::default() },
            FitConfig { rel_tol: 0.0, ..FitConfig::default() },
            FitConfig { max_sweeps: 0, ..FitConfig::default() },
            FitConfig { init_scale: Some(0.0), ..FitConfig::default() },
        ] {
            assert!(fit(&x, &bad).is_err());
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let x =
            SparseRatingMatrix::from_triplets(4, 5, [(0, 0, 1.0), (1, 2, 3.0), (2, 4, -1.0), (3, 1, 2.0), (0, 3, 0.5)])
                .unwrap();
        let cfg = FitConfig { k: 3, gamma: 0.1, seed: 11, ..FitConfig::default() };
        let a = fit(&x, &cfg).unwrap();
        let b = fit(&x, &cfg).unwrap();
        assert_eq!(a.objective_history, b.objective_history);
        let c = fit(&x, &FitConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.objective_history[0], c.objective_history[0]);
    }
}
