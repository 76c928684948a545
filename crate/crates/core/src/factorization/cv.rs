use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, predict, FitConfig};
use crate::data::SparseRatingMatrix;
use crate::error::{Result, SurveyError};
use crate::rng;

/// Repeated random hold-out validation over a `(k, γ)` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub k_grid: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub holdout_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    pub rel_tol: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k_grid: (1..=8).collect(),
            gamma_grid: vec![0.0, 0.1, 1.0, 10.0, 100.0],
            holdout_fraction: 0.2,
            repeats: 10,
            seed: 0,
            max_sweeps: 500,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub k: usize,
    pub gamma: f64,
    pub mean_rmse: f64,
    pub sd_rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<CvCell>,
    pub best: FitConfig,
    /// Human-readable description of the validation scheme.
    pub scheme: String,
}

impl CvReport {
    /// The grid as CSV with header `k,gamma,mean_rmse,sd_rmse`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,gamma,mean_rmse,sd_rmse\n");
        for c in &self.grid {
            let _ = writeln!(out, "{},{},{},{}", c.k, c.gamma, c.mean_rmse, c.sd_rmse);
        }
        out
    }
}

struct Split {
    train: SparseRatingMatrix,
    validation: Vec<(usize, usize, f64)>,
}

fn split(matrix: &SparseRatingMatrix, fraction: f64, seed: u64, repeat: usize) -> Result<Split> {
    let nnz = matrix.nnz();
    let mut order: Vec<usize> = (0..nnz).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::tag::CV_SPLIT, repeat as u64]));
    let held = ((fraction * nnz as f64).round() as usize).clamp(1, nnz - 1);
    let mut is_held = vec![false; nnz];
    for &p in &order[..held] {
        is_held[p] = true;
    }
    let entries = matrix.entries();
    let validation = (0..nnz).filter(|&p| is_held[p]).map(|p| entries[p]).collect();
    let train = SparseRatingMatrix::from_triplets(
        matrix.nrows(),
        matrix.ncols(),
        (0..nnz).filter(|&p| !is_held[p]).map(|p| entries[p]),
    )?;
    Ok(Split { train, validation })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

/// Scores every `(k, γ)` pair by validation RMSE over `repeats` random
/// index-level splits of the observed cells and picks the minimizer.
///
/// All grid cells see the same splits. Ties go to the smaller `k`, then the
/// smaller `γ`.
pub fn cross_validate(matrix: &SparseRatingMatrix, config: &CvConfig) -> Result<CvReport> {
    if !(config.holdout_fraction > 0.0 && config.holdout_fraction < 1.0) {
        return Err(SurveyError::InvalidArgument(format!(
            "holdout_fraction must lie in (0, 1), got {}",
            config.holdout_fraction
        )));
    }
    if config.k_grid.is_empty() || config.gamma_grid.is_empty() {
        return Err(SurveyError::InvalidArgument("k and gamma grids must be nonempty".into()));
    }
    if config.repeats == 0 {
        return Err(SurveyError::InvalidArgument("repeats must be at least 1".into()));
    }
    if matrix.nnz() < 10 {
        return Err(SurveyError::InvalidArgument(format!("need at least 10 observed cells, got {}", matrix.nnz())));
    }

    let cells: Vec<(usize, f64)> =
        config.k_grid.iter().flat_map(|&k| config.gamma_grid.iter().map(move |&g| (k, g))).collect();
    for &(k, gamma) in &cells {
        FitConfig { k, gamma, max_sweeps: config.max_sweeps, rel_tol: config.rel_tol, ..FitConfig::default() }
            .validate()?;
    }
    let splits = (0..config.repeats)
        .map(|r| split(matrix, config.holdout_fraction, config.seed, r))
        .collect::<Result<Vec<_>>>()?;

    let tasks: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..config.repeats).map(move |r| (c, r))).collect();
    let rmses = tasks
        .par_iter()
        .map(|&(c, r)| {
            let (k, gamma) = cells[c];
            let cfg = FitConfig {
                k,
                gamma,
                max_sweeps: config.max_sweeps,
                rel_tol: config.rel_tol,
                seed: rng::derive_seed(config.seed, &[r as u64]),
                init_scale: None,
                init: Default::default(),
            };
            let s = &splits[r];
            let model = fit(&s.train, &cfg)?;
            let sse = s
                .validation
                .iter()
                .map(|&(i, j, x)| predict(&model, i, j).map(|p| (p - x).powi(2)))
                .sum::<Result<f64>>()?;
            Ok((sse / s.validation.len() as f64).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;

    let grid: Vec<CvCell> = cells
        .iter()
        .enumerate()
        .map(|(c, &(k, gamma))| {
            let (mean_rmse, sd_rmse) = mean_sd(&rmses[c * config.repeats..(c + 1) * config.repeats]);
            CvCell { k, gamma, mean_rmse, sd_rmse }
        })
        .collect();
    let best = grid
        .iter()
        .min_by(|a, b| a.mean_rmse.total_cmp(&b.mean_rmse).then(a.k.cmp(&b.k)).then(a.gamma.total_cmp(&b.gamma)))
        .expect("grid is nonempty");
    let best = FitConfig {
        k: best.k,
        gamma: best.gamma,
        max_sweeps: config.max_sweeps,
        rel_tol: config.rel_tol,
        seed: config.seed,
        init_scale: None,
        init: Default::default(),
    };
    Ok(CvReport {
        grid,
        best,
        scheme: format!("random hold-out of {} of observed cells, {} repeats", config.holdout_fraction, config.repeats),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SparseRatingMatrix {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| (0..4).map(|j| (i * j) as f64 * 0.5 + 1.0).collect()).collect();
        SparseRatingMatrix::from_dense(&rows).unwrap()
    }

    #[test]
    fn single_cell_grid() {
        let cfg = CvConfig { k_grid: vec![3], gamma_grid: vec![0.5], repeats: 2, ..CvConfig::default() };
        let report = cross_validate(&small(), &cfg).unwrap();
        assert_eq!(report.grid.len(), 1);
        assert_eq!((report.best.k, report.best.gamma), (3, 0.5));
        assert!(report.to_csv().starts_with("k,gamma,mean_rmse,sd_rmse\n3,0.5,"));
    }

    #[test]
    fn invalid_configs() {
        let x = small();
        for bad in [
            CvConfig { holdout_fraction: 0.0, ..CvConfig::default() },
            CvConfig { holdout_fraction: 1.0, ..CvConfig::default() },
            CvConfig { k_grid: vec![], ..CvConfig::default() },
            CvConfig { gamma_grid: vec![], ..CvConfig::default() },
            CvConfig { repeats: 0, ..CvConfig::default() },
        ] {
            assert!(matches!(cross_validate(&x, &bad), Err(SurveyError::InvalidArgument(_))));
        }
        let tiny = SparseRatingMatrix::from_dense(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(cross_validate(&tiny, &CvConfig::default()).is_err());
    }

    #[test]
    fn ties_prefer_smaller_k_then_gamma() {
        // A constant-zero matrix is fitted perfectly by every configuration.
        let x = SparseRatingMatrix::from_dense(&vec![vec![0.0; 4]; 4]).unwrap();
        let cfg = CvConfig { k_grid: vec![3, 1, 2], gamma_grid: vec![1.0, 0.5], repeats: 2, ..CvConfig::default() };
        let report = cross_validate(&x, &cfg).unwrap();
        assert_eq!((report.best.k, report.best.gamma), (1, 0.5));
    }
}
