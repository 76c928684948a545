//! Python bindings. Matrices, models and datasets are wrapped as classes; the
//! remaining operations are module functions returning plain Python values.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use survey_core as core;
use survey_core::{FitConfig, Init, ModelFile, Schedule, SurveyError, SurveyScale, SweepConfig, SweepMode};

create_exception!(simplesurvey, SurveyFailure, PyException, "Raised for any error reported by the survey core.");

fn err(e: SurveyError) -> PyErr {
    SurveyFailure::new_err(format!("{}: {e}", e.kind()))
}

fn scale(name: &str) -> PyResult<SurveyScale> {
    name.parse().map_err(|_| PyValueError::new_err(format!("unknown scale {name:?}; use r2, r5, r100 or pc")))
}

fn init(name: &str) -> PyResult<Init> {
    match name {
        "spectral" => Ok(Init::Spectral),
        "gaussian" => Ok(Init::Gaussian),
        _ => Err(PyValueError::new_err(format!("unknown init {name:?}; use spectral or gaussian"))),
    }
}

/// Sparse respondent × item matrix of observed values.
#[pyclass(name = "RatingMatrix", module = "simplesurvey", frozen)]
struct PyRatingMatrix {
    inner: core::SparseRatingMatrix,
}

#[pymethods]
impl PyRatingMatrix {
    #[new]
    fn new(m: usize, n: usize, entries: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        Ok(Self { inner: core::SparseRatingMatrix::from_triplets(m, n, entries).map_err(err)? })
    }

    #[staticmethod]
    fn from_dense(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: core::SparseRatingMatrix::from_dense(&rows).map_err(err)? })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.nrows(), self.inner.ncols())
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.inner.get(i, j)
    }

    fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.inner.entries().to_vec()
    }

    /// Per-row z-scores; constant rows become zeros.
    fn z_normalize(&self) -> PyResult<Self> {
        Ok(Self { inner: core::z_normalize(&self.inner).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("RatingMatrix({}x{}, nnz={})", self.inner.nrows(), self.inner.ncols(), self.inner.nnz())
    }
}

/// Item coordinates and variance fractions.
type Embedding = (Vec<(f64, f64)>, Vec<f64>);

/// Fitted factors `U` (m × k) and `V` (n × k).
#[pyclass(name = "FactorModel", module = "simplesurvey", frozen)]
struct PyFactorModel {
    inner: core::FactorModel,
}

#[pymethods]
impl PyFactorModel {
    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn objective_history(&self) -> Vec<f64> {
        self.inner.objective_history.clone()
    }

    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.u)
    }

    #[getter]
    fn v(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.v)
    }

    /// Prediction for one cell, with mean fallbacks for cold-start cells.
    fn predict(&self, i: usize, j: usize) -> PyResult<f64> {
        core::predict(&self.inner, i, j).map_err(err)
    }

    fn objective(&self, matrix: &PyRatingMatrix) -> PyResult<f64> {
        core::objective(&self.inner, &matrix.inner).map_err(err)
    }

    /// Dense `U Vᵀ`.
    fn completed(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.completed())
    }

    /// `(coords, variance_fractions)` on the two leading latent dimensions.
    fn embedding(&self, matrix: &PyRatingMatrix) -> PyResult<Embedding> {
        let e = core::latent_embedding(&self.inner, &matrix.inner).map_err(err)?;
        Ok((e.coords.iter().map(|c| (c[0], c[1])).collect(), e.variance_fractions))
    }

    fn to_json(&self) -> PyResult<String> {
        ModelFile::Factor(self.inner.clone()).to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        match ModelFile::from_json(text).map_err(err)? {
            ModelFile::Factor(inner) => Ok(Self { inner }),
            ModelFile::Comparison(_) => Err(PyValueError::new_err("JSON holds a comparison model")),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "FactorModel({}x{}, k={}, gamma={})",
            self.inner.nrows(),
            self.inner.ncols(),
            self.inner.k(),
            self.inner.gamma
        )
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Survey responses with their training and held-out parts.
#[pyclass(name = "Dataset", module = "simplesurvey", frozen)]
struct PyDataset {
    inner: core::Dataset,
}

fn fit_config(k: usize, gamma: f64, seed: u64, max_sweeps: usize, init_name: &str) -> PyResult<FitConfig> {
    Ok(FitConfig { k, gamma, seed, max_sweeps, init: init(init_name)?, ..FitConfig::default() })
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (scale, ratings=None, comparisons=None))]
    fn load(scale: &str, ratings: Option<PathBuf>, comparisons: Option<PathBuf>) -> PyResult<Self> {
        let inner = core::load_dataset(ratings.as_deref(), comparisons.as_deref(), self::scale(scale)?).map_err(err)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (comparisons, ratings=None))]
    fn save(&self, comparisons: PathBuf, ratings: Option<PathBuf>) -> PyResult<()> {
        self.inner.save(ratings.as_deref(), &comparisons).map_err(err)
    }

    #[getter]
    fn scale(&self) -> &'static str {
        self.inner.scale.name()
    }

    #[getter]
    fn respondent_ids(&self) -> Vec<String> {
        self.inner.respondent_ids.clone()
    }

    #[getter]
    fn item_ids(&self) -> Vec<String> {
        self.inner.item_ids.clone()
    }

    #[getter]
    fn ratings(&self) -> PyRatingMatrix {
        PyRatingMatrix { inner: self.inner.ratings.clone() }
    }

    #[getter]
    fn training_comparisons(&self) -> usize {
        self.inner.training_comparisons.len()
    }

    #[getter]
    fn heldout_comparisons(&self) -> usize {
        self.inner.heldout_comparisons.len()
    }

    /// The matrix the factor model is fitted on (z-scored for r5 and r100).
    fn training_matrix(&self) -> PyResult<PyRatingMatrix> {
        Ok(PyRatingMatrix { inner: core::training_matrix(&self.inner).map_err(err)? })
    }

    /// Item ids best first, by mean rating or borda score.
    fn ranking(&self) -> PyResult<Vec<String>> {
        let r = core::dataset_ranking(&self.inner).map_err(err)?;
        Ok(r.order.iter().map(|&i| self.inner.item_ids[i].clone()).collect())
    }

    #[pyo3(signature = (block_size=8))]
    fn summarize<'py>(&self, py: Python<'py>, block_size: usize) -> PyResult<Bound<'py, PyDict>> {
        let s = core::summarize(&self.inner, block_size).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("histogram", s.histogram.into_iter().collect::<Vec<(i64, u64)>>())?;
        d.set_item("block_median_seconds", s.block_median_seconds)?;
        Ok(d)
    }

    #[pyo3(signature = (k=2, gamma=1.0, seed=0, max_sweeps=500, init="spectral"))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        k: usize,
        gamma: f64,
        seed: u64,
        max_sweeps: usize,
        init: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let config = fit_config(k, gamma, seed, max_sweeps, init)?;
        let r = py.detach(|| core::evaluate_dataset(&self.inner, &config, &Schedule::default())).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("individual_error", r.individual_error)?;
        d.set_item("aggregate_error", r.aggregate_error)?;
        d.set_item("per_respondent", r.per_respondent)?;
        Ok(d)
    }

    /// `[(size, mean_error, sd, draws), ...]` for the subsampling sweep.
    #[pyo3(signature = (sizes=None, draws=100, k=2, gamma=1.0, mode="individual", seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn sweep(
        &self,
        py: Python<'_>,
        sizes: Option<Vec<usize>>,
        draws: usize,
        k: usize,
        gamma: f64,
        mode: &str,
        seed: u64,
    ) -> PyResult<Vec<(usize, f64, f64, usize)>> {
        let mode = match mode {
            "individual" => SweepMode::Individual,
            "aggregate" => SweepMode::Aggregate,
            other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
        };
        let d = SweepConfig::default();
        let config = SweepConfig {
            sizes: sizes.unwrap_or(d.sizes),
            draws,
            fit: FitConfig { k, gamma, ..FitConfig::default() },
            mode,
            seed,
            ..d
        };
        let curve = py.detach(|| core::run_sweep(&self.inner, &config)).map_err(err)?;
        Ok(curve.points.iter().map(|p| (p.size, p.mean_error, p.sd, p.draws)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Dataset({}, {} respondents, {} items)", self.inner.scale, self.inner.m(), self.inner.n())
    }
}

#[pyfunction]
#[pyo3(signature = (matrix, k=2, gamma=1.0, seed=0, max_sweeps=500, init="spectral"))]
fn fit(
    py: Python<'_>,
    matrix: &PyRatingMatrix,
    k: usize,
    gamma: f64,
    seed: u64,
    max_sweeps: usize,
    init: &str,
) -> PyResult<PyFactorModel> {
    let config = fit_config(k, gamma, seed, max_sweeps, init)?;
    let inner = py.detach(|| core::fit(&matrix.inner, &config)).map_err(err)?;
    Ok(PyFactorModel { inner })
}

/// Returns `{"grid": [(k, gamma, mean_rmse, sd_rmse), ...], "best_k", "best_gamma"}`.
#[pyfunction]
#[pyo3(signature = (matrix, k_grid, gamma_grid, holdout_fraction=0.2, repeats=10, seed=0))]
fn cross_validate<'py>(
    py: Python<'py>,
    matrix: &PyRatingMatrix,
    k_grid: Vec<usize>,
    gamma_grid: Vec<f64>,
    holdout_fraction: f64,
    repeats: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = core::CvConfig { k_grid, gamma_grid, holdout_fraction, repeats, seed, ..core::CvConfig::default() };
    let report = py.detach(|| core::cross_validate(&matrix.inner, &config)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("grid", report.grid.iter().map(|c| (c.k, c.gamma, c.mean_rmse, c.sd_rmse)).collect::<Vec<_>>())?;
    d.set_item("best_k", report.best.k)?;
    d.set_item("best_gamma", report.best.gamma)?;
    Ok(d)
}

/// Simulates a world and one survey over it.
#[pyfunction]
#[pyo3(signature = (scale, respondents=50, items=100, true_rank=3, noise_sd=0.5, seed=0,
                    ratings_per_respondent=80, heldout_per_respondent=20, consistent=false))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    scale: &str,
    respondents: usize,
    items: usize,
    true_rank: usize,
    noise_sd: f64,
    seed: u64,
    ratings_per_respondent: usize,
    heldout_per_respondent: usize,
    consistent: bool,
) -> PyResult<PyDataset> {
    let mut world = core::simulate_world(respondents, items, true_rank, noise_sd, seed).map_err(err)?;
    if consistent {
        world = world.aligned();
    }
    let inner = core::generate_responses(&world, self::scale(scale)?, ratings_per_respondent, heldout_per_respondent)
        .map_err(err)?;
    Ok(PyDataset { inner })
}

#[pyfunction]
fn coverage_probability(rated: u64, total: u64) -> PyResult<f64> {
    core::coverage_probability(rated, total).map_err(err)
}

#[pyfunction]
fn distinct_pair_count(n: u64) -> u64 {
    core::distinct_pair_count(n)
}

/// Borda scores from `(left, right, left_won)` comparisons over `n` items.
#[pyfunction]
fn borda_scores(comparisons: Vec<(usize, usize, bool)>, n: usize) -> PyResult<Vec<f64>> {
    let list = comparisons
        .into_iter()
        .map(|(left, right, left_won)| core::Comparison {
            respondent: 0,
            left,
            right,
            winner: if left_won { core::Side::Left } else { core::Side::Right },
            elapsed_ms: 0,
        })
        .collect();
    let set = core::ComparisonSet::new(list).map_err(err)?;
    Ok(core::borda_scores(&set, n).map_err(err)?.scores)
}

#[pymodule]
fn simplesurvey(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SurveyFailure", m.py().get_type::<SurveyFailure>())?;
    m.add_class::<PyRatingMatrix>()?;
    m.add_class::<PyFactorModel>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_probability, m)?)?;
    m.add_function(wrap_pyfunction!(distinct_pair_count, m)?)?;
    m.add_function(wrap_pyfunction!(borda_scores, m)?)?;
    Ok(())
}
