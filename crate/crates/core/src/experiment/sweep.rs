use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparison::{fit_comparisons_with, Schedule};
use crate::data::{z_normalize, Comparison, ComparisonSet, Dataset, SparseRatingMatrix};
use crate::error::{Result, SurveyError};
use crate::evaluation::{
    aggregate_test_error, borda_scores, build_aggregate_test_matrix, individual_test_error, mean_rating_ranking,
    model_test_error, AggregateTestMatrix, GlobalRanking,
};
use crate::factorization::{fit, FitConfig, ModelFile};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Mean per-respondent error on each respondent's held-out comparisons.
    Individual,
    /// Error of one global ranking against the pooled held-out comparisons.
    Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Training responses kept per respondent.
    pub sizes: Vec<usize>,
    /// Independent subsamples per size.
    pub draws: usize,
    pub fit: FitConfig,
    /// Optimizer schedule for pairwise surveys.
    pub schedule: Schedule,
    pub mode: SweepMode,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sizes: (1..=9).map(|s| 8 * s).collect(),
            draws: 100,
            fit: FitConfig::default(),
            schedule: Schedule::default(),
            mode: SweepMode::Individual,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub mean_error: f64,
    /// Sample standard deviation across draws (0 for a single draw).
    pub sd: f64,
    pub draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub points: Vec<CurvePoint>,
}

impl ErrorCurve {
    /// CSV with header `size,mean_error,sd,draws`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,mean_error,sd,draws\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{},{}", p.size, p.mean_error, p.sd, p.draws);
        }
        out
    }
}

/// A respondent's training responses: `(item, value)` ratings or comparisons.
enum Training {
    Ratings(Vec<Vec<(usize, f64)>>),
    Comparisons(Vec<Vec<Comparison>>),
}

impl Training {
    fn of(dataset: &Dataset) -> Self {
        if dataset.scale.is_rating() {
            let mut rows = vec![Vec::new(); dataset.m()];
            for r in &dataset.rating_records {
                rows[r.respondent].push((r.item, r.value as f64));
            }
            Training::Ratings(rows)
        } else {
            Training::Comparisons(dataset.training_comparisons.by_respondent(dataset.m()))
        }
    }

    fn counts(&self) -> Vec<usize> {
        match self {
            Training::Ratings(r) => r.iter().map(Vec::len).collect(),
            Training::Comparisons(c) => c.iter().map(Vec::len).collect(),
        }
    }
}

fn fit_training(
    dataset: &Dataset,
    training: &Training,
    fit_config: &FitConfig,
    schedule: &Schedule,
) -> Result<ModelFile> {
    match training {
        Training::Ratings(rows) => {
            let matrix = ratings_matrix(dataset, rows)?;
            let matrix = if dataset.scale.normalizes() { z_normalize(&matrix)? } else { matrix };
            Ok(ModelFile::Factor(fit(&matrix, fit_config)?))
        }
        Training::Comparisons(groups) => {
            let set: ComparisonSet = groups.iter().flatten().copied().collect();
            Ok(ModelFile::Comparison(fit_comparisons_with(&set, dataset.m(), dataset.n(), fit_config, schedule)?))
        }
    }
}

/// Per-item predicted scores for every respondent from a fitted model.
pub fn model_scores(model: &ModelFile) -> Result<Vec<Vec<f64>>> {
    match model {
        ModelFile::Factor(f) => (0..f.nrows()).map(|i| f.predict_row(i)).collect(),
        ModelFile::Comparison(c) => (0..c.nrows()).map(|i| c.item_scores(i)).collect(),
    }
}

/// Fits the model for the dataset's scale on all of its training responses:
/// the factor model for rating surveys (on z-normalized values for R5 and
/// R100) and the comparison model for pairwise surveys.
pub fn fit_dataset(dataset: &Dataset, fit_config: &FitConfig, schedule: &Schedule) -> Result<ModelFile> {
    fit_training(dataset, &Training::of(dataset), fit_config, schedule)
}

/// The matrix a rating survey's factor model is fitted on.
pub fn training_matrix(dataset: &Dataset) -> Result<SparseRatingMatrix> {
    if !dataset.scale.is_rating() {
        return Err(SurveyError::InvalidArgument("pairwise surveys have no rating matrix".into()));
    }
    if dataset.scale.normalizes() {
        z_normalize(&dataset.ratings)
    } else {
        Ok(dataset.ratings.clone())
    }
}

/// Global ranking from all training responses: mean ratings for rating
/// surveys, borda scores for pairwise ones.
pub fn dataset_ranking(dataset: &Dataset) -> Result<GlobalRanking> {
    global_ranking(dataset, &Training::of(dataset))
}

fn predicted_scores(
    dataset: &Dataset,
    training: &Training,
    fit_config: &FitConfig,
    schedule: &Schedule,
) -> Result<Vec<Vec<f64>>> {
    model_scores(&fit_training(dataset, training, fit_config, schedule)?)
}

fn ratings_matrix(dataset: &Dataset, rows: &[Vec<(usize, f64)>]) -> Result<SparseRatingMatrix> {
    SparseRatingMatrix::from_triplets(
        dataset.m(),
        dataset.n(),
        rows.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |&(j, x)| (i, j, x))),
    )
}

fn global_ranking(dataset: &Dataset, training: &Training) -> Result<GlobalRanking> {
    match training {
        Training::Ratings(rows) => mean_rating_ranking(&ratings_matrix(dataset, rows)?, dataset.scale),
        Training::Comparisons(groups) => {
            let set: ComparisonSet = groups.iter().flatten().copied().collect();
            Ok(borda_scores(&set, dataset.n())?.ranking())
        }
    }
}

/// Per-respondent held-out error for the given per-item score vectors.
pub fn individual_errors(dataset: &Dataset, scores: &[Vec<f64>]) -> Result<Vec<f64>> {
    let heldout = dataset.heldout_comparisons.by_respondent(dataset.m());
    heldout.iter().zip(scores).map(|(h, s)| individual_test_error(s, h)).collect()
}

fn check_heldout(dataset: &Dataset, mode: SweepMode) -> Result<Option<AggregateTestMatrix>> {
    match mode {
        SweepMode::Individual => {
            let held = dataset.heldout_comparisons.by_respondent(dataset.m());
            if let Some(i) = held.iter().position(Vec::is_empty) {
                return Err(SurveyError::InvalidArgument(format!(
                    "respondent {} has no held-out comparisons",
                    dataset.respondent_ids[i]
                )));
            }
            Ok(None)
        }
        SweepMode::Aggregate => {
            let c = build_aggregate_test_matrix(&dataset.heldout_comparisons, dataset.n())?;
            if c.total() == 0 {
                return Err(SurveyError::Empty("held-out comparisons"));
            }
            Ok(Some(c))
        }
    }
}

fn subsample(training: &Training, size: usize, rng: &mut impl rand::Rng) -> Training {
    fn pick<T: Copy>(xs: &[T], size: usize, rng: &mut impl rand::Rng) -> Vec<T> {
        let mut idx = index::sample(rng, xs.len(), size).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|p| xs[p]).collect()
    }
    match training {
        Training::Ratings(rows) => Training::Ratings(rows.iter().map(|r| pick(r, size, rng)).collect()),
        Training::Comparisons(groups) => Training::Comparisons(groups.iter().map(|g| pick(g, size, rng)).collect()),
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

/// Error versus number of training responses per respondent.
///
/// For each size `s` and draw `d`, every respondent keeps `s` of their
/// training responses, drawn from a stream keyed by `(seed, s, d)`. Rating
/// surveys fit the factor model (five-point and slider ratings are
/// z-normalized per respondent first), pairwise surveys fit the comparison
/// model. Aggregate mode ranks items by mean rating or borda score instead.
/// Draws run in parallel; the result does not depend on the thread count.
pub fn run_sweep(dataset: &Dataset, config: &SweepConfig) -> Result<ErrorCurve> {
    if config.draws == 0 || config.sizes.is_empty() || config.sizes.contains(&0) {
        return Err(SurveyError::InvalidArgument("sweep needs draws >= 1 and nonempty positive sizes".into()));
    }
    config.fit.validate()?;
    let training = Training::of(dataset);
    let available = training.counts().into_iter().min().unwrap_or(0);
    let largest = *config.sizes.iter().max().expect("nonempty");
    if largest > available {
        return Err(SurveyError::InvalidArgument(format!(
            "size {largest} exceeds the {available} training responses available per respondent"
        )));
    }
    let aggregate = check_heldout(dataset, config.mode)?;

    let tasks: Vec<(usize, usize)> =
        config.sizes.iter().flat_map(|&s| (0..config.draws).map(move |d| (s, d))).collect();
    let errors = tasks
        .par_iter()
        .map(|&(size, draw)| {
            let tags = [rng::tag::SWEEP, size as u64, draw as u64];
            let sample = subsample(&training, size, &mut rng::stream(config.seed, &tags));
            match &aggregate {
                Some(c) => aggregate_test_error(&global_ranking(dataset, &sample)?, c),
                None => {
                    let fit_config = FitConfig { seed: rng::derive_seed(config.seed, &tags), ..config.fit.clone() };
                    let scores = predicted_scores(dataset, &sample, &fit_config, &config.schedule)?;
                    model_test_error(&individual_errors(dataset, &scores)?)
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let points = config
        .sizes
        .iter()
        .enumerate()
        .map(|(k, &size)| {
            let (mean_error, sd) = mean_sd(&errors[k * config.draws..(k + 1) * config.draws]);
            CurvePoint { size, mean_error, sd, draws: config.draws }
        })
        .collect();
    Ok(ErrorCurve { points })
}

/// Individual and aggregate errors of models trained on all training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub individual_error: f64,
    pub per_respondent: Vec<f64>,
    pub aggregate_error: f64,
    pub seed: u64,
}

pub fn evaluate_dataset(dataset: &Dataset, fit_config: &FitConfig, schedule: &Schedule) -> Result<EvalReport> {
    check_heldout(dataset, SweepMode::Individual)?;
    let c = check_heldout(dataset, SweepMode::Aggregate)?.expect("aggregate matrix");
    let training = Training::of(dataset);
    let scores = predicted_scores(dataset, &training, fit_config, schedule)?;
    let per_respondent = individual_errors(dataset, &scores)?;
    Ok(EvalReport {
        individual_error: model_test_error(&per_respondent)?,
        per_respondent,
        aggregate_error: aggregate_test_error(&global_ranking(dataset, &training)?, &c)?,
        seed: fit_config.seed,
    })
}

/// Mean individual error when each respondent's scores are randomly permuted
/// across items, averaged over `rounds` independent permutations.
pub fn shuffled_score_baseline(dataset: &Dataset, scores: &[Vec<f64>], rounds: usize, seed: u64) -> Result<f64> {
    if rounds == 0 {
        return Err(SurveyError::InvalidArgument("rounds must be at least 1".into()));
    }
    let mut per_round = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let mut r = rng::stream(seed, &[rng::tag::BASELINE, round as u64]);
        let shuffled: Vec<Vec<f64>> = scores
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.shuffle(&mut r);
                s
            })
            .collect();
        per_round.push(model_test_error(&individual_errors(dataset, &shuffled)?)?);
    }
    model_test_error(&per_round)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurveyScale;
    use crate::experiment::{generate_responses, simulate_world};

    fn small(scale: SurveyScale) -> Dataset {
        let w = simulate_world(12, 30, 2, 0.3, 5).unwrap();
        generate_responses(&w, scale, 24, 6).unwrap()
    }

    #[test]
    fn default_sizes() {
        assert_eq!(SweepConfig::default().sizes, vec![8, 16, 24, 32, 40, 48, 56, 64, 72]);
        assert_eq!(SweepConfig::default().draws, 100);
    }

    #[test]
    fn sweep_is_deterministic_and_bounded() {
        let ds = small(SurveyScale::R5);
        for mode in [SweepMode::Individual, SweepMode::Aggregate] {
            let cfg = SweepConfig { sizes: vec![8, 16, 24], draws: 4, mode, seed: 3, ..SweepConfig::default() };
            let a = run_sweep(&ds, &cfg).unwrap();
            let b = run_sweep(&ds, &cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.points.len(), 3);
            for p in &a.points {
                assert!((0.0..=1.0).contains(&p.mean_error) && p.sd.is_finite());
            }
        }
    }

    #[test]
    fn pc_sweep_runs() {
        let ds = small(SurveyScale::Pc);
        let cfg = SweepConfig {
            sizes: vec![8, 24],
            draws: 2,
            schedule: Schedule { epochs: 20, ..Schedule::default() },
            ..SweepConfig::default()
        };
        let curve = run_sweep(&ds, &cfg).unwrap();
        assert_eq!(curve.to_csv().lines().count(), 3);
        let agg = run_sweep(&ds, &SweepConfig { mode: SweepMode::Aggregate, ..cfg }).unwrap();
        assert!(agg.points.iter().all(|p| p.mean_error < 0.5));
    }

    #[test]
    fn oversized_request_rejected() {
        let ds = small(SurveyScale::R2);
        let cfg = SweepConfig { sizes: vec![25], draws: 1, ..SweepConfig::default() };
        assert!(run_sweep(&ds, &cfg).is_err());
        assert!(run_sweep(&ds, &SweepConfig { draws: 0, ..SweepConfig::default() }).is_err());
    }

    #[test]
    fn missing_heldout_rejected() {
        let mut ds = small(SurveyScale::R100);
        ds.heldout_comparisons = ComparisonSet::empty();
        let cfg = SweepConfig { sizes: vec![8], draws: 1, ..SweepConfig::default() };
        assert!(run_sweep(&ds, &cfg).is_err());
        assert!(run_sweep(&ds, &SweepConfig { mode: SweepMode::Aggregate, ..cfg }).is_err());
    }

    #[test]
    fn eval_report() {
        let ds = small(SurveyScale::R100);
        let report = evaluate_dataset(&ds, &FitConfig::default(), &Schedule::default()).unwrap();
        assert_eq!(report.per_respondent.len(), 12);
        assert!(report.individual_error < 0.5);
        assert!(report.aggregate_error <= 1.0);
    }
}
