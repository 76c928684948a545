//! Reconstruction of sparse "simple survey" responses by regularized matrix
//! factorization, with individual and aggregate pairwise-comparison
//! evaluation and a synthetic-respondent sweep harness.
//!
//! The crate is organized by stage:
//!
//! * [`data`]: survey scales, response records, sparse rating matrices,
//!   CSV ingestion, per-respondent normalization and descriptive summaries.
//! * [`factorization`]: the squared-loss factor model fitted by alternating
//!   ridge sweeps, hyperparameter selection and item embeddings.
//! * [`comparison`]: a factor model trained directly on pairwise comparisons.
//! * [`evaluation`]: individual and aggregate test errors, borda scores and
//!   mean-rating rankings.
//! * [`experiment`]: a synthetic world simulator and the subsampling sweep.

pub mod comparison;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod factorization;
pub mod rng;

pub use comparison::{
    fit_comparisons, fit_comparisons_with, predict_comparison, ComparisonModel, PredictedWinner, Prediction, Schedule,
};
pub use data::{
    coverage_probability, distinct_pair_count, load_dataset, read_comparisons, read_ratings, summarize,
    write_comparisons, write_ratings, z_normalize, Comparison, ComparisonRecord, ComparisonSet, Dataset, Rating,
    ResponseRecord, Side, SparseRatingMatrix, Summary, SurveyScale,
};
pub use error::{Result, SurveyError};
pub use evaluation::{
    aggregate_test_error, borda_scores, build_aggregate_test_matrix, individual_test_error, mean_rating_ranking,
    model_test_error, AggregateTestMatrix, BordaTable, GlobalRanking,
};
pub use experiment::{
    dataset_ranking, evaluate_dataset, fit_dataset, generate_responses, individual_errors, model_scores, run_sweep,
    shuffled_score_baseline, simulate_world, training_matrix, CurvePoint, ErrorCurve, EvalReport, SweepConfig,
    SweepMode, SyntheticWorld,
};
pub use factorization::{
    cross_validate, fit, latent_embedding, objective, predict, CvCell, CvConfig, CvReport, FactorModel, FitConfig,
    Init, ItemEmbedding, ModelFile,
};
