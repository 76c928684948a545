//! Synthetic respondents and the subsampling sweep that produces
//! error-versus-questions curves.

mod sweep;
mod world;

pub use sweep::{
    dataset_ranking, evaluate_dataset, fit_dataset, individual_errors, model_scores, run_sweep,
    shuffled_score_baseline, training_matrix, CurvePoint, ErrorCurve, EvalReport, SweepConfig, SweepMode,
};
pub use world::{generate_responses, simulate_world, SyntheticWorld};
