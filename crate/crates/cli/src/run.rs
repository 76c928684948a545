//! One function per command. Each returns the files it wrote plus a small
//! JSON result that also goes into the run manifest.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use survey_core::{
    cross_validate, dataset_ranking, evaluate_dataset, fit_dataset, generate_responses, latent_embedding, load_dataset,
    run_sweep, simulate_world, summarize, training_matrix, Dataset, ModelFile, SurveyError, SurveyScale,
};

use crate::config::Resolved;

pub type Outcome = Result<(Vec<PathBuf>, Value), SurveyError>;

fn write(path: &Path, contents: &str) -> Result<(), SurveyError> {
    std::fs::write(path, contents).map_err(|source| SurveyError::Io { path: path.display().to_string(), source })
}

fn require_scale(cfg: &Resolved) -> Result<SurveyScale, SurveyError> {
    cfg.scale.ok_or_else(|| SurveyError::InvalidArgument(format!("{} needs --scale", cfg.command)))
}

fn dataset(cfg: &Resolved) -> Result<Dataset, SurveyError> {
    let scale = require_scale(cfg)?;
    if scale.is_rating() && cfg.ratings.is_none() {
        return Err(SurveyError::InvalidArgument(format!("{} on a {scale} survey needs --ratings", cfg.command)));
    }
    if cfg.ratings.is_none() && cfg.comparisons.is_none() {
        return Err(SurveyError::InvalidArgument(format!("{} needs --ratings or --comparisons", cfg.command)));
    }
    load_dataset(cfg.ratings.as_deref(), cfg.comparisons.as_deref(), scale)
}

pub fn simulate(cfg: &Resolved, out: &Path) -> Outcome {
    let scale = require_scale(cfg)?;
    let s = cfg.simulate.as_ref().expect("simulate settings");
    let mut world = simulate_world(s.respondents, s.items, s.true_rank, s.noise_sd, cfg.seed)?;
    if s.consistent {
        world = world.aligned();
    }
    let data = generate_responses(&world, scale, s.ratings_per_respondent, s.heldout_per_respondent)?;
    let stem = cfg.stem();
    let comparisons = out.join(format!("{stem}.comparisons.csv"));
    let mut written = Vec::new();
    if scale.is_rating() {
        let ratings = out.join(format!("{stem}.ratings.csv"));
        data.save(Some(&ratings), &comparisons)?;
        written.push(ratings);
    } else {
        data.save(None, &comparisons)?;
    }
    written.push(comparisons);
    Ok((written, json!({ "respondents": data.m(), "items": data.n() })))
}

pub fn fit(cfg: &Resolved, out: &Path) -> Outcome {
    let data = dataset(cfg)?;
    let model = fit_dataset(&data, &cfg.fit, &cfg.schedule)?;
    let final_value = match &model {
        ModelFile::Factor(f) => json!({ "objective": f.objective_history.last() }),
        ModelFile::Comparison(c) => json!({ "loss": c.loss_history.last() }),
    };
    let path = out.join(format!("{}.model.json", cfg.stem()));
    write(&path, &model.to_json()?)?;
    Ok((vec![path], final_value))
}

pub fn cv(cfg: &Resolved, out: &Path) -> Outcome {
    let data = dataset(cfg)?;
    let report = cross_validate(&training_matrix(&data)?, cfg.cv.as_ref().expect("cv settings"))?;
    let path = out.join(format!("{}.csv", cfg.stem()));
    write(&path, &report.to_csv())?;
    Ok((vec![path], json!({ "best_k": report.best.k, "best_gamma": report.best.gamma })))
}

pub fn eval(cfg: &Resolved, out: &Path) -> Outcome {
    let data = dataset(cfg)?;
    let report = evaluate_dataset(&data, &cfg.fit, &cfg.schedule)?;
    let body = json!({
        "individual_error": report.individual_error,
        "aggregate_error": report.aggregate_error,
        "per_respondent": data.respondent_ids.iter().zip(&report.per_respondent)
            .map(|(id, e)| json!({ "respondent_id": id, "error": e }))
            .collect::<Vec<_>>(),
        "seed": report.seed,
    });
    let path = out.join(format!("{}.json", cfg.stem()));
    write(&path, &serde_json::to_string_pretty(&body)?)?;
    Ok((vec![path], json!({ "individual_error": report.individual_error, "aggregate_error": report.aggregate_error })))
}

pub fn sweep(cfg: &Resolved, out: &Path) -> Outcome {
    let data = dataset(cfg)?;
    let curve = run_sweep(&data, cfg.sweep.as_ref().expect("sweep settings"))?;
    let path = out.join(format!("{}.csv", cfg.stem()));
    write(&path, &curve.to_csv())?;
    Ok((vec![path], json!({ "sizes": curve.points.len() })))
}

/// Quartile labels 1 (lowest quarter of scores) to 4 (highest).
fn quartiles(scores: &[f64]) -> Vec<usize> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut labels = vec![0; n];
    for (rank, &item) in order.iter().enumerate() {
        labels[item] = 1 + 4 * rank / n;
    }
    labels
}

pub fn embed(cfg: &Resolved, out: &Path) -> Outcome {
    let data = dataset(cfg)?;
    let matrix = training_matrix(&data)?;
    let model = match &cfg.model {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| SurveyError::Io { path: path.display().to_string(), source })?;
            match ModelFile::from_json(&text)? {
                ModelFile::Factor(f) => f,
                ModelFile::Comparison(_) => {
                    return Err(SurveyError::InvalidArgument(
                        "embed needs a factor model, not a comparison model".into(),
                    ))
                }
            }
        }
        None => match fit_dataset(&data, &cfg.fit, &cfg.schedule)? {
            ModelFile::Factor(f) => f,
            ModelFile::Comparison(_) => unreachable!("rating surveys fit factor models"),
        },
    };
    let embedding = latent_embedding(&model, &matrix)?;
    let labels = quartiles(&dataset_ranking(&data)?.score_per_item);
    let mut csv = String::from("item_id,dim1,dim2,quartile\n");
    for ((id, c), q) in data.item_ids.iter().zip(&embedding.coords).zip(&labels) {
        csv.push_str(&format!("{id},{},{},{q}\n", c[0], c[1]));
    }
    let path = out.join(format!("{}.csv", cfg.stem()));
    write(&path, &csv)?;
    Ok((vec![path], json!({ "variance_fractions": embedding.variance_fractions })))
}

pub fn summarize_cmd(cfg: &Resolved, out: &Path) -> Outcome {
    let data = dataset(cfg)?;
    let summary = summarize(&data, cfg.block_size.expect("block size"))?;
    let path = out.join(format!("{}.json", cfg.stem()));
    write(&path, &serde_json::to_string_pretty(&summary)?)?;
    Ok((vec![path], json!({ "blocks": summary.block_median_seconds.len() })))
}
