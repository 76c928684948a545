//! Factor model trained directly on pairwise comparisons.
//!
//! Respondent `i` is predicted to prefer item `a` over item `b` when the
//! score `u_i·(v_a − v_b)` is positive. Factors minimize the logistic loss
//! `Σ log(1 + exp(−y·u_i·(v_a − v_b))) + γ(‖U‖²_F + ‖V‖²_F)`, with `y = +1`
//! when the left item won.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Comparison, ComparisonSet};
use crate::error::{Result, SurveyError};
use crate::factorization::io::{from_rows, to_rows};
use crate::factorization::{gaussian, FitConfig};
use crate::rng;

/// Mini-batch gradient descent schedule. The step at epoch `e` (from 1) is
/// `step_size / sqrt(e)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub step_size: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { step_size: 0.05, epochs: 200, batch_size: 32 }
    }
}

const DEFAULT_INIT_SCALE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonModel {
    /// `m × k` respondent factors.
    pub u: DMatrix<f64>,
    /// `n × k` item factors.
    pub v: DMatrix<f64>,
    pub gamma: f64,
    pub schedule: Schedule,
    /// Training loss after initialization and after each epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictedWinner {
    Left,
    Right,
    Tie,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub winner: PredictedWinner,
    pub score: f64,
}

impl ComparisonModel {
    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    /// `u_i·v_j` for every item; differences of these are comparison scores.
    pub fn item_scores(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.nrows() {
            return Err(SurveyError::IndexOutOfRange { what: "respondents", index: i, size: self.nrows() });
        }
        Ok((0..self.ncols()).map(|j| self.u.row(i).dot(&self.v.row(j))).collect())
    }

    fn margin(&self, c: &Comparison) -> f64 {
        (0..self.k()).map(|d| self.u[(c.respondent, d)] * (self.v[(c.left, d)] - self.v[(c.right, d)])).sum()
    }

    /// Penalized logistic training loss over `comparisons`.
    pub fn loss(&self, comparisons: &ComparisonSet) -> f64 {
        let data: f64 = comparisons.iter().map(|c| softplus(-c.sign() * self.margin(c))).sum();
        data + self.gamma * (self.u.norm_squared() + self.v.norm_squared())
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn fit_comparisons(comparisons: &ComparisonSet, m: usize, n: usize, config: &FitConfig) -> Result<ComparisonModel> {
    fit_comparisons_with(comparisons, m, n, config, &Schedule::default())
}

/// Trains the comparison model by seeded, shuffled mini-batch gradient descent.
///
/// The regularization gradient is spread over batches in proportion to their
/// size so one epoch applies it once in total. An epoch that raises the full
/// training loss is rolled back and the base step halved.
pub fn fit_comparisons_with(
    comparisons: &ComparisonSet,
    m: usize,
    n: usize,
    config: &FitConfig,
    schedule: &Schedule,
) -> Result<ComparisonModel> {
    config.validate()?;
    if comparisons.is_empty() {
        return Err(SurveyError::Empty("comparison set"));
    }
    if !(schedule.step_size > 0.0 && schedule.step_size.is_finite()) || schedule.epochs == 0 || schedule.batch_size == 0
    {
        return Err(SurveyError::InvalidArgument("schedule needs a positive step size, epochs and batch size".into()));
    }
    comparisons.check_bounds(m, n)?;

    let k = config.k;
    let scale = config.init_scale.unwrap_or(DEFAULT_INIT_SCALE);
    let mut init_rng = rng::stream(config.seed, &[rng::tag::INIT]);
    let mut model = ComparisonModel {
        u: gaussian(m, k, scale, &mut init_rng),
        v: gaussian(n, k, scale, &mut init_rng),
        gamma: config.gamma,
        schedule: schedule.clone(),
        loss_history: Vec::with_capacity(schedule.epochs + 1),
    };
    let mut current = model.loss(comparisons);
    model.loss_history.push(current);

    let total = comparisons.len() as f64;
    let mut order: Vec<usize> = (0..comparisons.len()).collect();
    let mut shuffle_rng = rng::stream(config.seed, &[rng::tag::SHUFFLE]);
    let mut base_step = schedule.step_size;
    let mut grad_u = DMatrix::<f64>::zeros(m, k);
    let mut grad_v = DMatrix::<f64>::zeros(n, k);

    for epoch in 1..=schedule.epochs {
        let step = base_step / (epoch as f64).sqrt();
        let (saved_u, saved_v) = (model.u.clone(), model.v.clone());
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(schedule.batch_size) {
            grad_u.fill(0.0);
            grad_v.fill(0.0);
            for &idx in batch {
                let c = &comparisons.as_slice()[idx];
                let y = c.sign();
                // d/ds log(1 + exp(-y s)) = -y σ(-y s)
                let g = -y * sigmoid(-y * model.margin(c));
                for d in 0..k {
                    let diff = model.v[(c.left, d)] - model.v[(c.right, d)];
                    let ud = model.u[(c.respondent, d)];
                    grad_u[(c.respondent, d)] += g * diff;
                    grad_v[(c.left, d)] += g * ud;
                    grad_v[(c.right, d)] -= g * ud;
                }
            }
            let reg = 2.0 * config.gamma * batch.len() as f64 / total;
            model.u -= step * (&grad_u + reg * &model.u);
            model.v -= step * (&grad_v + reg * &model.v);
        }
        let next = model.loss(comparisons);
        if !next.is_finite() {
            return Err(SurveyError::Numerical(format!(
                "training loss became {next} at epoch {epoch}; step size {} is too large",
                schedule.step_size
            )));
        }
        if next > current {
            model.u = saved_u;
            model.v = saved_v;
            base_step *= 0.5;
        } else {
            current = next;
        }
        model.loss_history.push(current);
    }
    Ok(model)
}

/// Predicts which of items `a` (left) and `b` (right) respondent `i` prefers.
/// A score of exactly zero is a tie.
pub fn predict_comparison(model: &ComparisonModel, i: usize, a: usize, b: usize) -> Result<Prediction> {
    if a == b {
        return Err(SurveyError::InvalidArgument(format!("cannot compare item {a} with itself")));
    }
    if i >= model.nrows() {
        return Err(SurveyError::IndexOutOfRange { what: "respondents", index: i, size: model.nrows() });
    }
    for item in [a, b] {
        if item >= model.ncols() {
            return Err(SurveyError::IndexOutOfRange { what: "items", index: item, size: model.ncols() });
        }
    }
    let score: f64 = (0..model.k()).map(|d| model.u[(i, d)] * (model.v[(a, d)] - model.v[(b, d)])).sum();
    Ok(Prediction { winner: winner_for(score), score })
}

pub fn winner_for(score: f64) -> PredictedWinner {
    if score > 0.0 {
        PredictedWinner::Left
    } else if score < 0.0 {
        PredictedWinner::Right
    } else {
        PredictedWinner::Tie
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct ComparisonModelRepr {
    k: usize,
    gamma: f64,
    m: usize,
    n: usize,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step_size: f64,
    epochs: usize,
    batch_size: usize,
    #[serde(default)]
    loss_history: Vec<f64>,
}

impl Serialize for ComparisonModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ComparisonModelRepr {
            k: self.k(),
            gamma: self.gamma,
            m: self.nrows(),
            n: self.ncols(),
            u: to_rows(&self.u),
            v: to_rows(&self.v),
            step_size: self.schedule.step_size,
            epochs: self.schedule.epochs,
            batch_size: self.schedule.batch_size,
            loss_history: self.loss_history.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComparisonModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let r = ComparisonModelRepr::deserialize(d)?;
        let u = from_rows(&r.u, r.k, "U").map_err(D::Error::custom)?;
        let v = from_rows(&r.v, r.k, "V").map_err(D::Error::custom)?;
        if u.nrows() != r.m || v.nrows() != r.n {
            return Err(D::Error::custom("model file shapes disagree with m, n"));
        }
        Ok(ComparisonModel {
            u,
            v,
            gamma: r.gamma,
            schedule: Schedule { step_size: r.step_size, epochs: r.epochs, batch_size: r.batch_size },
            loss_history: r.loss_history,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Side;
    use crate::factorization::ModelFile;

    fn c(respondent: usize, left: usize, right: usize, winner: Side) -> Comparison {
        Comparison { respondent, left, right, winner, elapsed_ms: 0 }
    }

    #[test]
    fn infers_transitive_preference() {
        let set = ComparisonSet::new(vec![c(0, 0, 1, Side::Left), c(0, 1, 2, Side::Left)]).unwrap();
        let cfg = FitConfig { k: 2, gamma: 0.01, seed: 3, ..FitConfig::default() };
        let model = fit_comparisons(&set, 1, 3, &cfg).unwrap();
        let p = predict_comparison(&model, 0, 0, 2).unwrap();
        assert_eq!(p.winner, PredictedWinner::Left);
        assert!(p.score > 0.0);
    }

    #[test]
    fn balanced_pair_gives_near_zero_margin() {
        let set: ComparisonSet =
            (0..100).map(|r| c(0, 0, 1, if r % 2 == 0 { Side::Left } else { Side::Right })).collect();
        let model = fit_comparisons(&set, 1, 2, &FitConfig { k: 2, gamma: 0.1, ..FitConfig::default() }).unwrap();
        let score = predict_comparison(&model, 0, 0, 1).unwrap().score;
        assert!(score.abs() < 0.1, "score {score}");
        assert!((sigmoid(score) - 0.5).abs() < 0.05);
    }

    #[test]
    fn errors() {
        let cfg = FitConfig::default();
        assert!(matches!(fit_comparisons(&ComparisonSet::empty(), 2, 2, &cfg), Err(SurveyError::Empty(_))));
        let set = ComparisonSet::new(vec![c(0, 0, 3, Side::Left)]).unwrap();
        assert!(fit_comparisons(&set, 1, 3, &cfg).is_err());
        assert!(ComparisonSet::new(vec![c(0, 1, 1, Side::Left)]).is_err());

        let set = ComparisonSet::new(vec![c(0, 0, 1, Side::Left)]).unwrap();
        let huge = Schedule { step_size: 1e300, epochs: 3, batch_size: 1 };
        let err =
            fit_comparisons_with(&set, 1, 2, &FitConfig { init_scale: Some(1e200), ..cfg.clone() }, &huge).unwrap_err();
        assert_eq!(err.kind(), "numerical");

        let model = fit_comparisons(&set, 1, 2, &cfg).unwrap();
        assert!(predict_comparison(&model, 0, 1, 1).is_err());
        assert!(predict_comparison(&model, 1, 0, 1).is_err());
    }

    #[test]
    fn sign_rule() {
        assert_eq!(winner_for(0.7), PredictedWinner::Left);
        assert_eq!(winner_for(-0.2), PredictedWinner::Right);
        assert_eq!(winner_for(0.0), PredictedWinner::Tie);
    }

    #[test]
    fn loss_never_rises() {
        let set: ComparisonSet = (0..30)
            .map(|k| c(k % 3, k % 7, (k % 7 + 1 + k % 5) % 8, if k % 3 == 0 { Side::Right } else { Side::Left }))
            .collect();
        let model = fit_comparisons(&set, 3, 8, &FitConfig { k: 2, gamma: 0.05, ..FitConfig::default() }).unwrap();
        let h = &model.loss_history;
        assert_eq!(h.len(), 201);
        assert!(h.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6)));
        assert!(h.last().unwrap() <= &h[1]);
    }

    #[test]
    fn json_tagged_as_comparison() {
        let set = ComparisonSet::new(vec![c(0, 0, 1, Side::Left)]).unwrap();
        let model = fit_comparisons(&set, 1, 2, &FitConfig::default()).unwrap();
        let json = ModelFile::Comparison(model.clone()).to_json().unwrap();
        assert!(json.contains("\"kind\": \"comparison\""));
        assert_eq!(ModelFile::from_json(&json).unwrap(), ModelFile::Comparison(model));
    }
}
