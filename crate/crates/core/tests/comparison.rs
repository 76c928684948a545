use nalgebra::DMatrix;
use proptest::prelude::*;
use survey_core::{
    fit_comparisons, generate_responses, predict_comparison, simulate_world, ComparisonModel, FitConfig, Schedule,
    SurveyScale,
};

fn model(u: Vec<f64>, v: Vec<f64>, m: usize, n: usize, k: usize) -> ComparisonModel {
    ComparisonModel {
        u: DMatrix::from_row_slice(m, k, &u),
        v: DMatrix::from_row_slice(n, k, &v),
        gamma: 0.0,
        schedule: Schedule::default(),
        loss_history: Vec::new(),
    }
}

fn factors() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, Vec<f64>)> {
    (1usize..5, 2usize..8, 1usize..4).prop_flat_map(|(m, n, k)| {
        (
            Just(m),
            Just(n),
            Just(k),
            prop::collection::vec(-10.0f64..10.0, m * k),
            prop::collection::vec(-10.0f64..10.0, n * k),
        )
    })
}

proptest! {
    #[test]
    fn scores_are_exactly_antisymmetric((m, n, k, u, v) in factors()) {
        let model = model(u, v, m, n, k);
        for i in 0..m {
            for a in 0..n {
                for b in (0..n).filter(|&b| b != a) {
                    let ab = predict_comparison(&model, i, a, b).unwrap().score;
                    let ba = predict_comparison(&model, i, b, a).unwrap().score;
                    prop_assert_eq!(ab.to_bits(), (-ba).to_bits());
                }
            }
        }
    }

    #[test]
    fn shifting_every_item_leaves_scores_unchanged(
        (m, n, k, u, v) in factors(),
        shift in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let base = model(u.clone(), v.clone(), m, n, k);
        let shifted_v: Vec<f64> = v.iter().enumerate().map(|(idx, x)| x + shift[idx % k]).collect();
        let shifted = model(u, shifted_v, m, n, k);
        for i in 0..m {
            for a in 0..n {
                for b in (0..n).filter(|&b| b != a) {
                    let s0 = predict_comparison(&base, i, a, b).unwrap().score;
                    let s1 = predict_comparison(&shifted, i, a, b).unwrap().score;
                    prop_assert!((s0 - s1).abs() <= 1e-9 * (1.0 + s0.abs()), "{} vs {}", s0, s1);
                }
            }
        }
    }
}

#[test]
fn noiseless_world_is_predicted_accurately() {
    let world = simulate_world(50, 100, 1, 0.0, 11).unwrap().aligned();
    let data = generate_responses(&world, SurveyScale::Pc, 80, 20).unwrap();
    let config = FitConfig { k: 2, gamma: 0.1, seed: 3, ..FitConfig::default() };
    let model = fit_comparisons(&data.training_comparisons, data.m(), data.n(), &config).unwrap();
    let correct = data
        .heldout_comparisons
        .iter()
        .filter(|c| {
            let p = predict_comparison(&model, c.respondent, c.left, c.right).unwrap();
            p.score * c.sign() > 0.0
        })
        .count();
    let accuracy = correct as f64 / data.heldout_comparisons.len() as f64;
    assert!(accuracy > 0.9, "held-out accuracy {accuracy}");
}

#[test]
fn training_loss_is_nonincreasing() {
    for seed in 0..5 {
        let world = simulate_world(10, 20, 2, 0.5, seed).unwrap();
        let data = generate_responses(&world, SurveyScale::Pc, 40, 5).unwrap();
        let config = FitConfig { k: 2, gamma: 1.0, seed, ..FitConfig::default() };
        let model = fit_comparisons(&data.training_comparisons, data.m(), data.n(), &config).unwrap();
        for w in model.loss_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}
