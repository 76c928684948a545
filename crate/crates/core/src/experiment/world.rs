use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{ComparisonRecord, Dataset, ResponseRecord, Side, SurveyScale};
use crate::error::{Result, SurveyError};
use crate::factorization::gaussian;
use crate::rng;

/// Ground-truth latent utilities for a simulated respondent pool.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticWorld {
    /// `m × true_rank`.
    pub true_u: DMatrix<f64>,
    /// `n × true_rank`.
    pub true_v: DMatrix<f64>,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticWorld {
    /// Flips each respondent's factor row so its first coordinate is
    /// nonnegative. In a rank-1 world every respondent then shares one item
    /// order, which makes the world consistent.
    pub fn aligned(mut self) -> Self {
        for i in 0..self.true_u.nrows() {
            if self.true_u[(i, 0)] < 0.0 {
                self.true_u.row_mut(i).neg_mut();
            }
        }
        self
    }

    pub fn m(&self) -> usize {
        self.true_u.nrows()
    }

    pub fn n(&self) -> usize {
        self.true_v.nrows()
    }

    pub fn true_rank(&self) -> usize {
        self.true_u.ncols()
    }

    pub fn utility(&self, i: usize, j: usize) -> f64 {
        self.true_u.row(i).dot(&self.true_v.row(j))
    }
}

pub fn simulate_world(m: usize, n: usize, true_rank: usize, noise_sd: f64, seed: u64) -> Result<SyntheticWorld> {
    if m < 2 || n < 2 || true_rank == 0 {
        return Err(SurveyError::InvalidArgument(format!(
            "need m, n >= 2 and true_rank >= 1, got m={m}, n={n}, true_rank={true_rank}"
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(SurveyError::InvalidArgument(format!("noise_sd must be finite and >= 0, got {noise_sd}")));
    }
    let mut r = rng::stream(seed, &[rng::tag::WORLD]);
    let true_u = gaussian(m, true_rank, 1.0, &mut r);
    let true_v = gaussian(n, true_rank, 1.0, &mut r);
    Ok(SyntheticWorld { true_u, true_v, noise_sd, seed })
}

fn scale_code(scale: SurveyScale) -> u64 {
    match scale {
        SurveyScale::R2 => 2,
        SurveyScale::R5 => 5,
        SurveyScale::R100 => 100,
        SurveyScale::Pc => 1,
    }
}

/// Typical per-query answer time in milliseconds; slider ratings take longest.
fn base_answer_ms(scale: SurveyScale) -> f64 {
    match scale {
        SurveyScale::R2 => 1800.0,
        SurveyScale::R5 => 2600.0,
        SurveyScale::R100 => 3800.0,
        SurveyScale::Pc => 3000.0,
    }
}

fn answer_ms(scale: SurveyScale, rng: &mut impl Rng) -> u64 {
    let z: f64 = rng.sample(StandardNormal);
    (base_answer_ms(scale) * (0.35 * z).exp()).round() as u64
}

fn noisy(world: &SyntheticWorld, i: usize, j: usize, rng: &mut impl Rng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    world.utility(i, j) + world.noise_sd * z
}

/// Maps one respondent's noisy utilities to ratings on `scale`.
fn discretize(scale: SurveyScale, utilities: &[f64]) -> Vec<i64> {
    let s = utilities.len();
    match scale {
        SurveyScale::R100 => {
            let lo = utilities.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            utilities
                .iter()
                .map(
                    |&x| {
                        if hi > lo {
                            (1.0 + 99.0 * (x - lo) / (hi - lo)).round().clamp(1.0, 100.0) as i64
                        } else {
                            50
                        }
                    },
                )
                .collect()
        }
        SurveyScale::R5 => {
            let mut order: Vec<usize> = (0..s).collect();
            order.sort_by(|&a, &b| utilities[a].total_cmp(&utilities[b]));
            let mut out = vec![0; s];
            for (rank, &p) in order.iter().enumerate() {
                out[p] = 1 + (5 * rank / s) as i64;
            }
            out
        }
        SurveyScale::R2 => {
            let mut sorted = utilities.to_vec();
            sorted.sort_by(f64::total_cmp);
            let median = if s % 2 == 1 { sorted[s / 2] } else { 0.5 * (sorted[s / 2 - 1] + sorted[s / 2]) };
            utilities.iter().map(|&x| i64::from(x >= median)).collect()
        }
        SurveyScale::Pc => unreachable!("pairwise surveys are not discretized"),
    }
}

/// Draws `count` distinct unordered item pairs, each in random left/right order.
fn distinct_pairs(n: usize, count: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && seen.insert((a.min(b), a.max(b))) {
            out.push((a, b));
        }
    }
    out
}

fn id(prefix: char, k: usize, total: usize) -> String {
    let width = total.saturating_sub(1).to_string().len().max(3);
    format!("{prefix}{k:0width$}")
}

/// Simulates one survey of type `scale` over the world's respondents.
///
/// Rating surveys: each respondent rates `ratings_per_respondent` items drawn
/// without replacement, then answers `heldout_pc_per_respondent` comparisons
/// over distinct random pairs with fresh noise. Pairwise surveys: each
/// respondent answers `ratings_per_respondent + heldout_pc_per_respondent`
/// comparisons over distinct pairs, the last `heldout_pc_per_respondent` of
/// which are held out.
pub fn generate_responses(
    world: &SyntheticWorld,
    scale: SurveyScale,
    ratings_per_respondent: usize,
    heldout_pc_per_respondent: usize,
) -> Result<Dataset> {
    let (m, n) = (world.m(), world.n());
    let max_pairs = n * (n - 1) / 2;
    if scale.is_rating() && ratings_per_respondent > n {
        return Err(SurveyError::InvalidArgument(format!(
            "{ratings_per_respondent} ratings per respondent exceeds {n} items"
        )));
    }
    let total_pairs =
        if scale.is_rating() { heldout_pc_per_respondent } else { ratings_per_respondent + heldout_pc_per_respondent };
    if total_pairs > max_pairs {
        return Err(SurveyError::InvalidArgument(format!(
            "{total_pairs} comparisons per respondent exceeds {max_pairs} pairs"
        )));
    }
    if ratings_per_respondent == 0 {
        return Err(SurveyError::InvalidArgument("need at least one training response per respondent".into()));
    }

    let mut ratings = Vec::new();
    let mut comparisons = Vec::new();
    for i in 0..m {
        let mut r = rng::stream(world.seed, &[rng::tag::RESPONSES, scale_code(scale), i as u64]);
        let respondent_id = id('r', i, m);
        if scale.is_rating() {
            let items = index::sample(&mut r, n, ratings_per_respondent).into_vec();
            let utilities: Vec<f64> = items.iter().map(|&j| noisy(world, i, j, &mut r)).collect();
            for (&j, value) in items.iter().zip(discretize(scale, &utilities)) {
                ratings.push(ResponseRecord {
                    respondent_id: respondent_id.clone(),
                    item_id: id('i', j, n),
                    value,
                    elapsed_ms: answer_ms(scale, &mut r),
                });
            }
        }
        for (a, b) in distinct_pairs(n, total_pairs, &mut r) {
            let left_wins = noisy(world, i, a, &mut r) >= noisy(world, i, b, &mut r);
            comparisons.push(ComparisonRecord {
                respondent_id: respondent_id.clone(),
                item_left: id('i', a, n),
                item_right: id('i', b, n),
                winner: if left_wins { Side::Left } else { Side::Right },
                elapsed_ms: answer_ms(SurveyScale::Pc, &mut r),
            });
        }
    }

    let mut dataset = Dataset::from_records(format!("synthetic-{scale}"), scale, &ratings, &comparisons)?;
    if !scale.is_rating() {
        // Re-split at the generated boundary; the loader's fraction rule only
        // matches it for 80/20 shapes.
        let mut all: Vec<_> =
            dataset.training_comparisons.iter().chain(&dataset.heldout_comparisons).copied().collect();
        all.sort_by_key(|c| c.respondent);
        let mut training = Vec::new();
        let mut heldout = Vec::new();
        for group in all.chunk_by(|a, b| a.respondent == b.respondent) {
            let train_len = group.len() - heldout_pc_per_respondent;
            training.extend_from_slice(&group[..train_len]);
            heldout.extend_from_slice(&group[train_len..]);
        }
        dataset.training_comparisons = training.into_iter().collect();
        dataset.heldout_comparisons = heldout.into_iter().collect();
    }
    // Items nobody rated are absent from the index maps; only full coverage
    // keeps the simulated ids aligned with world indices.
    if dataset.n() != n || dataset.m() != m {
        return Err(SurveyError::InvalidArgument(format!(
            "simulated responses cover only {} of {n} items; increase responses per respondent",
            dataset.n()
        )));
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worlds_are_seeded() {
        assert_eq!(simulate_world(5, 6, 2, 0.1, 9).unwrap(), simulate_world(5, 6, 2, 0.1, 9).unwrap());
        assert_ne!(simulate_world(5, 6, 2, 0.1, 9).unwrap(), simulate_world(5, 6, 2, 0.1, 10).unwrap());
        assert!(simulate_world(1, 6, 2, 0.1, 9).is_err());
        assert!(simulate_world(5, 6, 0, 0.1, 9).is_err());
        assert!(simulate_world(5, 6, 1, -0.1, 9).is_err());
    }

    #[test]
    fn rank_one_orders_agree_up_to_sign() {
        let w = simulate_world(6, 12, 1, 0.0, 4).unwrap();
        let order = |i: usize| {
            let mut o: Vec<usize> = (0..12).collect();
            o.sort_by(|&a, &b| w.utility(i, a).total_cmp(&w.utility(i, b)));
            o
        };
        let reference = order(0);
        let reversed: Vec<usize> = reference.iter().rev().copied().collect();
        for i in 1..6 {
            let o = order(i);
            assert!(o == reference || o == reversed);
        }
    }

    #[test]
    fn noiseless_responses_are_deterministic() {
        let w = simulate_world(4, 30, 2, 0.0, 1).unwrap();
        let a = generate_responses(&w, SurveyScale::R5, 25, 5).unwrap();
        let b = generate_responses(&w, SurveyScale::R5, 25, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn discretization_rules() {
        let u = [0.3, -1.0, 2.0, 0.1, 0.5];
        assert_eq!(discretize(SurveyScale::R2, &u), vec![1, 0, 1, 0, 1]);
        assert_eq!(discretize(SurveyScale::R100, &u), vec![44, 1, 100, 37, 51]);
        let ten: Vec<f64> = (0..10).map(|x| x as f64).collect();
        assert_eq!(discretize(SurveyScale::R5, &ten), vec![1, 1, 2, 2, 3, 3, 4, 4, 5, 5]);
    }

    #[test]
    fn r2_has_ceil_half_ones() {
        let w = simulate_world(5, 40, 2, 0.3, 2).unwrap();
        let ds = generate_responses(&w, SurveyScale::R2, 31, 5).unwrap();
        for i in 0..5 {
            let ones = ds.rating_records.iter().filter(|r| r.respondent == i && r.value == 1).count();
            assert_eq!(ones, 16);
        }
    }

    #[test]
    fn pc_split_and_unique_pairs() {
        let w = simulate_world(3, 20, 2, 0.5, 3).unwrap();
        let ds = generate_responses(&w, SurveyScale::Pc, 30, 7).unwrap();
        let train = ds.training_comparisons.by_respondent(3);
        let held = ds.heldout_comparisons.by_respondent(3);
        assert!(train.iter().all(|t| t.len() == 30));
        assert!(held.iter().all(|h| h.len() == 7));
        let all: ComparisonSetCheck = ds.training_comparisons.iter().chain(&ds.heldout_comparisons).copied().collect();
        all.check_unique_pairs().unwrap();
    }

    type ComparisonSetCheck = crate::data::ComparisonSet;

    #[test]
    fn too_many_ratings_rejected() {
        let w = simulate_world(3, 10, 2, 0.5, 3).unwrap();
        assert!(generate_responses(&w, SurveyScale::R100, 11, 2).is_err());
        assert!(generate_responses(&w, SurveyScale::Pc, 40, 10).is_err());
    }
}
