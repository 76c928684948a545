//! Individual and aggregate test errors, borda aggregation and mean-rating
//! rankings.

use std::fmt::Write as _;

use crate::data::{z_normalize, Comparison, ComparisonSet, SparseRatingMatrix, SurveyScale};
use crate::error::{Result, SurveyError};

/// Items ordered best first.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalRanking {
    pub order: Vec<usize>,
    pub score_per_item: Vec<f64>,
}

impl GlobalRanking {
    /// Sorts items by descending score, breaking ties by ascending index.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self { order, score_per_item: scores }
    }

    /// `position[item]` is the item's 0-based place in the order.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &item) in self.order.iter().enumerate() {
            pos[item] = p;
        }
        pos
    }

    pub fn reversed(&self) -> Self {
        Self {
            order: self.order.iter().rev().copied().collect(),
            score_per_item: self.score_per_item.iter().map(|s| -s).collect(),
        }
    }

    /// CSV with header `item_id,score,rank`, rows in ranked order, ranks from 1.
    pub fn to_csv(&self, item_ids: &[String]) -> String {
        let mut out = String::from("item_id,score,rank\n");
        for (p, &item) in self.order.iter().enumerate() {
            let id = item_ids.get(item).cloned().unwrap_or_else(|| item.to_string());
            let _ = writeln!(out, "{},{},{}", id, self.score_per_item[item], p + 1);
        }
        out
    }
}

/// Pairwise win proportions and borda scores.
#[derive(Clone, Debug, PartialEq)]
pub struct BordaTable {
    /// `p[i][j]`: share of observed `{i, j}` comparisons won by `i`; `0.5`
    /// for pairs never compared and `NaN` on the diagonal.
    pub p: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

impl BordaTable {
    pub fn ranking(&self) -> GlobalRanking {
        GlobalRanking::from_scores(self.scores.clone())
    }
}

/// Held-out win counts pooled over respondents: `counts[i][j]` is the number
/// of times item `i` beat item `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregateTestMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl AggregateTestMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Dense CSV: a header of item ids, then one row per item.
    pub fn to_csv(&self, item_ids: &[String]) -> String {
        let mut out = String::from("item_id");
        for id in item_ids {
            let _ = write!(out, ",{id}");
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(&item_ids[i]);
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

/// Fraction of one respondent's held-out comparisons that the per-item
/// scores get wrong. An exact score tie costs half a mistake.
pub fn individual_test_error(predicted_scores: &[f64], heldout: &[Comparison]) -> Result<f64> {
    if heldout.is_empty() {
        return Err(SurveyError::Empty("held-out comparisons"));
    }
    let mut wrong = 0.0;
    for c in heldout {
        for item in [c.left, c.right] {
            if item >= predicted_scores.len() {
                return Err(SurveyError::IndexOutOfRange {
                    what: "predicted scores",
                    index: item,
                    size: predicted_scores.len(),
                });
            }
        }
        let (w, l) = (predicted_scores[c.winner_item()], predicted_scores[c.loser_item()]);
        if w < l {
            wrong += 1.0;
        } else if w == l {
            wrong += 0.5;
        }
    }
    Ok(wrong / heldout.len() as f64)
}

/// Mean of the per-respondent errors.
pub fn model_test_error(per_respondent_errors: &[f64]) -> Result<f64> {
    if per_respondent_errors.is_empty() {
        return Err(SurveyError::Empty("per-respondent errors"));
    }
    Ok(per_respondent_errors.iter().sum::<f64>() / per_respondent_errors.len() as f64)
}

/// Borda score of each item: the mean over all other items of its pooled win
/// proportion, dividing by `n − 1`. Unobserved pairs count as `0.5`.
pub fn borda_scores(comparisons: &ComparisonSet, n: usize) -> Result<BordaTable> {
    if n < 2 {
        return Err(SurveyError::InvalidArgument(format!("borda scores need at least two items, got {n}")));
    }
    let mut wins = vec![vec![0u64; n]; n];
    for c in comparisons {
        let (w, l) = (c.winner_item(), c.loser_item());
        if w >= n || l >= n {
            return Err(SurveyError::IndexOutOfRange { what: "items", index: w.max(l), size: n });
        }
        wins[w][l] += 1;
    }
    let mut p = vec![vec![0.5; n]; n];
    for i in 0..n {
        p[i][i] = f64::NAN;
        for j in 0..n {
            let seen = wins[i][j] + wins[j][i];
            if i != j && seen > 0 {
                p[i][j] = wins[i][j] as f64 / seen as f64;
            }
        }
    }
    let scores = (0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| p[i][j]).sum::<f64>() / (n - 1) as f64).collect();
    Ok(BordaTable { p, scores })
}

/// Ranks items by their mean rating over respondents.
///
/// Five-point and slider ratings are z-normalized per respondent first;
/// binary ratings are averaged raw. Items nobody rated take the global mean.
pub fn mean_rating_ranking(matrix: &SparseRatingMatrix, scale: SurveyScale) -> Result<GlobalRanking> {
    if matrix.is_empty() {
        return Err(SurveyError::Empty("rating matrix"));
    }
    if !scale.is_rating() {
        return Err(SurveyError::InvalidArgument("mean-rating ranking needs a rating scale".into()));
    }
    let normalized;
    let matrix = if scale.normalizes() {
        normalized = z_normalize(matrix)?;
        &normalized
    } else {
        matrix
    };
    let global = matrix.mean().expect("nonempty");
    let scores = (0..matrix.ncols())
        .map(|j| {
            let col = matrix.col(j);
            if col.is_empty() {
                global
            } else {
                col.iter().map(|e| e.1).sum::<f64>() / col.len() as f64
            }
        })
        .collect();
    Ok(GlobalRanking::from_scores(scores))
}

pub fn build_aggregate_test_matrix(heldout: &ComparisonSet, n: usize) -> Result<AggregateTestMatrix> {
    let mut counts = vec![vec![0u64; n]; n];
    for c in heldout {
        let (w, l) = (c.winner_item(), c.loser_item());
        if w >= n || l >= n {
            return Err(SurveyError::IndexOutOfRange { what: "items", index: w.max(l), size: n });
        }
        if w != l {
            counts[w][l] += 1;
        }
    }
    Ok(AggregateTestMatrix { counts })
}

/// Count-weighted share of pooled held-out comparisons that contradict the
/// ranking: for each pair with `i` ranked above `j`, every `j`-beat-`i`
/// count is a mistake.
pub fn aggregate_test_error(ranking: &GlobalRanking, c: &AggregateTestMatrix) -> Result<f64> {
    let n = c.counts.len();
    if ranking.order.len() != n {
        return Err(SurveyError::DimensionMismatch(format!(
            "ranking has {} items, test matrix {n}",
            ranking.order.len()
        )));
    }
    let total = c.total();
    if total == 0 {
        return Err(SurveyError::Empty("aggregate test matrix"));
    }
    let pos = ranking.positions();
    let mistakes: u64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && pos[i] < pos[j])
        .map(|(i, j)| c.counts[j][i])
        .sum();
    Ok(mistakes as f64 / total as f64)
}
