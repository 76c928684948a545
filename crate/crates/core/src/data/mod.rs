//! Survey domain types and the ingestion/summary pipeline.

mod io;
mod normalize;
mod summary;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurveyError};

pub use io::{load_dataset, read_comparisons, read_ratings, write_comparisons, write_ratings};
pub use normalize::z_normalize;
pub use summary::{coverage_probability, distinct_pair_count, summarize, Summary};

/// Fraction of each respondent's comparisons held out when a pairwise
/// comparison survey is split into training and test queries.
pub const PC_HELDOUT_FRACTION: f64 = 0.2;

/// The four simple-survey query types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurveyScale {
    /// Binary choice, encoded 0/1.
    R2,
    /// Five-point Likert scale.
    R5,
    /// Continuous slider, 1 to 100.
    R100,
    /// Pairwise comparison; carries no rating range.
    Pc,
}

impl SurveyScale {
    pub const ALL: [SurveyScale; 4] = [SurveyScale::R2, SurveyScale::R5, SurveyScale::R100, SurveyScale::Pc];

    /// Inclusive `(min_value, max_value)`, or `None` for pairwise comparisons.
    pub fn range(self) -> Option<(i64, i64)> {
        match self {
            SurveyScale::R2 => Some((0, 1)),
            SurveyScale::R5 => Some((1, 5)),
            SurveyScale::R100 => Some((1, 100)),
            SurveyScale::Pc => None,
        }
    }

    pub fn is_rating(self) -> bool {
        self != SurveyScale::Pc
    }

    /// Whether ratings on this scale are z-normalized per respondent before
    /// aggregation. Binary ratings are used raw.
    pub fn normalizes(self) -> bool {
        matches!(self, SurveyScale::R5 | SurveyScale::R100)
    }

    pub fn name(self) -> &'static str {
        match self {
            SurveyScale::R2 => "r2",
            SurveyScale::R5 => "r5",
            SurveyScale::R100 => "r100",
            SurveyScale::Pc => "pc",
        }
    }
}

impl fmt::Display for SurveyScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurveyScale {
    type Err = SurveyError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r2" => Ok(SurveyScale::R2),
            "r5" => Ok(SurveyScale::R5),
            "r100" => Ok(SurveyScale::R100),
            "pc" => Ok(SurveyScale::Pc),
            other => Err(SurveyError::InvalidArgument(format!("unknown survey scale {other:?}"))),
        }
    }
}

/// One rating as it appears in a ratings CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub respondent_id: String,
    pub item_id: String,
    pub value: i64,
    pub elapsed_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// One pairwise comparison as it appears in a comparisons CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub respondent_id: String,
    pub item_left: String,
    pub item_right: String,
    pub winner: Side,
    pub elapsed_ms: u64,
}

/// A rating resolved to matrix indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rating {
    pub respondent: usize,
    pub item: usize,
    pub value: i64,
    pub elapsed_ms: u64,
}

/// A comparison resolved to matrix indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Comparison {
    pub respondent: usize,
    pub left: usize,
    pub right: usize,
    pub winner: Side,
    pub elapsed_ms: u64,
}

impl Comparison {
    pub fn winner_item(&self) -> usize {
        match self.winner {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    pub fn loser_item(&self) -> usize {
        match self.winner {
            Side::Left => self.right,
            Side::Right => self.left,
        }
    }

    /// `+1` when the left item won, `-1` otherwise.
    pub fn sign(&self) -> f64 {
        match self.winner {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn unordered_pair(&self) -> (usize, usize) {
        (self.left.min(self.right), self.left.max(self.right))
    }
}

/// An ordered collection of index-resolved comparisons.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComparisonSet {
    comparisons: Vec<Comparison>,
}

impl ComparisonSet {
    /// Wraps comparisons without checking per-respondent pair uniqueness.
    /// Rejects self-comparisons.
    pub fn new(comparisons: Vec<Comparison>) -> Result<Self> {
        if let Some(c) = comparisons.iter().find(|c| c.left == c.right) {
            return Err(SurveyError::SelfComparison { respondent: c.respondent.to_string(), item: c.left.to_string() });
        }
        Ok(Self { comparisons })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.comparisons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comparisons.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Comparison> {
        self.comparisons.iter()
    }

    pub fn as_slice(&self) -> &[Comparison] {
        &self.comparisons
    }

    /// Errors when some respondent compares the same unordered pair twice.
    pub fn check_unique_pairs(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.comparisons.len());
        for c in &self.comparisons {
            let (a, b) = c.unordered_pair();
            if !seen.insert((c.respondent, a, b)) {
                return Err(SurveyError::DuplicatePair {
                    respondent: c.respondent.to_string(),
                    left: a.to_string(),
                    right: b.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Errors when any respondent index is `>= m` or item index is `>= n`.
    pub fn check_bounds(&self, m: usize, n: usize) -> Result<()> {
        for c in &self.comparisons {
            if c.respondent >= m {
                return Err(SurveyError::IndexOutOfRange { what: "respondents", index: c.respondent, size: m });
            }
            for item in [c.left, c.right] {
                if item >= n {
                    return Err(SurveyError::IndexOutOfRange { what: "items", index: item, size: n });
                }
            }
        }
        Ok(())
    }

    /// Groups comparisons by respondent, preserving order within each group.
    pub fn by_respondent(&self, m: usize) -> Vec<Vec<Comparison>> {
        let mut groups = vec![Vec::new(); m];
        for c in &self.comparisons {
            if c.respondent < m {
                groups[c.respondent].push(*c);
            }
        }
        groups
    }
}

impl FromIterator<Comparison> for ComparisonSet {
    /// Collects without validation; callers that need the self-comparison
    /// check should go through [`ComparisonSet::new`].
    fn from_iter<I: IntoIterator<Item = Comparison>>(iter: I) -> Self {
        Self { comparisons: iter.into_iter().collect() }
    }
}

impl<'a> IntoIterator for &'a ComparisonSet {
    type Item = &'a Comparison;
    type IntoIter = std::slice::Iter<'a, Comparison>;

    fn into_iter(self) -> Self::IntoIter {
        self.comparisons.iter()
    }
}

/// The observed respondent-by-item matrix with its index set of observed cells.
///
/// Entries are kept sorted by `(row, col)`; row and column adjacency lists are
/// precomputed for the alternating solver.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRatingMatrix {
    m: usize,
    n: usize,
    entries: Vec<(usize, usize, f64)>,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
}

impl SparseRatingMatrix {
    pub fn from_triplets<I>(m: usize, n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, x) in &entries {
            if i >= m {
                return Err(SurveyError::IndexOutOfRange { what: "rows", index: i, size: m });
            }
            if j >= n {
                return Err(SurveyError::IndexOutOfRange { what: "columns", index: j, size: n });
            }
            if !x.is_finite() {
                return Err(SurveyError::InvalidArgument(format!("non-finite entry at ({i}, {j})")));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(SurveyError::DuplicateRating { respondent: w[0].0.to_string(), item: w[0].1.to_string() });
        }
        let mut rows = vec![Vec::new(); m];
        let mut cols = vec![Vec::new(); n];
        for &(i, j, x) in &entries {
            rows[i].push((j, x));
            cols[j].push((i, x));
        }
        Ok(Self { m, n, entries, rows, cols })
    }

    /// Builds a fully observed matrix from row-major dense rows.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(SurveyError::DimensionMismatch("ragged dense rows".into()));
        }
        Self::from_triplets(
            m,
            n,
            rows.iter().enumerate().flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &x)| (i, j, x))),
        )
    }

    pub fn nrows(&self) -> usize {
        self.m
    }

    pub fn ncols(&self) -> usize {
        self.n
    }

    /// Number of observed cells, `|Ω|`.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn col(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rows.get(i)?.binary_search_by_key(&j, |&(c, _)| c).ok().map(|p| self.rows[i][p].1)
    }

    /// Same sparsity pattern with every observed value passed through `f(i, j, x)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Result<Self> {
        Self::from_triplets(self.m, self.n, self.entries.iter().map(|&(i, j, x)| (i, j, f(i, j, x))))
    }

    pub fn mean(&self) -> Option<f64> {
        if self.entries.is_empty() {
            None
        } else {
            Some(self.entries.iter().map(|e| e.2).sum::<f64>() / self.entries.len() as f64)
        }
    }
}

/// A validated survey: ratings (empty for pairwise surveys), training and
/// held-out comparisons, and the id-to-index maps.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub context: String,
    pub scale: SurveyScale,
    pub ratings: SparseRatingMatrix,
    /// Ratings in query order, grouped by respondent.
    pub rating_records: Vec<Rating>,
    pub training_comparisons: ComparisonSet,
    pub heldout_comparisons: ComparisonSet,
    pub item_ids: Vec<String>,
    pub respondent_ids: Vec<String>,
}

fn index_map(ids: &[String]) -> BTreeMap<&str, usize> {
    ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}

impl Dataset {
    /// Validates raw records and resolves them to indices.
    ///
    /// For rating scales every comparison is a held-out test query and
    /// respondent/item ids come from the ratings. For pairwise surveys the
    /// last fifth (rounded) of each respondent's comparisons, in input order,
    /// is held out and the rest are training queries.
    pub fn from_records(
        context: impl Into<String>,
        scale: SurveyScale,
        ratings: &[ResponseRecord],
        comparisons: &[ComparisonRecord],
    ) -> Result<Self> {
        if scale.is_rating() && ratings.is_empty() {
            return Err(SurveyError::Empty("ratings"));
        }
        if !scale.is_rating() && !ratings.is_empty() {
            return Err(SurveyError::InvalidArgument("pairwise-comparison datasets carry no ratings".into()));
        }
        if !scale.is_rating() && comparisons.is_empty() {
            return Err(SurveyError::Empty("comparisons"));
        }

        let (respondent_ids, item_ids): (Vec<String>, Vec<String>) = if scale.is_rating() {
            let r: BTreeSet<&String> = ratings.iter().map(|r| &r.respondent_id).collect();
            let i: BTreeSet<&String> = ratings.iter().map(|r| &r.item_id).collect();
            (r.into_iter().cloned().collect(), i.into_iter().cloned().collect())
        } else {
            let r: BTreeSet<&String> = comparisons.iter().map(|c| &c.respondent_id).collect();
            let i: BTreeSet<&String> = comparisons.iter().flat_map(|c| [&c.item_left, &c.item_right]).collect();
            (r.into_iter().cloned().collect(), i.into_iter().cloned().collect())
        };
        let respondent_index = index_map(&respondent_ids);
        let item_index = index_map(&item_ids);
        let lookup = |map: &BTreeMap<&str, usize>, kind: &'static str, id: &str| {
            map.get(id).copied().ok_or_else(|| SurveyError::UnknownId { kind, id: id.to_string() })
        };

        let mut rating_records = Vec::with_capacity(ratings.len());
        if let Some((min, max)) = scale.range() {
            for r in ratings {
                if r.value < min || r.value > max {
                    return Err(SurveyError::OutOfRange {
                        respondent: r.respondent_id.clone(),
                        value: r.value,
                        scale: scale.to_string(),
                        min,
                        max,
                    });
                }
                rating_records.push(Rating {
                    respondent: respondent_index[r.respondent_id.as_str()],
                    item: item_index[r.item_id.as_str()],
                    value: r.value,
                    elapsed_ms: r.elapsed_ms,
                });
            }
        }
        let mut seen = HashSet::with_capacity(rating_records.len());
        for r in &rating_records {
            if !seen.insert((r.respondent, r.item)) {
                return Err(SurveyError::DuplicateRating {
                    respondent: respondent_ids[r.respondent].clone(),
                    item: item_ids[r.item].clone(),
                });
            }
        }
        rating_records.sort_by_key(|r| r.respondent);

        let mut resolved = Vec::with_capacity(comparisons.len());
        let mut pairs = HashSet::with_capacity(comparisons.len());
        for c in comparisons {
            let respondent = lookup(&respondent_index, "respondent", &c.respondent_id)?;
            let left = lookup(&item_index, "item", &c.item_left)?;
            let right = lookup(&item_index, "item", &c.item_right)?;
            if left == right {
                return Err(SurveyError::SelfComparison {
                    respondent: c.respondent_id.clone(),
                    item: c.item_left.clone(),
                });
            }
            if !pairs.insert((respondent, left.min(right), left.max(right))) {
                return Err(SurveyError::DuplicatePair {
                    respondent: c.respondent_id.clone(),
                    left: c.item_left.clone(),
                    right: c.item_right.clone(),
                });
            }
            resolved.push(Comparison { respondent, left, right, winner: c.winner, elapsed_ms: c.elapsed_ms });
        }
        resolved.sort_by_key(|c| c.respondent);

        let m = respondent_ids.len();
        let n = item_ids.len();
        let (training, heldout) = if scale.is_rating() {
            (Vec::new(), resolved)
        } else {
            let mut training = Vec::new();
            let mut heldout = Vec::new();
            for group in resolved.chunk_by(|a, b| a.respondent == b.respondent) {
                let held = (group.len() as f64 * PC_HELDOUT_FRACTION).round() as usize;
                let split = group.len() - held;
                training.extend_from_slice(&group[..split]);
                heldout.extend_from_slice(&group[split..]);
            }
            (training, heldout)
        };

        let matrix = SparseRatingMatrix::from_triplets(
            m,
            n,
            rating_records.iter().map(|r| (r.respondent, r.item, r.value as f64)),
        )?;

        Ok(Self {
            context: context.into(),
            scale,
            ratings: matrix,
            rating_records,
            training_comparisons: training.into_iter().collect(),
            heldout_comparisons: heldout.into_iter().collect(),
            item_ids,
            respondent_ids,
        })
    }

    /// Number of respondents.
    pub fn m(&self) -> usize {
        self.respondent_ids.len()
    }

    /// Number of items.
    pub fn n(&self) -> usize {
        self.item_ids.len()
    }

    /// Converts back to CSV records: ratings in stored order, then per
    /// respondent the training comparisons followed by the held-out ones.
    pub fn to_records(&self) -> (Vec<ResponseRecord>, Vec<ComparisonRecord>) {
        let ratings = self
            .rating_records
            .iter()
            .map(|r| ResponseRecord {
                respondent_id: self.respondent_ids[r.respondent].clone(),
                item_id: self.item_ids[r.item].clone(),
                value: r.value,
                elapsed_ms: r.elapsed_ms,
            })
            .collect();
        let train = self.training_comparisons.by_respondent(self.m());
        let held = self.heldout_comparisons.by_respondent(self.m());
        let comparisons = train
            .iter()
            .zip(&held)
            .flat_map(|(t, h)| t.iter().chain(h))
            .map(|c| ComparisonRecord {
                respondent_id: self.respondent_ids[c.respondent].clone(),
                item_left: self.item_ids[c.left].clone(),
                item_right: self.item_ids[c.right].clone(),
                winner: c.winner,
                elapsed_ms: c.elapsed_ms,
            })
            .collect();
        (ratings, comparisons)
    }

    /// Elapsed milliseconds of each respondent's training queries, in query
    /// order: ratings for rating surveys, training comparisons otherwise.
    pub fn query_times(&self) -> Vec<Vec<u64>> {
        let mut times = vec![Vec::new(); self.m()];
        if self.scale.is_rating() {
            for r in &self.rating_records {
                times[r.respondent].push(r.elapsed_ms);
            }
        } else {
            for c in &self.training_comparisons {
                times[c.respondent].push(c.elapsed_ms);
            }
        }
        times
    }
}
