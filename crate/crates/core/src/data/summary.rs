use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use super::{Dataset, Side};
use crate::error::{Result, SurveyError};

/// Response distribution and per-block median answer times.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    /// Count of each response value. Pairwise surveys report winners as
    /// `0` (left) and `1` (right).
    pub histogram: BTreeMap<i64, u64>,
    /// Median over respondents of the summed answer time, in seconds, of
    /// each complete block of queries.
    pub block_median_seconds: Vec<f64>,
}

#[derive(Serialize)]
struct Bin {
    value: i64,
    count: u64,
}

impl Serialize for Summary {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            histogram: Vec<Bin>,
            block_median_seconds: &'a [f64],
        }
        Repr {
            histogram: self.histogram.iter().map(|(&value, &count)| Bin { value, count }).collect(),
            block_median_seconds: &self.block_median_seconds,
        }
        .serialize(serializer)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Builds the response histogram and block timing medians.
///
/// A respondent contributes to block `b` only if they answered every query
/// in it; trailing partial blocks are dropped.
pub fn summarize(dataset: &Dataset, block_size: usize) -> Result<Summary> {
    if block_size == 0 {
        return Err(SurveyError::InvalidArgument("block_size must be at least 1".into()));
    }
    if dataset.rating_records.is_empty() && dataset.training_comparisons.is_empty() {
        return Err(SurveyError::Empty("dataset"));
    }
    let mut histogram = BTreeMap::new();
    if dataset.scale.is_rating() {
        for r in &dataset.rating_records {
            *histogram.entry(r.value).or_insert(0) += 1;
        }
    } else {
        for c in &dataset.training_comparisons {
            let key = if c.winner == Side::Left { 0 } else { 1 };
            *histogram.entry(key).or_insert(0) += 1;
        }
    }

    let totals: Vec<Vec<f64>> = dataset
        .query_times()
        .iter()
        .map(|t| t.chunks_exact(block_size).map(|b| b.iter().sum::<u64>() as f64 / 1000.0).collect())
        .collect();
    let blocks = totals.iter().map(Vec::len).max().unwrap_or(0);
    let block_median_seconds = (0..blocks)
        .map(|b| {
            let mut vals: Vec<f64> = totals.iter().filter_map(|t| t.get(b).copied()).collect();
            median(&mut vals)
        })
        .collect();
    Ok(Summary { histogram, block_median_seconds })
}

/// Probability that a uniformly random pair of distinct items out of `total`
/// contains at least one of the `total - rated` items a respondent never rated.
pub fn coverage_probability(rated: u64, total: u64) -> Result<f64> {
    if total < 2 {
        return Err(SurveyError::InvalidArgument(format!("need at least two items, got {total}")));
    }
    if rated > total {
        return Err(SurveyError::InvalidArgument(format!("rated count {rated} exceeds item count {total}")));
    }
    let both_rated = (rated as f64 * rated.saturating_sub(1) as f64) / (total as f64 * (total - 1) as f64);
    Ok(1.0 - both_rated)
}

/// Number of distinct unordered pairs among `n` items.
pub fn distinct_pair_count(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ComparisonRecord, ResponseRecord, SurveyScale};
    use proptest::prelude::*;

    fn timed(r: &str, n: usize, ms: u64, value: i64) -> Vec<ResponseRecord> {
        (0..n)
            .map(|j| ResponseRecord { respondent_id: r.into(), item_id: format!("i{j:02}"), value, elapsed_ms: ms })
            .collect()
    }

    #[test]
    fn block_medians() {
        // 8 queries each: 3s, 4s, 5s per query -> 24s, 32s, 40s per block.
        let mut rows = timed("a", 8, 3000, 1);
        rows.extend(timed("b", 8, 4000, 1));
        rows.extend(timed("c", 8, 5000, 0));
        rows.extend(timed("d", 7, 1000, 1));
        let ds = Dataset::from_records("t", SurveyScale::R2, &rows, &[]).unwrap();
        let s = summarize(&ds, 8).unwrap();
        assert_eq!(s.block_median_seconds, vec![32.0]);
        assert_eq!(s.histogram, BTreeMap::from([(0, 8), (1, 23)]));
    }

    #[test]
    fn histogram_counts_values() {
        let rows = [("a", 1), ("b", 1), ("c", 0)].map(|(r, v)| ResponseRecord {
            respondent_id: r.into(),
            item_id: "x".into(),
            value: v,
            elapsed_ms: 1,
        });
        let ds = Dataset::from_records("t", SurveyScale::R2, &rows, &[]).unwrap();
        let s = summarize(&ds, 8).unwrap();
        assert_eq!(s.histogram, BTreeMap::from([(0, 1), (1, 2)]));
        assert!(s.block_median_seconds.is_empty());
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["histogram"][1]["count"], 2);
    }

    #[test]
    fn pc_histogram_and_errors() {
        let cs: Vec<ComparisonRecord> = (0..5)
            .map(|k| ComparisonRecord {
                respondent_id: "r".into(),
                item_left: format!("i{k}"),
                item_right: format!("i{}", k + 1),
                winner: if k % 2 == 0 { Side::Left } else { Side::Right },
                elapsed_ms: 2000,
            })
            .collect();
        let ds = Dataset::from_records("t", SurveyScale::Pc, &[], &cs).unwrap();
        let s = summarize(&ds, 2).unwrap();
        assert_eq!(s.histogram, BTreeMap::from([(0, 2), (1, 2)]));
        assert_eq!(s.block_median_seconds, vec![4.0, 4.0]);
        assert!(summarize(&ds, 0).is_err());
    }

    #[test]
    fn coverage_values() {
        let p = coverage_probability(80, 100).unwrap();
        assert!((p - (1.0 - 6320.0 / 9900.0)).abs() < 1e-12);
        assert_eq!((p * 100.0).round() / 100.0, 0.36);
        let p = coverage_probability(8, 100).unwrap();
        assert!((p - (1.0 - 56.0 / 9900.0)).abs() < 1e-12);
        assert_eq!((p * 100.0).round() / 100.0, 0.99);
        assert_eq!(coverage_probability(100, 100).unwrap(), 0.0);
        assert_eq!(coverage_probability(1, 100).unwrap(), 1.0);
        assert!(coverage_probability(5, 4).is_err());
        assert!(coverage_probability(0, 1).is_err());
        assert_eq!(distinct_pair_count(100), 4950);
    }

    proptest! {
        #[test]
        fn coverage_monotone(n in 2u64..500, r in 0u64..500) {
            let r = r.min(n);
            let p = coverage_probability(r, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            if r < n {
                prop_assert!(coverage_probability(r + 1, n).unwrap() <= p);
            }
        }
    }
}
