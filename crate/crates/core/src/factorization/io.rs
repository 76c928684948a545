//! JSON model files.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FactorModel;
use crate::comparison::ComparisonModel;
use crate::error::{Result, SurveyError};

/// A model file, tagged with `"kind": "factor"` or `"kind": "comparison"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelFile {
    Factor(FactorModel),
    Comparison(ComparisonModel),
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(SurveyError::DimensionMismatch(format!("{what} rows must have {ncols} columns")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
}

#[derive(Clone, Serialize, Deserialize)]
pub(crate) struct FactorModelRepr {
    k: usize,
    gamma: f64,
    m: usize,
    n: usize,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    row_means: Vec<Option<f64>>,
    col_means: Vec<Option<f64>>,
    global_mean: f64,
    #[serde(default)]
    objective_history: Vec<f64>,
}

impl From<FactorModel> for FactorModelRepr {
    fn from(m: FactorModel) -> Self {
        Self {
            k: m.k(),
            gamma: m.gamma,
            m: m.nrows(),
            n: m.ncols(),
            u: to_rows(&m.u),
            v: to_rows(&m.v),
            row_means: m.row_means,
            col_means: m.col_means,
            global_mean: m.global_mean,
            objective_history: m.objective_history,
        }
    }
}

impl TryFrom<FactorModelRepr> for FactorModel {
    type Error = SurveyError;

    fn try_from(r: FactorModelRepr) -> Result<Self> {
        let u = from_rows(&r.u, r.k, "U")?;
        let v = from_rows(&r.v, r.k, "V")?;
        if u.nrows() != r.m || v.nrows() != r.n || r.row_means.len() != r.m || r.col_means.len() != r.n {
            return Err(SurveyError::DimensionMismatch("model file shapes disagree with m, n".into()));
        }
        if r.k == 0 || r.gamma.is_nan() || r.gamma < 0.0 {
            return Err(SurveyError::InvalidArgument("model file needs k >= 1 and gamma >= 0".into()));
        }
        Ok(FactorModel {
            u,
            v,
            gamma: r.gamma,
            row_means: r.row_means,
            col_means: r.col_means,
            global_mean: r.global_mean,
            objective_history: r.objective_history,
        })
    }
}

impl Serialize for FactorModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FactorModelRepr::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FactorModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        FactorModel::try_from(FactorModelRepr::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}
