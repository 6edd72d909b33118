//! Column statistics, Pearson correlation and correlated-attribute pruning.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tabular::{numeric_view, Column, ColumnData, DType, Table, TabularError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfilerError {
    #[error("need at least 2 numeric columns for a correlation matrix, found {0}")]
    NotEnoughNumericColumns(usize),
    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

/// Summary of a numeric column. Fields are `None` when undefined (no values,
/// or a single value for the standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericSummary {
    pub mean: Option<f64>,
    pub sample_std: Option<f64>,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextSummary {
    pub distinct: usize,
    pub modal_value: Option<String>,
    pub modal_frequency: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub dtype: DType,
    pub count: usize,
    pub missing: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub numeric: Option<NumericSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<TextSummary>,
}

/// Quantile of sorted data by linear interpolation between closest ranks
/// (inclusive method: position `p * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Standard deviation with the `n - 1` divisor; undefined below two values.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

fn numeric_summary(values: &[Option<f64>]) -> NumericSummary {
    let mut present: Vec<f64> = values.iter().flatten().copied().collect();
    let mean = mean(&present);
    let sample_std = sample_std(&present);
    present.sort_by(f64::total_cmp);
    NumericSummary {
        mean,
        sample_std,
        min: present.first().copied(),
        q1: quantile_sorted(&present, 0.25),
        median: quantile_sorted(&present, 0.5),
        q3: quantile_sorted(&present, 0.75),
        max: present.last().copied(),
    }
}

/// Distinct count and the most frequent value (earliest first appearance wins ties).
fn text_summary(values: &[Option<String>]) -> TextSummary {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for (pos, v) in values.iter().flatten().enumerate() {
        counts.entry(v.as_str()).or_insert((0, pos)).0 += 1;
    }
    let modal = counts
        .iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(k, (n, _))| (k.to_string(), *n));
    TextSummary {
        distinct: counts.len(),
        modal_frequency: modal.as_ref().map(|m| m.1).unwrap_or(0),
        modal_value: modal.map(|m| m.0),
    }
}

pub fn profile_column(column: &Column) -> ColumnProfile {
    let missing = column.missing_count();
    let count = column.len() - missing;
    let (numeric, text) = match column.data() {
        ColumnData::Numeric(v) => (Some(numeric_summary(v)), None),
        ColumnData::Text(v) => (None, Some(text_summary(v))),
    };
    ColumnProfile {
        name: column.name().to_string(),
        dtype: column.dtype(),
        count,
        missing,
        numeric,
        text,
    }
}

pub fn profile(table: &Table) -> Vec<ColumnProfile> {
    table.columns().iter().map(profile_column).collect()
}

/// Pearson product-moment correlation. `None` with fewer than two pairs or a
/// zero variance on either side.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson needs paired samples");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Rows where both cells are present.
pub fn pairwise_complete(x: &[Option<f64>], y: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    x.iter().zip(y).filter_map(|(a, b)| Some(((*a)?, (*b)?))).unzip()
}

pub fn pearson_columns(x: &[Option<f64>], y: &[Option<f64>]) -> Option<f64> {
    let (a, b) = pairwise_complete(x, y);
    pearson(&a, &b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub attribute_names: Vec<String>,
    /// `None` marks an undefined coefficient.
    pub r: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.attribute_names.iter().position(|n| n == a)?;
        let j = self.attribute_names.iter().position(|n| n == b)?;
        self.r[i][j]
    }

    /// Off-diagonal pairs sorted by decreasing |r|.
    pub fn strongest_pairs(&self, limit: usize) -> Vec<(String, String, f64)> {
        let mut pairs = Vec::new();
        for i in 0..self.attribute_names.len() {
            for j in (i + 1)..self.attribute_names.len() {
                if let Some(r) = self.r[i][j] {
                    pairs.push((self.attribute_names[i].clone(), self.attribute_names[j].clone(), r));
                }
            }
        }
        pairs.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()));
        pairs.truncate(limit);
        pairs
    }
}

pub fn correlation_matrix(table: &Table) -> Result<CorrelationMatrix, ProfilerError> {
    let numeric = match numeric_view(table) {
        Ok(t) => t,
        Err(TabularError::NoNumericColumns) => return Err(ProfilerError::NotEnoughNumericColumns(0)),
        Err(e) => return Err(e.into()),
    };
    let cols: Vec<&[Option<f64>]> = numeric
        .columns()
        .iter()
        .map(|c| c.as_numeric().expect("numeric view"))
        .collect();
    if cols.len() < 2 {
        return Err(ProfilerError::NotEnoughNumericColumns(cols.len()));
    }
    let d = cols.len();
    let mut r = vec![vec![None; d]; d];
    for i in 0..d {
        for j in i..d {
            let v = if i == j {
                let present: Vec<f64> = cols[i].iter().flatten().copied().collect();
                sample_std(&present).filter(|s| *s > 0.0).map(|_| 1.0)
            } else {
                pearson_columns(cols[i], cols[j])
            };
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(CorrelationMatrix {
        attribute_names: numeric.column_names(),
        r,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedAttribute {
    pub name: String,
    pub culprit: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningResult {
    pub kept: Vec<String>,
    pub dropped: Vec<DroppedAttribute>,
    pub threshold: f64,
}

/// Greedy left-to-right pruning: a numeric column is dropped when
/// `|r| > threshold` against an already kept column; the first such kept
/// column is recorded as the culprit.
pub fn prune_correlated(table: &Table, threshold: f64) -> Result<PruningResult, ProfilerError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(ProfilerError::InvalidThreshold(threshold));
    }
    let numeric = numeric_view(table)?;
    let mut kept: Vec<&Column> = Vec::new();
    let mut dropped = Vec::new();
    for col in numeric.columns() {
        let x = col.as_numeric().expect("numeric view");
        let culprit = kept.iter().find_map(|k| {
            let r = pearson_columns(k.as_numeric().expect("numeric view"), x)?;
            (r.abs() > threshold).then(|| (k.name().to_string(), r))
        });
        match culprit {
            Some((culprit, r)) => dropped.push(DroppedAttribute {
                name: col.name().to_string(),
                culprit,
                r,
            }),
            None => kept.push(col),
        }
    }
    Ok(PruningResult {
        kept: kept.iter().map(|c| c.name().to_string()).collect(),
        dropped,
        threshold,
    })
}
