//! K-means clustering with automatic k (elbow on the WCSS curve), cluster
//! summaries in original units, and a 2-D PCA projection for plotting.

mod kmeans;
mod pca;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kmeans::{kmeans, KMeansOutcome};
pub use pca::{jacobi_eigen, project_2d, Projection2D, MAX_PCA_DIMENSION};

use crate::profiler::{self, DroppedAttribute, ProfilerError};
use crate::tabular::{numeric_view, Table, TabularError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusteringError {
    #[error("need at least k={k} points, got {points}")]
    TooFewPoints { points: usize, k: usize },
    #[error("elbow selection needs a contiguous range of at least 3 k values, got {0}")]
    RangeTooSmall(usize),
    #[error("projection limited to {MAX_PCA_DIMENSION} dimensions, got {0}")]
    DimensionTooLarge(usize),
    #[error("all points are identical")]
    Degenerate,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<ClusteringError>,
    },
    #[error("{stage}: {message}")]
    Upstream { stage: &'static str, message: String },
}

impl ClusteringError {
    fn at(self, stage: &'static str) -> Self {
        ClusteringError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

fn upstream(stage: &'static str) -> impl Fn(ProfilerError) -> ClusteringError {
    move |e| ClusteringError::Upstream {
        stage,
        message: e.to_string(),
    }
}

fn upstream_tabular(stage: &'static str) -> impl Fn(TabularError) -> ClusteringError {
    move |e| ClusteringError::Upstream {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub k: KChoice,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub standardize: bool,
    pub correlation_prune_threshold: f64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            k: KChoice::Auto,
            k_min: 2,
            k_max: 10,
            restarts: 5,
            max_iterations: 100,
            seed: 42,
            standardize: true,
            correlation_prune_threshold: 0.95,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<(), ClusteringError> {
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(ClusteringError::Config(format!(
                "need 2 <= k_min <= k_max, got {}..{}",
                self.k_min, self.k_max
            )));
        }
        if self.restarts == 0 {
            return Err(ClusteringError::Config("restarts must be at least 1".into()));
        }
        if let KChoice::Fixed(0) = self.k {
            return Err(ClusteringError::Config("k must be positive".into()));
        }
        Ok(())
    }
}

/// Second-difference elbow: the interior k maximising
/// `W(k-1) - 2 W(k) + W(k+1)`; the smaller k wins ties.
pub fn elbow_select(wcss_by_k: &BTreeMap<usize, f64>) -> Result<usize, ClusteringError> {
    let ks: Vec<usize> = wcss_by_k.keys().copied().collect();
    if ks.len() < 3 || ks.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(ClusteringError::RangeTooSmall(ks.len()));
    }
    let w: Vec<f64> = wcss_by_k.values().copied().collect();
    let mut best = (ks[1], f64::NEG_INFINITY);
    for i in 1..ks.len() - 1 {
        let second = w[i - 1] - 2.0 * w[i] + w[i + 1];
        if second > best.1 {
            best = (ks[i], second);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub k: usize,
    /// Per input row; `None` marks rows excluded by listwise deletion.
    pub assignments: Vec<Option<usize>>,
    /// Centroids in original units, one vector per cluster over `features_used`.
    pub centroids: Vec<Vec<f64>>,
    /// Population standard deviation of each feature within each cluster.
    pub per_cluster_std: Vec<Vec<f64>>,
    pub cluster_sizes: Vec<usize>,
    pub wcss_by_k: BTreeMap<usize, f64>,
    pub features_used: Vec<String>,
    pub pruned: Vec<DroppedAttribute>,
    pub zero_variance: Vec<String>,
    pub warnings: Vec<String>,
    pub auto_k: bool,
    /// Rows fed to k-means, in model space (standardized when configured).
    pub model_points: Vec<Vec<f64>>,
    pub model_centroids: Vec<Vec<f64>>,
    pub row_labels: Vec<String>,
}

impl ClusterResult {
    /// Row labels grouped by cluster.
    pub fn members(&self) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new(); self.k];
        for (label, a) in self.row_labels.iter().zip(&self.assignments) {
            if let Some(c) = a {
                out[*c].push(label.clone());
            }
        }
        out
    }

    pub fn projection(&self) -> Result<Projection2D, ClusteringError> {
        project_2d(&self.model_points, &self.model_centroids)
    }
}

/// Numeric view, zero-variance removal, correlation pruning, listwise
/// deletion, optional z-scoring, auto-k sweep + elbow, final fit.
pub fn cluster_table(table: &Table, config: &ClusteringConfig) -> Result<ClusterResult, ClusteringError> {
    config.validate()?;
    let numeric = numeric_view(table).map_err(upstream_tabular("numeric view"))?;
    let mut warnings = Vec::new();

    let zero_variance: Vec<String> = numeric
        .columns()
        .iter()
        .filter(|c| {
            let present: Vec<f64> = c
                .as_numeric()
                .expect("numeric view")
                .iter()
                .flatten()
                .copied()
                .collect();
            profiler::sample_std(&present).is_none_or(|s| s <= 0.0)
        })
        .map(|c| c.name().to_string())
        .collect();
    for name in &zero_variance {
        warnings.push(format!("attribute `{name}` has no variance and was left out"));
    }
    let varying = numeric.without(&zero_variance);
    if varying.n_cols() == 0 {
        return Err(ClusteringError::InvalidInput("no numeric attribute varies".into()).at("zero-variance filter"));
    }

    let pruning = profiler::prune_correlated(&varying, config.correlation_prune_threshold)
        .map_err(upstream("correlation pruning"))?;
    let features = varying.select(&pruning.kept);

    let cols: Vec<&[Option<f64>]> = features
        .columns()
        .iter()
        .map(|c| c.as_numeric().expect("numeric"))
        .collect();
    let mut rows = Vec::new();
    let mut included = Vec::new();
    for r in 0..features.n_rows() {
        let row: Option<Vec<f64>> = cols.iter().map(|c| c[r]).collect();
        if let Some(row) = row {
            rows.push(row);
            included.push(r);
        }
    }
    let excluded = features.n_rows() - rows.len();
    if excluded > 0 {
        warnings.push(format!("{excluded} row(s) with missing values were left out"));
    }
    if rows.len() < config.k_min {
        return Err(ClusteringError::TooFewPoints {
            points: rows.len(),
            k: config.k_min,
        }
        .at("listwise deletion"));
    }

    let d = cols.len();
    let n = rows.len();
    let means: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let stds: Vec<f64> = (0..d)
        .map(|j| {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            profiler::sample_std(&column).filter(|s| *s > 0.0).unwrap_or(1.0)
        })
        .collect();
    let model_points: Vec<Vec<f64>> = if config.standardize {
        rows.iter()
            .map(|r| (0..d).map(|j| (r[j] - means[j]) / stds[j]).collect())
            .collect()
    } else {
        rows.clone()
    };

    let fit = |k: usize| kmeans(&model_points, k, config.restarts, config.max_iterations, config.seed);
    let mut wcss_by_k = BTreeMap::new();
    let (k, outcome) = match config.k {
        KChoice::Fixed(k) => {
            let out = fit(k).map_err(|e| e.at("k-means"))?;
            wcss_by_k.insert(k, out.wcss);
            (k, out)
        }
        KChoice::Auto => {
            let hi = config.k_max.min(n - 1);
            let mut fits = BTreeMap::new();
            for k in config.k_min..=hi {
                let out = fit(k).map_err(|e| e.at("k sweep"))?;
                wcss_by_k.insert(k, out.wcss);
                fits.insert(k, out);
            }
            let k = elbow_select(&wcss_by_k).map_err(|e| e.at("elbow selection"))?;
            // The sweep fit at k is the final fit: same data, seed and settings.
            (k, fits.remove(&k).expect("k within sweep"))
        }
    };

    let mut sizes = vec![0usize; k];
    outcome.assignments.iter().for_each(|&a| sizes[a] += 1);
    let to_original = |c: &Vec<f64>| -> Vec<f64> {
        if config.standardize {
            (0..d).map(|j| c[j] * stds[j] + means[j]).collect()
        } else {
            c.clone()
        }
    };
    let centroids: Vec<Vec<f64>> = outcome.centroids.iter().map(to_original).collect();
    let per_cluster_std: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            (0..d)
                .map(|j| {
                    let members: Vec<f64> = rows
                        .iter()
                        .zip(&outcome.assignments)
                        .filter(|(_, &a)| a == c)
                        .map(|(r, _)| r[j])
                        .collect();
                    if members.is_empty() {
                        return 0.0;
                    }
                    let m = members.iter().sum::<f64>() / members.len() as f64;
                    (members.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / members.len() as f64).sqrt()
                })
                .collect()
        })
        .collect();

    let mut assignments = vec![None; table.n_rows()];
    for (row, a) in included.iter().zip(&outcome.assignments) {
        assignments[*row] = Some(*a);
    }

    Ok(ClusterResult {
        k,
        assignments,
        centroids,
        per_cluster_std,
        cluster_sizes: sizes,
        wcss_by_k,
        features_used: features.column_names(),
        pruned: pruning.dropped,
        zero_variance,
        warnings,
        auto_k: config.k == KChoice::Auto,
        model_points,
        model_centroids: outcome.centroids,
        row_labels: table.row_labels(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Column;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn elbow_picks_largest_second_difference() {
        let w: BTreeMap<usize, f64> = [(2, 100.0), (3, 20.0), (4, 15.0), (5, 12.0)].into();
        assert_eq!(elbow_select(&w).unwrap(), 3);
    }

    #[test]
    fn elbow_linear_tie_goes_to_smallest() {
        let w: BTreeMap<usize, f64> = [(2, 80.0), (3, 60.0), (4, 40.0), (5, 20.0)].into();
        assert_eq!(elbow_select(&w).unwrap(), 3);
    }

    #[test]
    fn elbow_range_checks() {
        let short: BTreeMap<usize, f64> = [(2, 1.0), (3, 0.5)].into();
        assert_eq!(elbow_select(&short), Err(ClusteringError::RangeTooSmall(2)));
        let gap: BTreeMap<usize, f64> = [(2, 1.0), (3, 0.5), (5, 0.1)].into();
        assert!(elbow_select(&gap).is_err());
    }

    proptest! {
        #[test]
        fn elbow_scale_invariant(
            w in prop::collection::vec(0.0f64..1000.0, 3..9),
            exp in -20i32..20,
        ) {
            let scale = 2f64.powi(exp);
            let base: BTreeMap<usize, f64> = w.iter().enumerate().map(|(i, v)| (i + 2, *v)).collect();
            let scaled: BTreeMap<usize, f64> = base.iter().map(|(k, v)| (*k, v * scale)).collect();
            prop_assert_eq!(elbow_select(&base).unwrap(), elbow_select(&scaled).unwrap());
        }
    }

    pub(crate) fn blob_table(seed: u64, blobs: usize, per_blob: usize, dims: usize) -> (Table, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut cols = vec![Vec::new(); dims];
        let mut labels = Vec::new();
        for b in 0..blobs {
            for _ in 0..per_blob {
                for (j, col) in cols.iter_mut().enumerate() {
                    // centres on distinct axes, 20 std apart
                    let centre = if j % blobs == b { 20.0 } else { 0.0 };
                    col.push(Some(centre + noise.sample(&mut rng)));
                }
                labels.push(b);
            }
        }
        let columns = cols
            .into_iter()
            .enumerate()
            .map(|(j, c)| Column::numeric(format!("f{j}"), c))
            .collect();
        (Table::new("blobs", columns).unwrap(), labels)
    }

    fn same_partition(a: &[Option<usize>], labels: &[usize]) -> bool {
        (0..labels.len()).all(|i| (0..labels.len()).all(|j| (a[i] == a[j]) == (labels[i] == labels[j])))
    }

    #[test]
    fn auto_k_finds_three_blobs() {
        let (t, labels) = blob_table(1, 3, 20, 3);
        let r = cluster_table(&t, &ClusteringConfig::default()).unwrap();
        assert_eq!(r.k, 3);
        assert!(same_partition(&r.assignments, &labels));
        assert_eq!(r.features_used.len(), 3);
        assert!(r.auto_k);
    }

    #[test]
    fn fixed_k_one_gives_column_means() {
        let (t, _) = blob_table(2, 3, 10, 3);
        let cfg = ClusteringConfig {
            k: KChoice::Fixed(1),
            ..Default::default()
        };
        let r = cluster_table(&t, &cfg).unwrap();
        assert_eq!(r.k, 1);
        for (j, c) in t.columns().iter().enumerate() {
            let vals: Vec<f64> = c.as_numeric().unwrap().iter().flatten().copied().collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((r.centroids[0][j] - m).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_column_excluded_with_warning() {
        let (t, _) = blob_table(3, 3, 10, 3);
        let mut cols = t.columns().to_vec();
        cols.push(Column::numeric("flat", vec![Some(4.0); t.n_rows()]));
        let t = Table::new("t", cols).unwrap();
        let r = cluster_table(&t, &ClusteringConfig::default()).unwrap();
        assert_eq!(r.zero_variance, vec!["flat"]);
        assert!(!r.features_used.contains(&"flat".to_string()));
        assert!(r.warnings.iter().any(|w| w.contains("flat")));
    }

    #[test]
    fn missing_rows_are_excluded() {
        let (t, _) = blob_table(4, 3, 10, 3);
        let mut cols = t.columns().to_vec();
        let mut first: Vec<Option<f64>> = cols[0].as_numeric().unwrap().to_vec();
        first[5] = None;
        cols[0] = Column::numeric("f0", first);
        let t = Table::new("t", cols).unwrap();
        let r = cluster_table(&t, &ClusteringConfig::default()).unwrap();
        assert_eq!(r.assignments[5], None);
        assert_eq!(r.assignments.iter().flatten().count(), 29);
    }

    #[test]
    fn stage_errors_name_their_stage() {
        let t = Table::new("t", vec![Column::text("s", vec![Some("x".into())])]).unwrap();
        let err = cluster_table(&t, &ClusteringConfig::default()).unwrap_err();
        assert!(err.to_string().starts_with("numeric view"), "{err}");

        let t = Table::new("t", vec![Column::numeric("x", vec![Some(1.0), Some(2.0), Some(3.0)])]).unwrap();
        let err = cluster_table(&t, &ClusteringConfig::default()).unwrap_err();
        assert!(err.to_string().starts_with("elbow selection"), "{err}");
    }

    #[test]
    fn bit_reproducible() {
        let (t, _) = blob_table(5, 3, 15, 4);
        let a = cluster_table(&t, &ClusteringConfig::default()).unwrap();
        let b = cluster_table(&t, &ClusteringConfig::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn wcss_non_increasing_over_k() {
        let (t, _) = blob_table(6, 3, 20, 3);
        let r = cluster_table(&t, &ClusteringConfig::default()).unwrap();
        let w: Vec<f64> = r.wcss_by_k.values().copied().collect();
        for pair in w.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "{w:?}");
        }
    }

    #[test]
    fn standardized_assignments_ignore_feature_scale() {
        let (t, _) = blob_table(7, 3, 15, 3);
        let scales = [(1000.0, 5.0), (0.001, -3.0), (7.0, 100.0)];
        let rescaled = Table::new(
            "t",
            t.columns()
                .iter()
                .zip(scales)
                .map(|(c, (a, b))| {
                    Column::numeric(
                        c.name(),
                        c.as_numeric().unwrap().iter().map(|v| v.map(|v| a * v + b)).collect(),
                    )
                })
                .collect(),
        )
        .unwrap();
        let cfg = ClusteringConfig {
            k: KChoice::Fixed(3),
            ..Default::default()
        };
        let a = cluster_table(&t, &cfg).unwrap();
        let b = cluster_table(&rescaled, &cfg).unwrap();
        let labels: Vec<usize> = a.assignments.iter().map(|x| x.unwrap()).collect();
        assert!(same_partition(&b.assignments, &labels));
    }

    #[test]
    fn projection_of_result() {
        let (t, _) = blob_table(8, 3, 10, 3);
        let r = cluster_table(&t, &ClusteringConfig::default()).unwrap();
        let p = r.projection().unwrap();
        assert_eq!(p.points.len(), 30);
        assert_eq!(p.centroid_points.len(), 3);
        let [a, b] = p.explained_variance_ratio;
        assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b) && a >= b && a + b <= 1.0 + 1e-9);
    }
}
