//! Built-in implementations behind the abstract plan operations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::artifacts::ArtifactKind;
use super::registry::{NewArtifact, OpContext, OpFn, OpOutput};
use super::OpError;
use crate::catalog::vars;
use crate::clustering::{cluster_table, ClusterResult, ClusteringConfig, KChoice};
use crate::planner::DataKind;
use crate::profiler::{self, correlation_matrix, prune_correlated, ColumnProfile, PruningResult};
use crate::storyteller::{format_r, render_plot, PlotData, PlotSpec};
use crate::tabular::{ingest, numeric_view, serialize_csv, DType, SheetSelection, Table};

/// Payload of a Profile artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDoc {
    pub mode: String,
    pub table: String,
    pub rows: usize,
    pub profiles: Vec<ColumnProfile>,
}

pub(crate) fn builtin(op: &str) -> Option<(&'static str, OpFn)> {
    let entry: (&'static str, OpFn) = match op {
        "transform" => ("ingest_dataset", ingest_dataset),
        "select_sheet" => ("switch_sheet", ingest_dataset),
        "profile" => ("profile_table", profile_table),
        "numeric_view" => ("select_numeric", select_numeric),
        "correlation_matrix" => ("pearson_matrix", pearson_matrix),
        "plot_heatmap" => ("svg_heatmap", svg_heatmap),
        "prune" => ("prune_correlated", prune),
        "cluster" => ("kmeans_elbow", kmeans_elbow),
        "plot_elbow" => ("svg_elbow", svg_elbow),
        "plot_projection" => ("svg_projection", svg_projection),
        "plot_histograms" => ("svg_histograms", svg_histograms),
        "exclude_attributes" => ("drop_attributes", drop_attributes),
        _ => return None,
    };
    Some(entry)
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("artifact payloads serialize")
}

fn table_artifact(table: &Table, provides: DataKind, explanation: String, meta: Value) -> NewArtifact {
    NewArtifact {
        kind: ArtifactKind::TableRef,
        provides: Some(provides),
        bytes: serialize_csv(table, ',').into_bytes(),
        media_type: "text/csv".into(),
        title: table.name().to_string(),
        explanation,
        plot_kind: None,
        meta,
        visible: true,
    }
}

fn plot_artifact(ctx: &OpContext<'_>, spec: PlotSpec, explanation: String) -> Result<NewArtifact, OpError> {
    let svg = render_plot(&spec)?;
    let text = format!("{explanation} {}", spec.caption);
    Ok(NewArtifact {
        kind: ArtifactKind::PlotSvg,
        provides: Some(DataKind::Plot),
        bytes: svg.into_bytes(),
        media_type: "image/svg+xml".into(),
        title: spec.title.clone(),
        explanation: text,
        plot_kind: Some(spec.kind()),
        meta: json!({ "node": ctx.node_id, "caption": spec.caption }),
        visible: true,
    })
}

fn list(names: &[String]) -> String {
    match names.len() {
        0 => "none".into(),
        1 => names[0].clone(),
        n => format!("{} and {}", names[..n - 1].join(", "), names[n - 1]),
    }
}

fn short(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn table_counts(table: &Table) -> (usize, usize) {
    let numeric = table.columns().iter().filter(|c| c.dtype() == DType::Numeric).count();
    (numeric, table.n_cols() - numeric)
}

pub fn sheet_selection(value: Option<&Value>) -> Result<SheetSelection, OpError> {
    let bad = |v: &Value| OpError::Param {
        name: "sheets".into(),
        message: format!("expected \"all\", \"first\" or a list of sheet names, got {v}"),
    };
    match value {
        None | Some(Value::Null) => Ok(SheetSelection::All),
        Some(Value::String(s)) if s == "all" => Ok(SheetSelection::All),
        Some(Value::String(s)) if s == "first" => Ok(SheetSelection::First),
        Some(Value::String(s)) => Ok(SheetSelection::Names(vec![s.clone()])),
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| i.as_str().map(str::to_string).ok_or_else(|| bad(i)))
            .collect::<Result<Vec<_>, _>>()
            .map(SheetSelection::Names),
        Some(Value::Object(map)) => match map.get("names") {
            Some(names) => sheet_selection(Some(names)).and_then(|s| match s {
                SheetSelection::Names(n) => Ok(SheetSelection::Names(n)),
                _ => Err(bad(names)),
            }),
            None => Err(bad(&Value::Object(map.clone()))),
        },
        Some(other) => Err(bad(other)),
    }
}

fn ingest_dataset(ctx: &OpContext<'_>) -> Result<OpOutput, OpError> {
    let upload = ctx.upload()?;
    let bytes = ctx
        .blobs
        .get(&upload.hash)
        .ok_or_else(|| OpError::Payload(upload.hash.clone(), "upload bytes are missing".into()))?;
    let selection = sheet_selection(ctx.param("sheets"))?;
    let report = ingest(bytes, &upload.filename, &selection)?;
    let warnings = if report.warnings.is_empty() {
        String::new()
    } else {
        format!(" Note: {}.", report.warnings.join("; "))
    };
    let summary = report.summary();
    let mut out = OpOutput {
        artifacts: Vec::new(),
        sets_active_table: true,
    };
    for table in &report.tables {
        let (numeric, text) = table_counts(table);
        let explanation = ctx.explain(&vars([
            (
                "source",
                format!("{} ({})", upload.filename, report.source_format.describe()),
            ),
            ("table", table.name().to_string()),
            ("rows", table.n_rows().to_string()),
            ("cols", table.n_cols().to_string()),
            ("numeric", numeric.to_string()),
            ("text", text.to_string()),
            ("warnings", warnings.clone()),
        ]));
        out.artifacts.push(table_artifact(
            table,
            DataKind::Table,
            explanation,
            json!({ "rows": table.n_rows(), "columns": table.column_names(), "ingestion": summary }),
        ));
    }
    Ok(out)
}

fn profile_table(ctx: &OpContext<'_>) -> Result<OpOutput, OpError> {
    let table = ctx.table(DataKind::Table)?;
    let mode = ctx.param("mode").and_then(Value::as_str).unwrap_or("statistical");
    if mode != "statistical" && mode != "structural" {
        return Err(OpError::Param {
            name: "mode".into(),
            message: format!("expected statistical or structural, got {mode}"),
        });
    }
    let profiles = profiler::profile(table);
    let (numeric, text) = table_counts(table);
    let missing: usize = profiles.iter().map(|p| p.missing).sum();
    let columns: Vec<String> = table
        .columns()
        .iter()
        .map(|c| {
            let t = if c.dtype() == DType::Numeric { "numeric" } else { "text" };
            format!("{} ({t})", c.name())
        })
        .collect();
    let explanation = ctx.catalog.render(
        &format!("explain.profile.{mode}"),
        &vars([
            ("table", table.name().to_string()),
            ("rows", table.n_rows().to_string()),
            ("cols", table.n_cols().to_string()),
            ("numeric", numeric.to_string()),
            ("text", text.to_string()),
            ("missing", missing.to_string()),
            ("columns", columns.join(", ")),
        ]),
    );
    let doc = ProfileDoc {
        mode: mode.to_string(),
        table: table.name().to_string(),
        rows: table.n_rows(),
        profiles,
    };
    Ok(OpOutput {
        artifacts: vec![NewArtifact {
            kind: ArtifactKind::Profile,
            provides: Some(DataKind::Profile),
            bytes: json_bytes(&doc),
            media_type: "application/json".into(),
            title: format!("{} description of {}", capitalize(mode), table.name()),
            explanation,
            plot_kind: None,
            meta: json!({ "mode": mode, "rows": table.n_rows(), "cols": table.n_cols() }),
            visible: true,
        }],
        sets_active_table: false,
    })
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn select_numeric(ctx: &OpContext<'_>) -> Result<OpOutput, OpError> {
    let table = ctx.table(DataKind::Table)?;
    let numeric = numeric_view(table)?;
    let names = numeric.column_names();
    let explanation = ctx.explain(&vars([("count", names.len().to_string()), ("columns", list(&names))]));
    let mut artifact = table_artifact(
        &numeric,
        DataKind::NumericTable,
        explanation,
        json!({ "columns": names }),
    );
    artifact.visible = false;
    Ok(OpOutput {
        artifacts: vec![artifact],
        sets_active_table: false,
    })
}

fn pearson_matrix(ctx: &OpContext<'_>) -> Result<OpOutput, OpError> {
    let table = ctx.table(DataKind::NumericTable)?;
    let matrix = correlation_matrix(table)?;
    let top = matrix.strongest_pairs(3);
    let strongest = match top.first() {
        Some((a, b, r)) => format!(
            "The strongest linear relation is between {a} and {b} (r = {}).",
            format_r(*r)
        ),
        None => "No pair of attributes has enough overlapping values for a coefficient.".to_string(),
    };
    let explanation = ctx.explain(&vars([
        ("count", matrix.attribute_names.len().to_string()),
        ("strongest", strongest),
    ]));
    let pairs: Vec<Value> = top.iter().map(|(a, b, r)| json!({ "a": a, "b": b, "r": r })).collect();
    Ok(OpOutput {
        artifacts: vec![NewArtifact {
            kind: ArtifactKind::CorrelationMatrix,
            provides: Some(DataKind::Correlation),
            bytes: json_bytes(&matrix),
            media_type: "application/json".into(),
            title: "Pearson correlation matrix".into(),
            explanation,
            plot_kind: None,
            meta: json!({ "attributes": matrix.attribute_names, "strongest": pairs }),
            visible: true,
        }],
        sets_active_table: false,
    })
}

fn svg_heatmap(ctx: &OpContext<'_>) -> Result<OpOutput, OpError> {
    let matrix = ctx.correlation()?;
    let spec = PlotSpec {
        title: "Correlation heatmap".into(),
        x_label: "attribute".into(),
        y_label: "attribute".into(),
        caption: ctx.catalog.text("caption.heatmap"),
        data: PlotData::Heatmap {
            labels: matrix.attribute_names.clone(),
            r: matrix.r.clone(),
        },
    };
    let explanation = ctx.explain(&BTreeMap::new());
    Ok(OpOutput {
        artifacts: vec![plot_artifact(ctx, spec, explanation)?],
        sets_active_table: false,
    })
}

fn pruning_text(result: &PruningResult) -> String {
    let thr = short(result.threshold);
    if result.dropped.is_empty() {
        return format!(
            "No two numeric attributes have an absolute correlation above {thr}, so all {} are kept.",
            result.kept.len()
        );
    }
    let reasons: Vec<String> = result
        .dropped
        .iter()
        .map(|d| format!("{} (r = {} with {})", d.name, format_r(d.r), d.culprit))
        .collect();
    format!(
        "I removed {} because the absolute correlation with an attribute I kept is above {thr}: {}. {} attributes remain.",
        list(&result.dropped.iter().map(|d| d.name.clone()).collect::<Vec<_>>()),
        reasons.join("; "),
        result.kept.len()
    )
}

fn pruning_artifact(result: &PruningResult, explanation: String) -> NewArtifact {
    NewArtifact {
        kind: ArtifactKind::PruningReport,
        provides: Some(DataKind::Pruning),
        bytes: json_bytes(result),
        media_type: "application/json".into(),
        title: "Correlated attributes".into(),
        explanation,
        plot_kind: None,
        meta: json!({
            "threshold": result.threshold,
            "dropped": result.dropped.iter().map(|d| d.name.clone()).collect::<Vec<_>>(),
        }),
        visible: true,
    }
}

fn threshold(ctx: &OpContext<'_>, name: &str) -> Result<f64, OpError> {
    let t = ctx.f64_param(name)?.unwrap_or(0.95);
    if !(t > 0.0 && t <= 1.0) {
        return Err(OpError::Param {
            name: name.into(),
            message: format!("a correlation threshold must lie in (0, 1], got {t}"),
        });
    }
    Ok(t)
}

fn prune(ctx: &OpContext<'_>) -> Result<OpOutput, OpError> {
    let table = ctx.table(DataKind::NumericTable)?;
    let result = prune_correlated(table, threshold(ctx, "threshold")?)?;
    let kept = table.select(&result.kept);
    let explanation = ctx.explain(&vars([("pruned", pruning_text(&result))]));
    let mut kept_artifact = table_artifact(
        &kept,
        DataKind::NumericTable,
        explanation.clone(),
        json!({ "columns": result.kept }),
    );
    kept_artifact.visible = false;
    Ok(OpOutput {
        artifacts: vec![kept_artifact, pruning_artifact(&result, explanation)],
        sets_active_table: false,
    })
}

fn clustering_config(ctx: &OpContext<'_>) -> Result<ClusteringConfig, OpError> {
    let mut config = ClusteringConfig {
        seed: ctx.seed,
        ..ClusteringConfig::default()
    };
    config.k = match ctx.param("k") {
        None => KChoice::Auto,
        Some(Value::String(s)) if s == "auto" => KChoice::Auto,
        Some(_) => KChoice::Fixed(ctx.usize_param("k")?.expect("present")),
    };
    if let Some(v) = ctx.usize_param("k_min")? {
        config.k_min = v;
    }
    if let Some(v) = ctx.usize_param("k_max")? {
        config.k_max = v;
    }
    if let Some(v) = ctx.usize_param("restarts")? {
        config.restarts = v;
    }
    if let Some(v) = ctx.usize_param("max_iterations")? {
        config.max_iterations = v;
    }
    if let Some(v) = ctx.param("seed") {
        config.seed = v.as_u64().ok_or_else(|| OpError::Param {
            name: "seed".into(),
            message: "expected a non-negative whole number".into(),
        })?;
    }
    if let Some(v) = ctx.param("standardize") {
        config.standardize = v.as_bool().ok_or_else(|| OpError::Param {
            name: "standardize".into(),
            message: "expected true or false".into(),
        })?;
    }
    config.correlation_prune_threshold = threshold(ctx, "prune_threshold")?;
    Ok(config)
}

fn kmeans_elbow(ctx: &OpContext<'_>) -> Result<OpOutput, OpError> {
    let table = ctx.table(DataKind::NumericTable)?;
    let config = clustering_config(ctx)?;
    let result = cluster_table(table, &config)?;
    let how = if result.auto_k {
        format!(
            "I tried every k from {} to {} and took the elbow of the within-cluster sum of squares.",
            result.wcss_by_k.keys().next().copied().unwrap_or(config.k_min),
            result.wcss_by_k.keys().last().copied().unwrap_or(config.k_max)
        )
    } else {
        format!("You asked for {} clusters.", result.k)
    };
    let mut notes: Vec<String> = result.warnings.clone();
    if !result.pruned.is_empty() {
        notes.push(format!(
            "{} left out as correlated above {}",
            list(&result.pruned.iter().map(|d| d.name.clone()).collect::<Vec<_>>()),
            short(config.correlation_prune_threshold)
        ));
    }
    let notes = if notes.is_empty() {
        String::new()
    } else {
        format!(" Note: {}.", notes.join("; "))
    };
    let assigned = result.assignments.iter().flatten().count();
    let explanation = ctx.explain(&vars([
        ("rows", assigned.to_string()),
        ("k", result.k.to_string()),
        ("features", list(&result.features_used)),
        ("how", how),
        (
            "sizes",
            result
                .cluster_sizes
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        ),
        ("notes", notes),
    ]));
    Ok(OpOutput {
        artifacts: vec![NewArtifact {
            kind: ArtifactKind::ClusterResult,
            provides: Some(DataKind::Clusters),
            bytes: json_bytes(&result),
            media_type: "application/json".into(),
            title: format!("k-means with k = {}", result.k),
            explanation,
            plot_kind: None,
            meta: json!({
                "k": result.k,
                "auto_k": result.auto_k,
                "features_used": result.features_used,
                "cluster_sizes": result.cluster_sizes,
                "seed": config.seed,
            }),
            visible: true,
        }],
        sets_active_table: false,
    })
}

fn svg_elbow(ctx: &OpContext<'_>) -> Result<OpOutput, OpError> {
    let result = ctx.clusters()?;
    let spec = PlotSpec {
        title: "Elbow curve".into(),
        x_label: "number of clusters k".into(),
        y_label: "within-cluster sum of squares".into(),
        caption: ctx.catalog.text("caption.elbow_curve"),
        data: PlotData::ElbowCurve {
            points: result.wcss_by_k.iter().map(|(k, w)| (*k, *w)).collect(),
            chosen_k: result.k,
        },
    };
    let explanation = ctx.explain(&BTreeMap::new());
    Ok(OpOutput {
        artifacts: vec![plot_artifact(ctx, spec, explanation)?],
        sets_active_table: false,
    })
}

/// Per-cluster mean and sample std of every feature, in z units of the
/// clustered rows.
pub fn centroid_profile(result: &ClusterResult) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let points = &result.model_points;
    let d = result.features_used.len();
    let n = points.len();
    let col = |j: usize| points.iter().map(|p| p[j]).collect::<Vec<f64>>();
    let mu: Vec<f64> = (0..d).map(|j| profiler::mean(&col(j)).unwrap_or(0.0)).collect();
    let sd: Vec<f64> = (0..d)
        .map(|j| profiler::sample_std(&col(j)).filter(|s| *s > 0.0).unwrap_or(1.0))
        .collect();
    let clusters: Vec<usize> = result.assignments.iter().flatten().copied().collect();
    let mut means = vec![vec![0.0; d]; result.k];
    let mut stds = vec![vec![0.0; d]; result.k];
    for c in 0..result.k {
        let members: Vec<&Vec<f64>> = (0..n).filter(|i| clusters[*i] == c).map(|i| &points[i]).collect();
        for j in 0..d {
            let z: Vec<f64> = members.iter().map(|p| (p[j] - mu[j]) / sd[j]).collect();
            means[c][j] = profiler::mean(&z).unwrap_or(0.0);
            stds[c][j] = profiler::sample_std(&z).unwrap_or(0.0);
        }
    }
    (means, stds)
}

fn svg_projection(ctx: &OpContext<'_>) -> Result<OpOutput, OpError> {
    let result = ctx.clusters()?;
    let projection = result.projection()?;
    let [e1, e2] = projection.explained_variance_ratio;
    let explained = format!("{:.1}% and {:.1}% of the variance", e1 * 100.0, e2 * 100.0);
    let scatter = PlotSpec {
        title: format!("Clusters (k = {})", result.k),
        x_label: format!("PC1 ({:.1}%)", e1 * 100.0),
        y_label: format!("PC2 ({:.1}%)", e2 * 100.0),
        caption: ctx
            .catalog
            .render("caption.cluster_scatter_2d", &vars([("explained", explained)])),
        data: PlotData::ClusterScatter2D {
            points: projection.points.clone(),
            assignments: result.assignments.iter().flatten().copied().collect(),
            centroids: projection.centroid_points.clone(),
            labels: result
                .row_labels
                .iter()
                .zip(&result.assignments)
                .filter(|(_, a)| a.is_some())
                .map(|(l, _)| l.clone())
                .collect(),
        },
    };
    let (means, stds) = centroid_profile(result);
    let bars = PlotSpec {
        title: "Cluster centroids".into(),
        x_label: "attribute".into(),
        y_label: "mean (standard deviations)".into(),
        caption: ctx.catalog.text("caption.centroid_bars"),
        data: PlotData::CentroidBars {
            features: result.features_used.clone(),
            means,
            stds,
        },
    };
    let explanation = ctx.explain(&BTreeMap::new());
    Ok(OpOutput {
        artifacts: vec![
            plot_artifact(ctx, scatter, explanation.clone())?,
            plot_artifact(ctx, bars, explanation)?,
        ],
        sets_active_table: false,
    })
}

fn svg_histograms(ctx: &OpContext<'_>) -> Result<OpOutput, OpError> {
    let table = ctx.table(DataKind::NumericTable)?;
    let bins = ctx.usize_param("bins")?.unwrap_or(10);
    if bins == 0 {
        return Err(OpError::Param {
            name: "bins".into(),
            message: "need at least one bin".into(),
        });
    }
    let mut artifacts = Vec::new();
    for column in table.columns() {
        let values: Vec<f64> = column.as_numeric().into_iter().flatten().flatten().copied().collect();
        if values.is_empty() {
            continue;
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let spec = PlotSpec {
            title: format!("Distribution of {}", column.name()),
            x_label: column.name().to_string(),
            y_label: "count".into(),
            caption: ctx.catalog.render(
                "caption.histogram",
                &vars([("column", column.name().to_string()), ("bins", bins.to_string())]),
            ),
            data: PlotData::Histogram {
                values: values.clone(),
                bins,
            },
        };
        let explanation = ctx.explain(&vars([
            ("column", column.name().to_string()),
            ("count", values.len().to_string()),
            ("min", short(lo)),
            ("max", short(hi)),
        ]));
        artifacts.push(plot_artifact(ctx, spec, explanation)?);
    }
    if artifacts.is_empty() {
        return Err(OpError::Plot(crate::storyteller::PlotError::EmptyData(
            "no numeric attribute has values".into(),
        )));
    }
    Ok(OpOutput {
        artifacts,
        sets_active_table: false,
    })
}

fn drop_attributes(ctx: &OpContext<'_>) -> Result<OpOutput, OpError> {
    let table = ctx.table(DataKind::Table)?;
    let requested: Vec<String> = match ctx.param("attributes") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str().map(str::to_string).ok_or_else(|| OpError::Param {
                    name: "attributes".into(),
                    message: "expected a list of attribute names".into(),
                })
            })
            .collect::<Result<_, _>>()?,
        Some(Value::String(s)) => vec![s.clone()],
        Some(_) => {
            return Err(OpError::Param {
                name: "attributes".into(),
                message: "expected a list of attribute names".into(),
            })
        }
    };
    let mut artifacts = Vec::new();
    let (removed, excluded) = if requested.is_empty() {
        let thr = threshold(ctx, "threshold")?;
        let result = prune_correlated(&numeric_view(table)?, thr)?;
        let names: Vec<String> = result.dropped.iter().map(|d| d.name.clone()).collect();
        let text = pruning_text(&result);
        artifacts.push(pruning_artifact(&result, text.clone()));
        (names, text)
    } else {
        if let Some(missing) = requested.iter().find(|n| table.column(n).is_none()) {
            return Err(OpError::UnknownAttribute(missing.clone()));
        }
        let text = format!("I removed {} as you asked.", list(&requested));
        (requested, text)
    };
    let reduced = table.without(&removed);
    if reduced.n_cols() == 0 {
        return Err(OpError::Param {
            name: "attributes".into(),
            message: "that would remove every attribute".into(),
        });
    }
    let names = reduced.column_names();
    let explanation = ctx.explain(&vars([
        ("excluded", excluded),
        ("cols", names.len().to_string()),
        ("columns", list(&names)),
    ]));
    artifacts.insert(
        0,
        table_artifact(
            &reduced,
            DataKind::Table,
            explanation,
            json!({ "rows": reduced.n_rows(), "columns": names, "removed": removed }),
        ),
    );
    Ok(OpOutput {
        artifacts,
        sets_active_table: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sheet_selection_forms() {
        assert_eq!(sheet_selection(None).unwrap(), SheetSelection::All);
        assert_eq!(sheet_selection(Some(&json!("first"))).unwrap(), SheetSelection::First);
        assert_eq!(
            sheet_selection(Some(&json!({"names": ["a", "b"]}))).unwrap(),
            SheetSelection::Names(vec!["a".into(), "b".into()])
        );
        assert_eq!(
            sheet_selection(Some(&json!("t1"))).unwrap(),
            SheetSelection::Names(vec!["t1".into()])
        );
        assert!(sheet_selection(Some(&json!(3))).is_err());
    }

    #[test]
    fn number_and_list_formatting() {
        assert_eq!(short(0.950), "0.95");
        assert_eq!(short(2.0), "2");
        assert_eq!(list(&["a".into(), "b".into(), "c".into()]), "a, b and c");
    }
}
