//! Plain-text rendering of artifacts for the terminal.

use std::fmt::Write as _;

use convex_core::executor::{Artifact, ArtifactKind, ProfileDoc};
use convex_core::profiler::CorrelationMatrix;

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.3}"),
        _ => "-".into(),
    }
}

/// Lays out rows as left-aligned columns separated by two spaces.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell:<w$}", w = widths[c]))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

pub fn profile_table(doc: &ProfileDoc) -> String {
    let mut rows = vec![[
        "column", "type", "count", "missing", "mean", "std", "min", "median", "max", "distinct", "mode",
    ]
    .map(String::from)
    .to_vec()];
    for p in &doc.profiles {
        let mut row = vec![
            p.name.clone(),
            format!("{:?}", p.dtype),
            p.count.to_string(),
            p.missing.to_string(),
        ];
        match &p.numeric {
            Some(n) => row.extend([n.mean, n.sample_std, n.min, n.median, n.max].map(num)),
            None => row.extend(std::iter::repeat_n("-".to_string(), 5)),
        }
        match &p.text {
            Some(t) => row.extend([
                t.distinct.to_string(),
                t.modal_value.clone().unwrap_or_else(|| "-".into()),
            ]),
            None => row.extend(["-".to_string(), "-".to_string()]),
        }
        rows.push(row);
    }
    align(&rows)
}

pub fn correlation_table(m: &CorrelationMatrix) -> String {
    let mut rows = vec![std::iter::once(String::new())
        .chain(m.attribute_names.iter().cloned())
        .collect::<Vec<_>>()];
    for (name, r) in m.attribute_names.iter().zip(&m.r) {
        rows.push(std::iter::once(name.clone()).chain(r.iter().map(|v| num(*v))).collect());
    }
    align(&rows)
}

/// A terminal view of an artifact payload, when it has one beyond its caption.
pub fn artifact_body(artifact: &Artifact, payload: &[u8]) -> Option<String> {
    match artifact.kind {
        ArtifactKind::Profile => serde_json::from_slice::<ProfileDoc>(payload)
            .ok()
            .map(|d| profile_table(&d)),
        ArtifactKind::CorrelationMatrix => serde_json::from_slice::<CorrelationMatrix>(payload)
            .ok()
            .map(|m| correlation_table(&m)),
        ArtifactKind::ClusterResult => {
            let sizes = artifact.meta.get("cluster_sizes")?;
            Some(format!("cluster sizes: {sizes}\n"))
        }
        _ => None,
    }
}
