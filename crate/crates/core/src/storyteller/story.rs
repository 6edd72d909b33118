//! The end-of-session story: a Markdown document that references the
//! session's artifacts by file name.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::catalog::{vars, MessageCatalog};
use crate::clustering::ClusterResult;
use crate::executor::{load_datum, Artifact, ArtifactKind, Datum, ProfileDoc};
use crate::intent::Rating;
use crate::planner::{NodeId, NodeKind, NodeState, PlanNode};
use crate::session::{Session, Speaker};
use crate::storyteller::format_r;

/// Operations whose completion makes a session worth a story.
pub const ANALYSIS_OPS: [&str; 4] = ["profile", "correlation_matrix", "cluster", "plot_histograms"];

/// Directory, relative to the story, where artifact files live.
pub const ARTIFACT_DIR: &str = "artifacts";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoryError {
    #[error("the session has no completed analysis to tell about")]
    EmptySession,
}

fn section_title(op: &str) -> Option<&'static str> {
    Some(match op {
        "profile" => "Profile",
        "correlation_matrix" | "plot_heatmap" => "Correlation",
        "prune" | "cluster" | "plot_elbow" | "plot_projection" => "Clustering",
        "plot_histograms" => "Distributions",
        "exclude_attributes" => "Attribute selection",
        "select_sheet" => "Sheet selection",
        _ => return None,
    })
}

fn list(names: &[String]) -> String {
    match names.len() {
        0 => "none".into(),
        1 => names[0].clone(),
        n => format!("{} and {}", names[..n - 1].join(", "), names[n - 1]),
    }
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace('\n', " ")
}

fn artifact_link(a: &Artifact) -> String {
    format!("{ARTIFACT_DIR}/{}", a.file_name())
}

fn fmt_num(x: Option<f64>) -> String {
    x.map(|v| {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    })
    .unwrap_or_else(|| "n/a".into())
}

fn profile_table(doc: &ProfileDoc) -> String {
    let mut out = String::new();
    if doc.mode == "structural" {
        out.push_str("| Attribute | Type | Missing |\n|---|---|---|\n");
        for p in &doc.profiles {
            out.push_str(&format!("| {} | {:?} | {} |\n", cell(&p.name), p.dtype, p.missing));
        }
    } else {
        out.push_str(
            "| Attribute | Type | Missing | Mean | Std | Min | Median | Max |\n|---|---|---|---|---|---|---|---|\n",
        );
        for p in &doc.profiles {
            let (mean, std, min, median, max) = match &p.numeric {
                Some(n) => (n.mean, n.sample_std, n.min, n.median, n.max),
                None => (None, None, None, None, None),
            };
            out.push_str(&format!(
                "| {} | {:?} | {} | {} | {} | {} | {} | {} |\n",
                cell(&p.name),
                p.dtype,
                p.missing,
                fmt_num(mean),
                fmt_num(std),
                fmt_num(min),
                fmt_num(median),
                fmt_num(max)
            ));
        }
    }
    out
}

fn membership_table(result: &ClusterResult) -> String {
    let mut out = String::from("| Cluster | Size | Rows |\n|---|---|---|\n");
    for (c, members) in result.members().iter().enumerate() {
        out.push_str(&format!(
            "| {} | {} | {} |\n",
            c + 1,
            members.len(),
            cell(&members.join(", "))
        ));
    }
    out
}

struct Builder<'a> {
    session: &'a Session,
    catalog: &'a MessageCatalog,
    nodes: BTreeMap<NodeId, &'a PlanNode>,
}

impl Builder<'_> {
    fn artifacts_of(&self, node: NodeId) -> Vec<&Artifact> {
        self.session
            .workspace
            .artifacts
            .iter()
            .filter(|a| a.node_id == Some(node))
            .collect()
    }

    fn datum(&self, a: &Artifact) -> Option<Datum> {
        load_datum(&self.session.workspace, a).ok()
    }

    /// Feedback given on turns that show an artifact of the instance.
    fn feedback_for(&self, instance: NodeId) -> Option<Rating> {
        self.session
            .turns
            .iter()
            .filter(|t| t.speaker == Speaker::Bot)
            .filter(|t| {
                t.node
                    .and_then(|n| self.nodes.get(&n))
                    .is_some_and(|n| n.instance == instance)
            })
            .filter_map(|t| t.feedback)
            .next_back()
    }

    fn render_artifact(&self, a: &Artifact, out: &mut String) {
        match a.kind {
            ArtifactKind::PlotSvg => {
                out.push_str(&format!("![{}]({} \"{}\")\n\n", cell(&a.title), artifact_link(a), a.id));
                out.push_str(&format!("{}\n\n", a.explanation));
            }
            ArtifactKind::Profile => {
                out.push_str(&format!("{}\n\n", a.explanation));
                if let Some(Datum::Profile(doc)) = self.datum(a) {
                    out.push_str(&profile_table(&doc));
                    out.push('\n');
                }
                out.push_str(&format!(
                    "Data: [{}]({} \"{}\")\n\n",
                    cell(&a.title),
                    artifact_link(a),
                    a.id
                ));
            }
            ArtifactKind::ClusterResult => {
                out.push_str(&format!("{}\n\n", a.explanation));
                if let Some(Datum::Clusters(result)) = self.datum(a) {
                    out.push_str(&membership_table(&result));
                    out.push('\n');
                }
                out.push_str(&format!(
                    "Data: [{}]({} \"{}\")\n\n",
                    cell(&a.title),
                    artifact_link(a),
                    a.id
                ));
            }
            _ => {
                out.push_str(&format!("{}\n\n", a.explanation));
                out.push_str(&format!(
                    "Data: [{}]({} \"{}\")\n\n",
                    cell(&a.title),
                    artifact_link(a),
                    a.id
                ));
            }
        }
    }
}

/// Builds the story of a session. Sections follow the conversation order.
pub fn build_story(session: &Session, catalog: &MessageCatalog) -> Result<String, StoryError> {
    let Some(plan) = &session.plan else {
        return Err(StoryError::EmptySession);
    };
    let completed = |n: &&PlanNode| n.state == NodeState::Completed && n.kind != NodeKind::BotRequest;
    let analyses: Vec<&PlanNode> = plan
        .nodes
        .iter()
        .filter(completed)
        .filter(|n| ANALYSIS_OPS.contains(&n.op_name.as_str()))
        .collect();
    if analyses.is_empty() {
        return Err(StoryError::EmptySession);
    }
    let b = Builder {
        session,
        catalog,
        nodes: plan.nodes.iter().map(|n| (n.id, n)).collect(),
    };

    let active = session
        .workspace
        .active_table
        .as_deref()
        .and_then(|id| session.workspace.artifact(id));
    let dataset = active.map(|a| a.title.clone()).unwrap_or_else(|| "the data".into());
    let mut analysis_names: Vec<String> = Vec::new();
    for n in &analyses {
        let name = match n.op_name.as_str() {
            "profile" => "a description",
            "correlation_matrix" => "a correlation analysis",
            "cluster" => "a clustering",
            _ => "distribution plots",
        };
        if !analysis_names.iter().any(|x| x == name) {
            analysis_names.push(name.to_string());
        }
    }

    let mut out = String::new();
    out.push_str(&format!(
        "# {}\n\n",
        b.catalog.render("story.title", &vars([("dataset", dataset.clone())]))
    ));
    out.push_str(&format!(
        "{}\n\n",
        b.catalog.render(
            "story.intro",
            &vars([
                ("dataset", dataset.clone()),
                ("analyses", list(&analysis_names)),
                ("turns", session.turns.len().to_string()),
            ])
        )
    ));

    out.push_str("## Dataset Overview\n\n");
    let mut sources = plan
        .nodes
        .iter()
        .filter(completed)
        .filter(|n| n.op_name == "transform")
        .peekable();
    if sources.peek().is_none() {
        out.push_str("The data was loaded before this part of the conversation.\n\n");
    }
    for n in sources {
        for a in b.artifacts_of(n.id).into_iter().filter(|a| a.visible) {
            out.push_str(&format!("{}\n\n", a.explanation));
            if let Some(cols) = a
                .meta
                .get("ingestion")
                .and_then(|i| i.get("tables"))
                .and_then(|t| t.as_array())
            {
                for t in cols
                    .iter()
                    .filter(|t| t.get("name").and_then(|n| n.as_str()) == Some(a.title.as_str()))
                {
                    let columns: Vec<String> = t
                        .get("columns")
                        .and_then(|c| c.as_array())
                        .map(|c| {
                            c.iter()
                                .map(|col| {
                                    format!(
                                        "{} ({})",
                                        col.get("name").and_then(|v| v.as_str()).unwrap_or("?"),
                                        col.get("dtype").and_then(|v| v.as_str()).unwrap_or("?").to_lowercase()
                                    )
                                })
                                .collect()
                        })
                        .unwrap_or_default();
                    out.push_str(&format!("Attributes: {}.\n\n", columns.join(", ")));
                }
            }
            out.push_str(&format!(
                "Data: [{}]({} \"{}\")\n\n",
                cell(&a.title),
                artifact_link(a),
                a.id
            ));
        }
    }

    // One section per template instantiation that produced something visible.
    let mut instances: BTreeMap<NodeId, Vec<&PlanNode>> = BTreeMap::new();
    for n in plan.nodes.iter().filter(completed) {
        if section_title(&n.op_name).is_some() {
            instances.entry(n.instance).or_default().push(n);
        }
    }
    let mut used: BTreeMap<&'static str, usize> = BTreeMap::new();
    for (instance, nodes) in &instances {
        let artifacts: Vec<&Artifact> = nodes
            .iter()
            .flat_map(|n| b.artifacts_of(n.id))
            .filter(|a| a.visible)
            .collect();
        if artifacts.is_empty() {
            continue;
        }
        let title = section_title(&nodes[0].op_name).expect("filtered");
        let count = used.entry(title).or_insert(0);
        *count += 1;
        if *count == 1 {
            out.push_str(&format!("## {title}\n\n"));
        } else {
            out.push_str(&format!("## {title} ({count})\n\n"));
        }
        for a in artifacts {
            b.render_artifact(a, &mut out);
        }
        match b.feedback_for(*instance) {
            Some(Rating::Like) => out.push_str(&format!("{}\n\n", b.catalog.text("story.feedback.like"))),
            Some(Rating::Dislike) => out.push_str(&format!("{}\n\n", b.catalog.text("story.feedback.dislike"))),
            None => {}
        }
    }

    out.push_str("## Conversation Timeline\n\n");
    for t in &session.turns {
        let who = match t.speaker {
            Speaker::User => "User",
            Speaker::Bot => "Bot",
        };
        let tag = t.pattern_tag.map(|p| format!(" [{}]", p.tag())).unwrap_or_default();
        let refs = if t.artifacts.is_empty() {
            String::new()
        } else {
            format!(" ({})", t.artifacts.join(", "))
        };
        out.push_str(&format!(
            "{}. **{who}**{tag}: {}{refs}\n",
            t.index + 1,
            t.text.replace('\n', " ")
        ));
    }
    out.push('\n');

    out.push_str("## Conclusions\n\n");
    let mut conclusions = Vec::new();
    if let Some(cols) = active.and_then(|a| a.meta.get("columns")).and_then(|c| c.as_array()) {
        let names: Vec<String> = cols.iter().filter_map(|c| c.as_str().map(str::to_string)).collect();
        conclusions.push(
            b.catalog
                .render("story.conclusion.attributes", &vars([("attributes", list(&names))])),
        );
    }
    let latest = |op: &str, kind: ArtifactKind| {
        plan.nodes
            .iter()
            .filter(completed)
            .filter(|n| n.op_name == op)
            .flat_map(|n| b.artifacts_of(n.id))
            .filter(|a| a.kind == kind)
            .next_back()
    };
    if let Some(Datum::Correlation(m)) =
        latest("correlation_matrix", ArtifactKind::CorrelationMatrix).and_then(|a| b.datum(a))
    {
        if let Some((x, y, r)) = m.strongest_pairs(1).into_iter().next() {
            conclusions.push(b.catalog.render(
                "story.conclusion.correlation",
                &vars([("a", x), ("b", y), ("r", format_r(r))]),
            ));
        }
    }
    let mut pruned: BTreeSet<String> = BTreeSet::new();
    if let Some(Datum::Clusters(c)) = latest("cluster", ArtifactKind::ClusterResult).and_then(|a| b.datum(a)) {
        conclusions.push(b.catalog.render(
            "story.conclusion.clusters",
            &vars([("k", c.k.to_string()), ("features", list(&c.features_used))]),
        ));
        pruned.extend(c.pruned.iter().map(|d| d.name.clone()));
    }
    for a in plan
        .nodes
        .iter()
        .filter(completed)
        .flat_map(|n| b.artifacts_of(n.id))
        .filter(|a| a.kind == ArtifactKind::PruningReport)
    {
        if let Some(Datum::Pruning(p)) = b.datum(a) {
            pruned.extend(p.dropped.iter().map(|d| d.name.clone()));
        }
    }
    if !pruned.is_empty() {
        let names: Vec<String> = pruned.into_iter().collect();
        conclusions.push(
            b.catalog
                .render("story.conclusion.pruned", &vars([("pruned", list(&names))])),
        );
    }
    let (likes, dislikes) = session.feedback_counts();
    if likes + dislikes > 0 {
        conclusions.push(b.catalog.render(
            "story.conclusion.feedback",
            &vars([("likes", likes.to_string()), ("dislikes", dislikes.to_string())]),
        ));
    }
    for c in conclusions {
        out.push_str(&format!("- {c}\n"));
    }
    Ok(out)
}

/// A reference from the story to a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoryLink {
    pub target: String,
    pub artifact_id: Option<String>,
}

/// Every `](target "id")` reference in a story.
pub fn story_links(markdown: &str) -> Vec<StoryLink> {
    let mut out = Vec::new();
    let mut rest = markdown;
    while let Some(start) = rest.find("](") {
        rest = &rest[start + 2..];
        let Some(end) = rest.find(')') else { break };
        let inner = &rest[..end];
        let (target, id) = match inner.split_once(' ') {
            Some((t, title)) => (t, Some(title.trim().trim_matches('"').to_string())),
            None => (inner, None),
        };
        out.push(StoryLink {
            target: target.to_string(),
            artifact_id: id,
        });
        rest = &rest[end..];
    }
    out
}

/// References that do not resolve to an artifact of the session.
pub fn check_story_links(markdown: &str, session: &Session) -> Vec<String> {
    let mut broken = Vec::new();
    for link in story_links(markdown) {
        let Some(file) = link.target.strip_prefix(&format!("{ARTIFACT_DIR}/")) else {
            broken.push(link.target);
            continue;
        };
        let by_file = session.workspace.artifacts.iter().find(|a| a.file_name() == file);
        let ok = match (&link.artifact_id, by_file) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(id), Some(_)) => session
                .workspace
                .artifact(id)
                .is_some_and(|a| a.file_name() == file && session.workspace.blobs.contains(&a.hash)),
        };
        if !ok {
            broken.push(link.target);
        }
    }
    broken
}
