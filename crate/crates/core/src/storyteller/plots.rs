//! Static SVG charts on a fixed 800x500 canvas.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Histogram,
    Heatmap,
    ElbowCurve,
    #[serde(rename = "cluster_scatter_2d")]
    ClusterScatter2D,
    CentroidBars,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::Histogram => "histogram",
            PlotKind::Heatmap => "heatmap",
            PlotKind::ElbowCurve => "elbow_curve",
            PlotKind::ClusterScatter2D => "cluster_scatter_2d",
            PlotKind::CentroidBars => "centroid_bars",
        }
    }

    pub fn parse(name: &str) -> Result<Self, PlotError> {
        [
            PlotKind::Histogram,
            PlotKind::Heatmap,
            PlotKind::ElbowCurve,
            PlotKind::ClusterScatter2D,
            PlotKind::CentroidBars,
        ]
        .into_iter()
        .find(|k| k.as_str() == name)
        .ok_or_else(|| PlotError::UnknownKind(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlotData {
    Histogram {
        values: Vec<f64>,
        bins: usize,
    },
    Heatmap {
        labels: Vec<String>,
        r: Vec<Vec<Option<f64>>>,
    },
    ElbowCurve {
        /// (k, wcss) in increasing k.
        points: Vec<(usize, f64)>,
        chosen_k: usize,
    },
    #[serde(rename = "cluster_scatter_2d")]
    ClusterScatter2D {
        points: Vec<[f64; 2]>,
        assignments: Vec<usize>,
        centroids: Vec<[f64; 2]>,
        labels: Vec<String>,
    },
    CentroidBars {
        features: Vec<String>,
        /// means[cluster][feature]
        means: Vec<Vec<f64>>,
        stds: Vec<Vec<f64>>,
    },
}

impl PlotData {
    pub fn kind(&self) -> PlotKind {
        match self {
            PlotData::Histogram { .. } => PlotKind::Histogram,
            PlotData::Heatmap { .. } => PlotKind::Heatmap,
            PlotData::ElbowCurve { .. } => PlotKind::ElbowCurve,
            PlotData::ClusterScatter2D { .. } => PlotKind::ClusterScatter2D,
            PlotData::CentroidBars { .. } => PlotKind::CentroidBars,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub caption: String,
    pub data: PlotData,
}

impl PlotSpec {
    pub fn kind(&self) -> PlotKind {
        self.data.kind()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlotError {
    #[error("nothing to plot: {0}")]
    EmptyData(String),
    #[error("unknown plot kind `{0}`")]
    UnknownKind(String),
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Two decimals with a typographic minus sign.
pub fn format_r(r: f64) -> String {
    let s = format!("{r:.2}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().any(|c| c != '0' && c != '.') => format!("\u{2212}{rest}"),
        Some(rest) => rest.to_string(),
        None => s,
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    let s = if !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.3}")
    };
    let s = if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    s.replacen('-', "\u{2212}", 1)
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Frame {
        let pad = |a: f64, b: f64| {
            if (b - a).abs() < 1e-12 {
                (a - 0.5, b + 0.5)
            } else {
                (a, b)
            }
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Frame { x0, x1, y0, y1 }
    }
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, spec: &PlotSpec) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-kind="{}">"#,
        spec.kind().as_str()
    );
    let _ = writeln!(out, "<desc>{}</desc>", escape(&spec.caption));
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="30" text-anchor="middle" font-family="sans-serif" font-size="18" fill="#222222">{}</text>"##,
        WIDTH / 2.0,
        escape(&spec.title)
    );
}

fn axes(out: &mut String, spec: &PlotSpec, frame: &Frame, x_ticks: bool) {
    let (bx, by) = (LEFT, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r##"<line x1="{bx:.2}" y1="{by:.2}" x2="{:.2}" y2="{by:.2}" stroke="#444444"/>"##,
        WIDTH - RIGHT
    );
    let _ = writeln!(
        out,
        r##"<line x1="{bx:.2}" y1="{TOP:.2}" x2="{bx:.2}" y2="{by:.2}" stroke="#444444"/>"##
    );
    for i in 0..=4 {
        let v = frame.y0 + (frame.y1 - frame.y0) * i as f64 / 4.0;
        let y = frame.py(v);
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11" fill="#444444">{}</text>"##,
            bx - 6.0,
            y + 4.0,
            tick_label(v)
        );
    }
    if x_ticks {
        for i in 0..=4 {
            let v = frame.x0 + (frame.x1 - frame.x0) * i as f64 / 4.0;
            let x = frame.px(v);
            let _ = writeln!(
                out,
                r##"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11" fill="#444444">{}</text>"##,
                by + 18.0,
                tick_label(v)
            );
        }
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" fill="#222222">{}</text>"##,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 20.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        out,
        r##"<text x="20" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" fill="#222222" transform="rotate(-90 20 {:.2})">{}</text>"##,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(&spec.y_label)
    );
}

/// Equal-width bin counts over [min, max]; the last bin is closed.
pub fn histogram_counts(values: &[f64], bins: usize) -> (f64, f64, Vec<usize>) {
    let bins = bins.max(1);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0usize; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let idx = if width > 0.0 {
            (((v - lo) / width).floor() as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    (lo, hi, counts)
}

fn render_histogram(out: &mut String, spec: &PlotSpec, values: &[f64], bins: usize) -> Result<(), PlotError> {
    let values: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if values.is_empty() {
        return Err(PlotError::EmptyData("histogram without values".into()));
    }
    let (lo, hi, counts) = histogram_counts(&values, bins);
    let max = *counts.iter().max().expect("non-empty") as f64;
    let frame = Frame::new(lo, hi, 0.0, max);
    axes(out, spec, &frame, true);
    let n = counts.len() as f64;
    let span = frame.x1 - frame.x0;
    for (i, c) in counts.iter().enumerate() {
        let a = frame.px(frame.x0 + span * i as f64 / n);
        let b = frame.px(frame.x0 + span * (i + 1) as f64 / n);
        let top = frame.py(*c as f64);
        let _ = writeln!(
            out,
            r##"<rect class="bar" x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="#ffffff" data-count="{c}"/>"##,
            a,
            (b - a).max(0.0),
            frame.py(0.0) - top,
            PALETTE[0]
        );
    }
    Ok(())
}

fn heat_color(r: f64) -> String {
    // white at 0, red at +1, blue at -1
    let t = r.clamp(-1.0, 1.0);
    let (tr, tg, tb) = if t >= 0.0 {
        (214.0, 39.0, 40.0)
    } else {
        (31.0, 119.0, 180.0)
    };
    let a = t.abs();
    let mix = |c: f64| (255.0 + (c - 255.0) * a).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(tr), mix(tg), mix(tb))
}

fn render_heatmap(out: &mut String, labels: &[String], r: &[Vec<Option<f64>>]) -> Result<(), PlotError> {
    let n = labels.len();
    if n == 0 || r.len() != n || r.iter().any(|row| row.len() != n) {
        return Err(PlotError::EmptyData("heatmap needs a square, non-empty matrix".into()));
    }
    let size = ((HEIGHT - TOP - BOTTOM).min(WIDTH - 2.0 * LEFT - 60.0)) / n as f64;
    let x0 = (WIDTH - size * n as f64) / 2.0 + 40.0;
    let y0 = TOP + 10.0;
    let font = (size * 0.28).clamp(6.0, 14.0);
    for (i, row) in r.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let (x, y) = (x0 + j as f64 * size, y0 + i as f64 * size);
            let (fill, text) = match cell {
                Some(v) => (heat_color(*v), format_r(*v)),
                None => ("#dddddd".to_string(), "n/a".to_string()),
            };
            let _ = writeln!(
                out,
                r##"<rect class="cell" x="{x:.2}" y="{y:.2}" width="{size:.2}" height="{size:.2}" fill="{fill}" stroke="#ffffff"/>"##
            );
            let _ = writeln!(
                out,
                r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="{font:.1}" fill="#111111">{text}</text>"##,
                x + size / 2.0,
                y + size / 2.0 + font / 3.0
            );
        }
    }
    for (i, label) in labels.iter().enumerate() {
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11" fill="#222222">{}</text>"##,
            x0 - 6.0,
            y0 + (i as f64 + 0.5) * size + 4.0,
            escape(label)
        );
        let cx = x0 + (i as f64 + 0.5) * size;
        let cy = y0 + n as f64 * size + 14.0;
        let _ = writeln!(
            out,
            r##"<text x="{cx:.2}" y="{cy:.2}" text-anchor="end" font-family="sans-serif" font-size="11" fill="#222222" transform="rotate(-35 {cx:.2} {cy:.2})">{}</text>"##,
            escape(label)
        );
    }
    Ok(())
}

fn render_elbow(out: &mut String, spec: &PlotSpec, points: &[(usize, f64)], chosen: usize) -> Result<(), PlotError> {
    if points.is_empty() {
        return Err(PlotError::EmptyData("elbow curve without points".into()));
    }
    let kmin = points.iter().map(|p| p.0).min().expect("non-empty") as f64;
    let kmax = points.iter().map(|p| p.0).max().expect("non-empty") as f64;
    let wmax = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let frame = Frame::new(kmin, kmax, 0.0, wmax);
    axes(out, spec, &frame, false);
    for &(k, _) in points {
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11" fill="#444444">{k}</text>"##,
            frame.px(k as f64),
            HEIGHT - BOTTOM + 18.0
        );
    }
    let path: Vec<String> = points
        .iter()
        .map(|(k, w)| format!("{:.2},{:.2}", frame.px(*k as f64), frame.py(*w)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"##,
        path.join(" "),
        PALETTE[0]
    );
    for (k, w) in points {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}" data-k="{k}"/>"##,
            frame.px(*k as f64),
            frame.py(*w),
            PALETTE[0]
        );
    }
    if let Some((k, w)) = points.iter().find(|p| p.0 == chosen) {
        let (x, y) = (frame.px(*k as f64), frame.py(*w));
        let _ = writeln!(
            out,
            r##"<line class="chosen-k-guide" x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="{}" stroke-dasharray="4 4"/>"##,
            HEIGHT - BOTTOM,
            PALETTE[3]
        );
        let _ = writeln!(
            out,
            r##"<circle class="chosen-k" data-k="{k}" cx="{x:.2}" cy="{y:.2}" r="8" fill="none" stroke="{}" stroke-width="3"/>"##,
            PALETTE[3]
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" fill="{}">k = {k}</text>"##,
            x + 12.0,
            y - 12.0,
            PALETTE[3]
        );
    }
    Ok(())
}

fn render_scatter(
    out: &mut String,
    spec: &PlotSpec,
    points: &[[f64; 2]],
    assignments: &[usize],
    centroids: &[[f64; 2]],
) -> Result<(), PlotError> {
    if points.is_empty() || assignments.len() != points.len() {
        return Err(PlotError::EmptyData("scatter needs one assignment per point".into()));
    }
    let all = points.iter().chain(centroids);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let (dx, dy) = ((x1 - x0) * 0.05, (y1 - y0) * 0.05);
    let frame = Frame::new(x0 - dx, x1 + dx, y0 - dy, y1 + dy);
    axes(out, spec, &frame, true);
    for (p, a) in points.iter().zip(assignments) {
        let _ = writeln!(
            out,
            r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="{}" fill-opacity="0.8" data-cluster="{a}"/>"##,
            frame.px(p[0]),
            frame.py(p[1]),
            PALETTE[a % PALETTE.len()]
        );
    }
    for (c, p) in centroids.iter().enumerate() {
        let (x, y) = (frame.px(p[0]), frame.py(p[1]));
        let _ = writeln!(
            out,
            r##"<path class="centroid" data-cluster="{c}" d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="#000000" stroke-width="3"/>"##,
            x - 7.0,
            y - 7.0,
            x + 7.0,
            y + 7.0,
            x - 7.0,
            y + 7.0,
            x + 7.0,
            y - 7.0
        );
    }
    legend(out, centroids.len().max(assignments.iter().max().map_or(0, |m| m + 1)));
    Ok(())
}

fn legend(out: &mut String, clusters: usize) {
    for c in 0..clusters.min(PALETTE.len()) {
        let y = TOP + 4.0 + c as f64 * 16.0;
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{y:.2}" width="10" height="10" fill="{}"/>"##,
            WIDTH - RIGHT - 80.0,
            PALETTE[c]
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="#222222">cluster {}</text>"##,
            WIDTH - RIGHT - 64.0,
            y + 9.0,
            c + 1
        );
    }
}

fn render_centroid_bars(
    out: &mut String,
    spec: &PlotSpec,
    features: &[String],
    means: &[Vec<f64>],
    stds: &[Vec<f64>],
) -> Result<(), PlotError> {
    let f = features.len();
    if f == 0 || means.is_empty() || means.iter().chain(stds).any(|row| row.len() != f) || stds.len() != means.len() {
        return Err(PlotError::EmptyData(
            "centroid bars need one mean and std per feature".into(),
        ));
    }
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 0.0;
    for (m, s) in means.iter().zip(stds) {
        for (a, b) in m.iter().zip(s) {
            lo = lo.min(a - b);
            hi = hi.max(a + b);
        }
    }
    let frame = Frame::new(0.0, f as f64, lo, hi);
    axes(out, spec, &frame, false);
    let zero = frame.py(0.0);
    let _ = writeln!(
        out,
        r##"<line x1="{LEFT:.2}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#999999"/>"##,
        WIDTH - RIGHT
    );
    let k = means.len() as f64;
    let group = (WIDTH - LEFT - RIGHT) / f as f64;
    let bar = group * 0.8 / k;
    for j in 0..f {
        let gx = LEFT + j as f64 * group + group * 0.1;
        for (c, (m, s)) in means.iter().zip(stds).enumerate() {
            let x = gx + c as f64 * bar;
            let top = frame.py(m[j].max(0.0));
            let bottom = frame.py(m[j].min(0.0));
            let _ = writeln!(
                out,
                r##"<rect class="bar" x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}" data-cluster="{c}" data-feature="{}"/>"##,
                bar * 0.9,
                bottom - top,
                PALETTE[c % PALETTE.len()],
                escape(&features[j])
            );
            let cx = x + bar * 0.45;
            let _ = writeln!(
                out,
                r##"<line class="error" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#000000"/>"##,
                frame.py(m[j] - s[j]),
                frame.py(m[j] + s[j])
            );
        }
        let lx = gx + group * 0.4;
        let ly = HEIGHT - BOTTOM + 16.0;
        let _ = writeln!(
            out,
            r##"<text x="{lx:.2}" y="{ly:.2}" text-anchor="end" font-family="sans-serif" font-size="11" fill="#222222" transform="rotate(-25 {lx:.2} {ly:.2})">{}</text>"##,
            escape(&features[j])
        );
    }
    legend(out, means.len());
    Ok(())
}

/// Renders a plot as a standalone SVG document. Identical specs give
/// identical bytes.
pub fn render_plot(spec: &PlotSpec) -> Result<String, PlotError> {
    let mut out = String::new();
    header(&mut out, spec);
    match &spec.data {
        PlotData::Histogram { values, bins } => render_histogram(&mut out, spec, values, *bins)?,
        PlotData::Heatmap { labels, r } => render_heatmap(&mut out, labels, r)?,
        PlotData::ElbowCurve { points, chosen_k } => render_elbow(&mut out, spec, points, *chosen_k)?,
        PlotData::ClusterScatter2D {
            points,
            assignments,
            centroids,
            ..
        } => render_scatter(&mut out, spec, points, assignments, centroids)?,
        PlotData::CentroidBars { features, means, stds } => {
            render_centroid_bars(&mut out, spec, features, means, stds)?
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
