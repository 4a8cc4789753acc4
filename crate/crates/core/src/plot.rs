//! Deterministic SVG charts: arc line plots, cluster-mean overlays and
//! dendrograms. Output depends only on the input data (fixed canvas, fixed
//! number formatting, no timestamps), so repeated runs are byte-identical.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::Linkage;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("plot has no data")]
    Empty,
    #[error("series `{0}` has no points")]
    EmptySeries(String),
    #[error("series `{0}` contains a non-finite coordinate")]
    NonFinite(String),
    #[error("{kind:?} plot needs {expected} data")]
    KindMismatch {
        kind: PlotKind,
        expected: &'static str,
    },
    #[error("{labels} leaf labels for a linkage over {n} items")]
    LabelCount { labels: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Arc,
    ClusterMean,
    Dendrogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// `(x, y)`; a `None` y breaks the line.
    pub points: Vec<(f64, Option<f64>)>,
    /// Drawn thick and dark; other series are drawn thin and light.
    pub emphasis: bool,
}

impl Series {
    pub fn from_values(name: impl Into<String>, values: &[Option<f64>], emphasis: bool) -> Self {
        Series {
            name: name.into(),
            points: values
                .iter()
                .enumerate()
                .map(|(i, &v)| (i as f64, v))
                .collect(),
            emphasis,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    Lines(Vec<Series>),
    Dendrogram {
        linkage: Linkage,
        labels: Vec<String>,
        /// Subtrees deeper than this many merge levels below the root are
        /// collapsed into a single leaf showing their size.
        max_depth: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub data: PlotData,
}

impl PlotSpec {
    /// Segment index on x, score on y.
    pub fn arc(title: impl Into<String>, values: &[Option<f64>]) -> Self {
        PlotSpec {
            kind: PlotKind::Arc,
            title: title.into(),
            x_label: "Narrative progression (segment)".into(),
            y_label: "Emotion score".into(),
            data: PlotData::Lines(vec![Series::from_values("arc", values, true)]),
        }
    }

    /// Member arcs drawn light with the cluster mean on top.
    pub fn cluster_mean(title: impl Into<String>, members: &[Vec<f64>], mean: &[f64]) -> Self {
        let mut series: Vec<Series> = members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let vals: Vec<Option<f64>> = m.iter().copied().map(Some).collect();
                Series::from_values(format!("member {i}"), &vals, false)
            })
            .collect();
        let mean: Vec<Option<f64>> = mean.iter().copied().map(Some).collect();
        series.push(Series::from_values("mean", &mean, true));
        PlotSpec {
            kind: PlotKind::ClusterMean,
            title: title.into(),
            x_label: "Narrative progression (resampled position)".into(),
            y_label: "Emotion score".into(),
            data: PlotData::Lines(series),
        }
    }

    pub fn dendrogram(
        title: impl Into<String>,
        linkage: Linkage,
        labels: Vec<String>,
        max_depth: Option<usize>,
    ) -> Self {
        PlotSpec {
            kind: PlotKind::Dendrogram,
            title: title.into(),
            x_label: "Documents".into(),
            y_label: "Ward distance".into(),
            data: PlotData::Dendrogram {
                linkage,
                labels,
                max_depth,
            },
        }
    }

    pub fn validate(&self) -> Result<(), PlotError> {
        match (&self.kind, &self.data) {
            (PlotKind::Arc | PlotKind::ClusterMean, PlotData::Lines(series)) => {
                if series.is_empty() {
                    return Err(PlotError::Empty);
                }
                for s in series {
                    if s.points.is_empty() {
                        return Err(PlotError::EmptySeries(s.name.clone()));
                    }
                    let finite = s
                        .points
                        .iter()
                        .all(|(x, y)| x.is_finite() && y.is_none_or(|y| y.is_finite()));
                    if !finite {
                        return Err(PlotError::NonFinite(s.name.clone()));
                    }
                }
                if series
                    .iter()
                    .all(|s| s.points.iter().all(|(_, y)| y.is_none()))
                {
                    return Err(PlotError::Empty);
                }
                Ok(())
            }
            (
                PlotKind::Dendrogram,
                PlotData::Dendrogram {
                    linkage, labels, ..
                },
            ) => {
                if labels.len() != linkage.n {
                    return Err(PlotError::LabelCount {
                        labels: labels.len(),
                        n: linkage.n,
                    });
                }
                if linkage.merges.is_empty() {
                    return Err(PlotError::Empty);
                }
                Ok(())
            }
            (kind, _) => Err(PlotError::KindMismatch {
                kind: *kind,
                expected: if *kind == PlotKind::Dendrogram {
                    "linkage"
                } else {
                    "line series"
                },
            }),
        }
    }

    pub fn render_svg(&self) -> Result<String, PlotError> {
        self.validate()?;
        let mut svg = Svg::new();
        svg.frame(&self.title);
        match &self.data {
            PlotData::Lines(series) => render_lines(&mut svg, series, &self.x_label, &self.y_label),
            PlotData::Dendrogram {
                linkage,
                labels,
                max_depth,
            } => render_dendrogram(
                &mut svg,
                linkage,
                labels,
                *max_depth,
                &self.x_label,
                &self.y_label,
            ),
        }
        Ok(svg.finish())
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Tick label text: short, fixed format.
fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

struct Svg {
    body: String,
}

impl Svg {
    fn new() -> Self {
        let mut body = String::new();
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
        );
        let _ = writeln!(
            body,
            r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
        );
        Svg { body }
    }

    fn frame(&mut self, title: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
    }

    fn axes(&mut self, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64), x_ticks: bool) {
        let (x0, y0) = (LEFT, HEIGHT - BOTTOM);
        let _ = writeln!(
            self.body,
            r##"<path d="M{x0:.2},{TOP:.2} L{x0:.2},{y0:.2} L{:.2},{y0:.2}" fill="none" stroke="#000000" stroke-width="1"/>"##,
            WIDTH - RIGHT
        );
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let yv = y.0 + (y.1 - y.0) * f;
            let py = y0 - f * (y0 - TOP);
            let _ = writeln!(
                self.body,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="#000000"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0,
                tick(yv)
            );
            if x_ticks {
                let xv = x.0 + (x.1 - x.0) * f;
                let px = x0 + f * (WIDTH - RIGHT - x0);
                let _ = writeln!(
                    self.body,
                    r##"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="#000000"/><text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
                    y0 + 5.0,
                    y0 + 18.0,
                    tick(xv)
                );
            }
        }
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            LEFT + (WIDTH - RIGHT - LEFT) / 2.0,
            HEIGHT - 12.0,
            escape(x_label)
        );
        let cy = TOP + (HEIGHT - BOTTOM - TOP) / 2.0;
        let _ = writeln!(
            self.body,
            r#"<text x="18" y="{cy:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {cy:.2})">{}</text>"#,
            escape(y_label)
        );
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 1e-12 {
            lo.abs() * 0.1
        } else {
            0.5
        };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn render_lines(svg: &mut Svg, series: &[Series], x_label: &str, y_label: &str) {
    let xr = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = range(
        series
            .iter()
            .flat_map(|s| s.points.iter().filter_map(|p| p.1)),
    );
    svg.axes(x_label, y_label, xr, yr, true);
    let px = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * (WIDTH - RIGHT - LEFT);
    let py = |y: f64| HEIGHT - BOTTOM - (y - yr.0) / (yr.1 - yr.0) * (HEIGHT - BOTTOM - TOP);
    // Emphasized series last so they sit on top.
    let ordered = series
        .iter()
        .filter(|s| !s.emphasis)
        .chain(series.iter().filter(|s| s.emphasis));
    for s in ordered {
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &s.points {
            match y {
                Some(y) => {
                    let _ = write!(
                        d,
                        "{}{:.2},{:.2} ",
                        if pen_down { "L" } else { "M" },
                        px(x),
                        py(y)
                    );
                    pen_down = true;
                }
                None => pen_down = false,
            }
        }
        let (stroke, width) = if s.emphasis {
            ("#1f4e9c", 2.0)
        } else {
            ("#b0b0b0", 0.8)
        };
        let _ = writeln!(
            svg.body,
            r#"<path d="{}" fill="none" stroke="{stroke}" stroke-width="{width}"><title>{}</title></path>"#,
            d.trim_end(),
            escape(&s.name)
        );
        // Isolated points have no segment to draw.
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let Some(y) = y else { continue };
            let prev = i > 0 && s.points[i - 1].1.is_some();
            let next = s.points.get(i + 1).is_some_and(|p| p.1.is_some());
            if !prev && !next {
                let _ = writeln!(
                    svg.body,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{stroke}"/>"#,
                    px(x),
                    py(y)
                );
            }
        }
    }
}

enum Node {
    Leaf { label: String },
    Inner { id: usize },
}

fn render_dendrogram(
    svg: &mut Svg,
    linkage: &Linkage,
    labels: &[String],
    max_depth: Option<usize>,
    x_label: &str,
    y_label: &str,
) {
    let n = linkage.n;
    let root = 2 * n - 2;
    let top = linkage.merges.iter().fold(0.0f64, |m, g| m.max(g.height));
    let yr = (0.0, if top > 0.0 { top } else { 1.0 });

    // Visible leaves in left-to-right order, found iteratively.
    let mut leaves: Vec<(usize, Node)> = Vec::new();
    let mut stack = vec![(root, 0usize)];
    while let Some((id, depth)) = stack.pop() {
        if id < n {
            leaves.push((
                id,
                Node::Leaf {
                    label: labels[id].clone(),
                },
            ));
        } else if max_depth.is_some_and(|d| depth >= d) {
            leaves.push((id, Node::Inner { id }));
        } else {
            let m = &linkage.merges[id - n];
            stack.push((m.right, depth + 1));
            stack.push((m.left, depth + 1));
        }
    }
    svg.axes(x_label, y_label, (0.0, 1.0), yr, false);
    let width = WIDTH - RIGHT - LEFT;
    let slot = width / leaves.len() as f64;
    let py = |h: f64| HEIGHT - BOTTOM - (h - yr.0) / (yr.1 - yr.0) * (HEIGHT - BOTTOM - TOP);

    let mut pos: std::collections::HashMap<usize, (f64, f64)> = std::collections::HashMap::new();
    let font = (slot * 0.9).clamp(4.0, 11.0);
    for (i, (id, node)) in leaves.iter().enumerate() {
        let x = LEFT + slot * (i as f64 + 0.5);
        pos.insert(*id, (x, 0.0));
        let text = match node {
            Node::Leaf { label } => label.clone(),
            Node::Inner { id } => format!("({})", linkage.merges[id - n].size),
        };
        let ly = HEIGHT - BOTTOM + 8.0;
        let _ = writeln!(
            svg.body,
            r#"<text x="{x:.2}" y="{ly:.2}" font-size="{font:.1}" text-anchor="end" transform="rotate(-60 {x:.2} {ly:.2})">{}</text>"#,
            escape(&text)
        );
    }
    // Merges in creation order: children are always placed before parents.
    for (s, m) in linkage.merges.iter().enumerate() {
        let id = n + s;
        let (Some(&(xl, hl)), Some(&(xr, hr))) = (pos.get(&m.left), pos.get(&m.right)) else {
            continue;
        };
        let h = m.height;
        let _ = writeln!(
            svg.body,
            r##"<path d="M{xl:.2},{:.2} L{xl:.2},{:.2} L{xr:.2},{:.2} L{xr:.2},{:.2}" fill="none" stroke="#1f4e9c" stroke-width="1"/>"##,
            py(hl),
            py(h),
            py(h),
            py(hr)
        );
        pos.insert(id, ((xl + xr) / 2.0, h));
    }
}
