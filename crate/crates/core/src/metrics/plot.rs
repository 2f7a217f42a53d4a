use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::{a12, mean, scott_knott, summarize, Group};
use super::{join_values, mean_std_cell, MetricError, TrialSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Box,
    Violin,
    Scatter,
    Trajectory,
    Sk,
    A12,
}

impl ReportKind {
    pub const ALL: [ReportKind; 6] =
        [ReportKind::Box, ReportKind::Violin, ReportKind::Scatter, ReportKind::Trajectory, ReportKind::Sk, ReportKind::A12];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Box => "box",
            ReportKind::Violin => "violin",
            ReportKind::Scatter => "scatter",
            ReportKind::Trajectory => "trajectory",
            ReportKind::Sk => "sk",
            ReportKind::A12 => "a12",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.svg", self.as_str())
    }
}

impl FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown report kind `{s}` (expected box, violin, scatter, trajectory, sk or a12)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Significance level of the Scott-Knott plot.
    pub alpha: f64,
    /// Spread points of one group horizontally instead of stacking them.
    pub no_overlap: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { alpha: 0.05, no_overlap: true }
    }
}

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const PANEL_TOP: f64 = 40.0;
const PANEL_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"];

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && c != '\t' && c != '\n' && c != '\r' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

/// Series grouped by metric, trials in first-seen order.
fn by_metric(series: &[TrialSeries]) -> Vec<(String, Vec<&TrialSeries>)> {
    let mut metrics: Vec<(String, Vec<&TrialSeries>)> = Vec::new();
    for s in series {
        match metrics.iter_mut().find(|(m, _)| *m == s.metric_name) {
            Some((_, list)) => list.push(s),
            None => metrics.push((s.metric_name.clone(), vec![s])),
        }
    }
    metrics
}

struct Panel {
    top: f64,
    lo: f64,
    hi: f64,
    groups: usize,
}

impl Panel {
    fn plot_height(&self) -> f64 {
        PANEL_HEIGHT - PANEL_TOP - PANEL_BOTTOM
    }

    fn y(&self, v: f64) -> f64 {
        let h = self.plot_height();
        self.top + PANEL_TOP + h - (v - self.lo) / (self.hi - self.lo) * h
    }

    fn slot(&self) -> f64 {
        (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / self.groups.max(1) as f64
    }

    fn x(&self, group: usize) -> f64 {
        MARGIN_LEFT + self.slot() * (group as f64 + 0.5)
    }
}

fn value_range<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { (hi - lo) * 0.05 } else { lo.abs().max(1.0) * 0.05 };
    (lo - pad, hi + pad)
}

struct Svg {
    body: String,
    height: f64,
}

impl Svg {
    fn new(panels: usize) -> Self {
        Svg { body: String::new(), height: PANEL_HEIGHT * panels.max(1) as f64 }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="0.6" stroke="black"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
    }

    fn circle(&mut self, x: f64, y: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{fill}"/>"#);
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{}</text>"#,
            escape(text)
        );
    }

    fn path(&mut self, points: &[(f64, f64)], fill: &str, closed: bool) {
        let mut d = String::new();
        for (i, (x, y)) in points.iter().enumerate() {
            let _ = write!(d, "{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" });
        }
        if closed {
            d.push('Z');
        }
        let fill_attr = if closed { format!(r#"fill="{fill}" fill-opacity="0.6""#) } else { r#"fill="none""#.into() };
        let stroke = if closed { "black" } else { fill };
        let _ = writeln!(self.body, r#"<path d="{}" {fill_attr} stroke="{stroke}"/>"#, d.trim_end());
    }

    fn axes(&mut self, panel: &Panel, title: &str, labels: &[&str]) {
        let bottom = panel.y(panel.lo);
        let top = panel.y(panel.hi);
        self.text(WIDTH / 2.0, panel.top + 20.0, "middle", title);
        self.line(MARGIN_LEFT, top, MARGIN_LEFT, bottom, "black");
        self.line(MARGIN_LEFT, bottom, WIDTH - MARGIN_RIGHT, bottom, "black");
        for i in 0..=4 {
            let v = panel.lo + (panel.hi - panel.lo) * i as f64 / 4.0;
            let y = panel.y(v);
            self.line(MARGIN_LEFT - 4.0, y, MARGIN_LEFT, y, "black");
            self.text(MARGIN_LEFT - 6.0, y + 4.0, "end", &format!("{v:.2}"));
        }
        for (i, label) in labels.iter().enumerate() {
            self.text(panel.x(i), bottom + 16.0, "middle", label);
        }
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{h}\" viewBox=\"0 0 {WIDTH} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            h = self.height
        )
    }
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Horizontal offset of point `j` of `n` so points of one group do not overlap.
fn spread(j: usize, n: usize, slot: f64, no_overlap: bool) -> f64 {
    if !no_overlap || n < 2 {
        return 0.0;
    }
    let width = slot * 0.5;
    -width / 2.0 + width * j as f64 / (n - 1) as f64
}

fn gaussian_kde(values: &[f64], at: f64, bandwidth: f64) -> f64 {
    let norm = 1.0 / (values.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    values.iter().map(|v| (-0.5 * ((at - v) / bandwidth).powi(2)).exp()).sum::<f64>() * norm
}

fn render_kind(kind: ReportKind, metrics: &[(String, Vec<&TrialSeries>)], opts: &RenderOptions) -> String {
    let mut svg = Svg::new(metrics.len());
    for (p, (metric, list)) in metrics.iter().enumerate() {
        let labels: Vec<&str> = list.iter().map(|s| s.trial_name.as_str()).collect();
        let (lo, hi) = match kind {
            ReportKind::A12 => (0.0, 1.0),
            _ => value_range(list.iter().flat_map(|s| s.values.iter())),
        };
        let panel = Panel { top: p as f64 * PANEL_HEIGHT, lo, hi, groups: list.len() };
        match kind {
            ReportKind::Box => {
                svg.axes(&panel, &format!("{metric}: box plot"), &labels);
                for (i, s) in list.iter().enumerate() {
                    let st = summarize(&s.values).expect("snapshot series are nonempty");
                    let (x, w) = (panel.x(i), panel.slot() * 0.4);
                    svg.line(x, panel.y(st.min), x, panel.y(st.max), "black");
                    svg.rect(x - w / 2.0, panel.y(st.q3), w, panel.y(st.q1) - panel.y(st.q3), color(i));
                    svg.line(x - w / 2.0, panel.y(st.median), x + w / 2.0, panel.y(st.median), "black");
                }
            }
            ReportKind::Violin => {
                svg.axes(&panel, &format!("{metric}: violin plot"), &labels);
                for (i, s) in list.iter().enumerate() {
                    let st = summarize(&s.values).expect("nonempty");
                    let bandwidth = {
                        let h = 1.06 * st.std * (s.values.len() as f64).powf(-0.2);
                        if h > 0.0 { h } else { (hi - lo) / 20.0 }
                    };
                    let steps = 32;
                    let samples: Vec<(f64, f64)> = (0..=steps)
                        .map(|k| {
                            let v = st.min + (st.max - st.min) * k as f64 / steps as f64;
                            (v, gaussian_kde(&s.values, v, bandwidth))
                        })
                        .collect();
                    let peak = samples.iter().map(|(_, d)| *d).fold(0.0, f64::max);
                    let half = panel.slot() * 0.4;
                    let scale = if peak > 0.0 { half / peak } else { 0.0 };
                    let x = panel.x(i);
                    let mut outline: Vec<(f64, f64)> =
                        samples.iter().map(|(v, d)| (x + d * scale, panel.y(*v))).collect();
                    outline.extend(samples.iter().rev().map(|(v, d)| (x - d * scale, panel.y(*v))));
                    svg.path(&outline, color(i), true);
                    svg.line(x - 6.0, panel.y(st.median), x + 6.0, panel.y(st.median), "black");
                }
            }
            ReportKind::Scatter => {
                svg.axes(&panel, &format!("{metric}: scatter plot"), &labels);
                for (i, s) in list.iter().enumerate() {
                    for (j, v) in s.values.iter().enumerate() {
                        let dx = spread(j, s.values.len(), panel.slot(), opts.no_overlap);
                        svg.circle(panel.x(i) + dx, panel.y(*v), color(i));
                    }
                }
            }
            ReportKind::Trajectory => {
                let steps = list.iter().map(|s| s.values.len()).max().unwrap_or(1);
                let step_panel = Panel { groups: steps, ..panel };
                let ticks: Vec<String> = (1..=steps).map(|k| k.to_string()).collect();
                let tick_refs: Vec<&str> = ticks.iter().map(String::as_str).collect();
                svg.axes(&step_panel, &format!("{metric}: trajectory"), &tick_refs);
                for (i, s) in list.iter().enumerate() {
                    let points: Vec<(f64, f64)> =
                        s.values.iter().enumerate().map(|(k, v)| (step_panel.x(k), step_panel.y(*v))).collect();
                    svg.path(&points, color(i), false);
                    for (x, y) in &points {
                        svg.circle(*x, *y, color(i));
                    }
                    svg.text(WIDTH - MARGIN_RIGHT, step_panel.top + PANEL_TOP + 12.0 * i as f64, "end", &s.trial_name);
                }
            }
            ReportKind::Sk => {
                let groups: Vec<Group> = list.iter().map(|s| Group::new(s.trial_name.clone(), s.values.clone())).collect();
                let clusters = scott_knott(&groups, opts.alpha).expect("snapshot series are nonempty");
                let rank_of = |name: &str| clusters.iter().position(|c| c.iter().any(|n| n == name)).unwrap_or(0);
                let (lo, hi) = value_range(list.iter().flat_map(|s| s.values.iter()).chain([0.0].iter()));
                let panel = Panel { lo, hi, ..panel };
                svg.axes(&panel, &format!("{metric}: Scott-Knott ranks (alpha {})", opts.alpha), &labels);
                for (i, s) in list.iter().enumerate() {
                    let m = mean(&s.values);
                    let rank = rank_of(&s.trial_name);
                    let w = panel.slot() * 0.5;
                    let (top, base) = (panel.y(m.max(0.0)), panel.y(m.min(0.0)));
                    svg.rect(panel.x(i) - w / 2.0, top, w, base - top, color(rank));
                    svg.text(panel.x(i), top - 4.0, "middle", &format!("rank {}", rank + 1));
                }
            }
            ReportKind::A12 => {
                let pairs: Vec<(usize, usize)> =
                    (0..list.len()).flat_map(|i| (0..list.len()).filter(move |&j| j != i).map(move |j| (i, j))).collect();
                let names: Vec<String> =
                    pairs.iter().map(|&(i, j)| format!("{} vs {}", list[i].trial_name, list[j].trial_name)).collect();
                let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
                let panel = Panel { groups: pairs.len().max(1), ..panel };
                svg.axes(&panel, &format!("{metric}: A12 effect size"), &name_refs);
                svg.line(MARGIN_LEFT, panel.y(0.5), WIDTH - MARGIN_RIGHT, panel.y(0.5), "#999999");
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    let value = a12(&list[i].values, &list[j].values).expect("nonempty");
                    let w = panel.slot() * 0.5;
                    svg.rect(panel.x(k) - w / 2.0, panel.y(value), w, panel.y(0.0) - panel.y(value), color(i));
                    svg.text(panel.x(k), panel.y(value) - 4.0, "middle", &format!("{value:.2}"));
                }
            }
        }
    }
    svg.finish()
}

fn summary_csv(series: &[TrialSeries]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "trial", "count", "mean", "std", "median", "iqr", "min", "max", "mean_std", "values"])?;
    for s in series {
        let st = summarize(&s.values).expect("snapshot series are nonempty");
        w.write_record([
            s.metric_name.clone(),
            s.trial_name.clone(),
            st.count.to_string(),
            st.mean.to_string(),
            st.std.to_string(),
            st.median.to_string(),
            st.iqr.to_string(),
            st.min.to_string(),
            st.max.to_string(),
            mean_std_cell(st.mean, st.std),
            join_values(&s.values),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// Write `summary.csv` and one SVG per requested kind into `dir`.
/// Returns the written paths, summary first.
pub fn render(
    series: &[TrialSeries],
    dir: &Path,
    kinds: &[ReportKind],
    opts: &RenderOptions,
) -> Result<Vec<PathBuf>, MetricError> {
    let series: Vec<TrialSeries> = series.iter().filter(|s| !s.values.is_empty()).cloned().collect();
    if series.is_empty() {
        return Err(MetricError::EmptySeries);
    }
    fs::create_dir_all(dir).map_err(|e| MetricError::io(dir, e))?;
    let metrics = by_metric(&series);
    let mut written = Vec::new();

    let summary = dir.join("summary.csv");
    let bytes = summary_csv(&series).map_err(|e| MetricError::Table { path: summary.clone(), message: e.to_string() })?;
    fs::write(&summary, bytes).map_err(|e| MetricError::io(&summary, e))?;
    written.push(summary);

    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    for kind in kinds {
        let path = dir.join(kind.file_name());
        fs::write(&path, render_kind(kind, &metrics, opts)).map_err(|e| MetricError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escape_handles_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn all_kinds_parse_as_xml() {
        let dir = tempfile::tempdir().unwrap();
        let series = vec![
            TrialSeries { trial_name: "lr<1>".into(), metric_name: "Acc".into(), values: vec![0.8, 0.82, 0.81] },
            TrialSeries { trial_name: "b&c".into(), metric_name: "Acc".into(), values: vec![0.7, 0.7] },
            TrialSeries { trial_name: "lr<1>".into(), metric_name: "F1".into(), values: vec![0.5] },
        ];
        let files = render(&series, dir.path(), &ReportKind::ALL, &RenderOptions::default()).unwrap();
        assert_eq!(files.len(), 7);
        for f in &files[1..] {
            let text = fs::read_to_string(f).unwrap();
            roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        }
    }
}
