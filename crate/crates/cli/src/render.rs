//! Minimal SVG output for score scatters and accuracy/criterion frontiers.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use crate::commands::FrontierRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

/// Fill colors for the cells `2y + a`.
const CELL_COLORS: [&str; 4] = ["#1f77b4", "#aec7e8", "#d62728", "#ff9896"];
const CELL_LABELS: [&str; 4] = ["y=0 a=0", "y=0 a=1", "y=1 a=0", "y=1 a=1"];

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FrontierPoint {
    pub delta: f64,
    pub val_accuracy: f64,
    pub val_cc: f64,
    #[serde(default)]
    pub test_accuracy: Option<f64>,
    #[serde(default)]
    pub test_cc: Option<f64>,
}

impl From<&FrontierRow> for FrontierPoint {
    fn from(r: &FrontierRow) -> Self {
        Self {
            delta: r.delta,
            val_accuracy: r.val_accuracy,
            val_cc: r.val_cc,
            test_accuracy: r.test_accuracy,
            test_cc: r.test_cc,
        }
    }
}

pub fn read_frontier(path: &Path) -> Result<Vec<FrontierPoint>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<FrontierPoint>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// Linear map from a data range onto a pixel range, padded so points never sit on the frame.
#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, px_lo: f64, px_hi: f64) -> Self {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
        Self {
            lo: lo - pad,
            hi: hi + pad,
            px_lo,
            px_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn ticks(out: &mut String, x: &Axis, y: &Axis) {
    for j in 0..=4 {
        let t = j as f64 / 4.0;
        let xv = x.lo + t * (x.hi - x.lo);
        let yv = y.lo + t * (y.hi - y.lo);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
            x.map(xv),
            HEIGHT - MARGIN + 14.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
            MARGIN - 4.0,
            y.map(yv) + 3.0,
            fmt_tick(yv)
        );
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of `(s_1, s_2)` with the rule boundary `w_1 s_1 + w_2 s_2 = 1`.
///
/// `cells` holds the class `2y + a` of each point. An empty point set gives an empty frame.
pub fn scatter_svg(points: &[[f64; 2]], cells: Option<&[usize]>, rule: Option<&[f64]>) -> Result<String> {
    if let Some(c) = cells {
        if c.len() != points.len() {
            bail!("{} cell labels for {} points", c.len(), points.len());
        }
        if let Some(bad) = c.iter().find(|&&c| c > 3) {
            bail!("cell index {bad} is outside 0..4");
        }
    }
    if let Some(w) = rule {
        if w.len() != 2 {
            bail!("scatter needs a two-weight rule, got {}", w.len());
        }
    }
    let x = Axis::new(points.iter().map(|p| p[0]), MARGIN, WIDTH - MARGIN);
    let y = Axis::new(points.iter().map(|p| p[1]), HEIGHT - MARGIN, MARGIN);
    let mut out = String::new();
    header(&mut out, "bias scores", "s_1", "s_2");
    ticks(&mut out, &x, &y);

    let _ = writeln!(out, r#"<g class="points">"#);
    for (i, p) in points.iter().enumerate() {
        if !(p[0].is_finite() && p[1].is_finite()) {
            continue;
        }
        let color = cells.map_or("#555555", |c| CELL_COLORS[c[i]]);
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}" fill-opacity="0.7"/>"#,
            x.map(p[0]),
            y.map(p[1])
        );
    }
    let _ = writeln!(out, "</g>");

    if let Some(w) = rule {
        if let Some(((x0, y0), (x1, y1))) = clip_line(w, &x, &y) {
            let _ = writeln!(
                out,
                r##"<line class="rule" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#000" stroke-width="1.5" stroke-dasharray="6 3"/>"##,
                x.map(x0),
                y.map(y0),
                x.map(x1),
                y.map(y1)
            );
        }
    }

    if cells.is_some() {
        for (c, (color, label)) in CELL_COLORS.iter().zip(CELL_LABELS).enumerate() {
            let ly = MARGIN + 14.0 + 16.0 * c as f64;
            let lx = WIDTH - MARGIN - 80.0;
            let _ = writeln!(out, r#"<circle cx="{lx}" cy="{}" r="4" fill="{color}"/>"#, ly - 4.0);
            let _ = writeln!(out, r#"<text x="{}" y="{ly}">{label}</text>"#, lx + 8.0);
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Segment of `w·s = 1` inside the plotted box, if any.
fn clip_line(w: &[f64], x: &Axis, y: &Axis) -> Option<((f64, f64), (f64, f64))> {
    let (a, b) = (w[0], w[1]);
    let mut hits: Vec<(f64, f64)> = Vec::new();
    if b != 0.0 {
        for xv in [x.lo, x.hi] {
            let yv = (1.0 - a * xv) / b;
            if yv >= y.lo && yv <= y.hi {
                hits.push((xv, yv));
            }
        }
    }
    if a != 0.0 {
        for yv in [y.lo, y.hi] {
            let xv = (1.0 - b * yv) / a;
            if xv >= x.lo && xv <= x.hi {
                hits.push((xv, yv));
            }
        }
    }
    hits.dedup_by(|p, q| (p.0 - q.0).abs() < 1e-12 && (p.1 - q.1).abs() < 1e-12);
    match hits.as_slice() {
        [p, q, ..] => Some((*p, *q)),
        _ => None,
    }
}

/// Criterion on the horizontal axis, accuracy on the vertical, one marker per δ.
pub fn frontier_svg(points: &[FrontierPoint]) -> Result<String> {
    if points.is_empty() {
        bail!("frontier has no points");
    }
    let mut pts: Vec<&FrontierPoint> = points.iter().collect();
    pts.sort_by(|p, q| p.val_cc.total_cmp(&q.val_cc));
    let has_test = pts.iter().all(|p| p.test_accuracy.is_some() && p.test_cc.is_some());

    let cc_values = pts
        .iter()
        .map(|p| p.val_cc)
        .chain(pts.iter().filter_map(|p| p.test_cc));
    let acc_values = pts
        .iter()
        .map(|p| p.val_accuracy)
        .chain(pts.iter().filter_map(|p| p.test_accuracy));
    let x = Axis::new(cc_values, MARGIN, WIDTH - MARGIN);
    let y = Axis::new(acc_values, HEIGHT - MARGIN, MARGIN);

    let mut out = String::new();
    header(&mut out, "accuracy against criterion", "criterion", "accuracy");
    ticks(&mut out, &x, &y);

    let mut series = vec![("validation", "#1f77b4", pts.iter().map(|p| (p.val_cc, p.val_accuracy)).collect::<Vec<_>>())];
    if has_test {
        let mut test: Vec<(f64, f64)> = pts
            .iter()
            .map(|p| (p.test_cc.unwrap_or_default(), p.test_accuracy.unwrap_or_default()))
            .collect();
        test.sort_by(|p, q| p.0.total_cmp(&q.0));
        series.push(("test", "#d62728", test));
    }
    for (name, color, line) in &series {
        let coords: Vec<String> = line
            .iter()
            .map(|(c, a)| format!("{:.2},{:.2}", x.map(*c), y.map(*a)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="{name}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        for (c, a) in line {
            let _ = writeln!(
                out,
                r#"<circle class="{name}" cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                x.map(*c),
                y.map(*a)
            );
        }
    }
    for p in &pts {
        let label = if p.delta.is_infinite() {
            "inf".to_string()
        } else {
            format!("{}", p.delta)
        };
        let _ = writeln!(
            out,
            r#"<text class="delta" x="{:.2}" y="{:.2}" font-size="10">δ={label}</text>"#,
            x.map(p.val_cc) + 5.0,
            y.map(p.val_accuracy) - 5.0
        );
    }
    for (j, (name, color, _)) in series.iter().enumerate() {
        let ly = MARGIN + 14.0 + 16.0 * j as f64;
        let lx = WIDTH - MARGIN - 90.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 14.0,
            ly - 4.0
        );
        let _ = writeln!(out, r#"<text x="{}" y="{ly}">{name}</text>"#, lx + 18.0);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(svg: &str, needle: &str) -> usize {
        svg.matches(needle).count()
    }

    #[test]
    fn empty_scatter_is_an_empty_frame() {
        let svg = scatter_svg(&[], None, None).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(count(&svg, "<circle"), 0);
    }

    #[test]
    fn scatter_draws_one_marker_per_point_and_the_rule() {
        let pts = [[0.0, 0.0], [1.0, 2.0], [2.0, -1.0]];
        let svg = scatter_svg(&pts, Some(&[0, 1, 3]), Some(&[1.0, 0.0])).unwrap();
        // three points plus four legend markers
        assert_eq!(count(&svg, "<circle"), 7);
        assert_eq!(count(&svg, r#"class="rule""#), 1);
        assert!(svg.contains(CELL_COLORS[3]));
    }

    #[test]
    fn rule_outside_the_box_is_not_drawn() {
        let pts = [[0.0, 0.0], [1.0, 1.0]];
        let svg = scatter_svg(&pts, None, Some(&[0.01, 0.01])).unwrap();
        assert_eq!(count(&svg, r#"class="rule""#), 0);
    }

    #[test]
    fn scatter_rejects_mismatched_cells() {
        assert!(scatter_svg(&[[0.0, 0.0]], Some(&[0, 1]), None).is_err());
        assert!(scatter_svg(&[[0.0, 0.0]], Some(&[4]), None).is_err());
        assert!(scatter_svg(&[[0.0, 0.0]], None, Some(&[1.0])).is_err());
    }

    #[test]
    fn frontier_has_a_marker_and_label_per_delta() {
        let pts: Vec<FrontierPoint> = [(0.01, 0.7, 0.01), (0.05, 0.75, 0.05), (f64::INFINITY, 0.8, 0.3)]
            .iter()
            .map(|&(delta, val_accuracy, val_cc)| FrontierPoint {
                delta,
                val_accuracy,
                val_cc,
                test_accuracy: None,
                test_cc: None,
            })
            .collect();
        let svg = frontier_svg(&pts).unwrap();
        assert_eq!(count(&svg, r#"<circle class="validation""#), 3);
        assert_eq!(count(&svg, r#"<polyline"#), 1);
        assert_eq!(count(&svg, r#"class="delta""#), 3);
        assert!(svg.contains("δ=inf"));
    }

    #[test]
    fn frontier_with_test_adds_a_second_series() {
        let pts = vec![FrontierPoint {
            delta: 0.1,
            val_accuracy: 0.7,
            val_cc: 0.1,
            test_accuracy: Some(0.69),
            test_cc: Some(0.12),
        }];
        let svg = frontier_svg(&pts).unwrap();
        assert_eq!(count(&svg, "<polyline"), 2);
    }

    #[test]
    fn empty_frontier_is_an_error() {
        assert!(frontier_svg(&[]).is_err());
    }
}
