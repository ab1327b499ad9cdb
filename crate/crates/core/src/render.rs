//! SVG snapshots of episodes and simple line charts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{Bounds, Circle, Vec2};
use crate::reward::EpisodeMetrics;

/// Everything needed to redraw an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecording {
    pub seed: u64,
    pub policy: String,
    pub layout_id: String,
    pub bounds: Bounds,
    pub landmarks: Vec<Circle>,
    pub goals: Vec<Vec2>,
    pub radii: Vec<f64>,
    pub goal_radii: Vec<f64>,
    /// `frames[0]` holds the start positions, `frames[t]` those after step `t`.
    pub frames: Vec<Vec<Vec2>>,
    /// Planned paths per agent, when the policy has them.
    pub paths: Vec<Option<Vec<Vec2>>>,
    pub metrics: Option<EpisodeMetrics>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

const CANVAS: f64 = 640.0;

struct Frame {
    bounds: Bounds,
    scale: f64,
}

impl Frame {
    fn new(bounds: Bounds) -> Self {
        let span = bounds.width().max(bounds.height()).max(1e-9);
        Self {
            bounds,
            scale: CANVAS / span,
        }
    }

    fn x(&self, x: f64) -> f64 {
        (x - self.bounds.min.x) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        (self.bounds.max.y - y) * self.scale
    }

    fn size(&self) -> (f64, f64) {
        (self.bounds.width() * self.scale, self.bounds.height() * self.scale)
    }
}

/// Snapshot of `frame`: one `<circle>` per landmark, goal and agent, plus
/// planned paths as polylines when `show_paths` is set.
pub fn render_snapshot(rec: &EpisodeRecording, frame: usize, show_paths: bool) -> String {
    let f = Frame::new(rec.bounds);
    let (w, h) = f.size();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.3} {h:.3}">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{w:.3}" height="{h:.3}" fill="#ffffff" stroke="#000000"/>"##);
    for l in &rec.landmarks {
        let _ = writeln!(
            s,
            r##"<circle class="landmark" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="#555555"/>"##,
            f.x(l.center.x),
            f.y(l.center.y),
            l.radius * f.scale
        );
    }
    if show_paths {
        for (i, p) in rec.paths.iter().enumerate() {
            let Some(p) = p else { continue };
            let pts: Vec<String> = p
                .iter()
                .map(|v| format!("{:.3},{:.3}", f.x(v.x), f.y(v.y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="path" points="{}" fill="none" stroke="{}" stroke-dasharray="4 3"/>"#,
                pts.join(" "),
                PALETTE[i % PALETTE.len()]
            );
        }
    }
    for (i, g) in rec.goals.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<circle class="goal" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="none" stroke="{}" stroke-width="2"/>"#,
            f.x(g.x),
            f.y(g.y),
            rec.goal_radii[i] * f.scale,
            PALETTE[i % PALETTE.len()]
        );
    }
    let positions = &rec.frames[frame.min(rec.frames.len() - 1)];
    for (i, a) in positions.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<circle class="agent" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="{}"/>"#,
            f.x(a.x),
            f.y(a.y),
            rec.radii[i] * f.scale,
            PALETTE[i % PALETTE.len()]
        );
    }
    s.push_str("</svg>\n");
    s
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart with axes, min/max tick labels and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#);
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r##"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="#000000"/><line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="#000000"/>"##,
        h - m,
        w - m,
        h - m,
        h - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, w / 2.0, h - 15.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (v, anchor, x, y) in [
        (x0, "start", m, h - m + 16.0),
        (x1, "end", w - m, h - m + 16.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="10">{v:.3}</text>"#);
    }
    for (v, y) in [(y0, h - m), (y1, m)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end" font-size="10">{v:.3}</text>"#, m - 4.0);
    }
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
        let ly = m + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-size="11" fill="{color}">{}</text>"#,
            w - m - 120.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Parses `step,value` CSV lines (a header line is skipped) into a series,
/// for externally produced learning curves.
pub fn parse_series_csv(label: &str, text: &str) -> Result<Series, String> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(',').map(|c| c.trim().parse::<f64>());
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => points.push((x, y)),
            _ if i == 0 => continue,
            _ => return Err(format!("line {}: expected `step,value`", i + 1)),
        }
    }
    Ok(Series {
        label: label.to_string(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_circle_count() {
        let rec = EpisodeRecording {
            seed: 0,
            policy: "zero".into(),
            layout_id: "x".into(),
            bounds: Bounds::new(Vec2::ZERO, Vec2::new(2.0, 1.0)),
            landmarks: vec![Circle::new(Vec2::new(1.0, 0.5), 0.2)],
            goals: vec![Vec2::new(0.2, 0.2), Vec2::new(1.8, 0.8)],
            radii: vec![0.1, 0.1],
            goal_radii: vec![0.1, 0.1],
            frames: vec![vec![Vec2::new(1.8, 0.2), Vec2::new(0.2, 0.8)]],
            paths: vec![None, Some(vec![Vec2::ZERO, Vec2::new(1.0, 1.0)])],
            metrics: None,
        };
        let svg = render_snapshot(&rec, 0, true);
        assert_eq!(svg.matches("<circle").count(), 5);
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn series_csv() {
        let s = parse_series_csv("a", "step,value\n0,1\n10,2\n").unwrap();
        assert_eq!(s.points, vec![(0.0, 1.0), (10.0, 2.0)]);
        assert!(parse_series_csv("a", "0,1\nx\n").is_err());
    }
}
