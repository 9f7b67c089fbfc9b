//! Minimal SVG output for training curves and episode traces.

use std::fmt::Write;

use anyhow::Result;
use rltraj::campaign::EpisodeTrace;

use crate::commands::PathPoint;

const CELL: f64 = 28.0;
const MARGIN: f64 = 48.0;
const PLOT_W: f64 = 720.0;
const PLOT_H: f64 = 300.0;

/// Occupancy and speed limits over absolute layers, composed from the scene
/// each step planned against. Layer 0 is the start position and has no row.
#[derive(Debug, Clone)]
pub struct RoadGrid {
    lanes: usize,
    occupied: Vec<Vec<bool>>,
    limits: Vec<Vec<f64>>,
}

impl RoadGrid {
    pub fn from_trace(trace: &EpisodeTrace) -> Result<Self> {
        let lanes = trace.initial_scene()?.lanes();
        let mut grid = Self {
            lanes,
            occupied: vec![vec![false; lanes]],
            limits: vec![vec![0.0; lanes]],
        };
        let mut before = 0;
        for step in &trace.steps {
            let scene: rltraj::env::Scene = step.scene.parse()?;
            for r in 0..scene.depth() {
                let layer = before + r + 1;
                if grid.occupied.len() <= layer {
                    grid.occupied.resize(layer + 1, vec![false; lanes]);
                    grid.limits.resize(layer + 1, vec![0.0; lanes]);
                }
                grid.occupied[layer] = scene.row_occupancy(r).to_vec();
                grid.limits[layer] = scene.row_speed_limits(r).to_vec();
            }
            before = step.progress;
        }
        Ok(grid)
    }

    pub fn layers(&self) -> usize {
        self.occupied.len()
    }
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Blue for slow through red for fast, `t` in [0, 1].
fn speed_color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let r = (40.0 + 215.0 * t) as u8;
    let b = (255.0 - 215.0 * t) as u8;
    format!("rgb({r},60,{b})")
}

/// Linear map from `[lo, hi]` onto `[a, b]`; a degenerate range maps to the midpoint.
fn scale(x: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (x - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], stroke: &str, width: f64) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{stroke}" stroke-width="{width}" points="{}"/>"#,
        coords.join(" ")
    );
}

fn axes(out: &mut String, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64)) {
    let (x0, y0, x1, y1) = (MARGIN, MARGIN + PLOT_H, MARGIN + PLOT_W, MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
    );
    for (v, y) in [(y_range.0, y0), (y_range.1, y1)] {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{v:.3}</text>"#, x0 - 4.0, y + 4.0);
    }
    for (v, x) in [(x_range.0, x0), (x_range.1, x1)] {
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle">{v:.0}</text>"#, y0 + 14.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        y0 + 30.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

/// Episode rewards as faint points with the rolling median on top.
pub fn training_curve(rewards: &[f64], median: &[f64], window: usize) -> String {
    let mut out = String::new();
    header(&mut out, PLOT_W + 2.0 * MARGIN, PLOT_H + 2.0 * MARGIN);
    let finite = rewards.iter().chain(median).copied().filter(|x| x.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (0.0, 1.0) };
    let n = rewards.len().max(2) as f64 - 1.0;
    let px = |i: usize| scale(i as f64, 0.0, n, MARGIN, MARGIN + PLOT_W);
    let py = |v: f64| scale(v, lo, hi, MARGIN + PLOT_H, MARGIN);
    // Thin the raw points so long runs stay a manageable file size.
    let stride = (rewards.len() / 4000).max(1);
    for (i, r) in rewards.iter().enumerate().step_by(stride) {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.1}" cy="{:.1}" r="1" fill="#9bb" fill-opacity="0.4"/>"##,
            px(i),
            py(*r)
        );
    }
    let line: Vec<(f64, f64)> = median
        .iter()
        .enumerate()
        .step_by(stride)
        .map(|(i, m)| (px(i), py(*m)))
        .collect();
    polyline(&mut out, &line, "#c22", 1.5);
    axes(&mut out, "episode", "episode reward", (0.0, n), (lo, hi));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle">rolling median, window {window}</text>"#,
        MARGIN + PLOT_W / 2.0
    );
    out.push_str("</svg>\n");
    out
}

/// Road cells by layer (x) and lane (y), occupied cells dark and free cells
/// tinted by speed limit, with the executed path colored by speed and the
/// fitted spline through it.
pub fn path_plot(grid: &RoadGrid, path: &[PathPoint], spline: &[(f64, f64)]) -> String {
    let lanes = grid.lanes;
    let w = grid.layers() as f64 * CELL + 2.0 * MARGIN;
    let h = lanes as f64 * CELL + 2.0 * MARGIN;
    let mut out = String::new();
    header(&mut out, w, h);
    let v_top = grid
        .limits
        .iter()
        .flatten()
        .chain(path.iter().map(|p| &p.v))
        .fold(0.0f64, |a, &b| a.max(b))
        .max(1.0);
    // Lane 0 is drawn at the bottom.
    let cell_y = |lane: f64| MARGIN + (lanes as f64 - 1.0 - lane) * CELL;
    let center_x = |layer: f64| MARGIN + (layer + 0.5) * CELL;
    let center_y = |n: f64| cell_y(n + (lanes as f64 - 1.0) / 2.0) + CELL / 2.0;
    for layer in 0..grid.layers() {
        for lane in 0..lanes {
            let fill = if grid.occupied[layer][lane] {
                "#333".to_string()
            } else {
                let t = grid.limits[layer][lane] / v_top;
                let g = (245.0 - 60.0 * t.clamp(0.0, 1.0)) as u8;
                format!("rgb({g},{g},245)")
            };
            let _ = writeln!(
                out,
                r##"<rect x="{:.1}" y="{:.1}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#bbb" stroke-width="0.5"/>"##,
                MARGIN + layer as f64 * CELL,
                cell_y(lane as f64)
            );
        }
    }
    let curve: Vec<(f64, f64)> = spline.iter().map(|&(x, n)| (center_x(x), center_y(n))).collect();
    polyline(&mut out, &curve, "#2a2", 1.5);
    for p in path {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{}"><title>layer {} n {} v {}</title></circle>"#,
            center_x(p.layer as f64),
            center_y(p.n),
            speed_color(p.v / v_top),
            p.layer,
            p.n,
            p.v
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}">layer</text><text x="{MARGIN}" y="20">lanes (bottom = lane 0); dark = occupied; dots colored by speed</text>"#,
        h - 14.0
    );
    out.push_str("</svg>\n");
    out
}

/// Speed at each executed layer.
pub fn velocity_plot(path: &[PathPoint]) -> String {
    let mut out = String::new();
    header(&mut out, PLOT_W + 2.0 * MARGIN, PLOT_H + 2.0 * MARGIN);
    let last = path.last().map_or(1.0, |p| p.layer as f64).max(1.0);
    let v_top = path.iter().map(|p| p.v).fold(0.0f64, f64::max).max(1.0);
    let pts: Vec<(f64, f64)> = path
        .iter()
        .map(|p| {
            (
                scale(p.layer as f64, 0.0, last, MARGIN, MARGIN + PLOT_W),
                scale(p.v, 0.0, v_top, MARGIN + PLOT_H, MARGIN),
            )
        })
        .collect();
    polyline(&mut out, &pts, "#24c", 1.5);
    for ((x, y), p) in pts.iter().zip(path) {
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{}"/>"#,
            speed_color(p.v / v_top)
        );
    }
    axes(&mut out, "layer", "speed", (0.0, last), (0.0, v_top));
    out.push_str("</svg>\n");
    out
}
