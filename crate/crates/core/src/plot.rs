//! Minimal SVG rendering of learning curves and confusion matrices.

use std::fmt::Write as _;

use crate::corpus::{Label, NUM_CLASSES};
use crate::eval::{CurvePoint, EvaluationReport};

const WIDTH: f64 = 560.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn header(out: &mut String, w: f64, h: f64) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Accuracy against training size, with a band of one fold standard
/// deviation around the line.
pub fn learning_curve_svg(title: &str, points: &[CurvePoint]) -> String {
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT);
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let max_x = points.iter().map(|p| p.train_size).fold(1.0, f64::max);
    let lo = points.iter().map(|p| p.accuracy - p.fold_std).fold(1.0, f64::min).clamp(0.0, 1.0);
    let hi = points.iter().map(|p| p.accuracy + p.fold_std).fold(0.0, f64::max).clamp(0.0, 1.0);
    let (lo, hi) = ((lo * 20.0).floor() / 20.0, ((hi * 20.0).ceil() / 20.0).max(lo + 0.05));
    let x = |v: f64| MARGIN + v / max_x * pw;
    let y = |v: f64| MARGIN + (1.0 - (v - lo) / (hi - lo)) * ph;

    writeln!(out, r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
    writeln!(
        out,
        r#"<path d="M{l},{t} V{b} H{r}" fill="none" stroke="black"/>"#,
        l = MARGIN,
        t = MARGIN,
        b = MARGIN + ph,
        r = MARGIN + pw
    )
    .unwrap();
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.1}%</text>"#, MARGIN - 6.0, y(v) + 4.0, v * 100.0).unwrap();
    }
    for p in points {
        writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.0}</text>"#, x(p.train_size), MARGIN + ph + 18.0, p.train_size).unwrap();
    }
    writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">training instances</text>"#, WIDTH / 2.0, HEIGHT - 15.0).unwrap();
    writeln!(
        out,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">accuracy</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )
    .unwrap();

    if !points.is_empty() {
        let upper: Vec<String> = points.iter().map(|p| format!("{:.1},{:.1}", x(p.train_size), y((p.accuracy + p.fold_std).min(hi)))).collect();
        let lower: Vec<String> = points.iter().rev().map(|p| format!("{:.1},{:.1}", x(p.train_size), y((p.accuracy - p.fold_std).max(lo)))).collect();
        writeln!(out, r#"<polygon points="{} {}" fill="steelblue" fill-opacity="0.2"/>"#, upper.join(" "), lower.join(" ")).unwrap();
        let line: Vec<String> = points.iter().map(|p| format!("{:.1},{:.1}", x(p.train_size), y(p.accuracy))).collect();
        writeln!(out, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, line.join(" ")).unwrap();
        for p in points {
            writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"/>"#, x(p.train_size), y(p.accuracy)).unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Row-normalized confusion heatmap with raw counts in each cell.
pub fn confusion_svg(report: &EvaluationReport) -> String {
    let cell = 90.0;
    let left = 110.0;
    let top = 80.0;
    let size = left + cell * NUM_CLASSES as f64 + 30.0;
    let mut out = String::new();
    header(&mut out, size, top + cell * NUM_CLASSES as f64 + 40.0);
    writeln!(out, r#"<text x="{}" y="25" text-anchor="middle" font-size="14">{}</text>"#, size / 2.0, escape(&report.method)).unwrap();
    writeln!(out, r#"<text x="{}" y="50" text-anchor="middle">predicted</text>"#, left + cell * 1.5).unwrap();
    for (c, label) in Label::ALL.iter().enumerate() {
        let cx = left + cell * (c as f64 + 0.5);
        writeln!(out, r#"<text x="{cx}" y="{}" text-anchor="middle">{}</text>"#, top - 8.0, label.name()).unwrap();
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, left - 8.0, top + cell * (c as f64 + 0.5) + 4.0, label.name()).unwrap();
    }
    for (g, row) in report.confusion.iter().enumerate() {
        let total: u64 = row.iter().sum();
        for (p, &count) in row.iter().enumerate() {
            let share = if total == 0 { 0.0 } else { count as f64 / total as f64 };
            let shade = (255.0 * (1.0 - share)).round() as u8;
            let text = if share > 0.5 { "white" } else { "black" };
            let (x0, y0) = (left + cell * p as f64, top + cell * g as f64);
            writeln!(
                out,
                r#"<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="gray"/>"#
            )
            .unwrap();
            writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{text}">{count}</text>"#,
                x0 + cell / 2.0,
                y0 + cell / 2.0 + 4.0
            )
            .unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}
