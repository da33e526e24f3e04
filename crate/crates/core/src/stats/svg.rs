//! Minimal SVG line chart of a load trend.

use std::fmt::Write as _;

use super::load::DifficultyTrend;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 240.0;
const MARGIN: f64 = 40.0;

/// Per-tick mean load on a fixed 0..2 axis, with the grand mean dashed.
pub fn trend_svg(trend: &DifficultyTrend) -> String {
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let n = trend.per_tick_mean.len().max(2);
    let x = |i: usize| MARGIN + plot_w * i as f64 / (n - 1) as f64;
    let y = |v: f64| MARGIN + plot_h * (1.0 - v.clamp(0.0, 2.0) / 2.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"##
    );
    let _ = writeln!(
        s,
        r##"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="13">{} difficulty: mean load {:.2} ({} participants)</text>"##,
        trend.difficulty, trend.grand_mean, trend.n_participants
    );
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##
    );
    for (v, name) in [(0.0, "Baseline"), (1.0, "Low"), (2.0, "High")] {
        let _ = writeln!(
            s,
            r##"<text x="4" y="{:.1}" font-family="sans-serif" font-size="10">{name}</text>"##,
            y(v) + 3.0
        );
    }
    let points: Vec<String> = trend
        .per_tick_mean
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{:.1},{:.1}", x(i), y(v)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
        points.join(" ")
    );
    let gy = y(trend.grand_mean);
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{gy:.1}" x2="{:.1}" y2="{gy:.1}" stroke="#d62728" stroke-dasharray="4 3"/>"##,
        WIDTH - MARGIN
    );
    s.push_str("</svg>\n");
    s
}
