//! Curve tables and static SVG line charts.

use std::fmt::Write as _;

use scaleresp_core::responsiveness::{CurveKind, CurvePoints};

/// `curve,x,y` rows; undefined points leave `y` empty.
pub fn curves_csv(curves: &[CurvePoints]) -> String {
    let mut out = String::from("curve,x,y\n");
    for c in curves {
        for (x, y) in c.xs.iter().zip(&c.ys) {
            match y {
                Some(y) => writeln!(out, "{},{},{}", c.kind.name(), x, crate::report::round_sig(*y)),
                None => writeln!(out, "{},{},", c.kind.name(), x),
            }
            .expect("writing to a string");
        }
    }
    out
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 600.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 450.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Line chart of one curve kind with a polyline per contiguous defined run of each series.
pub fn render_svg(kind: CurveKind, title: &str, series: &[(String, &CurvePoints)]) -> String {
    let x_max = series
        .iter()
        .flat_map(|(_, c)| c.xs.iter().copied())
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let values = || series.iter().flat_map(|(_, c)| c.ys.iter().flatten().copied());
    let y_min = values().fold(0.0f64, f64::min);
    let y_max = values().fold(1.0f64, f64::max);
    let sx = |x: f64| LEFT + (RIGHT - LEFT) * x / x_max;
    let sy = |y: f64| BOTTOM - (BOTTOM - TOP) * (y - y_min) / (y_max - y_min);

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(
        w,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    writeln!(w, r#"<text x="{LEFT}" y="24" font-size="15">{}</text>"#, escape(title)).unwrap();
    writeln!(
        w,
        r#"<line x1="{LEFT}" y1="{BOTTOM}" x2="{RIGHT}" y2="{BOTTOM}" stroke="black"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{BOTTOM}" stroke="black"/>"#
    )
    .unwrap();
    for x in 0..=x_max as u32 {
        let px = sx(x as f64);
        writeln!(
            w,
            r#"<line x1="{px:.2}" y1="{BOTTOM}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#,
            BOTTOM + 5.0,
            BOTTOM + 20.0
        )
        .unwrap();
    }
    for i in 0..=4 {
        let y = y_min + (y_max - y_min) * i as f64 / 4.0;
        let py = sy(y);
        writeln!(
            w,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            crate::report::round_sig((y * 1000.0).round() / 1000.0)
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">score</text><text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 12.0,
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0,
        kind.name()
    )
    .unwrap();

    for (i, (label, curve)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        writeln!(
            w,
            r#"<g class="series" stroke="{color}" fill="none"><title>{}</title>"#,
            escape(label)
        )
        .unwrap();
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for (x, y) in curve.xs.iter().zip(&curve.ys) {
            match y {
                Some(y) => runs.last_mut().unwrap().push((sx(*x as f64), sy(*y))),
                None if !runs.last().unwrap().is_empty() => runs.push(Vec::new()),
                None => {}
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            if run.len() == 1 {
                writeln!(
                    w,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    run[0].0, run[0].1
                )
                .unwrap();
                continue;
            }
            let points: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            writeln!(w, r#"<polyline stroke-width="2" points="{}"/>"#, points.join(" ")).unwrap();
        }
        writeln!(w, "</g>").unwrap();
        let ly = TOP + 18.0 * i as f64;
        writeln!(
            w,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            RIGHT + 15.0,
            RIGHT + 35.0,
            RIGHT + 40.0,
            ly + 4.0,
            escape(label)
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" font-size="10">raw values, not shifted to start at 0; gaps mark undefined points</text>"#,
        LEFT,
        TOP - 4.0
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}
