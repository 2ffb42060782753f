//! Minimal SVG line charts of a sweep.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::channel::Side;
use crate::sim::{Scheme, SweepAxis, SweepReport};
use crate::Result;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

/// Writes `<axis>_incumbent.svg` and `<axis>_licensee.svg` (Monte Carlo
/// rate of the headline row of each scheme) into `dir`.
pub fn write_plots(report: &SweepReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let x_label = match report.axis {
        SweepAxis::SnrDb => "transmit SNR [dB]",
        SweepAxis::Tau1 => "incumbent threshold tau1 [bits/s/Hz]",
    };
    let mut written = Vec::new();
    for (rx, name) in [(Side::Incumbent, "incumbent"), (Side::Licensee, "licensee")] {
        let series: Vec<Series> = Scheme::ALL
            .iter()
            .map(|&scheme| Series {
                label: scheme.to_string(),
                points: report
                    .points
                    .iter()
                    .filter_map(|p| p.headline(scheme).and_then(|r| Some((p.axis_value, r.mc(rx)?.mean))))
                    .collect(),
            })
            .filter(|s| !s.points.is_empty())
            .collect();
        let threshold = (rx == Side::Incumbent).then(|| {
            report
                .points
                .iter()
                .map(|p| (p.axis_value, p.config.tau1))
                .collect::<Vec<_>>()
        });
        let title = format!("RX {} ergodic rate", rx.number());
        let svg = render(&title, x_label, "rate [bits/s/Hz]", &series, threshold.as_deref());
        let path = dir.join(format!("{}_{name}.svg", report.axis));
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

fn render(title: &str, x_label: &str, y_label: &str, series: &[Series], threshold: Option<&[(f64, f64)]>) -> String {
    let all = series
        .iter()
        .flat_map(|s| s.points.iter())
        .chain(threshold.unwrap_or(&[]).iter());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    y1 *= 1.05;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y / y1 * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
        WIDTH / 2.0
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let xv = x0 + (x1 - x0) * k as f64 / 5.0;
        let yv = y1 * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{xv:.2}</text>"#,
            sx(xv),
            bottom + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{yv:.2}</text>"#,
            left - 6.0,
            sy(yv) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    let polyline = |pts: &[(f64, f64)]| {
        pts.iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    if let Some(t) = threshold {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="gray" stroke-dasharray="5,4"/>"#,
            polyline(t)
        );
    }
    for (i, series) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            polyline(&series.points)
        );
        let ly = top + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            right - 130.0,
            right - 110.0,
            right - 104.0,
            ly + 4.0,
            series.label
        );
    }
    s.push_str("</svg>\n");
    s
}
