//! Coverage-over-events curves as a standalone SVG.

use std::fmt::Write;

use crate::driver::{CampaignReport, Mode};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;

fn colour(mode: Mode) -> &'static str {
    match mode {
        Mode::Hybrid => "#1b9e77",
        Mode::NoReuse => "#7570b3",
        Mode::NoLlm => "#d95f02",
        Mode::RandomOnly => "#666666",
    }
}

/// One step curve of unique screens against executed events per report.
pub fn coverage_svg(reports: &[&CampaignReport], title: &str) -> String {
    let max_x = reports
        .iter()
        .map(|r| r.trace.len().max(r.event_budget))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let max_y = reports
        .iter()
        .map(|r| r.unique_screens())
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + x / max_x * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN - y / max_y * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black"/>"#,
        l = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for i in 0..=4 {
        let fx = max_x * i as f64 / 4.0;
        let fy = max_y * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#,
            sx(fx),
            HEIGHT - MARGIN + 16.0,
            fx
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.1}</text>"#,
            MARGIN - 6.0,
            sy(fy) + 4.0,
            fy
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">events</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">unique screens</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for r in reports {
        let mut d = String::new();
        let mut prev_y = 0.0;
        for (i, p) in r.coverage_series.iter().enumerate() {
            let (x, y) = (sx(p.events as f64), sy(p.screens as f64));
            if i == 0 {
                let _ = write!(d, "M{x:.1},{y:.1}");
            } else {
                let _ = write!(d, " L{x:.1},{prev_y:.1} L{x:.1},{y:.1}");
            }
            prev_y = y;
        }
        let end = sx(r.trace.len() as f64);
        let _ = write!(d, " L{end:.1},{prev_y:.1}");
        let _ = writeln!(
            svg,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-opacity="0.6" stroke-width="1.2"><title>{} seed {}</title></path>"#,
            colour(r.mode),
            r.mode,
            r.seed
        );
    }

    let mut modes: Vec<Mode> = reports.iter().map(|r| r.mode).collect();
    modes.sort();
    modes.dedup();
    for (i, m) in modes.iter().enumerate() {
        let y = MARGIN + 8.0 + 18.0 * i as f64;
        let x = WIDTH - MARGIN - 110.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="3"/><text x="{}" y="{}">{m}</text>"#,
            x + 20.0,
            colour(*m),
            x + 26.0,
            y + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
