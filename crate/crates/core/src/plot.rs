//! SVG line chart of average trust per category over cycles.

use std::fmt::Write as _;

use crate::sim_engine::{CycleMetrics, MetricsSeries};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

struct Curve {
    label: &'static str,
    color: &'static str,
    get: fn(&CycleMetrics) -> Option<f64>,
}

const CURVES: [Curve; 4] = [
    Curve {
        label: "good servers",
        color: "#1b9e77",
        get: |r| r.avg_trust_good,
    },
    Curve {
        label: "bad servers",
        color: "#d95f02",
        get: |r| r.avg_trust_bad,
    },
    Curve {
        label: "liars",
        color: "#7570b3",
        get: |r| r.avg_trust_liar,
    },
    Curve {
        label: "newcomer good servers",
        color: "#e7298a",
        get: |r| r.avg_trust_newcomer_good,
    },
];

/// "Nice" tick step for a span split into about `target` intervals.
fn tick_step(span: f64, target: f64) -> f64 {
    if !(span > 0.0) {
        return 1.0;
    }
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Renders one polyline per category that has any data, with a legend and
/// axis labels.
pub fn render_svg(series: &MetricsSeries, title: &str) -> String {
    let present: Vec<(&Curve, Vec<(f64, f64)>)> = CURVES
        .iter()
        .map(|c| {
            let pts: Vec<(f64, f64)> = series
                .rows
                .iter()
                .filter_map(|r| (c.get)(r).map(|y| (r.cycle as f64, y)))
                .collect();
            (c, pts)
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect();

    let x_max = series.rows.iter().map(|r| r.cycle as f64).fold(1.0, f64::max);
    let y_max = present
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
        .fold(1.0, f64::max);
    let y_min = present
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
        .fold(0.0, f64::min);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + x / x_max * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );

    // Axes and ticks.
    let (x0, y0) = (MARGIN_LEFT, MARGIN_TOP + plot_h);
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black"><line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}"/><line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}"/></g>"#,
        x0 + plot_w
    );
    let step = tick_step(x_max, 8.0);
    let mut t = 0.0;
    while t <= x_max + 1e-9 {
        let _ = writeln!(
            svg,
            r#"<text class="xtick" x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(t),
            y0 + 18.0,
            t
        );
        t += step;
    }
    let step = tick_step(y_max - y_min, 6.0);
    let mut t = (y_min / step).ceil() * step;
    while t <= y_max + 1e-9 {
        let _ = writeln!(
            svg,
            r#"<text class="ytick" x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            sy(t) + 4.0,
            t
        );
        t += step;
    }
    let _ = writeln!(
        svg,
        r#"<text class="xlabel" x="{:.1}" y="{:.1}" text-anchor="middle">cycle</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text class="ylabel" x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">average trust</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    for (curve, pts) in &present {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            curve.label,
            curve.color,
            coords.join(" ")
        );
    }

    let lx = WIDTH - MARGIN_RIGHT + 15.0;
    let _ = writeln!(svg, r#"<g class="legend">"#);
    for (i, (curve, _)) in present.iter().enumerate() {
        let ly = MARGIN_TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<g class="legend-entry"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="3"/><text x="{}" y="{}">{}</text></g>"#,
            lx + 20.0,
            curve.color,
            lx + 26.0,
            ly + 4.0,
            curve.label
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(cycle: u64, newcomer: Option<f64>) -> CycleMetrics {
        CycleMetrics {
            cycle,
            avg_trust_good: Some(cycle as f64),
            avg_trust_bad: Some(2.0),
            avg_trust_liar: Some(3.0),
            avg_trust_newcomer_good: newcomer,
            success_rate: None,
            penalties: 0,
        }
    }

    #[test]
    fn one_polyline_and_legend_entry_per_category() {
        let full = MetricsSeries {
            rows: (0..10).map(|c| row(c, (c >= 5).then_some(1.0))).collect(),
        };
        let svg = render_svg(&full, "trust");
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert_eq!(svg.matches("class=\"legend-entry\"").count(), 4);
        assert!(svg.contains(">cycle</text>"));
        assert!(svg.contains(">average trust</text>"));

        let three = MetricsSeries {
            rows: (0..10).map(|c| row(c, None)).collect(),
        };
        assert_eq!(render_svg(&three, "t").matches("<polyline").count(), 3);
    }

    #[test]
    fn ticks_are_round_numbers() {
        assert_eq!(tick_step(1000.0, 8.0), 200.0);
        assert_eq!(tick_step(9.0, 6.0), 2.0);
        assert_eq!(tick_step(0.0, 6.0), 1.0);
    }
}
