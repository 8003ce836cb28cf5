//! Minimal SVG chart of per-iteration runtimes.

use pra_core::dynamic::{Stage, StepSummary};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 320.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 40.0;

fn color(stage: Stage) -> &'static str {
    match stage {
        Stage::P => "#2b8a3e",
        Stage::Pstar => "#1971c2",
        Stage::Ostar => "#e8590c",
        Stage::H => "#c92a2a",
        Stage::CombinatorialInfeasible => "#495057",
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Runtime per iteration as a line with stage-coloured markers, and a box
/// plot of the runtime distribution on the right.
pub fn runtime_chart(title: &str, steps: &[StepSummary]) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let max_t = steps.iter().map(|s| s.t).max().unwrap_or(1).max(1) as f64;
    let max_y = steps.iter().map(|s| s.wall_time_s).fold(0.0, f64::max).max(1e-3) * 1.05;
    let x = |t: f64| LEFT + (t - 1.0).max(0.0) / (max_t - 1.0).max(1.0) * plot_w;
    let y = |v: f64| TOP + plot_h - v / max_y * plot_h;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    svg.push_str(&format!(
        "<text x=\"{LEFT}\" y=\"18\" font-size=\"13\">runtime per iteration: {}</text>\n",
        escape(title)
    ));
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{0}\" stroke=\"black\"/>\n",
        TOP + plot_h,
        LEFT + plot_w
    ));
    for i in 0..=4 {
        let v = max_y * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.3}</text>\n",
            LEFT - 6.0,
            y(v) + 4.0
        ));
    }
    for i in 0..=4 {
        let t = 1.0 + (max_t - 1.0) * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            x(t),
            TOP + plot_h + 16.0,
            t.round()
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">period</text>\n<text x=\"14\" y=\"{:.1}\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">seconds</text>\n",
        LEFT + plot_w / 2.0,
        HEIGHT - 6.0,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    ));
    let points: Vec<String> = steps
        .iter()
        .map(|s| format!("{:.1},{:.1}", x(s.t as f64), y(s.wall_time_s)))
        .collect();
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#868e96\" stroke-width=\"1\" points=\"{}\"/>\n",
        points.join(" ")
    ));
    for s in steps {
        svg.push_str(&format!(
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"{}\"><title>t={} {} {:.4}s</title></circle>\n",
            x(s.t as f64),
            y(s.wall_time_s),
            color(s.stage),
            s.t,
            s.stage,
            s.wall_time_s
        ));
    }

    let mut sorted: Vec<f64> = steps.iter().map(|s| s.wall_time_s).collect();
    sorted.sort_by(f64::total_cmp);
    let bx = LEFT + plot_w + 30.0;
    let (lo, q1, med, q3, hi) = (
        quantile(&sorted, 0.0),
        quantile(&sorted, 0.25),
        quantile(&sorted, 0.5),
        quantile(&sorted, 0.75),
        quantile(&sorted, 1.0),
    );
    svg.push_str(&format!(
        "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"black\"/>\n",
        bx + 10.0,
        y(lo),
        y(hi)
    ));
    svg.push_str(&format!(
        "<rect x=\"{bx:.1}\" y=\"{:.1}\" width=\"20\" height=\"{:.1}\" fill=\"#dee2e6\" stroke=\"black\"/>\n",
        y(q3),
        (y(q1) - y(q3)).max(0.5)
    ));
    svg.push_str(&format!(
        "<line x1=\"{bx:.1}\" y1=\"{0:.1}\" x2=\"{1:.1}\" y2=\"{0:.1}\" stroke=\"black\" stroke-width=\"2\"/>\n",
        y(med),
        bx + 20.0
    ));
    for (i, stage) in [Stage::P, Stage::Pstar, Stage::Ostar, Stage::H].into_iter().enumerate() {
        let ly = TOP + 12.0 * i as f64;
        svg.push_str(&format!(
            "<circle cx=\"{:.1}\" cy=\"{ly:.1}\" r=\"3\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\">{stage}</text>\n",
            bx + 45.0,
            color(stage),
            bx + 52.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
