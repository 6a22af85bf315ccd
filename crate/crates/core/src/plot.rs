//! Minimal SVG line charts of training logs.

use crate::training::TrainLog;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn panel(out: &mut String, top: f64, title: &str, series: &[(String, Vec<(f64, f64)>)]) {
    let pts = series.iter().flat_map(|(_, p)| p.iter()).filter(|(_, y)| y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + MARGIN + ph - (y - y0) / (y1 - y0) * ph;
    out.push_str(&format!(
        "<rect x=\"{MARGIN}\" y=\"{}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#888\"/>\n",
        top + MARGIN
    ));
    out.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"{}\" font-size=\"14\">{title}</text>\n",
        top + MARGIN - 8.0
    ));
    out.push_str(&format!(
        "<text x=\"4\" y=\"{}\" font-size=\"10\">{y1:.3e}</text>\n<text x=\"4\" y=\"{}\" font-size=\"10\">{y0:.3e}</text>\n",
        top + MARGIN + 4.0,
        top + MARGIN + ph
    ));
    for (i, (name, p)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = p
            .iter()
            .filter(|(_, y)| y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{name}</text>\n",
            WIDTH - MARGIN - 160.0,
            top + MARGIN + 14.0 * (i as f64 + 1.0)
        ));
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Two stacked panels: discriminator loss and generator loss per step, one
/// line per named log.
pub fn loss_curves_svg(title: &str, logs: &[(String, TrainLog)]) -> String {
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{}\" font-family=\"sans-serif\">\n",
        2.0 * HEIGHT + 30.0
    );
    out.push_str(&format!("<text x=\"{MARGIN}\" y=\"20\" font-size=\"16\">{}</text>\n", escape(title)));
    for (k, (label, pick)) in [("loss_d", (|r: &crate::training::TrainRecord| r.loss_d) as fn(&_) -> f64), ("loss_g", |r| r.loss_g)]
        .into_iter()
        .enumerate()
    {
        let series: Vec<(String, Vec<(f64, f64)>)> = logs
            .iter()
            .map(|(name, log)| (escape(name), log.records.iter().map(|r| (r.step as f64, pick(r))).collect()))
            .collect();
        panel(&mut out, 30.0 + k as f64 * HEIGHT, label, &series);
    }
    out.push_str("</svg>\n");
    out
}
