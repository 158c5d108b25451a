//! Minimal SVG bar charts for behavior histograms. CSV stays the canonical
//! output; these are a convenience for eyeballing distributions.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 36.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_RIGHT: f64 = 12.0;

pub(crate) fn bar_chart_svg(title: &str, labels: &[String], values: &[f64], meta: &str) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let max = values.iter().copied().fold(0.0f64, f64::max).max(1e-12);
    let n = values.len().max(1) as f64;
    let slot = plot_w / n;
    let bar_w = (slot * 0.85).max(0.5);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<!-- {meta} -->\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\" \
         text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    // Axes.
    let x0 = MARGIN_LEFT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"#333\"/>\n",
        WIDTH - MARGIN_RIGHT
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{MARGIN_TOP}\" stroke=\"#333\"/>\n"
    ));
    // A few y ticks.
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let y = y0 - frac * plot_h;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"end\">{:.2}</text>\n",
            x0 - 4.0,
            y + 3.0,
            frac * max
        ));
    }
    // Bars with sparse x labels.
    let label_every = (labels.len() / 12).max(1);
    for (i, (label, &value)) in labels.iter().zip(values).enumerate() {
        let x = x0 + i as f64 * slot + (slot - bar_w) / 2.0;
        let h = value / max * plot_h;
        let y = y0 - h;
        svg.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bar_w:.2}\" height=\"{h:.2}\" \
             fill=\"#4878a8\"/>\n"
        ));
        if i % label_every == 0 {
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
                 text-anchor=\"middle\">{}</text>\n",
                x + bar_w / 2.0,
                y0 + 14.0,
                escape(label)
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
