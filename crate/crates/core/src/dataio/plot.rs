//! Static SVG figures: Smith chart, magnitude in dB and phase.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::scalar::db20;

const PANEL: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// A named complex trace.
#[derive(Debug, Clone, Copy)]
pub struct Trace<'a> {
    pub label: &'a str,
    pub values: &'a [Complex64],
}

fn polyline(out: &mut String, label: &str, color: &str, pts: impl Iterator<Item = (f64, f64)>) {
    let _ = write!(out, r#"<polyline class="trace" data-trace="{label}" fill="none" stroke="{color}" stroke-width="1.5" points=""#);
    let mut first = true;
    for (x, y) in pts {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{x:.2},{y:.2}");
    }
    out.push_str("\"/>\n");
}

fn legend(out: &mut String, traces: &[Trace], x0: f64, y0: f64) {
    for (k, t) in traces.iter().enumerate() {
        let y = y0 + 14.0 * k as f64;
        let c = COLORS[k % COLORS.len()];
        let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{c}" stroke-width="2"/>"#, x0 + 16.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#, x0 + 20.0, y + 4.0, t.label);
    }
}

/// Smith chart panel with its top-left corner at `(x0, y0)`.
fn smith_panel(out: &mut String, traces: &[Trace], x0: f64, y0: f64, id: &str) {
    let r = 0.5 * PANEL - MARGIN * 0.5;
    let (cx, cy) = (x0 + 0.5 * PANEL, y0 + 0.5 * PANEL);
    let _ = writeln!(out, r#"<g class="panel" id="{id}">"#);
    let _ = writeln!(out, r#"<clipPath id="{id}-clip"><circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}"/></clipPath>"#);
    let _ = writeln!(out, r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="none" stroke="#444" stroke-width="1"/>"##);
    let _ = writeln!(out, r##"<g clip-path="url(#{id}-clip)" fill="none" stroke="#ccc" stroke-width="0.7">"##);
    let _ = writeln!(out, r#"<line x1="{:.2}" y1="{cy:.2}" x2="{:.2}" y2="{cy:.2}"/>"#, cx - r, cx + r);
    for rr in [0.2, 0.5, 1.0, 2.0, 5.0] {
        // Constant resistance: centre r/(1+r), radius 1/(1+r).
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{cy:.2}" r="{:.2}"/>"#, cx + r * rr / (1.0 + rr), r / (1.0 + rr));
    }
    for xx in [0.2f64, 0.5, 1.0, 2.0, 5.0] {
        // Constant reactance: centre (1, 1/x), radius 1/|x|.
        for s in [1.0, -1.0] {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}"/>"#, cx + r, cy - s * r / xx, r / xx);
        }
    }
    out.push_str("</g>\n");
    for (k, t) in traces.iter().enumerate() {
        polyline(out, t.label, COLORS[k % COLORS.len()], t.values.iter().map(|z| (cx + r * z.re, cy - r * z.im)));
    }
    legend(out, traces, x0 + 6.0, y0 + 12.0);
    out.push_str("</g>\n");
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - pad, lo + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Cartesian panel of `y(f)` per trace.
fn xy_panel(out: &mut String, freqs: &[f64], series: &[(&str, Vec<f64>)], x0: f64, y0: f64, id: &str, ylabel: &str) {
    let (fx0, fx1) = (freqs[0], freqs[freqs.len() - 1]);
    let fc = 0.5 * (fx0 + fx1);
    let all = series.iter().flat_map(|s| s.1.iter().copied()).filter(|v| v.is_finite());
    let (ymin, ymax) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (ylo, yhi) = if ymin.is_finite() { nice_range(ymin, ymax) } else { (-1.0, 1.0) };
    let (px0, px1) = (x0 + MARGIN, x0 + PANEL - 8.0);
    let (py0, py1) = (y0 + 8.0, y0 + PANEL - MARGIN);
    let sx = |f: f64| px0 + (f - fx0) / (fx1 - fx0).max(f64::MIN_POSITIVE) * (px1 - px0);
    let sy = |v: f64| py1 - (v - ylo) / (yhi - ylo) * (py1 - py0);

    let _ = writeln!(out, r#"<g class="panel" id="{id}">"#);
    let _ = writeln!(
        out,
        r##"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        px1 - px0,
        py1 - py0
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let v = ylo + t * (yhi - ylo);
        let y = sy(v);
        let _ = writeln!(out, r##"<line x1="{px0:.2}" y1="{y:.2}" x2="{px1:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{v:.2}</text>"#, px0 - 4.0, y + 3.0);
        let f = fx0 + t * (fx1 - fx0);
        let x = sx(f);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{:.3}</text>"#,
            py1 + 14.0,
            (f - fc) / 1e6
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">f - {:.6} GHz (MHz)</text>"#,
        0.5 * (px0 + px1),
        py1 + 32.0,
        fc / 1e9
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{ylabel}</text>"#,
        x0 + 12.0,
        0.5 * (py0 + py1),
        x0 + 12.0,
        0.5 * (py0 + py1)
    );
    for (k, (label, ys)) in series.iter().enumerate() {
        let pts = freqs.iter().zip(ys).filter(|(_, v)| v.is_finite()).map(|(&f, &v)| (sx(f), sy(v)));
        polyline(out, label, COLORS[k % COLORS.len()], pts);
    }
    out.push_str("</g>\n");
}

fn document(width: f64, body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{PANEL:.0}\" viewBox=\"0 0 {width:.0} {PANEL:.0}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// A single Smith chart.
pub fn smith_chart_svg(traces: &[Trace]) -> String {
    let mut body = String::new();
    smith_panel(&mut body, traces, 0.0, 0.0, "smith");
    document(PANEL, &body)
}

/// Three panels side by side: Smith chart, `|S|` in dB and phase in degrees.
pub fn sweep_figure_svg(freqs: &[f64], traces: &[Trace]) -> String {
    let mut body = String::new();
    smith_panel(&mut body, traces, 0.0, 0.0, "smith");
    if !freqs.is_empty() {
        let mag: Vec<(&str, Vec<f64>)> =
            traces.iter().map(|t| (t.label, t.values.iter().map(|z| db20(z.norm())).collect())).collect();
        xy_panel(&mut body, freqs, &mag, PANEL, 0.0, "magnitude", "|S| (dB)");
        let phase: Vec<(&str, Vec<f64>)> =
            traces.iter().map(|t| (t.label, t.values.iter().map(|z| z.arg().to_degrees()).collect())).collect();
        xy_panel(&mut body, freqs, &phase, 2.0 * PANEL, 0.0, "phase", "phase (deg)");
    }
    document(3.0 * PANEL, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traces() -> Vec<(String, Vec<Complex64>)> {
        ["S11", "S21", "s_cm", "s_dm"]
            .iter()
            .enumerate()
            .map(|(k, l)| (l.to_string(), (0..50).map(|i| Complex64::from_polar(0.9, 0.1 * (i + k) as f64)).collect()))
            .collect()
    }

    #[test]
    fn figure_has_four_traces_per_panel() {
        let data = traces();
        let t: Vec<Trace> = data.iter().map(|(l, v)| Trace { label: l, values: v }).collect();
        let f: Vec<f64> = (0..50).map(|i| 5e9 + i as f64 * 1e3).collect();
        let svg = sweep_figure_svg(&f, &t);
        assert!(svg.starts_with("<?xml"));
        assert!(!svg.contains("<script"));
        assert_eq!(svg.matches("class=\"trace\"").count(), 12);
        for l in ["S11", "S21", "s_cm", "s_dm"] {
            assert_eq!(svg.matches(&format!("data-trace=\"{l}\"")).count(), 3);
        }
        assert_eq!(svg, sweep_figure_svg(&f, &t));
    }

    #[test]
    fn smith_only() {
        let data = traces();
        let t: Vec<Trace> = data.iter().map(|(l, v)| Trace { label: l, values: v }).collect();
        let svg = smith_chart_svg(&t);
        assert_eq!(svg.matches("class=\"trace\"").count(), 4);
    }

    #[test]
    fn decibels() {
        assert!((db20(0.5f64) + 6.0206).abs() < 1e-4);
    }
}
