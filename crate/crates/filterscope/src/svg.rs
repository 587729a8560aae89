//! Minimal hand-written SVG charts. Output depends only on the inputs, so
//! reruns are byte-identical.

use std::fmt::Write;

use filterscope_core::analytics::ShiftMatrix;
use filterscope_core::stats::FiveNumber;

use crate::report::Provenance;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Compact label for a cell or tick value.
pub fn fmt_value(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.abs() >= 1e-3 && x.abs() < 1e4 {
        format!("{x:.4}")
    } else {
        format!("{x:.2e}")
    }
}

fn open(out: &mut String, width: f64, height: f64, title: &str, prov: &Provenance) {
    // room for the provenance footer
    let width = width.max(12.0 + 5.6 * prov.line().chars().count() as f64).ceil();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" font-family=\"sans-serif\" font-size=\"11\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, "<metadata>{}</metadata>", escape(&prov.to_json()));
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>");
    let _ = writeln!(out, "<text x=\"10\" y=\"18\" font-size=\"14\">{}</text>", escape(title));
    let _ = writeln!(
        out,
        "<text x=\"10\" y=\"{:.0}\" fill=\"#555555\">{}</text>",
        height - 8.0,
        escape(&prov.line())
    );
}

fn close(out: &mut String) {
    out.push_str("</svg>\n");
}

fn ramp(t: f64) -> (u8, u8, u8) {
    // white to dark blue
    let (a, b) = ((247.0, 251.0, 255.0), (8.0, 48.0, 107.0));
    let mix = |x: f64, y: f64| (x + (y - x) * t).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Annotated heatmap with a linear colour scale over the matrix's own
/// min..max.
pub fn heatmap(m: &ShiftMatrix, prov: &Provenance) -> String {
    let n = m.len();
    let cell = 56.0;
    let longest = m.labels.iter().map(|l| l.chars().count()).max().unwrap_or(1) as f64;
    let margin = 20.0 + 6.5 * longest;
    let top = 40.0 + 6.5 * longest;
    let width = margin + cell * n as f64 + 20.0;
    let height = top + cell * n as f64 + 40.0;
    let (lo, hi) = m
        .values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));

    let mut out = String::new();
    open(&mut out, width, height, &format!("shift D by {}", m.axis), prov);
    for (i, row) in m.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            let (r, g, b) = ramp(t);
            let x = margin + cell * j as f64;
            let y = top + cell * i as f64;
            let _ = writeln!(
                out,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell:.0}\" height=\"{cell:.0}\" fill=\"#{r:02x}{g:02x}{b:02x}\" stroke=\"#ffffff\"/>"
            );
            let ink = if t > 0.5 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\" fill=\"{ink}\">{}</text>",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0,
                fmt_value(v)
            );
        }
    }
    for (k, label) in m.labels.iter().enumerate() {
        let c = cell * k as f64 + cell / 2.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            margin - 6.0,
            top + c + 4.0,
            escape(label)
        );
        let (x, y) = (margin + c + 4.0, top - 6.0);
        let _ = writeln!(
            out,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" transform=\"rotate(-90 {x:.1} {y:.1})\">{}</text>",
            escape(label)
        );
    }
    close(&mut out);
    out
}

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.left + self.width * (v - self.x_range.0) / (self.x_range.1 - self.x_range.0)
    }

    fn y(&self, v: f64) -> f64 {
        self.top + self.height * (1.0 - (v - self.y_range.0) / (self.y_range.1 - self.y_range.0))
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str, y_ticks: usize) {
        let (x0, x1) = (self.left, self.left + self.width);
        let (y0, y1) = (self.top + self.height, self.top);
        let _ = writeln!(
            out,
            "<path d=\"M{x0:.1} {y1:.1} L{x0:.1} {y0:.1} L{x1:.1} {y0:.1}\" fill=\"none\" stroke=\"#000000\"/>"
        );
        for k in 0..=y_ticks {
            let v = self.y_range.0 + (self.y_range.1 - self.y_range.0) * k as f64 / y_ticks as f64;
            let y = self.y(v);
            let _ = writeln!(
                out,
                "<line x1=\"{x0:.1}\" y1=\"{y:.1}\" x2=\"{x1:.1}\" y2=\"{y:.1}\" stroke=\"#e0e0e0\"/>"
            );
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
                x0 - 4.0,
                y + 4.0,
                fmt_value(v)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            self.left + self.width / 2.0,
            y0 + 32.0,
            escape(x_label)
        );
        let (lx, ly) = (14.0, self.top + self.height / 2.0);
        let _ = writeln!(
            out,
            "<text x=\"{lx:.1}\" y=\"{ly:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 {lx:.1} {ly:.1})\">{}</text>",
            escape(y_label)
        );
    }
}

/// One polyline per series over components 1..=len, y in [0, 1].
pub fn component_lines(title: &str, y_label: &str, series: &[(String, Vec<f64>)], prov: &Provenance) -> String {
    let points = series.iter().map(|(_, v)| v.len()).max().unwrap_or(1).max(2);
    let legend_rows = series.len() as f64;
    let frame = Frame {
        left: 70.0,
        top: 40.0,
        width: 460.0,
        height: 280.0,
        x_range: (1.0, points as f64),
        y_range: (0.0, 1.0),
    };
    let width = 760.0;
    let height = (frame.top + frame.height + 70.0).max(frame.top + 16.0 * legend_rows + 40.0);

    let mut out = String::new();
    open(&mut out, width, height, title, prov);
    frame.axes(&mut out, "principal component", y_label, 5);
    for k in 1..=points {
        let x = frame.x(k as f64);
        let _ = writeln!(
            out,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{k}</text>",
            frame.top + frame.height + 16.0
        );
    }
    for (s, (name, values)) in series.iter().enumerate() {
        let colour = PALETTE[s % PALETTE.len()];
        let pts: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(k, &v)| format!("{:.1},{:.1}", frame.x((k + 1) as f64), frame.y(v)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        );
        let ly = frame.top + 16.0 * s as f64;
        let lx = frame.left + frame.width + 20.0;
        let _ = writeln!(
            out,
            "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{colour}\"/>",
            ly - 9.0
        );
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>", lx + 14.0, escape(name));
    }
    close(&mut out);
    out
}

/// Box plot per category; whiskers stop at the last point inside the
/// 1.5·IQR fences and points beyond them are drawn individually.
pub fn boxplot(title: &str, x_label: &str, y_label: &str, groups: &[(String, Vec<f64>)], prov: &Provenance) -> String {
    let top = groups.iter().flat_map(|(_, v)| v.iter().copied()).fold(0.0f64, f64::max);
    let frame = Frame {
        left: 70.0,
        top: 40.0,
        width: 44.0 * groups.len().max(1) as f64,
        height: 280.0,
        x_range: (0.0, groups.len().max(1) as f64),
        y_range: (0.0, if top > 0.0 { top * 1.05 } else { 1.0 }),
    };
    let width = frame.left + frame.width + 40.0;
    let height = frame.top + frame.height + 70.0;

    let mut out = String::new();
    open(&mut out, width.max(520.0), height, title, prov);
    frame.axes(&mut out, x_label, y_label, 5);
    for (k, (label, values)) in groups.iter().enumerate() {
        let cx = frame.x(k as f64 + 0.5);
        let _ = writeln!(
            out,
            "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            frame.top + frame.height + 16.0,
            escape(label)
        );
        let Some(five) = FiveNumber::of(values) else { continue };
        let inside: Vec<f64> = values.iter().copied().filter(|&v| !five.is_outlier(v)).collect();
        let lo = inside.iter().copied().fold(five.q1, f64::min);
        let hi = inside.iter().copied().fold(five.q3, f64::max);
        let half = 12.0;
        let _ = writeln!(
            out,
            "<line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"#000000\"/>",
            frame.y(lo),
            frame.y(hi)
        );
        let _ = writeln!(
            out,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#c6dbef\" stroke=\"#000000\"/>",
            cx - half,
            frame.y(five.q3),
            2.0 * half,
            (frame.y(five.q1) - frame.y(five.q3)).max(0.5)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#000000\" stroke-width=\"2\"/>",
            cx - half,
            cx + half,
            y = frame.y(five.median)
        );
        for v in values.iter().copied().filter(|&v| five.is_outlier(v)) {
            let _ = writeln!(
                out,
                "<circle cx=\"{cx:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"none\" stroke=\"#000000\"/>",
                frame.y(v)
            );
        }
    }
    close(&mut out);
    out
}
