//! Minimal static SVG output. Plots are drawn from finished results and never
//! feed back into them.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 40.0;

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Zero-set segments inside a disc, drawn in a square frame.
pub fn nodal_set(segments: &[[[f64; 2]; 2]], center: [f64; 2], radius: f64) -> String {
    let size = 400.0;
    let scale = (size - 2.0 * 10.0) / (2.0 * radius);
    let map = |p: [f64; 2]| {
        (
            size / 2.0 + (p[0] - center[0]) * scale,
            size / 2.0 - (p[1] - center[1]) * scale,
        )
    };
    let mut s = header(size, size);
    writeln!(
        s,
        "<circle cx=\"{0}\" cy=\"{0}\" r=\"{1:.3}\" fill=\"none\" stroke=\"#999\"/>",
        size / 2.0,
        radius * scale
    )
    .unwrap();
    s.push_str("<path fill=\"none\" stroke=\"black\" stroke-width=\"0.8\" d=\"");
    for seg in segments {
        let (x0, y0) = map(seg[0]);
        let (x1, y1) = map(seg[1]);
        write!(s, "M{x0:.2},{y0:.2}L{x1:.2},{y1:.2}").unwrap();
    }
    s.push_str("\"/>\n</svg>\n");
    s
}

/// Vertical bars, one per value, with a dashed reference line.
pub fn bars(title: &str, values: &[f64], reference: f64) -> String {
    let mut s = header(W, H);
    let top = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(reference, f64::max)
        .max(1e-12);
    let bw = (W - 2.0 * PAD) / values.len().max(1) as f64;
    let y = |v: f64| H - PAD - (v.min(top) / top) * (H - 2.0 * PAD);
    writeln!(
        s,
        "<text x=\"{PAD}\" y=\"20\" font-size=\"12\">{title}</text>"
    )
    .unwrap();
    for (i, v) in values.iter().enumerate() {
        let v = if v.is_finite() { *v } else { top };
        let x = PAD + i as f64 * bw;
        writeln!(
            s,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"steelblue\"/>",
            y(v),
            (bw * 0.8).max(0.5),
            H - PAD - y(v)
        )
        .unwrap();
    }
    writeln!(
        s,
        "<line x1=\"{PAD}\" x2=\"{:.2}\" y1=\"{1:.2}\" y2=\"{1:.2}\" stroke=\"red\" stroke-dasharray=\"4 3\"/>",
        W - PAD,
        y(reference)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

/// Points with error bars against a numeric x axis.
pub fn curve(title: &str, xs: &[f64], ys: &[f64], errs: &[f64]) -> String {
    let mut s = header(W, H);
    let (x0, x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let hi = ys
        .iter()
        .zip(errs)
        .map(|(y, e)| y + e)
        .fold(0.0, f64::max)
        .max(1e-12);
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| PAD + (x - x0) / span * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y / hi) * (H - 2.0 * PAD);
    writeln!(
        s,
        "<text x=\"{PAD}\" y=\"20\" font-size=\"12\">{title}</text>"
    )
    .unwrap();
    let mut path = String::new();
    for (i, ((&x, &y), &e)) in xs.iter().zip(ys).zip(errs).enumerate() {
        write!(
            path,
            "{}{:.2},{:.2}",
            if i == 0 { "M" } else { "L" },
            px(x),
            py(y)
        )
        .unwrap();
        writeln!(
            s,
            "<line x1=\"{0:.2}\" x2=\"{0:.2}\" y1=\"{1:.2}\" y2=\"{2:.2}\" stroke=\"black\"/>\
             <circle cx=\"{0:.2}\" cy=\"{3:.2}\" r=\"3\"/>",
            px(x),
            py((y - e).max(0.0)),
            py(y + e),
            py(y)
        )
        .unwrap();
    }
    writeln!(s, "<path d=\"{path}\" fill=\"none\" stroke=\"steelblue\"/>").unwrap();
    s.push_str("</svg>\n");
    s
}
