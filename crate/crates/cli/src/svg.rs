//! Minimal deterministic SVG charts. Numbers are printed with fixed precision
//! so identical data gives byte-identical files.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, Default)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

impl Series {
    pub fn line(name: &str, x: Vec<f64>, y: Vec<f64>) -> Self {
        Series {
            name: name.to_string(),
            x,
            y,
            ..Series::default()
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Data range padded so a flat series still gets a visible axis.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(s: &mut String, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str, xticks: bool) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.1},{y0:.1} L{x0:.1},{y1:.1} L{x1:.1},{y1:.1}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let py = f.py(yv);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{py:.1}" x2="{x0:.1}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick(yv)
        );
        if xticks {
            let xv = f.x.0 + t * (f.x.1 - f.x.0);
            let px = f.px(xv);
            let _ = writeln!(
                s,
                r#"<line x1="{px:.1}" y1="{y1:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                y1 + 5.0,
                y1 + 18.0,
                tick(xv)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(s: &mut String, names: &[(&str, &str, bool)]) {
    for (k, (name, color, dashed)) in names.iter().enumerate() {
        let y = TOP + 10.0 + 16.0 * k as f64;
        let x = WIDTH - RIGHT - 150.0;
        let dash = if *dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 24.0,
            x + 30.0,
            y + 4.0,
            escape(name)
        );
    }
}

pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let frame = Frame {
        x: range(series.iter().flat_map(|s| s.x.iter().copied())),
        y: range(series.iter().flat_map(|s| s.y.iter().copied())),
    };
    let mut s = String::new();
    header(&mut s, title);
    axes(&mut s, &frame, xlabel, ylabel, true);
    let mut names = Vec::new();
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (&x, &y) in ser.x.iter().zip(&ser.y) {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let (px, py) = (frame.px(x), frame.py(y));
            let op = if pen_down { 'L' } else { 'M' };
            let _ = write!(d, "{op}{px:.2},{py:.2} ");
            pen_down = true;
        }
        let dash = if ser.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#,
            d.trim_end()
        );
        if !ser.name.is_empty() {
            names.push((ser.name.as_str(), color, ser.dashed));
        }
    }
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}

/// Vertical bars with category labels under each bar.
pub fn bar_chart(title: &str, ylabel: &str, bars: &[(String, f64)]) -> String {
    let (lo, hi) = range(bars.iter().map(|b| b.1).chain([0.0]));
    let frame = Frame {
        x: (0.0, bars.len().max(1) as f64),
        y: (lo, hi),
    };
    let mut s = String::new();
    header(&mut s, title);
    axes(&mut s, &frame, "", ylabel, false);
    let zero = frame.py(0.0);
    for (k, (label, v)) in bars.iter().enumerate() {
        let (xa, xb) = (frame.px(k as f64 + 0.15), frame.px(k as f64 + 0.85));
        let py = frame.py(*v);
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<rect x="{xa:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
            py.min(zero),
            xb - xa,
            (py - zero).abs()
        );
        let cx = (xa + xb) / 2.0;
        let ly = HEIGHT - BOTTOM + 14.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-35 {cx:.2} {ly:.2})">{}</text>"#,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_deterministic_and_well_formed() {
        let a = Series::line("roc", vec![0.0, 0.5, 1.0], vec![0.0, 0.8, 1.0]);
        let b = Series::line("chance", vec![0.0, 1.0], vec![0.0, 1.0]).dashed();
        let one = line_chart("t <1>", "x", "y", &[a.clone(), b.clone()]);
        assert_eq!(one, line_chart("t <1>", "x", "y", &[a, b]));
        assert!(one.starts_with("<svg") && one.ends_with("</svg>\n"));
        assert!(one.contains("t &lt;1&gt;"));
        assert!(one.contains("stroke-dasharray"));
        let bars = bar_chart("b", "v", &[("a".into(), 1.0), ("b".into(), -0.5)]);
        assert_eq!(bars.matches("<rect").count(), 3);
    }

    #[test]
    fn flat_and_empty_series_render() {
        let flat = line_chart("f", "x", "y", &[Series::line("c", vec![1.0, 1.0], vec![2.0, 2.0])]);
        assert!(!flat.contains("NaN"));
        let empty = line_chart("e", "x", "y", &[]);
        assert!(!empty.contains("NaN"));
    }
}
