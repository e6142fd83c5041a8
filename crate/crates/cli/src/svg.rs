//! Minimal self-contained SVG charts with deterministic output.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Draw a legend when there are few series.
    pub legend: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(s: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 14.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        H / 2.0,
        escape(y_label)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
}

/// Up to about six round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        None
    } else if lo == hi {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let mut s = String::new();
        header(&mut s, &self.title, &self.x_label, &self.y_label);
        let ty = |y: f64| if self.log_y { y.log10() } else { y };
        let usable = |p: &(f64, f64)| p.0.is_finite() && p.1.is_finite() && (!self.log_y || p.1 > 0.0);
        let pts = || self.series.iter().flat_map(|se| se.points.iter().filter(|p| usable(p)));
        let (Some((x0, x1)), Some((y0, y1))) = (bounds(pts().map(|p| p.0)), bounds(pts().map(|p| ty(p.1)))) else {
            s.push_str("</svg>\n");
            return s;
        };
        let (y0, y1) = if self.log_y { (y0.floor(), y1.ceil()) } else { (y0, y1) };
        let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
        for t in ticks(x0, x1) {
            let _ = writeln!(
                s,
                r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#333"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"##,
                sx(t),
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 18.0,
                fmt_tick(t)
            );
        }
        let yt: Vec<f64> = if self.log_y { (y0 as i64..=y1 as i64).map(|k| k as f64).collect() } else { ticks(y0, y1) };
        for t in yt {
            let label = if self.log_y { format!("1e{}", t as i64) } else { fmt_tick(t) };
            let _ = writeln!(
                s,
                r##"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="#ddd"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"##,
                LEFT,
                sy(t),
                LEFT + pw,
                LEFT - 6.0,
                sy(t) + 4.0,
                label
            );
        }
        for (k, se) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut d = String::new();
            for p in se.points.iter().filter(|p| usable(p)) {
                let _ = write!(d, "{}{:.2},{:.2}", if d.is_empty() { "M" } else { " L" }, sx(p.0), sy(ty(p.1)));
            }
            let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
            if self.legend {
                let y = TOP + 14.0 + 16.0 * k as f64;
                let _ = writeln!(
                    s,
                    r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="{color}" stroke-width="2"/><text x="{3:.2}" y="{4:.2}">{5}</text>"#,
                    W - RIGHT - 150.0,
                    y,
                    W - RIGHT - 130.0,
                    W - RIGHT - 124.0,
                    y + 4.0,
                    escape(&se.name)
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Bar chart of counts per labelled bin.
pub struct BarPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub bars: Vec<(String, f64)>,
}

impl BarPlot {
    pub fn render(&self) -> String {
        let mut s = String::new();
        header(&mut s, &self.title, &self.x_label, &self.y_label);
        let top = self.bars.iter().map(|b| b.1).fold(0.0, f64::max).max(1.0);
        let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
        for t in ticks(0.0, top) {
            let y = TOP + ph - t / top * ph;
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let n = self.bars.len().max(1) as f64;
        let bw = pw / n;
        for (i, (label, v)) in self.bars.iter().enumerate() {
            let x = LEFT + bw * i as f64;
            let h = v / top * ph;
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="#1f77b4"/><text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"##,
                x + 0.1 * bw,
                TOP + ph - h,
                0.8 * bw,
                x + bw / 2.0,
                TOP + ph + 16.0,
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        for t in ticks(0.13, 0.87) {
            assert!((0.13..=0.87).contains(&t));
        }
        assert_eq!(fmt_tick(0.30000000000000004), "0.3");
        assert_eq!(fmt_tick(-0.0), "0");
    }

    #[test]
    fn log_plot_skips_nonpositive_values() {
        let p = LinePlot {
            title: "a<b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: true,
            series: vec![Series { name: "s".into(), points: vec![(0.0, 1.0), (1.0, 0.0), (2.0, 1e-3)] }],
            legend: true,
        };
        let svg = p.render();
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches(" L").count(), 1);
        assert!(svg.contains(">1e-3<") && svg.contains(">1e0<"));
        assert_eq!(svg, p.render());
    }
}
