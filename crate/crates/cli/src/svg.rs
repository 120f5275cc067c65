//! Self-contained SVG plot of a breakdown frontier.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

pub struct PlotInput<'a> {
    pub e0: f64,
    pub c: &'a [f64],
    pub bf: &'a [f64],
    pub soft: &'a [f64],
    pub bands: Option<(&'a [f64], &'a [f64])>,
}

struct Scale {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Scale {
    fn x(&self, v: f64) -> f64 {
        LEFT + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }
    fn y(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn polyline(out: &mut String, s: &Scale, xs: &[f64], ys: &[f64], style: &str) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.is_finite())
        .map(|(x, y)| format!("{:.2},{:.2}", s.x(*x), s.y(y.clamp(s.y0, s.y1))))
        .collect();
    if pts.len() >= 2 {
        let _ = writeln!(out, r#"<polyline fill="none" {style} points="{}"/>"#, pts.join(" "));
    }
}

/// Renders BF (solid), the soft frontier (thin), pointwise bands (dashed)
/// and the robust region under BF (shaded).
pub fn render(p: &PlotInput) -> String {
    let finite = |v: &[f64]| v.iter().copied().filter(|x| x.is_finite()).collect::<Vec<_>>();
    let mut ys = finite(p.bf);
    ys.extend(finite(p.soft));
    if let Some((lo, hi)) = p.bands {
        ys.extend(finite(lo));
        ys.extend(finite(hi));
    }
    let y_lo = ys.iter().copied().fold(0.0, f64::min);
    let mut y_hi = ys.iter().copied().fold(0.0, f64::max);
    if y_hi - y_lo < 1e-3 {
        y_hi = y_lo + 0.05;
    }
    let pad = 0.05 * (y_hi - y_lo);
    let x_hi = p.c.last().copied().unwrap_or(1.0);
    let x_lo = p.c.first().copied().unwrap_or(0.0);
    let y0 = if y_lo < 0.0 { y_lo - pad } else { 0.0 };
    let x1 = if x_hi > x_lo { x_hi } else { x_lo + 1.0 };
    let s = Scale { x0: x_lo, x1, y0, y1: y_hi + pad };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">Breakdown frontier, e0 = {:.4}</text>"#, WIDTH / 2.0, p.e0);

    // Robust region: everything between the c axis and BF.
    if !p.c.is_empty() {
        let mut pts: Vec<String> =
            p.c.iter().zip(p.bf).map(|(c, b)| format!("{:.2},{:.2}", s.x(*c), s.y(b.clamp(s.y0, s.y1)))).collect();
        pts.push(format!("{:.2},{:.2}", s.x(x_hi), s.y(0.0)));
        pts.push(format!("{:.2},{:.2}", s.x(x_lo), s.y(0.0)));
        let _ = writeln!(out, r##"<polygon fill="#9ecae1" fill-opacity="0.45" stroke="none" points="{}"/>"##, pts.join(" "));
    }

    // Axes and ticks.
    let (ax0, ax1, ay0, ay1) = (s.x(s.x0), s.x(s.x1), s.y(s.y0), s.y(s.y1));
    let _ = writeln!(out, r#"<line x1="{ax0:.2}" y1="{ay0:.2}" x2="{ax1:.2}" y2="{ay0:.2}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{ax0:.2}" y1="{ay0:.2}" x2="{ax0:.2}" y2="{ay1:.2}" stroke="black"/>"#);
    for k in 0..=5 {
        let v = s.x0 + (s.x1 - s.x0) * k as f64 / 5.0;
        let x = s.x(v);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{ay0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, ay0 + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.3}</text>"#, ay0 + 19.0);
        let v = s.y0 + (s.y1 - s.y0) * k as f64 / 5.0;
        let y = s.y(v);
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{y:.2}" x2="{ax0:.2}" y2="{y:.2}" stroke="black"/>"#, ax0 - 5.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, ax0 - 8.0, y + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">c</text>"#, (ax0 + ax1) / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">b</text>"#,
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0
    );

    if let Some((lo, hi)) = p.bands {
        polyline(&mut out, &s, p.c, lo, r##"stroke="#555555" stroke-width="1.2" stroke-dasharray="6 4""##);
        polyline(&mut out, &s, p.c, hi, r##"stroke="#555555" stroke-width="1.2" stroke-dasharray="6 4""##);
    }
    polyline(&mut out, &s, p.c, p.soft, r##"stroke="#d62728" stroke-width="1.2""##);
    polyline(&mut out, &s, p.c, p.bf, r##"stroke="#08306b" stroke-width="2""##);

    // Legend.
    let lx = WIDTH - RIGHT - 170.0;
    let mut entries = vec![("#08306b", "", "BF"), ("#d62728", "", "soft BF")];
    if p.bands.is_some() {
        entries.push(("#555555", r#" stroke-dasharray="6 4""#, "pointwise band"));
    }
    for (i, (color, dash, label)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 16.0 * i as f64;
        let _ = writeln!(out, r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 24.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{label}</text>"#, lx + 30.0, y + 4.0);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_all_layers() {
        let c = [0.0, 0.1, 0.2];
        let bf = [0.3, 0.2, 0.0];
        let soft = [0.31, 0.2, 0.01];
        let lo = [0.2, 0.1, -0.01];
        let hi = [0.4, 0.3, 0.05];
        let svg = render(&PlotInput { e0: 0.8, c: &c, bf: &bf, soft: &soft, bands: Some((&lo, &hi)) });
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn flat_curve_does_not_divide_by_zero() {
        let c = [0.0, 0.5];
        let z = [0.0, 0.0];
        let svg = render(&PlotInput { e0: 0.9, c: &c, bf: &z, soft: &z, bands: None });
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
